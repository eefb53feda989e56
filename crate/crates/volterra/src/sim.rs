//! Path simulation for the small-noise state equation
//! `X_t = x0 + eps int K(t-s) a(X_s) dB_s + int K(t-s) b(X_s, theta*) ds`
//! on a uniform fine grid, together with the deterministic limit path and
//! the coupled oracle semimartingale `Z_t = eps int a dB + int b dt`.
//!
//! The scheme evaluates coefficients at the left node and uses the exact
//! kernel integral over each cell as convolution weight, for drift and
//! (rescaled) diffusion alike. One Brownian increment array drives both the
//! state and the oracle, which the reconstruction error studies rely on.

use crate::error::{Error, Result};
use crate::kernel::FractionalKernelParams;
use crate::model::Model;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// Simulation request: noise level, roughness, horizon, resolution, seed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    pub epsilon: f64,
    pub alpha: f64,
    pub t_horizon: f64,
    pub n_fine: usize,
    pub seed: u64,
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.epsilon) || !self.epsilon.is_finite() {
            return Err(Error::InvalidInput(format!(
                "epsilon must lie in [0,1], got {}",
                self.epsilon
            )));
        }
        if self.n_fine < 2 {
            return Err(Error::InvalidInput(format!(
                "n_fine must be at least 2, got {}",
                self.n_fine
            )));
        }
        if !(self.t_horizon > 0.0) || !self.t_horizon.is_finite() {
            return Err(Error::InvalidInput(format!(
                "horizon must be positive, got {}",
                self.t_horizon
            )));
        }
        FractionalKernelParams::new(self.alpha).map(|_| ())
    }

    #[inline]
    pub fn delta(&self) -> f64 {
        self.t_horizon / self.n_fine as f64
    }
}

/// Fine-grid path of the state, the Brownian increments that drove it, and
/// the coupled oracle semimartingale. Matrices are row-major by time index.
#[derive(Debug, Clone)]
pub struct SimulatedPath {
    pub times: Vec<f64>,
    pub x: Vec<f64>,
    pub db: Vec<f64>,
    pub z_oracle: Vec<f64>,
    pub dim_state: usize,
    pub dim_noise: usize,
    pub delta: f64,
}

impl SimulatedPath {
    #[inline]
    pub fn n_steps(&self) -> usize {
        self.times.len() - 1
    }

    #[inline]
    pub fn x_at(&self, i: usize) -> &[f64] {
        &self.x[i * self.dim_state..(i + 1) * self.dim_state]
    }

    #[inline]
    pub fn z_at(&self, i: usize) -> &[f64] {
        &self.z_oracle[i * self.dim_state..(i + 1) * self.dim_state]
    }

    #[inline]
    pub fn db_at(&self, i: usize) -> &[f64] {
        &self.db[i * self.dim_noise..(i + 1) * self.dim_noise]
    }
}

/// The noise-free limit path.
#[derive(Debug, Clone)]
pub struct DeterministicPath {
    pub times: Vec<f64>,
    pub x: Vec<f64>,
    pub dim_state: usize,
    pub delta: f64,
}

impl DeterministicPath {
    #[inline]
    pub fn x_at(&self, i: usize) -> &[f64] {
        &self.x[i * self.dim_state..(i + 1) * self.dim_state]
    }

    #[inline]
    pub fn n_steps(&self) -> usize {
        self.times.len() - 1
    }
}

/// Exact cell-integral convolution weights `w[m] = int_{(m-1)d}^{md} K(v) dv`.
fn kernel_weights(n: usize, delta: f64, p: &FractionalKernelParams) -> Vec<f64> {
    let alpha = p.alpha();
    let norm = p.gamma_alpha_plus_one();
    let mut pow = Vec::with_capacity(n + 1);
    for i in 0..=n {
        pow.push((i as f64 * delta).powf(alpha));
    }
    let mut w = vec![0.0; n + 1];
    for m in 1..=n {
        w[m] = (pow[m] - pow[m - 1]) / norm;
    }
    w
}

const DIVERGENCE_LIMIT: f64 = 1e8;

/// Simulates one path, drawing the Brownian increments from a ChaCha stream
/// seeded by `cfg.seed`.
pub fn simulate(model: &dyn Model, cfg: &SimConfig) -> Result<SimulatedPath> {
    cfg.validate()?;
    model.validate()?;
    let n = cfg.n_fine;
    let r = model.dim_noise();
    let delta = cfg.delta();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let sqrt_delta = delta.sqrt();
    let mut db = vec![0.0; n * r];
    for v in db.iter_mut() {
        let z: f64 = StandardNormal.sample(&mut rng);
        *v = sqrt_delta * z;
    }
    simulate_driven(model, cfg, &db)
}

/// Simulates one path from caller-supplied Brownian increments (`n_fine x r`,
/// row-major, each of variance `delta`). Used by coupling studies and tests.
pub fn simulate_driven(model: &dyn Model, cfg: &SimConfig, db: &[f64]) -> Result<SimulatedPath> {
    cfg.validate()?;
    model.validate()?;
    let d = model.dim_state();
    let r = model.dim_noise();
    let n = cfg.n_fine;
    if db.len() != n * r {
        return Err(Error::InvalidInput(format!(
            "increment array has length {}, expected {}",
            db.len(),
            n * r
        )));
    }
    let delta = cfg.delta();
    let eps = cfg.epsilon;
    let params = FractionalKernelParams::new(cfg.alpha)?;
    let w = kernel_weights(n, delta, &params);
    let theta = model.theta_star();
    let x0 = model.x0();

    let times: Vec<f64> = (0..=n).map(|i| i as f64 * delta).collect();
    let mut x = vec![0.0; (n + 1) * d];
    let mut z = vec![0.0; (n + 1) * d];
    x[..d].copy_from_slice(x0);

    if d == 1 && r == 1 {
        // Scalar fast path: the convolution dominates the Monte Carlo budget.
        let mut src = vec![0.0; n];
        let mut b = [0.0];
        let mut a = [0.0];
        for i in 1..=n {
            let j = i - 1;
            let xj = [x[j]];
            model.drift(&xj, theta, &mut b);
            model.diffusion(&xj, &mut a);
            src[j] = b[0] + eps * a[0] * db[j] / delta;
            z[i] = z[j] + eps * a[0] * db[j] + b[0] * delta;
            let mut acc = 0.0;
            for (m, s) in src[..i].iter().rev().enumerate() {
                acc += w[m + 1] * s;
            }
            let xi = x0[0] + acc;
            if !xi.is_finite() || xi.abs() > DIVERGENCE_LIMIT {
                return Err(Error::SimulationDiverged { index: i });
            }
            x[i] = xi;
        }
    } else {
        let mut src = vec![0.0; n * d];
        let mut b = vec![0.0; d];
        let mut a = vec![0.0; d * r];
        for i in 1..=n {
            let j = i - 1;
            let xj = x[j * d..i * d].to_vec();
            model.drift(&xj, theta, &mut b);
            model.diffusion(&xj, &mut a);
            for c in 0..d {
                let mut adb = 0.0;
                for l in 0..r {
                    adb += a[c * r + l] * db[j * r + l];
                }
                src[j * d + c] = b[c] + eps * adb / delta;
                z[i * d + c] = z[j * d + c] + eps * adb + b[c] * delta;
            }
            for c in 0..d {
                let mut acc = 0.0;
                for jj in 0..i {
                    acc += w[i - jj] * src[jj * d + c];
                }
                let xi = x0[c] + acc;
                if !xi.is_finite() || xi.abs() > DIVERGENCE_LIMIT {
                    return Err(Error::SimulationDiverged { index: i });
                }
                x[i * d + c] = xi;
            }
        }
    }

    Ok(SimulatedPath {
        times,
        x,
        db: db.to_vec(),
        z_oracle: z,
        dim_state: d,
        dim_noise: r,
        delta,
    })
}

/// Runs the same scheme with `epsilon = 0`; consumes no randomness.
pub fn simulate_deterministic(model: &dyn Model, cfg: &SimConfig) -> Result<DeterministicPath> {
    let det_cfg = SimConfig { epsilon: 0.0, ..*cfg };
    let db = vec![0.0; cfg.n_fine * model.dim_noise()];
    let path = simulate_driven(model, &det_cfg, &db)?;
    Ok(DeterministicPath {
        times: path.times,
        x: path.x,
        dim_state: path.dim_state,
        delta: path.delta,
    })
}

/// Monte Carlo estimate of `E |X_{t+lag} - X_t|^p`, averaged over all grid
/// positions `t` and over the supplied paths. `lag` must be a multiple of
/// the fine step and `p` one of 2 or 4.
pub fn empirical_increment_moments(paths: &[SimulatedPath], p: f64, lag: f64) -> Result<f64> {
    if paths.is_empty() {
        return Err(Error::InvalidInput("no paths supplied".into()));
    }
    if p != 2.0 && p != 4.0 {
        return Err(Error::InvalidInput(format!("p must be 2 or 4, got {p}")));
    }
    let delta = paths[0].delta;
    let steps = (lag / delta).round() as usize;
    if steps == 0 || (steps as f64 * delta - lag).abs() > 1e-9 * delta {
        return Err(Error::InvalidInput(format!(
            "lag {lag} is not a positive multiple of the fine step {delta}"
        )));
    }
    let mut total = 0.0;
    let mut count = 0usize;
    for path in paths {
        if (path.delta - delta).abs() > 1e-12 * delta {
            return Err(Error::Alignment("paths have inconsistent fine steps".into()));
        }
        let n = path.n_steps();
        if steps > n {
            return Err(Error::InvalidInput("lag exceeds the path horizon".into()));
        }
        let d = path.dim_state;
        for i in 0..=(n - steps) {
            let a = path.x_at(i + steps);
            let b = path.x_at(i);
            let norm_sq: f64 = (0..d).map(|c| (a[c] - b[c]) * (a[c] - b[c])).sum();
            total += if p == 2.0 { norm_sq } else { norm_sq * norm_sq };
            count += 1;
        }
    }
    Ok(total / count as f64)
}
