//! Quasi-likelihood drift estimation from reconstructed semimartingale
//! increments: block residuals `Xi_j = dZ_j - Delta b(X_j, theta)`, the
//! weighted contrast `sum_j Xi_j^T H(X_j) Xi_j`, its minimizer over the
//! parameter box, and the limit information matrix along the noise-free path.

use crate::error::{Error, Result};
use crate::invert::{ReconstructedPath, SampledObservation};
use crate::model::Model;
use crate::optim::{multistart_points, nelder_mead_box, NelderMeadRun, NelderMeadSettings};
use crate::sim::DeterministicPath;
use nalgebra::DMatrix;

/// Choice of the symmetric block weight `H(x)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WeightRule {
    Identity,
    /// `(a a^T + lambda I)^{-1}`; the regularizer guards degenerate diffusions.
    InverseDiffusion { lambda: f64 },
}

impl WeightRule {
    pub fn inverse_diffusion() -> Self {
        Self::InverseDiffusion { lambda: 1e-12 }
    }

    pub fn validate(&self) -> Result<()> {
        if let Self::InverseDiffusion { lambda } = self {
            if !(*lambda >= 0.0) || !lambda.is_finite() {
                return Err(Error::Weight(format!("lambda must be >= 0, got {lambda}")));
            }
        }
        Ok(())
    }
}

impl std::str::FromStr for WeightRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "identity" => Ok(Self::Identity),
            "inverse-diffusion" => Ok(Self::inverse_diffusion()),
            other => Err(Error::InvalidInput(format!(
                "unknown weight rule '{other}' (expected 'identity' or 'inverse-diffusion')"
            ))),
        }
    }
}

/// How the contrast is minimized.
#[derive(Debug, Clone, PartialEq)]
pub enum MinimizerRule {
    /// Weighted normal equations; requires a drift declared linear in theta.
    ClosedFormLinear,
    NelderMead(NelderMeadSettings),
}

/// Validated estimation settings.
#[derive(Debug, Clone)]
pub struct ContrastConfig {
    pub k: usize,
    pub weight: WeightRule,
    pub minimizer: MinimizerRule,
}

impl ContrastConfig {
    pub fn closed_form(k: usize) -> Self {
        Self { k, weight: WeightRule::Identity, minimizer: MinimizerRule::ClosedFormLinear }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::InvalidInput("subsampling factor k must be >= 1".into()));
        }
        self.weight.validate()?;
        if let MinimizerRule::NelderMead(s) = &self.minimizer {
            if s.max_iter < 100 {
                return Err(Error::InvalidInput("NelderMead max_iter must be >= 100".into()));
            }
            if !(s.tolerance > 0.0) {
                return Err(Error::InvalidInput("NelderMead tolerance must be > 0".into()));
            }
            if s.multistarts < 1 {
                return Err(Error::InvalidInput("NelderMead needs at least one start".into()));
            }
        }
        Ok(())
    }
}

/// Reconstructed increments and state observations on the block grid.
#[derive(Debug, Clone)]
pub struct EstimationData {
    pub delta: f64,
    pub z: Vec<f64>,
    pub x: Vec<f64>,
    pub dim_state: usize,
}

impl EstimationData {
    pub fn new(delta: f64, z: Vec<f64>, x: Vec<f64>, dim_state: usize) -> Result<Self> {
        if !(delta > 0.0) {
            return Err(Error::InvalidInput("block length must be positive".into()));
        }
        if z.len() != x.len() || dim_state == 0 || z.len() % dim_state != 0 {
            return Err(Error::InvalidInput(
                "z and x must have matching (N+1) x d layouts".into(),
            ));
        }
        if z.len() / dim_state < 2 {
            return Err(Error::InvalidInput("need at least one block".into()));
        }
        Ok(Self { delta, z, x, dim_state })
    }

    /// Pairs a reconstruction with the observations it came from, reading the
    /// state at the block ends.
    pub fn from_parts(recon: &ReconstructedPath, obs: &SampledObservation) -> Result<Self> {
        if recon.dim_state != obs.dim_state() {
            return Err(Error::Alignment("reconstruction and observation dimensions differ".into()));
        }
        let k = recon.k;
        if recon.n_blocks() * k > obs.n() {
            return Err(Error::Alignment("reconstruction extends past the observations".into()));
        }
        let d = obs.dim_state();
        let mut x = Vec::with_capacity((recon.n_blocks() + 1) * d);
        for j in 0..=recon.n_blocks() {
            x.extend_from_slice(obs.x_at(j * k));
        }
        Self::new(recon.delta, recon.z.clone(), x, d)
    }

    #[inline]
    pub fn n_blocks(&self) -> usize {
        self.z.len() / self.dim_state - 1
    }

    #[inline]
    pub fn z_at(&self, j: usize) -> &[f64] {
        &self.z[j * self.dim_state..(j + 1) * self.dim_state]
    }

    #[inline]
    pub fn x_at(&self, j: usize) -> &[f64] {
        &self.x[j * self.dim_state..(j + 1) * self.dim_state]
    }
}

/// Block residual `Xi_j(theta) = Z_{(j+1)Delta} - Z_{j Delta} - Delta b(X_{j Delta}, theta)`.
pub fn xi_block(
    data: &EstimationData,
    model: &dyn Model,
    j: usize,
    theta: &[f64],
) -> Result<Vec<f64>> {
    if j >= data.n_blocks() {
        return Err(Error::InvalidInput(format!(
            "block index {j} out of range 0..{}",
            data.n_blocks()
        )));
    }
    let d = data.dim_state;
    let mut b = vec![0.0; d];
    model.drift(data.x_at(j), theta, &mut b);
    let z0 = data.z_at(j);
    let z1 = data.z_at(j + 1);
    Ok((0..d).map(|c| z1[c] - z0[c] - data.delta * b[c]).collect())
}

/// Dense `d x d` weight at one state value (row-major).
fn weight_at(model: &dyn Model, x: &[f64], rule: WeightRule) -> Result<Vec<f64>> {
    let d = model.dim_state();
    let r = model.dim_noise();
    match rule {
        WeightRule::Identity => {
            let mut h = vec![0.0; d * d];
            for c in 0..d {
                h[c * d + c] = 1.0;
            }
            Ok(h)
        }
        WeightRule::InverseDiffusion { lambda } => {
            let mut a = vec![0.0; d * r];
            model.diffusion(x, &mut a);
            let mut m = DMatrix::zeros(d, d);
            for i in 0..d {
                for j in 0..d {
                    let mut s = 0.0;
                    for l in 0..r {
                        s += a[i * r + l] * a[j * r + l];
                    }
                    m[(i, j)] = s + if i == j { lambda } else { 0.0 };
                }
            }
            let chol = m.clone().cholesky().ok_or_else(|| {
                Error::Weight("diffusion outer product is not positive definite".into())
            })?;
            let inv = chol.inverse();
            Ok(inv.iter().cloned().collect::<Vec<f64>>())
        }
    }
}

/// Weighted residual sum `sum_j Xi_j^T H(X_j) Xi_j`.
pub fn contrast(
    data: &EstimationData,
    model: &dyn Model,
    theta: &[f64],
    cfg: &ContrastConfig,
) -> Result<f64> {
    cfg.validate()?;
    for ((lo, hi), v) in model.theta_box().iter().zip(theta) {
        if !(lo <= v && v <= hi) {
            return Err(Error::Contract(format!("theta value {v} outside box [{lo}, {hi}]")));
        }
    }
    let d = data.dim_state;
    let mut total = 0.0;
    let mut b = vec![0.0; d];
    for j in 0..data.n_blocks() {
        model.drift(data.x_at(j), theta, &mut b);
        let h = weight_at(model, data.x_at(j), cfg.weight)?;
        let z0 = data.z_at(j);
        let z1 = data.z_at(j + 1);
        let mut quad = 0.0;
        for ic in 0..d {
            let xi_i = z1[ic] - z0[ic] - data.delta * b[ic];
            for jc in 0..d {
                let xi_j = z1[jc] - z0[jc] - data.delta * b[jc];
                quad += xi_i * h[ic * d + jc] * xi_j;
            }
        }
        total += quad;
    }
    Ok(total)
}

/// One multistart trace for diagnostics.
#[derive(Debug, Clone)]
pub struct StartDiagnostic {
    pub start: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Minimizer output.
#[derive(Debug, Clone)]
pub struct EstimationResult {
    pub theta_hat: Vec<f64>,
    pub contrast_value: f64,
    pub n_blocks: usize,
    pub converged: bool,
    pub diagnostics: Vec<StartDiagnostic>,
}

impl EstimationResult {
    /// One CSV line `theta_1,..,theta_dT,contrast,n_blocks,converged`.
    pub fn to_csv_row(&self) -> String {
        let mut cols: Vec<String> = self.theta_hat.iter().map(|v| format!("{v}")).collect();
        cols.push(format!("{}", self.contrast_value));
        cols.push(format!("{}", self.n_blocks));
        cols.push(format!("{}", self.converged));
        cols.join(",")
    }

    /// `key=value` lines for logs and scripts.
    pub fn to_kv(&self) -> String {
        let mut out = String::new();
        for (i, v) in self.theta_hat.iter().enumerate() {
            out.push_str(&format!("theta_{i}={v}\n"));
        }
        out.push_str(&format!("contrast={}\n", self.contrast_value));
        out.push_str(&format!("n_blocks={}\n", self.n_blocks));
        out.push_str(&format!("converged={}\n", self.converged));
        out
    }
}

fn clamp_to_box(theta: &mut [f64], boxc: &[(f64, f64)]) {
    for (v, (lo, hi)) in theta.iter_mut().zip(boxc) {
        *v = v.clamp(*lo, *hi);
    }
}

/// Minimizes the contrast over the parameter box.
///
/// With `ClosedFormLinear` and a drift `b(x, theta) = phi(x) theta + phi0(x)`
/// the weighted normal equations
/// `[sum_j Delta phi_j^T H_j phi_j] theta = sum_j phi_j^T H_j (dZ_j - Delta phi0_j)`
/// are solved directly; for the scalar affine drift with identity weight this
/// is the familiar 2x2 system in `(sum X^2, sum X)`.
pub fn estimate(
    data: &EstimationData,
    model: &dyn Model,
    cfg: &ContrastConfig,
) -> Result<EstimationResult> {
    cfg.validate()?;
    model.validate()?;
    match &cfg.minimizer {
        MinimizerRule::ClosedFormLinear => {
            let linear = model.linear_drift().ok_or_else(|| {
                Error::InvalidInput(
                    "closed-form estimation requires a drift linear in theta".into(),
                )
            })?;
            let d = data.dim_state;
            let dt = model.dim_theta();
            let n = data.n_blocks();
            let delta = data.delta;
            let mut a = DMatrix::<f64>::zeros(dt, dt);
            let mut rhs = vec![0.0; dt];
            let mut phi = vec![0.0; d * dt];
            let mut phi0 = vec![0.0; d];
            for j in 0..n {
                let x = data.x_at(j);
                linear.phi(x, &mut phi);
                linear.phi0(x, &mut phi0);
                let h = weight_at(model, x, cfg.weight)?;
                let z0 = data.z_at(j);
                let z1 = data.z_at(j + 1);
                for u in 0..dt {
                    // column u of H phi and the weighted residual, per state row
                    for ic in 0..d {
                        let mut h_phi_u = 0.0;
                        let mut h_res = 0.0;
                        for jc in 0..d {
                            h_phi_u += h[ic * d + jc] * phi[jc * dt + u];
                            h_res += h[ic * d + jc] * (z1[jc] - z0[jc] - delta * phi0[jc]);
                        }
                        for v in 0..dt {
                            a[(v, u)] += delta * phi[ic * dt + v] * h_phi_u;
                        }
                        rhs[u] += phi[ic * dt + u] * h_res;
                    }
                }
            }
            let svd = a.clone().svd(false, false);
            let smax = svd.singular_values.max();
            let smin = svd.singular_values.min();
            let cond = if smin > 0.0 { smax / smin } else { f64::INFINITY };
            if !cond.is_finite() || cond > 1e12 {
                return Err(Error::RankDeficient { cond });
            }
            let sol = a
                .lu()
                .solve(&DMatrix::from_column_slice(dt, 1, &rhs))
                .ok_or(Error::RankDeficient { cond })?;
            let mut theta: Vec<f64> = sol.iter().cloned().collect();
            clamp_to_box(&mut theta, model.theta_box());
            let value = contrast(data, model, &theta, cfg)?;
            Ok(EstimationResult {
                theta_hat: theta,
                contrast_value: value,
                n_blocks: n,
                converged: true,
                diagnostics: Vec::new(),
            })
        }
        MinimizerRule::NelderMead(settings) => {
            let boxc = model.theta_box().to_vec();
            let starts = multistart_points(&boxc, settings.multistarts);
            let mut runs: Vec<(Vec<f64>, NelderMeadRun)> = Vec::with_capacity(starts.len());
            for start in starts {
                let run = nelder_mead_box(
                    |theta| {
                        contrast(data, model, theta, cfg).unwrap_or(f64::INFINITY)
                    },
                    &boxc,
                    &start,
                    settings,
                );
                runs.push((start, run));
            }
            // best value, ties broken by lexicographically smallest theta
            let mut best = 0usize;
            for i in 1..runs.len() {
                let (fi, fb) = (runs[i].1.f, runs[best].1.f);
                if fi < fb - 1e-12 {
                    best = i;
                } else if (fi - fb).abs() <= 1e-12 && runs[i].1.x < runs[best].1.x {
                    // lexicographic tie-break keeps multistart output deterministic
                    best = i;
                }
            }
            let chosen = runs[best].1.clone();
            let mut theta = chosen.x.clone();
            clamp_to_box(&mut theta, &boxc);
            let value = contrast(data, model, &theta, cfg)?;
            Ok(EstimationResult {
                theta_hat: theta,
                contrast_value: value,
                n_blocks: data.n_blocks(),
                converged: chosen.converged,
                diagnostics: runs
                    .into_iter()
                    .map(|(start, run)| StartDiagnostic {
                        start,
                        value: run.f,
                        iterations: run.iterations,
                        converged: run.converged,
                    })
                    .collect(),
            })
        }
    }
}

/// Limit information matrix along the noise-free path and its inverse.
#[derive(Debug, Clone)]
pub struct FisherInfo {
    pub matrix: DMatrix<f64>,
    pub inverse: Option<DMatrix<f64>>,
    pub used_weight: WeightRule,
    /// With identity weight, whether `a a^T = I` held along the path, making
    /// the identity-weighted matrix the actual information of the observation.
    pub identity_equals_fisher: bool,
    pub cond: f64,
}

/// Trapezoidal `I_{uv} = int_0^T (d_theta b)^T H (d_theta b) dt` along the
/// noise-free path; requires at least 2^12 grid nodes.
pub fn fisher_info(
    x0_path: &DeterministicPath,
    model: &dyn Model,
    theta_star: &[f64],
    weight: WeightRule,
) -> Result<FisherInfo> {
    weight.validate()?;
    if x0_path.n_steps() + 1 < (1 << 12) {
        return Err(Error::InvalidInput(format!(
            "information quadrature needs >= 4096 nodes, got {}",
            x0_path.n_steps() + 1
        )));
    }
    let d = model.dim_state();
    let r = model.dim_noise();
    let dt_dim = model.dim_theta();
    let delta = x0_path.delta;
    let mut m = DMatrix::<f64>::zeros(dt_dim, dt_dim);
    let mut jac = vec![0.0; d * dt_dim];
    let mut a = vec![0.0; d * r];
    let mut identity_ok = matches!(weight, WeightRule::Identity);
    let n = x0_path.n_steps();
    for i in 0..=n {
        let x = x0_path.x_at(i);
        model.drift_jacobian_theta(x, theta_star, &mut jac);
        let h = weight_at(model, x, weight)?;
        if identity_ok {
            model.diffusion(x, &mut a);
            for ic in 0..d {
                for jc in 0..d {
                    let mut s = 0.0;
                    for l in 0..r {
                        s += a[ic * r + l] * a[jc * r + l];
                    }
                    let target = if ic == jc { 1.0 } else { 0.0 };
                    if (s - target).abs() > 1e-12 {
                        identity_ok = false;
                    }
                }
            }
        }
        let w = if i == 0 || i == n { 0.5 * delta } else { delta };
        for u in 0..dt_dim {
            for v in 0..dt_dim {
                let mut s = 0.0;
                for ic in 0..d {
                    for jc in 0..d {
                        s += jac[ic * dt_dim + u] * h[ic * d + jc] * jac[jc * dt_dim + v];
                    }
                }
                m[(u, v)] += w * s;
            }
        }
    }
    // enforce exact symmetry against floating-point drift
    let mt = m.transpose();
    let m = (m + mt) * 0.5;
    let svd = m.clone().svd(false, false);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if smin <= smax * 1e-15 || smax == 0.0 {
        return Err(Error::SingularInformation(
            "the information matrix is not invertible (a drift coordinate carries no parameter)"
                .into(),
        ));
    }
    let cond = smax / smin;
    let inverse = if cond < 1e10 { m.clone().try_inverse() } else { None };
    Ok(FisherInfo { matrix: m, inverse, used_weight: weight, identity_equals_fisher: identity_ok, cond })
}

/// Rescaled and raw asymptotic standard deviations.
#[derive(Debug, Clone)]
pub struct AsymptoticStd {
    /// `sqrt(diag(I^{-1}))`: the std of the rescaled estimation error.
    pub rescaled: Vec<f64>,
    /// `epsilon * rescaled`: the raw-scale std.
    pub raw: Vec<f64>,
}

/// Square roots of the diagonal of the inverse information. Only meaningful
/// when the weight makes the matrix the information of the observation:
/// inverse-diffusion weighting, or identity weighting with unit diffusion.
pub fn asymptotic_std(info: &FisherInfo, epsilon: f64) -> Result<AsymptoticStd> {
    match info.used_weight {
        WeightRule::InverseDiffusion { .. } => {}
        WeightRule::Identity => {
            if !info.identity_equals_fisher {
                return Err(Error::Contract(
                    "identity weight only yields the observation information when a a^T = I"
                        .into(),
                ));
            }
        }
    }
    let inv = info.inverse.as_ref().ok_or_else(|| {
        Error::Contract(format!(
            "information matrix has no inverse (condition number {:.3e})",
            info.cond
        ))
    })?;
    let rescaled: Vec<f64> = (0..inv.nrows()).map(|i| inv[(i, i)].max(0.0).sqrt()).collect();
    let raw = rescaled.iter().map(|v| epsilon * v).collect();
    Ok(AsymptoticStd { rescaled, raw })
}
