//! Drift/diffusion model descriptions consumed by the simulator and the
//! estimator.
//!
//! Dimensions follow the state equation: state in `R^d`, noise in `R^r`,
//! parameter in a compact box in `R^{d_theta}`. Matrices are row-major slices.

use crate::error::{Error, Result};

/// A drift declared linear in the parameter: `b(x, theta) = phi(x) theta + phi0(x)`.
/// Enables the closed-form weighted least-squares estimator.
pub trait LinearDrift {
    /// Writes the `d x d_theta` design matrix `phi(x)` (row-major).
    fn phi(&self, x: &[f64], out: &mut [f64]);
    /// Writes the parameter-free offset `phi0(x)` (length `d`).
    fn phi0(&self, x: &[f64], out: &mut [f64]);
}

/// Coefficients of the state equation together with the parameter set.
pub trait Model: Send + Sync {
    fn dim_state(&self) -> usize;
    fn dim_noise(&self) -> usize;
    fn dim_theta(&self) -> usize;

    /// Drift `b(x, theta)`, written into `out` (length `d`).
    fn drift(&self, x: &[f64], theta: &[f64], out: &mut [f64]);

    /// Parameter Jacobian of the drift, `d x d_theta` row-major.
    fn drift_jacobian_theta(&self, x: &[f64], theta: &[f64], out: &mut [f64]);

    /// Diffusion `a(x)`, `d x r` row-major.
    fn diffusion(&self, x: &[f64], out: &mut [f64]);

    /// Per-coordinate closed parameter intervals (compact convex box).
    fn theta_box(&self) -> &[(f64, f64)];

    /// True parameter used by the simulator.
    fn theta_star(&self) -> &[f64];

    fn x0(&self) -> &[f64];

    /// Present when the drift is linear in theta.
    fn linear_drift(&self) -> Option<&dyn LinearDrift> {
        None
    }

    fn validate(&self) -> Result<()> {
        let b = self.theta_box();
        if b.len() != self.dim_theta() {
            return Err(Error::InvalidInput(
                "theta_box length does not match dim_theta".into(),
            ));
        }
        for (i, ((lo, hi), th)) in b.iter().zip(self.theta_star()).enumerate() {
            if !(lo <= th && th <= hi) {
                return Err(Error::InvalidInput(format!(
                    "theta_star[{i}]={th} outside its box [{lo}, {hi}]"
                )));
            }
        }
        Ok(())
    }
}

/// Scalar model with `b(x, theta) = theta_0 x + theta_1` and unit diffusion.
#[derive(Debug, Clone)]
pub struct LinearAffineModel {
    theta_star: Vec<f64>,
    theta_box: Vec<(f64, f64)>,
    x0: Vec<f64>,
}

impl LinearAffineModel {
    pub fn new(theta_star: [f64; 2], x0: f64) -> Self {
        Self {
            theta_star: theta_star.to_vec(),
            theta_box: vec![(-20.0, 20.0), (-20.0, 20.0)],
            x0: vec![x0],
        }
    }

    pub fn with_box(mut self, theta_box: [(f64, f64); 2]) -> Self {
        self.theta_box = theta_box.to_vec();
        self
    }
}

impl Default for LinearAffineModel {
    /// The mean-reverting benchmark: `theta* = (-1, 1)`, started at the origin.
    fn default() -> Self {
        Self::new([-1.0, 1.0], 0.0)
    }
}

impl LinearDrift for LinearAffineModel {
    fn phi(&self, x: &[f64], out: &mut [f64]) {
        out[0] = x[0];
        out[1] = 1.0;
    }

    fn phi0(&self, _x: &[f64], out: &mut [f64]) {
        out[0] = 0.0;
    }
}

impl Model for LinearAffineModel {
    fn dim_state(&self) -> usize {
        1
    }

    fn dim_noise(&self) -> usize {
        1
    }

    fn dim_theta(&self) -> usize {
        2
    }

    fn drift(&self, x: &[f64], theta: &[f64], out: &mut [f64]) {
        out[0] = theta[0] * x[0] + theta[1];
    }

    fn drift_jacobian_theta(&self, x: &[f64], _theta: &[f64], out: &mut [f64]) {
        out[0] = x[0];
        out[1] = 1.0;
    }

    fn diffusion(&self, _x: &[f64], out: &mut [f64]) {
        out[0] = 1.0;
    }

    fn theta_box(&self) -> &[(f64, f64)] {
        &self.theta_box
    }

    fn theta_star(&self) -> &[f64] {
        &self.theta_star
    }

    fn x0(&self) -> &[f64] {
        &self.x0
    }

    fn linear_drift(&self) -> Option<&dyn LinearDrift> {
        Some(self)
    }
}

/// Driftless scalar model with unit diffusion; used for roughness and
/// moment studies where only the noise convolution matters.
#[derive(Debug, Clone)]
pub struct PureNoiseModel {
    theta_box: Vec<(f64, f64)>,
    theta_star: Vec<f64>,
    x0: Vec<f64>,
}

impl PureNoiseModel {
    pub fn new(x0: f64) -> Self {
        Self {
            theta_box: vec![(-1.0, 1.0)],
            theta_star: vec![0.0],
            x0: vec![x0],
        }
    }
}

impl Default for PureNoiseModel {
    fn default() -> Self {
        Self::new(0.0)
    }
}

impl Model for PureNoiseModel {
    fn dim_state(&self) -> usize {
        1
    }

    fn dim_noise(&self) -> usize {
        1
    }

    fn dim_theta(&self) -> usize {
        1
    }

    fn drift(&self, _x: &[f64], _theta: &[f64], out: &mut [f64]) {
        out[0] = 0.0;
    }

    fn drift_jacobian_theta(&self, _x: &[f64], _theta: &[f64], out: &mut [f64]) {
        out[0] = 0.0;
    }

    fn diffusion(&self, _x: &[f64], out: &mut [f64]) {
        out[0] = 1.0;
    }

    fn theta_box(&self) -> &[(f64, f64)] {
        &self.theta_box
    }

    fn theta_star(&self) -> &[f64] {
        &self.theta_star
    }

    fn x0(&self) -> &[f64] {
        &self.x0
    }
}

/// Model selection by identifier, as used by the CLI and experiment configs.
pub fn model_from_id(id: &str, theta_star: Option<[f64; 2]>, x0: f64) -> Result<Box<dyn Model>> {
    match id {
        "linear-affine" => Ok(Box::new(LinearAffineModel::new(
            theta_star.unwrap_or([-1.0, 1.0]),
            x0,
        ))),
        "pure-noise" => Ok(Box::new(PureNoiseModel::new(x0))),
        other => Err(Error::InvalidInput(format!(
            "unknown model id '{other}' (expected 'linear-affine' or 'pure-noise')"
        ))),
    }
}
