//! Monte Carlo experiment engine: replicate the simulate -> invert ->
//! estimate pipeline over an (epsilon, k) grid, aggregate per-cell means and
//! rescaled standard deviations, and run the log-log rate studies.
//!
//! Replications are independent work items distributed over a rayon pool.
//! Per-replication seeds are derived from (master seed, cell content,
//! replication index), so cell statistics do not depend on cell order or on
//! the number of worker threads; aggregation uses pairwise reductions over
//! replication-ordered vectors, which makes serial and parallel runs
//! bit-identical.

use crate::error::{Error, Result};
use crate::invert::{invert, EndpointRule, SampledObservation};
use crate::kernel::FractionalKernelParams;
use crate::model::{LinearAffineModel, Model, PureNoiseModel};
use crate::optim::NelderMeadSettings;
use crate::qmle::{estimate, ContrastConfig, EstimationData, MinimizerRule, WeightRule};
use crate::sim::{simulate, SimConfig};
use crate::util::{derive_seed, ls_slope, mean_std, pairwise_sum};
use rayon::prelude::*;
use std::sync::atomic::{AtomicUsize, Ordering};

/// Which built-in model an experiment runs, with its true parameter.
#[derive(Debug, Clone, PartialEq)]
pub enum ModelSpec {
    LinearAffine { theta_star: [f64; 2], x0: f64 },
    PureNoise { x0: f64 },
}

impl ModelSpec {
    pub fn build(&self) -> Box<dyn Model> {
        match self {
            Self::LinearAffine { theta_star, x0 } => {
                Box::new(LinearAffineModel::new(*theta_star, *x0))
            }
            Self::PureNoise { x0 } => Box::new(PureNoiseModel::new(*x0)),
        }
    }

    pub fn id(&self) -> &'static str {
        match self {
            Self::LinearAffine { .. } => "linear-affine",
            Self::PureNoise { .. } => "pure-noise",
        }
    }
}

impl Default for ModelSpec {
    fn default() -> Self {
        Self::LinearAffine { theta_star: [-1.0, 1.0], x0: 0.0 }
    }
}

/// Full experimental design for one table.
#[derive(Debug, Clone)]
pub struct ExperimentGrid {
    pub alpha: f64,
    pub t_horizon: f64,
    pub h: f64,
    pub epsilon_list: Vec<f64>,
    pub k_list: Vec<usize>,
    pub n_rep: usize,
    pub master_seed: u64,
    pub model: ModelSpec,
    pub weight: WeightRule,
    pub endpoint: EndpointRule,
    /// Fine simulation steps per observation step; 1 simulates directly on
    /// the observation grid, larger values are for bias studies.
    pub n_fine_per_h: usize,
}

impl ExperimentGrid {
    pub fn validate(&self) -> Result<()> {
        FractionalKernelParams::new(self.alpha)?;
        if self.n_rep < 2 {
            return Err(Error::InvalidInput("n_rep must be at least 2".into()));
        }
        if self.n_fine_per_h < 1 {
            return Err(Error::InvalidInput("n_fine_per_h must be at least 1".into()));
        }
        if self.epsilon_list.is_empty() || self.k_list.is_empty() {
            return Err(Error::InvalidInput("epsilon_list and k_list must be non-empty".into()));
        }
        for &eps in &self.epsilon_list {
            if !(eps > 0.0 && eps <= 1.0) {
                return Err(Error::InvalidInput(format!(
                    "table epsilon must lie in (0, 1], got {eps}"
                )));
            }
        }
        let n_obs = self.t_horizon / self.h;
        if (n_obs - n_obs.round()).abs() > 1e-9 * n_obs.max(1.0) || n_obs < 1.0 {
            return Err(Error::InvalidInput(format!(
                "observation step {} must divide the horizon {}",
                self.h, self.t_horizon
            )));
        }
        for &k in &self.k_list {
            if k == 0 || k as f64 * self.h > self.t_horizon + 1e-12 {
                return Err(Error::InvalidInput(format!(
                    "block length k*h = {} exceeds the horizon",
                    k as f64 * self.h
                )));
            }
        }
        Ok(())
    }

    pub fn n_obs(&self) -> usize {
        (self.t_horizon / self.h).round() as usize
    }
}

/// Aggregated estimator statistics for one (epsilon, k) cell.
#[derive(Debug, Clone, PartialEq)]
pub struct CellStats {
    pub mean: Vec<f64>,
    /// Sample standard deviation divided by epsilon.
    pub rescaled_std: Vec<f64>,
    pub n_effective: usize,
    pub epsilon: f64,
    pub k: usize,
    pub delta: f64,
}

impl CellStats {
    /// Whether enough replications survived for the cell to be trusted.
    pub fn accepted(&self, n_rep: usize) -> bool {
        self.n_effective as f64 >= 0.99 * n_rep as f64
    }
}

/// A full table: rows indexed by `k_list`, columns by `epsilon_list`.
#[derive(Debug, Clone)]
pub struct TableResult {
    pub alpha: f64,
    pub t_horizon: f64,
    pub h: f64,
    pub n_rep: usize,
    pub cells: Vec<Vec<CellStats>>,
}

fn estimator_config(model: &dyn Model, grid: &ExperimentGrid, k: usize) -> ContrastConfig {
    let minimizer = if model.linear_drift().is_some() {
        MinimizerRule::ClosedFormLinear
    } else {
        MinimizerRule::NelderMead(NelderMeadSettings::default())
    };
    ContrastConfig { k, weight: grid.weight, minimizer }
}

/// One simulate -> invert -> estimate pass; the seed is fully determined by
/// (master, k, epsilon, replication).
fn run_replication(
    grid: &ExperimentGrid,
    model: &dyn Model,
    params: &FractionalKernelParams,
    epsilon: f64,
    k: usize,
    rep: usize,
) -> Result<Vec<f64>> {
    let seed = derive_seed(grid.master_seed, &[k as u64, epsilon.to_bits(), rep as u64]);
    let n_obs = grid.n_obs();
    let cfg = SimConfig {
        epsilon,
        alpha: grid.alpha,
        t_horizon: grid.t_horizon,
        n_fine: n_obs * grid.n_fine_per_h,
        seed,
    };
    let path = simulate(model, &cfg)?;
    let obs = SampledObservation::from_path(&path, grid.n_fine_per_h)?;
    let recon = invert(&obs, params, k, grid.endpoint)?;
    let data = EstimationData::from_parts(&recon, &obs)?;
    let result = estimate(&data, model, &estimator_config(model, grid, k))?;
    Ok(result.theta_hat)
}

/// Componentwise mean and rescaled std over the surviving replications.
pub(crate) fn aggregate_cell(
    estimates: &[Vec<f64>],
    epsilon: f64,
    k: usize,
    delta: f64,
) -> CellStats {
    let dim = estimates.first().map(|e| e.len()).unwrap_or(0);
    let mut mean = Vec::with_capacity(dim);
    let mut rstd = Vec::with_capacity(dim);
    for c in 0..dim {
        let column: Vec<f64> = estimates.iter().map(|e| e[c]).collect();
        let (m, s) = mean_std(&column);
        mean.push(m);
        rstd.push(s / epsilon);
    }
    CellStats { mean, rescaled_std: rstd, n_effective: estimates.len(), epsilon, k, delta }
}

/// Runs every cell of the grid; `progress` receives the number of completed
/// replications across the whole table.
pub fn run_table(
    grid: &ExperimentGrid,
    progress: Option<&(dyn Fn(usize) + Sync)>,
) -> Result<TableResult> {
    grid.validate()?;
    let model = grid.model.build();
    let params = FractionalKernelParams::new(grid.alpha)?;
    let done = AtomicUsize::new(0);
    let mut cells = Vec::with_capacity(grid.k_list.len());
    for &k in &grid.k_list {
        let mut row = Vec::with_capacity(grid.epsilon_list.len());
        for &eps in &grid.epsilon_list {
            let outcomes: Vec<Result<Vec<f64>>> = (0..grid.n_rep)
                .into_par_iter()
                .map(|rep| {
                    let out = run_replication(grid, model.as_ref(), &params, eps, k, rep);
                    let c = done.fetch_add(1, Ordering::Relaxed) + 1;
                    if let Some(cb) = progress {
                        cb(c);
                    }
                    out
                })
                .collect();
            let mut estimates = Vec::with_capacity(grid.n_rep);
            let mut first_error: Option<String> = None;
            for out in outcomes {
                match out {
                    Ok(theta) => estimates.push(theta),
                    Err(e) => {
                        if first_error.is_none() {
                            first_error = Some(e.to_string());
                        }
                    }
                }
            }
            if estimates.is_empty() {
                return Err(Error::CellFailed {
                    epsilon: eps,
                    k,
                    detail: first_error.unwrap_or_else(|| "no replications ran".into()),
                });
            }
            row.push(aggregate_cell(&estimates, eps, k, k as f64 * grid.h));
        }
        cells.push(row);
    }
    Ok(TableResult {
        alpha: grid.alpha,
        t_horizon: grid.t_horizon,
        h: grid.h,
        n_rep: grid.n_rep,
        cells,
    })
}

/// Least-squares slope of `ln y` against `ln x`, ignoring non-positive or
/// non-finite values; at least three surviving points are required.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> Result<f64> {
    let mut lx = Vec::new();
    let mut ly = Vec::new();
    for (&a, &b) in x.iter().zip(y) {
        if a > 0.0 && b > 0.0 && b.is_finite() {
            lx.push(a.ln());
            ly.push(b.ln());
        }
    }
    if lx.len() < 3 {
        return Err(Error::Regression(format!(
            "need at least 3 positive points for a log-log fit, have {}",
            lx.len()
        )));
    }
    Ok(ls_slope(&lx, &ly))
}

/// Slope of the terminal reconstruction error against the sampling step:
/// for each `h` the path is subsampled, inverted, and compared at the
/// horizon against the coupled oracle; the fine grid sits at `min(h)/4`.
#[allow(clippy::too_many_arguments)]
pub fn rate_reconstruction(
    model: &dyn Model,
    alpha: f64,
    t_horizon: f64,
    h_list: &[f64],
    epsilon: f64,
    n_rep: usize,
    seed: u64,
    endpoint: EndpointRule,
) -> Result<f64> {
    if h_list.len() < 5 {
        return Err(Error::InvalidInput(format!(
            "rate study needs at least 5 steps, got {}",
            h_list.len()
        )));
    }
    let mut hs = h_list.to_vec();
    hs.sort_by(|a, b| b.total_cmp(a));
    let ratio = hs[1] / hs[0];
    for pair in hs.windows(2) {
        let r = pair[1] / pair[0];
        if (r - ratio).abs() > 1e-9 {
            return Err(Error::InvalidInput("h_list must be geometric".into()));
        }
    }
    let params = FractionalKernelParams::new(alpha)?;
    let h_min = *hs.last().unwrap();
    let fine_per_min = 4usize;
    let delta = h_min / fine_per_min as f64;
    let n_fine = (t_horizon / delta).round() as usize;
    if ((t_horizon / delta) - n_fine as f64).abs() > 1e-9 {
        return Err(Error::InvalidInput("every h must divide the horizon".into()));
    }
    for &h in &hs {
        let s = h / delta;
        if (s - s.round()).abs() > 1e-9 {
            return Err(Error::InvalidInput(format!(
                "step {h} is not a multiple of the fine step {delta}"
            )));
        }
    }

    let per_rep: Vec<Vec<f64>> = (0..n_rep)
        .into_par_iter()
        .map(|rep| -> Result<Vec<f64>> {
            let cfg = SimConfig {
                epsilon,
                alpha,
                t_horizon,
                n_fine,
                seed: derive_seed(seed, &[rep as u64]),
            };
            let path = simulate(model, &cfg)?;
            let z_end = path.z_at(n_fine).to_vec();
            let mut errs = Vec::with_capacity(hs.len());
            for &h in &hs {
                let stride = (h / delta).round() as usize;
                let obs = SampledObservation::from_path(&path, stride)?;
                // a single block spanning the whole horizon queries only T
                let recon = invert(&obs, &params, obs.n(), endpoint)?;
                let zr = recon.z_at(recon.n_blocks());
                let err = zr
                    .iter()
                    .zip(&z_end)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    .sqrt();
                errs.push(err);
            }
            Ok(errs)
        })
        .collect::<Result<Vec<_>>>()?;

    let mean_errs: Vec<f64> = (0..hs.len())
        .map(|i| {
            let col: Vec<f64> = per_rep.iter().map(|r| r[i]).collect();
            pairwise_sum(&col) / n_rep as f64
        })
        .collect();
    loglog_slope(&hs, &mean_errs)
}

/// Slope of the estimator RMSE against epsilon under a fixed k-policy:
/// `k_list` must pair with `epsilon_list` (or hold a single broadcast k).
pub fn rate_estimator(grid: &ExperimentGrid) -> Result<f64> {
    grid.validate()?;
    if grid.epsilon_list.len() < 3 {
        return Err(Error::Regression(format!(
            "estimator rate study needs at least 3 epsilon values, got {}",
            grid.epsilon_list.len()
        )));
    }
    let ks: Vec<usize> = if grid.k_list.len() == 1 {
        vec![grid.k_list[0]; grid.epsilon_list.len()]
    } else if grid.k_list.len() == grid.epsilon_list.len() {
        grid.k_list.clone()
    } else {
        return Err(Error::InvalidInput(
            "k_list must hold one entry or pair with epsilon_list".into(),
        ));
    };
    let model = grid.model.build();
    let params = FractionalKernelParams::new(grid.alpha)?;
    let theta_star = model.theta_star().to_vec();
    let mut rmses = Vec::with_capacity(grid.epsilon_list.len());
    for (&eps, &k) in grid.epsilon_list.iter().zip(&ks) {
        let sq: Vec<f64> = (0..grid.n_rep)
            .into_par_iter()
            .map(|rep| -> Result<f64> {
                let theta = run_replication(grid, model.as_ref(), &params, eps, k, rep)?;
                Ok(theta
                    .iter()
                    .zip(&theta_star)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>())
            })
            .collect::<Result<Vec<_>>>()?;
        rmses.push((pairwise_sum(&sq) / sq.len() as f64).sqrt());
    }
    loglog_slope(&grid.epsilon_list, &rmses)
}

/// Output shape for [`emit_table`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableFormat {
    Csv,
    Markdown,
}

impl std::str::FromStr for TableFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Self::Csv),
            "markdown" => Ok(Self::Markdown),
            other => Err(Error::InvalidInput(format!(
                "unknown table format '{other}' (expected 'csv' or 'markdown')"
            ))),
        }
    }
}

/// Serializes a table either as flat CSV (full precision, one row per cell)
/// or as a two-row-per-k markdown table with one column per epsilon.
pub fn emit_table(table: &TableResult, format: TableFormat) -> String {
    match format {
        TableFormat::Csv => {
            let dim = table.cells[0][0].mean.len();
            let mut out = String::from("alpha,T,h,epsilon,k,delta");
            for i in 1..=dim {
                out.push_str(&format!(",mean_{i}"));
            }
            for i in 1..=dim {
                out.push_str(&format!(",rstd_{i}"));
            }
            out.push_str(",n_effective\n");
            for row in &table.cells {
                for cell in row {
                    out.push_str(&format!(
                        "{},{},{},{},{},{}",
                        table.alpha, table.t_horizon, table.h, cell.epsilon, cell.k, cell.delta
                    ));
                    for v in &cell.mean {
                        out.push_str(&format!(",{v}"));
                    }
                    for v in &cell.rescaled_std {
                        out.push_str(&format!(",{v}"));
                    }
                    out.push_str(&format!(",{}\n", cell.n_effective));
                }
            }
            out
        }
        TableFormat::Markdown => {
            let mut out = String::from("| Delta (k) | stat |");
            for cell in &table.cells[0] {
                out.push_str(&format!(" eps={} |", cell.epsilon));
            }
            out.push('\n');
            out.push_str("|---|---|");
            for _ in &table.cells[0] {
                out.push_str("---|");
            }
            out.push('\n');
            let tuple = |vs: &[f64]| -> String {
                let inner: Vec<String> = vs.iter().map(|v| format!("{v:.2}")).collect();
                format!("({})", inner.join(", "))
            };
            for row in &table.cells {
                let first = &row[0];
                out.push_str(&format!("| {} (k={}) | mean |", first.delta, first.k));
                for cell in row {
                    out.push_str(&format!(" {} |", tuple(&cell.mean)));
                }
                out.push('\n');
                out.push_str("|  | resc. std |");
                for cell in row {
                    out.push_str(&format!(" {} |", tuple(&cell.rescaled_std)));
                }
                out.push('\n');
            }
            out
        }
    }
}
