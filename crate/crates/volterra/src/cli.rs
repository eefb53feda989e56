//! Command-line front end: simulation, inversion, estimation, Monte Carlo
//! tables, rate studies, and kernel certificates, with reproducible seeding.
//!
//! Exit codes: 0 success, 1 domain or validation failure (one-line
//! diagnostic on stderr), 2 usage errors (clap). Numeric output goes to
//! `--out` (default stdout) as CSV or `key=value` text; the resolved
//! configuration is logged to stderr before any computation, so a run can be
//! reproduced from its log alone. Config files hold flat `key=value` pairs;
//! explicit flags override file keys.

use crate::config::{grid_from_config, parse_config_str, ConfigMap};
use crate::error::{Error, Result};
use crate::invert::{invert, EndpointRule};
use crate::io::{parse_observation_csv, write_path_csv, write_recon_csv};
use crate::kernel::{integral_bounds, FractionalKernelParams, GridGeometry};
use crate::mc::{emit_table, rate_estimator, rate_reconstruction, run_table, TableFormat};
use crate::model::model_from_id;
use crate::optim::NelderMeadSettings;
use crate::qmle::{estimate, ContrastConfig, EstimationData, MinimizerRule, WeightRule};
use crate::sim::{simulate, SimConfig};
use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use std::fs;
use std::io::Write;
use std::path::PathBuf;

#[derive(Debug, Parser)]
#[command(name = "volterra", version, about = "Rough Volterra simulation, kernel inversion, and drift estimation")]
struct Cli {
    /// Master seed for all randomness
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    /// Worker threads for Monte Carlo runs (0 = all cores)
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,

    /// Write numeric output here instead of stdout
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Flat key=value config file; explicit flags override its keys
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Args)]
struct ModelArgs {
    /// Built-in model id: linear-affine or pure-noise
    #[arg(long, default_value = "linear-affine")]
    model: String,

    /// True drift slope (linear-affine)
    #[arg(long, default_value_t = -1.0)]
    theta0: f64,

    /// True drift offset (linear-affine)
    #[arg(long, default_value_t = 1.0)]
    theta1: f64,

    /// Initial state
    #[arg(long, default_value_t = 0.0)]
    x0: f64,
}

impl ModelArgs {
    fn build(&self) -> Result<Box<dyn crate::model::Model>> {
        model_from_id(&self.model, Some([self.theta0, self.theta1]), self.x0)
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate one fine-grid path; emits t,x_1..,z_1.. CSV
    Simulate {
        #[arg(long, default_value_t = 0.8)]
        alpha: f64,
        #[arg(long, default_value_t = 0.01)]
        epsilon: f64,
        #[arg(long, default_value_t = 1.0)]
        t: f64,
        #[arg(long, default_value_t = 100)]
        n_fine: usize,
        #[command(flatten)]
        model: ModelArgs,
    },
    /// Reconstruct the hidden semimartingale from an observation CSV
    Invert {
        /// Observation CSV with header t,x_1..x_d
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = 0.8)]
        alpha: f64,
        /// Subsampling factor: reconstruction is emitted on the k*h grid
        #[arg(long, default_value_t = 1)]
        k: usize,
        /// Endpoint of each sampling cell: left or right
        #[arg(long, default_value = "left")]
        endpoint: String,
        /// Override the base point subtracted from the observations
        #[arg(long)]
        x0: Option<f64>,
    },
    /// Estimate drift parameters from an observation CSV
    Estimate {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = 0.8)]
        alpha: f64,
        #[arg(long, default_value_t = 1)]
        k: usize,
        /// Contrast weight: identity or inverse-diffusion
        #[arg(long, default_value = "identity")]
        weight: String,
        /// Ridge added to the diffusion outer product
        #[arg(long, default_value_t = 1e-12)]
        lambda: f64,
        /// closed-form or nelder-mead
        #[arg(long, default_value = "closed-form")]
        minimizer: String,
        #[arg(long, default_value = "right")]
        endpoint: String,
        #[command(flatten)]
        model: ModelArgs,
    },
    /// Run a Monte Carlo table over (epsilon, k) cells
    McTable {
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long)]
        t: Option<f64>,
        #[arg(long)]
        h: Option<f64>,
        /// Comma-separated noise levels
        #[arg(long)]
        epsilon_list: Option<String>,
        /// Comma-separated subsampling factors
        #[arg(long)]
        k_list: Option<String>,
        #[arg(long)]
        n_rep: Option<usize>,
        #[arg(long)]
        endpoint: Option<String>,
        #[arg(long)]
        n_fine_per_h: Option<usize>,
        /// csv or markdown
        #[arg(long, default_value = "markdown")]
        format: String,
    },
    /// Terminal reconstruction error slope over a dyadic h sweep
    RateRecon {
        #[arg(long, default_value_t = 0.8)]
        alpha: f64,
        #[arg(long, default_value_t = 1.0)]
        t: f64,
        #[arg(long, default_value_t = 1.0)]
        epsilon: f64,
        /// Largest sampling step; halved `levels` times
        #[arg(long, default_value_t = 0.015625)]
        h_max: f64,
        #[arg(long, default_value_t = 6)]
        levels: usize,
        #[arg(long, default_value_t = 200)]
        n_rep: usize,
        #[arg(long, default_value = "left")]
        endpoint: String,
        #[command(flatten)]
        model: ModelArgs,
    },
    /// Estimator RMSE slope over epsilon under a fixed k policy
    RateEst {
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long)]
        t: Option<f64>,
        #[arg(long)]
        h: Option<f64>,
        #[arg(long)]
        epsilon_list: Option<String>,
        #[arg(long)]
        k_list: Option<String>,
        #[arg(long)]
        n_rep: Option<usize>,
        #[arg(long)]
        endpoint: Option<String>,
        #[arg(long)]
        n_fine_per_h: Option<usize>,
    },
    /// Deviation-integral certificates of the sampled kernel
    KernelCheck {
        #[arg(long, default_value_t = 0.8)]
        alpha: f64,
        #[arg(long, default_value_t = 1.0)]
        t: f64,
        /// Smallest step in the sweep
        #[arg(long, default_value_t = 0.001)]
        h_min: f64,
        /// Largest step in the sweep
        #[arg(long, default_value_t = 0.0625)]
        h_max: f64,
        /// Total midpoint budget per integral
        #[arg(long, default_value_t = 4000)]
        n_quad: usize,
    },
}

/// Parses argv, runs the command, and maps failures onto exit codes.
pub fn dispatch<I, S>(argv: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 2,
            };
            let _ = e.print();
            return code;
        }
    };
    if cli.threads > 0 {
        // a later init in the same process is fine; keep the first pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build_global();
    }
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn writer_for(out: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match out {
        Some(path) => Box::new(fs::File::create(path)?),
        None => Box::new(std::io::stdout()),
    })
}

fn load_config(path: &Option<PathBuf>) -> Result<ConfigMap> {
    match path {
        Some(p) => parse_config_str(&fs::read_to_string(p)?),
        None => Ok(ConfigMap::default()),
    }
}

fn parse_f64_list(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|v| {
            v.trim()
                .parse::<f64>()
                .map_err(|_| Error::InvalidInput(format!("'{v}' is not a number")))
        })
        .collect()
}

fn parse_usize_list(s: &str) -> Result<Vec<usize>> {
    s.split(',')
        .map(|v| {
            v.trim()
                .parse::<usize>()
                .map_err(|_| Error::InvalidInput(format!("'{v}' is not a count")))
        })
        .collect()
}

#[allow(clippy::too_many_arguments)]
fn resolve_grid(
    config: &ConfigMap,
    seed: u64,
    alpha: Option<f64>,
    t: Option<f64>,
    h: Option<f64>,
    epsilon_list: Option<String>,
    k_list: Option<String>,
    n_rep: Option<usize>,
    endpoint: Option<String>,
    n_fine_per_h: Option<usize>,
) -> Result<crate::mc::ExperimentGrid> {
    let mut grid = grid_from_config(config)?;
    if config.get("master_seed").is_none() || seed != 0 {
        grid.master_seed = seed;
    }
    if let Some(v) = alpha {
        grid.alpha = v;
    }
    if let Some(v) = t {
        grid.t_horizon = v;
    }
    if let Some(v) = h {
        grid.h = v;
    }
    if let Some(v) = epsilon_list {
        grid.epsilon_list = parse_f64_list(&v)?;
    }
    if let Some(v) = k_list {
        grid.k_list = parse_usize_list(&v)?;
    }
    if let Some(v) = n_rep {
        grid.n_rep = v;
    }
    if let Some(v) = endpoint {
        grid.endpoint = v.parse()?;
    }
    if let Some(v) = n_fine_per_h {
        grid.n_fine_per_h = v;
    }
    grid.validate()?;
    Ok(grid)
}

fn log_grid(grid: &crate::mc::ExperimentGrid) {
    eprintln!(
        "resolved: alpha={} t={} h={} n_obs={} n_fine={} epsilon_list={:?} k_list={:?} \
         n_rep={} master_seed={} model={} endpoint={:?} n_fine_per_h={}",
        grid.alpha,
        grid.t_horizon,
        grid.h,
        grid.n_obs(),
        grid.n_obs() * grid.n_fine_per_h,
        grid.epsilon_list,
        grid.k_list,
        grid.n_rep,
        grid.master_seed,
        grid.model.id(),
        grid.endpoint,
        grid.n_fine_per_h,
    );
    for &k in &grid.k_list {
        eprintln!(
            "resolved: k={k} delta={} n_blocks={}",
            k as f64 * grid.h,
            grid.n_obs() / k
        );
    }
}

fn run(cli: Cli) -> Result<()> {
    let mut out = writer_for(&cli.out)?;
    match cli.command {
        Command::Simulate { alpha, epsilon, t, n_fine, model } => {
            let m = model.build()?;
            let cfg = SimConfig { epsilon, alpha, t_horizon: t, n_fine, seed: cli.seed };
            eprintln!(
                "resolved: alpha={alpha} epsilon={epsilon} t={t} n_fine={n_fine} delta={} seed={} model={}",
                cfg.delta(),
                cli.seed,
                model.model
            );
            let path = simulate(m.as_ref(), &cfg)?;
            write_path_csv(&mut out, &path)?;
        }
        Command::Invert { input, alpha, k, endpoint, x0 } => {
            let params = FractionalKernelParams::new(alpha)?;
            let rule: EndpointRule = endpoint.parse()?;
            let mut obs = parse_observation_csv(fs::File::open(&input)?)?;
            if let Some(v) = x0 {
                let base = vec![v; obs.dim_state()];
                obs = obs.with_x0(base)?;
            }
            eprintln!(
                "resolved: alpha={alpha} k={k} h={} n={} delta={} endpoint={endpoint} input={}",
                obs.h(),
                obs.n(),
                k as f64 * obs.h(),
                input.display()
            );
            let recon = invert(&obs, &params, k, rule)?;
            write_recon_csv(&mut out, &recon)?;
        }
        Command::Estimate { input, alpha, k, weight, lambda, minimizer, endpoint, model } => {
            let params = FractionalKernelParams::new(alpha)?;
            let rule: EndpointRule = endpoint.parse()?;
            let m = model.build()?;
            let obs = parse_observation_csv(fs::File::open(&input)?)?;
            let weight_rule = match weight.as_str() {
                "identity" => WeightRule::Identity,
                "inverse-diffusion" => WeightRule::InverseDiffusion { lambda },
                other => {
                    return Err(Error::InvalidInput(format!("unknown weight '{other}'")));
                }
            };
            let minimizer_rule = match minimizer.as_str() {
                "closed-form" => MinimizerRule::ClosedFormLinear,
                "nelder-mead" => MinimizerRule::NelderMead(NelderMeadSettings::default()),
                other => {
                    return Err(Error::InvalidInput(format!("unknown minimizer '{other}'")));
                }
            };
            eprintln!(
                "resolved: alpha={alpha} k={k} h={} n={} delta={} n_blocks={} weight={weight} \
                 minimizer={minimizer} endpoint={endpoint} model={} input={}",
                obs.h(),
                obs.n(),
                k as f64 * obs.h(),
                obs.n() / k,
                model.model,
                input.display()
            );
            let recon = invert(&obs, &params, k, rule)?;
            let data = EstimationData::from_parts(&recon, &obs)?;
            let cfg = ContrastConfig { k, weight: weight_rule, minimizer: minimizer_rule };
            let result = estimate(&data, m.as_ref(), &cfg)?;
            write!(out, "{}", result.to_kv())?;
        }
        Command::McTable {
            alpha,
            t,
            h,
            epsilon_list,
            k_list,
            n_rep,
            endpoint,
            n_fine_per_h,
            format,
        } => {
            let config = load_config(&cli.config)?;
            let grid = resolve_grid(
                &config,
                cli.seed,
                alpha,
                t,
                h,
                epsilon_list,
                k_list,
                n_rep,
                endpoint,
                n_fine_per_h,
            )?;
            let fmt: TableFormat = format.parse()?;
            log_grid(&grid);
            let total = grid.n_rep * grid.k_list.len() * grid.epsilon_list.len();
            let step = (total / 100).max(1);
            let progress = move |done: usize| {
                if done % step == 0 || done == total {
                    eprint!("\rreplication {done}/{total}");
                }
            };
            let table = run_table(&grid, Some(&progress))?;
            eprintln!();
            write!(out, "{}", emit_table(&table, fmt))?;
        }
        Command::RateRecon { alpha, t, epsilon, h_max, levels, n_rep, endpoint, model } => {
            let m = model.build()?;
            let rule: EndpointRule = endpoint.parse()?;
            let hs: Vec<f64> = (0..levels).map(|i| h_max / 2f64.powi(i as i32)).collect();
            eprintln!(
                "resolved: alpha={alpha} t={t} epsilon={epsilon} h_list={hs:?} n_rep={n_rep} \
                 seed={} endpoint={endpoint} model={}",
                cli.seed, model.model
            );
            let slope =
                rate_reconstruction(m.as_ref(), alpha, t, &hs, epsilon, n_rep, cli.seed, rule)?;
            writeln!(out, "slope")?;
            writeln!(out, "{slope}")?;
        }
        Command::RateEst {
            alpha,
            t,
            h,
            epsilon_list,
            k_list,
            n_rep,
            endpoint,
            n_fine_per_h,
        } => {
            let config = load_config(&cli.config)?;
            let grid = resolve_grid(
                &config,
                cli.seed,
                alpha,
                t,
                h,
                epsilon_list,
                k_list,
                n_rep,
                endpoint,
                n_fine_per_h,
            )?;
            log_grid(&grid);
            let slope = rate_estimator(&grid)?;
            writeln!(out, "slope")?;
            writeln!(out, "{slope}")?;
        }
        Command::KernelCheck { alpha, t, h_min, h_max, n_quad } => {
            let params = FractionalKernelParams::new(alpha)?;
            if !(h_min > 0.0 && h_min <= h_max) {
                return Err(Error::InvalidInput(format!(
                    "need 0 < h_min <= h_max, got {h_min} and {h_max}"
                )));
            }
            eprintln!("resolved: alpha={alpha} t={t} h_min={h_min} h_max={h_max} n_quad={n_quad}");
            writeln!(out, "h,l1,l2,l1_over_h_alpha,l2_over_h")?;
            let mut h = h_max;
            while h >= h_min {
                let geom = GridGeometry::new(h, t)?;
                let (l1, l2) = integral_bounds(t, &geom, &params, n_quad)?;
                writeln!(out, "{h},{l1},{l2},{},{}", l1 / h.powf(alpha), l2 / h)?;
                h /= 2.0;
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn args(v: &[&str]) -> Vec<String> {
        let mut a = vec!["volterra".to_string()];
        a.extend(v.iter().map(|s| s.to_string()));
        a
    }

    #[test]
    fn usage_errors_exit_two() {
        assert_eq!(dispatch(args(&["no-such-command"])), 2);
        assert_eq!(dispatch(args(&["simulate", "--bogus-flag"])), 2);
        assert_eq!(dispatch(args(&[])), 2);
        assert_eq!(dispatch(args(&["--help"])), 0);
    }

    #[test]
    fn validation_errors_exit_one() {
        let dir = std::env::temp_dir().join("volterra-cli-test-validation");
        fs::create_dir_all(&dir).unwrap();
        let out = dir.join("out.csv");
        let code = dispatch(args(&[
            "estimate",
            "--alpha",
            "1.2",
            "--input",
            "/nonexistent/obs.csv",
            "--out",
            out.to_str().unwrap(),
        ]));
        assert_eq!(code, 1);
        // kernel-check with inverted bounds
        let code = dispatch(args(&[
            "kernel-check",
            "--h-min",
            "0.5",
            "--h-max",
            "0.1",
            "--out",
            out.to_str().unwrap(),
        ]));
        assert_eq!(code, 1);
    }

    #[test]
    fn simulate_invert_estimate_pipeline_via_files() {
        let dir = std::env::temp_dir().join("volterra-cli-test-pipeline");
        fs::create_dir_all(&dir).unwrap();
        let path_csv = dir.join("path.csv");
        let code = dispatch(args(&[
            "simulate",
            "--alpha",
            "0.8",
            "--epsilon",
            "0.01",
            "--t",
            "1.0",
            "--n-fine",
            "100",
            "--seed",
            "7",
            "--out",
            path_csv.to_str().unwrap(),
        ]));
        assert_eq!(code, 0);
        // strip the z column to get an observation file
        let text = fs::read_to_string(&path_csv).unwrap();
        let obs_csv = dir.join("obs.csv");
        let mut obs_text = String::new();
        for (i, line) in text.lines().enumerate() {
            let cols: Vec<&str> = line.split(',').collect();
            if i == 0 {
                assert_eq!(cols, vec!["t", "x_1", "z_1"]);
            }
            obs_text.push_str(&format!("{},{}\n", cols[0], cols[1]));
        }
        fs::write(&obs_csv, obs_text).unwrap();

        let recon_csv = dir.join("recon.csv");
        let code = dispatch(args(&[
            "invert",
            "--input",
            obs_csv.to_str().unwrap(),
            "--alpha",
            "0.8",
            "--k",
            "2",
            "--out",
            recon_csv.to_str().unwrap(),
        ]));
        assert_eq!(code, 0);
        let recon = fs::read_to_string(&recon_csv).unwrap();
        assert!(recon.starts_with("t,z_1\n0,0\n"));
        assert_eq!(recon.lines().count(), 52); // header + 51 block nodes

        let est_out = dir.join("est.txt");
        let code = dispatch(args(&[
            "estimate",
            "--input",
            obs_csv.to_str().unwrap(),
            "--alpha",
            "0.8",
            "--k",
            "1",
            "--endpoint",
            "right",
            "--out",
            est_out.to_str().unwrap(),
        ]));
        assert_eq!(code, 0);
        let est = fs::read_to_string(&est_out).unwrap();
        assert!(est.contains("theta_0="));
        assert!(est.contains("converged=true"));
        // input files are not mutated
        assert_eq!(fs::read_to_string(&obs_csv).unwrap().lines().count(), 102);
    }

    #[test]
    fn mc_table_with_config_file_and_overrides() {
        let dir = std::env::temp_dir().join("volterra-cli-test-table");
        fs::create_dir_all(&dir).unwrap();
        let cfg = dir.join("table.cfg");
        fs::write(
            &cfg,
            "# tiny grid\nalpha=0.8\nt=0.5\nh=0.05\nepsilon_list=1.0,0.5\nk_list=1,2\nn_rep=3\nmaster_seed=4\n",
        )
        .unwrap();
        let out = dir.join("table.md");
        let code = dispatch(args(&[
            "mc-table",
            "--config",
            cfg.to_str().unwrap(),
            "--n-rep",
            "4",
            "--out",
            out.to_str().unwrap(),
        ]));
        assert_eq!(code, 0);
        let table = fs::read_to_string(&out).unwrap();
        assert!(table.starts_with("| Delta (k) | stat | eps=1 | eps=0.5 |"));
        assert_eq!(table.lines().count(), 2 + 4);

        // unknown config key fails with exit 1
        fs::write(&cfg, "alhpa=0.8\n").unwrap();
        let code = dispatch(args(&[
            "mc-table",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
        ]));
        assert_eq!(code, 1);
    }

    #[test]
    fn kernel_check_emits_sweep_csv() {
        let dir = std::env::temp_dir().join("volterra-cli-test-kernel");
        fs::create_dir_all(&dir).unwrap();
        let out = dir.join("kc.csv");
        let code = dispatch(args(&[
            "kernel-check",
            "--alpha",
            "0.8",
            "--t",
            "1.0",
            "--h-min",
            "0.01",
            "--h-max",
            "0.0625",
            "--out",
            out.to_str().unwrap(),
        ]));
        assert_eq!(code, 0);
        let text = fs::read_to_string(&out).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "h,l1,l2,l1_over_h_alpha,l2_over_h");
        assert_eq!(lines.len(), 1 + 3); // h = 1/16, 1/32, 1/64
        for line in &lines[1..] {
            assert_eq!(line.split(',').count(), 5);
        }
    }
}
