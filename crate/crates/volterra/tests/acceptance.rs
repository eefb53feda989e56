//! Acceptance gate: one test per criterion, each printing a PASS/FAIL line
//! (run with `cargo test --test acceptance -- --nocapture` to see them).
//!
//! Tolerances are pinned in code. Criterion 4 documents a known failure: the
//! noise-free reconstruction error at the horizon decays at first order in
//! the sampling step (signed cancellation against the bounded-variation
//! limit path), so its log-log slope sits near 1.0 rather than inside the
//! gated [0.7, 0.9] band; the test states the gate faithfully and is
//! expected red. Details are in the criterion's doc comment.

use volterra::invert::{invert, invert_at_times, EndpointRule, SampledObservation};
use volterra::kernel::{g_h, integral_bounds, FractionalKernelParams, GridGeometry};
use volterra::mc::{
    rate_estimator, rate_reconstruction, run_table, ExperimentGrid, ModelSpec,
};
use volterra::model::{LinearAffineModel, LinearDrift, Model};
use volterra::qmle::{
    asymptotic_std, estimate, fisher_info, ContrastConfig, EstimationData, MinimizerRule,
    WeightRule,
};
use volterra::sim::{simulate, simulate_deterministic, empirical_increment_moments, SimConfig};
use volterra::util::{derive_seed, ls_slope, CompensatedSum};
use volterra::NelderMeadSettings;

fn report(name: &str, pass: bool, detail: &str) {
    println!("{name}: {} ({detail})", if pass { "PASS" } else { "FAIL" });
    assert!(pass, "{name} failed: {detail}");
}

fn table_grid(
    alpha: f64,
    t: f64,
    h: f64,
    epsilon: f64,
    k: usize,
    n_rep: usize,
    seed: u64,
) -> ExperimentGrid {
    ExperimentGrid {
        alpha,
        t_horizon: t,
        h,
        epsilon_list: vec![epsilon],
        k_list: vec![k],
        n_rep,
        master_seed: seed,
        model: ModelSpec::LinearAffine { theta_star: [-1.0, 1.0], x0: 0.0 },
        weight: WeightRule::Identity,
        endpoint: EndpointRule::Right,
        n_fine_per_h: 1,
    }
}

/// Criterion 1: benchmark cell at horizon 10 — mean within 0.05 of
/// (-1.00, 1.00), rescaled std within 30% of (1.8, 1.6), 1000 replications.
#[test]
fn criterion_1_table_cell_t10() {
    let grid = table_grid(0.8, 10.0, 1e-2, 0.01, 1, 1000, 20_240_001);
    let table = run_table(&grid, None).unwrap();
    let cell = &table.cells[0][0];
    let mean_ok =
        (cell.mean[0] - (-1.00)).abs() <= 0.05 && (cell.mean[1] - 1.00).abs() <= 0.05;
    let std_ok = (cell.rescaled_std[0] / 1.8 - 1.0).abs() <= 0.30
        && (cell.rescaled_std[1] / 1.6 - 1.0).abs() <= 0.30;
    report(
        "criterion 1 (table cell T=10, eps=1/100, k=1)",
        mean_ok && std_ok && cell.n_effective == 1000,
        &format!(
            "mean=({:.3}, {:.3}) vs (-1.00, 1.00); resc std=({:.2}, {:.2}) vs (1.8, 1.6); n_eff={}",
            cell.mean[0], cell.mean[1], cell.rescaled_std[0], cell.rescaled_std[1],
            cell.n_effective
        ),
    );
}

/// Criterion 2: benchmark cell at horizon 1 — mean within 0.05 of
/// (-1.02, 1.00), rescaled std within 30% of (6.3, 2.7).
#[test]
fn criterion_2_table_cell_t1() {
    let grid = table_grid(0.8, 1.0, 1e-2, 0.01, 2, 1000, 20_240_002);
    let table = run_table(&grid, None).unwrap();
    let cell = &table.cells[0][0];
    let mean_ok =
        (cell.mean[0] - (-1.02)).abs() <= 0.05 && (cell.mean[1] - 1.00).abs() <= 0.05;
    let std_ok = (cell.rescaled_std[0] / 6.3 - 1.0).abs() <= 0.30
        && (cell.rescaled_std[1] / 2.7 - 1.0).abs() <= 0.30;
    report(
        "criterion 2 (table cell T=1, eps=1/100, k=2)",
        mean_ok && std_ok,
        &format!(
            "mean=({:.3}, {:.3}) vs (-1.02, 1.00); resc std=({:.2}, {:.2}) vs (6.3, 2.7)",
            cell.mean[0], cell.mean[1], cell.rescaled_std[0], cell.rescaled_std[1]
        ),
    );
}

/// Criterion 3: terminal reconstruction error vs step at unit noise decays
/// with log-log slope in [0.4, 0.6] for both roughness levels.
#[test]
fn criterion_3_reconstruction_rate_unit_noise() {
    let hs: Vec<f64> = (6..=11).map(|k| 2f64.powi(-k)).collect();
    let model = LinearAffineModel::default();
    let mut all_ok = true;
    let mut details = Vec::new();
    for alpha in [0.6, 0.8] {
        let slope = rate_reconstruction(
            &model,
            alpha,
            1.0,
            &hs,
            1.0,
            200,
            20_240_003,
            EndpointRule::Left,
        )
        .unwrap();
        let ok = (0.4..=0.6).contains(&slope);
        all_ok &= ok;
        details.push(format!("alpha={alpha}: slope={slope:.3}"));
    }
    report(
        "criterion 3 (reconstruction rate, eps=1)",
        all_ok,
        &format!("{} target [0.4, 0.6]", details.join("; ")),
    );
}

/// Criterion 4: the same study at zero noise, gated to slope in [0.7, 0.9].
///
/// Expected to FAIL. With eps = 0 the reconstruction error at the horizon is
/// the signed integral of (g_h - 1) against a smooth bounded-variation
/// drift; the positive spikes and negative plateaus of g_h - 1 cancel in
/// signed integration and leave an O(h) remainder (empirically slope ~ 1.0,
/// also confirmed against an exact special-function solution of the linear
/// model, so this is not a scheme artifact). The O(h^alpha) envelope from
/// the deviation integrals is an upper bound, realized by |g_h - 1| but not
/// by the signed error; the band below would require the bound to be tight.
#[test]
fn criterion_4_reconstruction_rate_drift_branch() {
    let hs: Vec<f64> = (6..=11).map(|k| 2f64.powi(-k)).collect();
    let model = LinearAffineModel::default();
    let slope = rate_reconstruction(
        &model,
        0.8,
        1.0,
        &hs,
        0.0,
        3,
        20_240_004,
        EndpointRule::Left,
    )
    .unwrap();
    let ok = (0.7..=0.9).contains(&slope);
    report(
        "criterion 4 (reconstruction rate, eps=0)",
        ok,
        &format!("slope={slope:.3}, gated band [0.7, 0.9]; measured first-order decay"),
    );
}

/// Criterion 5: deviation-integral certificates — `l1/h^alpha` and `l2/h`
/// vary by less than a factor 3 over the dyadic sweep, and the numeric
/// convolution of the resolvent against the kernel equals 1 to 1e-6.
#[test]
fn criterion_5_kernel_certificates() {
    let mut all_ok = true;
    let mut details = Vec::new();
    for alpha in [0.6, 0.8, 0.95] {
        let p = FractionalKernelParams::new(alpha).unwrap();
        let mut r1 = Vec::new();
        let mut r2 = Vec::new();
        for exp in 4..=10 {
            let h = 2f64.powi(-exp);
            let geom = GridGeometry::new(h, 1.0).unwrap();
            let (l1, l2) = integral_bounds(1.0, &geom, &p, 4000).unwrap();
            r1.push(l1 / h.powf(alpha));
            r2.push(l2 / h);
        }
        let spread = |v: &[f64]| {
            v.iter().cloned().fold(f64::MIN, f64::max) / v.iter().cloned().fold(f64::MAX, f64::min)
        };
        let (s1, s2) = (spread(&r1), spread(&r2));
        all_ok &= s1 < 3.0 && s2 < 3.0;

        // product-midpoint convolution split at t/2, 1e5 nodes total
        let t = 1.0;
        let n = 50_000usize;
        let half = 0.5 * t;
        let mut acc = CompensatedSum::new();
        for i in 0..n {
            let a = half * i as f64 / n as f64;
            let b = half * (i + 1) as f64 / n as f64;
            acc.add(p.eval_l(t - 0.5 * (a + b)) * p.integral_k(t - b, t - a, t).unwrap());
            let (a2, b2) = (half + a, half + b);
            acc.add(p.eval_k(0.5 * (a2 + b2)) * p.integral_l(a2, b2, t).unwrap());
        }
        let conv_dev = (acc.value() - 1.0).abs();
        all_ok &= conv_dev < 1e-6;
        details.push(format!(
            "alpha={alpha}: spread(l1/h^a)={s1:.2}, spread(l2/h)={s2:.2}, |L*K-1|={conv_dev:.1e}"
        ));
    }
    report("criterion 5 (kernel certificates)", all_ok, &details.join("; "));
}

/// Criterion 6: closed-form and simplex minimizers agree to 1e-6 on 50
/// random datasets; the reconstruction matches the sampled-kernel
/// representation to 1e-6 on 20 synthetic piecewise-constant inputs.
#[test]
fn criterion_6_oracle_equivalence() {
    // cross-minimizer agreement
    let model = LinearAffineModel::default();
    let mut max_gap = 0.0f64;
    for i in 0..50u64 {
        let seed = derive_seed(20_240_006, &[i]);
        let alpha = 0.6 + 0.3 * (i as f64 / 49.0);
        let eps = [0.01, 0.05, 0.2][i as usize % 3];
        let k = [1usize, 2, 5][(i as usize / 3) % 3];
        let params = FractionalKernelParams::new(alpha).unwrap();
        let path = simulate(
            &model,
            &SimConfig { epsilon: eps, alpha, t_horizon: 1.0, n_fine: 100, seed },
        )
        .unwrap();
        let obs = SampledObservation::from_path(&path, 1).unwrap();
        let recon = invert(&obs, &params, k, EndpointRule::Right).unwrap();
        let data = EstimationData::from_parts(&recon, &obs).unwrap();
        let cf = estimate(&data, &model, &ContrastConfig::closed_form(k)).unwrap();
        let nm = estimate(
            &data,
            &model,
            &ContrastConfig {
                k,
                weight: WeightRule::Identity,
                minimizer: MinimizerRule::NelderMead(NelderMeadSettings::default()),
            },
        )
        .unwrap();
        for (a, b) in cf.theta_hat.iter().zip(&nm.theta_hat) {
            max_gap = max_gap.max((a - b).abs());
        }
    }
    let minimizers_ok = max_gap < 1e-6;

    // sampled-kernel representation on synthetic piecewise-constant inputs
    let mut max_dev = 0.0f64;
    for i in 0..20u64 {
        let seed = derive_seed(20_240_106, &[i]);
        let alpha = 0.55 + 0.4 * (i as f64 / 19.0);
        let p = FractionalKernelParams::new(alpha).unwrap();
        let h = if i % 2 == 0 { 0.1 } else { 0.0625 };
        let geom = GridGeometry::new(h, 1.0).unwrap();
        let n = (1.0 / h).round() as usize;
        // deterministic pseudo-random jump set
        let mut state = seed;
        let mut next = || {
            state = volterra::util::splitmix64(state);
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        let jumps: Vec<(f64, f64)> =
            (0..6).map(|_| (next() * 0.95, 4.0 * next() - 2.0)).collect();
        let mut x = vec![0.0; n + 1];
        for (j, xv) in x.iter_mut().enumerate() {
            let t = j as f64 * h;
            *xv = jumps
                .iter()
                .filter(|(s, _)| *s < t)
                .map(|(s, dz)| p.eval_k(t - s) * dz)
                .sum();
        }
        let obs = SampledObservation::new(h, x, 1).unwrap();
        for &t in &[0.3, 0.68, 1.0] {
            let direct = invert_at_times(&obs, &p, &[t], EndpointRule::Left).unwrap()[0];
            let via_kernel: f64 = jumps
                .iter()
                .filter(|(s, _)| *s < t)
                .map(|(s, dz)| g_h(t, *s, &geom, &p).unwrap() * dz)
                .sum();
            max_dev = max_dev.max((direct - via_kernel).abs());
        }
    }
    let representation_ok = max_dev < 1e-6;
    report(
        "criterion 6 (oracle equivalence)",
        minimizers_ok && representation_ok,
        &format!(
            "max minimizer gap={max_gap:.2e} (tol 1e-6); max representation dev={max_dev:.2e} (tol 1e-6)"
        ),
    );
}

/// Criterion 7: the sqrt-diagonal of the inverse information on the
/// benchmark model at horizon 10 sits within 25% of (1.8, 1.6).
#[test]
fn criterion_7_asymptotic_variance() {
    let model = LinearAffineModel::default();
    let path = simulate_deterministic(
        &model,
        &SimConfig { epsilon: 0.0, alpha: 0.8, t_horizon: 10.0, n_fine: 1 << 13, seed: 0 },
    )
    .unwrap();
    let info = fisher_info(&path, &model, &[-1.0, 1.0], WeightRule::Identity).unwrap();
    let std = asymptotic_std(&info, 0.01).unwrap();
    let ok = (std.rescaled[0] / 1.8 - 1.0).abs() <= 0.25
        && (std.rescaled[1] / 1.6 - 1.0).abs() <= 0.25;
    report(
        "criterion 7 (asymptotic variance)",
        ok,
        &format!(
            "sqrt diag I^-1 = ({:.3}, {:.3}) vs (1.8, 1.6) within 25%",
            std.rescaled[0], std.rescaled[1]
        ),
    );
}

/// Criterion 8: estimator RMSE versus noise level has slope 1 +- 0.25 with
/// the per-epsilon block policy of the benchmark table.
#[test]
fn criterion_8_consistency_slope() {
    let grid = ExperimentGrid {
        alpha: 0.8,
        t_horizon: 10.0,
        h: 1e-2,
        epsilon_list: vec![0.1, 0.05, 0.01],
        k_list: vec![10, 5, 1],
        n_rep: 300,
        master_seed: 20_240_008,
        model: ModelSpec::LinearAffine { theta_star: [-1.0, 1.0], x0: 0.0 },
        weight: WeightRule::Identity,
        endpoint: EndpointRule::Right,
        n_fine_per_h: 1,
    };
    let slope = rate_estimator(&grid).unwrap();
    let ok = (slope - 1.0).abs() <= 0.25;
    report(
        "criterion 8 (consistency slope)",
        ok,
        &format!("slope={slope:.3}, target 1 +- 0.25"),
    );
}

/// Affine drift with constant diffusion level 2, so the inverse-diffusion
/// weight is a positive scalar multiple of the identity weight.
#[derive(Debug)]
struct WideNoiseModel(LinearAffineModel);

impl LinearDrift for WideNoiseModel {
    fn phi(&self, x: &[f64], out: &mut [f64]) {
        self.0.phi(x, out)
    }
    fn phi0(&self, x: &[f64], out: &mut [f64]) {
        self.0.phi0(x, out)
    }
}

impl Model for WideNoiseModel {
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
        self.0.drift(x, theta, out)
    }
    fn drift_jacobian_theta(&self, x: &[f64], theta: &[f64], out: &mut [f64]) {
        self.0.drift_jacobian_theta(x, theta, out)
    }
    fn diffusion(&self, _x: &[f64], out: &mut [f64]) {
        out[0] = 2.0;
    }
    fn theta_box(&self) -> &[(f64, f64)] {
        self.0.theta_box()
    }
    fn theta_star(&self) -> &[f64] {
        self.0.theta_star()
    }
    fn x0(&self) -> &[f64] {
        self.0.x0()
    }
    fn linear_drift(&self) -> Option<&dyn LinearDrift> {
        Some(self)
    }
}

/// Criterion 9: paper-number-free property suite — weight-scaling invariance
/// of the minimizer, linearity of the reconstruction, pipeline determinism,
/// and the rough-noise increment exponent.
#[test]
fn criterion_9_property_suite() {
    // (a) scaling the weight by a positive constant leaves theta_hat fixed
    let model = WideNoiseModel(LinearAffineModel::default());
    let params = FractionalKernelParams::new(0.8).unwrap();
    let path = simulate(
        &model,
        &SimConfig { epsilon: 0.1, alpha: 0.8, t_horizon: 1.0, n_fine: 100, seed: 31 },
    )
    .unwrap();
    let obs = SampledObservation::from_path(&path, 1).unwrap();
    let recon = invert(&obs, &params, 2, EndpointRule::Right).unwrap();
    let data = EstimationData::from_parts(&recon, &obs).unwrap();
    let theta_id = estimate(&data, &model, &ContrastConfig::closed_form(2)).unwrap().theta_hat;
    let theta_inv = estimate(
        &data,
        &model,
        &ContrastConfig {
            k: 2,
            weight: WeightRule::InverseDiffusion { lambda: 0.0 },
            minimizer: MinimizerRule::ClosedFormLinear,
        },
    )
    .unwrap()
    .theta_hat;
    let theta_nm = estimate(
        &data,
        &model,
        &ContrastConfig {
            k: 2,
            weight: WeightRule::InverseDiffusion { lambda: 0.0 },
            minimizer: MinimizerRule::NelderMead(NelderMeadSettings::default()),
        },
    )
    .unwrap()
    .theta_hat;
    let scale_ok = theta_id
        .iter()
        .zip(&theta_inv)
        .all(|(a, b)| (a - b).abs() < 1e-8)
        && theta_id.iter().zip(&theta_nm).all(|(a, b)| (a - b).abs() < 1e-6);

    // (b) superposition of the reconstruction
    let p = FractionalKernelParams::new(0.7).unwrap();
    let mut state = 77u64;
    let mut next = || {
        state = volterra::util::splitmix64(state);
        (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
    };
    let va: Vec<f64> = (0..12).map(|_| next() * 6.0).collect();
    let vb: Vec<f64> = (0..12).map(|_| next() * 6.0).collect();
    let mk = |v: &[f64]| {
        let mut x = vec![0.0];
        x.extend_from_slice(v);
        SampledObservation::new(0.1, x, 1).unwrap()
    };
    let sum: Vec<f64> = va.iter().zip(&vb).map(|(a, b)| 1.7 * a + b).collect();
    let ts = [0.35, 0.8, 1.2];
    let mut lin_ok = true;
    for rule in [EndpointRule::Left, EndpointRule::Right] {
        let za = invert_at_times(&mk(&va), &p, &ts, rule).unwrap();
        let zb = invert_at_times(&mk(&vb), &p, &ts, rule).unwrap();
        let zs = invert_at_times(&mk(&sum), &p, &ts, rule).unwrap();
        for i in 0..ts.len() {
            lin_ok &= (zs[i] - (1.7 * za[i] + zb[i])).abs() < 1e-12;
        }
    }

    // (c) full-pipeline determinism under a fixed master seed
    let grid = table_grid(0.8, 0.5, 0.025, 0.5, 2, 8, 123);
    let t1 = run_table(&grid, None).unwrap();
    let t2 = run_table(&grid, None).unwrap();
    let det_ok = t1.cells[0][0] == t2.cells[0][0];

    // (d) rough-noise increment exponent 2(alpha - 1/2) +- 0.15
    let alpha = 0.8;
    let noise = volterra::PureNoiseModel::default();
    let paths: Vec<_> = (0..60)
        .map(|rep| {
            simulate(
                &noise,
                &SimConfig {
                    epsilon: 1.0,
                    alpha,
                    t_horizon: 1.0,
                    n_fine: 1 << 12,
                    seed: derive_seed(20_240_009, &[rep]),
                },
            )
            .unwrap()
        })
        .collect();
    let lags: Vec<f64> = (3..=7).map(|k| 2f64.powi(-k)).collect();
    let moments: Vec<f64> = lags
        .iter()
        .map(|&l| empirical_increment_moments(&paths, 2.0, l).unwrap())
        .collect();
    let lx: Vec<f64> = lags.iter().map(|l| l.ln()).collect();
    let ly: Vec<f64> = moments.iter().map(|m| m.ln()).collect();
    let slope = ls_slope(&lx, &ly);
    let target = 2.0 * (alpha - 0.5);
    let incr_ok = (slope - target).abs() <= 0.15;

    report(
        "criterion 9 (property suite)",
        scale_ok && lin_ok && det_ok && incr_ok,
        &format!(
            "weight-scaling={scale_ok}; linearity={lin_ok}; determinism={det_ok}; \
             increment slope={slope:.3} vs {target:.1} +- 0.15"
        ),
    );
}
