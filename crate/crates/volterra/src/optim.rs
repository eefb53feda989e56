//! Box-constrained Nelder-Mead simplex search. Iterates are projected onto
//! the box after every transformation, which keeps the simplex feasible
//! without penalty terms.

/// Search settings; see `ContrastConfig` for the validated entry point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NelderMeadSettings {
    pub max_iter: usize,
    pub tolerance: f64,
    pub multistarts: usize,
}

impl Default for NelderMeadSettings {
    fn default() -> Self {
        Self { max_iter: 500, tolerance: 1e-10, multistarts: 5 }
    }
}

/// Outcome of one simplex run.
#[derive(Debug, Clone)]
pub struct NelderMeadRun {
    pub x: Vec<f64>,
    pub f: f64,
    pub converged: bool,
    pub iterations: usize,
}

fn clamp(x: &mut [f64], boxc: &[(f64, f64)]) {
    for (v, (lo, hi)) in x.iter_mut().zip(boxc) {
        *v = v.clamp(*lo, *hi);
    }
}

/// Minimizes `f` over the box starting from `start` (projected).
pub fn nelder_mead_box<F: FnMut(&[f64]) -> f64>(
    mut f: F,
    boxc: &[(f64, f64)],
    start: &[f64],
    settings: &NelderMeadSettings,
) -> NelderMeadRun {
    const ALPHA: f64 = 1.0; // reflection
    const GAMMA: f64 = 2.0; // expansion
    const RHO: f64 = 0.5; // contraction
    const SIGMA: f64 = 0.5; // shrink

    let dim = boxc.len();
    let mut x0 = start.to_vec();
    clamp(&mut x0, boxc);

    // initial simplex: perturb each coordinate by 5% of its box width
    let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(dim + 1);
    simplex.push(x0.clone());
    for i in 0..dim {
        let mut v = x0.clone();
        let width = boxc[i].1 - boxc[i].0;
        let step = if width.is_finite() && width > 0.0 { 0.05 * width } else { 0.1 };
        v[i] = if v[i] + step <= boxc[i].1 { v[i] + step } else { v[i] - step };
        clamp(&mut v, boxc);
        simplex.push(v);
    }
    let mut values: Vec<f64> = simplex.iter().map(|v| f(v)).collect();

    let mut iterations = 0;
    let mut converged = false;
    while iterations < settings.max_iter {
        iterations += 1;
        // order ascending by value
        let mut idx: Vec<usize> = (0..=dim).collect();
        idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        let ordered: Vec<Vec<f64>> = idx.iter().map(|&i| simplex[i].clone()).collect();
        let ordered_vals: Vec<f64> = idx.iter().map(|&i| values[i]).collect();
        simplex = ordered;
        values = ordered_vals;

        let f_best = values[0];
        let f_worst = values[dim];
        let spread = (f_worst - f_best).abs();
        let diam = simplex[1..]
            .iter()
            .map(|v| {
                v.iter()
                    .zip(&simplex[0])
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0f64, f64::max)
            })
            .fold(0.0f64, f64::max);
        if spread <= settings.tolerance * (1.0 + f_best.abs())
            && diam <= settings.tolerance.sqrt() * 1e-2
        {
            converged = true;
            break;
        }

        // centroid of all but the worst
        let mut centroid = vec![0.0; dim];
        for v in &simplex[..dim] {
            for (c, x) in centroid.iter_mut().zip(v) {
                *c += x / dim as f64;
            }
        }

        let point = |coef: f64, through: &[f64]| -> Vec<f64> {
            let mut p: Vec<f64> = centroid
                .iter()
                .zip(through)
                .map(|(c, w)| c + coef * (c - w))
                .collect();
            clamp(&mut p, boxc);
            p
        };

        let reflected = point(ALPHA, &simplex[dim]);
        let f_ref = f(&reflected);
        if f_ref < values[0] {
            let expanded = point(GAMMA, &simplex[dim]);
            let f_exp = f(&expanded);
            if f_exp < f_ref {
                simplex[dim] = expanded;
                values[dim] = f_exp;
            } else {
                simplex[dim] = reflected;
                values[dim] = f_ref;
            }
            continue;
        }
        if f_ref < values[dim - 1] {
            simplex[dim] = reflected;
            values[dim] = f_ref;
            continue;
        }
        let contracted = point(-RHO, &simplex[dim]);
        let f_con = f(&contracted);
        if f_con < values[dim] {
            simplex[dim] = contracted;
            values[dim] = f_con;
            continue;
        }
        // shrink toward the best vertex
        let best = simplex[0].clone();
        for v in simplex.iter_mut().skip(1) {
            for (x, b) in v.iter_mut().zip(&best) {
                *x = b + SIGMA * (*x - b);
            }
            clamp(v, boxc);
        }
        for (val, v) in values.iter_mut().zip(&simplex).skip(1) {
            *val = f(v);
        }
    }

    let mut best_i = 0;
    for i in 1..=dim {
        if values[i] < values[best_i] {
            best_i = i;
        }
    }
    NelderMeadRun {
        x: simplex[best_i].clone(),
        f: values[best_i],
        converged,
        iterations,
    }
}

/// Deterministic multistart points: box center first, then corners in
/// lexicographic order, recycling the center with jitter-free midpoints if
/// more starts are requested than corners exist.
pub fn multistart_points(boxc: &[(f64, f64)], count: usize) -> Vec<Vec<f64>> {
    let dim = boxc.len();
    let center: Vec<f64> = boxc.iter().map(|(lo, hi)| 0.5 * (lo + hi)).collect();
    let mut starts = vec![center.clone()];
    let corners = 1usize << dim.min(20);
    for mask in 0..corners {
        if starts.len() >= count {
            break;
        }
        let corner: Vec<f64> = (0..dim)
            .map(|i| if mask >> i & 1 == 1 { boxc[i].1 } else { boxc[i].0 })
            .collect();
        starts.push(corner);
    }
    while starts.len() < count {
        // midpoints between center and already-chosen corners
        let base = starts[1 + (starts.len() - 1) % corners.max(1)].clone();
        let mid: Vec<f64> =
            base.iter().zip(&center).map(|(a, c)| 0.5 * (a + c)).collect();
        starts.push(mid);
    }
    starts.truncate(count);
    starts
}
