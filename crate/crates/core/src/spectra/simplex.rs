//! Nelder-Mead downhill simplex.

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimplexOptions {
    pub max_iterations: usize,
    /// Stop when every vertex is within this distance (per coordinate) of the best.
    pub x_tolerance: f64,
    /// ... and the objective spread is below `f_tolerance · |f_best|` (or 1e-30).
    pub f_tolerance: f64,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        Self {
            max_iterations: 5000,
            x_tolerance: 1e-10,
            f_tolerance: 1e-14,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimplexResult {
    pub x: Vec<f64>,
    pub f: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
    /// Best objective after each iteration.
    pub history: Vec<f64>,
}

const REFLECT: f64 = 1.0;
const EXPAND: f64 = 2.0;
const CONTRACT: f64 = 0.5;
const SHRINK: f64 = 0.5;

/// Minimizes `f` from `x0` with an axis-aligned initial simplex of edge
/// lengths `steps`. Non-finite objective values are treated as +∞.
pub fn minimize<F>(mut f: F, x0: &[f64], steps: &[f64], opts: &SimplexOptions) -> SimplexResult
where
    F: FnMut(&[f64]) -> f64,
{
    let n = x0.len();
    assert_eq!(steps.len(), n);
    let mut evaluations = 0usize;
    let mut eval = |x: &[f64]| {
        evaluations += 1;
        let v = f(x);
        if v.is_finite() {
            v
        } else {
            f64::INFINITY
        }
    };

    let mut vertices: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    vertices.push(x0.to_vec());
    for i in 0..n {
        let mut v = x0.to_vec();
        v[i] += steps[i];
        vertices.push(v);
    }
    let mut values: Vec<f64> = vertices.iter().map(|v| eval(v)).collect();
    let mut history = Vec::new();
    let mut converged = false;
    let mut iterations = 0;

    let point = |base: &[f64], toward: &[f64], t: f64| -> Vec<f64> {
        base.iter().zip(toward).map(|(b, w)| b + t * (w - b)).collect()
    };

    while iterations < opts.max_iterations {
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        vertices = order.iter().map(|&i| vertices[i].clone()).collect();
        values = order.iter().map(|&i| values[i]).collect();

        let (best, worst) = (values[0], values[n]);
        let x_spread = vertices[1..]
            .iter()
            .flat_map(|v| v.iter().zip(&vertices[0]).map(|(a, b)| (a - b).abs()))
            .fold(0.0_f64, f64::max);
        let f_spread = worst - best;
        if x_spread < opts.x_tolerance
            || (f_spread.is_finite() && f_spread <= opts.f_tolerance * best.abs() + 1e-30)
        {
            converged = true;
            break;
        }
        iterations += 1;

        let mut centroid = vec![0.0; n];
        for v in &vertices[..n] {
            for (c, x) in centroid.iter_mut().zip(v) {
                *c += x / n as f64;
            }
        }
        // centroid + t (worst - centroid)
        let reflected = point(&centroid, &vertices[n], -REFLECT);
        let f_r = eval(&reflected);
        if f_r < values[0] {
            let expanded = point(&centroid, &vertices[n], -EXPAND);
            let f_e = eval(&expanded);
            if f_e < f_r {
                vertices[n] = expanded;
                values[n] = f_e;
            } else {
                vertices[n] = reflected;
                values[n] = f_r;
            }
        } else if f_r < values[n - 1] {
            vertices[n] = reflected;
            values[n] = f_r;
        } else {
            let (candidate, f_c) = if f_r < values[n] {
                let c = point(&centroid, &reflected, CONTRACT);
                let fc = eval(&c);
                (c, fc)
            } else {
                let c = point(&centroid, &vertices[n], CONTRACT);
                let fc = eval(&c);
                (c, fc)
            };
            if f_c < values[n].min(f_r) {
                vertices[n] = candidate;
                values[n] = f_c;
            } else {
                let best = vertices[0].clone();
                for i in 1..=n {
                    vertices[i] = point(&best, &vertices[i], SHRINK);
                    values[i] = eval(&vertices[i]);
                }
            }
        }
        history.push(values.iter().copied().fold(f64::INFINITY, f64::min));
    }

    let (i_best, &f_best) = values
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .expect("simplex has vertices");
    SimplexResult {
        x: vertices[i_best].clone(),
        f: f_best,
        iterations,
        evaluations,
        converged,
        history,
    }
}
