//! Least-squares fit of a PA spectrum to `N₀ · remaining_fraction(η(Δν))`.
//!
//! The simplex works in `(n0/n0_guess, ln η_res, (ν₀-ν_guess)/span, ln(γ/span))`,
//! so positivity of η_res and γ needs no constraints and all coordinates are
//! O(1). Residuals are inverse-variance weighted when standard errors exist.

use nalgebra::Matrix4;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::simplex::{self, SimplexOptions};
use super::{model_atoms, Channel, Spectrum};
use crate::error::Result;
use crate::pa_kinetics::{invert_remaining_fraction, rate_from_eta, LorentzianLine};

/// Order of the parameters in [`FitResult::covariance`].
pub const FIT_PARAMETERS: [&str; 4] = ["n0", "eta_res", "nu0_khz", "gamma_khz"];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    /// Simplex runs from perturbed starting points after the first run.
    pub restarts: usize,
    pub seed: u64,
    pub simplex: SimplexOptions,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            restarts: 5,
            seed: 0,
            simplex: SimplexOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub n0: f64,
    pub eta_res: f64,
    /// kHz
    pub nu0: f64,
    /// FWHM, kHz
    pub gamma: f64,
    /// cm³/s, when the spectrum carries pulse metadata.
    pub k_pa: Option<f64>,
    /// RMS of the relative residuals `(data - model)/model`.
    pub residual_rms: f64,
    pub converged: bool,
    /// 4×4 covariance in [`FIT_PARAMETERS`] order; `None` if the quadratic
    /// model at the optimum is singular.
    pub covariance: Option<[[f64; 4]; 4]>,
    pub iterations: usize,
}

impl FitResult {
    pub fn line(&self) -> LorentzianLine {
        LorentzianLine {
            eta_res: self.eta_res,
            nu0: self.nu0,
            gamma: self.gamma,
        }
    }

    pub fn model(&self, detuning_khz: f64) -> f64 {
        model_atoms(self.n0, &self.line(), detuning_khz)
    }

    /// One-sigma errors from the covariance diagonal.
    pub fn std_errors(&self) -> Option<[f64; 4]> {
        self.covariance.map(|c| [0, 1, 2, 3].map(|i| c[i][i].max(0.0).sqrt()))
    }
}

struct Problem<'a> {
    x: &'a [f64],
    y: Vec<f64>,
    w: Vec<f64>,
    n0_guess: f64,
    nu_guess: f64,
    span: f64,
    /// Σ w y², makes the simplex objective dimensionless.
    norm: f64,
}

impl Problem<'_> {
    fn natural(&self, theta: &[f64]) -> [f64; 4] {
        [
            theta[0] * self.n0_guess,
            theta[1].exp(),
            self.nu_guess + theta[2] * self.span,
            theta[3].exp() * self.span,
        ]
    }

    fn chi2(&self, p: &[f64; 4]) -> f64 {
        let line = LorentzianLine {
            eta_res: p[1],
            nu0: p[2],
            gamma: p[3],
        };
        self.x
            .iter()
            .zip(&self.y)
            .zip(&self.w)
            .map(|((&x, &y), &w)| {
                let r = y - model_atoms(p[0], &line, x);
                w * r * r
            })
            .sum()
    }

    fn objective(&self, theta: &[f64]) -> f64 {
        self.chi2(&self.natural(theta)) / self.norm
    }
}

/// Fits the total-atom series with default options.
pub fn fit_spectrum(data: &Spectrum) -> Result<FitResult> {
    fit_channel(data, Channel::Total, &FitOptions::default())
}

pub fn fit_channel(data: &Spectrum, channel: Channel, opts: &FitOptions) -> Result<FitResult> {
    data.validate_for_fit()?;
    let x = data.points.iter().map(|p| p.detuning_khz).collect::<Vec<_>>();
    let y = data.channel(channel)?;
    // standard errors belong to the total series only
    let w: Vec<f64> = match channel {
        Channel::Total if data.points.iter().all(|p| p.stderr.is_some_and(|e| e > 0.0)) => data
            .points
            .iter()
            .map(|p| 1.0 / p.stderr.unwrap().powi(2))
            .collect(),
        _ => vec![1.0; y.len()],
    };

    let (i_min, &y_min) = y
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .expect("at least MIN_FIT_POINTS points");
    let y_max = y.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = x[x.len() - 1] - x[0];
    let pulse_k = |eta: f64| data.pulse.map(|p| rate_from_eta(eta, &p));

    if y_max <= 0.0 || y_max - y_min <= 1e-12 * y_max {
        // flat: no loss to fit, η_res pinned at zero
        let n0 = y.iter().sum::<f64>() / y.len() as f64;
        return Ok(FitResult {
            n0,
            eta_res: 0.0,
            nu0: 0.5 * (x[0] + x[x.len() - 1]),
            gamma: 0.5 * span,
            k_pa: pulse_k(0.0),
            residual_rms: 0.0,
            converged: true,
            covariance: None,
            iterations: 0,
        });
    }

    let eta_guess = invert_remaining_fraction((y_min / y_max).max(1e-6))?.max(1e-3);
    let problem = Problem {
        x: &x,
        norm: y.iter().zip(&w).map(|(y, w)| w * y * y).sum(),
        y,
        w,
        n0_guess: y_max,
        nu_guess: x[i_min],
        span,
    };
    let theta0 = [1.0, eta_guess.ln(), 0.0, 0.5f64.ln()];
    let steps = [0.05, 0.5, 0.05, 0.3];
    let objective = |t: &[f64]| problem.objective(t);

    let mut best = simplex::minimize(objective, &theta0, &steps, &opts.simplex);
    let mut iterations = best.iterations;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    for _ in 0..opts.restarts {
        let start: Vec<f64> = theta0
            .iter()
            .zip(&steps)
            .map(|(t, s)| t + s * rng.random_range(-1.0..1.0))
            .collect();
        let run = simplex::minimize(objective, &start, &steps, &opts.simplex);
        iterations += run.iterations;
        if run.f < best.f {
            best = run;
        }
    }
    // polish from the best vertex with a fresh, smaller simplex
    let polish_steps = steps.map(|s| 0.1 * s);
    let polish = simplex::minimize(objective, &best.x, &polish_steps, &opts.simplex);
    iterations += polish.iterations;
    let converged = polish.converged;
    if polish.f <= best.f {
        best = polish;
    }

    let p = problem.natural(&best.x);
    let line = LorentzianLine {
        eta_res: p[1],
        nu0: p[2],
        gamma: p[3],
    };
    let rel: Vec<f64> = problem
        .x
        .iter()
        .zip(&problem.y)
        .map(|(&x, &y)| {
            let m = model_atoms(p[0], &line, x);
            (y - m) / m
        })
        .collect();
    let residual_rms = (rel.iter().map(|r| r * r).sum::<f64>() / rel.len() as f64).sqrt();

    Ok(FitResult {
        n0: p[0],
        eta_res: p[1],
        nu0: p[2],
        gamma: p[3],
        k_pa: pulse_k(p[1]),
        residual_rms,
        converged,
        covariance: covariance(&problem, &p),
        iterations,
    })
}

/// `s² (Jᵀ W J)⁻¹` with a central-difference Jacobian of the model and
/// `s² = χ²/(n - 4)`.
fn covariance(problem: &Problem, p: &[f64; 4]) -> Option<[[f64; 4]; 4]> {
    let n = problem.x.len();
    if n <= 4 {
        return None;
    }
    let scales = [p[0].abs(), p[1].abs(), problem.span, p[3].abs()];
    let model = |q: &[f64; 4], x: f64| {
        model_atoms(
            q[0],
            &LorentzianLine {
                eta_res: q[1],
                nu0: q[2],
                gamma: q[3],
            },
            x,
        )
    };
    let mut jac = vec![[0.0; 4]; n];
    for k in 0..4 {
        let h = 1e-6 * scales[k].max(1e-12);
        let (mut up, mut down) = (*p, *p);
        up[k] += h;
        down[k] -= h;
        if down[k] <= 0.0 && k != 2 {
            down[k] = p[k];
        }
        let width = up[k] - down[k];
        for (i, &x) in problem.x.iter().enumerate() {
            jac[i][k] = (model(&up, x) - model(&down, x)) / width;
        }
    }
    let mut jtwj = Matrix4::<f64>::zeros();
    for (row, &w) in jac.iter().zip(&problem.w) {
        for a in 0..4 {
            for b in 0..4 {
                jtwj[(a, b)] += w * row[a] * row[b];
            }
        }
    }
    let s2 = problem.chi2(p) / (n - 4) as f64;
    let inv = jtwj.try_inverse()?;
    let mut out = [[0.0; 4]; 4];
    for a in 0..4 {
        for b in 0..4 {
            out[a][b] = s2 * inv[(a, b)];
            if !out[a][b].is_finite() {
                return None;
            }
        }
    }
    Some(out)
}
