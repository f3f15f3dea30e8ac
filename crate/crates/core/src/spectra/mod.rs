//! PA spectra: synthesis, CSV exchange, fitting and normalization.
//!
//! The forward model for the atom number at PA detuning `Δν` is
//! `N₀ · remaining_fraction(lorentzian_eta(Δν))`.

mod fit;
mod io;
pub mod simplex;

pub use fit::{fit_channel, fit_spectrum, FitOptions, FitResult, FIT_PARAMETERS};
pub use io::{read_spectrum_csv, write_spectrum_csv, SPECTRUM_CSV_HEADER};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dressed_states::RamanParams;
use crate::error::{Error, Result};
use crate::pa_kinetics::{
    lorentzian_eta, rate_from_eta, remaining_fraction, simulate_mixture_with, LorentzianLine,
    MixtureModel, MixtureState, PulseParams,
};

/// Minimum number of points [`fit_spectrum`] accepts.
pub const MIN_FIT_POINTS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectrumPoint {
    pub detuning_khz: f64,
    pub atoms_total: f64,
    /// (N₋₁, N₀, N₊₁) when the spin components were resolved.
    pub components: Option<[f64; 3]>,
    /// Standard error of `atoms_total`.
    pub stderr: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Spectrum {
    pub points: Vec<SpectrumPoint>,
    pub pulse: Option<PulseParams>,
    pub dressing: Option<RamanParams>,
    pub label: String,
}

/// Which atom-number series of a spectrum to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Channel {
    Total,
    MinusOne,
    Zero,
    PlusOne,
}

impl Channel {
    pub const COMPONENTS: [Channel; 3] = [Channel::MinusOne, Channel::Zero, Channel::PlusOne];

    fn component_index(self) -> Option<usize> {
        match self {
            Channel::Total => None,
            Channel::MinusOne => Some(0),
            Channel::Zero => Some(1),
            Channel::PlusOne => Some(2),
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Channel::Total => "total",
            Channel::MinusOne => "m-1",
            Channel::Zero => "m0",
            Channel::PlusOne => "m+1",
        }
    }
}

impl Spectrum {
    pub fn detunings(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.detuning_khz).collect()
    }

    pub fn has_components(&self) -> bool {
        !self.points.is_empty() && self.points.iter().all(|p| p.components.is_some())
    }

    /// Atom numbers of one channel; errors if a component is missing.
    pub fn channel(&self, channel: Channel) -> Result<Vec<f64>> {
        self.points
            .iter()
            .map(|p| match channel.component_index() {
                None => Ok(p.atoms_total),
                Some(i) => p.components.map(|c| c[i]).ok_or_else(|| {
                    Error::InvalidSpectrum(format!(
                        "no {} counts at detuning {} kHz",
                        channel.label(),
                        p.detuning_khz
                    ))
                }),
            })
            .collect()
    }

    /// Strictly increasing detunings, finite non-negative counts.
    pub fn validate(&self) -> Result<()> {
        for (i, p) in self.points.iter().enumerate() {
            if !p.detuning_khz.is_finite() {
                return Err(Error::InvalidSpectrum(format!("point {i}: non-finite detuning")));
            }
            if i > 0 && !(p.detuning_khz > self.points[i - 1].detuning_khz) {
                return Err(Error::InvalidSpectrum(format!(
                    "point {i}: detuning {} kHz not strictly greater than {} kHz",
                    p.detuning_khz,
                    self.points[i - 1].detuning_khz
                )));
            }
            let mut counts = vec![p.atoms_total];
            counts.extend(p.components.iter().flatten());
            if counts.iter().any(|&n| !(n >= 0.0) || !n.is_finite()) {
                return Err(Error::InvalidSpectrum(format!(
                    "point {i}: atom counts must be finite and >= 0"
                )));
            }
            if let Some(e) = p.stderr {
                if !(e >= 0.0) || !e.is_finite() {
                    return Err(Error::InvalidSpectrum(format!("point {i}: invalid stderr {e}")));
                }
            }
        }
        Ok(())
    }

    pub fn validate_for_fit(&self) -> Result<()> {
        self.validate()?;
        if self.points.len() < MIN_FIT_POINTS {
            return Err(Error::InvalidSpectrum(format!(
                "{} points, at least {MIN_FIT_POINTS} needed for fitting",
                self.points.len()
            )));
        }
        Ok(())
    }
}

/// Noise-free forward model at one detuning.
pub fn model_atoms(n0: f64, line: &LorentzianLine, detuning_khz: f64) -> f64 {
    // lorentzian_eta is non-negative for a valid line
    n0 * remaining_fraction(lorentzian_eta(detuning_khz, line)).unwrap_or(f64::NAN)
}

fn check_synthesis(line: &LorentzianLine, pulse: &PulseParams, detunings: &[f64], noise_rel: f64) -> Result<()> {
    line.validate()?;
    pulse.validate()?;
    if detunings.is_empty() {
        return Err(Error::InvalidSpectrum("empty detuning list".into()));
    }
    if !(noise_rel >= 0.0) || !noise_rel.is_finite() {
        return Err(Error::InvalidParameter(format!("noise_rel = {noise_rel} must be >= 0")));
    }
    Ok(())
}

fn noisy(clean: f64, noise_rel: f64, rng: &mut ChaCha8Rng) -> f64 {
    let z: f64 = StandardNormal.sample(rng);
    if noise_rel == 0.0 {
        clean
    } else {
        (clean * (1.0 + noise_rel * z)).max(0.0)
    }
}

/// Total-atom spectrum with multiplicative Gaussian noise, deterministic in
/// `seed`.
pub fn synthesize_spectrum(
    line: &LorentzianLine,
    pulse: &PulseParams,
    detunings: &[f64],
    noise_rel: f64,
    seed: u64,
) -> Result<Spectrum> {
    check_synthesis(line, pulse, detunings, noise_rel)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points = detunings
        .iter()
        .map(|&d| SpectrumPoint {
            detuning_khz: d,
            atoms_total: noisy(model_atoms(pulse.n0, line, d), noise_rel, &mut rng),
            components: None,
            stderr: None,
        })
        .collect();
    Ok(Spectrum {
        points,
        pulse: Some(*pulse),
        dressing: None,
        label: String::from("synthetic"),
    })
}

/// Spin-resolved spectrum of a dressed condensate: the whole superposition
/// photoassociates with one rate, so every component keeps the fraction
/// `weights[m]` of the surviving atoms. Each component gets independent noise;
/// the total is their sum.
pub fn synthesize_dressed_spectrum(
    line: &LorentzianLine,
    pulse: &PulseParams,
    weights: [f64; 3],
    detunings: &[f64],
    noise_rel: f64,
    seed: u64,
) -> Result<Spectrum> {
    check_synthesis(line, pulse, detunings, noise_rel)?;
    if weights.iter().any(|&w| !(w >= 0.0)) || (weights.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidParameter(format!(
            "spin weights {weights:?} must be >= 0 and sum to 1"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points = detunings
        .iter()
        .map(|&d| {
            let clean = model_atoms(pulse.n0, line, d);
            let components = weights.map(|w| noisy(w * clean, noise_rel, &mut rng));
            SpectrumPoint {
                detuning_khz: d,
                atoms_total: components.iter().sum(),
                components: Some(components),
                stderr: None,
            }
        })
        .collect();
    Ok(Spectrum {
        points,
        pulse: Some(*pulse),
        dressing: None,
        label: String::from("synthetic-dressed"),
    })
}

/// Spin-resolved spectrum of a statistical mixture. `line.eta_res` is
/// `k₀₀ ρ₀ t_PA` on resonance; at each detuning the mixture kinetics run with
/// the Lorentzian-scaled k₀₀ and step `dt`.
#[allow(clippy::too_many_arguments)]
pub fn synthesize_mixture_spectrum(
    initial: &MixtureState,
    model: &MixtureModel,
    line: &LorentzianLine,
    pulse: &PulseParams,
    detunings: &[f64],
    noise_rel: f64,
    seed: u64,
    dt: f64,
) -> Result<Spectrum> {
    check_synthesis(line, pulse, detunings, noise_rel)?;
    let finals = detunings
        .par_iter()
        .map(|&d| {
            let m = MixtureModel {
                k00: rate_from_eta(lorentzian_eta(d, line), pulse),
                ..*model
            };
            Ok(simulate_mixture_with(initial, &m, pulse, dt)?.last().counts)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points = detunings
        .iter()
        .zip(finals)
        .map(|(&d, counts)| {
            let components = counts.map(|n| noisy(n, noise_rel, &mut rng));
            SpectrumPoint {
                detuning_khz: d,
                atoms_total: components.iter().sum(),
                components: Some(components),
                stderr: None,
            }
        })
        .collect();
    Ok(Spectrum {
        points,
        pulse: Some(*pulse),
        dressing: None,
        label: String::from("synthetic-mixture"),
    })
}

/// `k_PA = η_res / (ρ₀ t_PA)` from a converged fit, cm³/s.
pub fn extract_kpa(fit: &FitResult, pulse: &PulseParams) -> Result<f64> {
    if !fit.converged {
        return Err(Error::NotConverged);
    }
    pulse.validate()?;
    Ok(rate_from_eta(fit.eta_res, pulse))
}

fn scaled(p: &SpectrumPoint, total: f64, comps: [f64; 3]) -> SpectrumPoint {
    SpectrumPoint {
        detuning_khz: p.detuning_khz,
        atoms_total: p.atoms_total / total,
        components: p.components.map(|c| [c[0] / comps[0], c[1] / comps[1], c[2] / comps[2]]),
        stderr: p.stderr.map(|e| e / total),
    }
}

fn usable_n0(fit: &FitResult) -> Result<f64> {
    if !fit.converged {
        return Err(Error::NotConverged);
    }
    if !(fit.n0 > 0.0) {
        return Err(Error::InvalidParameter(format!("fitted n0 = {} must be > 0", fit.n0)));
    }
    Ok(fit.n0)
}

/// Every count and error divided by the fitted off-resonant number.
pub fn normalize_spectrum(data: &Spectrum, fit: &FitResult) -> Result<Spectrum> {
    let n0 = usable_n0(fit)?;
    Ok(Spectrum {
        points: data.points.iter().map(|p| scaled(p, n0, [n0; 3])).collect(),
        ..data.clone()
    })
}

/// Total scaled by the total fit, each spin component by its own fit.
pub fn normalize_per_channel(
    data: &Spectrum,
    total: &FitResult,
    components: &[FitResult; 3],
) -> Result<Spectrum> {
    let n0 = usable_n0(total)?;
    let comps = [
        usable_n0(&components[0])?,
        usable_n0(&components[1])?,
        usable_n0(&components[2])?,
    ];
    Ok(Spectrum {
        points: data.points.iter().map(|p| scaled(p, n0, comps)).collect(),
        ..data.clone()
    })
}

/// On-resonance fractional loss `1 - N(η_res)/N₀` of one fit.
pub fn resonant_loss(fit: &FitResult) -> f64 {
    1.0 - remaining_fraction(fit.eta_res.max(0.0)).unwrap_or(1.0)
}

/// Resonant loss from the total-atom fit and from the N₀-weighted sum of the
/// per-component fits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossReport {
    pub total_fit: f64,
    pub component_sum: Option<f64>,
}

pub fn loss_report(total: &FitResult, components: Option<&[FitResult; 3]>) -> LossReport {
    let component_sum = components.map(|fits| {
        let n0: f64 = fits.iter().map(|f| f.n0).sum();
        fits.iter().map(|f| f.n0 * resonant_loss(f)).sum::<f64>() / n0
    });
    LossReport {
        total_fit: resonant_loss(total),
        component_sum,
    }
}
