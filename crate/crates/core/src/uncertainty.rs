//! Monte Carlo propagation of Raman-parameter uncertainties into the rate
//! ratio.
//!
//! Every sample re-solves the band minimum. All sweep points reuse the same
//! standard-normal draws (common random numbers), so neighbouring points of a
//! band differ by the physics rather than by sampling noise.

use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dressed_states::{find_band_minimum, RamanParams};
use crate::error::{Error, Result};
use crate::interference::{rate_ratio, rate_ratio_no_interference, SpinAmplitudes, Variant};

pub const MIN_SAMPLES: usize = 100;
/// Display range of band edges.
pub const BAND_CLIP: (f64, f64) = (0.0, 1.05);
pub const BAND_CSV_HEADER: &str = "axis_value_Er,mean,lower,upper,variant";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UncertaintySpec {
    /// Relative 1σ of Ω_R.
    pub omega_rel_sigma: f64,
    /// Absolute 1σ of δ, E_r.
    pub delta_sigma: f64,
    /// Absolute 1σ of ε_q, E_r.
    pub epsilon_q_sigma: f64,
    pub n_samples: usize,
    pub seed: u64,
    /// Negate the δ draws. `band(δ)` with a seed equals `band(-δ)` with the
    /// same seed mirrored.
    pub mirror_delta: bool,
}

impl Default for UncertaintySpec {
    fn default() -> Self {
        Self {
            omega_rel_sigma: 0.10,
            delta_sigma: 0.5,
            epsilon_q_sigma: 0.0,
            n_samples: 2000,
            seed: 0,
            mirror_delta: false,
        }
    }
}

impl UncertaintySpec {
    /// All sigmas zero: every sample equals the nominal parameters.
    pub fn exact(n_samples: usize) -> Self {
        Self {
            omega_rel_sigma: 0.0,
            delta_sigma: 0.0,
            epsilon_q_sigma: 0.0,
            n_samples,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, s) in [
            ("omega_rel_sigma", self.omega_rel_sigma),
            ("delta_sigma", self.delta_sigma),
            ("epsilon_q_sigma", self.epsilon_q_sigma),
        ] {
            if !(s >= 0.0) || !s.is_finite() {
                return Err(Error::InvalidParameter(format!("{name} = {s} must be >= 0")));
            }
        }
        if self.n_samples < MIN_SAMPLES {
            return Err(Error::InvalidParameter(format!(
                "n_samples = {} must be >= {MIN_SAMPLES}",
                self.n_samples
            )));
        }
        Ok(())
    }
}

/// `n_samples` perturbed copies of `nominal`, deterministic in `spec.seed`.
/// Draws giving Ω_R < 0 (or ε_q < 0) are redrawn.
pub fn sample_parameters(nominal: &RamanParams, spec: &UncertaintySpec) -> Result<Vec<RamanParams>> {
    spec.validate()?;
    nominal.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut normal = || -> f64 { StandardNormal.sample(&mut rng) };
    let sign = if spec.mirror_delta { -1.0 } else { 1.0 };
    let samples = (0..spec.n_samples)
        .map(|_| {
            let omega_r = loop {
                let v = nominal.omega_r * (1.0 + spec.omega_rel_sigma * normal());
                if v >= 0.0 {
                    break v;
                }
            };
            let delta = nominal.delta + sign * spec.delta_sigma * normal();
            let epsilon_q = loop {
                let v = nominal.epsilon_q + spec.epsilon_q_sigma * normal();
                if v >= 0.0 {
                    break v;
                }
            };
            RamanParams {
                omega_r,
                delta,
                epsilon_q,
                ..*nominal
            }
        })
        .collect();
    Ok(samples)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioBand {
    pub sweep_axis: Vec<f64>,
    pub mean: Vec<f64>,
    /// Sample standard deviation.
    pub std: Vec<f64>,
    /// `mean - std`, clipped to [`BAND_CLIP`].
    pub lower: Vec<f64>,
    /// `mean + std`, clipped to [`BAND_CLIP`].
    pub upper: Vec<f64>,
    pub n_samples: usize,
    pub variant: String,
}

impl RatioBand {
    /// Standard error of the mean at each point.
    pub fn sem(&self) -> Vec<f64> {
        let n = self.n_samples as f64;
        self.std.iter().map(|s| s / n.sqrt()).collect()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        write_bands_csv(out, std::slice::from_ref(self))
    }
}

/// One header, then the rows of each band in turn.
pub fn write_bands_csv<W: Write>(mut out: W, bands: &[RatioBand]) -> Result<()> {
    writeln!(out, "{BAND_CSV_HEADER}")?;
    for band in bands {
        for i in 0..band.sweep_axis.len() {
            writeln!(
                out,
                "{},{},{},{},{}",
                band.sweep_axis[i], band.mean[i], band.lower[i], band.upper[i], band.variant
            )?;
        }
    }
    Ok(())
}

/// Single-pass mean and variance.
#[derive(Default)]
struct Welford {
    n: usize,
    mean: f64,
    m2: f64,
}

impl Welford {
    fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    fn std(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            (self.m2 / (self.n - 1) as f64).sqrt().max(0.0)
        }
    }
}

struct BandBuilder {
    axis: Vec<f64>,
    mean: Vec<f64>,
    std: Vec<f64>,
}

impl BandBuilder {
    fn finish(self, n_samples: usize, variant: Variant) -> RatioBand {
        let clip = |x: f64| x.clamp(BAND_CLIP.0, BAND_CLIP.1);
        RatioBand {
            lower: self.mean.iter().zip(&self.std).map(|(m, s)| clip(m - s)).collect(),
            upper: self.mean.iter().zip(&self.std).map(|(m, s)| clip(m + s)).collect(),
            sweep_axis: self.axis,
            mean: self.mean,
            std: self.std,
            n_samples,
            variant: variant.label().to_string(),
        }
    }
}

/// Both variants from one set of band-minimum solves, in the order
/// (with interference, without interference).
fn sweep<F>(axis: &[f64], spec: &UncertaintySpec, nominal_at: F) -> Result<(RatioBand, RatioBand)>
where
    F: Fn(f64) -> RamanParams,
{
    if axis.is_empty() {
        return Err(Error::InvalidGrid("empty sweep list".into()));
    }
    spec.validate()?;
    let mut with = BandBuilder { axis: axis.to_vec(), mean: vec![], std: vec![] };
    let mut without = BandBuilder { axis: axis.to_vec(), mean: vec![], std: vec![] };
    for &x in axis {
        let samples = sample_parameters(&nominal_at(x), spec)?;
        let ratios = samples
            .par_iter()
            .map(|p| {
                let s = SpinAmplitudes::from(&find_band_minimum(p)?);
                Ok((rate_ratio(&s), rate_ratio_no_interference(&s)))
            })
            .collect::<Result<Vec<_>>>()?;
        // fixed-order accumulation keeps the result independent of scheduling
        let (mut a, mut b) = (Welford::default(), Welford::default());
        for (r, r0) in ratios {
            a.push(r);
            b.push(r0);
        }
        with.mean.push(a.mean);
        with.std.push(a.std());
        without.mean.push(b.mean);
        without.std.push(b.std());
    }
    Ok((
        with.finish(spec.n_samples, Variant::WithInterference),
        without.finish(spec.n_samples, Variant::WithoutInterference),
    ))
}

fn pick(bands: (RatioBand, RatioBand), variant: Variant) -> RatioBand {
    match variant {
        Variant::WithInterference => bands.0,
        Variant::WithoutInterference => bands.1,
    }
}

/// Bands of both variants over Ω_R at fixed nominal detuning.
pub fn ratio_bands_vs_omega(
    omegas: &[f64],
    nominal: &RamanParams,
    spec: &UncertaintySpec,
) -> Result<(RatioBand, RatioBand)> {
    sweep(omegas, spec, |omega| nominal.with_omega(omega))
}

/// Bands of both variants over δ at fixed nominal coupling.
pub fn ratio_bands_vs_delta(
    deltas: &[f64],
    nominal: &RamanParams,
    spec: &UncertaintySpec,
) -> Result<(RatioBand, RatioBand)> {
    sweep(deltas, spec, |delta| nominal.with_delta(delta))
}

pub fn ratio_band_vs_omega(
    omegas: &[f64],
    delta: f64,
    spec: &UncertaintySpec,
    variant: Variant,
) -> Result<RatioBand> {
    ratio_bands_vs_omega(omegas, &RamanParams::new(0.0, delta), spec).map(|b| pick(b, variant))
}

pub fn ratio_band_vs_delta(
    deltas: &[f64],
    omega: f64,
    spec: &UncertaintySpec,
    variant: Variant,
) -> Result<RatioBand> {
    ratio_bands_vs_delta(deltas, &RamanParams::new(omega, 0.0), spec).map(|b| pick(b, variant))
}
