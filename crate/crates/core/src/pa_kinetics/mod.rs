//! Two-body photoassociation loss in a Thomas-Fermi condensate.
//!
//! Locally `dρ/dt = -k_PA ρ²`, so `ρ(t) = ρ(0) / (1 + k_PA ρ(0) t)`. Summed over
//! the parabolic profile `ρ(0, r) = ρ₀ (1 - r²/R²)` the surviving fraction is a
//! function of `η = k_PA ρ₀ t_PA` alone:
//!
//! ```text
//! N/N₀ = (15/2) η^(-5/2) [ η^(1/2) + η^(3/2)/3 - (1+η)^(1/2) atanh(√(η/(1+η))) ]
//! ```

mod mixture;

pub use mixture::{
    calibrate_k00, simulate_mixture, simulate_mixture_with, MixtureModel, MixtureRun, MixtureSample,
    MixtureState, MIXTURE_CSV_HEADER,
};

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::units;

/// Below this η the closed form loses digits to cancellation (the bracket is
/// O(η^(5/2))) and the power series is used instead.
pub const SERIES_SWITCH_ETA: f64 = 1e-4;

const SERIES_TERMS: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PulseParams {
    /// Pulse duration, s.
    pub t_pa: f64,
    /// PA intensity, W/cm². Carried as metadata.
    pub intensity: f64,
    /// Peak condensate density, cm⁻³.
    pub rho0: f64,
    /// Off-resonant atom number.
    pub n0: f64,
}

impl PulseParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("t_pa", self.t_pa), ("rho0", self.rho0), ("n0", self.n0)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!("{name} = {v} must be > 0")));
            }
        }
        Ok(())
    }
}

/// Lorentzian profile of the pulse strength η across the PA resonance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LorentzianLine {
    /// η on resonance.
    pub eta_res: f64,
    /// Line center, kHz.
    pub nu0: f64,
    /// FWHM, kHz.
    pub gamma: f64,
}

impl LorentzianLine {
    pub fn validate(&self) -> Result<()> {
        if !(self.eta_res >= 0.0 && self.eta_res.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "eta_res = {} must be >= 0",
                self.eta_res
            )));
        }
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "gamma = {} must be > 0",
                self.gamma
            )));
        }
        if !self.nu0.is_finite() {
            return Err(Error::InvalidParameter("nu0 must be finite".into()));
        }
        Ok(())
    }
}

fn check_eta(eta: f64) -> Result<()> {
    if eta >= 0.0 && !eta.is_nan() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("eta = {eta} must be >= 0")))
    }
}

/// Power series `Σ aₙ (-η)ⁿ`, `a₀ = 1`, `aₙ = aₙ₋₁ (2n+2)/(2n+5)`.
fn remaining_fraction_series(eta: f64) -> f64 {
    let mut term = 1.0;
    let mut sum = 1.0;
    for n in 1..=SERIES_TERMS {
        let n = n as f64;
        term *= -eta * (2.0 * n + 2.0) / (2.0 * n + 5.0);
        sum += term;
    }
    sum
}

fn remaining_fraction_closed(eta: f64) -> f64 {
    let s = eta.sqrt();
    // atanh(√(η/(1+η))) = asinh(√η)
    let bracket = s * (1.0 + eta / 3.0) - (1.0 + eta).sqrt() * s.asinh();
    7.5 * bracket / (eta * eta * s)
}

/// Surviving fraction `N(η)/N₀` after a PA pulse of strength `η`.
pub fn remaining_fraction(eta: f64) -> Result<f64> {
    check_eta(eta)?;
    Ok(if eta == 0.0 {
        1.0
    } else if eta.is_infinite() {
        0.0
    } else if eta < SERIES_SWITCH_ETA {
        remaining_fraction_series(eta)
    } else {
        remaining_fraction_closed(eta)
    })
}

/// Surviving fraction by direct summation over `n_shells` radial shells of
/// the Thomas-Fermi profile, each decaying as `ρ/(1 + η ρ/ρ₀)`.
pub fn remaining_fraction_oracle(eta: f64, n_shells: usize) -> Result<f64> {
    check_eta(eta)?;
    if n_shells < 100 {
        return Err(Error::InvalidParameter(format!(
            "n_shells = {n_shells} must be >= 100"
        )));
    }
    let h = 1.0 / n_shells as f64;
    let (mut before, mut after) = (0.0, 0.0);
    for i in 0..n_shells {
        let x = (i as f64 + 0.5) * h;
        let u = 1.0 - x * x;
        let shell = x * x * u;
        before += shell;
        after += shell / (1.0 + eta * u);
    }
    Ok(after / before)
}

/// η such that `remaining_fraction(η) = fraction`. Fractions ≥ 1 map to 0.
pub fn invert_remaining_fraction(fraction: f64) -> Result<f64> {
    if !(fraction > 0.0) || fraction.is_nan() {
        return Err(Error::InvalidParameter(format!(
            "remaining fraction {fraction} must be > 0"
        )));
    }
    if fraction >= 1.0 {
        return Ok(0.0);
    }
    let (mut lo, mut hi) = (-30.0_f64, 30.0_f64); // ln η
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if remaining_fraction(mid.exp())? > fraction {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-14 {
            break;
        }
    }
    Ok((0.5 * (lo + hi)).exp())
}

/// `η = k_PA ρ₀ t_PA`
pub fn eta_from_rate(k_pa: f64, pulse: &PulseParams) -> f64 {
    k_pa * pulse.rho0 * pulse.t_pa
}

/// `k_PA = η / (ρ₀ t_PA)`, cm³/s.
pub fn rate_from_eta(eta: f64, pulse: &PulseParams) -> f64 {
    eta / (pulse.rho0 * pulse.t_pa)
}

pub fn lorentzian_eta(delta_nu: f64, line: &LorentzianLine) -> f64 {
    let hw = 0.5 * line.gamma;
    let d = delta_nu - line.nu0;
    line.eta_res * hw * hw / (d * d + hw * hw)
}

/// Peak density (cm⁻³) of a Thomas-Fermi condensate of `n_atoms` in a
/// harmonic trap of geometric-mean angular frequency `omega_bar` (rad/s).
pub fn thomas_fermi_peak_density(
    n_atoms: f64,
    omega_bar: f64,
    scattering_length: f64,
    mass: f64,
) -> Result<f64> {
    for (name, v) in [
        ("n_atoms", n_atoms),
        ("omega_bar", omega_bar),
        ("scattering_length", scattering_length),
        ("mass", mass),
    ] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::InvalidParameter(format!("{name} = {v} must be > 0")));
        }
    }
    let a_ho = (units::HBAR / (mass * omega_bar)).sqrt();
    let radius = a_ho * (15.0 * n_atoms * scattering_length / a_ho).powf(0.2);
    let rho = 15.0 * n_atoms / (8.0 * PI * radius.powi(3));
    Ok(units::per_m3_to_per_cm3(rho))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const ETAS: [f64; 6] = [0.01, 0.1, 1.0, 3.0, 10.0, 100.0];

    #[test]
    fn no_loss_without_pulse() {
        assert_eq!(remaining_fraction(0.0).unwrap(), 1.0);
        assert_eq!(remaining_fraction_oracle(0.0, 100).unwrap(), 1.0);
        assert_eq!(remaining_fraction_oracle(0.0, 12345).unwrap(), 1.0);
    }

    #[test]
    fn unit_eta_value() {
        // 7.5 * (1 + 1/3 - √2 · atanh(1/√2)), atanh(1/√2) = 0.8813736
        let by_hand = 7.5 * (4.0 / 3.0 - 2f64.sqrt() * 0.881_373_6);
        assert!((by_hand - 0.651625).abs() < 1e-5);
        assert!((remaining_fraction(1.0).unwrap() - 0.651625).abs() < 1e-5);
    }

    #[test]
    fn closed_form_matches_shell_oracle() {
        for eta in ETAS {
            let closed = remaining_fraction(eta).unwrap();
            let oracle = remaining_fraction_oracle(eta, 100_000).unwrap();
            assert!(((closed - oracle) / closed).abs() < 1e-6, "eta {eta}");
        }
    }

    #[test]
    fn large_eta_asymptote() {
        let rel = |eta: f64| (remaining_fraction(eta).unwrap() * eta / 2.5 - 1.0).abs();
        assert!(rel(1000.0) < 0.01);
        assert!(rel(1e4) < rel(1000.0) && rel(1e6) < 1e-4);
    }

    #[test]
    fn series_matches_closed_form_near_switch() {
        let eta = 1e-3;
        let d = (remaining_fraction_series(eta) - remaining_fraction_closed(eta)).abs();
        assert!(d < 1e-9, "{d:e}");
        // leading slope -4/7
        let small = 1e-6;
        let slope = (remaining_fraction(small).unwrap() - 1.0) / small;
        assert!((slope + 4.0 / 7.0).abs() < 1e-5);
    }

    #[test]
    fn rejects_negative_eta() {
        assert!(remaining_fraction(-0.1).is_err());
        assert!(remaining_fraction(f64::NAN).is_err());
        assert!(remaining_fraction_oracle(-1.0, 1000).is_err());
        assert!(remaining_fraction_oracle(1.0, 99).is_err());
    }

    #[test]
    fn inversion_round_trip() {
        for eta in [1e-5, 0.3, 1.0, 7.0, 250.0] {
            let f = remaining_fraction(eta).unwrap();
            let back = invert_remaining_fraction(f).unwrap();
            assert!(((back - eta) / eta).abs() < 1e-8, "{eta} -> {back}");
        }
        assert_eq!(invert_remaining_fraction(1.2).unwrap(), 0.0);
        assert!(invert_remaining_fraction(0.0).is_err());
    }

    #[test]
    fn eta_rate_conversion() {
        let pulse = PulseParams {
            t_pa: 5e-3,
            intensity: 6.0,
            rho0: 1e14,
            n0: 1e4,
        };
        assert_eq!(eta_from_rate(0.0, &pulse), 0.0);
        assert!((eta_from_rate(1e-12, &pulse) - 0.5).abs() < 1e-15);
        for k in [3.3e-13, 1e-12, 7.77e-11] {
            let back = rate_from_eta(eta_from_rate(k, &pulse), &pulse);
            assert!(((back - k) / k).abs() < 1e-14);
        }
    }

    #[test]
    fn lorentzian_shape() {
        let line = LorentzianLine {
            eta_res: 1.3,
            nu0: 12.0,
            gamma: 8.0,
        };
        assert_eq!(lorentzian_eta(12.0, &line), 1.3);
        assert!((lorentzian_eta(16.0, &line) - 0.65).abs() < 1e-15);
        assert!((lorentzian_eta(8.0, &line) - 0.65).abs() < 1e-15);
        assert!(lorentzian_eta(1e12, &line) < 1e-20);
        assert!(lorentzian_eta(-1e12, &line) < 1e-20);
        assert!(LorentzianLine { gamma: 0.0, ..line }.validate().is_err());
        assert!(LorentzianLine { eta_res: -1.0, ..line }.validate().is_err());
    }

    #[test]
    fn thomas_fermi_density() {
        let omega = 2.0 * PI * 90.0;
        let a_s = 100.4 * units::BOHR_RADIUS;
        let m = 87.0 * units::ATOMIC_MASS_UNIT;
        let rho = thomas_fermi_peak_density(1.5e4, omega, a_s, m).unwrap();
        // evaluated once from the formula with CODATA 2018 constants
        assert!(((rho - 9.383_605_055_871_77e13) / rho).abs() < 1e-9, "{rho:e}");

        let doubled = thomas_fermi_peak_density(3.0e4, omega, a_s, m).unwrap();
        assert!((doubled / rho - 2f64.powf(0.4)).abs() < 1e-12);
        assert!(thomas_fermi_peak_density(0.0, omega, a_s, m).is_err());
        assert!(thomas_fermi_peak_density(1e4, -1.0, a_s, m).is_err());
    }

    proptest! {
        #[test]
        fn strictly_decreasing(a in 0.0..200.0f64, b in 0.0..200.0f64) {
            prop_assume!((a - b).abs() > 1e-9 * a.max(b).max(1e-3));
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            prop_assert!(remaining_fraction(lo).unwrap() > remaining_fraction(hi).unwrap());
        }

        #[test]
        fn fraction_in_unit_interval(eta in 0.0..1e6f64) {
            let f = remaining_fraction(eta).unwrap();
            prop_assert!(f > 0.0 && f <= 1.0);
        }

        #[test]
        fn lorentzian_unimodal(d1 in -100.0..100.0f64, d2 in -100.0..100.0f64) {
            let line = LorentzianLine { eta_res: 2.0, nu0: 3.0, gamma: 10.0 };
            let (e1, e2) = (lorentzian_eta(d1, &line), lorentzian_eta(d2, &line));
            prop_assert!(e1 <= line.eta_res && e2 <= line.eta_res);
            if (d1 - 3.0).abs() < (d2 - 3.0).abs() {
                prop_assert!(e1 >= e2);
            }
        }
    }
}
