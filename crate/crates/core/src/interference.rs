//! Two-pathway interference in photoassociation of dressed atoms.
//!
//! The excited molecular level couples only to the two-atom spin state
//! `|F=0, m_F=0⟩ = (|+1,-1⟩ + |-1,+1⟩ - |0,0⟩)/√3`. A pair of atoms that are
//! both in the superposition `Σ C_m |m⟩` overlaps this state with amplitude
//! `(2 C₋₁ C₊₁ - C₀²)/√3`: the `(0,0)` and `(+1,-1)` pathways enter with
//! opposite Clebsch-Gordan signs. Rates are normalized to the bare `m_f = 0`
//! pair, whose amplitude is `-1/√3`.

use std::io::Write;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dressed_states::DressedState;
use crate::error::{Error, Result};

/// Single-atom spin amplitudes (C₋₁, C₀, C₊₁).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpinAmplitudes {
    pub coeffs: [Complex64; 3],
}

impl SpinAmplitudes {
    /// Unit-norm amplitudes; rejects a norm off by more than 1e-12.
    pub fn new(coeffs: [Complex64; 3]) -> Result<Self> {
        let norm: f64 = coeffs.iter().map(|c| c.norm_sqr()).sum();
        if !((norm - 1.0).abs() < 1e-12) {
            return Err(Error::InvalidParameter(format!(
                "spin amplitudes have squared norm {norm}, expected 1"
            )));
        }
        Ok(Self { coeffs })
    }

    pub fn from_real(coeffs: [f64; 3]) -> Result<Self> {
        Self::new(coeffs.map(|c| Complex64::new(c, 0.0)))
    }

    /// Rescales to unit norm.
    pub fn normalized(coeffs: [Complex64; 3]) -> Result<Self> {
        let norm: f64 = coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(Error::InvalidParameter("zero or non-finite amplitudes".into()));
        }
        Ok(Self {
            coeffs: coeffs.map(|c| c / norm),
        })
    }

    fn parts(&self) -> (Complex64, Complex64, Complex64) {
        (self.coeffs[0], self.coeffs[1], self.coeffs[2])
    }
}

impl From<&DressedState> for SpinAmplitudes {
    fn from(state: &DressedState) -> Self {
        Self {
            coeffs: state.coeffs.map(|c| Complex64::new(c, 0.0)),
        }
    }
}

/// Amplitude of the `|F=0, m_F=0⟩` component of the two-atom spin state.
pub fn singlet_amplitude(s: &SpinAmplitudes) -> Complex64 {
    let (cm, c0, cp) = s.parts();
    (2.0 * cm * cp - c0 * c0) / 3f64.sqrt()
}

/// `k_sup / k_{0,0} = |C₀²|² + 4|C₋₁C₊₁|² - 4 Re[C₀² C₋₁* C₊₁*]`
pub fn rate_ratio(s: &SpinAmplitudes) -> f64 {
    let (cm, c0, cp) = s.parts();
    let c0_sq = c0 * c0;
    let edge = cm * cp;
    c0_sq.norm_sqr() + 4.0 * edge.norm_sqr() - 4.0 * (c0_sq * edge.conj()).re
}

/// The rate ratio with the cross (interference) term dropped.
pub fn rate_ratio_no_interference(s: &SpinAmplitudes) -> f64 {
    let (cm, c0, cp) = s.parts();
    (c0 * c0).norm_sqr() + 4.0 * (cm * cp).norm_sqr()
}

/// Which form of the rate ratio to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variant {
    WithInterference,
    WithoutInterference,
}

impl Variant {
    pub fn evaluate(self, s: &SpinAmplitudes) -> f64 {
        match self {
            Variant::WithInterference => rate_ratio(s),
            Variant::WithoutInterference => rate_ratio_no_interference(s),
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Variant::WithInterference => "interference",
            Variant::WithoutInterference => "no_interference",
        }
    }
}

fn check_spin(mf: i32) -> Result<()> {
    if (-1..=1).contains(&mf) {
        Ok(())
    } else {
        Err(Error::InvalidSpin(mf))
    }
}

/// Squared `|F=0, m_F=0⟩` overlap of the symmetrized bare pair `(m_a, m_b)`.
pub fn bare_pair_singlet_weight(mf_a: i32, mf_b: i32) -> Result<f64> {
    check_spin(mf_a)?;
    check_spin(mf_b)?;
    Ok(match (mf_a, mf_b) {
        (0, 0) => 1.0 / 3.0,
        (1, -1) | (-1, 1) => 2.0 / 3.0,
        _ => 0.0,
    })
}

/// One row of a rate-ratio sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatioPoint {
    pub omega_r: f64,
    pub delta: f64,
    pub ratio: f64,
    pub ratio_no_interference: f64,
}

impl RatioPoint {
    pub fn from_state(omega_r: f64, delta: f64, state: &DressedState) -> Self {
        let s = SpinAmplitudes::from(state);
        Self {
            omega_r,
            delta,
            ratio: rate_ratio(&s),
            ratio_no_interference: rate_ratio_no_interference(&s),
        }
    }
}

pub const RATIO_SWEEP_HEADER: &str = "omega_r_Er,delta_Er,ratio,ratio_no_interference";

pub fn write_ratio_sweep<W: Write>(mut out: W, points: &[RatioPoint]) -> Result<()> {
    writeln!(out, "{RATIO_SWEEP_HEADER}")?;
    for p in points {
        writeln!(
            out,
            "{},{},{},{}",
            p.omega_r, p.delta, p.ratio, p.ratio_no_interference
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dressed_states::{find_band_minimum, RamanParams};
    use proptest::prelude::*;

    fn real(c: [f64; 3]) -> SpinAmplitudes {
        SpinAmplitudes::from_real(c).unwrap()
    }

    fn large_coupling() -> SpinAmplitudes {
        real([-0.5, 0.5f64.sqrt(), -0.5])
    }

    #[test]
    fn singlet_amplitude_examples() {
        let r3 = 3f64.sqrt();
        assert!((singlet_amplitude(&real([0.0, 1.0, 0.0])).re + 1.0 / r3).abs() < 1e-15);
        let h = 0.5f64.sqrt();
        assert!((singlet_amplitude(&real([h, 0.0, h])).re - 1.0 / r3).abs() < 1e-15);
        assert!(singlet_amplitude(&large_coupling()).norm() < 1e-15);
    }

    #[test]
    fn rate_ratio_examples() {
        assert_eq!(rate_ratio(&real([0.0, 1.0, 0.0])), 1.0);
        assert!(rate_ratio(&large_coupling()).abs() < 1e-15);
        assert_eq!(rate_ratio(&real([1.0, 0.0, 0.0])), 0.0);

        assert_eq!(rate_ratio_no_interference(&real([0.0, 1.0, 0.0])), 1.0);
        assert!((rate_ratio_no_interference(&large_coupling()) - 0.5).abs() < 1e-15);
        assert_eq!(rate_ratio_no_interference(&real([1.0, 0.0, 0.0])), 0.0);
    }

    #[test]
    fn omega_8_ratio_from_block_reduction() {
        // symmetric-sector 2×2 block at q = 0, δ = 0
        let (a, b, c) = (4.0_f64, -0.65_f64, 8.0 / 2f64.sqrt());
        let lam = 0.5 * (a + b) - (0.25 * (a - b) * (a - b) + c * c).sqrt();
        let n = (c * c + (a - lam) * (a - lam)).sqrt();
        let (edge, center) = (-c / n / 2f64.sqrt(), (a - lam) / n);
        let by_hand = (2.0 * edge * edge - center * center).powi(2);
        assert!((by_hand - 0.1445).abs() < 1e-4);

        let coeffs = real([edge, center, edge]);
        assert!((rate_ratio(&coeffs) - by_hand).abs() < 1e-14);
        assert!((edge - -0.3937).abs() < 1e-4 && (center - 0.8307).abs() < 1e-4);

        let state = find_band_minimum(&RamanParams::new(8.0, 0.0)).unwrap();
        assert!((rate_ratio(&SpinAmplitudes::from(&state)) - by_hand).abs() < 1e-12);
    }

    #[test]
    fn pair_weights() {
        assert!((bare_pair_singlet_weight(0, 0).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        // (|+1,-1⟩ + |-1,+1⟩)/√2 projected on |F=0,0⟩: (2/√3)/√2
        let by_hand = (2.0 / 3f64.sqrt() / 2f64.sqrt()).powi(2);
        assert!((bare_pair_singlet_weight(1, -1).unwrap() - by_hand).abs() < 1e-15);
        assert_eq!(
            bare_pair_singlet_weight(-1, 1).unwrap(),
            bare_pair_singlet_weight(1, -1).unwrap()
        );
        for (a, b) in [(1, 1), (-1, -1), (0, 1), (1, 0), (0, -1)] {
            assert_eq!(bare_pair_singlet_weight(a, b).unwrap(), 0.0);
        }
        assert!(matches!(bare_pair_singlet_weight(2, 0), Err(Error::InvalidSpin(2))));
    }

    #[test]
    fn rejects_unnormalized() {
        assert!(SpinAmplitudes::from_real([1.0, 1.0, 0.0]).is_err());
        let s = SpinAmplitudes::normalized([Complex64::new(1.0, 0.0); 3]).unwrap();
        // all C = 1/√3: (2/3 - 1/3)² = 1/9
        assert!((rate_ratio(&s) - 1.0 / 9.0).abs() < 1e-15);
    }

    #[test]
    fn composition_with_dressed_states() {
        let weak = find_band_minimum(&RamanParams::new(0.01, 0.0)).unwrap();
        assert!((rate_ratio(&SpinAmplitudes::from(&weak)) - 1.0).abs() < 0.01);
        for delta in [-2.5, 2.5] {
            let s = find_band_minimum(&RamanParams::new(5.4, delta)).unwrap();
            assert!(rate_ratio(&SpinAmplitudes::from(&s)) < 0.1);
        }
    }

    #[test]
    fn sweep_csv() {
        let s = find_band_minimum(&RamanParams::new(8.0, 0.0)).unwrap();
        let mut buf = Vec::new();
        write_ratio_sweep(&mut buf, &[RatioPoint::from_state(8.0, 0.0, &s)]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("omega_r_Er,delta_Er,ratio,ratio_no_interference\n8,0,0.1445"));
    }

    fn complex_unit() -> impl Strategy<Value = SpinAmplitudes> {
        prop::array::uniform6(-1.0..1.0f64)
            .prop_filter("nonzero", |v| v.iter().map(|x| x * x).sum::<f64>() > 1e-3)
            .prop_map(|v| {
                SpinAmplitudes::normalized([
                    Complex64::new(v[0], v[1]),
                    Complex64::new(v[2], v[3]),
                    Complex64::new(v[4], v[5]),
                ])
                .unwrap()
            })
    }

    proptest! {
        #[test]
        fn ratio_is_squared_singlet_amplitude(s in complex_unit()) {
            let amp = singlet_amplitude(&s) * 3f64.sqrt();
            prop_assert!((rate_ratio(&s) - amp.norm_sqr()).abs() < 1e-12);
        }

        #[test]
        fn ratio_bounds(s in complex_unit()) {
            let r = rate_ratio(&s);
            prop_assert!((-1e-15..=1.0 + 1e-12).contains(&r));
        }

        #[test]
        fn global_phase_invariance(s in complex_unit(), phase in 0.0..std::f64::consts::TAU) {
            let rot = Complex64::from_polar(1.0, phase);
            let t = SpinAmplitudes { coeffs: s.coeffs.map(|c| c * rot) };
            prop_assert!((rate_ratio(&s) - rate_ratio(&t)).abs() < 1e-12);
            prop_assert!((rate_ratio_no_interference(&s) - rate_ratio_no_interference(&t)).abs() < 1e-12);
        }

        #[test]
        fn interference_only_suppresses_dressed_states(omega in 0.0..20.0f64, delta in -3.0..3.0f64) {
            let state = find_band_minimum(&RamanParams::new(omega, delta)).unwrap();
            let s = SpinAmplitudes::from(&state);
            prop_assert!(state.coeffs[0] * state.coeffs[2] >= -1e-15);
            prop_assert!(rate_ratio_no_interference(&s) >= rate_ratio(&s) - 1e-15);
        }
    }
}
