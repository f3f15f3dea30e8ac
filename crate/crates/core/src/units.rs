//! Physical constants and the experiment defaults.
//!
//! Every unit conversion used by the crate goes through this table.

use std::f64::consts::PI;

/// Reduced Planck constant, J·s (CODATA 2018).
pub const HBAR: f64 = 1.054_571_817e-34;
/// Bohr radius, m (CODATA 2018).
pub const BOHR_RADIUS: f64 = 5.291_772_109_03e-11;
/// Atomic mass unit, kg (CODATA 2018).
pub const ATOMIC_MASS_UNIT: f64 = 1.660_539_066_60e-27;
/// ⁸⁷Rb atomic mass in u.
pub const RB87_MASS_U: f64 = 86.909_180_527;

/// Quadratic Zeeman shift of the experiment, E_r.
pub const DEFAULT_EPSILON_Q: f64 = 0.65;
/// Recoil energy E_r/h of the 790 nm Raman beams, Hz.
pub const DEFAULT_RECOIL_ENERGY_HZ: f64 = 3680.0;
/// Geometric-mean trap frequency ω̄/2π, Hz.
pub const DEFAULT_TRAP_FREQUENCY_HZ: f64 = 90.0;
/// f=1 scattering length of ⁸⁷Rb in units of a₀ (literature value).
pub const DEFAULT_SCATTERING_LENGTH_A0: f64 = 100.4;

pub const CM3_PER_M3: f64 = 1e6;

pub fn khz_to_hz(khz: f64) -> f64 {
    khz * 1e3
}

pub fn ms_to_s(ms: f64) -> f64 {
    ms * 1e-3
}

pub fn hz_to_angular(hz: f64) -> f64 {
    2.0 * PI * hz
}

/// Energy in E_r to frequency in kHz for a given recoil frequency.
pub fn recoil_to_khz(energy_er: f64, recoil_energy_hz: f64) -> f64 {
    energy_er * recoil_energy_hz * 1e-3
}

pub fn per_m3_to_per_cm3(density: f64) -> f64 {
    density / CM3_PER_M3
}
