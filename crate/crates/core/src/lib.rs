//! Photoassociation of Raman-dressed spin-1 Bose-Einstein condensates.
//!
//! The crate is organised along the analysis pipeline:
//!
//! - [`dressed_states`]: the 3×3 Raman Hamiltonian, dressed bands and the
//!   ground-state superposition at the band minimum.
//! - [`interference`]: projection of a two-atom spin state onto the
//!   `|F=0, m_F=0⟩` channel and the resulting PA rate ratio.
//! - [`pa_kinetics`]: two-body loss integrated over a Thomas-Fermi profile,
//!   the Lorentzian line and multi-component mixture kinetics.
//! - [`spectra`]: synthetic PA spectra and the simplex spectrum fitter.
//! - [`uncertainty`]: Monte Carlo bands for the rate ratio.
//!
//! Energies are in recoil units `E_r`, quasimomenta in `k_r`, PA detunings in
//! kHz, densities in cm⁻³, rate constants in cm³/s and times in seconds.

// `!(x > 0.0)` deliberately rejects NaN; small fixed-size matrices read best indexed.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod dressed_states;
pub mod error;
pub mod interference;
pub mod linalg;
pub mod pa_kinetics;
pub mod spectra;
pub mod uncertainty;
pub mod units;

pub use error::{Error, Result};
