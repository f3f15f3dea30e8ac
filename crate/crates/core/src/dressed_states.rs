//! Raman-dressed spin-1 bands.
//!
//! Counter-propagating Raman beams couple `|m_f=-1, q+2⟩ ↔ |0, q⟩ ↔ |+1, q-2⟩`
//! (momenta in `k_r`). The 3×3 Hamiltonian in that basis, in units of `E_r`:
//!
//! ```text
//! ⎡ (q+2)² - δ    Ω_R/2        0         ⎤
//! ⎢ Ω_R/2         q² - ε_q     Ω_R/2     ⎥
//! ⎣ 0             Ω_R/2        (q-2)² + δ⎦
//! ```
//!
//! The condensate is loaded adiabatically into the global minimum of the
//! lowest band; its spin composition there is what photoassociation sees.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix3};
use crate::units;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RamanParams {
    /// Raman coupling Ω_R, E_r.
    pub omega_r: f64,
    /// Raman detuning δ, E_r.
    pub delta: f64,
    /// Quadratic Zeeman shift ε_q, E_r.
    pub epsilon_q: f64,
    /// E_r/h, Hz.
    pub recoil_energy_hz: f64,
}

impl Default for RamanParams {
    fn default() -> Self {
        Self {
            omega_r: 0.0,
            delta: 0.0,
            epsilon_q: units::DEFAULT_EPSILON_Q,
            recoil_energy_hz: units::DEFAULT_RECOIL_ENERGY_HZ,
        }
    }
}

impl RamanParams {
    /// Dressing at the default ε_q and E_r.
    pub fn new(omega_r: f64, delta: f64) -> Self {
        Self {
            omega_r,
            delta,
            ..Self::default()
        }
    }

    pub fn with_delta(self, delta: f64) -> Self {
        Self { delta, ..self }
    }

    pub fn with_omega(self, omega_r: f64) -> Self {
        Self { omega_r, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.omega_r, self.delta, self.epsilon_q, self.recoil_energy_hz]
            .iter()
            .all(|x| x.is_finite());
        if !finite {
            return Err(Error::InvalidParameter("non-finite Raman parameter".into()));
        }
        if self.omega_r < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "omega_r = {} must be >= 0",
                self.omega_r
            )));
        }
        if self.epsilon_q < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "epsilon_q = {} must be >= 0",
                self.epsilon_q
            )));
        }
        if self.recoil_energy_hz <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "recoil_energy_hz = {} must be > 0",
                self.recoil_energy_hz
            )));
        }
        Ok(())
    }
}

/// Ground dressed state at quasimomentum `q`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DressedState {
    /// Quasimomentum, k_r.
    pub q: f64,
    /// Lowest-band energy, E_r.
    pub energy: f64,
    /// (C₋₁, C₀, C₊₁), with C₀ ≥ 0 (C₊₁ ≥ 0 when C₀ = 0).
    pub coeffs: [f64; 3],
}

impl DressedState {
    pub fn weights(&self) -> [f64; 3] {
        self.coeffs.map(|c| c * c)
    }
}

pub fn build_hamiltonian(q: f64, params: &RamanParams) -> Matrix3 {
    let c = 0.5 * params.omega_r;
    [
        [(q + 2.0).powi(2) - params.delta, c, 0.0],
        [c, q * q - params.epsilon_q, c],
        [0.0, c, (q - 2.0).powi(2) + params.delta],
    ]
}

fn fix_phase(mut v: [f64; 3]) -> [f64; 3] {
    let flip = if v[1].abs() > 1e-14 { v[1] < 0.0 } else { v[2] < 0.0 };
    if flip {
        v.iter_mut().for_each(|x| *x = -*x);
    }
    v
}

/// Lowest eigenpair at `q` with the dressed-state phase convention.
pub fn ground_state_at(q: f64, params: &RamanParams) -> DressedState {
    let h = build_hamiltonian(q, params);
    // build_hamiltonian is symmetric by construction
    let pairs = linalg::eigensystem(&h).expect("symmetric Hamiltonian");
    DressedState {
        q,
        energy: pairs[0].value,
        coeffs: fix_phase(pairs[0].vector),
    }
}

fn lowest_energy(q: f64, params: &RamanParams) -> f64 {
    linalg::lowest_eigenvalue(&build_hamiltonian(q, params))
}

/// dE/dq of the lowest band by Hellmann-Feynman: ⟨v| ∂H/∂q |v⟩.
fn band_slope(state: &DressedState) -> f64 {
    let [cm, c0, cp] = state.coeffs;
    let q = state.q;
    2.0 * (q + 2.0) * cm * cm + 2.0 * q * c0 * c0 + 2.0 * (q - 2.0) * cp * cp
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandCurve {
    /// Ascending quasimomenta, k_r.
    pub q_grid: Vec<f64>,
    /// Three eigenvalues per q, ascending, E_r.
    pub energies: Vec<[f64; 3]>,
    /// Per q, per band: (|C₋₁|², |C₀|², |C₊₁|²).
    pub spin_weights: Vec<[[f64; 3]; 3]>,
}

impl BandCurve {
    pub const CSV_HEADER: &'static str = "q_kr,E1_Er,E2_Er,E3_Er,\
        w1_m-1,w1_m0,w1_m+1,w2_m-1,w2_m0,w2_m+1,w3_m-1,w3_m0,w3_m+1";

    pub fn lowest_band(&self) -> Vec<f64> {
        self.energies.iter().map(|e| e[0]).collect()
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "{}", Self::CSV_HEADER)?;
        for ((q, e), w) in self.q_grid.iter().zip(&self.energies).zip(&self.spin_weights) {
            write!(out, "{},{},{},{}", q, e[0], e[1], e[2])?;
            for band in w {
                write!(out, ",{},{},{}", band[0], band[1], band[2])?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

pub fn band_curve(params: &RamanParams, q_min: f64, q_max: f64, n_points: usize) -> Result<BandCurve> {
    params.validate()?;
    if !(q_min.is_finite() && q_max.is_finite() && q_min < q_max) {
        return Err(Error::InvalidGrid(format!(
            "need finite q_min < q_max, got [{q_min}, {q_max}]"
        )));
    }
    if n_points < 2 {
        return Err(Error::InvalidGrid(format!("n_points = {n_points} < 2")));
    }
    let step = (q_max - q_min) / (n_points - 1) as f64;
    let mut curve = BandCurve {
        q_grid: Vec::with_capacity(n_points),
        energies: Vec::with_capacity(n_points),
        spin_weights: Vec::with_capacity(n_points),
    };
    for i in 0..n_points {
        let q = if i == n_points - 1 {
            q_max
        } else {
            q_min + i as f64 * step
        };
        let pairs = linalg::eigensystem(&build_hamiltonian(q, params))?;
        curve.q_grid.push(q);
        curve.energies.push(pairs.map(|p| p.value));
        curve.spin_weights.push(pairs.map(|p| p.vector.map(|c| c * c)));
    }
    Ok(curve)
}

/// Grid used to locate the global minimum of the lowest band.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MinimumSearch {
    /// The scan covers `[-half_width, half_width]`, k_r.
    pub half_width: f64,
    /// Fine grid spacing, k_r.
    pub step: f64,
    /// Refinement stops once `|dE/dq|` falls below this, E_r/k_r.
    pub slope_tolerance: f64,
}

impl Default for MinimumSearch {
    fn default() -> Self {
        Self {
            half_width: 3.0,
            step: 1e-3,
            slope_tolerance: 1e-8,
        }
    }
}

/// Fine-grid points per coarse cell in [`MinimumSearch::scan`].
const CELL: usize = 10;

impl MinimumSearch {
    fn n_half(&self) -> usize {
        (self.half_width / self.step).round() as usize
    }

    /// Grid point `i` of `0..=2·n_half`, symmetric about q = 0 by construction.
    fn grid_q(&self, i: usize) -> f64 {
        (i as f64 - self.n_half() as f64) * self.step
    }

    /// Index of the fine-grid point with the lowest band energy.
    ///
    /// Every fine point is either evaluated or excluded by the Lipschitz
    /// bound `|dE/dq| ≤ max_j 2|q - q_j|`, `q_j ∈ {-2, 0, 2}`, so the result
    /// is the same as an exhaustive scan. Near-ties (1e-12) resolve to the
    /// smallest `|q|`, then to `q ≥ 0`.
    pub fn scan(&self, params: &RamanParams) -> (usize, f64) {
        let n = 2 * self.n_half();
        let n_cells = n.div_ceil(CELL);
        let cell_end = |c: usize| ((c + 1) * CELL).min(n);
        let ends: Vec<f64> = (0..=n_cells)
            .map(|c| if c == 0 { 0 } else { cell_end(c - 1) })
            .map(|i| lowest_energy(self.grid_q(i), params))
            .collect();

        let mut best: Option<(usize, f64)> = None;
        let consider = |i: usize, e: f64, best: &mut Option<(usize, f64)>| {
            let better = match *best {
                None => true,
                Some((bi, be)) => {
                    let tol = 1e-12 * be.abs().max(1.0);
                    if e < be - tol {
                        true
                    } else if e <= be + tol {
                        let (q, bq) = (self.grid_q(i), self.grid_q(bi));
                        q.abs() < bq.abs() - 1e-15 || (q.abs() <= bq.abs() + 1e-15 && q > bq)
                    } else {
                        false
                    }
                }
            };
            if better {
                *best = Some((i, e));
            }
        };
        for (c, &e) in ends.iter().enumerate() {
            let i = if c == 0 { 0 } else { cell_end(c - 1) };
            consider(i, e, &mut best);
        }

        let mut cells: Vec<(usize, f64)> = (0..n_cells)
            .map(|c| {
                let (a, b) = (self.grid_q(c * CELL), self.grid_q(cell_end(c)));
                let lipschitz = 2.0
                    * [a + 2.0, b + 2.0, a, b, a - 2.0, b - 2.0]
                        .iter()
                        .fold(0.0_f64, |m, x| m.max(x.abs()));
                let bound = 0.5 * (ends[c] + ends[c + 1]) - 0.5 * lipschitz * (b - a);
                (c, bound)
            })
            .collect();
        cells.sort_by(|x, y| x.1.total_cmp(&y.1));

        for (c, bound) in cells {
            let (_, be) = best.expect("grid has at least one point");
            if bound > be + 1e-9 * be.abs().max(1.0) {
                break;
            }
            for i in c * CELL + 1..cell_end(c) {
                consider(i, lowest_energy(self.grid_q(i), params), &mut best);
            }
        }
        best.expect("grid has at least one point")
    }

    pub fn find(&self, params: &RamanParams) -> Result<DressedState> {
        params.validate()?;
        let (i, _) = self.scan(params);
        let q_grid = self.grid_q(i);
        let at_grid = ground_state_at(q_grid, params);
        if band_slope(&at_grid).abs() < self.slope_tolerance {
            return Ok(at_grid);
        }
        let lo = (q_grid - self.step).max(-self.half_width);
        let hi = (q_grid + self.step).min(self.half_width);
        Ok(self.refine(params, lo, hi).unwrap_or(at_grid))
    }

    /// Root of dE/dq inside `[lo, hi]` by Illinois regula falsi, or golden
    /// section on E when the slope does not change sign.
    fn refine(&self, params: &RamanParams, mut lo: f64, mut hi: f64) -> Option<DressedState> {
        let mut s_lo = ground_state_at(lo, params);
        let mut s_hi = ground_state_at(hi, params);
        let (mut g_lo, mut g_hi) = (band_slope(&s_lo), band_slope(&s_hi));
        if !(g_lo <= 0.0 && g_hi >= 0.0) {
            return self.golden(params, lo, hi);
        }
        let mut side = 0i8;
        for _ in 0..200 {
            if g_lo.abs() < self.slope_tolerance {
                return Some(s_lo);
            }
            if g_hi.abs() < self.slope_tolerance {
                return Some(s_hi);
            }
            let q = (lo * g_hi - hi * g_lo) / (g_hi - g_lo);
            let q = if q > lo && q < hi { q } else { 0.5 * (lo + hi) };
            let s = ground_state_at(q, params);
            let g = band_slope(&s);
            if g.abs() < self.slope_tolerance || hi - lo < 1e-15 {
                return Some(s);
            }
            if g < 0.0 {
                lo = q;
                s_lo = s;
                g_lo = g;
                if side == -1 {
                    g_hi *= 0.5;
                }
                side = -1;
            } else {
                hi = q;
                s_hi = s;
                g_hi = g;
                if side == 1 {
                    g_lo *= 0.5;
                }
                side = 1;
            }
        }
        Some(if g_lo.abs() < g_hi.abs() { s_lo } else { s_hi })
    }

    fn golden(&self, params: &RamanParams, mut a: f64, mut b: f64) -> Option<DressedState> {
        let r = 0.5 * (5f64.sqrt() - 1.0);
        let mut x1 = b - r * (b - a);
        let mut x2 = a + r * (b - a);
        let (mut f1, mut f2) = (lowest_energy(x1, params), lowest_energy(x2, params));
        while b - a > 1e-12 {
            if f1 <= f2 {
                b = x2;
                x2 = x1;
                f2 = f1;
                x1 = b - r * (b - a);
                f1 = lowest_energy(x1, params);
            } else {
                a = x1;
                x1 = x2;
                f1 = f2;
                x2 = a + r * (b - a);
                f2 = lowest_energy(x2, params);
            }
        }
        Some(ground_state_at(0.5 * (a + b), params))
    }
}

/// Global minimum of the lowest dressed band over `q ∈ [-3, 3] k_r`.
pub fn find_band_minimum(params: &RamanParams) -> Result<DressedState> {
    MinimumSearch::default().find(params)
}

/// Band-minimum states for each detuning in `deltas`, other parameters fixed.
pub fn coefficients_vs_delta(params: &RamanParams, deltas: &[f64]) -> Result<Vec<DressedState>> {
    if deltas.is_empty() {
        return Err(Error::InvalidParameter("empty detuning list".into()));
    }
    deltas
        .iter()
        .map(|&d| find_band_minimum(&params.with_delta(d)))
        .collect()
}
