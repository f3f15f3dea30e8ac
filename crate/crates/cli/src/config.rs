//! Run configuration: embedded defaults, an optional user file layered on
//! top, then `--set key=value` overrides.

use std::path::{Path, PathBuf};

use serde::Deserialize;
use toml::{Table, Value};

use dressed_pa::dressed_states::RamanParams;
use dressed_pa::pa_kinetics::{
    invert_remaining_fraction, thomas_fermi_peak_density, LorentzianLine, MixtureModel,
    MixtureState, PulseParams,
};
use dressed_pa::spectra::FitOptions;
use dressed_pa::uncertainty::UncertaintySpec;
use dressed_pa::units;

use crate::error::CliError;
use crate::output::Format;

pub const DEFAULT_CONFIG: &str = include_str!("../config/default.toml");

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Experiment {
    pub epsilon_q: f64,
    pub recoil_energy_khz: f64,
    pub trap_frequency_hz: f64,
    pub scattering_length_a0: f64,
    pub atom_mass_u: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Dressing {
    pub omega_r: f64,
    pub delta: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Pulse {
    pub t_pa_ms: f64,
    pub intensity_w_cm2: f64,
    pub n0: f64,
    pub rho0_cm3: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Line {
    pub bare_loss: f64,
    pub nu0_khz: f64,
    pub gamma_khz: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Uncertainty {
    pub omega_rel_sigma: f64,
    pub delta_sigma: f64,
    pub epsilon_q_sigma: f64,
    pub n_samples: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    Omega,
    Delta,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    pub axis: Axis,
    pub min: f64,
    pub max: f64,
    pub points: usize,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Bands {
    pub q_min: f64,
    pub q_max: f64,
    pub points: usize,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumGrid {
    pub detuning_min_khz: f64,
    pub detuning_max_khz: f64,
    pub points: usize,
    pub noise_rel: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Fit {
    pub restarts: usize,
    pub max_iterations: usize,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Mixture {
    pub counts: [f64; 3],
    pub channel_ratio: f64,
    pub target_m0_loss: f64,
    pub steps: usize,
    pub shells: usize,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Output {
    pub dir: PathBuf,
    pub formats: Vec<Format>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub experiment: Experiment,
    pub dressing: Dressing,
    pub pulse: Pulse,
    pub line: Line,
    pub uncertainty: Uncertainty,
    pub sweep: Sweep,
    pub bands: Bands,
    pub spectrum: SpectrumGrid,
    pub fit: Fit,
    pub mixture: Mixture,
    pub output: Output,
}

fn merge(base: &mut Table, top: Table) {
    for (key, value) in top {
        match (base.get_mut(&key), value) {
            (Some(Value::Table(b)), Value::Table(t)) => merge(b, t),
            (_, v) => {
                base.insert(key, v);
            }
        }
    }
}

/// A TOML literal if it parses as one, a bare string otherwise.
fn parse_value(raw: &str) -> Value {
    format!("v = {raw}")
        .parse::<Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(raw.to_string()))
}

fn apply_override(table: &mut Table, assignment: &str) -> Result<(), CliError> {
    let (path, raw) = assignment
        .split_once('=')
        .ok_or_else(|| CliError::Usage(format!("--set expects key=value, got `{assignment}`")))?;
    let keys: Vec<&str> = path.trim().split('.').collect();
    let (last, parents) = keys.split_last().expect("split yields at least one item");
    let mut node = table;
    for key in parents {
        node = match node
            .entry(key.to_string())
            .or_insert_with(|| Value::Table(Table::new()))
        {
            Value::Table(t) => t,
            _ => return Err(CliError::Usage(format!("`{key}` in `{path}` is not a section"))),
        };
    }
    node.insert(last.to_string(), parse_value(raw.trim()));
    Ok(())
}

impl RunConfig {
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self, CliError> {
        let mut table: Table = DEFAULT_CONFIG.parse().expect("embedded default config parses");
        if let Some(path) = path {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
            let user: Table = text
                .parse()
                .map_err(|e| CliError::Usage(format!("config {}: {e}", path.display())))?;
            merge(&mut table, user);
        }
        for assignment in overrides {
            apply_override(&mut table, assignment)?;
        }
        let config: RunConfig = Value::Table(table)
            .try_into()
            .map_err(|e| CliError::Usage(format!("invalid configuration: {e}")))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let e = &self.experiment;
        let positive = [
            ("experiment.recoil_energy_khz", e.recoil_energy_khz),
            ("experiment.trap_frequency_hz", e.trap_frequency_hz),
            ("experiment.scattering_length_a0", e.scattering_length_a0),
            ("experiment.atom_mass_u", e.atom_mass_u),
            ("pulse.t_pa_ms", self.pulse.t_pa_ms),
            ("pulse.n0", self.pulse.n0),
            ("line.gamma_khz", self.line.gamma_khz),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(CliError::Usage(format!("{name} = {v} must be > 0")));
            }
        }
        if !(e.epsilon_q >= 0.0) {
            return Err(CliError::Usage(format!("experiment.epsilon_q = {} must be >= 0", e.epsilon_q)));
        }
        if !(self.pulse.rho0_cm3 >= 0.0) {
            return Err(CliError::Usage("pulse.rho0_cm3 must be >= 0".into()));
        }
        if !(self.line.bare_loss >= 0.0 && self.line.bare_loss < 1.0) {
            return Err(CliError::Usage(format!(
                "line.bare_loss = {} must lie in [0, 1)",
                self.line.bare_loss
            )));
        }
        if self.mixture.steps < 100 {
            return Err(CliError::Usage("mixture.steps must be >= 100".into()));
        }
        if self.output.formats.is_empty() {
            return Err(CliError::Usage("output.formats is empty".into()));
        }
        Ok(())
    }

    pub fn raman(&self) -> RamanParams {
        RamanParams {
            omega_r: self.dressing.omega_r,
            delta: self.dressing.delta,
            epsilon_q: self.experiment.epsilon_q,
            recoil_energy_hz: units::khz_to_hz(self.experiment.recoil_energy_khz),
        }
    }

    pub fn uncertainty(&self) -> UncertaintySpec {
        let u = &self.uncertainty;
        UncertaintySpec {
            omega_rel_sigma: u.omega_rel_sigma,
            delta_sigma: u.delta_sigma,
            epsilon_q_sigma: u.epsilon_q_sigma,
            n_samples: u.n_samples,
            seed: u.seed,
            mirror_delta: false,
        }
    }

    /// Pulse for `n0` atoms; ρ₀ from the Thomas-Fermi profile unless set.
    pub fn pulse_for(&self, n0: f64) -> Result<PulseParams, CliError> {
        let rho0 = if self.pulse.rho0_cm3 > 0.0 {
            self.pulse.rho0_cm3
        } else {
            let e = &self.experiment;
            thomas_fermi_peak_density(
                n0,
                units::hz_to_angular(e.trap_frequency_hz),
                e.scattering_length_a0 * units::BOHR_RADIUS,
                e.atom_mass_u * units::ATOMIC_MASS_UNIT,
            )?
        };
        Ok(PulseParams {
            t_pa: units::ms_to_s(self.pulse.t_pa_ms),
            intensity: self.pulse.intensity_w_cm2,
            rho0,
            n0,
        })
    }

    pub fn pulse(&self) -> Result<PulseParams, CliError> {
        self.pulse_for(self.pulse.n0)
    }

    /// Bare m_f=0 line, η on resonance fixed by `line.bare_loss`.
    pub fn bare_line(&self) -> Result<LorentzianLine, CliError> {
        Ok(LorentzianLine {
            eta_res: invert_remaining_fraction(1.0 - self.line.bare_loss)?,
            nu0: self.line.nu0_khz,
            gamma: self.line.gamma_khz,
        })
    }

    pub fn detunings(&self) -> Result<Vec<f64>, CliError> {
        let s = &self.spectrum;
        linspace(s.detuning_min_khz, s.detuning_max_khz, s.points)
    }

    pub fn mixture_state(&self) -> MixtureState {
        MixtureState {
            counts: self.mixture.counts,
        }
    }

    pub fn mixture_model(&self, k00: f64) -> MixtureModel {
        MixtureModel {
            k00,
            channel_ratio: self.mixture.channel_ratio,
            n_shells: self.mixture.shells,
        }
    }

    pub fn fit_options(&self) -> FitOptions {
        let mut opts = FitOptions {
            restarts: self.fit.restarts,
            seed: self.spectrum.seed,
            ..FitOptions::default()
        };
        opts.simplex.max_iterations = self.fit.max_iterations;
        opts
    }

    pub fn formats(&self) -> &[Format] {
        &self.output.formats
    }
}

pub fn linspace(min: f64, max: f64, points: usize) -> Result<Vec<f64>, CliError> {
    if points == 0 || !(min.is_finite() && max.is_finite()) || (points > 1 && !(max > min)) {
        return Err(CliError::Usage(format!(
            "empty or invalid range [{min}, {max}] with {points} points"
        )));
    }
    if points == 1 {
        return Ok(vec![min]);
    }
    let step = (max - min) / (points - 1) as f64;
    Ok((0..points)
        .map(|i| if i == points - 1 { max } else { min + step * i as f64 })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_parse() {
        let c = RunConfig::load(None, &[]).unwrap();
        assert_eq!(c.experiment.epsilon_q, 0.65);
        assert_eq!(c.raman().recoil_energy_hz, 3680.0);
        assert_eq!(c.mixture.counts, [1200.0, 7000.0, 1100.0]);
        assert_eq!(c.sweep.axis, Axis::Omega);
        let eta = c.bare_line().unwrap().eta_res;
        assert!((eta - 1.261_675_280_775_84).abs() < 1e-8);
    }

    #[test]
    fn overrides_apply() {
        let c = RunConfig::load(
            None,
            &[
                "dressing.omega_r=5.4".into(),
                "sweep.axis=delta".into(),
                "output.formats=[\"csv\"]".into(),
            ],
        )
        .unwrap();
        assert_eq!(c.dressing.omega_r, 5.4);
        assert_eq!(c.sweep.axis, Axis::Delta);
        assert_eq!(c.formats(), &[Format::Csv]);
    }

    #[test]
    fn unknown_keys_are_usage_errors() {
        assert!(matches!(RunConfig::load(None, &["dressing.omega=1".into()]), Err(CliError::Usage(_))));
        assert!(matches!(RunConfig::load(None, &["novalue".into()]), Err(CliError::Usage(_))));
        assert!(matches!(RunConfig::load(None, &["pulse.t_pa_ms=-1".into()]), Err(CliError::Usage(_))));
    }

    #[test]
    fn partial_user_file_layers_on_defaults() {
        let dir = std::env::temp_dir().join(format!("dressed-pa-config-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("c.toml");
        std::fs::write(&path, "pulse.t_pa_ms = 5.5\n[dressing]\nomega_r = 5.4\n").unwrap();
        let c = RunConfig::load(Some(&path), &["dressing.delta=-2".into()]).unwrap();
        std::fs::remove_dir_all(&dir).unwrap();
        assert_eq!(c.pulse.t_pa_ms, 5.5);
        assert_eq!(c.dressing.omega_r, 5.4);
        assert_eq!(c.dressing.delta, -2.0);
        assert_eq!(c.pulse.n0, 1.1e4);
    }

    #[test]
    fn linspace_endpoints() {
        assert_eq!(linspace(-1.0, 1.0, 3).unwrap(), vec![-1.0, 0.0, 1.0]);
        assert_eq!(linspace(2.0, 2.0, 1).unwrap(), vec![2.0]);
        assert!(linspace(1.0, 0.0, 5).is_err());
        assert!(linspace(0.0, 1.0, 0).is_err());
    }
}
