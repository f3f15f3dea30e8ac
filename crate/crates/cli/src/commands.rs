use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use log::warn;
use serde::Serialize;

use dressed_pa::dressed_states::{band_curve, find_band_minimum, BandCurve, DressedState, RamanParams};
use dressed_pa::interference::{write_ratio_sweep, RatioPoint, SpinAmplitudes, Variant};
use dressed_pa::pa_kinetics::{
    calibrate_k00, eta_from_rate, lorentzian_eta, rate_from_eta, remaining_fraction,
    simulate_mixture_with, LorentzianLine, MixtureRun, PulseParams,
};
use dressed_pa::spectra::{
    fit_channel, loss_report, normalize_per_channel, normalize_spectrum, read_spectrum_csv,
    synthesize_dressed_spectrum, synthesize_mixture_spectrum, write_spectrum_csv, Channel,
    FitResult, LossReport, Spectrum, FIT_PARAMETERS,
};
use dressed_pa::uncertainty::{ratio_bands_vs_delta, ratio_bands_vs_omega, write_bands_csv, RatioBand, UncertaintySpec};

use crate::config::{linspace, Axis, RunConfig};
use crate::error::CliError;
use crate::output::{Format, Sink};
use crate::plot::{self, Layer, Plot};

type Result<T> = std::result::Result<T, CliError>;

fn csv_bytes<F>(write: F) -> Result<Vec<u8>>
where
    F: FnOnce(&mut Vec<u8>) -> dressed_pa::Result<()>,
{
    let mut buf = Vec::new();
    write(&mut buf)?;
    Ok(buf)
}

fn svg_bytes(plot: Plot) -> Result<Vec<u8>> {
    Ok(plot.render().into_bytes())
}

fn fmt_coeffs(c: [f64; 3]) -> String {
    format!("({:.6}, {:.6}, {:.6})", c[0], c[1], c[2])
}

fn variant(no_interference: bool) -> Variant {
    if no_interference {
        Variant::WithoutInterference
    } else {
        Variant::WithInterference
    }
}

// ---------------------------------------------------------------- bands

#[derive(Serialize)]
struct BandsReport<'a> {
    params: RamanParams,
    minimum: DressedState,
    minimum_weights: [f64; 3],
    curve: &'a BandCurve,
}

pub fn bands(cfg: &RunConfig, sink: &mut Sink, q_min: f64, q_max: f64, points: usize) -> Result<()> {
    let params = cfg.raman();
    let curve = band_curve(&params, q_min, q_max, points)?;
    let minimum = find_band_minimum(&params)?;

    sink.emit(Format::Csv, "bands.csv", || csv_bytes(|b| curve.write_csv(b)))?;
    sink.json(
        "bands.json",
        &BandsReport {
            params,
            minimum,
            minimum_weights: minimum.weights(),
            curve: &curve,
        },
    )?;
    sink.emit(Format::Svg, "bands.svg", || {
        let mut p = Plot::new(
            &format!("Dressed bands, Ω_R = {} E_r, δ = {} E_r", params.omega_r, params.delta),
            "q (k_r)",
            "E (E_r)",
        )
        .x_range(q_min, q_max);
        let styles = [(plot::BLACK, false), (plot::GREY, false), (plot::GREY, true)];
        for (band, (color, dashed)) in styles.into_iter().enumerate() {
            p = p.layer(Layer::Line {
                label: format!("band {}", band + 1),
                color,
                points: curve.q_grid.iter().zip(&curve.energies).map(|(q, e)| (*q, e[band])).collect(),
                dashed,
            });
        }
        svg_bytes(p.layer(Layer::Markers {
            label: "minimum".into(),
            color: plot::ORANGE,
            points: vec![(minimum.q, minimum.energy)],
            radius: 5.0,
        }))
    })?;

    println!(
        "band minimum: q = {:.6} k_r, E = {:.6} E_r, C = {}, |C|^2 = {}",
        minimum.q,
        minimum.energy,
        fmt_coeffs(minimum.coeffs),
        fmt_coeffs(minimum.weights())
    );
    Ok(())
}

// ---------------------------------------------------------------- coeffs

pub const COEFFS_CSV_HEADER: &str = "omega_r_Er,delta_Er,q_kr,energy_Er,c_m-1,c_m0,c_m+1";

#[derive(Serialize)]
struct CoeffRow {
    omega_r: f64,
    delta: f64,
    state: DressedState,
    weights: [f64; 3],
    ratio: f64,
    ratio_no_interference: f64,
}

pub fn coeffs(cfg: &RunConfig, sink: &mut Sink, deltas: &[f64]) -> Result<()> {
    let params = cfg.raman();
    let rows = deltas
        .iter()
        .map(|&delta| {
            let state = find_band_minimum(&params.with_delta(delta))?;
            let r = RatioPoint::from_state(params.omega_r, delta, &state);
            Ok(CoeffRow {
                omega_r: params.omega_r,
                delta,
                state,
                weights: state.weights(),
                ratio: r.ratio,
                ratio_no_interference: r.ratio_no_interference,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    sink.emit(Format::Csv, "coeffs.csv", || {
        let mut text = format!("{COEFFS_CSV_HEADER}\n");
        for r in &rows {
            let c = r.state.coeffs;
            text.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                r.omega_r, r.delta, r.state.q, r.state.energy, c[0], c[1], c[2]
            ));
        }
        Ok(text.into_bytes())
    })?;
    sink.json("coeffs.json", &rows)?;
    if rows.len() > 1 {
        sink.emit(Format::Svg, "coeffs.svg", || {
            let mut p = Plot::new(
                &format!("Spin weights at the band minimum, Ω_R = {} E_r", params.omega_r),
                "δ (E_r)",
                "|C_m|²",
            )
            .y_range(0.0, 1.05);
            for (m, label) in ["m_f = -1", "m_f = 0", "m_f = +1"].iter().enumerate() {
                p = p.layer(Layer::Line {
                    label: label.to_string(),
                    color: plot::SPIN_COLORS[m],
                    points: rows.iter().map(|r| (r.delta, r.weights[m])).collect(),
                    dashed: false,
                });
            }
            svg_bytes(p)
        })?;
    }

    for r in &rows {
        println!(
            "Ω_R = {} E_r, δ = {} E_r: q* = {:.6} k_r, C = {}, k_sup/k00 = {:.6} ({:.6} without interference)",
            r.omega_r,
            r.delta,
            r.state.q,
            fmt_coeffs(r.state.coeffs),
            r.ratio,
            r.ratio_no_interference
        );
    }
    Ok(())
}

// ---------------------------------------------------------------- ratio-sweep

#[derive(Serialize)]
struct SweepReport<'a> {
    axis: &'static str,
    fixed: RamanParams,
    uncertainty: UncertaintySpec,
    nominal: &'a [RatioPoint],
    bands: &'a [RatioBand],
}

pub fn ratio_sweep(cfg: &RunConfig, sink: &mut Sink, no_interference: bool) -> Result<()> {
    let s = &cfg.sweep;
    let values = linspace(s.min, s.max, s.points)?;
    let nominal = cfg.raman();
    let spec = cfg.uncertainty();
    let at = |x: f64| match s.axis {
        Axis::Omega => nominal.with_omega(x),
        Axis::Delta => nominal.with_delta(x),
    };
    let (with, without) = match s.axis {
        Axis::Omega => ratio_bands_vs_omega(&values, &nominal, &spec)?,
        Axis::Delta => ratio_bands_vs_delta(&values, &nominal, &spec)?,
    };
    let bands: Vec<RatioBand> = if no_interference { vec![without] } else { vec![with, without] };
    let curve = values
        .iter()
        .map(|&x| {
            let p = at(x);
            Ok(RatioPoint::from_state(p.omega_r, p.delta, &find_band_minimum(&p)?))
        })
        .collect::<Result<Vec<_>>>()?;

    sink.emit(Format::Csv, "ratio_band.csv", || csv_bytes(|b| write_bands_csv(b, &bands)))?;
    sink.emit(Format::Csv, "ratio_nominal.csv", || csv_bytes(|b| write_ratio_sweep(b, &curve)))?;
    let axis_name = match s.axis {
        Axis::Omega => "omega",
        Axis::Delta => "delta",
    };
    sink.json(
        "ratio_sweep.json",
        &SweepReport {
            axis: axis_name,
            fixed: nominal,
            uncertainty: spec,
            nominal: &curve,
            bands: &bands,
        },
    )?;
    sink.emit(Format::Svg, "ratio_sweep.svg", || {
        let (title, x_label) = match s.axis {
            Axis::Omega => (format!("k_sup/k_00 vs Ω_R, δ = {} E_r", nominal.delta), "Ω_R (E_r)"),
            Axis::Delta => (format!("k_sup/k_00 vs δ, Ω_R = {} E_r", nominal.omega_r), "δ (E_r)"),
        };
        let mut p = Plot::new(&title, x_label, "k_sup / k_00")
            .x_range(s.min.min(s.max - 1e-9), s.max)
            .y_range(0.0, 1.05);
        for band in &bands {
            let (color, label) = if band.variant == Variant::WithInterference.label() {
                (plot::ORANGE, "interference")
            } else {
                (plot::BLUE, "no interference")
            };
            p = p.layer(Layer::Band {
                label: label.into(),
                color,
                x: band.sweep_axis.clone(),
                lower: band.lower.clone(),
                upper: band.upper.clone(),
            });
        }
        let xs: Vec<f64> = values.clone();
        if !no_interference {
            p = p.layer(Layer::Line {
                label: "nominal".into(),
                color: plot::ORANGE,
                points: xs.iter().zip(&curve).map(|(x, c)| (*x, c.ratio)).collect(),
                dashed: false,
            });
        }
        svg_bytes(p.layer(Layer::Line {
            label: "nominal (no int.)".into(),
            color: plot::BLUE,
            points: xs.iter().zip(&curve).map(|(x, c)| (*x, c.ratio_no_interference)).collect(),
            dashed: true,
        }))
    })?;

    println!("{:>10} {:>10} {:>19} {:>19}", axis_name, "nominal", "band", "band (no interf.)");
    let without = bands.last().expect("at least one band");
    for (i, x) in values.iter().enumerate() {
        let band = if no_interference {
            "-".to_string()
        } else {
            format!("{:.4} ± {:.4}", bands[0].mean[i], bands[0].std[i])
        };
        println!(
            "{:>10.4} {:>10.4} {:>19} {:>19}",
            x,
            if no_interference { curve[i].ratio_no_interference } else { curve[i].ratio },
            band,
            format!("{:.4} ± {:.4}", without.mean[i], without.std[i])
        );
    }
    Ok(())
}

// ---------------------------------------------------------------- fit

#[derive(Serialize)]
struct ChannelFit<'a> {
    channel: &'static str,
    #[serde(flatten)]
    fit: &'a FitResult,
    std_errors: Option<[f64; 4]>,
}

#[derive(Serialize)]
struct FitReport<'a> {
    input: String,
    pulse: PulseParams,
    parameters: [&'static str; 4],
    fits: Vec<ChannelFit<'a>>,
    loss: LossReport,
}

fn normalized_model(fit: &FitResult, x: f64) -> f64 {
    remaining_fraction(lorentzian_eta(x, &fit.line())).unwrap_or(f64::NAN)
}

pub fn fit(cfg: &RunConfig, sink: &mut Sink, input: &Path, strict: bool) -> Result<()> {
    let file = File::open(input).map_err(|e| CliError::Data(format!("cannot open {}: {e}", input.display())))?;
    let mut data = read_spectrum_csv(BufReader::new(file))
        .map_err(|e| CliError::Data(format!("{}: {e}", input.display())))?;
    let pulse = cfg.pulse()?;
    data.pulse = Some(pulse);
    data.label = input.display().to_string();
    let opts = cfg.fit_options();

    let total = fit_channel(&data, Channel::Total, &opts)?;
    let components: Option<[FitResult; 3]> = if data.has_components() {
        let fits = Channel::COMPONENTS
            .iter()
            .map(|&c| fit_channel(&data, c, &opts))
            .collect::<dressed_pa::Result<Vec<_>>>()?;
        Some(fits.try_into().expect("three components"))
    } else {
        None
    };
    let all: Vec<(Channel, &FitResult)> = std::iter::once((Channel::Total, &total))
        .chain(components.iter().flat_map(|c| Channel::COMPONENTS.into_iter().zip(c.iter())))
        .collect();
    let failed: Vec<&str> = all.iter().filter(|(_, f)| !f.converged).map(|(c, _)| c.label()).collect();

    let normalized: Option<Spectrum> = match &components {
        Some(c) if failed.is_empty() && c.iter().all(|f| f.n0 > 0.0) => Some(normalize_per_channel(&data, &total, c)?),
        _ if total.converged => Some(normalize_spectrum(&data, &total)?),
        _ => None,
    };
    let loss = loss_report(&total, components.as_ref());

    sink.json(
        "fit.json",
        &FitReport {
            input: input.display().to_string(),
            pulse,
            parameters: FIT_PARAMETERS,
            fits: all
                .iter()
                .map(|(c, f)| ChannelFit {
                    channel: c.label(),
                    fit: f,
                    std_errors: f.std_errors(),
                })
                .collect(),
            loss,
        },
    )?;
    if let Some(norm) = &normalized {
        sink.emit(Format::Csv, "fit_normalized.csv", || csv_bytes(|b| write_spectrum_csv(norm, b)))?;
    }
    sink.emit(Format::Svg, "fit.svg", || {
        let x = data.detunings();
        let (lo, hi) = (x[0], x[x.len() - 1]);
        let fine = linspace(lo, hi, 400)?;
        let mut p = Plot::new("PA spectrum", "Δν_PA (kHz)", if normalized.is_some() { "N / N_0" } else { "N" })
            .x_range(lo, hi);
        let series: Vec<(Channel, &FitResult, &'static str)> = std::iter::once((Channel::Total, &total, plot::BLACK))
            .chain(
                components
                    .iter()
                    .flat_map(|c| Channel::COMPONENTS.into_iter().zip(c.iter()).zip(plot::SPIN_COLORS))
                    .map(|((ch, f), col)| (ch, f, col)),
            )
            .collect();
        for (ch, f, color) in series {
            let source = normalized.as_ref().unwrap_or(&data);
            let y = source.channel(ch)?;
            let scale = if normalized.is_some() { 1.0 } else { f.n0 };
            p = p
                .layer(Layer::Markers {
                    label: ch.label().into(),
                    color,
                    points: x.iter().copied().zip(y).collect(),
                    radius: 3.0,
                })
                .layer(Layer::Line {
                    label: String::new(),
                    color,
                    points: fine.iter().map(|&d| (d, scale * normalized_model(f, d))).collect(),
                    dashed: false,
                });
        }
        svg_bytes(p)
    })?;

    for (c, f) in &all {
        println!(
            "{:>5}: N0 = {:.1}, eta_res = {:.5}, nu0 = {:.4} kHz, gamma = {:.4} kHz, k_PA = {:.4e} cm^3/s, rms = {:.4}, converged = {}",
            c.label(),
            f.n0,
            f.eta_res,
            f.nu0,
            f.gamma,
            f.k_pa.unwrap_or(f64::NAN),
            f.residual_rms,
            f.converged
        );
    }
    match loss.component_sum {
        Some(c) => println!("resonant loss: total fit {:.4}, component fits {:.4}", loss.total_fit, c),
        None => println!("resonant loss: {:.4}", loss.total_fit),
    }
    if !failed.is_empty() {
        warn!("fit did not converge for: {}", failed.join(", "));
        if strict {
            return Err(CliError::Numeric(format!("fit did not converge for: {}", failed.join(", "))));
        }
    }
    Ok(())
}

// ---------------------------------------------------------------- simulate

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Mode {
    Superposition,
    Mixture,
}

#[derive(Serialize)]
struct SuperpositionReport {
    mode: &'static str,
    dressing: RamanParams,
    state: DressedState,
    variant: &'static str,
    rate_ratio: f64,
    pulse: PulseParams,
    k00: f64,
    k_sup: f64,
    eta_bare: f64,
    eta_sup: f64,
    bare_resonant_loss: f64,
    resonant_loss: f64,
    noise_rel: f64,
    seed: u64,
}

#[derive(Serialize)]
struct MixtureReport {
    mode: &'static str,
    initial_counts: [f64; 3],
    pulse: PulseParams,
    channel_ratio: f64,
    k00: f64,
    /// k00 ρ₀ t_PA
    eta: f64,
    resonant_loss: [f64; 3],
    events_00: f64,
    events_pm: f64,
    molecules: f64,
    clamped: bool,
}

fn spectrum_plot(spectrum: &Spectrum, n0: [f64; 3], title: &str) -> Result<Plot> {
    let x = spectrum.detunings();
    let mut p = Plot::new(title, "Δν_PA (kHz)", "N / N_0").x_range(x[0], x[x.len() - 1]);
    let total: f64 = n0.iter().sum();
    let y = spectrum.channel(Channel::Total)?;
    p = p.layer(Layer::Line {
        label: "total".into(),
        color: plot::BLACK,
        points: x.iter().zip(y).map(|(x, y)| (*x, y / total)).collect(),
        dashed: false,
    });
    if spectrum.has_components() {
        for (m, ch) in Channel::COMPONENTS.into_iter().enumerate() {
            if n0[m] > 0.0 {
                let y = spectrum.channel(ch)?;
                p = p.layer(Layer::Markers {
                    label: ch.label().into(),
                    color: plot::SPIN_COLORS[m],
                    points: x.iter().zip(y).map(|(x, y)| (*x, y / n0[m])).collect(),
                    radius: 3.0,
                });
            }
        }
    }
    Ok(p)
}

fn mixture_k00(cfg: &RunConfig, pulse: &PulseParams) -> Result<f64> {
    let dt = pulse.t_pa / cfg.mixture.steps as f64;
    if cfg.mixture.target_m0_loss > 0.0 {
        Ok(calibrate_k00(
            &cfg.mixture_state(),
            &cfg.mixture_model(0.0),
            pulse,
            cfg.mixture.target_m0_loss,
            dt,
        )?)
    } else {
        Ok(rate_from_eta(cfg.bare_line()?.eta_res, pulse))
    }
}

fn resonant_mixture(cfg: &RunConfig) -> Result<(PulseParams, f64, MixtureRun)> {
    let initial = cfg.mixture_state();
    let pulse = cfg.pulse_for(initial.total())?;
    let k00 = mixture_k00(cfg, &pulse)?;
    let run = simulate_mixture_with(
        &initial,
        &cfg.mixture_model(k00),
        &pulse,
        pulse.t_pa / cfg.mixture.steps as f64,
    )?;
    if run.clamped {
        warn!("negative densities were clamped; increase mixture.steps");
    }
    Ok((pulse, k00, run))
}

fn mixture_report(cfg: &RunConfig, pulse: PulseParams, k00: f64, run: &MixtureRun) -> MixtureReport {
    MixtureReport {
        mode: "mixture",
        initial_counts: run.initial().counts,
        pulse,
        channel_ratio: cfg.mixture.channel_ratio,
        k00,
        eta: eta_from_rate(k00, &pulse),
        resonant_loss: run.fractional_loss(),
        events_00: run.events_00,
        events_pm: run.events_pm,
        molecules: run.last().molecules,
        clamped: run.clamped,
    }
}

fn print_mixture(report: &MixtureReport) {
    let l = report.resonant_loss;
    println!(
        "mixture: k00 = {:.4e} cm^3/s (eta = {:.4}), resonant loss m-1/m0/m+1 = {:.4} / {:.4} / {:.4}",
        report.k00, report.eta, l[0], l[1], l[2]
    );
}

pub fn simulate(cfg: &RunConfig, sink: &mut Sink, mode: Mode, no_interference: bool) -> Result<()> {
    let detunings = cfg.detunings()?;
    let (noise, seed) = (cfg.spectrum.noise_rel, cfg.spectrum.seed);
    let bare = cfg.bare_line()?;
    match mode {
        Mode::Superposition => {
            let params = cfg.raman();
            let state = find_band_minimum(&params)?;
            let v = variant(no_interference);
            let ratio = v.evaluate(&SpinAmplitudes::from(&state));
            let pulse = cfg.pulse()?;
            let line = LorentzianLine {
                eta_res: ratio * bare.eta_res,
                ..bare
            };
            let mut spectrum = synthesize_dressed_spectrum(&line, &pulse, state.weights(), &detunings, noise, seed)?;
            spectrum.dressing = Some(params);
            let k00 = rate_from_eta(bare.eta_res, &pulse);
            let report = SuperpositionReport {
                mode: "superposition",
                dressing: params,
                state,
                variant: v.label(),
                rate_ratio: ratio,
                pulse,
                k00,
                k_sup: ratio * k00,
                eta_bare: bare.eta_res,
                eta_sup: line.eta_res,
                bare_resonant_loss: 1.0 - remaining_fraction(bare.eta_res)?,
                resonant_loss: 1.0 - remaining_fraction(line.eta_res)?,
                noise_rel: noise,
                seed,
            };
            sink.emit(Format::Csv, "spectrum.csv", || csv_bytes(|b| write_spectrum_csv(&spectrum, b)))?;
            sink.json("simulate.json", &report)?;
            sink.emit(Format::Svg, "spectrum.svg", || {
                let n0 = state.weights().map(|w| w * pulse.n0);
                svg_bytes(spectrum_plot(
                    &spectrum,
                    n0,
                    &format!("Superposition, Ω_R = {} E_r, δ = {} E_r", params.omega_r, params.delta),
                )?)
            })?;
            println!(
                "superposition: k_sup/k00 = {:.6}, eta_res {:.4} -> {:.4}, resonant loss {:.4} (bare {:.4})",
                ratio, report.eta_bare, report.eta_sup, report.resonant_loss, report.bare_resonant_loss
            );
        }
        Mode::Mixture => {
            let (pulse, k00, run) = resonant_mixture(cfg)?;
            let line = LorentzianLine {
                eta_res: eta_from_rate(k00, &pulse),
                ..bare
            };
            let spectrum = synthesize_mixture_spectrum(
                &cfg.mixture_state(),
                &cfg.mixture_model(0.0),
                &line,
                &pulse,
                &detunings,
                noise,
                seed,
                pulse.t_pa / cfg.mixture.steps as f64,
            )?;
            let report = mixture_report(cfg, pulse, k00, &run);
            sink.emit(Format::Csv, "spectrum.csv", || csv_bytes(|b| write_spectrum_csv(&spectrum, b)))?;
            sink.emit(Format::Csv, "mixture.csv", || csv_bytes(|b| run.write_csv(b)))?;
            sink.json("simulate.json", &report)?;
            sink.emit(Format::Svg, "spectrum.svg", || {
                svg_bytes(spectrum_plot(&spectrum, cfg.mixture.counts, "Statistical mixture")?)
            })?;
            print_mixture(&report);
        }
    }
    Ok(())
}

// ---------------------------------------------------------------- mixture-sim

pub fn mixture_sim(cfg: &RunConfig, sink: &mut Sink) -> Result<()> {
    let (pulse, k00, run) = resonant_mixture(cfg)?;
    let report = mixture_report(cfg, pulse, k00, &run);
    sink.emit(Format::Csv, "mixture.csv", || csv_bytes(|b| run.write_csv(b)))?;
    sink.json("mixture.json", &report)?;
    sink.emit(Format::Svg, "mixture.svg", || {
        let mut p = Plot::new("Mixture on resonance", "t (ms)", "N / N_0(t=0)").x_range(0.0, pulse.t_pa * 1e3);
        let n0 = run.initial().counts;
        for m in 0..3 {
            if n0[m] > 0.0 {
                p = p.layer(Layer::Line {
                    label: Channel::COMPONENTS[m].label().into(),
                    color: plot::SPIN_COLORS[m],
                    points: run.samples.iter().map(|s| (s.t * 1e3, s.counts[m] / n0[m])).collect(),
                    dashed: false,
                });
            }
        }
        svg_bytes(p)
    })?;
    print_mixture(&report);
    Ok(())
}
