//! Spectrum CSV files.
//!
//! Columns are matched by header name. `detuning_khz` and `atoms_total` are
//! required; the three component columns must appear together or not at all;
//! `stderr` is optional. Empty cells read as missing.

use std::io::{Read, Write};

use super::{Spectrum, SpectrumPoint};
use crate::error::{Error, Result};

pub const SPECTRUM_CSV_HEADER: &str =
    "detuning_khz,atoms_total,atoms_m_minus1,atoms_m0,atoms_m_plus1,stderr";

const COMPONENT_COLUMNS: [&str; 3] = ["atoms_m_minus1", "atoms_m0", "atoms_m_plus1"];

fn parse_error(line: u64, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

/// Reads a spectrum; pulse and dressing metadata are left unset.
pub fn read_spectrum_csv<R: Read>(input: R) -> Result<Spectrum> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(input);
    let headers = reader.headers()?.clone();
    let column = |name: &str| headers.iter().position(|h| h == name);
    let required = |name: &str| column(name).ok_or_else(|| parse_error(1, format!("missing column `{name}`")));
    let i_det = required("detuning_khz")?;
    let i_tot = required("atoms_total")?;
    let comp_cols = COMPONENT_COLUMNS.map(column);
    let i_comp = match comp_cols {
        [Some(a), Some(b), Some(c)] => Some([a, b, c]),
        [None, None, None] => None,
        _ => return Err(parse_error(1, "component columns must all be present or all absent")),
    };
    let i_err = column("stderr");

    let mut points: Vec<SpectrumPoint> = Vec::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let cell = |i: usize, name: &str| -> Result<Option<f64>> {
            match record.get(i).unwrap_or("") {
                "" => Ok(None),
                s => s
                    .parse::<f64>()
                    .map(Some)
                    .map_err(|_| parse_error(line, format!("`{name}`: cannot parse `{s}` as a number"))),
            }
        };
        let need = |i: usize, name: &str| -> Result<f64> {
            cell(i, name)?.ok_or_else(|| parse_error(line, format!("`{name}` is empty")))
        };
        let detuning_khz = need(i_det, "detuning_khz")?;
        let atoms_total = need(i_tot, "atoms_total")?;
        let components = match i_comp {
            None => None,
            Some(cols) => {
                let vals = [
                    cell(cols[0], COMPONENT_COLUMNS[0])?,
                    cell(cols[1], COMPONENT_COLUMNS[1])?,
                    cell(cols[2], COMPONENT_COLUMNS[2])?,
                ];
                match vals {
                    [Some(a), Some(b), Some(c)] => Some([a, b, c]),
                    [None, None, None] => None,
                    _ => return Err(parse_error(line, "partially filled spin components")),
                }
            }
        };
        let stderr = match i_err {
            Some(i) => cell(i, "stderr")?,
            None => None,
        };
        if let Some(prev) = points.last() {
            if !(detuning_khz > prev.detuning_khz) {
                return Err(parse_error(
                    line,
                    format!(
                        "detuning {detuning_khz} kHz not strictly greater than previous {} kHz",
                        prev.detuning_khz
                    ),
                ));
            }
        }
        let point = SpectrumPoint {
            detuning_khz,
            atoms_total,
            components,
            stderr,
        };
        let single = Spectrum {
            points: vec![point],
            ..Spectrum::default()
        };
        single
            .validate()
            .map_err(|e| parse_error(line, e.to_string()))?;
        points.push(point);
    }
    Ok(Spectrum {
        points,
        ..Spectrum::default()
    })
}

/// Writes the full header; absent values become empty cells.
pub fn write_spectrum_csv<W: Write>(data: &Spectrum, out: W) -> Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    writer.write_record(SPECTRUM_CSV_HEADER.split(','))?;
    let opt = |v: Option<f64>| v.map_or_else(String::new, |x| x.to_string());
    for p in &data.points {
        let c = p.components;
        writer.write_record([
            p.detuning_khz.to_string(),
            p.atoms_total.to_string(),
            opt(c.map(|c| c[0])),
            opt(c.map(|c| c[1])),
            opt(c.map(|c| c[2])),
            opt(p.stderr),
        ])?;
    }
    writer.flush()?;
    Ok(())
}
