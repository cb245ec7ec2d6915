//! Stable text serializations: 17-significant-digit floats, fixed field order.

use std::io::Write;

use serde::{Serialize, Serializer};
use serde_json::value::RawValue;

use crate::spectra::{FilterTolerances, ModeSet};
use crate::{AssemblyOptions, Result};

pub const SCHEMA_VERSION: u32 = 1;

/// Header row of the spectrum CSV.
pub const SPECTRUM_CSV_HEADER: [&str; 7] = [
    "rank",
    "lambda",
    "eps",
    "cluster",
    "multiplicity",
    "monopole",
    "residual",
];

/// Formats a float with 17 significant digits, which round-trips every `f64`.
pub fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

/// Serializes an `f64` as a JSON number with 17 significant digits (`null` if not finite).
pub fn ser_f64<S: Serializer>(x: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if x.is_finite() {
        RawValue::from_string(fmt17(*x))
            .map_err(serde::ser::Error::custom)?
            .serialize(s)
    } else {
        s.serialize_none()
    }
}

pub fn ser_opt_f64<S: Serializer>(x: &Option<f64>, s: S) -> std::result::Result<S::Ok, S::Error> {
    match x {
        Some(v) => ser_f64(v, s),
        None => s.serialize_none(),
    }
}

pub fn ser_f64_vec<S: Serializer>(xs: &[f64], s: S) -> std::result::Result<S::Ok, S::Error> {
    use serde::ser::SerializeSeq;
    let mut seq = s.serialize_seq(Some(xs.len()))?;
    for x in xs {
        seq.serialize_element(&F64(*x))?;
    }
    seq.end()
}

/// `f64` wrapper serialized through [`ser_f64`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct F64(pub f64);

impl Serialize for F64 {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        ser_f64(&self.0, s)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct GeometryInfo {
    pub source: String,
    pub n_panels: usize,
    #[serde(serialize_with = "ser_f64")]
    pub signed_volume: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct OptionsInfo {
    #[serde(serialize_with = "ser_f64")]
    pub eta: f64,
    pub subdiv_depth: u32,
    pub max_panels: usize,
    #[serde(serialize_with = "ser_f64")]
    pub imag_tol: f64,
    #[serde(serialize_with = "ser_f64")]
    pub monopole_tol: f64,
    #[serde(serialize_with = "ser_f64")]
    pub cluster_tol: f64,
    #[serde(serialize_with = "ser_f64")]
    pub residual_tol: f64,
}

impl OptionsInfo {
    pub fn new(assembly: &AssemblyOptions, tols: &FilterTolerances) -> Self {
        OptionsInfo {
            eta: assembly.eta,
            subdiv_depth: assembly.subdiv_depth,
            max_panels: assembly.max_panels,
            imag_tol: tols.imag_rel,
            monopole_tol: tols.monopole,
            cluster_tol: tols.cluster_rel,
            residual_tol: tols.residual,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SpectrumRow {
    pub rank: usize,
    #[serde(serialize_with = "ser_f64")]
    pub lambda: f64,
    #[serde(serialize_with = "ser_opt_f64")]
    pub eps: Option<f64>,
    pub cluster: Option<usize>,
    pub multiplicity: Option<usize>,
    pub monopole: bool,
    #[serde(serialize_with = "ser_f64")]
    pub residual: f64,
}

/// Spectrum document, schema version 1.
#[derive(Debug, Clone, Serialize)]
pub struct SpectrumDoc {
    pub schema_version: u32,
    pub geometry: GeometryInfo,
    pub options: OptionsInfo,
    pub spectrum: Vec<SpectrumRow>,
    pub discarded_complex: usize,
}

impl SpectrumDoc {
    pub fn new(geometry: GeometryInfo, options: OptionsInfo, modes: &ModeSet) -> Self {
        let spectrum = modes
            .modes
            .iter()
            .enumerate()
            .map(|(rank, m)| SpectrumRow {
                rank,
                lambda: m.lambda,
                eps: m.eps,
                cluster: m.cluster,
                multiplicity: m.cluster.map(|c| modes.clusters[c].multiplicity),
                monopole: m.monopole,
                residual: m.residual,
            })
            .collect();
        SpectrumDoc {
            schema_version: SCHEMA_VERSION,
            geometry,
            options,
            spectrum,
            discarded_complex: modes.discarded_complex,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn write_csv(&self, w: impl Write) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(SPECTRUM_CSV_HEADER)?;
        let opt = |x: Option<usize>| x.map(|v| v.to_string()).unwrap_or_default();
        for r in &self.spectrum {
            wr.write_record([
                r.rank.to_string(),
                fmt17(r.lambda),
                r.eps.map(fmt17).unwrap_or_default(),
                opt(r.cluster),
                opt(r.multiplicity),
                r.monopole.to_string(),
                fmt17(r.residual),
            ])?;
        }
        wr.flush()?;
        Ok(())
    }
}

/// Per-triangle scalar sidecar: `NPMODE 1`, the count, then one value per line.
pub fn write_mode_sidecar(mut w: impl Write, sigma: &[f64]) -> std::io::Result<()> {
    writeln!(w, "NPMODE 1")?;
    writeln!(w, "{}", sigma.len())?;
    for s in sigma {
        writeln!(w, "{}", fmt17(*s))?;
    }
    Ok(())
}

/// Reads a sidecar written by [`write_mode_sidecar`].
pub fn read_mode_sidecar(text: &str) -> Result<Vec<f64>> {
    let parse_err = |line: usize, message: String| crate::Error::Parse { line, message };
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, "NPMODE 1")) => {}
        _ => return Err(parse_err(1, "expected header \"NPMODE 1\"".into())),
    }
    let n: usize = lines
        .next()
        .and_then(|(_, l)| l.trim().parse().ok())
        .ok_or_else(|| parse_err(2, "expected scalar count".into()))?;
    let values = lines
        .map(|(i, l)| {
            l.trim()
                .parse::<f64>()
                .map_err(|_| parse_err(i + 1, format!("bad scalar {l:?}")))
        })
        .collect::<Result<Vec<_>>>()?;
    if values.len() != n {
        return Err(parse_err(
            2,
            format!("count {n} but {} values", values.len()),
        ));
    }
    Ok(values)
}
