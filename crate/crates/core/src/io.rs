//! Parameter files and CSV/JSON artifacts.
//!
//! Floating-point values are written in the shortest form that parses back
//! to the same `f64`.

use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fit::{MeasuredSpectrum, Normalization};
use crate::params::{angular, hz_over_2pi, EmitterEnsemble, Geometry, Regime, ResonatorConfig};
use crate::resonance::ResonanceBranch;
use crate::spectrum::{ParamSnapshot, Spectrum};

/// Flat parameter file. Every key is optional so that command-line flags
/// can fill in or override values before [`ParamFile::resolve`].
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_atoms: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta_list: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma_hz_over_2pi: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nu_fsr_hz: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_rt: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa0_hz_over_2pi: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa_ext_hz_over_2pi: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub geometry: Option<Geometry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub regime: Option<Regime>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_ca_hz_over_2pi: Option<f64>,
}

/// Fully specified system.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResolvedParams {
    pub ensemble: EmitterEnsemble,
    pub resonator: ResonatorConfig,
    /// rad/s
    pub delta_ca: f64,
}

impl ParamFile {
    pub fn from_json_str(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Input(format!("parameter file: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json_str(&text)
    }

    pub fn resolve(&self) -> Result<ResolvedParams> {
        let need = |v: Option<f64>, name: &str| v.ok_or_else(|| Error::Input(format!("missing `{name}`")));
        let gamma = angular(need(self.gamma_hz_over_2pi, "gamma_hz_over_2pi")?);
        let nu = need(self.nu_fsr_hz, "nu_fsr_hz")?;
        let regime = self.regime.unwrap_or_default();
        let geometry = self.geometry.unwrap_or_default();

        let ensemble = match (&self.beta_list, self.beta) {
            (Some(_), Some(_)) => return Err(Error::Input("give either `beta` or `beta_list`, not both".into())),
            (Some(list), None) => {
                if let Some(n) = self.n_atoms {
                    if n != list.len() {
                        return Err(Error::Input(format!(
                            "n_atoms = {n} but beta_list has {} entries",
                            list.len()
                        )));
                    }
                }
                EmitterEnsemble::from_betas(list.clone(), gamma, regime)?
            }
            (None, Some(b)) => EmitterEnsemble::uniform(self.n_atoms.unwrap_or(0), b, gamma, regime)?,
            (None, None) => {
                if self.n_atoms.unwrap_or(0) > 0 {
                    return Err(Error::Input("n_atoms given without `beta` or `beta_list`".into()));
                }
                EmitterEnsemble::uniform(0, 0.0, gamma, regime)?
            }
        };

        let mirrors = self.t_rt.is_some() || self.r.is_some();
        let rates = self.kappa0_hz_over_2pi.is_some() || self.kappa_ext_hz_over_2pi.is_some();
        let resonator = match (mirrors, rates) {
            (true, true) => {
                return Err(Error::Input(
                    "give the resonator either as `t_rt`/`r` or as `kappa0_hz_over_2pi`/`kappa_ext_hz_over_2pi`".into(),
                ))
            }
            (_, false) => ResonatorConfig::new(nu, need(self.t_rt, "t_rt")?, need(self.r, "r")?, geometry)?,
            (false, true) => ResonatorConfig::from_rates(
                nu,
                angular(need(self.kappa0_hz_over_2pi, "kappa0_hz_over_2pi")?),
                angular(need(self.kappa_ext_hz_over_2pi, "kappa_ext_hz_over_2pi")?),
                geometry,
            )?,
        };
        Ok(ResolvedParams {
            ensemble,
            resonator,
            delta_ca: angular(self.delta_ca_hz_over_2pi.unwrap_or(0.0)),
        })
    }
}

/// Shortest decimal string that parses back to `x`.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:?}")
}

fn parse_f64(field: &str, line: usize) -> Result<f64> {
    field
        .trim()
        .parse::<f64>()
        .map_err(|_| Error::Input(format!("line {line}: `{field}` is not a number")))
}

pub const SPECTRUM_HEADER: [&str; 3] = ["delta_a_hz_over_2pi", "delta_c_hz_over_2pi", "reflection"];

pub fn write_spectrum_csv<W: Write>(w: W, spectrum: &Spectrum) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(SPECTRUM_HEADER)?;
    for p in &spectrum.points {
        out.write_record([
            fmt_f64(hz_over_2pi(p.delta_a)),
            fmt_f64(hz_over_2pi(p.delta_c)),
            fmt_f64(p.reflection),
        ])?;
    }
    out.flush()?;
    Ok(())
}

/// Rows of a spectrum CSV as `(Δ_a/2π, Δ_c/2π, R)`.
pub fn read_spectrum_csv<R: Read>(r: R) -> Result<Vec<[f64; 3]>> {
    let mut rdr = csv::Reader::from_reader(r);
    let header = rdr.headers()?.clone();
    if header.iter().collect::<Vec<_>>() != SPECTRUM_HEADER {
        return Err(Error::Input(format!(
            "expected header {}, found {}",
            SPECTRUM_HEADER.join(","),
            header.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        if rec.len() != 3 {
            return Err(Error::Input(format!("line {}: expected 3 fields", i + 2)));
        }
        rows.push([
            parse_f64(&rec[0], i + 2)?,
            parse_f64(&rec[1], i + 2)?,
            parse_f64(&rec[2], i + 2)?,
        ]);
    }
    Ok(rows)
}

pub fn write_json<T: Serialize, W: Write>(mut w: W, value: &T) -> Result<()> {
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    Ok(())
}

pub fn snapshot_to_json(snapshot: &ParamSnapshot) -> Result<String> {
    Ok(serde_json::to_string_pretty(snapshot)?)
}

pub fn snapshot_from_json(s: &str) -> Result<ParamSnapshot> {
    Ok(serde_json::from_str(s)?)
}

pub const RESONANCE_HEADER: [&str; 5] = ["model", "branch_index", "beta_n", "delta_hz_over_2pi", "contrast"];

/// One row per branch point; an empty contrast cell means "not computed".
pub fn write_resonance_csv<W: Write>(w: W, branches: &[ResonanceBranch]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(RESONANCE_HEADER)?;
    for b in branches {
        for p in &b.points {
            out.write_record([
                b.model.as_str().to_string(),
                b.index.to_string(),
                fmt_f64(p.beta_n),
                fmt_f64(hz_over_2pi(p.delta)),
                p.contrast.map(fmt_f64).unwrap_or_default(),
            ])?;
        }
    }
    out.flush()?;
    Ok(())
}

/// Reads `probe_detuning_hz,signal` data. Lines starting with `#` and blank
/// lines are skipped; a header row naming the two columns is optional.
pub fn read_measured_csv<R: Read>(r: R, normalization: Normalization) -> Result<MeasuredSpectrum> {
    let mut x = Vec::new();
    let mut y = Vec::new();
    for (i, line) in BufReader::new(r).lines().enumerate() {
        let line = line?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = t.split(',').map(str::trim).collect();
        if fields.len() != 2 {
            return Err(Error::Input(format!(
                "line {}: expected 2 fields, found {}",
                i + 1,
                fields.len()
            )));
        }
        if x.is_empty() && y.is_empty() && fields == ["probe_detuning_hz", "signal"] {
            continue;
        }
        x.push(parse_f64(fields[0], i + 1)?);
        y.push(parse_f64(fields[1], i + 1)?);
    }
    MeasuredSpectrum::new(x, y, normalization)
}

pub fn read_measured_file(path: &Path, normalization: Normalization) -> Result<MeasuredSpectrum> {
    read_measured_csv(File::open(path)?, normalization)
}

pub const MODEL_CURVE_HEADER: [&str; 3] = ["probe_detuning_hz", "signal", "model"];

pub fn write_model_curve_csv<W: Write>(w: W, data: &MeasuredSpectrum, model: &[f64]) -> Result<()> {
    if model.len() != data.len() {
        return Err(Error::Input("model curve length differs from the data".into()));
    }
    let mut out = csv::Writer::from_writer(w);
    out.write_record(MODEL_CURVE_HEADER)?;
    for ((x, y), m) in data.detuning_hz.iter().zip(&data.signal).zip(model) {
        out.write_record([fmt_f64(*x), fmt_f64(*y), fmt_f64(*m)])?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::resonance::{BranchPoint, ResonanceModel};
    use crate::spectrum::{linspace, spectrum_scan, ModelTag};

    #[test]
    fn unknown_key_lists_accepted_keys() {
        let err = ParamFile::from_json_str(r#"{"gamma": 1.0}"#).unwrap_err().to_string();
        assert!(err.contains("gamma_hz_over_2pi"));
        assert!(err.contains("nu_fsr_hz"));
    }

    #[test]
    fn resolve_mirror_and_rate_forms() {
        let p = ParamFile::from_json_str(
            r#"{"n_atoms": 10, "beta": 0.01, "gamma_hz_over_2pi": 5e6, "nu_fsr_hz": 1e8,
                "t_rt": 0.99, "r": 0.98, "delta_ca_hz_over_2pi": 1e6}"#,
        )
        .unwrap()
        .resolve()
        .unwrap();
        assert_eq!(p.ensemble.n_atoms(), 10);
        assert_eq!(p.resonator.r(), 0.98);
        assert_eq!(p.resonator.geometry(), Geometry::Ring);

        let k = ParamFile {
            gamma_hz_over_2pi: Some(5e6),
            nu_fsr_hz: Some(1e8),
            kappa0_hz_over_2pi: Some(1e5),
            kappa_ext_hz_over_2pi: Some(2e5),
            ..Default::default()
        }
        .resolve()
        .unwrap();
        assert!((k.resonator.kappa0() - angular(1e5)).abs() < 1e-6 * angular(1e5));
    }

    #[test]
    fn resolve_rejects_mixed_or_missing() {
        let base = ParamFile {
            gamma_hz_over_2pi: Some(5e6),
            nu_fsr_hz: Some(1e8),
            t_rt: Some(0.9),
            r: Some(0.9),
            ..Default::default()
        };
        assert!(ParamFile {
            kappa0_hz_over_2pi: Some(1.0),
            ..base.clone()
        }
        .resolve()
        .is_err());
        assert!(ParamFile {
            beta: Some(0.1),
            beta_list: Some(vec![0.1]),
            ..base.clone()
        }
        .resolve()
        .is_err());
        assert!(ParamFile {
            n_atoms: Some(3),
            beta_list: Some(vec![0.1]),
            ..base.clone()
        }
        .resolve()
        .is_err());
        assert!(ParamFile {
            r: None,
            ..base.clone()
        }
        .resolve()
        .is_err());
        assert!(base.resolve().is_ok());
    }

    #[test]
    fn spectrum_csv_round_trip() {
        let ens = EmitterEnsemble::uniform(40, 0.01, angular(5e6), Regime::TimedDicke).unwrap();
        let res = ResonatorConfig::new(1e8, 0.99, 0.98, Geometry::Ring).unwrap();
        let grid = linspace(-angular(3e8), angular(3e8), 101);
        let s = spectrum_scan(&ens, &res, angular(1e6), &grid, ModelTag::Cascaded).unwrap();
        let mut buf = Vec::new();
        write_spectrum_csv(&mut buf, &s).unwrap();
        let rows = read_spectrum_csv(buf.as_slice()).unwrap();
        assert_eq!(rows.len(), 101);
        for (row, p) in rows.iter().zip(&s.points) {
            assert_eq!(row[0], hz_over_2pi(p.delta_a));
            assert_eq!(row[2], p.reflection);
        }
        let json = snapshot_to_json(&s.metadata).unwrap();
        assert_eq!(snapshot_from_json(&json).unwrap(), s.metadata);
    }

    #[test]
    fn wrong_header_rejected() {
        assert!(read_spectrum_csv("a,b,c\n1,2,3\n".as_bytes()).is_err());
    }

    #[test]
    fn resonance_csv_rows() {
        let b = ResonanceBranch {
            model: ResonanceModel::Cascaded,
            index: -1,
            points: vec![
                BranchPoint {
                    beta_n: 0.5,
                    delta: angular(2.0),
                    contrast: Some(0.25),
                },
                BranchPoint {
                    beta_n: 1.0,
                    delta: angular(3.0),
                    contrast: None,
                },
            ],
        };
        let mut buf = Vec::new();
        write_resonance_csv(&mut buf, &[b]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "model,branch_index,beta_n,delta_hz_over_2pi,contrast");
        assert_eq!(lines[1], "cascaded,-1,0.5,2.0,0.25");
        assert_eq!(lines[2], "cascaded,-1,1.0,3.0,");

        let mut empty = Vec::new();
        write_resonance_csv(&mut empty, &[]).unwrap();
        assert_eq!(String::from_utf8(empty).unwrap().lines().count(), 1);
    }

    #[test]
    fn measured_csv_with_comments() {
        let text = "# scan 1\n# counts\nprobe_detuning_hz,signal\n-1e6,10\n0,4\n\n1e6,9\n";
        let d = read_measured_csv(text.as_bytes(), Normalization::Raw).unwrap();
        assert_eq!(d.detuning_hz, vec![-1e6, 0.0, 1e6]);
        assert_eq!(d.signal, vec![10.0, 4.0, 9.0]);
        assert!(read_measured_csv("1,2,3\n".as_bytes(), Normalization::Raw).is_err());
        assert!(read_measured_csv("1,x\n".as_bytes(), Normalization::Raw).is_err());
    }
}
