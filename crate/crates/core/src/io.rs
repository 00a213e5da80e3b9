//! File formats: model configuration JSON, report JSON and CSV tables.
//! Non-finite numbers travel through JSON as the strings "inf", "-inf", "nan".

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::builders::{build_diagonal, builtin, SequenceRule};
use crate::config::{ToleranceOverrides, Tolerances};
use crate::diagnostics::DiagnosticsReport;
use crate::engine::SamplePath;
use crate::error::{OuError, Result};
use crate::linalg::{Mat, Vector};
use crate::model::{ModelKind, OuModel};

/// Serde adapter for `f64` fields that may be infinite.
pub mod extended_float {
    use serde::{de, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_str(super::non_finite_name(*v))
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Number(f64),
        Text(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Number(v) => Ok(v),
            Repr::Text(t) => super::parse_non_finite(&t)
                .ok_or_else(|| de::Error::custom(format!("not a number: {t:?}"))),
        }
    }
}

/// As [`extended_float`] for `Option<f64>`.
pub mod extended_float_opt {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    struct Wrap(#[serde(with = "super::extended_float")] f64);

    pub fn serialize<S: Serializer>(v: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
        v.map(Wrap).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<f64>, D::Error> {
        Ok(Option::<Wrap>::deserialize(d)?.map(|w| w.0))
    }
}

/// As [`extended_float`] for `Vec<(f64, f64)>`.
pub mod extended_pairs {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    struct Pair(
        #[serde(with = "super::extended_float")] f64,
        #[serde(with = "super::extended_float")] f64,
    );

    pub fn serialize<S: Serializer>(v: &[(f64, f64)], s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(v.iter().map(|&(a, b)| Pair(a, b)))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<(f64, f64)>, D::Error> {
        Ok(Vec::<Pair>::deserialize(d)?
            .into_iter()
            .map(|p| (p.0, p.1))
            .collect())
    }
}

fn non_finite_name(v: f64) -> &'static str {
    if v.is_nan() {
        "nan"
    } else if v > 0.0 {
        "inf"
    } else {
        "-inf"
    }
}

fn parse_non_finite(t: &str) -> Option<f64> {
    match t {
        "inf" | "+inf" | "infinity" => Some(f64::INFINITY),
        "-inf" | "-infinity" => Some(f64::NEG_INFINITY),
        "nan" => Some(f64::NAN),
        _ => None,
    }
}

/// Row-major nested vectors.
pub fn mat_rows(m: &Mat) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn rows_to_mat(rows: &[Vec<f64>], what: &str) -> Result<Mat> {
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, Vec::len);
    if nrows == 0 || ncols == 0 {
        return Err(OuError::InvalidInput(format!(
            "{what} must be a nonempty row-major array"
        )));
    }
    if let Some(bad) = rows.iter().position(|r| r.len() != ncols) {
        return Err(OuError::InvalidInput(format!(
            "{what}: row {bad} has {} entries, expected {ncols}",
            rows[bad].len()
        )));
    }
    Ok(Mat::from_row_iterator(
        nrows,
        ncols,
        rows.iter().flatten().copied(),
    ))
}

/// How the model is specified in a configuration file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ModelSpec {
    Dense {
        /// Drift, row-major.
        #[serde(rename = "A")]
        drift: Vec<Vec<f64>>,
        /// Noise embedding, row-major n x m.
        i_factor: Vec<Vec<f64>>,
    },
    Diagonal {
        q: SequenceRule,
        a: SequenceRule,
        #[serde(rename = "N")]
        truncation: usize,
    },
    Builtin {
        builtin: String,
    },
}

/// Model configuration file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(flatten)]
    pub spec: ModelSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerances: Option<ToleranceOverrides>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub times: Vec<f64>,
}

impl ModelConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            OuError::InvalidInput(format!("cannot read model file {}: {e}", path.display()))
        })?;
        Self::from_json(&text)
    }

    /// Dense configuration reproducing `model`'s matrices.
    pub fn from_model(model: &OuModel) -> Self {
        let spec = match model.diagonal_data() {
            Some(d) => ModelSpec::Diagonal {
                q: SequenceRule::List(d.q.clone()),
                a: SequenceRule::List(d.a.clone()),
                truncation: d.q.len(),
            },
            None => ModelSpec::Dense {
                drift: mat_rows(model.drift()),
                i_factor: mat_rows(model.noise()),
            },
        };
        Self {
            name: Some(model.name().to_string()),
            spec,
            tolerances: None,
            times: Vec::new(),
        }
    }

    /// `base` with this file's overrides applied.
    pub fn tolerances(&self, base: Tolerances) -> Tolerances {
        let mut tol = base;
        if let Some(o) = &self.tolerances {
            tol.apply(o);
        }
        tol
    }

    pub fn build(&self, tol: &Tolerances) -> Result<OuModel> {
        let model = match &self.spec {
            ModelSpec::Dense { drift, i_factor } => {
                let a = rows_to_mat(drift, "A")?;
                let i = rows_to_mat(i_factor, "i_factor")?;
                OuModel::new(
                    self.name.clone().unwrap_or_else(|| "model".into()),
                    a,
                    i,
                    tol,
                )?
                .with_kind(ModelKind::Dense)
            }
            ModelSpec::Diagonal { q, a, truncation } => build_diagonal(q, a, *truncation)?,
            ModelSpec::Builtin { builtin: name } => builtin(name)?,
        };
        Ok(match &self.name {
            Some(n) => model.with_name(n.clone()),
            None => model,
        })
    }
}

/// Writes `bytes` to `path` through a temporary file in the same directory.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| OuError::Io(e.error))?;
    Ok(())
}

pub fn report_json(report: &DiagnosticsReport) -> Result<String> {
    let mut s = serde_json::to_string_pretty(report)?;
    s.push('\n');
    Ok(s)
}

pub fn parse_report(text: &str) -> Result<DiagnosticsReport> {
    Ok(serde_json::from_str(text)?)
}

/// Shortest decimal that parses back to the same `f64`.
pub fn format_float(v: f64) -> String {
    if v.is_finite() {
        format!("{v:?}")
    } else {
        non_finite_name(v).to_string()
    }
}

/// Comma-separated table with a header row and LF line endings.
pub fn csv_string<I, R>(header: &[String], rows: I) -> String
where
    I: IntoIterator<Item = R>,
    R: AsRef<[f64]>,
{
    let mut out = header.join(",");
    out.push('\n');
    for row in rows {
        let cells: Vec<String> = row.as_ref().iter().map(|&v| format_float(v)).collect();
        let _ = writeln!(out, "{}", cells.join(","));
    }
    out
}

pub fn state_header(prefix: &[&str], n: usize) -> Vec<String> {
    prefix
        .iter()
        .map(|s| s.to_string())
        .chain((1..=n).map(|k| format!("x_{k}")))
        .collect()
}

/// Columns `t, x_1, ..., x_n`.
pub fn path_csv(path: &SamplePath) -> String {
    let n = path.states.ncols();
    let rows = path.times.iter().enumerate().map(|(k, &t)| {
        let mut row = Vec::with_capacity(n + 1);
        row.push(t);
        row.extend(path.states.row(k).iter().copied());
        row
    });
    csv_string(&state_header(&["t"], n), rows)
}

/// Columns `x_1, ..., x_n`, one sample per row.
pub fn samples_csv(samples: &[Vector]) -> String {
    let n = samples.first().map_or(0, |v| v.len());
    csv_string(
        &state_header(&[], n),
        samples.iter().map(|v| v.as_slice().to_vec()),
    )
}

/// Parses a CSV produced by [`csv_string`].
pub fn parse_csv(text: &str) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut lines = text.lines();
    let header: Vec<String> = lines
        .next()
        .ok_or_else(|| OuError::InvalidInput("empty CSV".into()))?
        .split(',')
        .map(str::to_string)
        .collect();
    let mut rows = Vec::new();
    for line in lines.filter(|l| !l.is_empty()) {
        let row = line
            .split(',')
            .map(|c| {
                c.parse::<f64>()
                    .ok()
                    .or_else(|| parse_non_finite(c))
                    .ok_or_else(|| OuError::InvalidInput(format!("bad CSV cell {c:?}")))
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    Ok((header, rows))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dense_config_round_trip() {
        let cfg = ModelConfig {
            name: Some("m".into()),
            spec: ModelSpec::Dense {
                drift: vec![vec![-1.0, 0.1 + 0.2], vec![1e-300, -std::f64::consts::PI]],
                i_factor: vec![vec![1.0 / 3.0], vec![2.0f64.sqrt()]],
            },
            tolerances: Some(ToleranceOverrides {
                quad: Some(1e-11),
                ..Default::default()
            }),
            times: vec![0.1, 1.0],
        };
        let back = ModelConfig::from_json(&cfg.to_json().unwrap()).unwrap();
        assert_eq!(back, cfg);
        let m = back.build(&Tolerances::default()).unwrap();
        assert_eq!(m.drift()[(0, 1)], 0.1 + 0.2);
        assert_eq!(m.noise()[(1, 0)], 2.0f64.sqrt());
    }

    #[test]
    fn diagonal_and_builtin_configs() {
        let text =
            r#"{"kind":"diagonal","q":{"power_law":{"c":1,"p":2}},"a":{"list":[1,2,3]},"N":3}"#;
        let m = ModelConfig::from_json(text)
            .unwrap()
            .build(&Tolerances::default())
            .unwrap();
        assert_eq!(m.dim(), 3);
        assert_eq!(m.drift()[(2, 2)], -3.0);
        let text = r#"{"kind":"builtin","builtin":"paper-2x2"}"#;
        let m = ModelConfig::from_json(text)
            .unwrap()
            .build(&Tolerances::default())
            .unwrap();
        assert_eq!(m.name(), "paper-2x2");
    }

    #[test]
    fn ragged_matrix_rejected() {
        let text = r#"{"kind":"dense","A":[[1,2],[3]],"i_factor":[[1],[0]]}"#;
        let err = ModelConfig::from_json(text)
            .unwrap()
            .build(&Tolerances::default())
            .unwrap_err();
        assert!(err.is_input_error());
    }

    #[test]
    fn model_round_trip_is_exact() {
        let m = crate::builders::build_paper_2x2();
        let cfg = ModelConfig::from_json(&ModelConfig::from_model(&m).to_json().unwrap()).unwrap();
        let back = cfg.build(&Tolerances::default()).unwrap();
        assert_eq!(back.drift(), m.drift());
        assert_eq!(back.noise(), m.noise());
    }

    #[test]
    fn csv_format() {
        let s = csv_string(
            &state_header(&["t"], 2),
            vec![vec![0.0, 0.1, f64::INFINITY], vec![1.5, -2e-20, 3.0]],
        );
        assert_eq!(s, "t,x_1,x_2\n0.0,0.1,inf\n1.5,-2e-20,3.0\n");
        let (h, rows) = parse_csv(&s).unwrap();
        assert_eq!(h.len(), 3);
        assert_eq!(rows[1][1], -2e-20);
        assert!(rows[0][2].is_infinite());
    }

    #[test]
    fn extended_float_round_trip() {
        #[derive(Serialize, Deserialize)]
        struct W(#[serde(with = "extended_float")] f64);
        for v in [1.5, f64::INFINITY, f64::NEG_INFINITY] {
            let s = serde_json::to_string(&W(v)).unwrap();
            assert_eq!(serde_json::from_str::<W>(&s).unwrap().0, v);
        }
        assert_eq!(serde_json::to_string(&W(f64::INFINITY)).unwrap(), "\"inf\"");
    }

    #[test]
    fn atomic_write_replaces() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("out.txt");
        write_atomic(&p, b"one").unwrap();
        write_atomic(&p, b"two").unwrap();
        assert_eq!(std::fs::read_to_string(&p).unwrap(), "two");
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
    }
}
