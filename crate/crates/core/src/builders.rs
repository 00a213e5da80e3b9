//! Builders for the reference models and the named builtins used by the CLI.

use serde::{Deserialize, Serialize};

use crate::config::Tolerances;
use crate::error::{OuError, Result};
use crate::linalg::Mat;
use crate::model::{ModelKind, OuModel};

/// Rule generating a positive sequence indexed from n = 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SequenceRule {
    /// Explicit values; must have at least N entries.
    List(Vec<f64>),
    /// c * n^{-p}
    PowerLaw { c: f64, p: f64 },
    /// c * (n pi)^{-p}
    PiPowerLaw { c: f64, p: f64 },
}

impl SequenceRule {
    pub fn materialize(&self, n: usize) -> Result<Vec<f64>> {
        let values: Vec<f64> = match self {
            SequenceRule::List(v) => {
                if v.len() < n {
                    return Err(OuError::InvalidInput(format!(
                        "sequence list has {} entries, truncation needs {n}",
                        v.len()
                    )));
                }
                v[..n].to_vec()
            }
            SequenceRule::PowerLaw { c, p } => (1..=n).map(|k| c * (k as f64).powf(-p)).collect(),
            SequenceRule::PiPowerLaw { c, p } => (1..=n)
                .map(|k| c * (k as f64 * std::f64::consts::PI).powf(-p))
                .collect(),
        };
        if let Some(bad) = values.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
            return Err(OuError::InvalidInput(format!(
                "sequence values must be finite and > 0 (found {bad})"
            )));
        }
        Ok(values)
    }
}

/// `A = [[-1, 1], [0, -1]]`, `i = (0, 1)^T`: a Jordan drift driven through its
/// second coordinate only.
pub fn build_paper_2x2() -> OuModel {
    let a = Mat::from_row_slice(2, 2, &[-1.0, 1.0, 0.0, -1.0]);
    let i = Mat::from_row_slice(2, 1, &[0.0, 1.0]);
    OuModel::new("paper-2x2", a, i, &Tolerances::default())
        .expect("reference model is valid")
        .with_kind(ModelKind::Builtin)
}

/// `A = diag(-a_n)`, `Q = diag(q_n)` for `n = 1..=N`.
pub fn build_diagonal(q: &SequenceRule, a: &SequenceRule, truncation: usize) -> Result<OuModel> {
    if truncation == 0 {
        return Err(OuError::InvalidInput("truncation N must be >= 1".into()));
    }
    let q = q.materialize(truncation)?;
    let a = a.materialize(truncation)?;
    OuModel::diagonal(format!("diagonal-N{truncation}"), q, a)
}

/// Spectral truncation of the Dirichlet Laplacian on (0, 1) with noise of
/// Sobolev smoothness beta: `a_n = (n pi)^2`, `q_n = (n pi)^{-2 beta}`.
pub fn build_heat_spectral(beta: f64, truncation: usize) -> Result<OuModel> {
    if !(beta.is_finite() && beta >= 0.0) {
        return Err(OuError::InvalidInput(format!(
            "beta must be finite and >= 0, got {beta}"
        )));
    }
    let q = SequenceRule::PiPowerLaw {
        c: 1.0,
        p: 2.0 * beta,
    };
    let a = SequenceRule::PiPowerLaw { c: 1.0, p: -2.0 };
    let mut model = build_diagonal(&q, &a, truncation)?;
    let dimension = 1.0;
    let threshold = dimension / 4.0 - 0.5;
    let meta = model.meta_mut();
    meta.parameters.insert("beta".into(), beta);
    meta.parameters
        .insert("spatial_dimension".into(), dimension);
    meta.parameters.insert("beta_threshold".into(), threshold);
    meta.notes.push(format!(
        "beta > d/4 - 1/2 = {threshold}: {}",
        if beta > threshold {
            "satisfied"
        } else {
            "violated"
        }
    ));
    Ok(model.with_name(format!("heat-beta{beta}-N{truncation}")))
}

/// Names accepted by [`builtin`].
pub const BUILTINS: &[(&str, &str)] = &[
    (
        "paper-2x2",
        "Jordan drift [[-1,1],[0,-1]] with noise along e2; not analytic, no spectral gap",
    ),
    (
        "diag-hmu-fails",
        "q_n = n^-2, a_n = n^-1, N = 10000: HQinf and Hmu_t hold, Hmu_inf fails",
    ),
    (
        "diag-cubic",
        "q_n = n^-3, a_n = n^-1, N = 200: trace Q_inf -> pi^2/12",
    ),
    (
        "heat-beta0",
        "heat equation spectral truncation, beta = 0, N = 50",
    ),
    (
        "heat-beta1",
        "heat equation spectral truncation, beta = 1, N = 50",
    ),
    (
        "decoupled",
        "A = -I_2 with noise in the first coordinate only; not strong Feller",
    ),
];

pub fn builtin(name: &str) -> Result<OuModel> {
    let power = |p: f64| SequenceRule::PowerLaw { c: 1.0, p };
    let model = match name {
        "paper-2x2" => return Ok(build_paper_2x2()),
        "diag-hmu-fails" => build_diagonal(&power(2.0), &power(1.0), 10_000)?,
        "diag-cubic" => build_diagonal(&power(3.0), &power(1.0), 200)?,
        "heat-beta0" => build_heat_spectral(0.0, 50)?,
        "heat-beta1" => build_heat_spectral(1.0, 50)?,
        "decoupled" => OuModel::new(
            "decoupled",
            -Mat::identity(2, 2),
            Mat::from_row_slice(2, 1, &[1.0, 0.0]),
            &Tolerances::default(),
        )?,
        other => {
            let known: Vec<&str> = BUILTINS.iter().map(|(n, _)| *n).collect();
            return Err(OuError::InvalidInput(format!(
                "unknown builtin '{other}' (known: {})",
                known.join(", ")
            )));
        }
    };
    Ok(model.with_name(name).with_kind(ModelKind::Builtin))
}
