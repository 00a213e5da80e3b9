//! The Ornstein-Uhlenbeck model `dX = AX dt + dW_H`: a drift matrix `A` and an
//! injective noise embedding `i` with `Q = i i^T`.

use std::collections::BTreeMap;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::config::Tolerances;
use crate::error::{OuError, Result};
use crate::linalg::{ensure_finite, ensure_square, expm, Mat, Vector};

/// Dense operations refuse models above this dimension.
pub const MAX_DENSE_DIM: usize = 2000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Dense,
    Diagonal,
    Builtin,
}

/// `A = diag(-a_n)`, `i = diag(sqrt(q_n))`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagonalData {
    pub q: Vec<f64>,
    pub a: Vec<f64>,
}

/// Series verdicts of a diagonal model at its truncation, with the doubling
/// increments used to extrapolate past it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesVerdicts {
    pub truncation: usize,
    /// sup q_n / a_n
    pub sup_q_over_a: f64,
    /// sup over the first half of the truncation
    pub sup_q_over_a_half: f64,
    /// sum q_n (trace of Q)
    pub sum_q: f64,
    /// sum q_n / a_n (twice the trace of Q_inf)
    pub sum_q_over_a: f64,
    /// partial sum of q_n / a_n up to N/2
    pub sum_q_over_a_half: f64,
    pub hq_infinity: bool,
    pub hmu_t: bool,
    pub hmu_infinity: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ModelMeta {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truncation: Option<usize>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub parameters: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub series: Option<SeriesVerdicts>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct OuModel {
    name: String,
    kind: ModelKind,
    n: usize,
    m: usize,
    diagonal: Option<DiagonalData>,
    drift: OnceLock<Mat>,
    noise: OnceLock<Mat>,
    covariance: OnceLock<Mat>,
    meta: ModelMeta,
}

impl OuModel {
    /// Dense model from a drift `A` (n x n) and noise factor `i` (n x m).
    pub fn new(name: impl Into<String>, drift: Mat, noise: Mat, tol: &Tolerances) -> Result<Self> {
        let n = ensure_square(&drift, "drift A")?;
        ensure_finite(&drift, "drift A")?;
        ensure_finite(&noise, "noise factor i")?;
        if noise.nrows() != n || noise.ncols() == 0 {
            return Err(OuError::dims(
                format!("noise factor with {n} rows and at least one column"),
                format!("{}x{}", noise.nrows(), noise.ncols()),
            ));
        }
        check_injective(&noise, tol)?;
        let m = noise.ncols();
        Ok(Self {
            name: name.into(),
            kind: ModelKind::Dense,
            n,
            m,
            diagonal: None,
            drift: OnceLock::from(drift),
            noise: OnceLock::from(noise),
            covariance: OnceLock::new(),
            meta: ModelMeta::default(),
        })
    }

    /// Diagonal model `A = diag(-a_n)`, `Q = diag(q_n)`; dense matrices are only
    /// materialized on first use.
    pub fn diagonal(name: impl Into<String>, q: Vec<f64>, a: Vec<f64>) -> Result<Self> {
        if q.is_empty() || q.len() != a.len() {
            return Err(OuError::dims(
                "equal nonempty q and a sequences",
                format!("{} and {}", q.len(), a.len()),
            ));
        }
        if let Some(bad) = q.iter().chain(&a).find(|v| !(v.is_finite() && **v > 0.0)) {
            return Err(OuError::InvalidInput(format!(
                "diagonal sequences must be finite and > 0 (found {bad})"
            )));
        }
        let n = q.len();
        let series = SeriesVerdicts::compute(&q, &a);
        Ok(Self {
            name: name.into(),
            kind: ModelKind::Diagonal,
            n,
            m: n,
            diagonal: Some(DiagonalData { q, a }),
            drift: OnceLock::new(),
            noise: OnceLock::new(),
            covariance: OnceLock::new(),
            meta: ModelMeta {
                truncation: Some(n),
                series: Some(series),
                ..ModelMeta::default()
            },
        })
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn with_kind(mut self, kind: ModelKind) -> Self {
        self.kind = kind;
        self
    }

    pub fn with_meta(mut self, meta: ModelMeta) -> Self {
        self.meta = meta;
        self
    }

    pub fn meta_mut(&mut self) -> &mut ModelMeta {
        &mut self.meta
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn meta(&self) -> &ModelMeta {
        &self.meta
    }

    /// State dimension n.
    pub fn dim(&self) -> usize {
        self.n
    }

    /// Noise dimension m (columns of the embedding).
    pub fn noise_dim(&self) -> usize {
        self.m
    }

    pub fn diagonal_data(&self) -> Option<&DiagonalData> {
        self.diagonal.as_ref()
    }

    /// Fails for models too large for dense linear algebra.
    pub fn ensure_dense(&self) -> Result<()> {
        if self.n > MAX_DENSE_DIM {
            return Err(OuError::Unsupported(format!(
                "model '{}' has dimension {} > {MAX_DENSE_DIM}; only series verdicts are available",
                self.name, self.n
            )));
        }
        Ok(())
    }

    pub fn drift(&self) -> &Mat {
        self.drift.get_or_init(|| {
            let d = self
                .diagonal
                .as_ref()
                .expect("dense models store their drift");
            Mat::from_diagonal(&Vector::from_iterator(self.n, d.a.iter().map(|a| -a)))
        })
    }

    pub fn noise(&self) -> &Mat {
        self.noise.get_or_init(|| {
            let d = self
                .diagonal
                .as_ref()
                .expect("dense models store their noise factor");
            Mat::from_diagonal(&Vector::from_iterator(self.n, d.q.iter().map(|q| q.sqrt())))
        })
    }

    /// Q = i i^T
    pub fn covariance(&self) -> &Mat {
        self.covariance.get_or_init(|| match &self.diagonal {
            Some(d) => Mat::from_diagonal(&Vector::from_row_slice(&d.q)),
            None => {
                let i = self.noise();
                i * i.transpose()
            }
        })
    }

    /// S(t) = e^{tA}
    pub fn semigroup(&self, t: f64, tol: &Tolerances) -> Result<Mat> {
        if let Some(d) = &self.diagonal {
            if !t.is_finite() || t < 0.0 {
                return Err(OuError::InvalidInput(format!(
                    "time must be finite and >= 0, got {t}"
                )));
            }
            return Ok(Mat::from_diagonal(&Vector::from_iterator(
                self.n,
                d.a.iter().map(|a| (-a * t).exp()),
            )));
        }
        expm(self.drift(), t, tol)
    }
}

fn check_injective(noise: &Mat, tol: &Tolerances) -> Result<()> {
    let sv = crate::linalg::checked_singular_values(noise);
    let top = sv.max();
    let cutoff = tol.rank_cutoff(top, noise.nrows(), noise.ncols());
    if top == 0.0 || sv.min() <= cutoff || noise.ncols() > noise.nrows() {
        return Err(OuError::InvalidInput(format!(
            "noise factor must be injective (singular values {:?})",
            sv.as_slice()
        )));
    }
    Ok(())
}

// Doubling tests: a power-law tail n^{-p} shrinks the increment S_N - S_{N/2}
// by 2^{1-p} per doubling, a divergent series does not.
const CONVERGENT_INCREMENT_RATIO: f64 = 0.75;
const BOUNDED_SUP_RATIO: f64 = 1.1;
const MIN_EXTRAPOLATION_N: usize = 8;

impl SeriesVerdicts {
    pub fn compute(q: &[f64], a: &[f64]) -> Self {
        let n = q.len();
        let ratio: Vec<f64> = q.iter().zip(a).map(|(q, a)| q / a).collect();
        let partial = |v: &[f64], upto: usize| v[..upto].iter().sum::<f64>();
        let sup = |upto: usize| ratio[..upto].iter().copied().fold(0.0, f64::max);

        let half = (n / 2).max(1);
        let quarter = (n / 4).max(1);
        let converges = |v: &[f64]| {
            if n < MIN_EXTRAPOLATION_N {
                return true;
            }
            let d1 = partial(v, n) - partial(v, half);
            let d2 = partial(v, half) - partial(v, quarter);
            d2 <= 0.0 || d1 <= CONVERGENT_INCREMENT_RATIO * d2
        };
        let sup_full = sup(n);
        let sup_half = sup(half);
        let hq_infinity = n < MIN_EXTRAPOLATION_N || sup_full <= BOUNDED_SUP_RATIO * sup_half;
        let hmu_t = converges(q);
        Self {
            truncation: n,
            sup_q_over_a: sup_full,
            sup_q_over_a_half: sup_half,
            sum_q: partial(q, n),
            sum_q_over_a: partial(&ratio, n),
            sum_q_over_a_half: partial(&ratio, half),
            hq_infinity,
            hmu_t,
            hmu_infinity: hq_infinity && converges(&ratio),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn covariance_is_noise_outer_product() {
        let a = Mat::from_row_slice(2, 2, &[-1.0, 1.0, 0.0, -1.0]);
        let i = Mat::from_row_slice(2, 1, &[0.0, 1.0]);
        let m = OuModel::new("jordan", a, i, &Tolerances::default()).unwrap();
        assert_eq!(
            m.covariance(),
            &Mat::from_row_slice(2, 2, &[0.0, 0.0, 0.0, 1.0])
        );
        assert_eq!((m.dim(), m.noise_dim()), (2, 1));
    }

    #[test]
    fn rejects_non_injective_noise() {
        let a = -Mat::identity(2, 2);
        let i = Mat::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        assert!(OuModel::new("bad", a, i, &Tolerances::default()).is_err());
    }

    #[test]
    fn rejects_mismatched_noise_rows() {
        let a = -Mat::identity(2, 2);
        let i = Mat::identity(3, 3);
        assert!(matches!(
            OuModel::new("bad", a, i, &Tolerances::default()),
            Err(OuError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn rejects_non_finite_drift() {
        let a = Mat::from_row_slice(1, 1, &[f64::NAN]);
        assert!(OuModel::new("bad", a, Mat::identity(1, 1), &Tolerances::default()).is_err());
    }

    #[test]
    fn diagonal_materializes_lazily() {
        let m = OuModel::diagonal("d", vec![1.0, 0.25], vec![1.0, 0.5]).unwrap();
        assert_eq!(m.drift()[(1, 1)], -0.5);
        assert_eq!(m.noise()[(1, 1)], 0.5);
        let s = m.semigroup(2.0, &Tolerances::default()).unwrap();
        assert!((s[(1, 1)] - (-1.0f64).exp()).abs() < 1e-16);
    }

    #[test]
    fn diagonal_rejects_nonpositive_entries() {
        assert!(OuModel::diagonal("d", vec![1.0, 0.0], vec![1.0, 1.0]).is_err());
        assert!(OuModel::diagonal("d", vec![1.0], vec![-1.0]).is_err());
    }

    #[test]
    fn harmonic_series_flagged_divergent() {
        let n = 4096;
        let q: Vec<f64> = (1..=n).map(|k| 1.0 / (k * k) as f64).collect();
        let a: Vec<f64> = (1..=n).map(|k| 1.0 / k as f64).collect();
        let s = SeriesVerdicts::compute(&q, &a);
        assert!(s.hq_infinity && s.hmu_t && !s.hmu_infinity);
        assert!((s.sup_q_over_a - 1.0).abs() < 1e-15);
    }
}
