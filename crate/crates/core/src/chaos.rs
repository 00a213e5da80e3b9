//! Second quantization on truncated Wiener chaos. In whitened coordinates
//! `u ~ N(0, I_m)` of the invariant measure, the transition operator is
//! `P(t) f(u) = E f(C(t) u + sqrt(I - C C^T) xi)`, block diagonal in the
//! orthonormal Hermite basis `phi_alpha = He_alpha / sqrt(alpha!)`.

use std::collections::HashMap;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::Tolerances;
use crate::covariance::invariant_covariance;
use crate::error::{OuError, Result};
use crate::linalg::{
    scale_columns, spectral_norm, ComplexEigen, ExpmFamily, Mat, PsdSplit, Vector,
};
use crate::model::OuModel;
use crate::poly::{factorial, hermite, Exponents, Poly};

/// Largest admissible dimension of one chaos block.
pub const MAX_BLOCK_DIM: usize = 10_000;

/// Orthonormal coordinates of the invariant covariance: `Q_inf = U Lambda U^T`
/// rank-truncated, `x = U Lambda^{1/2} u`.
#[derive(Debug, Clone)]
pub struct Whitening {
    basis: Mat,
    sqrt_values: Vector,
    drift: Mat,
    family: ExpmFamily,
}

impl Whitening {
    pub fn new(model: &OuModel, q_infinity: &Mat, tol: &Tolerances) -> Result<Self> {
        let split = PsdSplit::new(q_infinity, tol);
        if split.rank() == 0 {
            return Err(OuError::Unsupported(
                "invariant covariance is zero; no chaos to build".into(),
            ));
        }
        let sqrt_values = split.values.map(f64::sqrt);
        let inv_sqrt = sqrt_values.map(|v| 1.0 / v);
        let basis = split.range;
        let a = model.drift();
        let left = scale_columns(&basis, &inv_sqrt).transpose();
        let right = scale_columns(&basis, &sqrt_values);
        let drift = &left * a * &right;
        Ok(Self {
            basis,
            sqrt_values,
            drift,
            family: ExpmFamily::new(a, tol)?,
        })
    }

    /// Whitened dimension m = rank Q_inf.
    pub fn rank(&self) -> usize {
        self.sqrt_values.len()
    }

    /// The drift in whitened coordinates.
    pub fn drift(&self) -> &Mat {
        &self.drift
    }

    /// `U Lambda^{1/2}` (n x m), mapping whitened to state coordinates.
    pub fn embedding(&self) -> Mat {
        scale_columns(&self.basis, &self.sqrt_values)
    }

    /// `Lambda^{-1/2} U^T` (m x n).
    pub fn projection(&self) -> Mat {
        scale_columns(&self.basis, &self.sqrt_values.map(|v| 1.0 / v)).transpose()
    }

    pub fn to_whitened(&self, x: &Vector) -> Vector {
        self.projection() * x
    }

    /// The semigroup restricted to the invariant space, in whitened coordinates.
    pub fn c_of_t(&self, t: f64) -> Result<Mat> {
        let s = self.family.at(t)?;
        Ok(self.projection() * s * self.embedding())
    }

    /// A state-space polynomial in the whitened variables.
    pub fn pull_back(&self, p: &Poly) -> Result<Poly> {
        p.compose_affine(&self.embedding(), None)
    }
}

pub fn whiten(model: &OuModel, tol: &Tolerances) -> Result<Whitening> {
    model.ensure_dense()?;
    let inv = invariant_covariance(model, tol)?;
    Whitening::new(model, &inv.matrix, tol)
}

/// Multi-indices `|alpha| <= K` over m variables, grouped by order and in
/// graded lexicographic order (descending exponent vectors) within an order.
#[derive(Debug, Clone)]
pub struct ChaosBasis {
    dim: usize,
    max_order: usize,
    orders: Vec<Vec<Exponents>>,
    lookup: Vec<HashMap<Exponents, usize>>,
}

impl ChaosBasis {
    pub fn new(dim: usize, max_order: usize) -> Result<Self> {
        if dim == 0 {
            return Err(OuError::InvalidInput(
                "chaos basis needs at least one variable".into(),
            ));
        }
        let mut orders = Vec::with_capacity(max_order + 1);
        let mut lookup = Vec::with_capacity(max_order + 1);
        for k in 0..=max_order {
            let size = binomial(dim + k - 1, k);
            if size > MAX_BLOCK_DIM as f64 {
                return Err(OuError::Unsupported(format!(
                    "chaos block of order {k} in dimension {dim} has {size} elements (cap {MAX_BLOCK_DIM})"
                )));
            }
            let mut block = Vec::with_capacity(size as usize);
            compositions(k as u32, dim, &mut Vec::with_capacity(dim), &mut block);
            lookup.push(
                block
                    .iter()
                    .cloned()
                    .enumerate()
                    .map(|(i, a)| (a, i))
                    .collect(),
            );
            orders.push(block);
        }
        Ok(Self {
            dim,
            max_order,
            orders,
            lookup,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn max_order(&self) -> usize {
        self.max_order
    }

    pub fn block(&self, k: usize) -> &[Exponents] {
        &self.orders[k]
    }

    pub fn block_dim(&self, k: usize) -> usize {
        self.orders[k].len()
    }

    pub fn len(&self) -> usize {
        self.orders.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// All multi-indices, order by order.
    pub fn multi_indices(&self) -> impl Iterator<Item = &Exponents> {
        self.orders.iter().flatten()
    }

    pub fn position(&self, alpha: &[u32]) -> Option<(usize, usize)> {
        let k: u32 = alpha.iter().sum();
        let k = k as usize;
        if k > self.max_order || alpha.len() != self.dim {
            return None;
        }
        self.lookup[k].get(alpha).map(|&p| (k, p))
    }

    /// `1 / sqrt(alpha!)`
    pub fn normalization(alpha: &[u32]) -> f64 {
        1.0 / multi_factorial(alpha).sqrt()
    }

    /// `phi_alpha(u)`
    pub fn evaluate(alpha: &[u32], u: &[f64]) -> f64 {
        alpha
            .iter()
            .zip(u)
            .map(|(&k, &x)| hermite(k, x))
            .product::<f64>()
            * Self::normalization(alpha)
    }

    /// Coefficients of `p` (a polynomial in the whitened variables) in the
    /// basis `phi_alpha`, block by block.
    pub fn expand(&self, p: &Poly) -> Result<Vec<Vector>> {
        if p.nvars() != self.dim {
            return Err(OuError::dims(
                format!("polynomial in {} variables", self.dim),
                p.nvars().to_string(),
            ));
        }
        if p.degree() as usize > self.max_order {
            return Err(OuError::InvalidInput(format!(
                "polynomial degree {} exceeds chaos order {}",
                p.degree(),
                self.max_order
            )));
        }
        let mut out: Vec<Vector> = (0..=self.max_order)
            .map(|k| Vector::zeros(self.block_dim(k)))
            .collect();
        for (beta, c) in p.to_hermite() {
            let (k, pos) = self.position(&beta).expect("degree checked");
            out[k][pos] += c * multi_factorial(&beta).sqrt();
        }
        Ok(out)
    }

    /// `sum_alpha c_alpha phi_alpha(u)`
    pub fn synthesize(&self, coefficients: &[Vector], u: &[f64]) -> f64 {
        self.orders
            .iter()
            .zip(coefficients)
            .map(|(block, c)| {
                block
                    .iter()
                    .zip(c.iter())
                    .map(|(a, c)| c * Self::evaluate(a, u))
                    .sum::<f64>()
            })
            .sum()
    }
}

fn compositions(k: u32, parts: usize, prefix: &mut Vec<u32>, out: &mut Vec<Exponents>) {
    if parts == 1 {
        prefix.push(k);
        out.push(prefix.clone());
        prefix.pop();
        return;
    }
    for first in (0..=k).rev() {
        prefix.push(first);
        compositions(k - first, parts - 1, prefix, out);
        prefix.pop();
    }
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, j| acc * (n - j) as f64 / (j + 1) as f64)
}

fn multi_factorial(alpha: &[u32]) -> f64 {
    alpha.iter().map(|&a| factorial(a)).product()
}

/// An operator on the truncated chaos, one matrix per order.
#[derive(Debug, Clone)]
pub struct ChaosOperator {
    pub basis: ChaosBasis,
    pub blocks: Vec<Mat>,
}

impl ChaosOperator {
    pub fn block(&self, k: usize) -> &Mat {
        &self.blocks[k]
    }

    pub fn block_norm(&self, k: usize) -> f64 {
        spectral_norm(&self.blocks[k])
    }

    /// max over blocks of |G - G^T|_F / max(1, |G|_F)
    pub fn symmetry_defect(&self) -> f64 {
        self.blocks
            .iter()
            .map(|g| (g - g.transpose()).norm() / g.norm().max(1.0))
            .fold(0.0, f64::max)
    }

    /// Blockwise product `self * other`.
    pub fn compose(&self, other: &ChaosOperator) -> Result<ChaosOperator> {
        if self.blocks.len() != other.blocks.len() || self.basis.dim() != other.basis.dim() {
            return Err(OuError::dims(
                "operators on the same chaos basis",
                "different bases",
            ));
        }
        Ok(ChaosOperator {
            basis: self.basis.clone(),
            blocks: self
                .blocks
                .iter()
                .zip(&other.blocks)
                .map(|(a, b)| a * b)
                .collect(),
        })
    }

    pub fn apply(&self, coefficients: &[Vector]) -> Vec<Vector> {
        self.blocks
            .iter()
            .zip(coefficients)
            .map(|(g, c)| g * c)
            .collect()
    }
}

/// Matrix of the operator sending `:prod_i (u . e_i)^{alpha_i}:` to
/// `:prod_i (u . B e_i)^{alpha_i}:` in the basis `phi`.
fn quantize(b: &Mat, basis: &ChaosBasis, derivative: bool) -> ChaosOperator {
    let m = basis.dim();
    let forms: Vec<Poly> = (0..m)
        .map(|i| Poly::linear(&b.column(i).iter().copied().collect::<Vec<_>>()))
        .collect();
    let blocks: Vec<Mat> = (0..=basis.max_order())
        .into_par_iter()
        .map(|k| {
            let idx = basis.block(k);
            let mut g = Mat::zeros(idx.len(), idx.len());
            for (col, alpha) in idx.iter().enumerate() {
                let image = if derivative {
                    let mut sum = Poly::zero(m);
                    for i in 0..m {
                        if alpha[i] > 0 {
                            let mut rest = alpha.clone();
                            rest[i] -= 1;
                            let mono = Poly::from_terms(m, [(rest, alpha[i] as f64)])
                                .expect("valid monomial");
                            sum = sum.add(&forms[i].mul(&mono));
                        }
                    }
                    sum
                } else {
                    let mut prod = Poly::constant(m, 1.0);
                    for i in 0..m {
                        if alpha[i] > 0 {
                            prod = prod.mul(&forms[i].pow(alpha[i]));
                        }
                    }
                    prod
                };
                let alpha_fact = multi_factorial(alpha);
                for (beta, c) in image.terms() {
                    let (_, row) = basis.position(beta).expect("same order");
                    g[(row, col)] = c * (multi_factorial(beta) / alpha_fact).sqrt();
                }
            }
            g
        })
        .collect();
    ChaosOperator {
        basis: basis.clone(),
        blocks,
    }
}

/// Second quantization of a contraction `B` of the whitened space.
pub fn gamma_operator(b: &Mat, basis: &ChaosBasis) -> Result<ChaosOperator> {
    let m = basis.dim();
    if b.shape() != (m, m) {
        return Err(OuError::dims(
            format!("{m}x{m}"),
            format!("{}x{}", b.nrows(), b.ncols()),
        ));
    }
    let norm = spectral_norm(b);
    if norm > 1.0 + 1e-8 {
        return Err(OuError::InvalidInput(format!(
            "second quantization needs a contraction (norm {norm})"
        )));
    }
    Ok(quantize(b, basis, false))
}

/// `dGamma(B) = d/dh Gamma(e^{hB})` at h = 0.
pub fn gamma_derivative(b: &Mat, basis: &ChaosBasis) -> Result<ChaosOperator> {
    let m = basis.dim();
    if b.shape() != (m, m) {
        return Err(OuError::dims(
            format!("{m}x{m}"),
            format!("{}x{}", b.nrows(), b.ncols()),
        ));
    }
    Ok(quantize(b, basis, true))
}

/// `P(t) = Gamma(C(t)^T)` up to chaos order `max_order`.
pub fn transition_chaos(
    model: &OuModel,
    t: f64,
    max_order: usize,
    tol: &Tolerances,
) -> Result<ChaosOperator> {
    let w = whiten(model, tol)?;
    transition_chaos_whitened(&w, t, max_order)
}

pub fn transition_chaos_whitened(w: &Whitening, t: f64, max_order: usize) -> Result<ChaosOperator> {
    let basis = ChaosBasis::new(w.rank(), max_order)?;
    gamma_operator(&w.c_of_t(t)?.transpose(), &basis)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SpectrumMethod {
    /// Sums of eigenvalues of the whitened drift.
    SumRule,
    /// Eigenvalues of the blocks of dGamma; used when the drift is defective.
    BlockEigenvalues,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GeneratorSpectrum {
    /// One value per basis element, in basis order for the sum rule.
    pub values: Vec<Complex64>,
    /// `-max Re` over orders >= 1.
    pub gap: f64,
    pub method: SpectrumMethod,
    /// Set when the values come from a numerical eigensolve of the blocks.
    pub flagged: bool,
}

pub fn generator_spectrum_chaos(
    model: &OuModel,
    max_order: usize,
    tol: &Tolerances,
) -> Result<GeneratorSpectrum> {
    let w = whiten(model, tol)?;
    generator_spectrum_whitened(&w, max_order, tol)
}

pub fn generator_spectrum_whitened(
    w: &Whitening,
    max_order: usize,
    tol: &Tolerances,
) -> Result<GeneratorSpectrum> {
    let basis = ChaosBasis::new(w.rank(), max_order)?;
    let eig = ComplexEigen::new(w.drift())?;
    let mut values = Vec::with_capacity(basis.len());
    let method = if eig.condition < tol.eig_cond_max {
        for alpha in basis.multi_indices() {
            values.push(
                alpha
                    .iter()
                    .zip(&eig.values)
                    .map(|(&k, l)| l * k as f64)
                    .sum::<Complex64>(),
            );
        }
        SpectrumMethod::SumRule
    } else {
        let gen = gamma_derivative(&w.drift().transpose(), &basis)?;
        for block in &gen.blocks {
            values.extend(ComplexEigen::new(block)?.values);
        }
        SpectrumMethod::BlockEigenvalues
    };
    let gap = -values[1..]
        .iter()
        .map(|v| v.re)
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(GeneratorSpectrum {
        values,
        gap,
        method,
        flagged: method == SpectrumMethod::BlockEigenvalues,
    })
}
