//! Sparse multivariate polynomials with real coefficients, Gaussian moments
//! by Isserlis pairing, and conversion to probabilists' Hermite polynomials.

use std::collections::btree_map::Entry;
use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{OuError, Result};
use crate::linalg::{Mat, Vector};

pub type Exponents = Vec<u32>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Poly {
    nvars: usize,
    terms: BTreeMap<Exponents, f64>,
}

impl Poly {
    pub fn zero(nvars: usize) -> Self {
        Self {
            nvars,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(nvars: usize, c: f64) -> Self {
        let mut p = Self::zero(nvars);
        p.add_term(vec![0; nvars], c);
        p
    }

    pub fn var(nvars: usize, k: usize) -> Self {
        let mut e = vec![0; nvars];
        e[k] = 1;
        let mut p = Self::zero(nvars);
        p.add_term(e, 1.0);
        p
    }

    /// `sum_k coeffs[k] x_k`
    pub fn linear(coeffs: &[f64]) -> Self {
        let n = coeffs.len();
        let mut p = Self::zero(n);
        for (k, &c) in coeffs.iter().enumerate() {
            let mut e = vec![0; n];
            e[k] = 1;
            p.add_term(e, c);
        }
        p
    }

    /// Builds from (exponents, coefficient) pairs; repeated exponents add up.
    pub fn from_terms(
        nvars: usize,
        terms: impl IntoIterator<Item = (Exponents, f64)>,
    ) -> Result<Self> {
        let mut p = Self::zero(nvars);
        for (e, c) in terms {
            if e.len() != nvars {
                return Err(OuError::dims(
                    format!("{nvars} exponents"),
                    e.len().to_string(),
                ));
            }
            if !c.is_finite() {
                return Err(OuError::InvalidInput(
                    "polynomial coefficients must be finite".into(),
                ));
            }
            p.add_term(e, c);
        }
        Ok(p)
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Exponents, f64)> {
        self.terms.iter().map(|(e, c)| (e, *c))
    }

    pub fn coefficient(&self, e: &[u32]) -> f64 {
        self.terms.get(e).copied().unwrap_or(0.0)
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn degree(&self) -> u32 {
        self.terms.keys().map(|e| e.iter().sum()).max().unwrap_or(0)
    }

    fn add_term(&mut self, e: Exponents, c: f64) {
        if c == 0.0 {
            return;
        }
        match self.terms.entry(e) {
            Entry::Occupied(mut o) => {
                *o.get_mut() += c;
                if *o.get() == 0.0 {
                    o.remove();
                }
            }
            Entry::Vacant(v) => {
                v.insert(c);
            }
        }
    }

    pub fn add(&self, other: &Poly) -> Poly {
        let mut out = self.clone();
        for (e, c) in &other.terms {
            out.add_term(e.clone(), *c);
        }
        out
    }

    pub fn scale(&self, s: f64) -> Poly {
        let mut out = Poly::zero(self.nvars);
        for (e, c) in &self.terms {
            out.add_term(e.clone(), c * s);
        }
        out
    }

    pub fn mul(&self, other: &Poly) -> Poly {
        let mut out = Poly::zero(self.nvars);
        for (ea, ca) in &self.terms {
            for (eb, cb) in &other.terms {
                let e: Exponents = ea.iter().zip(eb).map(|(a, b)| a + b).collect();
                out.add_term(e, ca * cb);
            }
        }
        out
    }

    pub fn pow(&self, k: u32) -> Poly {
        let mut out = Poly::constant(self.nvars, 1.0);
        for _ in 0..k {
            out = out.mul(self);
        }
        out
    }

    /// d/dx_k
    pub fn derivative(&self, k: usize) -> Poly {
        let mut out = Poly::zero(self.nvars);
        for (e, c) in &self.terms {
            if e[k] > 0 {
                let mut d = e.clone();
                d[k] -= 1;
                out.add_term(d, c * e[k] as f64);
            }
        }
        out
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|(e, c)| {
                c * e
                    .iter()
                    .zip(x)
                    .map(|(&p, &v)| v.powi(p as i32))
                    .product::<f64>()
            })
            .sum()
    }

    /// `p(M y + shift)` as a polynomial in `y`, where `M` has one row per
    /// variable of `p`.
    pub fn compose_affine(&self, m: &Mat, shift: Option<&Vector>) -> Result<Poly> {
        if m.nrows() != self.nvars || shift.is_some_and(|s| s.len() != self.nvars) {
            return Err(OuError::dims(
                format!("substitution with {} rows", self.nvars),
                format!("{}", m.nrows()),
            ));
        }
        let ny = m.ncols();
        let forms: Vec<Poly> = (0..self.nvars)
            .map(|k| {
                let lin = Poly::linear(&m.row(k).iter().copied().collect::<Vec<_>>());
                match shift {
                    Some(s) => lin.add(&Poly::constant(ny, s[k])),
                    None => lin,
                }
            })
            .collect();
        let mut out = Poly::zero(ny);
        for (e, c) in &self.terms {
            let mut term = Poly::constant(ny, *c);
            for (k, &p) in e.iter().enumerate() {
                if p > 0 {
                    term = term.mul(&forms[k].pow(p));
                }
            }
            out = out.add(&term);
        }
        Ok(out)
    }

    /// `E p(Z)` for `Z ~ N(mean, cov)`.
    pub fn gaussian_expectation(&self, mean: &Vector, cov: &Mat) -> Result<f64> {
        let n = self.nvars;
        if mean.len() != n || cov.shape() != (n, n) {
            return Err(OuError::dims(
                format!("Gaussian in dimension {n}"),
                format!("{}", mean.len()),
            ));
        }
        let centered = self.compose_affine(&Mat::identity(n, n), Some(mean))?;
        Ok(centered
            .terms
            .iter()
            .map(|(e, c)| c * centered_moment(e, cov))
            .sum())
    }

    /// Integrates out the trailing `cov.nrows()` variables against a centered
    /// Gaussian with covariance `cov`, leaving a polynomial in the leading ones.
    pub fn expect_trailing(&self, cov: &Mat) -> Result<Poly> {
        let k = cov.nrows();
        if k > self.nvars || cov.ncols() != k {
            return Err(OuError::dims(
                format!("at most {} integrated variables", self.nvars),
                k.to_string(),
            ));
        }
        let keep = self.nvars - k;
        let mut out = Poly::zero(keep);
        for (e, c) in &self.terms {
            let m = centered_moment(&e[keep..], cov);
            out.add_term(e[..keep].to_vec(), c * m);
        }
        Ok(out)
    }

    /// Appends `extra` variables that do not occur.
    pub fn extend_vars(&self, extra: usize) -> Poly {
        let mut out = Poly::zero(self.nvars + extra);
        for (e, c) in &self.terms {
            let mut f = e.clone();
            f.extend(std::iter::repeat_n(0, extra));
            out.add_term(f, *c);
        }
        out
    }

    /// Coefficients in the basis `He_beta(x) = prod_k He_{beta_k}(x_k)`.
    pub fn to_hermite(&self) -> BTreeMap<Exponents, f64> {
        let mut out: BTreeMap<Exponents, f64> = BTreeMap::new();
        for (e, c) in &self.terms {
            let mut partial: Vec<(Exponents, f64)> = vec![(Vec::with_capacity(self.nvars), *c)];
            for &p in e {
                let expansion = monomial_to_hermite(p);
                let mut next = Vec::with_capacity(partial.len() * expansion.len());
                for (idx, coef) in &partial {
                    for &(deg, w) in &expansion {
                        let mut j = idx.clone();
                        j.push(deg);
                        next.push((j, coef * w));
                    }
                }
                partial = next;
            }
            for (j, w) in partial {
                *out.entry(j).or_insert(0.0) += w;
            }
        }
        out.retain(|_, v| *v != 0.0);
        out
    }
}

/// `x^k = sum_j k! / (2^j j! (k-2j)!) He_{k-2j}(x)`
fn monomial_to_hermite(k: u32) -> Vec<(u32, f64)> {
    (0..=k / 2)
        .map(|j| {
            let w = factorial(k) / (2f64.powi(j as i32) * factorial(j) * factorial(k - 2 * j));
            (k - 2 * j, w)
        })
        .collect()
}

pub fn factorial(k: u32) -> f64 {
    (1..=k).map(f64::from).product()
}

/// Probabilists' Hermite polynomial `He_k(x)`.
pub fn hermite(k: u32, x: f64) -> f64 {
    let (mut h0, mut h1) = (1.0, x);
    if k == 0 {
        return 1.0;
    }
    for j in 1..k {
        let h2 = x * h1 - j as f64 * h0;
        h0 = h1;
        h1 = h2;
    }
    h1
}

/// `E prod_k Z_k^{e_k}` for `Z ~ N(0, cov)`, summing over perfect pairings.
pub fn centered_moment(e: &[u32], cov: &Mat) -> f64 {
    let mut idx: Vec<usize> = Vec::new();
    for (k, &p) in e.iter().enumerate() {
        idx.extend(std::iter::repeat_n(k, p as usize));
    }
    if idx.len() % 2 == 1 {
        return 0.0;
    }
    pairings(&mut idx, cov)
}

fn pairings(idx: &mut Vec<usize>, cov: &Mat) -> f64 {
    if idx.is_empty() {
        return 1.0;
    }
    let first = idx.remove(0);
    let mut total = 0.0;
    for j in 0..idx.len() {
        let partner = idx.remove(j);
        let c = cov[(first, partner)];
        if c != 0.0 {
            total += c * pairings(idx, cov);
        }
        idx.insert(j, partner);
    }
    idx.insert(0, first);
    total
}
