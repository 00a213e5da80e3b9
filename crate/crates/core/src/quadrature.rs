//! Composite Gauss-Legendre quadrature with panel doubling.

use crate::error::{OuError, Result};
use crate::linalg::{Mat, Vector};

pub const NODES_PER_PANEL: usize = 16;

/// Values that can be integrated: scalars and matrices.
pub trait Integrand: Clone {
    fn scaled(&self, w: f64) -> Self;
    fn add_assign(&mut self, other: &Self);
    fn distance(&self, other: &Self) -> f64;
    fn magnitude(&self) -> f64;
}

impl Integrand for f64 {
    fn scaled(&self, w: f64) -> Self {
        self * w
    }
    fn add_assign(&mut self, other: &Self) {
        *self += other;
    }
    fn distance(&self, other: &Self) -> f64 {
        (self - other).abs()
    }
    fn magnitude(&self) -> f64 {
        self.abs()
    }
}

impl Integrand for Mat {
    fn scaled(&self, w: f64) -> Self {
        self * w
    }
    fn add_assign(&mut self, other: &Self) {
        *self += other;
    }
    fn distance(&self, other: &Self) -> f64 {
        (self - other).norm()
    }
    fn magnitude(&self) -> f64 {
        self.norm()
    }
}

impl Integrand for Vector {
    fn scaled(&self, w: f64) -> Self {
        self * w
    }
    fn add_assign(&mut self, other: &Self) {
        *self += other;
    }
    fn distance(&self, other: &Self) -> f64 {
        (self - other).norm()
    }
    fn magnitude(&self) -> f64 {
        self.norm()
    }
}

/// Nodes and weights on [-1, 1].
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    /// Roots of P_n by Newton iteration from the Chebyshev-like initial guess.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "Gauss-Legendre needs at least one node");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let nf = n as f64;
        for k in 0..n.div_ceil(2) {
            let mut x = (std::f64::consts::PI * (k as f64 + 0.75) / (nf + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(n, x);
            dp = if d != 0.0 { d } else { dp };
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[k] = -x;
            nodes[n - 1 - k] = x;
            weights[k] = w;
            weights[n - 1 - k] = w;
        }
        Self { nodes, weights }
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Composite rule over `panels` equal panels of [a, b].
    pub fn composite<T: Integrand>(
        &self,
        f: &mut impl FnMut(f64) -> Result<T>,
        a: f64,
        b: f64,
        panels: usize,
    ) -> Result<T> {
        let h = (b - a) / panels as f64;
        let mut total: Option<T> = None;
        for p in 0..panels {
            let lo = a + h * p as f64;
            let mid = lo + 0.5 * h;
            for (x, w) in self.nodes.iter().zip(&self.weights) {
                let value = f(mid + 0.5 * h * x)?.scaled(0.5 * h * w);
                match &mut total {
                    Some(acc) => acc.add_assign(&value),
                    None => total = Some(value),
                }
            }
        }
        Ok(total.expect("at least one node"))
    }
}

/// (P_n(x), P_n'(x)) by the three-term recurrence.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

#[derive(Debug, Clone)]
pub struct QuadratureResult<T> {
    pub value: T,
    pub panels: usize,
    /// Difference between the last two refinements.
    pub change: f64,
}

/// Doubles the panel count until two successive composite values differ by
/// less than `tol * max(1, |value|)`.
pub fn integrate<T: Integrand>(
    mut f: impl FnMut(f64) -> Result<T>,
    a: f64,
    b: f64,
    tol: f64,
    max_doublings: u32,
) -> Result<QuadratureResult<T>> {
    if !(a.is_finite() && b.is_finite()) || b < a {
        return Err(OuError::InvalidInput(format!(
            "invalid integration interval [{a}, {b}]"
        )));
    }
    let rule = GaussLegendre::new(NODES_PER_PANEL);
    let mut panels = 1;
    let mut prev = rule.composite(&mut f, a, b, panels)?;
    let mut change = f64::INFINITY;
    for _ in 0..max_doublings {
        panels *= 2;
        let next = rule.composite(&mut f, a, b, panels)?;
        change = next.distance(&prev);
        let done = change <= tol * next.magnitude().max(1.0);
        prev = next;
        if done {
            return Ok(QuadratureResult {
                value: prev,
                panels,
                change,
            });
        }
    }
    Err(OuError::QuadratureNotConverged {
        panels,
        achieved: change,
    })
}

/// Integral over [0, t] of an integrand varying on the time scale
/// `1 / rate`: breakpoints `t / 2^k` resolve the layer near 0, then each
/// piece is integrated with [`integrate`] and the pieces are summed.
pub fn integrate_graded<T: Integrand>(
    mut f: impl FnMut(f64) -> Result<T>,
    t: f64,
    rate: f64,
    tol: f64,
    max_doublings: u32,
) -> Result<QuadratureResult<T>> {
    if !(t.is_finite() && t > 0.0) {
        return Err(OuError::InvalidInput(format!(
            "integration horizon must be finite and > 0, got {t}"
        )));
    }
    let levels = if rate.is_finite() && rate * t > 1.0 {
        (rate * t).log2().ceil().min(60.0) as i32
    } else {
        0
    };
    let mut breaks = vec![0.0];
    for k in (0..levels).rev() {
        breaks.push(t / 2f64.powi(k + 1));
    }
    breaks.push(t);
    let mut total: Option<T> = None;
    let mut panels = 0;
    let mut change = 0.0;
    for w in breaks.windows(2) {
        let piece = integrate(&mut f, w[0], w[1], tol, max_doublings)?;
        panels += piece.panels;
        change += piece.change;
        match &mut total {
            Some(acc) => acc.add_assign(&piece.value),
            None => total = Some(piece.value),
        }
    }
    Ok(QuadratureResult {
        value: total.expect("at least one piece"),
        panels,
        change,
    })
}
