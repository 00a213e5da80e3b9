//! Numerical tolerances shared by every computation.
//!
//! All thresholds live in one [`Tolerances`] record so that a model file or the
//! CLI can tighten them in one place. Two named profiles exist: `default` and
//! `strict`.

use serde::{Deserialize, Serialize};
use std::str::FromStr;

use crate::error::OuError;

/// Environment variable consulted by the CLI for the default profile name.
pub const TOL_PROFILE_ENV: &str = "OULAB_TOL_PROFILE";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    /// Singular values below `rank_rel * sigma_max * max(rows, cols)` count as zero.
    pub rank_rel: f64,
    /// `y` is in range(B) iff the least-squares residual is below `membership * (1 + |y|)`.
    pub membership: f64,
    /// Relative symmetry / commutation defects below this are treated as zero.
    pub sym: f64,
    /// Relative Frobenius residual accepted from the Liapunov solver.
    pub lyap: f64,
    /// Stopping threshold for panel doubling in composite Gauss-Legendre quadrature.
    pub quad: f64,
    /// Maximum number of panel doublings before quadrature reports failure.
    pub quad_max_doublings: u32,
    /// `|a a^T - a^T a|_F <= normality * |a|_F^2` declares `a` normal.
    pub normality: f64,
    /// Constants above this are reported as +infinity (raw value kept alongside).
    pub infinity_cap: f64,
    /// Eigenvector condition numbers above this switch expm to Pade.
    pub eig_cond_max: f64,
    /// Number of angles sampled around the numerical range boundary.
    pub numrange_grid: usize,
    /// Relative trace increase below which `t -> tr Q_t` is declared to plateau.
    pub plateau: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            rank_rel: 1e-10,
            membership: 1e-8,
            sym: 1e-9,
            lyap: 1e-8,
            quad: 1e-9,
            quad_max_doublings: 12,
            normality: 1e-8,
            infinity_cap: 1e12,
            eig_cond_max: 1e6,
            numrange_grid: 720,
            plateau: 1e-6,
        }
    }
}

impl Tolerances {
    pub fn strict() -> Self {
        Self {
            rank_rel: 1e-12,
            membership: 1e-10,
            sym: 1e-11,
            lyap: 1e-10,
            quad: 1e-11,
            quad_max_doublings: 14,
            normality: 1e-10,
            infinity_cap: 1e12,
            eig_cond_max: 1e4,
            numrange_grid: 1440,
            plateau: 1e-8,
        }
    }

    pub fn for_profile(profile: Profile) -> Self {
        match profile {
            Profile::Default => Self::default(),
            Profile::Strict => Self::strict(),
        }
    }

    /// Rank cutoff for a matrix whose largest singular value is `sigma_max`.
    pub fn rank_cutoff(&self, sigma_max: f64, rows: usize, cols: usize) -> f64 {
        self.rank_rel * sigma_max * rows.max(cols) as f64
    }

    pub fn apply(&mut self, overrides: &ToleranceOverrides) {
        macro_rules! take {
            ($($field:ident),*) => {
                $(if let Some(v) = overrides.$field { self.$field = v; })*
            };
        }
        take!(
            rank_rel,
            membership,
            sym,
            lyap,
            quad,
            quad_max_doublings,
            normality,
            infinity_cap,
            eig_cond_max,
            numrange_grid,
            plateau
        );
    }
}

/// Partial tolerance record as it appears in model files.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToleranceOverrides {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rank_rel: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub membership: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sym: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lyap: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quad: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quad_max_doublings: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub normality: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub infinity_cap: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eig_cond_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub numrange_grid: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plateau: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Profile {
    #[default]
    Default,
    Strict,
}

impl FromStr for Profile {
    type Err = OuError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "default" => Ok(Profile::Default),
            "strict" => Ok(Profile::Strict),
            other => Err(OuError::InvalidInput(format!(
                "unknown tolerance profile '{other}' (expected strict|default)"
            ))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overrides_replace_only_given_fields() {
        let mut tol = Tolerances::default();
        tol.apply(&ToleranceOverrides {
            quad: Some(1e-12),
            numrange_grid: Some(90),
            ..Default::default()
        });
        assert_eq!(tol.quad, 1e-12);
        assert_eq!(tol.numrange_grid, 90);
        assert_eq!(tol.membership, Tolerances::default().membership);
    }

    #[test]
    fn profile_parsing() {
        assert_eq!("Strict".parse::<Profile>().unwrap(), Profile::Strict);
        assert_eq!("default".parse::<Profile>().unwrap(), Profile::Default);
        assert!("loose".parse::<Profile>().is_err());
    }

    #[test]
    fn strict_is_tighter() {
        let d = Tolerances::default();
        let s = Tolerances::strict();
        assert!(s.rank_rel < d.rank_rel && s.membership < d.membership && s.quad < d.quad);
    }
}
