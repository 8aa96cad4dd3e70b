use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::vector::dot;

/// One affine piece `a(ω)ᵀx + b(ω)` whose coefficients are themselves affine
/// in the realization: `a(ω) = a0 + A_ω ω`, `b(ω) = b0 + b_ωᵀ ω`.
///
/// `a_omega` is stored row-major with one row per decision coordinate. Either
/// omega-coupling field may be left empty to mean "no dependence on ω".
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AffinePiece {
    pub a0: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub a_omega: Vec<Vec<f64>>,
    pub b0: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub b_omega: Vec<f64>,
}

impl AffinePiece {
    pub fn slope_at(&self, omega: &[f64]) -> Vec<f64> {
        if self.a_omega.is_empty() {
            return self.a0.clone();
        }
        self.a0
            .iter()
            .zip(&self.a_omega)
            .map(|(a, row)| a + dot(row, omega))
            .collect()
    }

    pub fn intercept_at(&self, omega: &[f64]) -> f64 {
        if self.b_omega.is_empty() {
            self.b0
        } else {
            self.b0 + dot(&self.b_omega, omega)
        }
    }
}

/// Scenario cost `h(x, ω)`, convex and finite in `x` for every `ω`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FunctionFamily {
    /// `h(x, ω) = ½‖x − ω‖²`
    QuadraticTracking {},
    /// `h(x, ω) = max_j a_j(ω)ᵀx + b_j(ω)`
    MaxAffine { pieces: Vec<AffinePiece> },
}

/// Affine pieces of a max-affine function evaluated at one realization.
#[derive(Debug, Clone, PartialEq)]
pub struct ActivePieces {
    pub slopes: Vec<Vec<f64>>,
    pub intercepts: Vec<f64>,
}

impl ActivePieces {
    pub fn len(&self) -> usize {
        self.slopes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slopes.is_empty()
    }

    pub fn value(&self, j: usize, x: &[f64]) -> f64 {
        dot(&self.slopes[j], x) + self.intercepts[j]
    }

    pub fn max_value(&self, x: &[f64]) -> f64 {
        (0..self.len())
            .map(|j| self.value(j, x))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Index of the first maximizing piece.
    pub fn argmax(&self, x: &[f64]) -> usize {
        let mut best = 0;
        let mut best_val = f64::NEG_INFINITY;
        for j in 0..self.len() {
            let v = self.value(j, x);
            if v > best_val {
                best = j;
                best_val = v;
            }
        }
        best
    }
}

impl FunctionFamily {
    pub fn tag(&self) -> &'static str {
        match self {
            FunctionFamily::QuadraticTracking {} => "quadratic_tracking",
            FunctionFamily::MaxAffine { .. } => "max_affine",
        }
    }

    pub fn pieces_at(&self, omega: &[f64]) -> Option<ActivePieces> {
        match self {
            FunctionFamily::QuadraticTracking {} => None,
            FunctionFamily::MaxAffine { pieces } => Some(ActivePieces {
                slopes: pieces.iter().map(|p| p.slope_at(omega)).collect(),
                intercepts: pieces.iter().map(|p| p.intercept_at(omega)).collect(),
            }),
        }
    }

    /// Checks the family against decision dimension `n` and realization
    /// dimension `m`.
    pub fn validate(&self, n: usize, m: usize) -> Result<()> {
        match self {
            FunctionFamily::QuadraticTracking {} => {
                if m != n {
                    return Err(Error::validation(
                        "family",
                        format!("quadratic_tracking needs realizations of dimension n = {n}, got {m}"),
                    ));
                }
            }
            FunctionFamily::MaxAffine { pieces } => {
                if pieces.is_empty() {
                    return Err(Error::validation("family.pieces", "at least one piece is required"));
                }
                for (j, p) in pieces.iter().enumerate() {
                    let field = |f: &str| format!("family.pieces[{j}].{f}");
                    if p.a0.len() != n {
                        return Err(Error::validation(
                            field("a0"),
                            format!("expected length {n}, found {}", p.a0.len()),
                        ));
                    }
                    if !p.a_omega.is_empty() {
                        if p.a_omega.len() != n || p.a_omega.iter().any(|r| r.len() != m) {
                            return Err(Error::validation(field("a_omega"), format!("expected a {n}x{m} matrix")));
                        }
                        if p.a_omega.iter().flatten().any(|v| !v.is_finite()) {
                            return Err(Error::validation(field("a_omega"), "coefficients must be finite"));
                        }
                    }
                    if !p.b_omega.is_empty() && p.b_omega.len() != m {
                        return Err(Error::validation(
                            field("b_omega"),
                            format!("expected length {m}, found {}", p.b_omega.len()),
                        ));
                    }
                    if p.a0.iter().chain(&p.b_omega).any(|v| !v.is_finite()) || !p.b0.is_finite() {
                        return Err(Error::validation(field("a0"), "coefficients must be finite"));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Evaluates `h(x, ω)` for the given family.
pub fn evaluate_h(family: &FunctionFamily, x: &[f64], omega: &[f64]) -> Result<f64> {
    match family {
        FunctionFamily::QuadraticTracking {} => {
            check_dim("realization", x.len(), omega.len())?;
            Ok(0.5 * crate::vector::dist_sq(x, omega))
        }
        FunctionFamily::MaxAffine { pieces } => {
            for p in pieces {
                check_dim("piece slope", p.a0.len(), x.len())?;
                if !p.b_omega.is_empty() {
                    check_dim("realization", p.b_omega.len(), omega.len())?;
                }
                if let Some(row) = p.a_omega.first() {
                    check_dim("realization", row.len(), omega.len())?;
                }
            }
            let active = family.pieces_at(omega).expect("max-affine family has pieces");
            Ok(active.max_value(x))
        }
    }
}
