//! Scenario subproblem oracle.
//!
//! [`solve_prox`] minimizes the augmented Lagrangian of one scenario,
//!
//! ```text
//! min_{x∈X}  h(x, ω) + ⟨λ, x − x̄⟩ + ρ/2 ‖x − x̄‖²,
//! ```
//!
//! which is strongly convex, so the minimizer is unique. The quadratic
//! tracking family has a closed form; the max-affine family is solved by
//! active-set enumeration with an iterative fallback when the box binds.

mod max_affine;

use std::sync::atomic::{AtomicU64, Ordering};

use crate::error::{check_dim, Error, Result};
use crate::model::{evaluate_h, BoxBounds, FunctionFamily};
use crate::vector::{dist_sq, dot};

pub use max_affine::{ITERATIVE_BUDGET, ITERATIVE_TOL, MAX_EXACT_PIECES};

#[derive(Debug, Clone, Copy)]
pub struct ProxQuery<'a> {
    pub omega: &'a [f64],
    pub lambda: &'a [f64],
    pub xbar: &'a [f64],
    pub rho: f64,
    pub family: &'a FunctionFamily,
    pub bounds: &'a BoxBounds,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverTag {
    Exact,
    Iterative,
}

#[derive(Debug, Clone)]
pub struct ProxResult {
    pub x_opt: Vec<f64>,
    pub aug_value: f64,
    pub h_value: f64,
    pub solver_tag: SolverTag,
    pub subproblem_count_delta: u64,
}

impl<'a> ProxQuery<'a> {
    pub fn validate(&self) -> Result<()> {
        let n = self.bounds.dim();
        check_dim("multiplier", n, self.lambda.len())?;
        check_dim("consensus point", n, self.xbar.len())?;
        if let FunctionFamily::QuadraticTracking {} = self.family {
            check_dim("realization", n, self.omega.len())?;
        }
        if !(self.rho > 0.0 && self.rho.is_finite()) {
            return Err(Error::Domain(format!("rho must be positive, got {}", self.rho)));
        }
        Ok(())
    }

    /// Same query with the multiplier replaced.
    pub fn with_lambda<'b>(&self, lambda: &'b [f64]) -> ProxQuery<'b>
    where
        'a: 'b,
    {
        ProxQuery { lambda, ..*self }
    }

    /// The subproblem objective at `x`.
    pub fn objective(&self, x: &[f64]) -> Result<f64> {
        let h = evaluate_h(self.family, x, self.omega)?;
        Ok(augmented_value(h, self.lambda, x, self.xbar, self.rho))
    }
}

/// `h + ⟨λ, x − x̄⟩ + ρ/2‖x − x̄‖²` for a known `h = h(x, ω)`.
pub fn augmented_value(h: f64, lambda: &[f64], x: &[f64], xbar: &[f64], rho: f64) -> f64 {
    let shift: f64 = lambda.iter().zip(x).zip(xbar).map(|((l, xi), bi)| l * (xi - bi)).sum();
    h + shift + 0.5 * rho * dist_sq(x, xbar)
}

/// Solves one scenario subproblem.
pub fn solve_prox(q: &ProxQuery) -> Result<ProxResult> {
    q.validate()?;
    let (x_opt, solver_tag) = match q.family {
        FunctionFamily::QuadraticTracking {} => {
            let x: Vec<f64> = (0..q.xbar.len())
                .map(|i| {
                    ((q.omega[i] + q.rho * q.xbar[i] - q.lambda[i]) / (1.0 + q.rho))
                        .clamp(q.bounds.lo[i], q.bounds.hi[i])
                })
                .collect();
            (x, SolverTag::Exact)
        }
        FunctionFamily::MaxAffine { .. } => {
            // dimension checks against the pieces
            evaluate_h(q.family, q.xbar, q.omega)?;
            let pieces = q.family.pieces_at(q.omega).expect("max-affine pieces");
            let qp = max_affine::PieceQp {
                pieces: &pieces,
                lambda: q.lambda,
                center: q.xbar,
                rho: q.rho,
                bounds: q.bounds,
            };
            match qp.unconstrained_exact() {
                Some(x) if q.bounds.contains(&x, 1e-12) => (q.bounds.clamped(&x), SolverTag::Exact),
                Some(x) => (qp.iterative(&x)?, SolverTag::Iterative),
                None => {
                    let start: Vec<f64> = (0..q.xbar.len()).map(|i| q.xbar[i] - q.lambda[i] / q.rho).collect();
                    (qp.iterative(&start)?, SolverTag::Iterative)
                }
            }
        }
    };
    let h_value = evaluate_h(q.family, &x_opt, q.omega)?;
    Ok(ProxResult {
        aug_value: augmented_value(h_value, q.lambda, &x_opt, q.xbar, q.rho),
        x_opt,
        h_value,
        solver_tag,
        subproblem_count_delta: 1,
    })
}

/// Max-affine subproblem through the iterative path only, skipping the
/// exact enumeration. Used to cross-check the two solvers.
pub fn solve_prox_iterative(q: &ProxQuery) -> Result<Vec<f64>> {
    q.validate()?;
    let pieces = q
        .family
        .pieces_at(q.omega)
        .ok_or_else(|| Error::Unsupported("iterative path exists only for max-affine costs".into()))?;
    evaluate_h(q.family, q.xbar, q.omega)?;
    let qp = max_affine::PieceQp {
        pieces: &pieces,
        lambda: q.lambda,
        center: q.xbar,
        rho: q.rho,
        bounds: q.bounds,
    };
    let start: Vec<f64> = (0..q.xbar.len()).map(|i| q.xbar[i] - q.lambda[i] / q.rho).collect();
    qp.iterative(&start)
}

/// Scenario dual value `h(x, ω) + ⟨λ, x⟩`.
pub fn dual_value(x_opt: &[f64], omega: &[f64], lambda: &[f64], family: &FunctionFamily) -> Result<f64> {
    check_dim("multiplier", x_opt.len(), lambda.len())?;
    Ok(evaluate_h(family, x_opt, omega)? + dot(lambda, x_opt))
}

/// Result of re-solving a subproblem under a shifted multiplier.
#[derive(Debug, Clone)]
pub struct ShiftedEval {
    pub value: f64,
    pub x_hat: Vec<f64>,
    pub xhat_bar: Vec<f64>,
    pub solve: ProxResult,
}

/// Line-search objective with the multiplier moved to `λ + θd`.
///
/// The subproblem is re-solved around the query's `x̄`; `consensus` maps the
/// new solution `x̂` to the consensus point `x̂_bar` it is measured against.
pub fn aug_dual_value_with<F>(q: &ProxQuery, theta: f64, d: &[f64], consensus: F) -> Result<ShiftedEval>
where
    F: FnOnce(&[f64]) -> Vec<f64>,
{
    check_dim("direction", q.lambda.len(), d.len())?;
    let shifted: Vec<f64> = q.lambda.iter().zip(d).map(|(l, di)| l + theta * di).collect();
    let solve = solve_prox(&q.with_lambda(&shifted))?;
    let xhat_bar = consensus(&solve.x_opt);
    check_dim("consensus point", q.lambda.len(), xhat_bar.len())?;
    let value = augmented_value(solve.h_value, &shifted, &solve.x_opt, &xhat_bar, q.rho);
    Ok(ShiftedEval {
        value,
        x_hat: solve.x_opt.clone(),
        xhat_bar,
        solve,
    })
}

/// [`aug_dual_value_with`] against a fixed consensus point.
pub fn aug_dual_value(q: &ProxQuery, theta: f64, d: &[f64], xhat_bar: &[f64]) -> Result<f64> {
    aug_dual_value_with(q, theta, d, |_| xhat_bar.to_vec()).map(|e| e.value)
}

/// Minimizer of the plain Lagrangian subproblem `min_{x∈X} h(x, ω) + ⟨λ, x⟩`.
///
/// Evaluating [`dual_value`] there gives the scenario's Lagrangian dual
/// function; averaged over scenarios with `Σλ = 0` it bounds the sample
/// problem's optimal value from below.
pub fn lagrangian_subproblem(
    family: &FunctionFamily,
    omega: &[f64],
    lambda: &[f64],
    bounds: &BoxBounds,
) -> Result<Vec<f64>> {
    check_dim("multiplier", bounds.dim(), lambda.len())?;
    match family {
        FunctionFamily::QuadraticTracking {} => {
            check_dim("realization", bounds.dim(), omega.len())?;
            Ok((0..lambda.len())
                .map(|i| (omega[i] - lambda[i]).clamp(bounds.lo[i], bounds.hi[i]))
                .collect())
        }
        FunctionFamily::MaxAffine { .. } => {
            evaluate_h(family, &bounds.lo, omega)?;
            let pieces = family.pieces_at(omega).expect("max-affine pieces");
            max_affine::lagrangian_lp(&pieces, lambda, bounds)
        }
    }
}

/// Shared tally of subproblem solves. Updates are atomic, so totals do not
/// depend on how parallel work is scheduled.
#[derive(Debug, Default)]
pub struct SubproblemOracle {
    solved: AtomicU64,
}

impl SubproblemOracle {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn solve(&self, q: &ProxQuery) -> Result<ProxResult> {
        let r = solve_prox(q)?;
        self.solved.fetch_add(r.subproblem_count_delta, Ordering::Relaxed);
        Ok(r)
    }

    pub fn aug_dual_value_with<F>(&self, q: &ProxQuery, theta: f64, d: &[f64], consensus: F) -> Result<ShiftedEval>
    where
        F: FnOnce(&[f64]) -> Vec<f64>,
    {
        let r = aug_dual_value_with(q, theta, d, consensus)?;
        self.solved.fetch_add(r.solve.subproblem_count_delta, Ordering::Relaxed);
        Ok(r)
    }

    pub fn solved(&self) -> u64 {
        self.solved.load(Ordering::Relaxed)
    }
}
