//! Per-iteration measurements and the iteration CSV format.
//!
//! Every quantity in an [`IterationRecord`] except the bookkeeping fields is
//! recomputed from the scenario states passed to [`record`], so a record is
//! an independent check on the solver that produced it.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{evaluate_h, BoxBounds, FunctionFamily};
use crate::prox::{augmented_value, dual_value, lagrangian_subproblem, solve_prox, ProxQuery};
use crate::vector::{dot, dist_sq, mean, norm, sub};

/// First line of every iteration CSV.
pub const ITERS_CSV_VERSION: &str = "#iters-v1";

pub const ITERS_CSV_HEADER: &str = "k,qps_cumulative,sample_size,success,delta,d_norm,dual_value,\
dual_value_incumbent,dual_value_theorem2,lagrangian_bound,primal_value,duality_gap,lambda_sum_norm";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub k: usize,
    pub qps_cumulative: u64,
    pub sample_size: usize,
    pub success: bool,
    /// Search-region radius after the iteration; NaN for the baselines.
    pub delta: f64,
    pub d_norm: f64,
    /// Mean augmented dual value at the multipliers held after the iteration.
    pub dual_value: f64,
    /// Mean augmented dual value at the multipliers held before it.
    pub dual_value_incumbent: f64,
    /// `mean[h(xˢ, ωˢ) + ⟨λˢ, xˢ⟩]` at the stored primal iterates.
    pub dual_value_theorem2: f64,
    /// `mean[min_{x∈X} h(x, ωˢ) + ⟨λˢ, x⟩]`; a lower bound on the sample
    /// problem's optimum whenever `Σλˢ = 0`.
    pub lagrangian_bound: f64,
    /// Sample-average cost at the consensus point.
    pub primal_value: f64,
    pub duality_gap: f64,
    pub lambda_sum_norm: f64,
}

/// One scenario as seen by [`record`].
#[derive(Debug, Clone, Copy)]
pub struct ScenarioView<'a> {
    pub omega: &'a [f64],
    pub lambda: &'a [f64],
    pub x: &'a [f64],
}

/// Bookkeeping carried into a record unchanged.
#[derive(Debug, Clone, Copy)]
pub struct RecordFlags {
    pub k: usize,
    pub qps_cumulative: u64,
    pub success: bool,
    pub delta: f64,
    pub d_norm: f64,
    pub dual_value_incumbent: f64,
}

/// Everything [`record`] needs from a solver state.
#[derive(Debug, Clone, Copy)]
pub struct RecordInput<'a> {
    pub scenarios: &'a [ScenarioView<'a>],
    /// Consensus point the primal step was taken around.
    pub xbar_prev: &'a [f64],
    pub xbar: &'a [f64],
    pub rho: f64,
    pub family: &'a FunctionFamily,
    pub bounds: &'a BoxBounds,
}

/// `(1/|S|) Σ [⟨λˢ, xˢ − x̄⟩ + ρ/2 ‖xˢ − x̄‖²]`.
pub fn duality_gap(scenarios: &[ScenarioView], xbar: &[f64], rho: f64) -> f64 {
    let total: f64 = scenarios
        .iter()
        .map(|s| dot(s.lambda, &sub(s.x, xbar)) + 0.5 * rho * dist_sq(s.x, xbar))
        .sum();
    total / scenarios.len() as f64
}

/// `‖Σ_s λˢ‖`.
pub fn lambda_sum_norm(scenarios: &[ScenarioView]) -> f64 {
    let n = scenarios.first().map_or(0, |s| s.lambda.len());
    let mut sum = vec![0.0; n];
    for s in scenarios {
        for (acc, l) in sum.iter_mut().zip(s.lambda) {
            *acc += l;
        }
    }
    norm(&sum)
}

/// `(1/|S|) Σ [h(xˢ, ωˢ) + ⟨λˢ, xˢ⟩]`.
pub fn theorem2_dual(scenarios: &[ScenarioView], family: &FunctionFamily) -> Result<f64> {
    let mut total = 0.0;
    for s in scenarios {
        total += dual_value(s.x, s.omega, s.lambda, family)?;
    }
    Ok(total / scenarios.len() as f64)
}

/// Plain Lagrangian dual function averaged over the scenarios.
pub fn lagrangian_bound(scenarios: &[ScenarioView], family: &FunctionFamily, bounds: &BoxBounds) -> Result<f64> {
    let mut total = 0.0;
    for s in scenarios {
        let x = lagrangian_subproblem(family, s.omega, s.lambda, bounds)?;
        total += dual_value(&x, s.omega, s.lambda, family)?;
    }
    Ok(total / scenarios.len() as f64)
}

/// Mean augmented dual value: every scenario is re-solved at its `λˢ` around
/// `xbar_prev` and measured against the mean of the new solutions. These
/// solves do not touch any QP counter.
pub fn augmented_dual(
    scenarios: &[ScenarioView],
    xbar_prev: &[f64],
    rho: f64,
    family: &FunctionFamily,
    bounds: &BoxBounds,
) -> Result<f64> {
    let mut solves = Vec::with_capacity(scenarios.len());
    for s in scenarios {
        solves.push(solve_prox(&ProxQuery {
            omega: s.omega,
            lambda: s.lambda,
            xbar: xbar_prev,
            rho,
            family,
            bounds,
        })?);
    }
    let xhat_bar = mean(solves.iter().map(|r| r.x_opt.as_slice()), bounds.dim());
    let total: f64 = scenarios
        .iter()
        .zip(&solves)
        .map(|(s, r)| augmented_value(r.h_value, s.lambda, &r.x_opt, &xhat_bar, rho))
        .sum();
    Ok(total / scenarios.len() as f64)
}

/// Sample-average cost `(1/|S|) Σ h(x, ωˢ)`.
pub fn sample_cost(x: &[f64], scenarios: &[ScenarioView], family: &FunctionFamily) -> Result<f64> {
    let mut total = 0.0;
    for s in scenarios {
        total += evaluate_h(family, x, s.omega)?;
    }
    Ok(total / scenarios.len() as f64)
}

/// Builds the record for one iteration.
pub fn record(input: &RecordInput, flags: RecordFlags) -> Result<IterationRecord> {
    let s = input.scenarios;
    if s.is_empty() {
        return Err(Error::Domain("cannot record an empty scenario set".into()));
    }
    Ok(IterationRecord {
        k: flags.k,
        qps_cumulative: flags.qps_cumulative,
        sample_size: s.len(),
        success: flags.success,
        delta: flags.delta,
        d_norm: flags.d_norm,
        dual_value: augmented_dual(s, input.xbar_prev, input.rho, input.family, input.bounds)?,
        dual_value_incumbent: flags.dual_value_incumbent,
        dual_value_theorem2: theorem2_dual(s, input.family)?,
        lagrangian_bound: lagrangian_bound(s, input.family, input.bounds)?,
        primal_value: sample_cost(input.xbar, s, input.family)?,
        duality_gap: duality_gap(s, input.xbar, input.rho),
        lambda_sum_norm: lambda_sum_norm(s),
    })
}

/// Writes the version line, the header and one row per record.
pub fn write_iters_csv<W: Write>(mut out: W, records: &[IterationRecord]) -> std::io::Result<()> {
    writeln!(out, "{ITERS_CSV_VERSION}")?;
    writeln!(out, "{ITERS_CSV_HEADER}")?;
    for r in records {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.k,
            r.qps_cumulative,
            r.sample_size,
            r.success,
            r.delta,
            r.d_norm,
            r.dual_value,
            r.dual_value_incumbent,
            r.dual_value_theorem2,
            r.lagrangian_bound,
            r.primal_value,
            r.duality_gap,
            r.lambda_sum_norm
        )?;
    }
    Ok(())
}

fn csv_error(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: "iters.csv".into(),
        message: format!("line {line}: {}", message.into()),
    }
}

/// Inverse of [`write_iters_csv`].
pub fn read_iters_csv<R: BufRead>(input: R) -> Result<Vec<IterationRecord>> {
    let mut lines = input.lines().enumerate();
    let mut next_line = |expect: &str| -> Result<()> {
        match lines.next() {
            Some((_, Ok(l))) if l == expect => Ok(()),
            Some((i, Ok(l))) => Err(csv_error(i + 1, format!("expected `{expect}`, found `{l}`"))),
            Some((i, Err(e))) => Err(csv_error(i + 1, e.to_string())),
            None => Err(csv_error(0, "file is empty")),
        }
    };
    next_line(ITERS_CSV_VERSION)?;
    next_line(ITERS_CSV_HEADER)?;
    let mut records = Vec::new();
    for (i, line) in lines {
        let line = line.map_err(|e| csv_error(i + 1, e.to_string()))?;
        if line.is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != 13 {
            return Err(csv_error(i + 1, format!("expected 13 fields, found {}", cells.len())));
        }
        let float = |j: usize| cells[j].parse::<f64>().map_err(|e| csv_error(i + 1, e.to_string()));
        let int = |j: usize| cells[j].parse::<u64>().map_err(|e| csv_error(i + 1, e.to_string()));
        records.push(IterationRecord {
            k: int(0)? as usize,
            qps_cumulative: int(1)?,
            sample_size: int(2)? as usize,
            success: cells[3].parse().map_err(|_| csv_error(i + 1, "bad success flag"))?,
            delta: float(4)?,
            d_norm: float(5)?,
            dual_value: float(6)?,
            dual_value_incumbent: float(7)?,
            dual_value_theorem2: float(8)?,
            lagrangian_bound: float(9)?,
            primal_value: float(10)?,
            duality_gap: float(11)?,
            lambda_sum_norm: float(12)?,
        });
    }
    Ok(records)
}
