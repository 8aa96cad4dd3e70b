//! Classic and randomized progressive hedging on a fixed sample.
//!
//! Both use the same subproblem oracle and QP tally as the adaptive solver,
//! and draw their sample from the start of the same scenario stream.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{record, IterationRecord, RecordFlags, RecordInput, ScenarioView};
use crate::model::{draw_scenarios, position_rng, InstanceSpec, Scenario};
use crate::prox::{augmented_value, ProxQuery, SubproblemOracle};
use crate::report::{AlgorithmConfig, SolveReport, TerminationReason};
use crate::vector::{dist_sq, mean};

/// Stream reserved for the randomized scenario picks.
const PICK_STREAM: u64 = u64::MAX;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BaselineConfig {
    pub rho: f64,
    pub fixed_sample_size: usize,
    /// Sweeps for classic PH; full passes of `|S|` single updates for the
    /// randomized variant.
    pub max_iters: usize,
    /// Stop once the mean residual norm drops below this.
    pub tol: f64,
    pub seed: Option<u64>,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        BaselineConfig {
            rho: 1.0,
            fixed_sample_size: 500,
            max_iters: 200,
            tol: 1e-6,
            seed: None,
        }
    }
}

impl BaselineConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.rho > 0.0 && self.rho.is_finite()) {
            return Err(Error::validation("rho", format!("must be positive, got {}", self.rho)));
        }
        if self.fixed_sample_size == 0 {
            return Err(Error::validation("fixed_sample_size", "must be at least 1"));
        }
        if self.max_iters == 0 {
            return Err(Error::validation("max_iters", "must be at least 1"));
        }
        if self.tol.is_nan() || self.tol < 0.0 {
            return Err(Error::validation("tol", format!("must be nonnegative, got {}", self.tol)));
        }
        Ok(())
    }
}

struct Sample {
    scenarios: Vec<Scenario>,
    lambda: Vec<Vec<f64>>,
    x: Vec<Vec<f64>>,
}

impl Sample {
    fn views(&self) -> Vec<ScenarioView<'_>> {
        (0..self.scenarios.len())
            .map(|i| ScenarioView {
                omega: &self.scenarios[i].omega,
                lambda: &self.lambda[i],
                x: &self.x[i],
            })
            .collect()
    }

    fn mean_residual(&self, xbar: &[f64]) -> f64 {
        self.x.iter().map(|x| dist_sq(x, xbar).sqrt()).sum::<f64>() / self.x.len() as f64
    }
}

fn setup(instance: &InstanceSpec, cfg: &BaselineConfig) -> Result<(u64, Sample)> {
    instance.validate()?;
    cfg.validate()?;
    let seed = cfg.seed.unwrap_or(instance.seed);
    let scenarios = draw_scenarios(&instance.distribution, seed, cfg.fixed_sample_size, 0);
    let center = instance.bounds().center();
    let n = instance.n;
    Ok((
        seed,
        Sample {
            lambda: vec![vec![0.0; n]; scenarios.len()],
            x: vec![center; scenarios.len()],
            scenarios,
        },
    ))
}

struct Recorder<'a> {
    instance: &'a InstanceSpec,
    rho: f64,
}

impl Recorder<'_> {
    fn record(
        &self,
        sample: &Sample,
        xbar_prev: &[f64],
        xbar: &[f64],
        k: usize,
        qps: u64,
        incumbent: f64,
    ) -> Result<IterationRecord> {
        let views = sample.views();
        let bounds = self.instance.bounds();
        record(
            &RecordInput {
                scenarios: &views,
                xbar_prev,
                xbar,
                rho: self.rho,
                family: &self.instance.family,
                bounds: &bounds,
            },
            RecordFlags {
                k,
                qps_cumulative: qps,
                success: true,
                delta: f64::NAN,
                d_norm: sample.mean_residual(xbar),
                dual_value_incumbent: incumbent,
            },
        )
    }
}

/// All scenarios are re-solved every sweep, then `λˢ ← λˢ + ρ(xˢ − x̄)`.
pub fn classic_ph(instance: &InstanceSpec, cfg: &BaselineConfig) -> Result<SolveReport> {
    let (seed, mut sample) = setup(instance, cfg)?;
    let bounds = instance.bounds();
    let oracle = SubproblemOracle::new();
    let recorder = Recorder { instance, rho: cfg.rho };
    let mut xbar = bounds.center();
    let mut history = Vec::new();
    let mut termination = TerminationReason::IterationBudget;
    for k in 1..=cfg.max_iters {
        let solves = sample
            .scenarios
            .par_iter()
            .zip(&sample.lambda)
            .map(|(s, lam)| {
                oracle.solve(&ProxQuery {
                    omega: &s.omega,
                    lambda: lam,
                    xbar: &xbar,
                    rho: cfg.rho,
                    family: &instance.family,
                    bounds: &bounds,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let xbar_prev = std::mem::replace(&mut xbar, mean(solves.iter().map(|r| r.x_opt.as_slice()), instance.n));
        let incumbent = solves
            .iter()
            .zip(&sample.lambda)
            .map(|(r, lam)| augmented_value(r.h_value, lam, &r.x_opt, &xbar, cfg.rho))
            .sum::<f64>()
            / solves.len() as f64;
        // residuals sum to zero only up to rounding; centering them keeps
        // that error from accumulating in Σλ over many sweeps
        let steps: Vec<Vec<f64>> = solves
            .iter()
            .map(|r| r.x_opt.iter().zip(&xbar).map(|(x, m)| cfg.rho * (x - m)).collect())
            .collect();
        let shift = mean(steps.iter().map(|v| v.as_slice()), instance.n);
        for (((lam, x), r), step) in sample.lambda.iter_mut().zip(&mut sample.x).zip(solves).zip(&steps) {
            for j in 0..lam.len() {
                lam[j] += step[j] - shift[j];
            }
            *x = r.x_opt;
        }
        let rec = recorder.record(&sample, &xbar_prev, &xbar, k, oracle.solved(), incumbent)?;
        let done = rec.d_norm < cfg.tol;
        history.push(rec);
        if done {
            termination = TerminationReason::Converged;
            break;
        }
    }
    Ok(SolveReport::new(
        instance,
        seed,
        AlgorithmConfig::Classic(BaselineConfig { seed: Some(seed), ..cfg.clone() }),
        termination,
        xbar,
        sample.lambda,
        history,
    ))
}

/// One uniformly chosen scenario is re-solved per step. The state is
/// `zˢ = x̄ + λˢ/ρ` with `x̄ = mean z`, so `Σλˢ = 0` holds throughout and the
/// single-scenario update `zⁱ ← zⁱ + xⁱ − x̄` shifts every multiplier through
/// `x̄`. `x̄` is updated incrementally and recomputed exactly after every `|S|`
/// steps, where the stopping rule is checked and a record is written.
pub fn randomized_ph(instance: &InstanceSpec, cfg: &BaselineConfig) -> Result<SolveReport> {
    let (seed, mut sample) = setup(instance, cfg)?;
    let bounds = instance.bounds();
    let oracle = SubproblemOracle::new();
    let recorder = Recorder { instance, rho: cfg.rho };
    let big_n = sample.scenarios.len();
    let n = instance.n;
    let mut picks = position_rng(seed, PICK_STREAM);
    let mut xbar = bounds.center();
    let mut z = vec![xbar.clone(); big_n];
    let mut history = Vec::new();
    let mut termination = TerminationReason::IterationBudget;
    for k in 1..=cfg.max_iters {
        let xbar_prev = xbar.clone();
        let mut incumbent = 0.0;
        for _ in 0..big_n {
            let i = picks.random_range(0..big_n);
            let lam: Vec<f64> = (0..n).map(|j| cfg.rho * (z[i][j] - xbar[j])).collect();
            let r = oracle.solve(&ProxQuery {
                omega: &sample.scenarios[i].omega,
                lambda: &lam,
                xbar: &xbar,
                rho: cfg.rho,
                family: &instance.family,
                bounds: &bounds,
            })?;
            incumbent += augmented_value(r.h_value, &lam, &r.x_opt, &xbar, cfg.rho);
            for j in 0..n {
                let step = r.x_opt[j] - xbar[j];
                z[i][j] += step;
                xbar[j] += step / big_n as f64;
            }
            sample.x[i] = r.x_opt;
        }
        xbar = mean(z.iter().map(|v| v.as_slice()), n);
        for (lam, zs) in sample.lambda.iter_mut().zip(&z) {
            for j in 0..n {
                lam[j] = cfg.rho * (zs[j] - xbar[j]);
            }
        }
        let rec = recorder.record(&sample, &xbar_prev, &xbar, k, oracle.solved(), incumbent / big_n as f64)?;
        let done = rec.d_norm < cfg.tol;
        history.push(rec);
        if done {
            termination = TerminationReason::Converged;
            break;
        }
    }
    Ok(SolveReport::new(
        instance,
        seed,
        AlgorithmConfig::Randomized(BaselineConfig { seed: Some(seed), ..cfg.clone() }),
        termination,
        xbar,
        sample.lambda,
        history,
    ))
}
