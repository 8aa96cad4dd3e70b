//! The adaptive outer loop: sample growth, primal step, conjugate
//! directions, per-scenario line searches and the trust-region test.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::csd::{nr_direction, residual, DirectionState};
use crate::error::{Error, Result};
use crate::linesearch::{wolfe_search, StepResult, WolfeParams};
use crate::metrics::{record, IterationRecord, RecordFlags, RecordInput, ScenarioView};
use crate::model::{BoxBounds, InstanceSpec, Scenario, ScenarioStream};
use crate::prox::{augmented_value, ProxQuery, ProxResult, SubproblemOracle};
use crate::report::{AlgorithmConfig, SolveReport, TerminationReason};
use crate::vector::{mean, norm, norm_sq};

/// Scenarios whose direction is shorter than this keep their multiplier.
pub const DEGENERATE_DIRECTION: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub rho: f64,
    /// Acceptance threshold of the trust-region test.
    pub eta: f64,
    /// Radius expansion and shrink factor.
    pub gamma_tr: f64,
    pub delta0: f64,
    pub delta_min: f64,
    pub delta_max: f64,
    pub eps: f64,
    pub kappa: f64,
    /// Concentration constant `M1` of the sample-size rule.
    pub m_concentration: f64,
    pub m1: f64,
    pub m2: f64,
    pub sample_cap_per_iter: usize,
    pub max_iters: usize,
    /// Overrides the instance seed.
    pub seed: Option<u64>,
    pub ls_budget: usize,
    /// Step window is `(δ/divisor, δ]`; defaults to `max(n, 2)`.
    pub window_divisor: Option<f64>,
    /// Remove the mean of the multiplier steps so that `Σλˢ` stays zero.
    pub project_duals: bool,
    /// Restart from the residual when the previous direction vanished.
    pub restart_directions: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            rho: 1.0,
            eta: 0.5,
            gamma_tr: 2.0,
            delta0: 1.0,
            delta_min: 1e-3,
            delta_max: 1.0,
            eps: 0.02,
            kappa: 1.0,
            m_concentration: 1.0,
            m1: 0.25,
            m2: 0.1,
            sample_cap_per_iter: 64,
            max_iters: 200,
            seed: None,
            ls_budget: 30,
            window_divisor: None,
            project_duals: true,
            restart_directions: true,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |field: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::validation(field, format!("must be positive and finite, got {v}")))
            }
        };
        positive("rho", self.rho)?;
        positive("eps", self.eps)?;
        positive("kappa", self.kappa)?;
        positive("m_concentration", self.m_concentration)?;
        positive("delta_min", self.delta_min)?;
        if !(self.eta > 0.0 && self.eta < 1.0) {
            return Err(Error::validation("eta", format!("must lie in (0, 1), got {}", self.eta)));
        }
        if !(self.gamma_tr > 1.0 && self.gamma_tr.is_finite()) {
            return Err(Error::validation("gamma_tr", format!("must exceed 1, got {}", self.gamma_tr)));
        }
        if !(self.delta_min <= self.delta0 && self.delta0 <= self.delta_max && self.delta_max.is_finite()) {
            return Err(Error::validation(
                "delta0",
                format!(
                    "need delta_min <= delta0 <= delta_max, got {} / {} / {}",
                    self.delta_min, self.delta0, self.delta_max
                ),
            ));
        }
        if !(0.0 < self.m2 && self.m2 < self.m1 && self.m1 < 0.5) {
            return Err(Error::validation(
                "m1",
                format!("need 0 < m2 < m1 < 0.5, got m1 = {}, m2 = {}", self.m1, self.m2),
            ));
        }
        if self.sample_cap_per_iter == 0 {
            return Err(Error::validation("sample_cap_per_iter", "must be at least 1"));
        }
        if self.ls_budget == 0 {
            return Err(Error::validation("ls_budget", "must be at least 1"));
        }
        if let Some(div) = self.window_divisor {
            if !(div > 1.0 && div.is_finite()) {
                return Err(Error::validation("window_divisor", format!("must exceed 1, got {div}")));
            }
        }
        Ok(())
    }
}

/// `ceil(−8 ln(ε/2) M1² / (κ² δ⁴))`.
pub fn required_sample_size(eps: f64, m_concentration: f64, kappa: f64, delta: f64) -> Result<usize> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::Domain(format!("sample-size rule needs 0 < eps < 1, got {eps}")));
    }
    if !(m_concentration > 0.0 && kappa > 0.0 && delta > 0.0) {
        return Err(Error::Domain("sample-size rule needs positive M1, kappa and delta".into()));
    }
    let raw = -8.0 * (eps / 2.0).ln() * m_concentration.powi(2) / (kappa.powi(2) * delta.powi(4));
    Ok(raw.ceil() as usize)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioState {
    pub scenario: Scenario,
    pub lambda: Vec<f64>,
    /// Direction from the last iteration; `None` before the first one.
    pub d: Option<Vec<f64>>,
    pub x: Vec<f64>,
    pub first_seen: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OuterState {
    pub k: usize,
    pub xbar: Vec<f64>,
    pub delta: f64,
    pub scenarios: Vec<ScenarioState>,
    pub cumulative_qps: u64,
    pub history: Vec<IterationRecord>,
}

/// Adds scenarios toward the required sample size for the current radius,
/// at most `sample_cap_per_iter` at a time. Returns how many were added.
pub fn grow_sample(state: &mut OuterState, cfg: &SolverConfig, stream: &mut ScenarioStream, k: usize) -> Result<usize> {
    let current = state.scenarios.len();
    let required = required_sample_size(cfg.eps, cfg.m_concentration, cfg.kappa, state.delta)?;
    let target = required.max(current);
    let add = (target - current).min(cfg.sample_cap_per_iter);
    let n = state.xbar.len();
    for scenario in stream.next_batch(add) {
        state.scenarios.push(ScenarioState {
            scenario,
            lambda: vec![0.0; n],
            d: None,
            x: state.xbar.clone(),
            first_seen: k,
        });
    }
    Ok(add)
}

/// Solves every scenario subproblem around the incumbent consensus point and
/// returns the solutions with their mean.
pub fn primal_step(
    state: &OuterState,
    rho: f64,
    instance: &InstanceSpec,
    bounds: &BoxBounds,
    oracle: &SubproblemOracle,
) -> Result<(Vec<ProxResult>, Vec<f64>)> {
    if state.scenarios.is_empty() {
        return Err(Error::Domain("primal step needs at least one scenario".into()));
    }
    let solves = state
        .scenarios
        .par_iter()
        .map(|s| {
            oracle.solve(&ProxQuery {
                omega: &s.scenario.omega,
                lambda: &s.lambda,
                xbar: &state.xbar,
                rho,
                family: &instance.family,
                bounds,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let xbar = mean(solves.iter().map(|r| r.x_opt.as_slice()), bounds.dim());
    Ok((solves, xbar))
}

/// Trust-region test: success iff the realized improvement is positive and
/// exceeds `η` times the improvement predicted on the previous sample.
/// Returns the verdict and the next radius.
pub fn accept_or_reject(improvement: f64, predicted: f64, delta: f64, cfg: &SolverConfig) -> (bool, f64) {
    let success = improvement > cfg.eta * predicted && improvement > 0.0;
    let next = if success {
        (cfg.gamma_tr * delta).min(cfg.delta_max)
    } else {
        (delta / cfg.gamma_tr).max(cfg.delta_min)
    };
    (success, next)
}

/// Stopping rule: small mean direction norm at the minimal radius, or the
/// iteration budget.
pub fn terminated(d_norm: f64, delta: f64, k: usize, cfg: &SolverConfig) -> Option<TerminationReason> {
    if d_norm < cfg.eps && delta <= cfg.delta_min {
        Some(TerminationReason::Converged)
    } else if k >= cfg.max_iters {
        Some(TerminationReason::IterationBudget)
    } else {
        None
    }
}

/// What happened inside one outer iteration.
#[derive(Debug, Clone)]
pub struct IterationTrace {
    pub k: usize,
    pub added: usize,
    pub previous_size: usize,
    /// `Σ_s gˢ` after the primal step.
    pub residual_sum: Vec<f64>,
    /// Sum of `‖λˢ‖` over the scenarios added this iteration, taken before
    /// any update.
    pub new_lambda_norm: f64,
    pub directions: Vec<DirectionState>,
    pub steps: Vec<Option<StepResult>>,
    pub delta_before: f64,
    pub delta_after: f64,
    /// Whether any candidate multiplier differs from the incumbent; only
    /// then is the trust-region test evaluated with fresh solves.
    pub multipliers_moved: bool,
    pub improvement: f64,
    pub predicted: f64,
    pub success: bool,
    pub record: IterationRecord,
}

pub struct AdaptiveSolver<'a> {
    instance: &'a InstanceSpec,
    cfg: SolverConfig,
    bounds: BoxBounds,
    oracle: SubproblemOracle,
    stream: ScenarioStream,
    state: OuterState,
    divisor: f64,
    seed: u64,
    termination: Option<TerminationReason>,
}

impl<'a> AdaptiveSolver<'a> {
    pub fn new(instance: &'a InstanceSpec, cfg: &SolverConfig) -> Result<Self> {
        instance.validate()?;
        cfg.validate()?;
        let seed = cfg.seed.unwrap_or(instance.seed);
        let divisor = cfg.window_divisor.unwrap_or((instance.n as f64).max(2.0));
        let cfg = SolverConfig {
            seed: Some(seed),
            window_divisor: Some(divisor),
            ..cfg.clone()
        };
        let bounds = instance.bounds();
        Ok(AdaptiveSolver {
            instance,
            state: OuterState {
                k: 0,
                xbar: bounds.center(),
                delta: cfg.delta0,
                scenarios: Vec::new(),
                cumulative_qps: 0,
                history: Vec::new(),
            },
            cfg,
            bounds,
            oracle: SubproblemOracle::new(),
            stream: ScenarioStream::new(instance.distribution.clone(), seed),
            divisor,
            seed,
            termination: None,
        })
    }

    pub fn state(&self) -> &OuterState {
        &self.state
    }

    /// Fully resolved configuration.
    pub fn config(&self) -> &SolverConfig {
        &self.cfg
    }

    pub fn termination(&self) -> Option<TerminationReason> {
        self.termination
    }

    /// Runs one outer iteration.
    pub fn step(&mut self) -> Result<IterationTrace> {
        let cfg = &self.cfg;
        let family = &self.instance.family;
        let bounds = &self.bounds;
        let k = self.state.k + 1;
        let previous_size = self.state.scenarios.len();
        let added = grow_sample(&mut self.state, cfg, &mut self.stream, k)?;
        let new_lambda_norm: f64 = self.state.scenarios[previous_size..].iter().map(|s| norm(&s.lambda)).sum();

        let state = &self.state;
        let big_n = state.scenarios.len();
        let dim = bounds.dim();
        let xbar_prev = state.xbar.clone();
        let (solves, xbar) = primal_step(state, cfg.rho, self.instance, bounds, &self.oracle)?;

        let mut directions = Vec::with_capacity(big_n);
        let mut residual_sum = vec![0.0; dim];
        for (s, r) in state.scenarios.iter().zip(&solves) {
            let g = residual(&r.x_opt, &xbar)?;
            for (acc, gi) in residual_sum.iter_mut().zip(&g) {
                *acc += gi;
            }
            // a zero previous direction would pin dˢ at zero for good
            let prev = s
                .d
                .as_deref()
                .filter(|d| !cfg.restart_directions || norm(d) >= DEGENERATE_DIRECTION);
            directions.push(nr_direction(prev, &g)?);
        }
        let phi0: Vec<f64> = state
            .scenarios
            .iter()
            .zip(&solves)
            .map(|(s, r)| augmented_value(r.h_value, &s.lambda, &r.x_opt, &xbar, cfg.rho))
            .collect();

        let delta_before = state.delta;
        let oracle = &self.oracle;
        let divisor = self.divisor;
        let steps = (0..big_n)
            .into_par_iter()
            .map(|i| -> Result<Option<StepResult>> {
                let d = &directions[i].d;
                let d_norm = norm(d);
                if d_norm < DEGENERATE_DIRECTION {
                    return Ok(None);
                }
                let params = WolfeParams::for_radius(cfg.m1, cfg.m2, delta_before, d_norm, divisor, cfg.ls_budget)?;
                let s = &state.scenarios[i];
                let x_s = &solves[i].x_opt;
                let q = ProxQuery {
                    omega: &s.scenario.omega,
                    lambda: &s.lambda,
                    xbar: &xbar_prev,
                    rho: cfg.rho,
                    family,
                    bounds,
                };
                // only scenario i moves; the others stay at their solutions
                let phi = |theta: f64| {
                    oracle
                        .aug_dual_value_with(&q, theta, d, |x_hat| {
                            (0..dim).map(|j| xbar[j] + (x_hat[j] - x_s[j]) / big_n as f64).collect()
                        })
                        .map(|e| e.value)
                };
                wolfe_search(phi, phi0[i], d_norm * d_norm, &params).map(Some)
            })
            .collect::<Result<Vec<_>>>()?;

        let mut moves: Vec<Vec<f64>> = directions
            .iter()
            .zip(&steps)
            .map(|(dir, st)| match st {
                Some(r) => dir.d.iter().map(|v| r.theta * v).collect(),
                None => vec![0.0; dim],
            })
            .collect();
        if cfg.project_duals {
            let shift = mean(moves.iter().map(|m| m.as_slice()), dim);
            for m in &mut moves {
                for (v, c) in m.iter_mut().zip(&shift) {
                    *v -= c;
                }
            }
        }
        let candidates: Vec<Vec<f64>> = state
            .scenarios
            .iter()
            .zip(&moves)
            .map(|(s, m)| s.lambda.iter().zip(m).map(|(l, v)| l + v).collect())
            .collect();

        let multipliers_moved = moves.iter().any(|m| norm_sq(m) > 0.0);
        let (improvement, predicted) = if !multipliers_moved {
            (0.0, 0.0)
        } else {
            let trial = state
                .scenarios
                .par_iter()
                .zip(&candidates)
                .map(|(s, lam)| {
                    oracle.solve(&ProxQuery {
                        omega: &s.scenario.omega,
                        lambda: lam,
                        xbar: &xbar_prev,
                        rho: cfg.rho,
                        family,
                        bounds,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            let trial_bar = mean(trial.iter().map(|r| r.x_opt.as_slice()), dim);
            let gains: Vec<f64> = trial
                .iter()
                .zip(&candidates)
                .zip(&phi0)
                .map(|((r, lam), p0)| augmented_value(r.h_value, lam, &r.x_opt, &trial_bar, cfg.rho) - p0)
                .collect();
            (gains.iter().sum(), gains[..previous_size].iter().sum())
        };
        let (success, delta_after) = accept_or_reject(improvement, predicted, delta_before, cfg);
        let d_norm = directions.iter().map(|d| norm(&d.d)).sum::<f64>() / big_n as f64;
        let incumbent = phi0.iter().sum::<f64>() / big_n as f64;

        let state = &mut self.state;
        for (((s, dir), cand), r) in state.scenarios.iter_mut().zip(&directions).zip(candidates).zip(solves) {
            if success {
                s.lambda = cand;
            }
            s.d = Some(dir.d.clone());
            s.x = r.x_opt;
        }
        state.k = k;
        state.xbar = xbar;
        state.delta = delta_after;
        state.cumulative_qps = self.oracle.solved();

        let views: Vec<ScenarioView> = state
            .scenarios
            .iter()
            .map(|s| ScenarioView {
                omega: &s.scenario.omega,
                lambda: &s.lambda,
                x: &s.x,
            })
            .collect();
        let rec = record(
            &RecordInput {
                scenarios: &views,
                xbar_prev: &xbar_prev,
                xbar: &state.xbar,
                rho: cfg.rho,
                family,
                bounds,
            },
            RecordFlags {
                k,
                qps_cumulative: state.cumulative_qps,
                success,
                delta: delta_after,
                d_norm,
                dual_value_incumbent: incumbent,
            },
        )?;
        state.history.push(rec.clone());
        self.termination = terminated(d_norm, delta_after, k, cfg);

        Ok(IterationTrace {
            k,
            added,
            previous_size,
            residual_sum,
            new_lambda_norm,
            directions,
            steps,
            delta_before,
            delta_after,
            multipliers_moved,
            improvement,
            predicted,
            success,
            record: rec,
        })
    }

    /// Iterates until a stopping rule fires.
    pub fn run(mut self) -> Result<SolveReport> {
        while self.termination.is_none() {
            self.step()?;
        }
        Ok(self.into_report())
    }

    pub fn into_report(self) -> SolveReport {
        let lambda = self.state.scenarios.iter().map(|s| s.lambda.clone()).collect();
        SolveReport::new(
            self.instance,
            self.seed,
            AlgorithmConfig::Adaptive(self.cfg),
            self.termination.unwrap_or(TerminationReason::IterationBudget),
            self.state.xbar,
            lambda,
            self.state.history,
        )
    }
}

/// Runs the adaptive solver to termination.
pub fn solve(instance: &InstanceSpec, cfg: &SolverConfig) -> Result<SolveReport> {
    AdaptiveSolver::new(instance, cfg)?.run()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sample_size_examples() {
        assert_eq!(required_sample_size(0.1, 1.0, 1.0, 1.0).unwrap(), 24);
        assert_eq!(required_sample_size(0.1, 1.0, 1.0, 0.5).unwrap(), 384);
        assert!(required_sample_size(1.0, 1.0, 1.0, 1.0).is_err());
        assert!(required_sample_size(0.1, 1.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn doubling_radius_divides_by_sixteen() {
        let raw = |d: f64| -8.0 * (0.05f64).ln() / d.powi(4);
        for d in [0.1, 0.25, 0.5] {
            assert!((raw(d) / raw(2.0 * d) - 16.0).abs() < 1e-9);
            assert!(required_sample_size(0.1, 1.0, 1.0, d).unwrap() >= required_sample_size(0.1, 1.0, 1.0, 2.0 * d).unwrap());
        }
    }

    #[test]
    fn trust_region_verdicts() {
        let cfg = SolverConfig::default();
        // nonpositive prediction with real improvement
        assert_eq!(accept_or_reject(0.1, -1.0, 0.5, &cfg), (true, 1.0));
        // tie between the two sides is rejected
        assert_eq!(accept_or_reject(0.5, 1.0, 0.5, &cfg), (false, 0.25));
        // capped at delta_max
        assert_eq!(accept_or_reject(1.0, 0.0, 1.0, &cfg), (true, 1.0));
        // floor at delta_min
        assert_eq!(accept_or_reject(-1.0, 0.0, 1e-3, &cfg), (false, 1e-3));
        // no improvement never passes even when the prediction is negative
        assert!(!accept_or_reject(0.0, -1.0, 0.5, &cfg).0);
    }

    #[test]
    fn termination_rules() {
        let cfg = SolverConfig::default();
        assert_eq!(terminated(0.0, cfg.delta_min, 1, &cfg), Some(TerminationReason::Converged));
        assert_eq!(terminated(0.0, 0.5, 1, &cfg), None);
        assert_eq!(terminated(1.0, cfg.delta_min, 1, &cfg), None);
        assert_eq!(terminated(1.0, 0.5, cfg.max_iters, &cfg), Some(TerminationReason::IterationBudget));
    }

    #[test]
    fn config_validation_names_fields() {
        let bad = SolverConfig { eta: 1.0, ..SolverConfig::default() };
        assert!(bad.validate().unwrap_err().to_string().contains("eta"));
        let bad = SolverConfig { delta0: 2.0, ..SolverConfig::default() };
        assert!(bad.validate().unwrap_err().to_string().contains("delta0"));
        let bad = SolverConfig { m1: 0.05, ..SolverConfig::default() };
        assert!(bad.validate().unwrap_err().to_string().contains("m1"));
        SolverConfig::default().validate().unwrap();
    }
}
