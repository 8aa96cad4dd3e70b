//! Per-iteration invariant checks and a random instance generator.

use adaptive_ph::controller::{AdaptiveSolver, IterationTrace, SolverConfig};
use adaptive_ph::model::{AffinePiece, Component, DistributionSpec, FunctionFamily, InstanceSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// A small random instance from either family, with a config whose radius
/// range and sample cap vary.
pub fn random_setup(seed: u64) -> (InstanceSpec, SolverConfig) {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let n = rng.random_range(1..=3);
    let (family, m) = if seed.is_multiple_of(2) {
        (FunctionFamily::QuadraticTracking {}, n)
    } else {
        let j = rng.random_range(1..=4);
        let pieces = (0..j)
            .map(|_| AffinePiece {
                a0: (0..n).map(|_| rng.random_range(-2.0..2.0)).collect(),
                a_omega: vec![],
                b0: rng.random_range(-1.0..1.0),
                b_omega: vec![rng.random_range(-1.0..1.0)],
            })
            .collect();
        (FunctionFamily::MaxAffine { pieces }, 1)
    };
    let distribution = if rng.random_bool(0.5) {
        DistributionSpec::Generator {
            components: (0..m)
                .map(|_| {
                    let low = rng.random_range(-2.0..1.0);
                    Component::Uniform { low, high: low + rng.random_range(0.5..4.0) }
                })
                .collect(),
        }
    } else {
        let count = rng.random_range(1..=5);
        let raw: Vec<f64> = (0..count).map(|_| rng.random_range(0.1..1.0)).collect();
        let total: f64 = raw.iter().sum();
        let mut weights: Vec<f64> = raw.iter().map(|w| w / total).collect();
        let head: f64 = weights[..count - 1].iter().sum();
        weights[count - 1] = 1.0 - head;
        DistributionSpec::FiniteSet {
            scenarios: (0..count)
                .map(|_| (0..m).map(|_| rng.random_range(-3.0..3.0)).collect())
                .collect(),
            weights,
        }
    };
    let instance = InstanceSpec {
        name: format!("random-{seed}"),
        n,
        box_lo: vec![-5.0; n],
        box_hi: vec![5.0; n],
        seed,
        family,
        distribution,
    };
    let delta_max = rng.random_range(0.5..2.0);
    let delta_min = delta_max / rng.random_range(2.0..64.0);
    let cfg = SolverConfig {
        rho: rng.random_range(0.5..2.0),
        delta_max,
        delta_min,
        delta0: delta_max,
        eps: 0.05,
        sample_cap_per_iter: rng.random_range(1..=8),
        max_iters: 10,
        ..SolverConfig::default()
    };
    (instance, cfg)
}

/// Checks every per-iteration invariant; returns the first violation.
pub fn check_trace(t: &IterationTrace, cfg: &SolverConfig, previous_qps: u64) -> Result<(), String> {
    let size = t.record.sample_size;
    if size < t.previous_size {
        return Err(format!("k {}: sample shrank from {} to {size}", t.k, t.previous_size));
    }
    if t.residual_sum.iter().any(|v| v.abs() > 1e-9 * size as f64) {
        return Err(format!("k {}: residual sum {:?}", t.k, t.residual_sum));
    }
    if t.new_lambda_norm != 0.0 {
        return Err(format!("k {}: new scenarios start with |λ| = {}", t.k, t.new_lambda_norm));
    }
    for (i, d) in t.directions.iter().enumerate() {
        let dn = norm(&d.d);
        let bound = match &d.d_prev {
            Some(p) => norm(&d.g).min(norm(p)),
            None => norm(&d.g),
        };
        if dn > bound + 1e-12 {
            return Err(format!("k {}: scenario {i} direction {dn} exceeds {bound}", t.k));
        }
    }
    let divisor = cfg.window_divisor.expect("resolved config");
    for (i, (st, d)) in t.steps.iter().zip(&t.directions).enumerate() {
        if let Some(st) = st {
            let len = st.theta * norm(&d.d);
            let lo = t.delta_before / divisor;
            if !(len > lo && len <= t.delta_before * (1.0 + 1e-12)) {
                return Err(format!("k {}: scenario {i} step {len} outside ({lo}, {}]", t.k, t.delta_before));
            }
        }
    }
    for delta in [t.delta_before, t.delta_after] {
        if !(cfg.delta_min <= delta && delta <= cfg.delta_max) {
            return Err(format!("k {}: radius {delta} outside bounds", t.k));
        }
    }
    let grown = (cfg.gamma_tr * t.delta_before).min(cfg.delta_max);
    let shrunk = (t.delta_before / cfg.gamma_tr).max(cfg.delta_min);
    let expected = if t.success { grown } else { shrunk };
    if t.delta_after != expected {
        return Err(format!("k {}: radius moved {} -> {}", t.k, t.delta_before, t.delta_after));
    }
    if t.success && !(t.improvement > 0.0) {
        return Err(format!("k {}: accepted a step with improvement {}", t.k, t.improvement));
    }
    if t.success && t.record.dual_value < t.record.dual_value_incumbent - 1e-12 {
        return Err(format!(
            "k {}: accepted dual {} below incumbent {}",
            t.k, t.record.dual_value, t.record.dual_value_incumbent
        ));
    }
    let evals: u64 = t.steps.iter().flatten().map(|s| s.evals as u64).sum();
    let trial = if t.multipliers_moved { size as u64 } else { 0 };
    let expected_qps = previous_qps + size as u64 + evals + trial;
    if t.record.qps_cumulative != expected_qps {
        return Err(format!(
            "k {}: qps {} but the operations account for {expected_qps}",
            t.k, t.record.qps_cumulative
        ));
    }
    Ok(())
}

/// Steps random instances until `iterations` traces have been checked.
pub fn run_invariant_suite(iterations: usize) -> Result<usize, String> {
    let mut checked = 0;
    let mut seed = 0;
    while checked < iterations {
        let (instance, cfg) = random_setup(seed);
        let mut solver = AdaptiveSolver::new(&instance, &cfg).map_err(|e| e.to_string())?;
        let resolved = solver.config().clone();
        let mut qps = 0;
        while solver.termination().is_none() && checked < iterations {
            let t = solver.step().map_err(|e| format!("seed {seed}: {e}"))?;
            check_trace(&t, &resolved, qps).map_err(|e| format!("seed {seed}: {e}"))?;
            qps = t.record.qps_cumulative;
            checked += 1;
        }
        seed += 1;
    }
    Ok(checked)
}
