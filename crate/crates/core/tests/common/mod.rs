//! Reference computations that share no code with the solver.
#![allow(dead_code)]

use adaptive_ph::model::{AffinePiece, BoxBounds, FunctionFamily};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

/// Minimizer of a convex function on `[lo, hi]`: a scan with step 1e-4,
/// then ternary search on the two cells around the best grid point.
pub fn grid_argmin_1d<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64) -> f64 {
    let step = 1e-4;
    let cells = ((hi - lo) / step).ceil() as usize;
    let mut best = (f(lo), 0usize);
    for i in 1..=cells {
        let x = (lo + i as f64 * step).min(hi);
        let v = f(x);
        if v < best.0 {
            best = (v, i);
        }
    }
    let center = lo + best.1 as f64 * step;
    let (mut a, mut b) = ((center - step).max(lo), (center + step).min(hi));
    for _ in 0..200 {
        let m1 = a + (b - a) / 3.0;
        let m2 = b - (b - a) / 3.0;
        if f(m1) <= f(m2) {
            b = m2;
        } else {
            a = m1;
        }
    }
    0.5 * (a + b)
}

/// Piecewise-linear prox by its dual: maximize over the simplex
///
/// ```text
/// q(μ) = min_{x∈box} Σ_j μ_j (a_jᵀx + b_j) + ⟨λ, x⟩ + ρ/2 ‖x − c‖²
/// ```
///
/// with restarted accelerated projected gradient ascent. The inner minimizer
/// `x(μ)` is a clamp. Returns `x(μ)` and a certified radius: strong convexity
/// and weak duality give `ρ/2 ‖x(μ) − x*‖² ≤ P(x(μ)) − q(μ)`.
pub fn dual_prox_oracle(
    slopes: &[Vec<f64>],
    intercepts: &[f64],
    lambda: &[f64],
    center: &[f64],
    rho: f64,
    lo: &[f64],
    hi: &[f64],
) -> (Vec<f64>, f64) {
    let j = slopes.len();
    let n = center.len();
    let x_of = |mu: &[f64]| -> Vec<f64> {
        (0..n)
            .map(|i| {
                let grad: f64 = (0..j).map(|p| mu[p] * slopes[p][i]).sum::<f64>() + lambda[i];
                (center[i] - grad / rho).clamp(lo[i], hi[i])
            })
            .collect()
    };
    let piece = |p: usize, x: &[f64]| slopes[p].iter().zip(x).map(|(a, xi)| a * xi).sum::<f64>() + intercepts[p];
    let rest = |x: &[f64]| {
        lambda.iter().zip(x).map(|(l, xi)| l * xi).sum::<f64>()
            + 0.5 * rho * x.iter().zip(center).map(|(xi, c)| (xi - c) * (xi - c)).sum::<f64>()
    };
    let primal = |x: &[f64]| (0..j).map(|p| piece(p, x)).fold(f64::NEG_INFINITY, f64::max) + rest(x);
    let dual = |mu: &[f64]| {
        let x = x_of(mu);
        (0..j).map(|p| mu[p] * piece(p, &x)).sum::<f64>() + rest(&x)
    };
    let frob: f64 = slopes.iter().flatten().map(|v| v * v).sum();
    let step = rho / frob.max(1e-12);
    let mut mu = vec![1.0 / j as f64; j];
    let mut y = mu.clone();
    let mut t = 1.0f64;
    let mut best = (f64::INFINITY, x_of(&mu));
    for it in 0..400_000 {
        let x = x_of(&y);
        let next = project_simplex(&(0..j).map(|p| y[p] + step * piece(p, &x)).collect::<Vec<_>>());
        // restart the momentum when it points downhill
        let gain: f64 = (0..j).map(|p| (next[p] - mu[p]) * (y[p] - next[p])).sum();
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        if gain > 0.0 {
            t = 1.0;
            y = next.clone();
        } else {
            y = (0..j).map(|p| next[p] + (t - 1.0) / t_next * (next[p] - mu[p])).collect();
            t = t_next;
        }
        mu = next;
        if it % 64 == 0 {
            let x = x_of(&mu);
            let radius = (2.0 * (primal(&x) - dual(&mu)).max(0.0) / rho).sqrt();
            if radius < best.0 {
                best = (radius, x);
            }
            if best.0 < 1e-7 {
                break;
            }
        }
    }
    (best.1, best.0)
}

fn project_simplex(v: &[f64]) -> Vec<f64> {
    let mut u = v.to_vec();
    u.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let mut cumulative = 0.0;
    let mut tau = 0.0;
    for (i, ui) in u.iter().enumerate() {
        cumulative += ui;
        let t = (cumulative - 1.0) / (i + 1) as f64;
        if ui - t > 0.0 {
            tau = t;
        }
    }
    v.iter().map(|x| (x - tau).max(0.0)).collect()
}

/// Monte Carlo value of `E ½(x − ω)²` for `ω ~ U(0, 4)`.
pub fn mc_quad_uniform_0_4(x: f64, draws: usize, seed: u64) -> f64 {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut total = 0.0;
    for _ in 0..draws {
        let w: f64 = rng.random_range(0.0..4.0);
        total += 0.5 * (x - w) * (x - w);
    }
    total / draws as f64
}

pub struct PieceCase {
    pub family: FunctionFamily,
    pub slopes: Vec<Vec<f64>>,
    pub intercepts: Vec<f64>,
    pub lambda: Vec<f64>,
    pub center: Vec<f64>,
    pub rho: f64,
    pub bounds: BoxBounds,
}

/// Random max-affine prox query with constant pieces, `n ≤ 4`, `J ≤ 6`.
pub fn random_piece_case(rng: &mut ChaCha20Rng) -> PieceCase {
    let n = rng.random_range(1..=4);
    let j = rng.random_range(1..=6);
    let slopes: Vec<Vec<f64>> = (0..j)
        .map(|_| (0..n).map(|_| rng.random_range(-3.0..3.0)).collect())
        .collect();
    let intercepts: Vec<f64> = (0..j).map(|_| rng.random_range(-2.0..2.0)).collect();
    let pieces = slopes
        .iter()
        .zip(&intercepts)
        .map(|(a, b)| AffinePiece {
            a0: a.clone(),
            a_omega: vec![],
            b0: *b,
            b_omega: vec![],
        })
        .collect();
    PieceCase {
        family: FunctionFamily::MaxAffine { pieces },
        lambda: (0..n).map(|_| rng.random_range(-2.0..2.0)).collect(),
        center: (0..n).map(|_| rng.random_range(-2.0..2.0)).collect(),
        rho: rng.random_range(0.5..3.0),
        bounds: BoxBounds {
            lo: (0..n).map(|_| rng.random_range(-3.0..-0.5)).collect(),
            hi: (0..n).map(|_| rng.random_range(0.5..3.0)).collect(),
        },
        slopes,
        intercepts,
    }
}

pub mod invariants;
