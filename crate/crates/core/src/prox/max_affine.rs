//! Subproblems over a max-affine cost: the strongly convex proximal problem
//! `min_{x∈X} max_j (a_jᵀx + b_j) + ⟨λ, x − c⟩ + ρ/2‖x − c‖²` and the plain
//! Lagrangian problem `min_{x∈X} max_j (a_jᵀx + b_j) + ⟨λ, x⟩`.

use itertools::Itertools;
use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::model::{ActivePieces, BoxBounds};
use crate::vector::{dist_sq, dot};

/// Largest piece count solved by exhaustive active-set enumeration.
pub const MAX_EXACT_PIECES: usize = 12;
/// Iterate-distance tolerance of the iterative fallback.
pub const ITERATIVE_TOL: f64 = 1e-10;
/// Iteration budget of the iterative fallback.
pub const ITERATIVE_BUDGET: usize = 1_000_000;

const POLISH_TAUS: [f64; 6] = [1e-9, 1e-6, 1e-3, 1e-1, 1.0, f64::INFINITY];
const POLISH_COMBO_CAP: usize = 50_000;
const LP_VERTEX_CAP: usize = 200_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Side {
    Lo,
    Hi,
}

type Face = (usize, Side);

struct Candidate {
    x: Vec<f64>,
    t: f64,
    mu: Vec<f64>,
}

pub(crate) struct PieceQp<'a> {
    pub pieces: &'a ActivePieces,
    pub lambda: &'a [f64],
    pub center: &'a [f64],
    pub rho: f64,
    pub bounds: &'a BoxBounds,
}

impl<'a> PieceQp<'a> {
    fn n(&self) -> usize {
        self.center.len()
    }

    pub fn objective(&self, x: &[f64]) -> f64 {
        let shifted: f64 = self
            .lambda
            .iter()
            .zip(x)
            .zip(self.center)
            .map(|((l, xi), ci)| l * (xi - ci))
            .sum();
        self.pieces.max_value(x) + shifted + 0.5 * self.rho * dist_sq(x, self.center)
    }

    fn bound(&self, (i, side): Face) -> f64 {
        match side {
            Side::Lo => self.bounds.lo[i],
            Side::Hi => self.bounds.hi[i],
        }
    }

    /// Solves the stationarity system with pieces `active` held equal and
    /// maximal and the coordinates in `faces` pinned to their bounds.
    fn solve_active(&self, active: &[usize], faces: &[Face]) -> Option<Candidate> {
        let n = self.n();
        let mut pinned: Vec<Option<f64>> = vec![None; n];
        for &f in faces {
            pinned[f.0] = Some(self.bound(f));
        }
        let base: Vec<f64> = (0..n)
            .map(|i| pinned[i].unwrap_or(self.center[i] - self.lambda[i] / self.rho))
            .collect();
        let free: Vec<usize> = (0..n).filter(|&i| pinned[i].is_none()).collect();
        let r = active.len();
        let mut m = DMatrix::<f64>::zeros(r + 1, r + 1);
        let mut rhs = DVector::<f64>::zeros(r + 1);
        for (p, &j) in active.iter().enumerate() {
            let aj = &self.pieces.slopes[j];
            for (q, &l) in active.iter().enumerate() {
                let al = &self.pieces.slopes[l];
                m[(p, q)] = free.iter().map(|&i| aj[i] * al[i]).sum::<f64>() / self.rho;
            }
            m[(p, r)] = 1.0;
            m[(r, p)] = 1.0;
            rhs[p] = dot(aj, &base) + self.pieces.intercepts[j];
        }
        rhs[r] = 1.0;
        let sol = m.lu().solve(&rhs)?;
        if sol.iter().any(|v| !v.is_finite()) {
            return None;
        }
        let mu: Vec<f64> = sol.iter().take(r).copied().collect();
        let t = sol[r];
        let mut x = base;
        for &i in &free {
            let pull: f64 = active.iter().zip(&mu).map(|(&j, m)| m * self.pieces.slopes[j][i]).sum();
            x[i] -= pull / self.rho;
        }
        Some(Candidate { x, t, mu })
    }

    /// KKT verification. With `respect_box` false the box is ignored.
    fn verify(&self, c: &Candidate, active: &[usize], faces: &[Face], respect_box: bool) -> bool {
        let tol_v = 1e-9 * (1.0 + c.t.abs());
        if c.mu.iter().any(|&m| m < -1e-9) {
            return false;
        }
        if (c.mu.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return false;
        }
        for j in 0..self.pieces.len() {
            let v = self.pieces.value(j, &c.x);
            if active.contains(&j) {
                if (v - c.t).abs() > 1e-8 * (1.0 + c.t.abs()) {
                    return false;
                }
            } else if v > c.t + tol_v {
                return false;
            }
        }
        if !respect_box {
            return true;
        }
        for i in 0..self.n() {
            let (lo, hi) = (self.bounds.lo[i], self.bounds.hi[i]);
            let tol_x = 1e-10 * (1.0 + lo.abs().max(hi.abs()));
            if c.x[i] < lo - tol_x || c.x[i] > hi + tol_x {
                return false;
            }
        }
        for &(i, side) in faces {
            let g = self.rho * (c.x[i] - self.center[i])
                + self.lambda[i]
                + active.iter().zip(&c.mu).map(|(&j, m)| m * self.pieces.slopes[j][i]).sum::<f64>();
            let tol_g = 1e-9 * (1.0 + self.lambda[i].abs() + self.rho * self.center[i].abs());
            let ok = match side {
                Side::Lo => g >= -tol_g,
                Side::Hi => g <= tol_g,
            };
            if !ok {
                return false;
            }
        }
        true
    }

    /// Minimizer ignoring the box, by enumeration of active piece sets in
    /// (size, lexicographic) order. `None` if the piece count exceeds
    /// [`MAX_EXACT_PIECES`] or no set verifies.
    pub fn unconstrained_exact(&self) -> Option<Vec<f64>> {
        let count = self.pieces.len();
        if count > MAX_EXACT_PIECES {
            return None;
        }
        for size in 1..=count.min(self.n() + 1) {
            for active in (0..count).combinations(size) {
                if let Some(c) = self.solve_active(&active, &[]) {
                    if self.verify(&c, &active, &[], false) {
                        return Some(c.x);
                    }
                }
            }
        }
        None
    }

    /// Tries active sets built from the pieces and bounds that are nearly
    /// active at `x`, widening the tolerance until one passes verification.
    fn polish(&self, x: &[f64]) -> Option<Vec<f64>> {
        let n = self.n();
        let values: Vec<f64> = (0..self.pieces.len()).map(|j| self.pieces.value(j, x)).collect();
        let top = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        for tau in POLISH_TAUS {
            let near: Vec<usize> = (0..values.len())
                .filter(|&j| values[j] >= top - tau * (1.0 + top.abs()))
                .collect();
            let mut options: Vec<Vec<Option<Side>>> = Vec::with_capacity(n);
            for i in 0..n {
                let (lo, hi) = (self.bounds.lo[i], self.bounds.hi[i]);
                let reach = tau * (1.0 + (hi - lo));
                let mut opts = vec![None];
                if x[i] - lo <= reach {
                    opts.push(Some(Side::Lo));
                }
                if hi - x[i] <= reach {
                    opts.push(Some(Side::Hi));
                }
                options.push(opts);
            }
            let assignments: usize = options.iter().map(Vec::len).product();
            if assignments.saturating_mul(1usize << near.len().min(20)) > POLISH_COMBO_CAP {
                continue;
            }
            let mut face_sets: Vec<Vec<Face>> = options
                .iter()
                .map(|o| o.iter().copied())
                .multi_cartesian_product()
                .map(|choice| {
                    choice
                        .into_iter()
                        .enumerate()
                        .filter_map(|(i, s)| s.map(|s| (i, s)))
                        .collect()
                })
                .collect();
            if n == 0 {
                face_sets = vec![Vec::new()];
            }
            face_sets.sort_by_key(Vec::len);
            for faces in &face_sets {
                let max_active = (n - faces.len() + 1).min(near.len());
                for size in 1..=max_active {
                    for active in near.iter().copied().combinations(size) {
                        if let Some(mut c) = self.solve_active(&active, faces) {
                            if self.verify(&c, &active, faces, true) {
                                self.bounds.clamp(&mut c.x);
                                return Some(c.x);
                            }
                        }
                    }
                }
            }
        }
        None
    }

    /// Projected proximal subgradient iteration, polished into an exact
    /// active-set solution whenever the iterate identifies one.
    pub fn iterative(&self, start: &[f64]) -> Result<Vec<f64>> {
        let n = self.n();
        let mut x = self.bounds.clamped(start);
        let mut best = x.clone();
        let mut best_obj = self.objective(&x);
        let mut moved = f64::INFINITY;
        let mut next_polish = 0usize;
        for t in 0..ITERATIVE_BUDGET {
            if t == next_polish {
                if let Some(sol) = self.polish(&x) {
                    return Ok(sol);
                }
                next_polish = if t < 4096 { (2 * t).max(8) } else { t + 4096 };
            }
            let s = &self.pieces.slopes[self.pieces.argmax(&x)];
            // step 1/(ρ(t+1)): a running average of single-piece prox points
            let w = (t + 1) as f64;
            let mut next = vec![0.0; n];
            for i in 0..n {
                let target = self.center[i] - (self.lambda[i] + s[i]) / self.rho;
                next[i] = ((w * x[i] + target) / (w + 1.0)).clamp(self.bounds.lo[i], self.bounds.hi[i]);
            }
            moved = dist_sq(&next, &x).sqrt();
            x = next;
            let obj = self.objective(&x);
            if obj < best_obj {
                best_obj = obj;
                best.clone_from(&x);
            }
            if moved <= ITERATIVE_TOL {
                return Ok(self.polish(&best).unwrap_or(best));
            }
        }
        Err(Error::NonConvergence {
            best,
            residual: moved,
            iterations: ITERATIVE_BUDGET,
        })
    }
}

/// `min_{x∈X} max_j (a_j + λ)ᵀx + b_j` by enumerating the vertices of the
/// epigraph polyhedron. Returns the minimizer and the value `max_j(..)`
/// (without the `⟨λ, x⟩` split out).
pub(crate) fn lagrangian_lp(pieces: &ActivePieces, lambda: &[f64], bounds: &BoxBounds) -> Result<Vec<f64>> {
    let n = lambda.len();
    let count = pieces.len();
    let tilted: Vec<Vec<f64>> = pieces
        .slopes
        .iter()
        .map(|a| a.iter().zip(lambda).map(|(ai, li)| ai + li).collect())
        .collect();
    let objective = |x: &[f64]| -> f64 {
        (0..count)
            .map(|j| dot(&tilted[j], x) + pieces.intercepts[j])
            .fold(f64::NEG_INFINITY, f64::max)
    };

    let mut budget = 0usize;
    for pinned in 0..=n {
        let active = n - pinned + 1;
        if active > count {
            continue;
        }
        budget += binomial(n, pinned) * (1usize << pinned) * binomial(count, active);
    }
    if budget > LP_VERTEX_CAP {
        return Err(Error::Unsupported(format!(
            "Lagrangian subproblem with n = {n} and {count} pieces needs {budget} vertex solves"
        )));
    }

    let mut best: Option<(f64, Vec<f64>)> = None;
    for pinned in 0..=n {
        let active_size = n - pinned + 1;
        if active_size > count {
            continue;
        }
        for coords in (0..n).combinations(pinned) {
            for sides in 0..(1usize << pinned) {
                let mut x = vec![0.0; n];
                let mut is_pinned = vec![false; n];
                for (b, &i) in coords.iter().enumerate() {
                    x[i] = if sides >> b & 1 == 0 { bounds.lo[i] } else { bounds.hi[i] };
                    is_pinned[i] = true;
                }
                let free: Vec<usize> = (0..n).filter(|&i| !is_pinned[i]).collect();
                for active in (0..count).combinations(active_size) {
                    // unknowns: x_free, t
                    let k = free.len();
                    let mut m = DMatrix::<f64>::zeros(k + 1, k + 1);
                    let mut rhs = DVector::<f64>::zeros(k + 1);
                    for (row, &j) in active.iter().enumerate() {
                        for (col, &i) in free.iter().enumerate() {
                            m[(row, col)] = tilted[j][i];
                        }
                        m[(row, k)] = -1.0;
                        let fixed: f64 = coords.iter().map(|&i| tilted[j][i] * x[i]).sum();
                        rhs[row] = -pieces.intercepts[j] - fixed;
                    }
                    let Some(sol) = m.lu().solve(&rhs) else { continue };
                    let mut cand = x.clone();
                    for (col, &i) in free.iter().enumerate() {
                        cand[i] = sol[col];
                    }
                    if cand.iter().any(|v| !v.is_finite()) || !bounds.contains(&cand, 1e-9) {
                        continue;
                    }
                    bounds.clamp(&mut cand);
                    let v = objective(&cand);
                    if best.as_ref().is_none_or(|(bv, _)| v < *bv) {
                        best = Some((v, cand));
                    }
                }
            }
        }
    }
    best.map(|(_, x)| x)
        .ok_or_else(|| Error::Domain("no vertex of the Lagrangian subproblem was found".into()))
}

fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    (0..k).fold(1usize, |acc, i| acc.saturating_mul(n - i) / (i + 1))
}
