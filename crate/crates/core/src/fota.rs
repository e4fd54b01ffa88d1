//! Fractional optimal transport assignment.
//!
//! Tracks carry mass `p`, detections mass `q`, and exactly `s` units are
//! transported between them. The cost matrix is extended with one dustbin row
//! and one dustbin column that absorb the untransported mass:
//!
//! ```text
//! C̄ = | C      ε·1          |     p̄ = [p, ‖q‖₁ - s]
//!     | ε·1ᵀ   2ε + max(C)  |     q̄ = [q, ‖p‖₁ - s]
//! ```
//!
//! The entropic problem `min ⟨C̄, π⟩ + γ Σ π (log π - 1)` over couplings with
//! marginals `p̄, q̄` is solved by Sinkhorn-Knopp scaling, `π = diag(v) W diag(u)`
//! with `W = exp(-C̄/γ)`. Scalings are kept as logarithms.
//!
//! With both dustbin masses fixed, `ε` only shifts the objective by a constant;
//! how much mass reaches the dustbins is set by `s`. [`fraction_within_bound`]
//! picks the `s` under which every transported unit can stay at cost `≤ ε`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

pub const DEFAULT_GAMMA: f64 = 0.1;
pub const DEFAULT_MAX_ITERS: usize = 50;
pub const DEFAULT_TOL: f64 = 1e-6;
pub const DEFAULT_MIN_MASS: f64 = 0.3;

/// Largest instance `lp_oracle` accepts, in interior cells.
pub const ORACLE_MAX_CELLS: usize = 64;

#[derive(Debug, Clone, PartialEq)]
pub struct TransportProblem {
    /// N×M interior costs (tracks × detections).
    pub cost: DMatrix<f64>,
    pub p: Vec<f64>,
    pub q: Vec<f64>,
    /// Transported fraction, `0 < s ≤ min(‖p‖₁, ‖q‖₁)`.
    pub s: f64,
    pub epsilon: f64,
    pub gamma: f64,
    pub max_iters: usize,
    pub tol: f64,
}

impl TransportProblem {
    /// Problem with default `s = min(‖p‖₁, ‖q‖₁)`, `ε = 0`, `γ = 0.1`, 50 sweeps.
    pub fn new(cost: DMatrix<f64>, p: Vec<f64>, q: Vec<f64>) -> Self {
        let s = p.iter().sum::<f64>().min(q.iter().sum::<f64>());
        Self {
            cost,
            p,
            q,
            s,
            epsilon: 0.0,
            gamma: DEFAULT_GAMMA,
            max_iters: DEFAULT_MAX_ITERS,
            tol: DEFAULT_TOL,
        }
    }

    /// Unit masses on both sides.
    pub fn uniform(cost: DMatrix<f64>) -> Self {
        let (n, m) = cost.shape();
        Self::new(cost, vec![1.0; n], vec![1.0; m])
    }

    pub fn with_s(mut self, s: f64) -> Self {
        self.s = s;
        self
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Self {
        self.epsilon = epsilon;
        self
    }

    pub fn with_gamma(mut self, gamma: f64) -> Self {
        self.gamma = gamma;
        self
    }

    pub fn with_max_iters(mut self, max_iters: usize) -> Self {
        self.max_iters = max_iters;
        self
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn num_tracks(&self) -> usize {
        self.cost.nrows()
    }

    pub fn num_detections(&self) -> usize {
        self.cost.ncols()
    }

    pub fn validate(&self) -> Result<()> {
        let (n, m) = self.cost.shape();
        if n == 0 || m == 0 {
            return invalid("cost matrix must be non-empty");
        }
        if self.p.len() != n || self.q.len() != m {
            return invalid(format!(
                "mass vectors ({}, {}) do not match a {n}x{m} cost matrix",
                self.p.len(),
                self.q.len()
            ));
        }
        if self.cost.iter().any(|c| !c.is_finite()) {
            return invalid("cost entries must be finite");
        }
        if self.p.iter().chain(self.q.iter()).any(|v| !(v.is_finite() && *v > 0.0)) {
            return invalid("masses must be finite and positive");
        }
        let bound = self.p.iter().sum::<f64>().min(self.q.iter().sum::<f64>());
        if !(self.s > 0.0 && self.s <= bound * (1.0 + 1e-12)) {
            return invalid(format!("fraction s = {} outside (0, {bound}]", self.s));
        }
        if !(self.epsilon.is_finite() && self.epsilon >= 0.0) {
            return invalid("epsilon must be finite and >= 0");
        }
        if !(self.gamma.is_finite() && self.gamma > 0.0) {
            return invalid("gamma must be > 0");
        }
        if self.max_iters == 0 {
            return invalid("max_iters must be >= 1");
        }
        if !(self.tol.is_finite() && self.tol > 0.0) {
            return invalid("tol must be > 0");
        }
        Ok(())
    }

    /// Extended marginals `(p̄, q̄)`. Dustbin masses are clamped at zero.
    pub fn extended_masses(&self) -> (Vec<f64>, Vec<f64>) {
        let sp: f64 = self.p.iter().sum();
        let sq: f64 = self.q.iter().sum();
        let mut p = self.p.clone();
        p.push((sq - self.s).max(0.0));
        let mut q = self.q.clone();
        q.push((sp - self.s).max(0.0));
        (p, q)
    }

    pub fn extended_cost(&self) -> Result<DMatrix<f64>> {
        extend_cost(&self.cost, self.epsilon)
    }
}

/// Appends the dustbin row and column.
pub fn extend_cost(cost: &DMatrix<f64>, epsilon: f64) -> Result<DMatrix<f64>> {
    let (n, m) = cost.shape();
    if n == 0 || m == 0 {
        return invalid("cannot extend an empty cost matrix");
    }
    if cost.iter().any(|c| !c.is_finite()) {
        return invalid("cost entries must be finite");
    }
    if !(epsilon.is_finite() && epsilon >= 0.0) {
        return invalid("epsilon must be finite and >= 0");
    }
    let corner = 2.0 * epsilon + cost.max();
    Ok(DMatrix::from_fn(n + 1, m + 1, |i, j| match (i < n, j < m) {
        (true, true) => cost[(i, j)],
        (false, false) => corner,
        _ => epsilon,
    }))
}

/// Result of the Sinkhorn iterations on the extended problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransportPlan {
    /// (N+1)×(M+1) coupling; the last row and column are the dustbins.
    pub plan: DMatrix<f64>,
    pub iterations_used: usize,
    /// Max absolute deviation of any row or column sum from its target mass.
    pub marginal_error: f64,
    pub converged: bool,
}

impl TransportPlan {
    pub fn num_tracks(&self) -> usize {
        self.plan.nrows() - 1
    }

    pub fn num_detections(&self) -> usize {
        self.plan.ncols() - 1
    }

    /// `⟨C̄, π̄⟩`.
    pub fn cost(&self, extended_cost: &DMatrix<f64>) -> f64 {
        self.plan.component_mul(extended_cost).sum()
    }
}

fn log_sum_exp(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = values.clone().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY || !max.is_finite() {
        return max;
    }
    max + values.map(|v| (v - max).exp()).sum::<f64>().ln()
}

fn ln_mass(m: f64) -> f64 {
    if m > 0.0 {
        m.ln()
    } else {
        f64::NEG_INFINITY
    }
}

/// Log-domain state of a Sinkhorn run.
struct Scaling {
    /// `-C̄/γ`, row-major over the extended matrix.
    log_kernel: DMatrix<f64>,
    /// log of the row scaling `v`.
    log_v: Vec<f64>,
    /// log of the column scaling `u`.
    log_u: Vec<f64>,
}

impl Scaling {
    fn column_logsum(&self, j: usize) -> f64 {
        let k = &self.log_kernel;
        log_sum_exp((0..k.nrows()).map(|i| self.log_v[i] + k[(i, j)]))
    }

    fn row_logsum(&self, i: usize) -> f64 {
        let k = &self.log_kernel;
        log_sum_exp((0..k.ncols()).map(|j| k[(i, j)] + self.log_u[j]))
    }

    fn plan(&self) -> DMatrix<f64> {
        let k = &self.log_kernel;
        DMatrix::from_fn(k.nrows(), k.ncols(), |i, j| {
            let e = self.log_v[i] + k[(i, j)] + self.log_u[j];
            if e == f64::NEG_INFINITY {
                0.0
            } else {
                e.exp()
            }
        })
    }
}

fn marginal_deviation(plan: &DMatrix<f64>, p: &[f64], q: &[f64]) -> f64 {
    let rows = plan.row_iter().zip(p).map(|(r, t)| (r.sum() - t).abs());
    let cols = plan.column_iter().zip(q).map(|(c, t)| (c.sum() - t).abs());
    rows.chain(cols).fold(0.0, f64::max)
}

/// Sinkhorn-Knopp iterations on the extended problem.
///
/// Each sweep rescales columns, then rows, so after a sweep the row marginals
/// are exact and the remaining error sits in the columns. Iteration stops when
/// the column error is within `tol` or after `max_iters` sweeps; a run that
/// does not converge still returns its last plan with `converged = false`.
pub fn sinkhorn(problem: &TransportProblem) -> Result<TransportPlan> {
    problem.validate()?;
    let cost = problem.extended_cost()?;
    let (p, q) = problem.extended_masses();
    let (n, m) = cost.shape();
    let log_p: Vec<f64> = p.iter().map(|&v| ln_mass(v)).collect();
    let log_q: Vec<f64> = q.iter().map(|&v| ln_mass(v)).collect();

    let inv_gamma = 1.0 / problem.gamma;
    let mut sc = Scaling {
        log_kernel: cost.map(|c| -c * inv_gamma),
        log_v: vec![0.0; n],
        log_u: vec![0.0; m],
    };
    if sc.log_kernel.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical(format!(
            "kernel exp(-C/γ) is not representable for γ = {} (gamma too small for the cost scale)",
            problem.gamma
        )));
    }

    let mut col_logsum = vec![0.0; m];
    let mut iterations = 0;
    let mut converged = false;
    while iterations < problem.max_iters {
        for (j, ls) in col_logsum.iter_mut().enumerate() {
            *ls = sc.column_logsum(j);
        }
        if iterations > 0 {
            let err = (0..m)
                .map(|j| {
                    let s = sc.log_u[j] + col_logsum[j];
                    let mass = if s == f64::NEG_INFINITY { 0.0 } else { s.exp() };
                    (mass - q[j]).abs()
                })
                .fold(0.0, f64::max);
            if err.is_nan() {
                return Err(Error::Numerical("NaN marginal during Sinkhorn sweep".into()));
            }
            if err <= problem.tol {
                converged = true;
                break;
            }
        }
        for j in 0..m {
            sc.log_u[j] = log_q[j] - col_logsum[j];
        }
        for i in 0..n {
            sc.log_v[i] = log_p[i] - sc.row_logsum(i);
        }
        iterations += 1;
        if sc.log_u.iter().chain(sc.log_v.iter()).any(|v| v.is_nan() || *v == f64::INFINITY) {
            return Err(Error::Numerical(format!(
                "Sinkhorn scaling overflowed at sweep {iterations} (gamma {} too small for the cost scale)",
                problem.gamma
            )));
        }
    }

    let plan = sc.plan();
    if plan.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("non-finite transport plan".into()));
    }
    let marginal_error = marginal_deviation(&plan, &p, &q);
    Ok(TransportPlan {
        plan,
        iterations_used: iterations,
        marginal_error,
        converged: converged || marginal_error <= problem.tol,
    })
}

/// Per-sweep marginal error trace, for convergence diagnostics.
pub fn sinkhorn_error_trace(problem: &TransportProblem) -> Result<Vec<f64>> {
    let mut trace = Vec::with_capacity(problem.max_iters);
    for t in 1..=problem.max_iters {
        let run = sinkhorn(&problem.clone().with_max_iters(t).with_tol(f64::MIN_POSITIVE))?;
        trace.push(run.marginal_error);
    }
    Ok(trace)
}

/// Discrete matches read off a plan. Tracks index rows, detections columns.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Assignment {
    /// Track row for every detection, `None` when unmatched.
    pub detection_to_track: Vec<Option<usize>>,
    pub track_to_detections: Vec<Vec<usize>>,
}

impl Assignment {
    pub fn empty(num_tracks: usize, num_detections: usize) -> Self {
        Self {
            detection_to_track: vec![None; num_detections],
            track_to_detections: vec![Vec::new(); num_tracks],
        }
    }

    /// Builds both views from the per-detection list.
    pub fn from_detection_map(num_tracks: usize, detection_to_track: Vec<Option<usize>>) -> Self {
        let mut track_to_detections = vec![Vec::new(); num_tracks];
        for (j, t) in detection_to_track.iter().enumerate() {
            if let Some(i) = t {
                track_to_detections[*i].push(j);
            }
        }
        Self {
            detection_to_track,
            track_to_detections,
        }
    }

    pub fn unmatch(&mut self, detection: usize) {
        if let Some(i) = self.detection_to_track[detection].take() {
            self.track_to_detections[i].retain(|&j| j != detection);
        }
    }

    pub fn is_consistent(&self) -> bool {
        let n = self.track_to_detections.len();
        let forward = self.detection_to_track.iter().enumerate().all(|(j, t)| match t {
            Some(i) => *i < n && self.track_to_detections[*i].contains(&j),
            None => self.track_to_detections.iter().all(|l| !l.contains(&j)),
        });
        let count: usize = self.track_to_detections.iter().map(Vec::len).sum();
        let matched = self.detection_to_track.iter().filter(|t| t.is_some()).count();
        forward && count == matched
    }

    pub fn num_matched(&self) -> usize {
        self.detection_to_track.iter().filter(|t| t.is_some()).count()
    }
}

/// Each detection column goes to its heaviest row (dustbin included, lowest
/// index on ties). Dustbin winners and winners below `min_mass` are unmatched.
pub fn extract_assignment(plan: &TransportPlan, min_mass: f64) -> Assignment {
    let n = plan.num_tracks();
    let m = plan.num_detections();
    let detection_to_track = (0..m)
        .map(|j| {
            let mut best = 0;
            let mut best_mass = plan.plan[(0, j)];
            for i in 1..=n {
                let v = plan.plan[(i, j)];
                if v > best_mass {
                    best = i;
                    best_mass = v;
                }
            }
            (best < n && best_mass >= min_mass).then_some(best)
        })
        .collect();
    Assignment::from_detection_map(n, detection_to_track)
}

/// Extend, iterate, extract.
pub fn solve_with(problem: &TransportProblem, min_mass: f64) -> Result<(TransportPlan, Assignment)> {
    let plan = sinkhorn(problem)?;
    let assignment = extract_assignment(&plan, min_mass);
    Ok((plan, assignment))
}

pub fn solve(problem: &TransportProblem) -> Result<Assignment> {
    Ok(solve_with(problem, DEFAULT_MIN_MASS)?.1)
}

/// Largest mass that can be transported using only cells with `cost ≤ bound`,
/// subject to row capacities `p` and column capacities `q` (max flow).
pub fn fraction_within_bound(cost: &DMatrix<f64>, p: &[f64], q: &[f64], bound: f64) -> f64 {
    let (n, m) = cost.shape();
    // residual capacities: source->row, row->col (unbounded when allowed), col->sink
    let mut src = p.to_vec();
    let mut sink = q.to_vec();
    let mut flow = DMatrix::<f64>::zeros(n, m);
    let allowed = cost.map(|c| c <= bound);
    let mut total = 0.0;
    const EPS: f64 = 1e-12;
    loop {
        // BFS over nodes: rows 0..n, cols n..n+m
        let mut prev: Vec<Option<usize>> = vec![None; n + m];
        let mut visited = vec![false; n + m];
        let mut queue = std::collections::VecDeque::new();
        for i in 0..n {
            if src[i] > EPS {
                visited[i] = true;
                queue.push_back(i);
            }
        }
        let mut end = None;
        while let Some(u) = queue.pop_front() {
            if u < n {
                for j in 0..m {
                    if allowed[(u, j)] && !visited[n + j] {
                        visited[n + j] = true;
                        prev[n + j] = Some(u);
                        if sink[j] > EPS {
                            end = Some(j);
                            break;
                        }
                        queue.push_back(n + j);
                    }
                }
                if end.is_some() {
                    break;
                }
            } else {
                let j = u - n;
                for i in 0..n {
                    if flow[(i, j)] > EPS && !visited[i] {
                        visited[i] = true;
                        prev[i] = Some(u);
                        queue.push_back(i);
                    }
                }
            }
        }
        let Some(j_end) = end else { break };
        // walk back to find bottleneck
        let mut path = Vec::new();
        let mut node = n + j_end;
        while let Some(pr) = prev[node] {
            path.push((pr, node));
            node = pr;
        }
        let start_row = node;
        let mut bottleneck = src[start_row].min(sink[j_end]);
        for &(from, to) in &path {
            if from >= n {
                // col -> row edge is a reverse edge on flow[(row, col)]
                bottleneck = bottleneck.min(flow[(to, from - n)]);
            }
        }
        for &(from, to) in &path {
            if from < n {
                flow[(from, to - n)] += bottleneck;
            } else {
                flow[(to, from - n)] -= bottleneck;
            }
        }
        src[start_row] -= bottleneck;
        sink[j_end] -= bottleneck;
        total += bottleneck;
    }
    total
}

/// Exact optimum of the unregularized extended problem.
#[derive(Debug, Clone, PartialEq)]
pub struct ExactSolution {
    pub plan: DMatrix<f64>,
    pub cost: f64,
}

fn is_integral(v: f64) -> bool {
    (v - v.round()).abs() < 1e-9
}

/// Exact solver for desk-scale instances, used as a test oracle.
///
/// With unit detection masses and integral track masses every vertex of the
/// transport polytope is an integral one-to-many assignment, so the optimum is
/// found by enumerating each detection's row (dustbin included) under the row
/// capacities. Other instances go through a simplex LP.
pub fn lp_oracle(problem: &TransportProblem) -> Result<ExactSolution> {
    problem.validate()?;
    let (n, m) = problem.cost.shape();
    if n * m > ORACLE_MAX_CELLS {
        return Err(Error::TooLarge(format!("{n}x{m} exceeds the {ORACLE_MAX_CELLS}-cell oracle limit")));
    }
    let (p, q) = problem.extended_masses();
    let integral = p.iter().chain(q.iter()).all(|v| is_integral(*v)) && problem.q.iter().all(|v| (v - 1.0).abs() < 1e-12);
    let branches = ((n + 1) as f64).powi(m as i32);
    if integral && branches <= 5e6 {
        enumerate_oracle(problem, &p, &q)
    } else {
        simplex_oracle(problem, &p, &q)
    }
}

fn enumerate_oracle(problem: &TransportProblem, p: &[f64], q: &[f64]) -> Result<ExactSolution> {
    let cost = problem.extended_cost()?;
    let (n, m) = problem.cost.shape();
    let caps: Vec<i64> = p.iter().map(|v| v.round() as i64).collect();
    let eps = problem.epsilon;
    let corner = cost[(n, m)];

    struct Search<'a> {
        cost: &'a DMatrix<f64>,
        caps: &'a [i64],
        n: usize,
        m: usize,
        eps: f64,
        corner: f64,
        load: Vec<i64>,
        choice: Vec<usize>,
        best: f64,
        best_choice: Vec<usize>,
        min_rest: Vec<f64>,
    }

    impl Search<'_> {
        fn total(&self) -> f64 {
            let assigned: f64 = self.choice.iter().enumerate().map(|(j, &r)| self.cost[(r, j)]).sum();
            // leftover track mass sits in the dustbin column, leftover dustbin-row mass in the corner
            let leftover: i64 = (0..self.n).map(|i| self.caps[i] - self.load[i]).sum();
            let corner_mass = self.caps[self.n] - self.load[self.n];
            assigned + self.eps * leftover as f64 + self.corner * corner_mass as f64
        }

        fn go(&mut self, j: usize, partial: f64) {
            if partial + self.min_rest[j] >= self.best {
                return;
            }
            if j == self.m {
                let t = self.total();
                if t < self.best {
                    self.best = t;
                    self.best_choice = self.choice.clone();
                }
                return;
            }
            for r in 0..=self.n {
                if self.load[r] < self.caps[r] {
                    self.load[r] += 1;
                    self.choice.push(r);
                    let c = self.cost[(r, j)];
                    self.go(j + 1, partial + c);
                    self.choice.pop();
                    self.load[r] -= 1;
                }
            }
        }
    }

    // lower bound on what the remaining detections can add
    let mut min_rest = vec![0.0; m + 1];
    for j in (0..m).rev() {
        let best_col = (0..=n).map(|r| cost[(r, j)]).fold(f64::INFINITY, f64::min);
        min_rest[j] = min_rest[j + 1] + best_col;
    }
    // leaf terms are non-negative only when the corner is; otherwise do not prune
    if corner < 0.0 {
        min_rest.iter_mut().for_each(|v| *v = f64::NEG_INFINITY);
    }
    let mut search = Search {
        cost: &cost,
        caps: &caps,
        n,
        m,
        eps,
        corner,
        load: vec![0; n + 1],
        choice: Vec::with_capacity(m),
        best: f64::INFINITY,
        best_choice: Vec::new(),
        min_rest,
    };
    search.go(0, 0.0);
    if !search.best.is_finite() {
        return invalid("no feasible integral assignment");
    }
    let choice = search.best_choice;
    let mut plan = DMatrix::zeros(n + 1, m + 1);
    let mut load = vec![0i64; n + 1];
    for (j, &r) in choice.iter().enumerate() {
        plan[(r, j)] = 1.0;
        load[r] += 1;
    }
    for i in 0..n {
        plan[(i, m)] = (caps[i] - load[i]) as f64;
    }
    plan[(n, m)] = (caps[n] - load[n]) as f64;
    let cost_value = plan.component_mul(&cost).sum();
    debug_assert!(marginal_deviation(&plan, p, q) < 1e-9);
    Ok(ExactSolution { plan, cost: cost_value })
}

fn simplex_oracle(problem: &TransportProblem, p: &[f64], q: &[f64]) -> Result<ExactSolution> {
    use minilp::{ComparisonOp, LinearExpr, OptimizationDirection, Problem};
    let cost = problem.extended_cost()?;
    let (n, m) = cost.shape();
    let mut lp = Problem::new(OptimizationDirection::Minimize);
    let vars: Vec<Vec<minilp::Variable>> = (0..n)
        .map(|i| (0..m).map(|j| lp.add_var(cost[(i, j)], (0.0, f64::INFINITY))).collect())
        .collect();
    for (i, row) in vars.iter().enumerate() {
        let mut e = LinearExpr::empty();
        for v in row {
            e.add(*v, 1.0);
        }
        lp.add_constraint(e, ComparisonOp::Eq, p[i]);
    }
    // the last column constraint is implied by the others
    for j in 0..m - 1 {
        let mut e = LinearExpr::empty();
        for row in &vars {
            e.add(row[j], 1.0);
        }
        lp.add_constraint(e, ComparisonOp::Eq, q[j]);
    }
    let sol = lp
        .solve()
        .map_err(|e| Error::Numerical(format!("LP oracle failed: {e}")))?;
    let plan = DMatrix::from_fn(n, m, |i, j| sol[vars[i][j]].max(0.0));
    Ok(ExactSolution {
        cost: plan.component_mul(&cost).sum(),
        plan,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mat(rows: &[&[f64]]) -> DMatrix<f64> {
        DMatrix::from_fn(rows.len(), rows[0].len(), |i, j| rows[i][j])
    }

    #[test]
    fn extend_examples() {
        let c = extend_cost(&mat(&[&[3.0]]), 2.0).unwrap();
        assert_eq!(c, mat(&[&[3.0, 2.0], &[2.0, 7.0]]));
        let c = extend_cost(&mat(&[&[1.0, 2.0], &[3.0, 4.0]]), 5.0).unwrap();
        assert_eq!(c, mat(&[&[1.0, 2.0, 5.0], &[3.0, 4.0, 5.0], &[5.0, 5.0, 14.0]]));
        assert!(extend_cost(&DMatrix::zeros(0, 3), 1.0).is_err());
        assert!(extend_cost(&mat(&[&[f64::NAN]]), 1.0).is_err());
    }

    #[test]
    fn uniform_plan_for_flat_costs() {
        let prob = TransportProblem::uniform(DMatrix::zeros(2, 2)).with_epsilon(100.0);
        let plan = sinkhorn(&prob).unwrap();
        assert!(plan.converged);
        for i in 0..2 {
            for j in 0..2 {
                assert!((plan.plan[(i, j)] - 0.5).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn diagonal_plan_for_crossed_costs() {
        let prob = TransportProblem::uniform(mat(&[&[0.0, 10.0], &[10.0, 0.0]])).with_epsilon(100.0);
        let plan = sinkhorn(&prob).unwrap();
        assert!(plan.plan[(0, 0)] >= 0.99 && plan.plan[(1, 1)] >= 0.99);
        let a = extract_assignment(&plan, DEFAULT_MIN_MASS);
        assert_eq!(a.detection_to_track, vec![Some(0), Some(1)]);
        let exact = lp_oracle(&prob).unwrap();
        assert_eq!(exact.cost, 0.0);
        assert_eq!(exact.plan[(0, 0)], 1.0);
        assert_eq!(exact.plan[(1, 1)], 1.0);
    }

    #[test]
    fn one_track_takes_two_detections() {
        let prob = TransportProblem::new(mat(&[&[1.0, 1.0]]), vec![2.0], vec![1.0, 1.0]).with_s(2.0);
        let plan = sinkhorn(&prob).unwrap();
        assert!((plan.plan[(0, 0)] - 1.0).abs() < 1e-9);
        assert!((plan.plan[(0, 1)] - 1.0).abs() < 1e-9);
        let a = extract_assignment(&plan, DEFAULT_MIN_MASS);
        assert_eq!(a.track_to_detections, vec![vec![0, 1]]);
        assert!(a.is_consistent());
        let exact = lp_oracle(&prob).unwrap();
        assert!((exact.plan[(0, 0)] - 1.0).abs() < 1e-12 && (exact.plan[(0, 1)] - 1.0).abs() < 1e-12);
        assert_eq!(solve(&prob).unwrap(), a);
    }

    #[test]
    fn oracle_examples() {
        let single = TransportProblem::uniform(mat(&[&[7.0]])).with_epsilon(100.0);
        let exact = lp_oracle(&single).unwrap();
        assert_eq!(exact.cost, 7.0);
        assert_eq!(exact.plan[(0, 0)], 1.0);

        let flat = TransportProblem::uniform(DMatrix::from_element(3, 2, 4.0)).with_epsilon(1.0);
        let exact = lp_oracle(&flat).unwrap();
        // s = 2 units at cost 4, one unit of track mass to the dustbin column at ε
        assert!((exact.cost - (2.0 * 4.0 + 1.0)).abs() < 1e-12);

        let big = TransportProblem::uniform(DMatrix::zeros(9, 8));
        assert!(matches!(lp_oracle(&big), Err(Error::TooLarge(_))));
    }

    #[test]
    fn simplex_matches_enumeration() {
        let c = mat(&[&[1.0, 4.0, 2.0], &[3.0, 0.5, 6.0]]);
        let prob = TransportProblem::new(c, vec![2.0, 1.0], vec![1.0, 1.0, 1.0]).with_s(2.0).with_epsilon(3.0);
        let (p, q) = prob.extended_masses();
        let a = enumerate_oracle(&prob, &p, &q).unwrap();
        let b = simplex_oracle(&prob, &p, &q).unwrap();
        assert!((a.cost - b.cost).abs() < 1e-9, "{} vs {}", a.cost, b.cost);
    }

    #[test]
    fn fractional_masses_use_the_lp() {
        let c = mat(&[&[0.0, 2.0], &[2.0, 0.0]]);
        let prob = TransportProblem::new(c, vec![0.5, 1.5], vec![1.0, 1.0]).with_s(1.5).with_epsilon(1.0);
        let exact = lp_oracle(&prob).unwrap();
        let (p, q) = prob.extended_masses();
        assert!(marginal_deviation(&exact.plan, &p, &q) < 1e-9);
        let plan = sinkhorn(&prob.clone().with_gamma(0.01).with_max_iters(5000)).unwrap();
        let approx = plan.cost(&prob.extended_cost().unwrap());
        assert!(exact.cost <= approx + 1e-6);
        assert!(approx - exact.cost < 0.1);
    }

    #[test]
    fn epsilon_does_not_move_the_plan() {
        let c = mat(&[&[0.3, 2.0, 5.0], &[1.0, 0.2, 4.0]]);
        // iterates differ, the fixed point does not
        let base = TransportProblem::uniform(c).with_s(1.5).with_max_iters(10_000).with_tol(1e-13);
        let a = sinkhorn(&base.clone().with_epsilon(0.5)).unwrap();
        let b = sinkhorn(&base.with_epsilon(7.0)).unwrap();
        assert!(a.converged && b.converged);
        assert!((a.plan.clone() - b.plan.clone()).amax() < 1e-9);
    }

    #[test]
    fn dustbin_takes_far_detections_when_s_is_bounded() {
        // detection 1 is beyond the bound for every track
        let c = mat(&[&[0.5, 9.0], &[3.0, 8.0]]);
        let bound = 2.0;
        let s = fraction_within_bound(&c, &[1.0, 1.0], &[1.0, 1.0], bound);
        assert_eq!(s, 1.0);
        let prob = TransportProblem::uniform(c).with_s(s).with_epsilon(bound);
        let a = solve(&prob).unwrap();
        assert_eq!(a.detection_to_track, vec![Some(0), None]);
    }

    #[test]
    fn max_flow_bound() {
        let c = mat(&[&[0.0, 0.0, 5.0], &[5.0, 5.0, 0.0]]);
        assert_eq!(fraction_within_bound(&c, &[1.0, 1.0], &[1.0, 1.0, 1.0], 1.0), 2.0);
        assert_eq!(fraction_within_bound(&c, &[2.0, 1.0], &[1.0, 1.0, 1.0], 1.0), 3.0);
        // needs an augmenting path through a reverse edge
        let c = mat(&[&[0.0, 0.0], &[0.0, 9.0]]);
        assert_eq!(fraction_within_bound(&c, &[1.0, 1.0], &[1.0, 1.0], 1.0), 2.0);
        assert_eq!(fraction_within_bound(&c, &[1.0, 1.0], &[1.0, 1.0], -1.0), 0.0);
    }

    #[test]
    fn invalid_problems() {
        let c = mat(&[&[1.0]]);
        assert!(sinkhorn(&TransportProblem::uniform(c.clone()).with_gamma(0.0)).is_err());
        assert!(sinkhorn(&TransportProblem::uniform(c.clone()).with_s(2.0)).is_err());
        assert!(sinkhorn(&TransportProblem::uniform(c.clone()).with_max_iters(0)).is_err());
        assert!(sinkhorn(&TransportProblem::new(c.clone(), vec![1.0, 1.0], vec![1.0])).is_err());
        assert!(sinkhorn(&TransportProblem::new(c, vec![-1.0], vec![1.0])).is_err());
    }

    #[test]
    fn tiny_gamma_is_a_numerical_error() {
        let prob = TransportProblem::uniform(mat(&[&[1e300, 0.0], &[0.0, 1.0]])).with_gamma(1e-300);
        assert!(matches!(sinkhorn(&prob), Err(Error::Numerical(_))));
    }

    #[test]
    fn non_convergence_is_reported_not_raised() {
        let c = mat(&[&[0.0, 0.05, 9.0], &[0.04, 0.0, 9.0], &[9.0, 9.0, 0.0]]);
        let plan = sinkhorn(&TransportProblem::uniform(c).with_gamma(0.01).with_max_iters(1)).unwrap();
        assert_eq!(plan.iterations_used, 1);
        assert!(!plan.converged);
        assert!(plan.marginal_error > 0.0);
    }
}
