//! Discrete optimal transport over arbitrary cost matrices.
//!
//! Two solvers share the [`Coupling`] contract: entropic Sinkhorn (the
//! production path, log-domain by default) and an exact successive-shortest-
//! path solver for small instances (the oracle path). Both are deterministic
//! for fixed inputs.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};

use crate::error::{Error, Result};
use crate::linalg::pairwise_sq_dists;
use crate::scalar::Scalar;

/// Default cell cap for the exact solver.
pub const DEFAULT_EXACT_CELL_CAP: usize = 4096;

/// Nonnegative finite transport costs, one entry per source/target pair.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix<S: Scalar> {
    c: Array2<S>,
}

impl<S: Scalar> CostMatrix<S> {
    pub fn new(c: Array2<S>) -> Result<Self> {
        for &v in c.iter() {
            if !v.is_finite() {
                return Err(Error::NonFiniteValue("cost matrix".into()));
            }
            if v < S::zero() {
                return Err(Error::OutOfRange {
                    name: "cost entry",
                    value: v.to_f64_c(),
                    lo: 0.0,
                    hi: f64::INFINITY,
                });
            }
        }
        Ok(Self { c })
    }

    /// Squared Euclidean costs between rows of `x` and rows of `y`.
    pub fn squared_euclidean(x: &ArrayView2<S>, y: &ArrayView2<S>) -> Result<Self> {
        if x.ncols() != y.ncols() {
            return Err(Error::DimensionMismatch(format!(
                "{} vs {}",
                x.ncols(),
                y.ncols()
            )));
        }
        Self::new(pairwise_sq_dists(x, y))
    }

    pub fn matrix(&self) -> ArrayView2<'_, S> {
        self.c.view()
    }

    pub fn nrows(&self) -> usize {
        self.c.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.c.ncols()
    }

    /// Mean cost entry; the reference scale for the default regularization.
    pub fn mean(&self) -> S {
        let total: S = self.c.iter().cloned().sum();
        total / S::from_f64_c((self.c.nrows() * self.c.ncols()) as f64)
    }
}

/// A transport plan with its prescribed marginals.
#[derive(Debug, Clone, PartialEq)]
pub struct Coupling<S: Scalar> {
    pub pi: Array2<S>,
    pub row_marginal: Array1<S>,
    pub col_marginal: Array1<S>,
}

impl<S: Scalar> Coupling<S> {
    /// Largest absolute deviation of the plan's marginals from the prescribed
    /// ones.
    pub fn marginal_residual(&self) -> S {
        let mut worst = S::zero();
        for (i, row) in self.pi.axis_iter(Axis(0)).enumerate() {
            let s: S = row.iter().cloned().sum();
            worst = worst.max((s - self.row_marginal[i]).abs());
        }
        for (j, col) in self.pi.axis_iter(Axis(1)).enumerate() {
            let s: S = col.iter().cloned().sum();
            worst = worst.max((s - self.col_marginal[j]).abs());
        }
        worst
    }

    /// Check nonnegativity, marginal agreement (within `tol`, nominally 1e-6)
    /// and that each marginal sums to 1 (within 1e-9).
    pub fn validate(&self, tol: S) -> Result<()> {
        if self.pi.nrows() != self.row_marginal.len() || self.pi.ncols() != self.col_marginal.len()
        {
            return Err(Error::ShapeMismatch("coupling vs marginals".into()));
        }
        if self.pi.iter().any(|v| *v < S::zero()) {
            return Err(Error::OutOfRange {
                name: "coupling entry",
                value: self.pi.iter().cloned().fold(S::zero(), S::min).to_f64_c(),
                lo: 0.0,
                hi: 1.0,
            });
        }
        let sum_tol = S::tol(1e-9);
        for m in [&self.row_marginal, &self.col_marginal] {
            let s: S = m.iter().cloned().sum();
            if (s - S::one()).abs() > sum_tol {
                return Err(Error::OutOfRange {
                    name: "marginal sum",
                    value: s.to_f64_c(),
                    lo: 1.0,
                    hi: 1.0,
                });
            }
        }
        let r = self.marginal_residual();
        if r > tol {
            return Err(Error::OutOfRange {
                name: "marginal residual",
                value: r.to_f64_c(),
                lo: 0.0,
                hi: tol.to_f64_c(),
            });
        }
        Ok(())
    }
}

/// Entropic-regularization settings. `epsilon` is the regularization strength
/// actually used; see [`auto_epsilon`] for the scale-aware default.
#[derive(Debug, Clone, PartialEq)]
pub struct SinkhornConfig<S: Scalar> {
    pub epsilon: S,
    pub max_iters: usize,
    pub tolerance: S,
    pub log_domain: bool,
}

impl<S: Scalar> SinkhornConfig<S> {
    pub fn new(epsilon: S) -> Self {
        Self {
            epsilon,
            max_iters: 10_000,
            tolerance: S::from_f64_c(1e-6),
            log_domain: true,
        }
    }
}

/// The default regularization: `0.01 * mean(cost)`, falling back to 1 for an
/// all-zero cost matrix. Scale-invariant across datasets of different feature
/// magnitudes.
pub fn auto_epsilon<S: Scalar>(cost: &CostMatrix<S>) -> S {
    let m = cost.mean();
    if m > S::zero() {
        m * S::from_f64_c(0.01)
    } else {
        S::one()
    }
}

fn check_marginals<S: Scalar>(
    cost: &CostMatrix<S>,
    mu: &ArrayView1<S>,
    nu: &ArrayView1<S>,
    require_positive: bool,
) -> Result<()> {
    if mu.len() != cost.nrows() || nu.len() != cost.ncols() {
        return Err(Error::ShapeMismatch(format!(
            "marginals ({}, {}) vs cost {}x{}",
            mu.len(),
            nu.len(),
            cost.nrows(),
            cost.ncols()
        )));
    }
    let tol = S::tol(1e-9);
    let check_one = |m: &[S]| -> Result<()> {
        let mut sum = S::zero();
        for &v in m {
            if !v.is_finite() || v < S::zero() || (require_positive && v == S::zero()) {
                return Err(Error::OutOfRange {
                    name: "marginal entry",
                    value: v.to_f64_c(),
                    lo: 0.0,
                    hi: 1.0,
                });
            }
            sum = sum + v;
        }
        if (sum - S::one()).abs() > tol {
            return Err(Error::OutOfRange {
                name: "marginal sum",
                value: sum.to_f64_c(),
                lo: 1.0,
                hi: 1.0,
            });
        }
        Ok(())
    };
    let mu_v: Vec<S> = mu.iter().cloned().collect();
    let nu_v: Vec<S> = nu.iter().cloned().collect();
    check_one(&mu_v)?;
    check_one(&nu_v)?;
    Ok(())
}

fn transport_cost<S: Scalar>(cost: &ArrayView2<S>, pi: &ArrayView2<S>) -> S {
    let mut acc = S::zero();
    for (c, p) in cost.iter().zip(pi.iter()) {
        acc = acc + *c * *p;
    }
    acc
}

/// Entropic OT by Sinkhorn iteration.
///
/// Marginals must be strictly positive and sum to 1. The returned coupling
/// satisfies both marginals within `cfg.tolerance` (max absolute deviation);
/// the second return value is the transport cost `sum(c * pi)`.
pub fn sinkhorn<S: Scalar>(
    cost: &CostMatrix<S>,
    mu: &ArrayView1<S>,
    nu: &ArrayView1<S>,
    cfg: &SinkhornConfig<S>,
) -> Result<(Coupling<S>, S)> {
    check_marginals(cost, mu, nu, true)?;
    if !(cfg.epsilon > S::zero()) {
        return Err(Error::OutOfRange {
            name: "epsilon",
            value: cfg.epsilon.to_f64_c(),
            lo: 0.0,
            hi: f64::INFINITY,
        });
    }
    if !(cfg.tolerance > S::zero()) {
        return Err(Error::OutOfRange {
            name: "tolerance",
            value: cfg.tolerance.to_f64_c(),
            lo: 0.0,
            hi: f64::INFINITY,
        });
    }
    if cfg.log_domain {
        sinkhorn_log(cost, mu, nu, cfg)
    } else {
        sinkhorn_scaling(cost, mu, nu, cfg)
    }
}

/// Log-domain Sinkhorn with an epsilon-annealing warm start: potentials are
/// first converged at larger regularization and reused as the temperature
/// drops to the target, which keeps small-epsilon runs from stalling. The
/// fixed point is that of the target epsilon; annealing only affects the
/// iteration path. Iterations at every temperature count against `max_iters`.
fn sinkhorn_log<S: Scalar>(
    cost: &CostMatrix<S>,
    mu: &ArrayView1<S>,
    nu: &ArrayView1<S>,
    cfg: &SinkhornConfig<S>,
) -> Result<(Coupling<S>, S)> {
    let (n, k) = (cost.nrows(), cost.ncols());
    let c = cost.matrix();
    let log_mu: Vec<S> = mu.iter().map(|v| v.ln()).collect();
    let log_nu: Vec<S> = nu.iter().map(|v| v.ln()).collect();

    let mut f = vec![S::zero(); n];
    let mut g = vec![S::zero(); k];

    // Annealing ladder: start near the mean cost, divide by 4 until the
    // target is reached. A ladder entry gets a bounded number of iterations;
    // only the target epsilon iterates to tolerance.
    let mut ladder = Vec::new();
    let mean = cost.mean();
    if mean > S::zero() {
        let four = S::from_f64_c(4.0);
        let mut e = mean;
        while e > cfg.epsilon * four {
            ladder.push(e);
            e = e / four;
        }
    }
    ladder.push(cfg.epsilon);

    let mut iters_used = 0usize;
    let mut residual = S::infinity();
    let mut buf = vec![S::zero(); n.max(k)];

    for (stage, &eps) in ladder.iter().enumerate() {
        let last_stage = stage + 1 == ladder.len();
        let stage_cap = if last_stage {
            cfg.max_iters.saturating_sub(iters_used)
        } else {
            // Warm-up stages are budgeted; leftover budget flows to the target.
            200.min(cfg.max_iters.saturating_sub(iters_used) / 2)
        };
        for _ in 0..stage_cap {
            iters_used += 1;
            for j in 0..k {
                let mut m = S::neg_infinity();
                for i in 0..n {
                    let v = (f[i] - c[[i, j]]) / eps;
                    buf[i] = v;
                    if v > m {
                        m = v;
                    }
                }
                let mut s = S::zero();
                for &v in buf.iter().take(n) {
                    s = s + (v - m).exp();
                }
                g[j] = eps * (log_nu[j] - m - s.ln());
            }
            for i in 0..n {
                let mut m = S::neg_infinity();
                for j in 0..k {
                    let v = (g[j] - c[[i, j]]) / eps;
                    buf[j] = v;
                    if v > m {
                        m = v;
                    }
                }
                let mut s = S::zero();
                for &v in buf.iter().take(k) {
                    s = s + (v - m).exp();
                }
                f[i] = eps * (log_mu[i] - m - s.ln());
            }
            // Rows are exact after the f-update; measure the column residual.
            residual = S::zero();
            for j in 0..k {
                let mut s = S::zero();
                for i in 0..n {
                    s = s + ((f[i] + g[j] - c[[i, j]]) / eps).exp();
                }
                residual = residual.max((s - nu[j]).abs());
            }
            if residual <= cfg.tolerance {
                break;
            }
        }
        if last_stage && residual > cfg.tolerance {
            return Err(Error::NoConvergence {
                iterations: iters_used,
                residual: residual.to_f64_c(),
            });
        }
    }

    let eps = cfg.epsilon;
    let mut pi = Array2::<S>::zeros((n, k));
    for i in 0..n {
        for j in 0..k {
            pi[[i, j]] = ((f[i] + g[j] - c[[i, j]]) / eps).exp();
        }
    }
    let value = transport_cost(&c, &pi.view());
    let coupling = Coupling {
        pi,
        row_marginal: mu.to_owned(),
        col_marginal: nu.to_owned(),
    };
    Ok((coupling, value))
}

/// Plain scaling-domain Sinkhorn; fails with `NumericalUnderflow` when the
/// kernel or the scaling vectors degenerate, which is expected for small
/// epsilon. Provided for completeness; log-domain is the default.
fn sinkhorn_scaling<S: Scalar>(
    cost: &CostMatrix<S>,
    mu: &ArrayView1<S>,
    nu: &ArrayView1<S>,
    cfg: &SinkhornConfig<S>,
) -> Result<(Coupling<S>, S)> {
    let (n, k) = (cost.nrows(), cost.ncols());
    let c = cost.matrix();
    let eps = cfg.epsilon;
    let kernel = c.mapv(|v| (-v / eps).exp());
    let mut u = vec![S::one(); n];
    let mut v = vec![S::one(); k];
    let bad = |x: S| !x.is_finite() || x == S::zero();

    let mut residual = S::infinity();
    let mut iters = 0usize;
    while iters < cfg.max_iters {
        iters += 1;
        for j in 0..k {
            let mut s = S::zero();
            for i in 0..n {
                s = s + kernel[[i, j]] * u[i];
            }
            if bad(s) {
                return Err(Error::NumericalUnderflow);
            }
            v[j] = nu[j] / s;
            if bad(v[j]) {
                return Err(Error::NumericalUnderflow);
            }
        }
        for i in 0..n {
            let mut s = S::zero();
            for j in 0..k {
                s = s + kernel[[i, j]] * v[j];
            }
            if bad(s) {
                return Err(Error::NumericalUnderflow);
            }
            u[i] = mu[i] / s;
            if bad(u[i]) {
                return Err(Error::NumericalUnderflow);
            }
        }
        residual = S::zero();
        for j in 0..k {
            let mut s = S::zero();
            for i in 0..n {
                s = s + u[i] * kernel[[i, j]] * v[j];
            }
            residual = residual.max((s - nu[j]).abs());
        }
        if residual <= cfg.tolerance {
            break;
        }
    }
    if residual > cfg.tolerance {
        return Err(Error::NoConvergence {
            iterations: iters,
            residual: residual.to_f64_c(),
        });
    }
    let mut pi = Array2::<S>::zeros((n, k));
    for i in 0..n {
        for j in 0..k {
            pi[[i, j]] = u[i] * kernel[[i, j]] * v[j];
        }
    }
    let value = transport_cost(&c, &pi.view());
    Ok((
        Coupling {
            pi,
            row_marginal: mu.to_owned(),
            col_marginal: nu.to_owned(),
        },
        value,
    ))
}

#[derive(Clone, Copy)]
struct HeapEntry<S> {
    dist: S,
    node: usize,
}

impl<S: Scalar> PartialEq for HeapEntry<S> {
    fn eq(&self, other: &Self) -> bool {
        self.dist == other.dist && self.node == other.node
    }
}
impl<S: Scalar> Eq for HeapEntry<S> {}
impl<S: Scalar> Ord for HeapEntry<S> {
    fn cmp(&self, other: &Self) -> Ordering {
        // Reversed: BinaryHeap is a max-heap, we want smallest dist first.
        other
            .dist
            .partial_cmp(&self.dist)
            .unwrap_or(Ordering::Equal)
            .then_with(|| other.node.cmp(&self.node))
    }
}
impl<S: Scalar> PartialOrd for HeapEntry<S> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Exact transportation LP by successive shortest augmenting paths with node
/// potentials (Dijkstra search). Exact up to floating-point accumulation,
/// which keeps it within 1e-9 relative of the true optimum on instances this
/// crate accepts; intended as the oracle rather than the production path.
///
/// `max_cells` caps `n * k`; exceeding it is `ProblemTooLarge`.
pub fn exact_ot<S: Scalar>(
    cost: &CostMatrix<S>,
    mu: &ArrayView1<S>,
    nu: &ArrayView1<S>,
    max_cells: usize,
) -> Result<(Coupling<S>, S)> {
    check_marginals(cost, mu, nu, false)?;
    let (n, k) = (cost.nrows(), cost.ncols());
    let cells = n * k;
    if cells > max_cells {
        return Err(Error::ProblemTooLarge {
            cells,
            cap: max_cells,
        });
    }
    let c = cost.matrix();

    // Normalize internally so both sides carry exactly matching total mass up
    // to machine rounding.
    let mu_sum: S = mu.iter().cloned().sum();
    let nu_sum: S = nu.iter().cloned().sum();
    let mut supply: Vec<S> = mu.iter().map(|&v| v / mu_sum).collect();
    let mut demand: Vec<S> = nu.iter().map(|&v| v / nu_sum).collect();

    let mut flow = Array2::<S>::zeros((n, k));
    let mut pot_src = vec![S::zero(); n];
    let mut pot_snk = vec![S::zero(); k];

    let tiny = S::from_f64_c(1e-12);
    let max_augmentations = 4 * (n + k) + 2 * cells + 64;
    let mut augmentations = 0usize;

    loop {
        let remaining: S = supply.iter().cloned().sum();
        if remaining <= tiny {
            break;
        }
        augmentations += 1;
        if augmentations > max_augmentations {
            return Err(Error::SolverFailure(
                "exact transport: augmentation cap exceeded".into(),
            ));
        }

        // Dijkstra over the residual graph. Node ids: sources 0..n, sinks n..n+k.
        let total = n + k;
        let mut dist = vec![S::infinity(); total];
        let mut parent = vec![usize::MAX; total];
        let mut done = vec![false; total];
        let mut heap = BinaryHeap::new();
        for (i, &s) in supply.iter().enumerate() {
            if s > S::zero() {
                dist[i] = S::zero();
                heap.push(HeapEntry {
                    dist: S::zero(),
                    node: i,
                });
            }
        }
        let mut target = usize::MAX;
        while let Some(HeapEntry { dist: d, node }) = heap.pop() {
            if done[node] || d > dist[node] {
                continue;
            }
            done[node] = true;
            if node >= n && demand[node - n] > S::zero() {
                target = node - n;
                break;
            }
            if node < n {
                let i = node;
                for j in 0..k {
                    let rc = (c[[i, j]] + pot_src[i] - pot_snk[j]).max(S::zero());
                    let nd = d + rc;
                    if nd < dist[n + j] {
                        dist[n + j] = nd;
                        parent[n + j] = i;
                        heap.push(HeapEntry { dist: nd, node: n + j });
                    }
                }
            } else {
                let j = node - n;
                for i in 0..n {
                    if flow[[i, j]] > S::zero() {
                        let rc = (pot_snk[j] - c[[i, j]] - pot_src[i]).max(S::zero());
                        let nd = d + rc;
                        if nd < dist[i] {
                            dist[i] = nd;
                            parent[i] = n + j;
                            heap.push(HeapEntry { dist: nd, node: i });
                        }
                    }
                }
            }
        }
        if target == usize::MAX {
            // No deficit sink reachable; acceptable only if the leftover mass
            // is rounding dust.
            if remaining <= S::from_f64_c(1e-9) {
                break;
            }
            return Err(Error::SolverFailure(
                "exact transport: no augmenting path".into(),
            ));
        }
        let d_target = dist[n + target];
        for i in 0..n {
            pot_src[i] = pot_src[i] + dist[i].min(d_target);
        }
        for j in 0..k {
            pot_snk[j] = pot_snk[j] + dist[n + j].min(d_target);
        }

        // Trace the path back and find the bottleneck.
        let mut path = Vec::new(); // (src, snk, forward)
        let mut node = n + target;
        let mut bottleneck = demand[target];
        while parent[node] != usize::MAX {
            let p = parent[node];
            if node >= n {
                // forward arc p(src) -> node(snk)
                path.push((p, node - n, true));
            } else {
                // backward arc node(src) <- p(snk): decreases flow[node][p - n]
                path.push((node, p - n, false));
                bottleneck = bottleneck.min(flow[[node, p - n]]);
            }
            node = p;
        }
        let root = node;
        bottleneck = bottleneck.min(supply[root]);

        for &(i, j, forward) in &path {
            if forward {
                flow[[i, j]] = flow[[i, j]] + bottleneck;
            } else {
                flow[[i, j]] = flow[[i, j]] - bottleneck;
            }
        }
        supply[root] = supply[root] - bottleneck;
        demand[target] = demand[target] - bottleneck;
    }

    let value = transport_cost(&c, &flow.view());
    Ok((
        Coupling {
            pi: flow,
            row_marginal: mu.to_owned(),
            col_marginal: nu.to_owned(),
        },
        value,
    ))
}

/// Solver selection shared by every cost-matrix consumer. Sinkhorn epsilon
/// left as `None` resolves to [`auto_epsilon`] at solve time.
#[derive(Debug, Clone, PartialEq)]
pub enum OtSolver<S: Scalar> {
    Exact { max_cells: usize },
    Sinkhorn(SinkhornParams<S>),
}

/// High-level Sinkhorn settings carried in configs before the cost matrix is
/// known.
#[derive(Debug, Clone, PartialEq)]
pub struct SinkhornParams<S: Scalar> {
    pub epsilon: Option<S>,
    pub max_iters: usize,
    pub tolerance: S,
    pub log_domain: bool,
}

impl<S: Scalar> Default for SinkhornParams<S> {
    fn default() -> Self {
        Self {
            epsilon: None,
            max_iters: 10_000,
            tolerance: S::from_f64_c(1e-6),
            log_domain: true,
        }
    }
}

impl<S: Scalar> OtSolver<S> {
    pub fn exact() -> Self {
        Self::Exact {
            max_cells: DEFAULT_EXACT_CELL_CAP,
        }
    }

    pub fn sinkhorn() -> Self {
        Self::Sinkhorn(SinkhornParams::default())
    }

    pub fn solve(
        &self,
        cost: &CostMatrix<S>,
        mu: &ArrayView1<S>,
        nu: &ArrayView1<S>,
    ) -> Result<(Coupling<S>, S)> {
        match self {
            Self::Exact { max_cells } => exact_ot(cost, mu, nu, *max_cells),
            Self::Sinkhorn(params) => {
                let cfg = SinkhornConfig {
                    epsilon: params.epsilon.unwrap_or_else(|| auto_epsilon(cost)),
                    max_iters: params.max_iters,
                    tolerance: params.tolerance,
                    log_domain: params.log_domain,
                };
                sinkhorn(cost, mu, nu, &cfg)
            }
        }
    }
}

/// Uniform weights `1/n`.
pub fn uniform_weights<S: Scalar>(n: usize) -> Array1<S> {
    Array1::from_elem(n, S::one() / S::from_f64_c(n as f64))
}

/// Squared 2-Wasserstein distance between the uniform empirical measures of
/// two point clouds, via the configured solver.
pub fn w2_squared_empirical<S: Scalar>(
    x: &ArrayView2<S>,
    y: &ArrayView2<S>,
    solver: &OtSolver<S>,
) -> Result<S> {
    let cost = CostMatrix::squared_euclidean(x, y)?;
    let mu = uniform_weights(x.nrows());
    let nu = uniform_weights(y.nrows());
    let (_, value) = solver.solve(&cost, &mu.view(), &nu.view())?;
    Ok(value)
}

/// The exact 1D optimal map between two equal-size empirical measures under
/// convex cost: match by sorted rank. Output is indexed like `base`.
pub fn monotone_map_1d<S: Scalar>(base: &[S], target: &[S]) -> Result<Vec<S>> {
    if base.len() != target.len() {
        return Err(Error::ShapeMismatch(format!(
            "1D monotone map needs equal sizes ({} vs {})",
            base.len(),
            target.len()
        )));
    }
    let mut order: Vec<usize> = (0..base.len()).collect();
    order.sort_by(|&a, &b| base[a].partial_cmp(&base[b]).unwrap_or(Ordering::Equal));
    let mut sorted_target: Vec<S> = target.to_vec();
    sorted_target.sort_by(|a, b| a.partial_cmp(b).unwrap_or(Ordering::Equal));
    let mut out = vec![S::zero(); base.len()];
    for (rank, &idx) in order.iter().enumerate() {
        out[idx] = sorted_target[rank];
    }
    Ok(out)
}
