//! Projection of a target dataset onto the geodesic hull of a collection:
//! pairwise map distances over a common base, the quadratic surrogate built
//! from them, and its simplex-constrained minimization.

use ndarray::{Array1, Array2, ArrayView2};

use crate::data::{LabeledDataset, SimplexWeights};
use crate::error::{Error, Result};
use crate::labels::{label_distance_matrix, soft_label_cost, LabelDistanceConfig, LabelDistanceMatrix};
use crate::linalg::{solve_linear, sq_dist};
use crate::map::{identity_map, DatasetMap};
use crate::scalar::Scalar;

/// Coefficients of the quadratic surrogate: per-source distances to the base
/// (`d`) and pairwise distances between sources (`pairwise`, symmetric with a
/// zero diagonal). All in squared-distance units.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionProblem<S: Scalar> {
    d: Vec<S>,
    pairwise: Array2<S>,
}

impl<S: Scalar> ProjectionProblem<S> {
    pub fn new(d: Vec<S>, pairwise: Array2<S>) -> Result<Self> {
        let m = d.len();
        if m == 0 || pairwise.nrows() != m || pairwise.ncols() != m {
            return Err(Error::ShapeMismatch(format!(
                "{} distances vs {}x{} pairwise matrix",
                m,
                pairwise.nrows(),
                pairwise.ncols()
            )));
        }
        let tol = S::tol(1e-9);
        for (i, &v) in d.iter().enumerate() {
            if !v.is_finite() || v < S::zero() {
                return Err(Error::OutOfRange {
                    name: "distance",
                    value: v.to_f64_c(),
                    lo: 0.0,
                    hi: f64::INFINITY,
                });
            }
            if pairwise[[i, i]] != S::zero() {
                return Err(Error::ShapeMismatch(format!("nonzero diagonal at {i}")));
            }
        }
        let mut sym = pairwise;
        for i in 0..m {
            for j in i + 1..m {
                let a = sym[[i, j]];
                let b = sym[[j, i]];
                if !a.is_finite() || a < S::zero() || (a - b).abs() > tol {
                    return Err(Error::ShapeMismatch(format!(
                        "pairwise entry ({i},{j}) invalid or asymmetric"
                    )));
                }
                sym[[j, i]] = a;
            }
        }
        Ok(Self { d, pairwise: sym })
    }

    pub fn len(&self) -> usize {
        self.d.len()
    }

    pub fn is_empty(&self) -> bool {
        self.d.is_empty()
    }

    pub fn distances(&self) -> &[S] {
        &self.d
    }

    pub fn pairwise(&self) -> ArrayView2<'_, S> {
        self.pairwise.view()
    }
}

/// Simplex minimizer of the surrogate, its objective value, and the total
/// iteration count spent across solver starts.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionSolution<S: Scalar> {
    pub a_hat: SimplexWeights<S>,
    pub objective: S,
    pub iterations: usize,
}

/// Mean squared discrepancy between two maps over their shared source:
/// feature distance plus the bilinear label cost against `m_ij` (rows indexed
/// by `map_i`'s target classes, columns by `map_j`'s). For hard mapped labels
/// the label term is exactly the class-pair distance.
pub fn dataset_distance_2q<S: Scalar>(
    map_i: &DatasetMap<S>,
    map_j: &DatasetMap<S>,
    m_ij: &LabelDistanceMatrix<S>,
) -> Result<S> {
    if map_i.source_id() != map_j.source_id() || map_i.len() != map_j.len() {
        return Err(Error::SourceMismatch(format!(
            "`{}` ({} rows) vs `{}` ({} rows)",
            map_i.source_id(),
            map_i.len(),
            map_j.source_id(),
            map_j.len()
        )));
    }
    if map_i.mapped_features().ncols() != map_j.mapped_features().ncols() {
        return Err(Error::ShapeMismatch("mapped feature dims differ".into()));
    }
    if m_ij.nrows() != map_i.num_target_classes() || m_ij.ncols() != map_j.num_target_classes() {
        return Err(Error::ShapeMismatch(format!(
            "label matrix {}x{} vs classes ({}, {})",
            m_ij.nrows(),
            m_ij.ncols(),
            map_i.num_target_classes(),
            map_j.num_target_classes()
        )));
    }
    let n = map_i.len();
    let fi = map_i.mapped_features();
    let fj = map_j.mapped_features();
    let li = map_i.mapped_labels();
    let lj = map_j.mapped_labels();
    let mut acc = S::zero();
    for r in 0..n {
        acc = acc + sq_dist(&fi.row(r), &fj.row(r));
        acc = acc + soft_label_cost(&li.row(r), &lj.row(r), m_ij)?;
    }
    Ok(acc / S::from_f64_c(n as f64))
}

/// The quadratic surrogate at `a`:
/// `sum_i a_i d_i - 1/2 sum_{i != j} a_i a_j pairwise_ij`.
pub fn surrogate<S: Scalar>(a: &SimplexWeights<S>, prob: &ProjectionProblem<S>) -> Result<S> {
    if a.len() != prob.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} weights vs {} datasets",
            a.len(),
            prob.len()
        )));
    }
    Ok(surrogate_unchecked(a.as_slice(), prob))
}

fn surrogate_unchecked<S: Scalar>(a: &[S], prob: &ProjectionProblem<S>) -> S {
    let m = prob.len();
    let mut lin = S::zero();
    for i in 0..m {
        lin = lin + a[i] * prob.d[i];
    }
    let mut quad = S::zero();
    for i in 0..m {
        for j in 0..m {
            if i != j {
                quad = quad + a[i] * a[j] * prob.pairwise[[i, j]];
            }
        }
    }
    lin - quad / S::from_f64_c(2.0)
}

/// Both sides of the closed-form identity for generalized geodesics in
/// Euclidean space, evaluated on matched sample arrays.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeodesicDistanceEval<S: Scalar> {
    /// `(1/n) sum_r |x_r - sum_i a_i T_i(x_r)|^2`
    pub direct: S,
    /// `sum_i a_i W2nu(mu_i, nu) - 1/2 sum_{i != j} a_i a_j W2nu(mu_i, mu_j)`
    pub formula: S,
}

/// Evaluate the generalized-geodesic distance both directly and through its
/// expansion in map distances. `maps[i]` holds `T_i` applied to every base
/// sample, row-aligned with `nu_samples`; the two results agree to numerical
/// precision when the arrays are consistent (the caller supplies optimal maps
/// when a transport interpretation is wanted, e.g. 1D monotone
/// rearrangements).
pub fn euclidean_generalized_geodesic_distance<S: Scalar>(
    nu_samples: &ArrayView2<S>,
    maps: &[Array2<S>],
    a: &SimplexWeights<S>,
) -> Result<GeodesicDistanceEval<S>> {
    let m = maps.len();
    if m == 0 || a.len() != m {
        return Err(Error::ShapeMismatch(format!(
            "{} maps vs {} weights",
            m,
            a.len()
        )));
    }
    let n = nu_samples.nrows();
    let d = nu_samples.ncols();
    for (i, t) in maps.iter().enumerate() {
        if t.nrows() != n || t.ncols() != d {
            return Err(Error::ShapeMismatch(format!(
                "map {i} is {}x{}, base is {n}x{d}",
                t.nrows(),
                t.ncols()
            )));
        }
    }
    let w = a.as_slice();
    let inv_n = S::one() / S::from_f64_c(n as f64);

    let mut direct = S::zero();
    let mut blend = Array1::<S>::zeros(d);
    for r in 0..n {
        blend.fill(S::zero());
        for (i, t) in maps.iter().enumerate() {
            for c in 0..d {
                blend[c] = blend[c] + w[i] * t[[r, c]];
            }
        }
        direct = direct + sq_dist(&nu_samples.row(r), &blend.view());
    }
    direct = direct * inv_n;

    let mut to_base = vec![S::zero(); m];
    for (i, t) in maps.iter().enumerate() {
        let mut acc = S::zero();
        for r in 0..n {
            acc = acc + sq_dist(&t.row(r), &nu_samples.row(r));
        }
        to_base[i] = acc * inv_n;
    }
    let mut formula = S::zero();
    for i in 0..m {
        formula = formula + w[i] * to_base[i];
    }
    let half = S::from_f64_c(0.5);
    for i in 0..m {
        for j in 0..m {
            if i == j {
                continue;
            }
            let mut acc = S::zero();
            for r in 0..n {
                acc = acc + sq_dist(&maps[i].row(r), &maps[j].row(r));
            }
            formula = formula - half * w[i] * w[j] * acc * inv_n;
        }
    }
    Ok(GeodesicDistanceEval { direct, formula })
}

/// All simplex points with coordinates `k / resolution`, enumerated in
/// lexicographic order of the integer compositions. Yields
/// `C(resolution + m - 1, m - 1)` points.
pub fn simplex_grid<S: Scalar>(m: usize, resolution: usize) -> Result<Vec<SimplexWeights<S>>> {
    if m == 0 {
        return Err(Error::ShapeMismatch("m must be >= 1".into()));
    }
    if resolution == 0 {
        return Err(Error::OutOfRange {
            name: "resolution",
            value: 0.0,
            lo: 1.0,
            hi: f64::INFINITY,
        });
    }
    let res = S::from_f64_c(resolution as f64);
    let mut out = Vec::new();
    let mut counts = vec![0usize; m];
    fn rec<S: Scalar>(
        counts: &mut Vec<usize>,
        pos: usize,
        left: usize,
        res: S,
        out: &mut Vec<SimplexWeights<S>>,
    ) {
        if pos + 1 == counts.len() {
            counts[pos] = left;
            let a: Vec<S> = counts
                .iter()
                .map(|&k| S::from_f64_c(k as f64) / res)
                .collect();
            out.push(SimplexWeights::new(a).expect("grid point is on the simplex"));
            return;
        }
        for k in 0..=left {
            counts[pos] = k;
            rec(counts, pos + 1, left - k, res, out);
        }
    }
    rec(&mut counts, 0, resolution, res, &mut out);
    Ok(out)
}

/// Gradient of the surrogate: `d - W a`.
fn gradient<S: Scalar>(a: &[S], prob: &ProjectionProblem<S>) -> Vec<S> {
    let m = prob.len();
    let mut g = prob.d.clone();
    for i in 0..m {
        let mut acc = S::zero();
        for j in 0..m {
            acc = acc + prob.pairwise[[i, j]] * a[j];
        }
        g[i] = g[i] - acc;
    }
    g
}

/// First-order stationarity measure on the simplex:
/// `max_i a_i * (g_i - min_j g_j)`; zero exactly at KKT points.
fn kkt_residual<S: Scalar>(a: &[S], g: &[S]) -> S {
    let lambda = g.iter().cloned().fold(S::infinity(), S::min);
    a.iter()
        .zip(g.iter())
        .map(|(&ai, &gi)| ai * (gi - lambda))
        .fold(S::zero(), S::max)
}

/// Euclidean projection onto the simplex (sort-based).
fn project_simplex<S: Scalar>(v: &[S]) -> Vec<S> {
    let mut sorted = v.to_vec();
    sorted.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    let mut acc = S::zero();
    let mut theta = S::zero();
    for (k, &u) in sorted.iter().enumerate() {
        acc = acc + u;
        let kk = S::from_f64_c((k + 1) as f64);
        let cand = (acc - S::one()) / kk;
        if u - cand > S::zero() {
            theta = cand;
        } else {
            break;
        }
    }
    v.iter().map(|&x| (x - theta).max(S::zero())).collect()
}

/// One projected-gradient descent run with a fixed safe step.
fn projected_gradient<S: Scalar>(
    start: Vec<S>,
    prob: &ProjectionProblem<S>,
    max_iters: usize,
) -> (Vec<S>, usize) {
    let m = prob.len();
    let mut lip = S::zero();
    for i in 0..m {
        let row: S = (0..m).map(|j| prob.pairwise[[i, j]].abs()).sum();
        lip = lip.max(row);
    }
    for &v in &prob.d {
        lip = lip.max(v.abs());
    }
    let step = S::one() / lip.max(S::from_f64_c(1e-12));
    let mut a = start;
    let mut iters = 0usize;
    let move_tol = S::from_f64_c(1e-16);
    for _ in 0..max_iters {
        iters += 1;
        let g = gradient(&a, prob);
        if kkt_residual(&a, &g) <= S::from_f64_c(1e-12) {
            break;
        }
        let shifted: Vec<S> = a.iter().zip(g.iter()).map(|(&x, &gi)| x - step * gi).collect();
        let next = project_simplex(&shifted);
        let moved = a
            .iter()
            .zip(next.iter())
            .map(|(&x, &y)| (x - y).abs())
            .fold(S::zero(), S::max);
        a = next;
        if moved <= move_tol {
            break;
        }
    }
    (a, iters)
}

/// Solve the equality-constrained KKT system on the support of `a`, dropping
/// negative coordinates one at a time (active-set polish). Returns `None` when
/// the face system is singular.
fn face_polish<S: Scalar>(a: &[S], prob: &ProjectionProblem<S>) -> Option<Vec<S>> {
    let m = prob.len();
    let mut support: Vec<usize> = (0..m)
        .filter(|&i| a[i] > S::from_f64_c(1e-12))
        .collect();
    if support.is_empty() {
        return None;
    }
    for _ in 0..m {
        let s = support.len();
        if s == 1 {
            let mut out = vec![S::zero(); m];
            out[support[0]] = S::one();
            return Some(out);
        }
        // [ W_ss  1 ] [a_s    ]   [ d_s ]
        // [ 1^T   0 ] [lambda ] = [ 1   ]
        let mut sys = Array2::<S>::zeros((s + 1, s + 1));
        let mut rhs = Array1::<S>::zeros(s + 1);
        for (r, &i) in support.iter().enumerate() {
            for (c, &j) in support.iter().enumerate() {
                sys[[r, c]] = prob.pairwise[[i, j]];
            }
            sys[[r, s]] = S::one();
            sys[[s, r]] = S::one();
            rhs[r] = prob.d[i];
        }
        rhs[s] = S::one();
        let sol = solve_linear(&sys.view(), &rhs.view())?;
        let weights: Vec<S> = (0..s).map(|r| sol[r]).collect();
        if let Some(worst) = weights
            .iter()
            .enumerate()
            .filter(|(_, &w)| w < -S::from_f64_c(1e-12))
            .min_by(|a, b| a.1.partial_cmp(b.1).unwrap_or(std::cmp::Ordering::Equal))
            .map(|(r, _)| r)
        {
            support.remove(worst);
            continue;
        }
        let mut out = vec![S::zero(); m];
        let mut total = S::zero();
        for (r, &i) in support.iter().enumerate() {
            let w = weights[r].max(S::zero());
            out[i] = w;
            total = total + w;
        }
        if total <= S::zero() {
            return None;
        }
        for v in out.iter_mut() {
            *v = *v / total;
        }
        return Some(out);
    }
    None
}

/// Minimize the surrogate over the simplex.
///
/// Multi-start projected gradient (every vertex, the uniform center, and the
/// best point of a coarse simplex grid) followed by an active-set polish on
/// the resulting support. The surrogate need not be convex; the returned
/// point satisfies first-order KKT conditions within 1e-8 (else
/// `SolverFailure`) and ties between starts keep the earliest one.
pub fn solve_projection_weights<S: Scalar>(
    prob: &ProjectionProblem<S>,
) -> Result<ProjectionSolution<S>> {
    let m = prob.len();
    if m == 1 {
        let a_hat = SimplexWeights::vertex(1, 0)?;
        let objective = surrogate(&a_hat, prob)?;
        return Ok(ProjectionSolution {
            a_hat,
            objective,
            iterations: 0,
        });
    }

    let mut starts: Vec<Vec<S>> = Vec::with_capacity(m + 2);
    for i in 0..m {
        starts.push(SimplexWeights::vertex(m, i)?.as_slice().to_vec());
    }
    starts.push(SimplexWeights::uniform(m)?.as_slice().to_vec());
    // Seed from the best grid point so the solution dominates coarse grids by
    // construction (descent never increases the objective).
    let grid_res = match m {
        0..=5 => 20,
        6..=8 => 8,
        _ => 4,
    };
    if let Ok(grid) = simplex_grid::<S>(m, grid_res) {
        if let Some(best) = grid.into_iter().min_by(|a, b| {
            surrogate_unchecked(a.as_slice(), prob)
                .partial_cmp(&surrogate_unchecked(b.as_slice(), prob))
                .unwrap_or(std::cmp::Ordering::Equal)
        }) {
            starts.push(best.as_slice().to_vec());
        }
    }

    let mut best: Option<(Vec<S>, S)> = None;
    let mut total_iters = 0usize;
    for start in starts {
        let mut a = start;
        for _round in 0..4 {
            let (next, used) = projected_gradient(a.clone(), prob, 2500);
            total_iters += used;
            a = next;
            if let Some(polished) = face_polish(&a, prob) {
                let f_cur = surrogate_unchecked(&a, prob);
                let f_pol = surrogate_unchecked(&polished, prob);
                if f_pol <= f_cur + S::from_f64_c(1e-13) {
                    a = polished;
                }
            }
            let g = gradient(&a, prob);
            if kkt_residual(&a, &g) <= S::from_f64_c(1e-10) {
                break;
            }
        }
        let f = surrogate_unchecked(&a, prob);
        let replace = match &best {
            None => true,
            Some((_, bf)) => f < *bf,
        };
        if replace {
            best = Some((a, f));
        }
    }

    let (a, _) = best.expect("at least one start");
    let g = gradient(&a, prob);
    let kkt = kkt_residual(&a, &g);
    if kkt > S::from_f64_c(1e-8) {
        return Err(Error::SolverFailure(format!(
            "projection weights: KKT residual {:e} above 1e-8",
            kkt.to_f64_c()
        )));
    }
    let a_hat = SimplexWeights::new(a)?;
    let objective = surrogate(&a_hat, prob)?;
    Ok(ProjectionSolution {
        a_hat,
        objective,
        iterations: total_iters,
    })
}

/// Assemble the projection problem for a target `q` and realized maps onto
/// `sources`. Cross label matrices (each source against `q`, and each source
/// pair) are computed once here and folded into the coefficients.
pub fn build_projection_problem<S: Scalar>(
    q: &LabeledDataset<S>,
    sources: &[LabeledDataset<S>],
    maps: &[DatasetMap<S>],
    label_cfg: &LabelDistanceConfig,
) -> Result<ProjectionProblem<S>> {
    let m = sources.len();
    if m == 0 || maps.len() != m {
        return Err(Error::ShapeMismatch(format!(
            "{} sources vs {} maps",
            m,
            maps.len()
        )));
    }
    for (i, map) in maps.iter().enumerate() {
        if map.source_id() != q.id() {
            return Err(Error::SourceMismatch(format!(
                "map {i} is over `{}`, target dataset is `{}`",
                map.source_id(),
                q.id()
            )));
        }
        if map.target_id() != sources[i].id() {
            return Err(Error::SourceMismatch(format!(
                "map {i} targets `{}`, expected `{}`",
                map.target_id(),
                sources[i].id()
            )));
        }
    }
    let base = identity_map(q);
    let mut d = Vec::with_capacity(m);
    for (i, map) in maps.iter().enumerate() {
        let m_iq = label_distance_matrix(&sources[i], q, label_cfg)?;
        d.push(dataset_distance_2q(map, &base, &m_iq)?);
    }
    let mut pairwise = Array2::<S>::zeros((m, m));
    for i in 0..m {
        for j in i + 1..m {
            let m_ij = label_distance_matrix(&sources[i], &sources[j], label_cfg)?;
            let v = dataset_distance_2q(&maps[i], &maps[j], &m_ij)?;
            pairwise[[i, j]] = v;
            pairwise[[j, i]] = v;
        }
    }
    ProjectionProblem::new(d, pairwise)
}

/// Monte-Carlo style direct evaluation of the base distance for a synthesized
/// map blend: the mean squared move `|x - sum_i a_i T_i(x)|^2` plus the
/// blended bilinear label cost against `q`'s labels. This is the direct
/// counterpart the surrogate approximates; exposed for comparison, not used by
/// the solver.
pub fn direct_blend_distance<S: Scalar>(
    q: &LabeledDataset<S>,
    sources: &[LabeledDataset<S>],
    maps: &[DatasetMap<S>],
    a: &SimplexWeights<S>,
    label_cfg: &LabelDistanceConfig,
) -> Result<S> {
    let m = maps.len();
    if m == 0 || a.len() != m || sources.len() != m {
        return Err(Error::ShapeMismatch(format!(
            "{} maps, {} sources, {} weights",
            m,
            sources.len(),
            a.len()
        )));
    }
    let n = q.len();
    let d = q.dim();
    let w = a.as_slice();
    let mut feature_term = S::zero();
    let mut blend = Array1::<S>::zeros(d);
    for r in 0..n {
        blend.fill(S::zero());
        for (i, map) in maps.iter().enumerate() {
            let row = map.mapped_features();
            for c in 0..d {
                blend[c] = blend[c] + w[i] * row[[r, c]];
            }
        }
        feature_term = feature_term + sq_dist(&q.features().row(r), &blend.view());
    }
    let inv_n = S::one() / S::from_f64_c(n as f64);
    feature_term = feature_term * inv_n;

    let mut label_term = S::zero();
    for (i, map) in maps.iter().enumerate() {
        let m_iq = label_distance_matrix(&sources[i], q, label_cfg)?;
        let mut acc = S::zero();
        for r in 0..n {
            acc = acc
                + soft_label_cost(
                    &map.mapped_labels().row(r),
                    &q.labels().row(r),
                    &m_iq,
                )?;
        }
        label_term = label_term + w[i] * acc * inv_n;
    }
    Ok(feature_term + label_term)
}
