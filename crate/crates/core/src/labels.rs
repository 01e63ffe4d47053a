//! Distances between class-conditional feature distributions and the
//! label-to-label matrix they assemble into.
//!
//! Two evaluation routes are provided: the exact inner OT on class samples,
//! and the Gaussian closed form (Bures-Wasserstein) on empirical moments.

use ndarray::{Array2, ArrayView1, ArrayView2};

use crate::data::{split_by_class, LabeledDataset};
use crate::error::{Error, Result};
use crate::linalg::{sq_dist, sqrt_psd, symmetrize, trace_sqrt_psd};
use crate::ot::{w2_squared_empirical, OtSolver};
use crate::scalar::Scalar;

/// How class-conditional distances are evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LabelMethod {
    /// Inner exact OT between class sample sets (subsampled to a cap).
    Exact,
    /// Bures-Wasserstein closed form on empirical means and covariances.
    Gaussian,
}

impl LabelMethod {
    pub fn as_str(&self) -> &'static str {
        match self {
            LabelMethod::Exact => "exact",
            LabelMethod::Gaussian => "gaussian",
        }
    }
}

/// Settings for [`label_distance_matrix`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelDistanceConfig {
    pub method: LabelMethod,
    /// Per-class sample cap before the inner OT (exact method only). The
    /// inner problems are quadratic in this cap.
    pub class_cap: usize,
}

impl Default for LabelDistanceConfig {
    fn default() -> Self {
        Self {
            method: LabelMethod::Gaussian,
            class_cap: 500,
        }
    }
}

impl LabelDistanceConfig {
    pub fn exact() -> Self {
        Self {
            method: LabelMethod::Exact,
            class_cap: 500,
        }
    }

    pub fn gaussian() -> Self {
        Self {
            method: LabelMethod::Gaussian,
            class_cap: 500,
        }
    }
}

/// Pairwise squared W2 between the class conditionals of two datasets:
/// entry `(i, j)` compares class `i` of the first dataset with class `j` of
/// the second.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelDistanceMatrix<S: Scalar> {
    m: Array2<S>,
    method: LabelMethod,
}

impl<S: Scalar> LabelDistanceMatrix<S> {
    pub fn new(m: Array2<S>, method: LabelMethod) -> Result<Self> {
        for &v in m.iter() {
            if !v.is_finite() || v < S::zero() {
                return Err(Error::OutOfRange {
                    name: "label distance",
                    value: v.to_f64_c(),
                    lo: 0.0,
                    hi: f64::INFINITY,
                });
            }
        }
        Ok(Self { m, method })
    }

    /// An all-zero matrix; collapses the label term of any cost built on it.
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            m: Array2::zeros((rows, cols)),
            method: LabelMethod::Exact,
        }
    }

    pub fn matrix(&self) -> ArrayView2<'_, S> {
        self.m.view()
    }

    pub fn method(&self) -> LabelMethod {
        self.method
    }

    pub fn nrows(&self) -> usize {
        self.m.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.m.ncols()
    }

    /// Transposed view of the same geometry (for swapped dataset order).
    pub fn transposed(&self) -> Self {
        Self {
            m: self.m.t().to_owned(),
            method: self.method,
        }
    }
}

/// Squared Bures-Wasserstein distance between two Gaussians:
/// `|m1 - m2|^2 + tr(c1 + c2 - 2 (c1^{1/2} c2 c1^{1/2})^{1/2})`.
///
/// Inputs are symmetrized; eigenvalues below `-1e-6` are rejected as NotPsd,
/// smaller negative ones are clamped to zero.
pub fn bures_w2_squared<S: Scalar>(
    mean1: &ArrayView1<S>,
    cov1: &ArrayView2<S>,
    mean2: &ArrayView1<S>,
    cov2: &ArrayView2<S>,
) -> Result<S> {
    if mean1.len() != mean2.len()
        || cov1.nrows() != mean1.len()
        || cov2.nrows() != mean2.len()
        || cov1.nrows() != cov1.ncols()
        || cov2.nrows() != cov2.ncols()
    {
        return Err(Error::ShapeMismatch("gaussian moment shapes".into()));
    }
    let psd_tol = S::tol(1e-6);
    let c1 = symmetrize(cov1);
    let c2 = symmetrize(cov2);
    let root1 = sqrt_psd(&c1.view(), psd_tol)?;
    let inner = root1.dot(&c2).dot(&root1);
    let cross = trace_sqrt_psd(&inner.view(), psd_tol)?;

    let mean_term = sq_dist(mean1, mean2);
    let tr1: S = c1.diag().iter().cloned().sum();
    let tr2: S = c2.diag().iter().cloned().sum();
    let two = S::from_f64_c(2.0);
    Ok((mean_term + tr1 + tr2 - two * cross).max(S::zero()))
}

/// Assemble the label-to-label matrix between two hard-labeled datasets.
///
/// Entry `(i, j)` is the squared W2 distance between class `i` of `ds_a` and
/// class `j` of `ds_b`, evaluated per `cfg.method`. When both arguments are
/// the same dataset (by id) only the upper triangle is computed; the result is
/// then exactly symmetric with a zero diagonal.
pub fn label_distance_matrix<S: Scalar>(
    ds_a: &LabeledDataset<S>,
    ds_b: &LabeledDataset<S>,
    cfg: &LabelDistanceConfig,
) -> Result<LabelDistanceMatrix<S>> {
    let conds_a = split_by_class(ds_a)?;
    let same = ds_a == ds_b;
    let conds_b = if same { conds_a.clone() } else { split_by_class(ds_b)? };

    let mut m = Array2::<S>::zeros((conds_a.len(), conds_b.len()));
    for (i, ca) in conds_a.iter().enumerate() {
        for (j, cb) in conds_b.iter().enumerate() {
            if same {
                if i == j {
                    continue;
                }
                if j < i {
                    m[[i, j]] = m[[j, i]];
                    continue;
                }
            }
            let v = match cfg.method {
                LabelMethod::Gaussian => bures_w2_squared(
                    &ca.mean.view(),
                    &ca.covariance.view(),
                    &cb.mean.view(),
                    &cb.covariance.view(),
                )?,
                LabelMethod::Exact => {
                    let xa = subsample(&ca.samples.view(), cfg.class_cap);
                    let xb = subsample(&cb.samples.view(), cfg.class_cap);
                    let cells = xa.nrows() * xb.nrows();
                    let solver = OtSolver::Exact {
                        max_cells: cells.max(crate::ot::DEFAULT_EXACT_CELL_CAP),
                    };
                    w2_squared_empirical(&xa.view(), &xb.view(), &solver)?
                }
            };
            m[[i, j]] = v.max(S::zero());
        }
    }
    LabelDistanceMatrix::new(m, cfg.method)
}

/// Deterministic subsample: evenly spaced row indices, at most `cap` of them.
fn subsample<S: Scalar>(x: &ArrayView2<S>, cap: usize) -> Array2<S> {
    let n = x.nrows();
    if n <= cap || cap == 0 {
        return x.to_owned();
    }
    let idx: Vec<usize> = (0..cap).map(|i| i * n / cap).collect();
    x.select(ndarray::Axis(0), &idx)
}

/// Bilinear label cost `yA^T M yB`; on one-hot labels this is exactly the
/// matrix entry.
pub fn soft_label_cost<S: Scalar>(
    y_a: &ArrayView1<S>,
    y_b: &ArrayView1<S>,
    m: &LabelDistanceMatrix<S>,
) -> Result<S> {
    if y_a.len() != m.nrows() || y_b.len() != m.ncols() {
        return Err(Error::ShapeMismatch(format!(
            "labels ({}, {}) vs matrix {}x{}",
            y_a.len(),
            y_b.len(),
            m.nrows(),
            m.ncols()
        )));
    }
    let mm = m.matrix();
    let mut acc = S::zero();
    for (i, &ya) in y_a.iter().enumerate() {
        if ya == S::zero() {
            continue;
        }
        let mut row = S::zero();
        for (j, &yb) in y_b.iter().enumerate() {
            row = row + mm[[i, j]] * yb;
        }
        acc = acc + ya * row;
    }
    Ok(acc)
}
