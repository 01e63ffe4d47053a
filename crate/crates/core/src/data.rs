//! Dataset containers and label-space plumbing shared by every other module.
//!
//! A [`LabeledDataset`] stores features together with per-sample label
//! distributions. Hard-labeled data is the one-hot special case; keeping
//! everything as distributions lets pushforward datasets (whose labels are
//! genuinely soft) share the same carrier.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};

use crate::error::{Error, Result};
use crate::linalg;
use crate::scalar::Scalar;

/// A labeled dataset: an `n x d` feature matrix plus an `n x C` row-stochastic
/// label matrix. All types in this crate treat datasets as immutable.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset<S: Scalar> {
    features: Array2<S>,
    labels: Array2<S>,
    class_names: Vec<String>,
    id: String,
}

impl<S: Scalar> LabeledDataset<S> {
    /// Build and validate a dataset. `class_names` must have one entry per
    /// label column.
    pub fn new(
        id: impl Into<String>,
        features: Array2<S>,
        labels: Array2<S>,
        class_names: Vec<String>,
    ) -> Result<Self> {
        let ds = Self {
            features,
            labels,
            class_names,
            id: id.into(),
        };
        ds.validate()?;
        Ok(ds)
    }

    /// Build a hard-labeled dataset from integer class ids. Class names
    /// default to `"0"..="C-1"` when not provided.
    pub fn from_hard_labels(
        id: impl Into<String>,
        features: Array2<S>,
        class_ids: &[usize],
        num_classes: usize,
        class_names: Option<Vec<String>>,
    ) -> Result<Self> {
        if class_ids.len() != features.nrows() {
            return Err(Error::ShapeMismatch(format!(
                "{} class ids for {} feature rows",
                class_ids.len(),
                features.nrows()
            )));
        }
        let mut labels = Array2::<S>::zeros((features.nrows(), num_classes));
        for (row, &c) in class_ids.iter().enumerate() {
            if c >= num_classes {
                return Err(Error::IndexOutOfRange {
                    index: c,
                    len: num_classes,
                });
            }
            labels[[row, c]] = S::one();
        }
        let names =
            class_names.unwrap_or_else(|| (0..num_classes).map(|c| c.to_string()).collect());
        Self::new(id, features, labels, names)
    }

    /// Check every dataset invariant; pure and idempotent.
    pub fn validate(&self) -> Result<()> {
        let (n, d) = self.features.dim();
        let c = self.labels.ncols();
        if n == 0 || d == 0 || c == 0 {
            return Err(Error::ShapeMismatch(format!(
                "dataset `{}` must have n >= 1, d >= 1, C >= 1 (got n={n}, d={d}, C={c})",
                self.id
            )));
        }
        if self.labels.nrows() != n {
            return Err(Error::ShapeMismatch(format!(
                "{} feature rows but {} label rows",
                n,
                self.labels.nrows()
            )));
        }
        if self.class_names.len() != c {
            return Err(Error::ShapeMismatch(format!(
                "{} class names for {} label columns",
                self.class_names.len(),
                c
            )));
        }
        if self.features.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteValue(format!("features of `{}`", self.id)));
        }
        let tol = S::tol(1e-9);
        for (row, lab) in self.labels.axis_iter(Axis(0)).enumerate() {
            let mut sum = S::zero();
            for &v in lab.iter() {
                if !v.is_finite() {
                    return Err(Error::NonFiniteValue(format!("label row {row}")));
                }
                if v < S::zero() {
                    return Err(Error::NonStochasticLabel {
                        row,
                        sum: v.to_f64_c(),
                    });
                }
                sum = sum + v;
            }
            if (sum - S::one()).abs() > tol {
                return Err(Error::NonStochasticLabel {
                    row,
                    sum: sum.to_f64_c(),
                });
            }
        }
        Ok(())
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn features(&self) -> ArrayView2<'_, S> {
        self.features.view()
    }

    pub fn labels(&self) -> ArrayView2<'_, S> {
        self.labels.view()
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    /// Number of samples.
    pub fn len(&self) -> usize {
        self.features.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.features.nrows() == 0
    }

    /// Feature dimension.
    pub fn dim(&self) -> usize {
        self.features.ncols()
    }

    pub fn num_classes(&self) -> usize {
        self.labels.ncols()
    }

    /// A dataset is hard-labeled iff every row has exactly one nonzero entry
    /// equal to 1.
    pub fn is_hard(&self) -> bool {
        self.labels.axis_iter(Axis(0)).all(|row| {
            let mut ones = 0usize;
            for &v in row.iter() {
                if v == S::one() {
                    ones += 1;
                } else if v != S::zero() {
                    return false;
                }
            }
            ones == 1
        })
    }

    /// Integer class ids of a hard-labeled dataset.
    pub fn hard_class_ids(&self) -> Result<Vec<usize>> {
        if !self.is_hard() {
            return Err(Error::SoftLabels);
        }
        Ok(self
            .labels
            .axis_iter(Axis(0))
            .map(|row| row.iter().position(|&v| v == S::one()).unwrap())
            .collect())
    }

    /// Select a subset of rows, preserving order. Used for batching.
    pub fn select_rows(&self, rows: &[usize], id: impl Into<String>) -> Result<Self> {
        for &r in rows {
            if r >= self.len() {
                return Err(Error::IndexOutOfRange {
                    index: r,
                    len: self.len(),
                });
            }
        }
        let features = self.features.select(Axis(0), rows);
        let labels = self.labels.select(Axis(0), rows);
        Self::new(id, features, labels, self.class_names.clone())
    }
}

/// Empirical feature distribution of one class of a hard-labeled dataset.
///
/// The covariance uses the population (1/n) normalization: the dataset is the
/// plug-in empirical measure, and a single-sample class then has exactly zero
/// spread.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassConditional<S: Scalar> {
    pub class_index: usize,
    pub samples: Array2<S>,
    pub mean: Array1<S>,
    pub covariance: Array2<S>,
}

impl<S: Scalar> ClassConditional<S> {
    /// Compute the empirical moments of a nonempty sample block.
    pub fn from_samples(class_index: usize, samples: Array2<S>) -> Result<Self> {
        let n = samples.nrows();
        if n == 0 {
            return Err(Error::EmptyClass(class_index));
        }
        let d = samples.ncols();
        let inv_n = S::one() / S::from_f64_c(n as f64);
        let mut mean = Array1::<S>::zeros(d);
        for row in samples.axis_iter(Axis(0)) {
            for j in 0..d {
                mean[j] = mean[j] + row[j];
            }
        }
        mean.mapv_inplace(|v| v * inv_n);

        let mut cov = Array2::<S>::zeros((d, d));
        for row in samples.axis_iter(Axis(0)) {
            for a in 0..d {
                let da = row[a] - mean[a];
                for b in a..d {
                    let db = row[b] - mean[b];
                    cov[[a, b]] = cov[[a, b]] + da * db;
                }
            }
        }
        for a in 0..d {
            for b in a..d {
                let v = cov[[a, b]] * inv_n;
                cov[[a, b]] = v;
                cov[[b, a]] = v;
            }
        }
        Ok(Self {
            class_index,
            samples,
            mean,
            covariance: cov,
        })
    }

    /// Validate symmetry (1e-9) and eigenvalue nonnegativity (>= -1e-9) of the
    /// covariance. Moments produced by [`ClassConditional::from_samples`]
    /// satisfy this by construction.
    pub fn validate(&self) -> Result<()> {
        if self.samples.nrows() == 0 {
            return Err(Error::EmptyClass(self.class_index));
        }
        let d = self.covariance.nrows();
        if self.covariance.ncols() != d || self.mean.len() != d || self.samples.ncols() != d {
            return Err(Error::ShapeMismatch(
                "class-conditional moment shapes disagree".into(),
            ));
        }
        let tol = S::tol(1e-9);
        for i in 0..d {
            for j in i + 1..d {
                if (self.covariance[[i, j]] - self.covariance[[j, i]]).abs() > tol {
                    return Err(Error::ShapeMismatch(format!(
                        "covariance asymmetric at ({i},{j})"
                    )));
                }
            }
        }
        let min = linalg::min_eigenvalue(&self.covariance.view());
        if min < -tol {
            return Err(Error::NotPsd(min.to_f64_c()));
        }
        Ok(())
    }
}

/// A point on the probability simplex: the interpolation coordinate of a
/// synthesized dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct SimplexWeights<S: Scalar> {
    a: Vec<S>,
}

impl<S: Scalar> SimplexWeights<S> {
    /// Validate nonnegativity and a unit sum (within 1e-9).
    pub fn new(a: Vec<S>) -> Result<Self> {
        if a.is_empty() {
            return Err(Error::ShapeMismatch("empty weight vector".into()));
        }
        let mut sum = S::zero();
        for (i, &v) in a.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFiniteValue(format!("weight {i}")));
            }
            if v < S::zero() {
                return Err(Error::OutOfRange {
                    name: "weight",
                    value: v.to_f64_c(),
                    lo: 0.0,
                    hi: 1.0,
                });
            }
            sum = sum + v;
        }
        if (sum - S::one()).abs() > S::tol(1e-9) {
            return Err(Error::OutOfRange {
                name: "weight sum",
                value: sum.to_f64_c(),
                lo: 1.0,
                hi: 1.0,
            });
        }
        Ok(Self { a })
    }

    /// The vertex `e_i` of the simplex.
    pub fn vertex(m: usize, i: usize) -> Result<Self> {
        if i >= m {
            return Err(Error::IndexOutOfRange { index: i, len: m });
        }
        let mut a = vec![S::zero(); m];
        a[i] = S::one();
        Self::new(a)
    }

    /// The barycenter `(1/m, ..., 1/m)`.
    pub fn uniform(m: usize) -> Result<Self> {
        if m == 0 {
            return Err(Error::ShapeMismatch("empty weight vector".into()));
        }
        let w = S::one() / S::from_f64_c(m as f64);
        Self::new(vec![w; m])
    }

    pub fn len(&self) -> usize {
        self.a.len()
    }

    pub fn is_empty(&self) -> bool {
        self.a.is_empty()
    }

    pub fn as_slice(&self) -> &[S] {
        &self.a
    }
}

/// The zero-padded joint label space of `m` datasets with class counts
/// `C_1..C_m`: labels embed at per-dataset offsets into a `sum(C_i)`-dim space.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PaddedLabelSpace {
    class_counts: Vec<usize>,
    offsets: Vec<usize>,
    total_dim: usize,
}

impl PaddedLabelSpace {
    pub fn new(class_counts: &[usize]) -> Result<Self> {
        if class_counts.is_empty() || class_counts.iter().any(|&c| c == 0) {
            return Err(Error::ShapeMismatch(
                "class counts must be nonempty and positive".into(),
            ));
        }
        let mut offsets = Vec::with_capacity(class_counts.len());
        let mut acc = 0usize;
        for &c in class_counts {
            offsets.push(acc);
            acc += c;
        }
        Ok(Self {
            class_counts: class_counts.to_vec(),
            offsets,
            total_dim: acc,
        })
    }

    pub fn num_datasets(&self) -> usize {
        self.class_counts.len()
    }

    pub fn class_counts(&self) -> &[usize] {
        &self.class_counts
    }

    pub fn offsets(&self) -> &[usize] {
        &self.offsets
    }

    pub fn total_dim(&self) -> usize {
        self.total_dim
    }
}

/// Split a hard-labeled dataset into its class-conditional empirical measures.
///
/// Errors with `EmptyClass` if any class id in `0..C` has no samples, and
/// `SoftLabels` if the labels are not one-hot.
pub fn split_by_class<S: Scalar>(ds: &LabeledDataset<S>) -> Result<Vec<ClassConditional<S>>> {
    let ids = ds.hard_class_ids()?;
    let c = ds.num_classes();
    let mut rows_per_class: Vec<Vec<usize>> = vec![Vec::new(); c];
    for (row, &cls) in ids.iter().enumerate() {
        rows_per_class[cls].push(row);
    }
    let mut out = Vec::with_capacity(c);
    for (cls, rows) in rows_per_class.iter().enumerate() {
        if rows.is_empty() {
            return Err(Error::EmptyClass(cls));
        }
        let samples = ds.features().select(Axis(0), rows);
        out.push(ClassConditional::from_samples(cls, samples)?);
    }
    Ok(out)
}

/// Embed a label vector of dataset `i` into the padded joint space: the vector
/// is copied at dataset `i`'s offset and zero elsewhere.
pub fn pad_label<S: Scalar>(
    y: &ArrayView1<S>,
    i: usize,
    space: &PaddedLabelSpace,
) -> Result<Array1<S>> {
    if i >= space.num_datasets() {
        return Err(Error::IndexOutOfRange {
            index: i,
            len: space.num_datasets(),
        });
    }
    if y.len() != space.class_counts()[i] {
        return Err(Error::ShapeMismatch(format!(
            "label has {} entries but dataset {} has {} classes",
            y.len(),
            i,
            space.class_counts()[i]
        )));
    }
    let mut out = Array1::<S>::zeros(space.total_dim());
    let off = space.offsets()[i];
    for (j, &v) in y.iter().enumerate() {
        out[off + j] = v;
    }
    Ok(out)
}
