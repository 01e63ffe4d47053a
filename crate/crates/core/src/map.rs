//! Realized dataset maps: barycentric projection of a transport plan (full
//! and batched) plus kNN pseudo-labeling for few-shot targets.

use ndarray::{Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::LabeledDataset;
use crate::error::{Error, Result};
use crate::labels::label_distance_matrix;
use crate::linalg::sq_dist;
use crate::otdd::{otdd_with_label_matrix, OtddConfig};
use crate::scalar::Scalar;

/// How a map was realized.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MapKind {
    Barycentric,
    BatchedBarycentric,
    Identity,
}

/// A realized map out of a source dataset: for each source sample, a mapped
/// feature vector and a mapped label distribution over the target's classes.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetMap<S: Scalar> {
    source_id: String,
    target_id: String,
    mapped_features: Array2<S>,
    mapped_labels: Array2<S>,
    kind: MapKind,
}

impl<S: Scalar> DatasetMap<S> {
    /// Build a map, validating that mapped label rows are distributions
    /// (sum 1 within 1e-6).
    pub fn new(
        source_id: impl Into<String>,
        target_id: impl Into<String>,
        mapped_features: Array2<S>,
        mapped_labels: Array2<S>,
        kind: MapKind,
    ) -> Result<Self> {
        if mapped_features.nrows() != mapped_labels.nrows() {
            return Err(Error::ShapeMismatch(format!(
                "{} mapped feature rows vs {} mapped label rows",
                mapped_features.nrows(),
                mapped_labels.nrows()
            )));
        }
        let source_id = source_id.into();
        let target_id = target_id.into();
        if kind == MapKind::Identity && source_id != target_id {
            return Err(Error::SourceMismatch(
                "identity map requires source == target".into(),
            ));
        }
        let tol = S::tol(1e-6);
        for (row, lab) in mapped_labels.axis_iter(Axis(0)).enumerate() {
            let sum: S = lab.iter().cloned().sum();
            if (sum - S::one()).abs() > tol || lab.iter().any(|v| *v < S::zero()) {
                return Err(Error::NonStochasticLabel {
                    row,
                    sum: sum.to_f64_c(),
                });
            }
        }
        Ok(Self {
            source_id,
            target_id,
            mapped_features,
            mapped_labels,
            kind,
        })
    }

    pub fn source_id(&self) -> &str {
        &self.source_id
    }

    pub fn target_id(&self) -> &str {
        &self.target_id
    }

    pub fn mapped_features(&self) -> ArrayView2<'_, S> {
        self.mapped_features.view()
    }

    pub fn mapped_labels(&self) -> ArrayView2<'_, S> {
        self.mapped_labels.view()
    }

    pub fn kind(&self) -> MapKind {
        self.kind
    }

    /// Number of source samples the map is defined on.
    pub fn len(&self) -> usize {
        self.mapped_features.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.mapped_features.nrows() == 0
    }

    /// Number of target classes.
    pub fn num_target_classes(&self) -> usize {
        self.mapped_labels.ncols()
    }

    /// Realize the pushforward as a dataset carrying the target's label space.
    pub fn pushforward_dataset(&self, class_names: Vec<String>) -> Result<LabeledDataset<S>> {
        LabeledDataset::new(
            format!("{}->{}", self.source_id, self.target_id),
            self.mapped_features.clone(),
            normalize_rows(&self.mapped_labels.view())?,
            class_names,
        )
    }
}

fn normalize_rows<S: Scalar>(m: &ArrayView2<S>) -> Result<Array2<S>> {
    let mut out = m.to_owned();
    for (row, mut r) in out.axis_iter_mut(Axis(0)).enumerate() {
        let sum: S = r.iter().cloned().sum();
        if sum < S::from_f64_c(1e-12) {
            return Err(Error::DegenerateRow(row));
        }
        r.mapv_inplace(|v| v / sum);
    }
    Ok(out)
}

/// The trivial map of a dataset onto itself.
pub fn identity_map<S: Scalar>(q: &LabeledDataset<S>) -> DatasetMap<S> {
    DatasetMap {
        source_id: q.id().to_string(),
        target_id: q.id().to_string(),
        mapped_features: q.features().to_owned(),
        mapped_labels: q.labels().to_owned(),
        kind: MapKind::Identity,
    }
}

fn barycentric_from_coupling<S: Scalar>(
    q: &LabeledDataset<S>,
    p: &LabeledDataset<S>,
    pi: &ArrayView2<S>,
    kind: MapKind,
) -> Result<DatasetMap<S>> {
    // Row-normalize the plan so every mapped label is exactly stochastic;
    // under exact uniform marginals this equals the N_Q * pi scaling.
    let weights = normalize_rows(pi)?;
    let mapped_features = weights.dot(&p.features());
    let mapped_labels = weights.dot(&p.labels());
    DatasetMap::new(q.id(), p.id(), mapped_features, mapped_labels, kind)
}

/// Barycentric projection of the dataset coupling: source sample `i` maps to
/// the coupling-weighted average of the target's features and one-hot labels,
/// with weights taken from row `i` of the plan normalized to sum to 1.
///
/// `q` must be hard-labeled here since the label matrix is computed from its
/// class conditionals; use [`barycentric_map_with_label_matrix`] to supply a
/// matrix for soft-labeled sources.
pub fn barycentric_map<S: Scalar>(
    q: &LabeledDataset<S>,
    p: &LabeledDataset<S>,
    cfg: &OtddConfig<S>,
) -> Result<DatasetMap<S>> {
    let m = label_distance_matrix(q, p, &cfg.label)?;
    barycentric_map_with_label_matrix(q, p, m, cfg)
}

/// Barycentric projection with a caller-provided label matrix
/// (`C_Q x C_P`-shaped against the two datasets).
pub fn barycentric_map_with_label_matrix<S: Scalar>(
    q: &LabeledDataset<S>,
    p: &LabeledDataset<S>,
    m: crate::labels::LabelDistanceMatrix<S>,
    cfg: &OtddConfig<S>,
) -> Result<DatasetMap<S>> {
    let r = otdd_with_label_matrix(q, p, m, cfg)?;
    barycentric_from_coupling(q, p, &r.coupling.pi.view(), MapKind::Barycentric)
}

/// Batched barycentric projection.
///
/// `Q` is split into consecutive batches of size `batch_size`; each batch is
/// matched against an equally sized batch drawn from `P` without replacement
/// within a seeded shuffle epoch (reshuffling when `P` runs out), the batch
/// coupling is solved, and the row-normalized projection applied. Rows come
/// back in `Q`'s original order. The label matrix is computed once from the
/// full datasets and shared across batches.
pub fn batched_barycentric_map<S: Scalar>(
    q: &LabeledDataset<S>,
    p: &LabeledDataset<S>,
    batch_size: usize,
    seed: u64,
    cfg: &OtddConfig<S>,
) -> Result<DatasetMap<S>> {
    if batch_size < 2 {
        return Err(Error::OutOfRange {
            name: "batch_size",
            value: batch_size as f64,
            lo: 2.0,
            hi: f64::INFINITY,
        });
    }
    let m_full = label_distance_matrix(q, p, &cfg.label)?;
    let n_q = q.len();
    let n_p = p.len();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut epoch: Vec<usize> = Vec::new();
    let mut draw = |len: usize, rng: &mut ChaCha8Rng| -> Vec<usize> {
        let mut batch = Vec::with_capacity(len);
        while batch.len() < len {
            if epoch.is_empty() {
                let mut idx: Vec<usize> = (0..n_p).collect();
                idx.shuffle(rng);
                epoch = idx;
            }
            let take = (len - batch.len()).min(epoch.len());
            batch.extend(epoch.drain(..take));
        }
        batch
    };

    let mut mapped_features = Array2::<S>::zeros((n_q, p.dim()));
    let mut mapped_labels = Array2::<S>::zeros((n_q, p.num_classes()));
    let mut start = 0usize;
    while start < n_q {
        let end = (start + batch_size).min(n_q);
        let q_rows: Vec<usize> = (start..end).collect();
        let p_rows = draw(q_rows.len(), &mut rng);
        let q_batch = q.select_rows(&q_rows, format!("{}[batch]", q.id()))?;
        let p_batch = p.select_rows(&p_rows, format!("{}[batch]", p.id()))?;
        let r = otdd_with_label_matrix(&q_batch, &p_batch, m_full.clone(), cfg)?;
        let weights = normalize_rows(&r.coupling.pi.view())?;
        let feats = weights.dot(&p_batch.features());
        let labs = weights.dot(&p_batch.labels());
        for (local, global) in q_rows.iter().enumerate() {
            mapped_features.row_mut(*global).assign(&feats.row(local));
            mapped_labels.row_mut(*global).assign(&labs.row(local));
        }
        start = end;
    }
    DatasetMap::new(
        q.id(),
        p.id(),
        mapped_features,
        mapped_labels,
        MapKind::BatchedBarycentric,
    )
}

/// Hard-label each query point by majority vote among its `k` nearest
/// few-shot samples (Euclidean). Distance ties prefer the earlier sample;
/// vote ties prefer the lower class index. The output is hard-labeled over
/// the few-shot label space.
pub fn knn_pseudolabel<S: Scalar>(
    unlabeled: &ArrayView2<S>,
    few_shot: &LabeledDataset<S>,
    k: usize,
) -> Result<LabeledDataset<S>> {
    let ids = few_shot.hard_class_ids()?;
    if k == 0 || k > few_shot.len() {
        return Err(Error::KTooLarge {
            k,
            n: few_shot.len(),
        });
    }
    if unlabeled.ncols() != few_shot.dim() {
        return Err(Error::DimensionMismatch(format!(
            "{} vs {}",
            unlabeled.ncols(),
            few_shot.dim()
        )));
    }
    let c = few_shot.num_classes();
    let mut out_ids = Vec::with_capacity(unlabeled.nrows());
    let mut dists: Vec<(S, usize)> = Vec::with_capacity(few_shot.len());
    for query in unlabeled.axis_iter(Axis(0)) {
        dists.clear();
        for (i, row) in few_shot.features().axis_iter(Axis(0)).enumerate() {
            dists.push((sq_dist(&query, &row), i));
        }
        dists.sort_by(|a, b| {
            a.0.partial_cmp(&b.0)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(a.1.cmp(&b.1))
        });
        let mut votes = vec![0usize; c];
        for &(_, idx) in dists.iter().take(k) {
            votes[ids[idx]] += 1;
        }
        let best = votes
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(&a.0)))
            .map(|(cls, _)| cls)
            .unwrap();
        out_ids.push(best);
    }
    LabeledDataset::from_hard_labels(
        format!("pseudo({})", few_shot.id()),
        unlabeled.to_owned(),
        &out_ids,
        c,
        Some(few_shot.class_names().to_vec()),
    )
}
