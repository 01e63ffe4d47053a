//! The transport distance between labeled datasets.
//!
//! The ground cost between a sample of `Q` and a sample of `P` is the squared
//! feature distance plus the squared W2 distance between the class
//! conditionals their labels point at; the dataset distance is the optimal
//! transport cost under uniform sample weights.

use ndarray::Array2;

use crate::data::LabeledDataset;
use crate::error::{Error, Result};
use crate::labels::{label_distance_matrix, LabelDistanceConfig, LabelDistanceMatrix};
use crate::linalg::pairwise_sq_dists;
use crate::ot::{uniform_weights, CostMatrix, Coupling, OtSolver};
use crate::scalar::Scalar;

/// Configuration for dataset-distance computations.
#[derive(Debug, Clone, PartialEq)]
pub struct OtddConfig<S: Scalar> {
    pub solver: OtSolver<S>,
    pub label: LabelDistanceConfig,
}

impl<S: Scalar> OtddConfig<S> {
    /// Exact outer solver and exact label geometry: the oracle configuration.
    pub fn exact() -> Self {
        Self {
            solver: OtSolver::exact(),
            label: LabelDistanceConfig::exact(),
        }
    }

    /// Sinkhorn outer solver with auto epsilon and Gaussian label geometry:
    /// the scalable configuration.
    pub fn sinkhorn() -> Self {
        Self {
            solver: OtSolver::sinkhorn(),
            label: LabelDistanceConfig::gaussian(),
        }
    }
}

/// Result bundle: plan, squared distance, the label matrix used, and the
/// configuration snapshot it was computed under.
#[derive(Debug, Clone)]
pub struct OtddResult<S: Scalar> {
    pub coupling: Coupling<S>,
    pub distance_squared: S,
    pub label_matrix: LabelDistanceMatrix<S>,
    pub config: OtddConfig<S>,
}

/// Assemble the dataset-distance ground cost: entry `(i, j)` is
/// `|x_Q_i - x_P_j|^2 + y_Q_i^T M y_P_j`. For hard labels the bilinear term
/// is exactly the matrix entry of the two classes.
pub fn otdd_cost_matrix<S: Scalar>(
    q: &LabeledDataset<S>,
    p: &LabeledDataset<S>,
    m: &LabelDistanceMatrix<S>,
) -> Result<CostMatrix<S>> {
    if q.dim() != p.dim() {
        return Err(Error::DimensionMismatch(format!(
            "{} vs {}",
            q.dim(),
            p.dim()
        )));
    }
    if m.nrows() != q.num_classes() || m.ncols() != p.num_classes() {
        return Err(Error::ShapeMismatch(format!(
            "label matrix {}x{} vs classes ({}, {})",
            m.nrows(),
            m.ncols(),
            q.num_classes(),
            p.num_classes()
        )));
    }
    let mut cost = pairwise_sq_dists(&q.features(), &p.features());
    // label term via Y_Q M Y_P^T; exact on one-hot rows
    let label_cost: Array2<S> = q.labels().dot(&m.matrix()).dot(&p.labels().t());
    cost.zip_mut_with(&label_cost, |c, &l| *c = *c + l);
    CostMatrix::new(cost)
}

/// Dataset distance with the label matrix computed internally from class
/// conditionals; both datasets must be hard-labeled.
pub fn otdd<S: Scalar>(
    q: &LabeledDataset<S>,
    p: &LabeledDataset<S>,
    cfg: &OtddConfig<S>,
) -> Result<OtddResult<S>> {
    if q.dim() != p.dim() {
        return Err(Error::DimensionMismatch(format!(
            "{} vs {}",
            q.dim(),
            p.dim()
        )));
    }
    let m = label_distance_matrix(q, p, &cfg.label)?;
    otdd_with_label_matrix(q, p, m, cfg)
}

/// Dataset distance with a caller-provided label matrix. This is the entry
/// point for soft-labeled `Q` (e.g. pushforward datasets) and for batched
/// computations that reuse one matrix across many sub-problems.
pub fn otdd_with_label_matrix<S: Scalar>(
    q: &LabeledDataset<S>,
    p: &LabeledDataset<S>,
    m: LabelDistanceMatrix<S>,
    cfg: &OtddConfig<S>,
) -> Result<OtddResult<S>> {
    let cost = otdd_cost_matrix(q, p, &m)?;
    let mu = uniform_weights(q.len());
    let nu = uniform_weights(p.len());
    // Snapshot the configuration with any auto epsilon resolved against this
    // cost matrix, so the result records the regularization actually used.
    let mut snapshot = cfg.clone();
    if let OtSolver::Sinkhorn(params) = &mut snapshot.solver {
        if params.epsilon.is_none() {
            params.epsilon = Some(crate::ot::auto_epsilon(&cost));
        }
    }
    let (coupling, distance_squared) = snapshot.solver.solve(&cost, &mu.view(), &nu.view())?;
    Ok(OtddResult {
        coupling,
        distance_squared,
        label_matrix: m,
        config: snapshot,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::{gaussian_mixture, grid_mixture_params, shifted_copy};
    use crate::labels::LabelDistanceMatrix;
    use approx::assert_abs_diff_eq;
    use ndarray::{array, Array1, Array2};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn line_dataset(id: &str, points: &[f64], classes: &[usize], c: usize) -> LabeledDataset<f64> {
        let features =
            Array2::from_shape_vec((points.len(), 1), points.to_vec()).unwrap();
        LabeledDataset::from_hard_labels(id, features, classes, c, None).unwrap()
    }

    #[test]
    fn cost_matrix_adds_feature_and_label_terms() {
        // x=0 vs x'=1 with label entry 4 gives 1 + 4 = 5
        let q = line_dataset("q", &[0.0], &[0], 1);
        let p = line_dataset("p", &[1.0], &[0], 1);
        let m = LabelDistanceMatrix::new(array![[4.0]], crate::labels::LabelMethod::Exact)
            .unwrap();
        let cost = otdd_cost_matrix(&q, &p, &m).unwrap();
        assert_abs_diff_eq!(cost.matrix()[[0, 0]], 5.0);
    }

    #[test]
    fn zero_label_matrix_reduces_to_feature_cost() {
        let q = line_dataset("q", &[0.0, 1.0], &[0, 1], 2);
        let p = line_dataset("p", &[2.0], &[0], 1);
        let m = LabelDistanceMatrix::<f64>::zeros(2, 1);
        let cost = otdd_cost_matrix(&q, &p, &m).unwrap();
        assert_abs_diff_eq!(cost.matrix()[[0, 0]], 4.0);
        assert_abs_diff_eq!(cost.matrix()[[1, 0]], 1.0);
    }

    #[test]
    fn same_point_same_conditional_costs_zero() {
        let q = line_dataset("q", &[0.0, 2.0], &[0, 1], 2);
        let m = label_distance_matrix(&q, &q, &LabelDistanceConfig::exact()).unwrap();
        let cost = otdd_cost_matrix(&q, &q, &m).unwrap();
        assert_abs_diff_eq!(cost.matrix()[[0, 0]], 0.0);
        assert_abs_diff_eq!(cost.matrix()[[1, 1]], 0.0);
    }

    #[test]
    fn cost_matrix_rejects_dimension_mismatch() {
        let q = line_dataset("q", &[0.0], &[0], 1);
        let p = LabeledDataset::from_hard_labels(
            "p",
            array![[0.0, 1.0]],
            &[0],
            1,
            None,
        )
        .unwrap();
        let m = LabelDistanceMatrix::<f64>::zeros(1, 1);
        assert!(matches!(
            otdd_cost_matrix(&q, &p, &m),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn self_distance_is_zero_with_exact_solver() {
        let (means, covs) = grid_mixture_params(2, 2, 2.0, 0.2);
        let ds = gaussian_mixture(6, &means, &covs, 5).unwrap();
        let r = otdd(&ds, &ds, &OtddConfig::<f64>::exact()).unwrap();
        assert!(r.distance_squared.abs() <= 1e-9);
    }

    #[test]
    fn identical_features_different_class_names_are_indistinguishable() {
        // one class each, same feature set: the label term vanishes because
        // the class conditionals coincide, and the feature OT is zero.
        let a = line_dataset("a", &[0.0, 1.0, 2.0], &[0, 0, 0], 1);
        let mut b = line_dataset("b", &[0.0, 1.0, 2.0], &[0, 0, 0], 1);
        b = LabeledDataset::new(
            "b",
            b.features().to_owned(),
            b.labels().to_owned(),
            vec!["totally-different-name".into()],
        )
        .unwrap();
        let r = otdd(&a, &b, &OtddConfig::exact()).unwrap();
        assert_abs_diff_eq!(r.distance_squared, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn relabeling_leaves_distance_unchanged() {
        let (means, covs) = grid_mixture_params(1, 3, 3.0, 0.3);
        let p = gaussian_mixture(5, &means, &covs, 21).unwrap();
        let q = gaussian_mixture(5, &means, &covs, 22).unwrap();
        let cfg = OtddConfig::exact();
        let base = otdd(&q, &p, &cfg).unwrap().distance_squared;
        let relabeled = shifted_copy(&p, &Array1::zeros(2).view(), Some(&[2, 0, 1])).unwrap();
        let permuted = otdd(&q, &relabeled, &cfg).unwrap().distance_squared;
        assert_abs_diff_eq!(base, permuted, epsilon = 1e-12);
    }

    #[test]
    fn zeroing_the_label_matrix_never_increases_distance() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for trial in 0..5 {
            let features_q =
                Array2::from_shape_fn((8, 2), |_| rng.random::<f64>() * 4.0);
            let features_p =
                Array2::from_shape_fn((8, 2), |_| rng.random::<f64>() * 4.0 + 1.0);
            let ids: Vec<usize> = (0..8).map(|i| i % 2).collect();
            let q = LabeledDataset::from_hard_labels(
                format!("q{trial}"),
                features_q,
                &ids,
                2,
                None,
            )
            .unwrap();
            let p = LabeledDataset::from_hard_labels(
                format!("p{trial}"),
                features_p,
                &ids,
                2,
                None,
            )
            .unwrap();
            let cfg = OtddConfig::exact();
            let with_labels = otdd(&q, &p, &cfg).unwrap().distance_squared;
            let zeroed = otdd_with_label_matrix(
                &q,
                &p,
                LabelDistanceMatrix::zeros(2, 2),
                &cfg,
            )
            .unwrap()
            .distance_squared;
            assert!(zeroed <= with_labels + 1e-12);
        }
    }

    #[test]
    fn symmetry_and_triangle_inequality_hold_with_exact_solver() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let cfg = OtddConfig::exact();
        for trial in 0..10 {
            let mk = |name: String, rng: &mut ChaCha8Rng| {
                let feats = Array2::from_shape_fn((10, 2), |_| rng.random::<f64>() * 3.0);
                let ids: Vec<usize> = (0..10).map(|_| rng.random_range(0..2)).collect();
                // ensure both classes appear
                let mut ids = ids;
                ids[0] = 0;
                ids[1] = 1;
                LabeledDataset::from_hard_labels(name, feats, &ids, 2, None).unwrap()
            };
            let a = mk(format!("a{trial}"), &mut rng);
            let b = mk(format!("b{trial}"), &mut rng);
            let c = mk(format!("c{trial}"), &mut rng);
            let dab = otdd(&a, &b, &cfg).unwrap().distance_squared;
            let dba = otdd(&b, &a, &cfg).unwrap().distance_squared;
            assert_abs_diff_eq!(dab, dba, epsilon = 1e-9);
            let dac = otdd(&a, &c, &cfg).unwrap().distance_squared;
            let dbc = otdd(&b, &c, &cfg).unwrap().distance_squared;
            assert!(dac.sqrt() <= dab.sqrt() + dbc.sqrt() + 1e-7);
            assert!(dab >= 0.0);
        }
    }
}
