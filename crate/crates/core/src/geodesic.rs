//! Synthesis of interpolated datasets from realized maps: convex combinations
//! over a common source, two-dataset McCann interpolation, and coupling-based
//! displacement interpolation.

use ndarray::{Array2, ArrayView2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::{LabeledDataset, PaddedLabelSpace, SimplexWeights};
use crate::error::{Error, Result};
use crate::map::{identity_map, DatasetMap};
use crate::ot::Coupling;
use crate::scalar::Scalar;

/// Combine `m` maps sharing a source into one synthesized dataset.
///
/// Feature rows are the weighted average of the mapped features; label rows
/// place each map's mapped label in its own zero-padded block scaled by its
/// weight, so the result sums to 1 whenever the weights do. The output keeps
/// one row per source sample.
///
/// A weight vector with a single entry equal to 1 copies that map's rows
/// directly (exact vertex recovery, no padding-arithmetic roundoff).
pub fn combine<S: Scalar>(
    maps: &[DatasetMap<S>],
    a: &SimplexWeights<S>,
    space: &PaddedLabelSpace,
) -> Result<LabeledDataset<S>> {
    if maps.is_empty() {
        return Err(Error::ShapeMismatch("no maps to combine".into()));
    }
    if maps.len() != a.len() || maps.len() != space.num_datasets() {
        return Err(Error::ShapeMismatch(format!(
            "{} maps, {} weights, {} label blocks",
            maps.len(),
            a.len(),
            space.num_datasets()
        )));
    }
    let n = maps[0].len();
    let d = maps[0].mapped_features().ncols();
    let source = maps[0].source_id();
    for (j, map) in maps.iter().enumerate() {
        if map.source_id() != source || map.len() != n {
            return Err(Error::SourceMismatch(format!(
                "map {} is over `{}` ({} rows), expected `{}` ({} rows)",
                j,
                map.source_id(),
                map.len(),
                source,
                n
            )));
        }
        if map.mapped_features().ncols() != d {
            return Err(Error::ShapeMismatch(format!(
                "map {j} has {}-dim features, expected {d}",
                map.mapped_features().ncols()
            )));
        }
        if map.num_target_classes() != space.class_counts()[j] {
            return Err(Error::ShapeMismatch(format!(
                "map {j} has {} target classes, label space expects {}",
                map.num_target_classes(),
                space.class_counts()[j]
            )));
        }
    }

    let weights = a.as_slice();
    let total_c = space.total_dim();
    let mut features = Array2::<S>::zeros((n, d));
    let mut labels = Array2::<S>::zeros((n, total_c));

    if let Some(j) = weights.iter().position(|&w| w == S::one()) {
        // Degenerate vertex: copy rows, embed labels at the block offset.
        features.assign(&maps[j].mapped_features());
        let off = space.offsets()[j];
        let block = maps[j].mapped_labels();
        labels
            .slice_mut(ndarray::s![.., off..off + block.ncols()])
            .assign(&block);
    } else {
        for (j, map) in maps.iter().enumerate() {
            let w = weights[j];
            if w == S::zero() {
                continue;
            }
            features.zip_mut_with(&map.mapped_features(), |acc, &v| *acc = *acc + w * v);
            let off = space.offsets()[j];
            let block = map.mapped_labels();
            labels
                .slice_mut(ndarray::s![.., off..off + block.ncols()])
                .zip_mut_with(&block, |acc, &v| *acc = *acc + w * v);
        }
    }

    let class_names = maps
        .iter()
        .flat_map(|map| {
            let tid = map.target_id().to_string();
            (0..map.num_target_classes()).map(move |c| format!("{tid}#{c}"))
        })
        .collect();
    LabeledDataset::new(
        format!("geodesic({source})"),
        features,
        labels,
        class_names,
    )
}

/// Two-dataset McCann interpolation: features `(1-t) x + t T(x)`, labels in a
/// two-block padded space `[ (1-t) y_Q ; t y_P ]`. Implemented as the two-map
/// combine over the identity map and `map`, so it agrees with [`combine`]
/// bit-for-bit.
pub fn mccann_dataset<S: Scalar>(
    q: &LabeledDataset<S>,
    map: &DatasetMap<S>,
    t: S,
) -> Result<LabeledDataset<S>> {
    if map.source_id() != q.id() {
        return Err(Error::SourceMismatch(format!(
            "map over `{}`, dataset is `{}`",
            map.source_id(),
            q.id()
        )));
    }
    if !(t >= S::zero() && t <= S::one()) {
        return Err(Error::OutOfRange {
            name: "t",
            value: t.to_f64_c(),
            lo: 0.0,
            hi: 1.0,
        });
    }
    let maps = vec![identity_map(q), map.clone()];
    let space = PaddedLabelSpace::new(&[q.num_classes(), map.num_target_classes()])?;
    let a = SimplexWeights::new(vec![S::one() - t, t])?;
    combine(&maps, &a, &space)
}

/// Sample the displacement interpolation of a coupling at time `t`: draw index
/// pairs `(i, j)` with probability `pi_ij` and emit `(1-t) x_i + t x_j`.
pub fn displacement_interpolate<S: Scalar>(
    coupling: &Coupling<S>,
    x_src: &ArrayView2<S>,
    x_tgt: &ArrayView2<S>,
    t: S,
    n_samples: usize,
    seed: u64,
) -> Result<Array2<S>> {
    if !(t >= S::zero() && t <= S::one()) {
        return Err(Error::OutOfRange {
            name: "t",
            value: t.to_f64_c(),
            lo: 0.0,
            hi: 1.0,
        });
    }
    let (n, k) = coupling.pi.dim();
    if x_src.nrows() != n || x_tgt.nrows() != k {
        return Err(Error::ShapeMismatch(format!(
            "coupling {n}x{k} vs point sets ({}, {})",
            x_src.nrows(),
            x_tgt.nrows()
        )));
    }
    if x_src.ncols() != x_tgt.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "{} vs {}",
            x_src.ncols(),
            x_tgt.ncols()
        )));
    }
    // Cumulative mass over flattened cells, in f64 for stable inversion.
    let mut cum = Vec::with_capacity(n * k);
    let mut acc = 0.0f64;
    for v in coupling.pi.iter() {
        acc += v.to_f64_c().max(0.0);
        cum.push(acc);
    }
    if acc <= 0.0 {
        return Err(Error::DegenerateRow(0));
    }
    let d = x_src.ncols();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Array2::<S>::zeros((n_samples, d));
    let one_minus_t = S::one() - t;
    for mut row in out.axis_iter_mut(Axis(0)) {
        let u: f64 = rng.random::<f64>() * acc;
        let cell = cum.partition_point(|&c| c <= u).min(n * k - 1);
        let (i, j) = (cell / k, cell % k);
        for dim in 0..d {
            row[dim] = one_minus_t * x_src[[i, dim]] + t * x_tgt[[j, dim]];
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::map::{barycentric_map, MapKind};
    use crate::otdd::OtddConfig;
    use approx::assert_abs_diff_eq;
    use ndarray::{array, Array2};

    fn line_dataset(id: &str, points: &[f64], classes: &[usize], c: usize) -> LabeledDataset<f64> {
        let features = Array2::from_shape_vec((points.len(), 1), points.to_vec()).unwrap();
        LabeledDataset::from_hard_labels(id, features, classes, c, None).unwrap()
    }

    fn toy_map(src: &str, tgt: &str, feats: Array2<f64>, labels: Array2<f64>) -> DatasetMap<f64> {
        DatasetMap::new(src, tgt, feats, labels, MapKind::Barycentric).unwrap()
    }

    #[test]
    fn vertex_weight_recovers_single_map() {
        let m0 = toy_map("q", "p0", array![[2.0], [4.0]], array![[1.0], [1.0]]);
        let m1 = toy_map("q", "p1", array![[8.0], [6.0]], array![[0.0, 1.0], [1.0, 0.0]]);
        let space = PaddedLabelSpace::new(&[1, 2]).unwrap();
        let a = SimplexWeights::new(vec![0.0, 1.0]).unwrap();
        let out = combine(&[m0, m1.clone()], &a, &space).unwrap();
        assert_eq!(out.features(), m1.mapped_features());
        assert_eq!(out.labels().column(0).sum(), 0.0);
        assert_abs_diff_eq!(out.labels()[[0, 2]], 1.0);
        assert_abs_diff_eq!(out.labels()[[1, 1]], 1.0);
    }

    #[test]
    fn identical_maps_collapse_for_any_weight() {
        let feats = array![[1.0], [3.0]];
        let labels = array![[1.0], [1.0]];
        let m0 = toy_map("q", "p", feats.clone(), labels.clone());
        let m1 = toy_map("q", "p", feats.clone(), labels.clone());
        let space = PaddedLabelSpace::new(&[1, 1]).unwrap();
        for w in [0.25, 0.5, 0.9] {
            let a = SimplexWeights::new(vec![w, 1.0 - w]).unwrap();
            let out = combine(&[m0.clone(), m1.clone()], &a, &space).unwrap();
            for (o, f) in out.features().iter().zip(feats.iter()) {
                assert_abs_diff_eq!(o, f, epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn midpoint_blends_features_and_splits_labels() {
        // mapped features 2 and 4 for a row -> 3; labels split 0.5/0.5
        let m0 = toy_map("q", "p0", array![[2.0]], array![[1.0]]);
        let m1 = toy_map("q", "p1", array![[4.0]], array![[1.0]]);
        let space = PaddedLabelSpace::new(&[1, 1]).unwrap();
        let a = SimplexWeights::new(vec![0.5, 0.5]).unwrap();
        let out = combine(&[m0, m1], &a, &space).unwrap();
        assert_abs_diff_eq!(out.features()[[0, 0]], 3.0);
        assert_abs_diff_eq!(out.labels()[[0, 0]], 0.5);
        assert_abs_diff_eq!(out.labels()[[0, 1]], 0.5);
    }

    #[test]
    fn block_sums_equal_weights() {
        let m0 = toy_map("q", "p0", array![[0.0]], array![[0.7, 0.3]]);
        let m1 = toy_map("q", "p1", array![[1.0]], array![[0.2, 0.5, 0.3]]);
        let space = PaddedLabelSpace::new(&[2, 3]).unwrap();
        let a = SimplexWeights::new(vec![0.3, 0.7]).unwrap();
        let out = combine(&[m0, m1], &a, &space).unwrap();
        let row = out.labels();
        let block0: f64 = (0..2).map(|c| row[[0, c]]).sum();
        let block1: f64 = (2..5).map(|c| row[[0, c]]).sum();
        assert_abs_diff_eq!(block0, 0.3, epsilon = 1e-12);
        assert_abs_diff_eq!(block1, 0.7, epsilon = 1e-12);
        assert_abs_diff_eq!(block0 + block1, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn combine_is_affine_in_the_weights() {
        let m0 = toy_map("q", "p0", array![[2.0], [0.0]], array![[1.0], [1.0]]);
        let m1 = toy_map("q", "p1", array![[4.0], [1.0]], array![[1.0], [1.0]]);
        let m2 = toy_map("q", "p2", array![[-1.0], [5.0]], array![[1.0], [1.0]]);
        let maps = [m0, m1, m2];
        let space = PaddedLabelSpace::new(&[1, 1, 1]).unwrap();
        let a = SimplexWeights::new(vec![0.6, 0.3, 0.1]).unwrap();
        let b = SimplexWeights::new(vec![0.1, 0.2, 0.7]).unwrap();
        let alpha = 0.37;
        let mix: Vec<f64> = a
            .as_slice()
            .iter()
            .zip(b.as_slice())
            .map(|(&x, &y)| alpha * x + (1.0 - alpha) * y)
            .collect();
        let mixed = combine(&maps, &SimplexWeights::new(mix).unwrap(), &space).unwrap();
        let at_a = combine(&maps, &a, &space).unwrap();
        let at_b = combine(&maps, &b, &space).unwrap();
        for ((m, fa), fb) in mixed
            .features()
            .iter()
            .zip(at_a.features().iter())
            .zip(at_b.features().iter())
        {
            assert_abs_diff_eq!(*m, alpha * fa + (1.0 - alpha) * fb, epsilon = 1e-12);
        }
        for ((m, la), lb) in mixed
            .labels()
            .iter()
            .zip(at_a.labels().iter())
            .zip(at_b.labels().iter())
        {
            assert_abs_diff_eq!(*m, alpha * la + (1.0 - alpha) * lb, epsilon = 1e-12);
        }
    }

    #[test]
    fn combine_rejects_source_mismatch() {
        let m0 = toy_map("q", "p0", array![[0.0]], array![[1.0]]);
        let m1 = toy_map("other", "p1", array![[0.0]], array![[1.0]]);
        let space = PaddedLabelSpace::new(&[1, 1]).unwrap();
        let a = SimplexWeights::new(vec![0.5, 0.5]).unwrap();
        assert!(matches!(
            combine(&[m0, m1], &a, &space),
            Err(Error::SourceMismatch(_))
        ));
    }

    #[test]
    fn mccann_endpoints_are_exact() {
        let q = line_dataset("q", &[0.0, 1.0], &[0, 0], 1);
        let p = line_dataset("p", &[2.0, 3.0], &[0, 0], 1);
        let map = barycentric_map(&q, &p, &OtddConfig::exact()).unwrap();

        let at0 = mccann_dataset(&q, &map, 0.0).unwrap();
        assert_eq!(at0.features(), q.features());
        assert_abs_diff_eq!(at0.labels().column(0).sum(), 2.0); // all mass in Q block
        assert_abs_diff_eq!(at0.labels().column(1).sum(), 0.0);

        let at1 = mccann_dataset(&q, &map, 1.0).unwrap();
        assert_eq!(at1.features(), map.mapped_features());
        assert_abs_diff_eq!(at1.labels().column(0).sum(), 0.0);

        // midpoint of the monotone pairs {0->2, 1->3} is {1, 2}
        let mid = mccann_dataset(&q, &map, 0.5).unwrap();
        assert_abs_diff_eq!(mid.features()[[0, 0]], 1.0);
        assert_abs_diff_eq!(mid.features()[[1, 0]], 2.0);
    }

    #[test]
    fn mccann_equals_two_map_combine() {
        let q = line_dataset("q", &[0.0, 1.0, 4.0], &[0, 1, 0], 2);
        let p = line_dataset("p", &[2.0, 3.0, 5.0], &[0, 0, 1], 2);
        let map = barycentric_map(&q, &p, &OtddConfig::exact()).unwrap();
        for t in [0.0, 0.25, 0.5, 0.8, 1.0] {
            let via_mccann = mccann_dataset(&q, &map, t).unwrap();
            let direct = combine(
                &[identity_map(&q), map.clone()],
                &SimplexWeights::new(vec![1.0 - t, t]).unwrap(),
                &PaddedLabelSpace::new(&[2, 2]).unwrap(),
            )
            .unwrap();
            assert_eq!(via_mccann.features(), direct.features());
            assert_eq!(via_mccann.labels(), direct.labels());
        }
    }

    #[test]
    fn mccann_rejects_out_of_range_t() {
        let q = line_dataset("q", &[0.0], &[0], 1);
        let map = identity_map(&q);
        assert!(matches!(
            mccann_dataset(&q, &map, 1.5),
            Err(Error::OutOfRange { name: "t", .. })
        ));
        assert!(matches!(
            mccann_dataset(&q, &map, -0.1),
            Err(Error::OutOfRange { name: "t", .. })
        ));
    }

    #[test]
    fn displacement_endpoints_resample_the_point_sets() {
        let x_src = array![[0.0], [1.0]];
        let x_tgt = array![[2.0], [3.0]];
        let pi = array![[0.5, 0.0], [0.0, 0.5]];
        let coupling = Coupling {
            pi,
            row_marginal: array![0.5, 0.5],
            col_marginal: array![0.5, 0.5],
        };
        let at0 =
            displacement_interpolate(&coupling, &x_src.view(), &x_tgt.view(), 0.0, 40, 3).unwrap();
        for &v in at0.iter() {
            assert!(v == 0.0 || v == 1.0);
        }
        let at1 =
            displacement_interpolate(&coupling, &x_src.view(), &x_tgt.view(), 1.0, 40, 3).unwrap();
        for &v in at1.iter() {
            assert!(v == 2.0 || v == 3.0);
        }
    }

    #[test]
    fn displacement_singleton_pair_interpolates_linearly() {
        let coupling = Coupling {
            pi: array![[1.0]],
            row_marginal: array![1.0],
            col_marginal: array![1.0],
        };
        let x_src = array![[0.0]];
        let x_tgt = array![[2.0]];
        let out =
            displacement_interpolate(&coupling, &x_src.view(), &x_tgt.view(), 0.25, 5, 0).unwrap();
        for &v in out.iter() {
            assert_abs_diff_eq!(v, 0.5);
        }
    }

    #[test]
    fn displacement_rejects_bad_t() {
        let coupling = Coupling {
            pi: array![[1.0]],
            row_marginal: array![1.0],
            col_marginal: array![1.0],
        };
        let x = array![[0.0]];
        assert!(displacement_interpolate(&coupling, &x.view(), &x.view(), 2.0, 1, 0).is_err());
    }
}
