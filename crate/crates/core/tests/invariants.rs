//! Cross-module laws: interpolation inequalities evaluated with the exact
//! solver, plus property tests over the carriers.

use ndarray::{Array1, Array2};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use otds::{
    combine, euclidean_generalized_geodesic_distance, identity_map, mccann_dataset,
    monotone_map_1d, pad_label, simplex_grid, w2_squared_empirical, LabeledDataset, OtSolver,
    OtddConfig, PaddedLabelSpace, SimplexWeights,
};

fn column(points: &[f64]) -> Array2<f64> {
    Array2::from_shape_vec((points.len(), 1), points.to_vec()).unwrap()
}

/// The squared transport distance to the base never exceeds the weighted
/// average of the endpoints' distances along the blended-map curve
/// (1D instances, monotone maps, exact evaluator).
#[test]
fn blended_map_distance_is_convexly_dominated() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let n = 12;
    for _ in 0..10 {
        let nu: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * 10.0).collect();
        let mu1: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * 10.0 - 5.0).collect();
        let mu2: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * 10.0 + 3.0).collect();
        let t1 = monotone_map_1d(&nu, &mu1).unwrap();
        let t2 = monotone_map_1d(&nu, &mu2).unwrap();

        let nu_m = column(&nu);
        let solver = OtSolver::exact();
        let w1 = w2_squared_empirical(&nu_m.view(), &column(&mu1).view(), &solver).unwrap();
        let w2 = w2_squared_empirical(&nu_m.view(), &column(&mu2).view(), &solver).unwrap();

        for a in simplex_grid::<f64>(2, 10).unwrap() {
            let (a1, a2) = (a.as_slice()[0], a.as_slice()[1]);
            let blended: Vec<f64> = t1
                .iter()
                .zip(t2.iter())
                .map(|(&x, &y)| a1 * x + a2 * y)
                .collect();
            let lhs =
                w2_squared_empirical(&column(&blended).view(), &nu_m.view(), &solver).unwrap();
            let rhs = a1 * w1 + a2 * w2;
            assert!(
                lhs <= rhs + 1e-9,
                "blend at a=({a1},{a2}): {lhs} > {rhs}"
            );
        }
    }
}

/// Direct and expanded forms of the blended-map distance agree on random
/// 1D monotone instances.
#[test]
fn geodesic_distance_identity_on_random_instances() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..50 {
        let n = rng.random_range(3..20usize);
        let m = rng.random_range(2..4usize);
        let nu: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * 8.0).collect();
        let maps: Vec<Array2<f64>> = (0..m)
            .map(|_| {
                let mu: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * 8.0 - 4.0).collect();
                column(&monotone_map_1d(&nu, &mu).unwrap())
            })
            .collect();
        let mut raw: Vec<f64> = (0..m).map(|_| rng.random::<f64>()).collect();
        let total: f64 = raw.iter().sum();
        raw.iter_mut().for_each(|v| *v /= total);
        let a = SimplexWeights::new(raw).unwrap();
        let eval =
            euclidean_generalized_geodesic_distance(&column(&nu).view(), &maps, &a).unwrap();
        assert!(
            (eval.direct - eval.formula).abs() <= 1e-9,
            "direct {} vs formula {}",
            eval.direct,
            eval.formula
        );
    }
}

/// Blending the identity with a monotone map at weight (1-t, t) lands exactly
/// on the two-dataset interpolation path.
#[test]
fn mccann_path_matches_two_map_blend_on_random_data() {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    let n = 10;
    let feats: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * 5.0).collect();
    let ids: Vec<usize> = (0..n).map(|i| i % 2).collect();
    let q = LabeledDataset::from_hard_labels("q", column(&feats), &ids, 2, None).unwrap();
    let p_feats: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * 5.0 + 2.0).collect();
    let p = LabeledDataset::from_hard_labels("p", column(&p_feats), &ids, 2, None).unwrap();
    let map = otds::barycentric_map(&q, &p, &OtddConfig::exact()).unwrap();
    for t in [0.0, 0.3, 0.7, 1.0] {
        let mc = mccann_dataset(&q, &map, t).unwrap();
        let direct = combine(
            &[identity_map(&q), map.clone()],
            &SimplexWeights::new(vec![1.0 - t, t]).unwrap(),
            &PaddedLabelSpace::new(&[2, 2]).unwrap(),
        )
        .unwrap();
        assert_eq!(mc.features(), direct.features());
        assert_eq!(mc.labels(), direct.labels());
    }
}

proptest! {
    /// Padding embeds losslessly: the l1 mass is preserved and distinct
    /// (block, vector) inputs stay distinct.
    #[test]
    fn pad_label_preserves_l1_and_is_injective(
        counts in proptest::collection::vec(1usize..5, 2..5),
        picks in proptest::collection::vec(0.0f64..1.0, 8),
        block in 0usize..4,
    ) {
        let space = PaddedLabelSpace::new(&counts).unwrap();
        let block = block % counts.len();
        let c = counts[block];
        let mut y: Vec<f64> = picks.iter().take(c).cloned().collect();
        while y.len() < c {
            y.push(0.5);
        }
        let total: f64 = y.iter().sum();
        if total > 0.0 {
            y.iter_mut().for_each(|v| *v /= total);
        } else {
            y[0] = 1.0;
        }
        let arr = Array1::from_vec(y.clone());
        let padded = pad_label(&arr.view(), block, &space).unwrap();
        let sum: f64 = padded.iter().sum();
        let orig: f64 = y.iter().sum();
        prop_assert!((sum - orig).abs() <= 1e-12);
        // injectivity: the block is recoverable from the padded layout
        let off = space.offsets()[block];
        for (j, &v) in y.iter().enumerate() {
            prop_assert_eq!(padded[off + j], v);
        }
        for (j, &v) in padded.iter().enumerate() {
            if !(off..off + c).contains(&j) {
                prop_assert_eq!(v, 0.0);
            }
        }
    }

    /// Sinkhorn couplings meet their marginal contract on random instances.
    #[test]
    fn sinkhorn_couplings_meet_marginals(
        seed in 0u64..1000,
        n in 2usize..6,
        k in 2usize..6,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cost = otds::CostMatrix::new(
            Array2::from_shape_fn((n, k), |_| rng.random::<f64>() * 3.0),
        ).unwrap();
        let mu = otds::uniform_weights::<f64>(n);
        let nu = otds::uniform_weights::<f64>(k);
        let cfg = otds::SinkhornConfig { epsilon: 0.1, max_iters: 100_000, tolerance: 1e-6, log_domain: true };
        match otds::sinkhorn(&cost, &mu.view(), &nu.view(), &cfg) {
            Ok((coupling, value)) => {
                prop_assert!(coupling.marginal_residual() <= 1e-6);
                prop_assert!(value >= 0.0);
                coupling.validate(1e-6).unwrap();
            }
            Err(otds::Error::NoConvergence { residual, .. }) => {
                // honest failure: the reported residual really is above tol
                prop_assert!(residual > 1e-6);
            }
            Err(e) => return Err(TestCaseError::fail(format!("unexpected error: {e}"))),
        }
    }

    /// Exact transport equals the brute-force permutation minimum on square
    /// uniform instances.
    #[test]
    fn exact_ot_matches_brute_force(seed in 0u64..500, n in 2usize..6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let c = Array2::from_shape_fn((n, n), |_| rng.random::<f64>());
        let cost = otds::CostMatrix::new(c.clone()).unwrap();
        let w = otds::uniform_weights::<f64>(n);
        let (_, value) = otds::exact_ot(&cost, &w.view(), &w.view(), 4096).unwrap();

        let mut perm: Vec<usize> = (0..n).collect();
        let mut best = f64::INFINITY;
        loop {
            let cost_here: f64 =
                perm.iter().enumerate().map(|(i, &j)| c[[i, j]]).sum::<f64>() / n as f64;
            best = best.min(cost_here);
            if !next_permutation(&mut perm) {
                break;
            }
        }
        prop_assert!((value - best).abs() <= 1e-9 * best.max(1.0));
    }
}

/// Lexicographic next-permutation; returns false after the last one.
fn next_permutation(perm: &mut [usize]) -> bool {
    let n = perm.len();
    if n < 2 {
        return false;
    }
    let mut i = n - 1;
    while i > 0 && perm[i - 1] >= perm[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = n - 1;
    while perm[j] <= perm[i - 1] {
        j -= 1;
    }
    perm.swap(i - 1, j);
    perm[i..].reverse();
    true
}
