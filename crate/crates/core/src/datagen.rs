//! Seeded synthetic labeled-dataset generators for tests and demos.
//!
//! Everything here is a pure function of its parameters and seed, so fixtures
//! are reproducible bit-for-bit across runs.

use ndarray::{Array1, Array2, ArrayView1, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::data::LabeledDataset;
use crate::error::{Error, Result};
use crate::linalg::sqrt_psd;
use crate::scalar::Scalar;

/// Sample a Gaussian mixture with one class per component.
///
/// `means` and `covs` must have equal length C >= 1; the output contains
/// `n_per_class` samples per component in component order, labeled by the
/// component index. Sampling draws standard normal vectors and maps them
/// through the covariance square root, so singular (even zero) covariances
/// are fine.
pub fn gaussian_mixture<S: Scalar>(
    n_per_class: usize,
    means: &[Array1<S>],
    covs: &[Array2<S>],
    seed: u64,
) -> Result<LabeledDataset<S>> {
    if means.is_empty() || means.len() != covs.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} means vs {} covariances",
            means.len(),
            covs.len()
        )));
    }
    if n_per_class == 0 {
        return Err(Error::OutOfRange {
            name: "n_per_class",
            value: 0.0,
            lo: 1.0,
            hi: f64::INFINITY,
        });
    }
    let d = means[0].len();
    let c = means.len();
    for (i, (m, cv)) in means.iter().zip(covs.iter()).enumerate() {
        if m.len() != d || cv.nrows() != d || cv.ncols() != d {
            return Err(Error::ShapeMismatch(format!("component {i} shape")));
        }
    }
    let roots: Vec<Array2<S>> = covs
        .iter()
        .map(|cv| sqrt_psd(&cv.view(), S::tol(1e-6)))
        .collect::<Result<_>>()?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = c * n_per_class;
    let mut features = Array2::<S>::zeros((n, d));
    let mut ids = Vec::with_capacity(n);
    let mut z = Array1::<S>::zeros(d);
    for (comp, (mean, root)) in means.iter().zip(roots.iter()).enumerate() {
        for s in 0..n_per_class {
            let row = comp * n_per_class + s;
            for zi in z.iter_mut() {
                let g: f64 = StandardNormal.sample(&mut rng);
                *zi = S::from_f64_c(g);
            }
            for a in 0..d {
                let mut acc = mean[a];
                for b in 0..d {
                    acc = acc + root[[a, b]] * z[b];
                }
                features[[row, a]] = acc;
            }
            ids.push(comp);
        }
    }
    LabeledDataset::from_hard_labels(format!("gmm(seed={seed})"), features, &ids, c, None)
}

/// Translate all features by `offset`, optionally permuting class identities.
///
/// `relabel`, when given, must be a permutation of `0..C`; class `c` becomes
/// class `relabel[c]` (names move along). Useful for building instances whose
/// optimal maps are known translations and for permutation-invariance checks.
pub fn shifted_copy<S: Scalar>(
    ds: &LabeledDataset<S>,
    offset: &ArrayView1<S>,
    relabel: Option<&[usize]>,
) -> Result<LabeledDataset<S>> {
    if offset.len() != ds.dim() {
        return Err(Error::DimensionMismatch(format!(
            "offset has {} entries for {}-dim features",
            offset.len(),
            ds.dim()
        )));
    }
    let mut features = ds.features().to_owned();
    for mut row in features.axis_iter_mut(Axis(0)) {
        for (v, o) in row.iter_mut().zip(offset.iter()) {
            *v = *v + *o;
        }
    }
    let c = ds.num_classes();
    let (labels, names) = match relabel {
        None => (ds.labels().to_owned(), ds.class_names().to_vec()),
        Some(perm) => {
            assert_eq!(perm.len(), c, "relabel permutation length");
            let mut seen = vec![false; c];
            for &p in perm {
                assert!(p < c && !seen[p], "relabel must be a permutation of 0..C");
                seen[p] = true;
            }
            let mut labels = Array2::<S>::zeros((ds.len(), c));
            for (row, lab) in ds.labels().axis_iter(Axis(0)).enumerate() {
                for (cls, &v) in lab.iter().enumerate() {
                    labels[[row, perm[cls]]] = v;
                }
            }
            let mut names = vec![String::new(); c];
            for (cls, name) in ds.class_names().iter().enumerate() {
                names[perm[cls]] = name.clone();
            }
            (labels, names)
        }
    };
    LabeledDataset::new(format!("{}+shift", ds.id()), features, labels, names)
}

/// Means on a `rows x cols` grid with spacing `spacing`, isotropic variance
/// `std^2`: the checkerboard-style mixture layout used in demos.
pub fn grid_mixture_params<S: Scalar>(
    rows: usize,
    cols: usize,
    spacing: S,
    std: S,
) -> (Vec<Array1<S>>, Vec<Array2<S>>) {
    let mut means = Vec::with_capacity(rows * cols);
    let mut covs = Vec::with_capacity(rows * cols);
    let var = std * std;
    for r in 0..rows {
        for c in 0..cols {
            means.push(Array1::from_vec(vec![
                S::from_f64_c(c as f64) * spacing,
                S::from_f64_c(r as f64) * spacing,
            ]));
            let mut cov = Array2::<S>::zeros((2, 2));
            cov[[0, 0]] = var;
            cov[[1, 1]] = var;
            covs.push(cov);
        }
    }
    (means, covs)
}

/// Convenience accessor used by invariance tests: features of one class.
pub fn class_rows<S: Scalar>(ds: &LabeledDataset<S>, class: usize) -> Result<Array2<S>> {
    let ids = ds.hard_class_ids()?;
    let rows: Vec<usize> = ids
        .iter()
        .enumerate()
        .filter_map(|(r, &c)| (c == class).then_some(r))
        .collect();
    if rows.is_empty() {
        return Err(Error::EmptyClass(class));
    }
    Ok(ds.features().select(Axis(0), &rows))
}
