//! Generator spec files for `otds gen`: a line-oriented key=value format
//! describing a Gaussian mixture.
//!
//! ```text
//! # 16-component checkerboard, 100 points per component
//! seed = 7
//! n_per_class = 100
//! grid = 4 4
//! grid_spacing = 1.0
//! grid_std = 0.15
//!
//! # explicit components may be given instead of (or besides) a grid
//! component = mean 0 0 cov iso 0.5
//! component = mean 3 0 cov diag 1 2
//! component = mean 0 3 cov full 1 0.2 0.2 1
//! ```
//!
//! `cov iso s` is the isotropic covariance `s^2 I`, `cov diag v..` a diagonal
//! of variances, `cov full ..` the row-major d x d matrix.

use std::fs;
use std::path::Path;

use ndarray::{Array1, Array2};
use otds::datagen::{gaussian_mixture, grid_mixture_params};
use otds::LabeledDataset;

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone)]
pub struct GenSpec {
    pub seed: u64,
    pub n_per_class: usize,
    pub means: Vec<Array1<f64>>,
    pub covs: Vec<Array2<f64>>,
}

impl GenSpec {
    pub fn from_file(path: &Path) -> CliResult<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> CliResult<Self> {
        let mut seed = 0u64;
        let mut n_per_class = 100usize;
        let mut means: Vec<Array1<f64>> = Vec::new();
        let mut covs: Vec<Array2<f64>> = Vec::new();
        let mut grid: Option<(usize, usize, usize)> = None; // rows, cols, line
        let mut grid_spacing = 1.0f64;
        let mut grid_std = 0.1f64;

        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let stripped = raw.split('#').next().unwrap_or("").trim();
            if stripped.is_empty() {
                continue;
            }
            let (key, value) = stripped
                .split_once('=')
                .ok_or_else(|| CliError::bad_spec(line, "expected key = value"))?;
            let value = value.trim();
            match key.trim() {
                "seed" => {
                    seed = value
                        .parse()
                        .map_err(|_| CliError::bad_spec(line, format!("bad seed `{value}`")))?;
                }
                "n_per_class" => {
                    n_per_class = value.parse().map_err(|_| {
                        CliError::bad_spec(line, format!("bad n_per_class `{value}`"))
                    })?;
                    if n_per_class == 0 {
                        return Err(CliError::bad_spec(line, "n_per_class must be >= 1"));
                    }
                }
                "grid" => {
                    let dims: Vec<usize> = value
                        .split_whitespace()
                        .map(|t| t.parse::<usize>())
                        .collect::<Result<_, _>>()
                        .map_err(|_| CliError::bad_spec(line, format!("bad grid `{value}`")))?;
                    if dims.len() != 2 || dims[0] == 0 || dims[1] == 0 {
                        return Err(CliError::bad_spec(line, "grid wants `rows cols`"));
                    }
                    grid = Some((dims[0], dims[1], line));
                }
                "grid_spacing" => {
                    grid_spacing = value.parse().map_err(|_| {
                        CliError::bad_spec(line, format!("bad grid_spacing `{value}`"))
                    })?;
                }
                "grid_std" => {
                    grid_std = value.parse().map_err(|_| {
                        CliError::bad_spec(line, format!("bad grid_std `{value}`"))
                    })?;
                }
                "component" => {
                    let (mean, cov) = parse_component(value, line)?;
                    means.push(mean);
                    covs.push(cov);
                }
                other => {
                    return Err(CliError::bad_spec(line, format!("unknown key `{other}`")));
                }
            }
        }
        if let Some((rows, cols, line)) = grid {
            let (gm, gc) = grid_mixture_params::<f64>(rows, cols, grid_spacing, grid_std);
            if let Some(first) = means.first() {
                if first.len() != 2 {
                    return Err(CliError::bad_spec(
                        line,
                        "grid components are 2-D but explicit components are not",
                    ));
                }
            }
            means.extend(gm);
            covs.extend(gc);
        }
        if means.is_empty() {
            return Err(CliError::Validation(
                "spec defines no components (add `component = ...` or `grid = rows cols`)".into(),
            ));
        }
        let d = means[0].len();
        if means.iter().any(|m| m.len() != d) {
            return Err(CliError::Validation(
                "all components must share one dimension".into(),
            ));
        }
        Ok(Self {
            seed,
            n_per_class,
            means,
            covs,
        })
    }

    pub fn generate(&self, seed_override: Option<u64>) -> CliResult<LabeledDataset<f64>> {
        let seed = seed_override.unwrap_or(self.seed);
        gaussian_mixture(self.n_per_class, &self.means, &self.covs, seed).map_err(CliError::from)
    }
}

fn parse_component(value: &str, line: usize) -> CliResult<(Array1<f64>, Array2<f64>)> {
    let tokens: Vec<&str> = value.split_whitespace().collect();
    if tokens.first() != Some(&"mean") {
        return Err(CliError::bad_spec(line, "component must start with `mean`"));
    }
    let cov_pos = tokens
        .iter()
        .position(|&t| t == "cov")
        .ok_or_else(|| CliError::bad_spec(line, "component needs a `cov` section"))?;
    let mean: Vec<f64> = tokens[1..cov_pos]
        .iter()
        .map(|t| t.parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| CliError::bad_spec(line, "bad mean entries"))?;
    if mean.is_empty() {
        return Err(CliError::bad_spec(line, "mean needs at least one entry"));
    }
    let d = mean.len();
    let kind = tokens
        .get(cov_pos + 1)
        .ok_or_else(|| CliError::bad_spec(line, "cov needs a kind (iso|diag|full)"))?;
    let vals: Vec<f64> = tokens[cov_pos + 2..]
        .iter()
        .map(|t| t.parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| CliError::bad_spec(line, "bad covariance entries"))?;
    let cov = match *kind {
        "iso" => {
            if vals.len() != 1 {
                return Err(CliError::bad_spec(line, "cov iso wants one std value"));
            }
            Array2::eye(d) * (vals[0] * vals[0])
        }
        "diag" => {
            if vals.len() != d {
                return Err(CliError::bad_spec(
                    line,
                    format!("cov diag wants {d} variances"),
                ));
            }
            Array2::from_diag(&Array1::from_vec(vals))
        }
        "full" => {
            if vals.len() != d * d {
                return Err(CliError::bad_spec(
                    line,
                    format!("cov full wants {} entries", d * d),
                ));
            }
            Array2::from_shape_vec((d, d), vals)
                .map_err(|e| CliError::bad_spec(line, e.to_string()))?
        }
        other => {
            return Err(CliError::bad_spec(
                line,
                format!("unknown cov kind `{other}`"),
            ));
        }
    };
    Ok((Array1::from_vec(mean), cov))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_spec_yields_sixteen_components() {
        let spec = GenSpec::parse("seed = 7\nn_per_class = 10\ngrid = 4 4\ngrid_std = 0.2\n")
            .unwrap();
        assert_eq!(spec.means.len(), 16);
        let ds = spec.generate(None).unwrap();
        assert_eq!(ds.num_classes(), 16);
        assert_eq!(ds.len(), 160);
    }

    #[test]
    fn explicit_components_parse_all_cov_kinds() {
        let spec = GenSpec::parse(
            "component = mean 0 0 cov iso 0.5\ncomponent = mean 1 1 cov diag 1 2\ncomponent = mean 2 2 cov full 1 0.1 0.1 1\n",
        )
        .unwrap();
        assert_eq!(spec.means.len(), 3);
        assert_eq!(spec.covs[0][[0, 0]], 0.25);
        assert_eq!(spec.covs[1][[1, 1]], 2.0);
        assert_eq!(spec.covs[2][[0, 1]], 0.1);
    }

    #[test]
    fn malformed_spec_reports_line_number() {
        let err = GenSpec::parse("seed = 1\ncomponent = nope\n").unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
        let err = GenSpec::parse("what = 3\n").unwrap_err();
        assert!(err.to_string().contains("line 1"), "{err}");
    }

    #[test]
    fn same_seed_generates_identical_datasets() {
        let spec = GenSpec::parse("seed = 3\nn_per_class = 20\ngrid = 2 2\n").unwrap();
        let a = spec.generate(None).unwrap();
        let b = spec.generate(None).unwrap();
        assert_eq!(a, b);
    }
}
