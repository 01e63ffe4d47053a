//! Command implementations. Each returns a CLI error mapped onto the exit
//! code contract (0 ok, 2 validation, 3 solver, 4 i/o); JSON goes to stdout
//! with keys in sorted order.

use std::fs;
use std::path::{Path, PathBuf};

use serde_json::{json, Value};

use otds::{
    barycentric_map, batched_barycentric_map, build_projection_problem, combine, knn_pseudolabel,
    mccann_dataset, simplex_grid, solve_projection_weights, surrogate, DatasetMap,
    LabeledDataset, OtSolver, PaddedLabelSpace, SimplexWeights,
};

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::genspec::GenSpec;
use crate::io;
use crate::svg;

fn load(path: &Path, normalize: bool) -> CliResult<LabeledDataset<f64>> {
    let ds = io::load_dataset(path)?;
    Ok(if normalize { io::zscore(&ds) } else { ds })
}

fn build_maps(
    q: &LabeledDataset<f64>,
    sources: &[LabeledDataset<f64>],
    cfg: &RunConfig,
) -> CliResult<Vec<DatasetMap<f64>>> {
    let otdd_cfg = cfg.to_otdd_config();
    sources
        .iter()
        .map(|p| match cfg.batch_size {
            Some(b) => batched_barycentric_map(q, p, b, cfg.seed, &otdd_cfg),
            None => barycentric_map(q, p, &otdd_cfg),
        })
        .collect::<Result<_, _>>()
        .map_err(CliError::from)
}

fn label_space(maps: &[DatasetMap<f64>]) -> CliResult<PaddedLabelSpace> {
    let counts: Vec<usize> = maps.iter().map(|m| m.num_target_classes()).collect();
    PaddedLabelSpace::new(&counts).map_err(CliError::from)
}

pub fn cmd_gen(
    spec_path: &Path,
    out: &Path,
    seed_override: Option<u64>,
    svg_out: Option<&Path>,
) -> CliResult<()> {
    let spec = GenSpec::from_file(spec_path)?;
    let ds = spec.generate(seed_override)?;
    io::save_dataset(&ds, out)?;
    if let Some(p) = svg_out {
        svg::write_svg(&ds, p)?;
    }
    Ok(())
}

pub fn cmd_otdd(a: &Path, b: &Path, cfg: &RunConfig, normalize: bool) -> CliResult<()> {
    let q = load(a, normalize)?;
    let p = load(b, normalize)?;
    let result = otds::otdd(&q, &p, &cfg.to_otdd_config())?;
    let epsilon = match &result.config.solver {
        OtSolver::Sinkhorn(params) => params
            .epsilon
            .map(Value::from)
            .unwrap_or(Value::Null),
        OtSolver::Exact { .. } => Value::Null,
    };
    let out = json!({
        "distance_squared": result.distance_squared,
        "epsilon": epsilon,
        "solver": cfg.solver.as_str(),
    });
    println!("{out}");
    Ok(())
}

pub fn cmd_map(
    source: &Path,
    target: &Path,
    out: &Path,
    batched: Option<usize>,
    cfg: &RunConfig,
    normalize: bool,
    svg_out: Option<&Path>,
) -> CliResult<()> {
    let q = load(source, normalize)?;
    let p = load(target, normalize)?;
    let mut cfg = cfg.clone();
    if batched.is_some() {
        cfg.batch_size = batched;
    }
    let map = build_maps(&q, std::slice::from_ref(&p), &cfg)?.remove(0);
    let pushed = map
        .pushforward_dataset(p.class_names().to_vec())
        .map_err(CliError::from)?;
    io::save_dataset(&pushed, out)?;
    if let Some(path) = svg_out {
        svg::write_svg(&pushed, path)?;
    }
    Ok(())
}

pub enum InterpolateMode {
    Weights(Vec<f64>),
    Mccann(f64),
}

pub fn cmd_interpolate(
    target: &Path,
    sources: &[PathBuf],
    mode: InterpolateMode,
    out: &Path,
    cfg: &RunConfig,
    normalize: bool,
    svg_out: Option<&Path>,
) -> CliResult<()> {
    let q = load(target, normalize)?;
    let srcs: Vec<LabeledDataset<f64>> = sources
        .iter()
        .map(|p| load(p, normalize))
        .collect::<CliResult<_>>()?;
    if srcs.is_empty() {
        return Err(CliError::Validation("interpolate needs sources".into()));
    }
    let maps = build_maps(&q, &srcs, cfg)?;
    let ds = match mode {
        InterpolateMode::Weights(raw) => {
            if raw.len() != maps.len() {
                return Err(CliError::Validation(format!(
                    "{} weights for {} sources",
                    raw.len(),
                    maps.len()
                )));
            }
            let a = SimplexWeights::new(raw).map_err(|e| {
                CliError::Validation(format!("weights are not on the simplex: {e}"))
            })?;
            let space = label_space(&maps)?;
            combine(&maps, &a, &space)?
        }
        InterpolateMode::Mccann(t) => {
            if maps.len() != 1 {
                return Err(CliError::Validation(
                    "interpolation between two datasets wants exactly one source".into(),
                ));
            }
            mccann_dataset(&q, &maps[0], t)?
        }
    };
    io::save_dataset(&ds, out)?;
    if let Some(path) = svg_out {
        svg::write_svg(&ds, path)?;
    }
    Ok(())
}

pub fn cmd_project(
    target: &Path,
    sources: &[PathBuf],
    cfg: &RunConfig,
    normalize: bool,
    out_dataset: Option<&Path>,
) -> CliResult<()> {
    let q = load(target, normalize)?;
    let srcs: Vec<LabeledDataset<f64>> = sources
        .iter()
        .map(|p| load(p, normalize))
        .collect::<CliResult<_>>()?;
    if srcs.is_empty() {
        return Err(CliError::Validation("project needs sources".into()));
    }
    let maps = build_maps(&q, &srcs, cfg)?;
    let label_cfg = cfg.to_otdd_config().label;
    let prob = build_projection_problem(&q, &srcs, &maps, &label_cfg)?;
    let sol = solve_projection_weights(&prob)?;

    let pairwise: Vec<Vec<f64>> = (0..prob.len())
        .map(|i| (0..prob.len()).map(|j| prob.pairwise()[[i, j]]).collect())
        .collect();
    let out = json!({
        "a_hat": sol.a_hat.as_slice(),
        "objective": sol.objective,
        "pairwise": pairwise,
        "per_dataset_distances": prob.distances(),
    });
    println!("{out}");

    if let Some(path) = out_dataset {
        let space = label_space(&maps)?;
        let ds = combine(&maps, &sol.a_hat, &space)?;
        io::save_dataset(&ds, path)?;
    }
    Ok(())
}

pub fn cmd_grid(
    target: &Path,
    sources: &[PathBuf],
    resolution: usize,
    out: &Path,
    cfg: &RunConfig,
    normalize: bool,
) -> CliResult<()> {
    if sources.len() != 3 {
        return Err(CliError::Validation(format!(
            "grid sweeps a 3-source simplex; got {} sources",
            sources.len()
        )));
    }
    let q = load(target, normalize)?;
    let srcs: Vec<LabeledDataset<f64>> = sources
        .iter()
        .map(|p| load(p, normalize))
        .collect::<CliResult<_>>()?;
    let maps = build_maps(&q, &srcs, cfg)?;
    let label_cfg = cfg.to_otdd_config().label;
    let prob = build_projection_problem(&q, &srcs, &maps, &label_cfg)?;

    let mut text = String::from("a1,a2,a3,surrogate\n");
    for a in simplex_grid::<f64>(3, resolution).map_err(CliError::from)? {
        let value = surrogate(&a, &prob).map_err(CliError::from)?;
        let w = a.as_slice();
        text.push_str(&format!("{},{},{},{}\n", w[0], w[1], w[2], value));
    }
    fs::write(out, text).map_err(|e| CliError::Io(format!("{}: {e}", out.display())))?;
    Ok(())
}

pub fn cmd_pseudolabel(unlabeled: &Path, fewshot: &Path, k: usize, out: &Path) -> CliResult<()> {
    let queries = io::load_features_csv(unlabeled)?;
    let few = io::load_dataset(fewshot)?;
    let labeled = knn_pseudolabel(&queries.view(), &few, k)?;
    io::save_dataset(&labeled, out)?;
    Ok(())
}
