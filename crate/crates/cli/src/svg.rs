//! Scatter-plot SVG emission: the first two feature dimensions, colored by
//! argmax label. No plotting dependency; output is a deterministic string.

use std::fs;
use std::path::Path;

use otds::LabeledDataset;

use crate::error::{CliError, CliResult};

const PALETTE: [&str; 16] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
    "#bcbd22", "#17becf", "#393b79", "#637939", "#8c6d31", "#843c39", "#7b4173", "#3182bd",
];

pub fn scatter_svg(ds: &LabeledDataset<f64>) -> String {
    let size = 480.0f64;
    let margin = 20.0f64;
    let feats = ds.features();
    let get = |row: usize, dim: usize| -> f64 {
        if dim < feats.ncols() {
            feats[[row, dim]]
        } else {
            0.0
        }
    };
    let mut min = [f64::INFINITY; 2];
    let mut max = [f64::NEG_INFINITY; 2];
    for r in 0..ds.len() {
        for (dim, (lo, hi)) in min.iter_mut().zip(max.iter_mut()).enumerate() {
            let v = get(r, dim);
            *lo = lo.min(v);
            *hi = hi.max(v);
        }
    }
    for dim in 0..2 {
        if !(max[dim] > min[dim]) {
            min[dim] -= 0.5;
            max[dim] += 0.5;
        }
    }
    let scale = |v: f64, dim: usize| -> f64 {
        margin + (v - min[dim]) / (max[dim] - min[dim]) * (size - 2.0 * margin)
    };

    let mut out = String::new();
    out.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{size}\" height=\"{size}\" viewBox=\"0 0 {size} {size}\">\n"
    ));
    out.push_str(&format!(
        "<rect width=\"{size}\" height=\"{size}\" fill=\"white\"/>\n"
    ));
    for r in 0..ds.len() {
        let label_row = ds.labels().row(r).to_owned();
        let cls = label_row
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap_or(std::cmp::Ordering::Equal))
            .map(|(i, _)| i)
            .unwrap_or(0);
        let x = scale(get(r, 0), 0);
        // svg y grows downward
        let y = size - scale(get(r, 1), 1);
        out.push_str(&format!(
            "<circle cx=\"{x:.3}\" cy=\"{y:.3}\" r=\"3\" fill=\"{}\" fill-opacity=\"0.8\"/>\n",
            PALETTE[cls % PALETTE.len()]
        ));
    }
    out.push_str("</svg>\n");
    out
}

pub fn write_svg(ds: &LabeledDataset<f64>, path: &Path) -> CliResult<()> {
    fs::write(path, scatter_svg(ds))
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    Ok(())
}
