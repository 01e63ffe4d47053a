//! Dataset files: a CSV form for interop and a compact binary form.
//!
//! CSV: header `x0..x{d-1}` followed by either a single integer column `y`
//! (hard labels) or columns `y0..y{C-1}` (soft label rows).
//!
//! Binary: magic `OTDS`, version u32 LE (= 1), flags u8 (bit 0: soft labels),
//! n u64 LE, d u32 LE, C u32 LE, then row-major f32 features, then labels
//! (u32 class ids if hard, f32 rows if soft). Round trips reproduce features
//! to f32 precision and labels exactly (hard) or to f32 (soft).

use std::fs;
use std::path::Path;

use ndarray::{Array2, Axis};
use otds::{LabeledDataset, Scalar};

use crate::error::{CliError, CliResult};

const MAGIC: &[u8; 4] = b"OTDS";
const VERSION: u32 = 1;
const FLAG_SOFT: u8 = 1;

/// Load a dataset, sniffing the binary magic and falling back to CSV.
pub fn load_dataset(path: &Path) -> CliResult<LabeledDataset<f64>> {
    let bytes = fs::read(path)
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    if bytes.len() >= 4 && &bytes[..4] == MAGIC {
        decode_binary(&bytes, &dataset_id(path))
    } else {
        parse_csv(&bytes, &dataset_id(path))
    }
}

/// Save a dataset; `.csv` extensions get the CSV form, anything else binary.
pub fn save_dataset(ds: &LabeledDataset<f64>, path: &Path) -> CliResult<()> {
    let bytes = if path.extension().and_then(|e| e.to_str()) == Some("csv") {
        encode_csv(ds)?
    } else {
        encode_binary(ds)
    };
    fs::write(path, bytes).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    Ok(())
}

fn dataset_id(path: &Path) -> String {
    path.file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("dataset")
        .to_string()
}

pub fn encode_binary(ds: &LabeledDataset<f64>) -> Vec<u8> {
    let n = ds.len();
    let d = ds.dim();
    let c = ds.num_classes();
    let hard = ds.is_hard();
    let mut out = Vec::with_capacity(17 + 4 * n * d + if hard { 4 * n } else { 4 * n * c });
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.push(if hard { 0 } else { FLAG_SOFT });
    out.extend_from_slice(&(n as u64).to_le_bytes());
    out.extend_from_slice(&(d as u32).to_le_bytes());
    out.extend_from_slice(&(c as u32).to_le_bytes());
    for &v in ds.features().iter() {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
    if hard {
        for id in ds.hard_class_ids().expect("hard dataset") {
            out.extend_from_slice(&(id as u32).to_le_bytes());
        }
    } else {
        for &v in ds.labels().iter() {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    out
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, len: usize) -> CliResult<&'a [u8]> {
        if self.pos + len > self.bytes.len() {
            return Err(CliError::Io("truncated dataset file".into()));
        }
        let s = &self.bytes[self.pos..self.pos + len];
        self.pos += len;
        Ok(s)
    }

    fn u32(&mut self) -> CliResult<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> CliResult<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn u8(&mut self) -> CliResult<u8> {
        Ok(self.take(1)?[0])
    }

    fn f32(&mut self) -> CliResult<f32> {
        Ok(f32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
}

pub fn decode_binary(bytes: &[u8], id: &str) -> CliResult<LabeledDataset<f64>> {
    let mut cur = Cursor { bytes, pos: 0 };
    if cur.take(4)? != MAGIC {
        return Err(CliError::Io("missing OTDS magic".into()));
    }
    let version = cur.u32()?;
    if version != VERSION {
        return Err(CliError::Io(format!("unsupported version {version}")));
    }
    let flags = cur.u8()?;
    let soft = flags & FLAG_SOFT != 0;
    let n = cur.u64()? as usize;
    let d = cur.u32()? as usize;
    let c = cur.u32()? as usize;
    if n == 0 || d == 0 || c == 0 {
        return Err(CliError::Validation(format!(
            "degenerate dataset header (n={n}, d={d}, C={c})"
        )));
    }
    let mut features = Array2::<f64>::zeros((n, d));
    for v in features.iter_mut() {
        *v = cur.f32()? as f64;
    }
    let ds = if soft {
        let mut labels = Array2::<f64>::zeros((n, c));
        for v in labels.iter_mut() {
            *v = cur.f32()? as f64;
        }
        renormalize_soft(&mut labels)?;
        LabeledDataset::new(id, features, labels, default_names(c))
    } else {
        let mut ids = Vec::with_capacity(n);
        for _ in 0..n {
            let cls = cur.u32()? as usize;
            if cls >= c {
                return Err(CliError::Validation(format!(
                    "class id {cls} out of range for C={c}"
                )));
            }
            ids.push(cls);
        }
        LabeledDataset::from_hard_labels(id, features, &ids, c, None)
    };
    if cur.pos != bytes.len() {
        return Err(CliError::Io("trailing bytes in dataset file".into()));
    }
    ds.map_err(CliError::from)
}

/// Soft rows are stored at f32 precision; normalize them back to unit sum so
/// the stochasticity invariant holds bit-tight after a round trip.
fn renormalize_soft(labels: &mut Array2<f64>) -> CliResult<()> {
    for (row, mut lab) in labels.axis_iter_mut(Axis(0)).enumerate() {
        let sum: f64 = lab.iter().sum();
        if !(sum > 0.0) || !sum.is_finite() {
            return Err(CliError::Validation(format!(
                "label row {row} does not form a distribution (sum {sum})"
            )));
        }
        lab.mapv_inplace(|v| v / sum);
    }
    Ok(())
}

fn default_names(c: usize) -> Vec<String> {
    (0..c).map(|i| i.to_string()).collect()
}

pub fn encode_csv(ds: &LabeledDataset<f64>) -> CliResult<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let d = ds.dim();
    // The `y` id column cannot carry trailing unused classes (C is inferred
    // as max id + 1 on load); fall back to soft columns in that case.
    let hard = ds.is_hard()
        && ds
            .hard_class_ids()
            .map(|ids| ids.iter().max().map_or(0, |m| m + 1) == ds.num_classes())
            .unwrap_or(false);
    let mut header: Vec<String> = (0..d).map(|i| format!("x{i}")).collect();
    if hard {
        header.push("y".into());
    } else {
        header.extend((0..ds.num_classes()).map(|i| format!("y{i}")));
    }
    w.write_record(&header)
        .map_err(|e| CliError::Io(e.to_string()))?;
    let ids = if hard {
        Some(ds.hard_class_ids().expect("hard dataset"))
    } else {
        None
    };
    for (row, feat) in ds.features().axis_iter(Axis(0)).enumerate() {
        let mut record: Vec<String> = feat.iter().map(|v| format!("{v}")).collect();
        match &ids {
            Some(ids) => record.push(ids[row].to_string()),
            None => record.extend(ds.labels().row(row).iter().map(|v| format!("{v}"))),
        }
        w.write_record(&record)
            .map_err(|e| CliError::Io(e.to_string()))?;
    }
    w.into_inner().map_err(|e| CliError::Io(e.to_string()))
}

pub fn parse_csv(bytes: &[u8], id: &str) -> CliResult<LabeledDataset<f64>> {
    let mut reader = csv::Reader::from_reader(bytes);
    let headers = reader
        .headers()
        .map_err(|e| CliError::Io(e.to_string()))?
        .clone();
    let names: Vec<&str> = headers.iter().collect();
    let d = names.iter().take_while(|h| h.starts_with('x')).count();
    if d == 0 {
        return Err(CliError::Validation(
            "no feature columns (expected x0, x1, ...)".into(),
        ));
    }
    let rest = &names[d..];
    let hard = rest == ["y"];
    let soft_c = rest.iter().filter(|h| h.starts_with('y')).count();
    if !hard && (soft_c == 0 || soft_c != rest.len()) {
        return Err(CliError::Validation(format!(
            "label columns must be `y` or `y0..y{{C-1}}`, got {rest:?}"
        )));
    }

    let mut feats: Vec<f64> = Vec::new();
    let mut hard_ids: Vec<usize> = Vec::new();
    let mut soft_rows: Vec<f64> = Vec::new();
    let mut n = 0usize;
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| CliError::Io(e.to_string()))?;
        if record.len() != names.len() {
            return Err(CliError::Validation(format!(
                "row {}: {} fields, expected {}",
                line + 2,
                record.len(),
                names.len()
            )));
        }
        for v in record.iter().take(d) {
            feats.push(parse_float(v, line + 2)?);
        }
        if hard {
            let raw = record.get(d).unwrap();
            let cls: usize = raw.parse().map_err(|_| {
                CliError::Validation(format!("row {}: bad class id `{raw}`", line + 2))
            })?;
            hard_ids.push(cls);
        } else {
            for v in record.iter().skip(d) {
                soft_rows.push(parse_float(v, line + 2)?);
            }
        }
        n += 1;
    }
    if n == 0 {
        return Err(CliError::Validation("dataset has no rows".into()));
    }
    let features = Array2::from_shape_vec((n, d), feats)
        .map_err(|e| CliError::Validation(e.to_string()))?;
    let ds = if hard {
        let c = hard_ids.iter().max().copied().unwrap_or(0) + 1;
        LabeledDataset::from_hard_labels(id, features, &hard_ids, c, None)
    } else {
        let mut labels = Array2::from_shape_vec((n, soft_c), soft_rows)
            .map_err(|e| CliError::Validation(e.to_string()))?;
        renormalize_soft(&mut labels)?;
        LabeledDataset::new(id, features, labels, default_names(soft_c))
    };
    ds.map_err(CliError::from)
}

fn parse_float(v: &str, line: usize) -> CliResult<f64> {
    v.trim()
        .parse::<f64>()
        .map_err(|_| CliError::Validation(format!("row {line}: bad number `{v}`")))
}

/// Features-only CSV (header `x0..x{d-1}`, no label columns), the carrier for
/// unlabeled query points.
pub fn load_features_csv(path: &Path) -> CliResult<Array2<f64>> {
    let bytes = fs::read(path)
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let mut reader = csv::Reader::from_reader(bytes.as_slice());
    let headers = reader
        .headers()
        .map_err(|e| CliError::Io(e.to_string()))?
        .clone();
    let d = headers.iter().take_while(|h| h.starts_with('x')).count();
    if d == 0 || d != headers.len() {
        return Err(CliError::Validation(
            "unlabeled input must have only x0..x{d-1} columns".into(),
        ));
    }
    let mut vals = Vec::new();
    let mut n = 0usize;
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| CliError::Io(e.to_string()))?;
        for v in record.iter() {
            vals.push(parse_float(v, line + 2)?);
        }
        n += 1;
    }
    Array2::from_shape_vec((n, d), vals).map_err(|e| CliError::Validation(e.to_string()))
}

/// Write unlabeled features as the features-only CSV.
pub fn save_features_csv(features: &Array2<f64>, path: &Path) -> CliResult<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let header: Vec<String> = (0..features.ncols()).map(|i| format!("x{i}")).collect();
    w.write_record(&header)
        .map_err(|e| CliError::Io(e.to_string()))?;
    for row in features.axis_iter(Axis(0)) {
        let record: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
        w.write_record(&record)
            .map_err(|e| CliError::Io(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Io(e.to_string()))?;
    fs::write(path, bytes).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    Ok(())
}

/// Z-score features per column (a dataset's own statistics); constant columns
/// are left centered with unit divisor.
pub fn zscore<S: Scalar>(ds: &LabeledDataset<S>) -> LabeledDataset<S> {
    let n = ds.len();
    let d = ds.dim();
    let inv_n = S::one() / S::from_f64_c(n as f64);
    let mut features = ds.features().to_owned();
    for col in 0..d {
        let mean: S = features.column(col).iter().cloned().sum::<S>() * inv_n;
        let var: S = features
            .column(col)
            .iter()
            .map(|&v| (v - mean) * (v - mean))
            .sum::<S>()
            * inv_n;
        let std = var.sqrt();
        let denom = if std > S::from_f64_c(1e-12) {
            std
        } else {
            S::one()
        };
        for v in features.column_mut(col).iter_mut() {
            *v = (*v - mean) / denom;
        }
    }
    LabeledDataset::new(
        format!("{}#z", ds.id()),
        features,
        ds.labels().to_owned(),
        ds.class_names().to_vec(),
    )
    .expect("zscore preserves validity")
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;

    fn hard_ds() -> LabeledDataset<f64> {
        LabeledDataset::from_hard_labels(
            "h",
            array![[0.25, -1.5], [3.75, 2.0], [1.0, 0.125]],
            &[0, 2, 1],
            3,
            None,
        )
        .unwrap()
    }

    fn soft_ds() -> LabeledDataset<f64> {
        LabeledDataset::new(
            "s",
            array![[0.5], [1.25]],
            array![[0.25, 0.75], [0.6, 0.4]],
            vec!["a".into(), "b".into()],
        )
        .unwrap()
    }

    #[test]
    fn binary_round_trip_hard_is_exact_for_f32_values() {
        let ds = hard_ds();
        let bytes = encode_binary(&ds);
        let back = decode_binary(&bytes, "h").unwrap();
        // features above are f32-representable, so the trip is exact
        assert_eq!(back.features(), ds.features());
        assert_eq!(back.hard_class_ids().unwrap(), ds.hard_class_ids().unwrap());
    }

    #[test]
    fn binary_round_trip_soft_within_f32() {
        let ds = soft_ds();
        let bytes = encode_binary(&ds);
        let back = decode_binary(&bytes, "s").unwrap();
        for (a, b) in back.labels().iter().zip(ds.labels().iter()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-6);
        }
        back.validate().unwrap();
    }

    #[test]
    fn binary_rejects_truncation_and_bad_magic() {
        let ds = hard_ds();
        let mut bytes = encode_binary(&ds);
        bytes.truncate(bytes.len() - 3);
        assert!(matches!(
            decode_binary(&bytes, "h"),
            Err(CliError::Io(_))
        ));
        let mut bad = encode_binary(&ds);
        bad[0] = b'X';
        assert!(matches!(decode_binary(&bad, "h"), Err(CliError::Io(_))));
    }

    #[test]
    fn csv_round_trip_hard_is_exact() {
        let ds = hard_ds();
        let bytes = encode_csv(&ds).unwrap();
        let text = String::from_utf8(bytes.clone()).unwrap();
        assert!(text.starts_with("x0,x1,y\n"));
        let back = parse_csv(&bytes, "h").unwrap();
        assert_eq!(back.features(), ds.features());
        assert_eq!(back.labels(), ds.labels());
    }

    #[test]
    fn csv_round_trip_soft_renormalizes() {
        let ds = soft_ds();
        let bytes = encode_csv(&ds).unwrap();
        let back = parse_csv(&bytes, "s").unwrap();
        for (a, b) in back.labels().iter().zip(ds.labels().iter()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn csv_rejects_bad_labels_header() {
        let text = b"x0,z\n1.0,2.0\n";
        assert!(matches!(
            parse_csv(text, "t"),
            Err(CliError::Validation(_))
        ));
    }

    #[test]
    fn zscore_centers_and_scales() {
        let ds = hard_ds();
        let z = zscore(&ds);
        for col in 0..2 {
            let mean: f64 = z.features().column(col).iter().sum::<f64>() / 3.0;
            assert_abs_diff_eq!(mean, 0.0, epsilon = 1e-12);
            let var: f64 = z
                .features()
                .column(col)
                .iter()
                .map(|v| v * v)
                .sum::<f64>()
                / 3.0;
            assert_abs_diff_eq!(var, 1.0, epsilon = 1e-12);
        }
    }
}
