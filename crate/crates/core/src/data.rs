//! Sample containers, verdicts and sample budgets.
//!
//! Points live in a flat row-major buffer; all containers are immutable after
//! construction and safe to share across threads. CSV is the canonical
//! on-disk format (comma-separated, `\n` rows, no header, labels as a final
//! −1/+1 column when present); verdicts serialize to JSON.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::RngSpec;

/// An immutable matrix of `n` points in `R^d`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    dim: usize,
    data: Vec<f64>, // row-major, n * dim
}

impl Dataset {
    /// Build from a flat row-major buffer. Rejects empty data, ragged
    /// buffers and non-finite coordinates.
    pub fn from_flat(dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParameter("dimension must be positive".into()));
        }
        if data.is_empty() {
            return Err(Error::EmptyDataset);
        }
        if data.len() % dim != 0 {
            return Err(Error::InvalidParameter(format!(
                "buffer length {} is not a multiple of dim {}",
                data.len(),
                dim
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                context: format!("point {}, coordinate {}", pos / dim, pos % dim),
            });
        }
        Ok(Dataset { dim, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.first().map(|r| r.len()).ok_or(Error::EmptyDataset)?;
        let mut data = Vec::with_capacity(rows.len() * dim);
        for r in rows {
            if r.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, got: r.len() });
            }
            data.extend_from_slice(r);
        }
        Dataset::from_flat(dim, data)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter_points(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.data.chunks_exact(self.dim)
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.data
    }

    /// FNV-1a over the raw bit patterns. Used by tests to check that testers
    /// never mutate their inputs.
    pub fn content_hash(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for v in &self.data {
            for byte in v.to_bits().to_le_bytes() {
                h ^= byte as u64;
                h = h.wrapping_mul(0x0000_0100_0000_01B3);
            }
        }
        h
    }

    /// Write as CSV (no header). Formats with enough digits to round-trip.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = String::new();
        for p in self.iter_points() {
            for (j, v) in p.iter().enumerate() {
                if j > 0 {
                    out.push(',');
                }
                let _ = write!(out, "{}", FloatCsv(*v));
            }
            out.push('\n');
        }
        std::fs::write(path, out)?;
        Ok(())
    }
}

struct FloatCsv(f64);

impl std::fmt::Display for FloatCsv {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        // Shortest representation that parses back to the same f64.
        let mut s = format!("{}", self.0);
        if s.parse::<f64>() != Ok(self.0) {
            s = format!("{:e}", self.0);
        }
        f.write_str(&s)
    }
}

/// A dataset together with ±1 labels.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    pub data: Dataset,
    pub labels: Vec<i8>,
}

impl LabeledDataset {
    pub fn new(data: Dataset, labels: Vec<i8>) -> Result<Self> {
        if labels.len() != data.n() {
            return Err(Error::InvalidParameter(format!(
                "label count {} does not match point count {}",
                labels.len(),
                data.n()
            )));
        }
        if let Some(bad) = labels.iter().find(|&&l| l != 1 && l != -1) {
            return Err(Error::InvalidParameter(format!("label {bad} is not ±1")));
        }
        Ok(LabeledDataset { data, labels })
    }

    pub fn n(&self) -> usize {
        self.data.n()
    }

    pub fn dim(&self) -> usize {
        self.data.dim()
    }

    /// Write as CSV with the label as a trailing column.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = String::new();
        for (p, y) in self.data.iter_points().zip(&self.labels) {
            for v in p {
                let _ = write!(out, "{},", FloatCsv(*v));
            }
            let _ = writeln!(out, "{y}");
        }
        std::fs::write(path, out)?;
        Ok(())
    }
}

/// Parse a CSV file of `dim`-dimensional points (no header).
pub fn load_dataset(path: &Path, dim: usize) -> Result<Dataset> {
    let text = std::fs::read_to_string(path)?;
    let rows = parse_csv(&text, dim)?;
    Dataset::from_flat(dim, rows)
}

/// Parse a CSV file of points with a trailing −1/+1 label column.
pub fn load_labeled_dataset(path: &Path, dim: usize) -> Result<LabeledDataset> {
    let text = std::fs::read_to_string(path)?;
    let flat = parse_csv(&text, dim + 1)?;
    let n = flat.len() / (dim + 1);
    let mut data = Vec::with_capacity(n * dim);
    let mut labels = Vec::with_capacity(n);
    for (i, row) in flat.chunks_exact(dim + 1).enumerate() {
        data.extend_from_slice(&row[..dim]);
        let l = row[dim];
        if l == 1.0 {
            labels.push(1);
        } else if l == -1.0 {
            labels.push(-1);
        } else {
            return Err(Error::Parse {
                row: i,
                col: dim,
                detail: format!("label must be -1 or 1, got {l}"),
            });
        }
    }
    LabeledDataset::new(Dataset::from_flat(dim, data)?, labels)
}

fn parse_csv(text: &str, cols: usize) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    let mut rows = 0usize;
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != cols {
            return Err(Error::Parse {
                row: i,
                col: fields.len().min(cols),
                detail: format!("expected {cols} fields, got {}", fields.len()),
            });
        }
        for (j, f) in fields.iter().enumerate() {
            let v: f64 = f.trim().parse().map_err(|_| Error::Parse {
                row: i,
                col: j + 1,
                detail: format!("cannot parse {:?} as a number", f.trim()),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    row: i,
                    col: j + 1,
                    detail: "non-finite value".into(),
                });
            }
            out.push(v);
        }
        rows += 1;
    }
    if rows == 0 {
        return Err(Error::EmptyDataset);
    }
    Ok(out)
}

/// Deterministically split into two disjoint parts. The first part receives
/// `ceil(fraction * n)` points; the permutation is a Fisher-Yates shuffle
/// driven by `rng`. Both parts must be non-empty.
pub fn split_dataset(ds: &Dataset, fraction: f64, rng: RngSpec) -> Result<(Dataset, Dataset)> {
    if ds.n() < 2 {
        return Err(Error::InvalidParameter("need at least 2 points to split".into()));
    }
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::InvalidParameter(format!("fraction {fraction} outside (0,1)")));
    }
    let n = ds.n();
    let first = (fraction * n as f64).ceil() as usize;
    if first == 0 || first >= n {
        return Err(Error::InvalidParameter(format!(
            "split sizes ({first},{}) must both be non-empty",
            n - first
        )));
    }
    let perm = permutation(n, rng);
    let take = |idx: &[usize]| -> Dataset {
        let mut data = Vec::with_capacity(idx.len() * ds.dim());
        for &i in idx {
            data.extend_from_slice(ds.point(i));
        }
        Dataset { dim: ds.dim(), data }
    };
    Ok((take(&perm[..first]), take(&perm[first..])))
}

/// Same split, carrying labels along.
pub fn split_labeled(
    ds: &LabeledDataset,
    fraction: f64,
    rng: RngSpec,
) -> Result<(LabeledDataset, LabeledDataset)> {
    if ds.n() < 2 {
        return Err(Error::InvalidParameter("need at least 2 points to split".into()));
    }
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::InvalidParameter(format!("fraction {fraction} outside (0,1)")));
    }
    let n = ds.n();
    let first = (fraction * n as f64).ceil() as usize;
    if first == 0 || first >= n {
        return Err(Error::InvalidParameter(format!(
            "split sizes ({first},{}) must both be non-empty",
            n - first
        )));
    }
    let perm = permutation(n, rng);
    let take = |idx: &[usize]| -> Result<LabeledDataset> {
        let mut data = Vec::with_capacity(idx.len() * ds.dim());
        let mut labels = Vec::with_capacity(idx.len());
        for &i in idx {
            data.extend_from_slice(ds.data.point(i));
            labels.push(ds.labels[i]);
        }
        LabeledDataset::new(Dataset::from_flat(ds.dim(), data)?, labels)
    };
    Ok((take(&perm[..first])?, take(&perm[first..])?))
}

fn permutation(n: usize, rng: RngSpec) -> Vec<usize> {
    use rand::Rng;
    let mut idx: Vec<usize> = (0..n).collect();
    let mut r = rng.rng();
    for i in (1..n).rev() {
        let j = r.random_range(0..=i);
        idx.swap(i, j);
    }
    idx
}

/// Accept/reject outcome with diagnostics.
///
/// `thresholds` carries every named threshold the tester actually compared
/// against, alongside the observed statistics that are useful for debugging a
/// rejection; `worst_gap` is the largest margin by which a check was violated
/// (0 when accepted).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub accepted: bool,
    pub failed_check: Option<String>,
    pub worst_gap: f64,
    pub thresholds: BTreeMap<String, f64>,
}

impl Verdict {
    pub fn accept(thresholds: BTreeMap<String, f64>) -> Self {
        Verdict { accepted: true, failed_check: None, worst_gap: 0.0, thresholds }
    }

    pub fn reject(check: impl Into<String>, worst_gap: f64, thresholds: BTreeMap<String, f64>) -> Self {
        Verdict {
            accepted: false,
            failed_check: Some(check.into()),
            worst_gap: worst_gap.max(0.0),
            thresholds,
        }
    }
}

/// Sample counts for the decoupled pipelines.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleBudget {
    pub m_train: usize,
    pub m_test: usize,
    pub m_conc: usize,
}

impl SampleBudget {
    pub fn new(m_train: usize, m_test: usize, m_conc: usize) -> Result<Self> {
        if m_train == 0 || m_test == 0 || m_conc == 0 {
            return Err(Error::InvalidParameter("all budget counts must be >= 1".into()));
        }
        Ok(SampleBudget { m_train, m_test, m_conc })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn tmp(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    #[test]
    fn load_three_row_csv() {
        let f = tmp("1,0\n0,1\n-1,-1");
        let ds = load_dataset(f.path(), 2).unwrap();
        assert_eq!(ds.dim(), 2);
        assert_eq!(ds.n(), 3);
        assert_eq!(ds.point(2), &[-1.0, -1.0]);
    }

    #[test]
    fn load_empty_file_is_an_error() {
        let f = tmp("");
        match load_dataset(f.path(), 2) {
            Err(Error::EmptyDataset) => {}
            other => panic!("expected empty-dataset error, got {other:?}"),
        }
    }

    #[test]
    fn load_reports_row_and_column_of_parse_failure() {
        let f = tmp("1,2\n1,abc");
        match load_dataset(f.path(), 2) {
            Err(Error::Parse { row: 1, col: 2, .. }) => {}
            other => panic!("expected parse error at (1,2), got {other:?}"),
        }
    }

    #[test]
    fn load_rejects_wrong_width() {
        let f = tmp("1,2,3");
        assert!(load_dataset(f.path(), 2).is_err());
    }

    #[test]
    fn labeled_round_trip() {
        let f = tmp("1,0,1\n0,1,-1");
        let ds = load_labeled_dataset(f.path(), 2).unwrap();
        assert_eq!(ds.labels, vec![1, -1]);
        let out = tempfile::NamedTempFile::new().unwrap();
        ds.write_csv(out.path()).unwrap();
        let back = load_labeled_dataset(out.path(), 2).unwrap();
        assert_eq!(back, ds);
    }

    #[test]
    fn split_sizes_follow_ceil() {
        let ds = Dataset::from_flat(1, (0..10).map(|i| i as f64).collect()).unwrap();
        let (a, b) = split_dataset(&ds, 0.5, RngSpec::new(1, 0)).unwrap();
        assert_eq!((a.n(), b.n()), (5, 5));
    }

    #[test]
    fn degenerate_split_is_rejected() {
        let ds = Dataset::from_flat(1, (0..10).map(|i| i as f64).collect()).unwrap();
        assert!(split_dataset(&ds, 0.99, RngSpec::new(1, 0)).is_err());
    }

    #[test]
    fn split_is_deterministic_and_disjoint() {
        let ds = Dataset::from_flat(1, (0..20).map(|i| i as f64).collect()).unwrap();
        let (a1, b1) = split_dataset(&ds, 0.3, RngSpec::new(9, 2)).unwrap();
        let (a2, b2) = split_dataset(&ds, 0.3, RngSpec::new(9, 2)).unwrap();
        assert_eq!(a1, a2);
        assert_eq!(b1, b2);
        let mut all: Vec<f64> = a1.iter_points().chain(b1.iter_points()).map(|p| p[0]).collect();
        all.sort_by(|x, y| x.partial_cmp(y).unwrap());
        assert_eq!(all, (0..20).map(|i| i as f64).collect::<Vec<_>>());
    }

    #[test]
    fn verdict_json_shape() {
        let mut t = BTreeMap::new();
        t.insert("delta".to_string(), 0.1);
        let v = Verdict::reject("moment:1,0", 0.5, t);
        let s = serde_json::to_string(&v).unwrap();
        assert!(s.contains("\"accepted\":false"));
        assert!(s.contains("\"failed_check\":\"moment:1,0\""));
        let back: Verdict = serde_json::from_str(&s).unwrap();
        assert_eq!(back, v);
    }

    #[test]
    fn content_hash_is_order_sensitive() {
        let a = Dataset::from_flat(1, vec![1.0, 2.0]).unwrap();
        let b = Dataset::from_flat(1, vec![2.0, 1.0]).unwrap();
        assert_ne!(a.content_hash(), b.content_hash());
    }
}
