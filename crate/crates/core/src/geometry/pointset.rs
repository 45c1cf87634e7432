use std::path::{Path, PathBuf};

use ndarray::{Array2, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io;

/// An `n x d` matrix of embedding coordinates with one integer id per row.
#[derive(Debug, Clone, PartialEq)]
pub struct PointSet {
    data: Array2<f64>,
    ids: Vec<u64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct PointSetHeader {
    n: usize,
    d: usize,
    dtype: String,
    order: String,
    payload: String,
    ids: Vec<u64>,
}

impl PointSet {
    /// Wraps a coordinate matrix; rows get ids `0..n`.
    pub fn new(data: Array2<f64>) -> Result<Self> {
        let ids = (0..data.nrows() as u64).collect();
        Self::with_ids(data, ids)
    }

    pub fn with_ids(data: Array2<f64>, ids: Vec<u64>) -> Result<Self> {
        let (n, d) = data.dim();
        if n == 0 || d == 0 {
            return Err(Error::InvalidInput(format!(
                "point set must be non-empty, got {n}x{d}"
            )));
        }
        if ids.len() != n {
            return Err(Error::Shape(format!("{} ids for {n} rows", ids.len())));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "non-finite coordinate at row {}, column {}",
                pos / d,
                pos % d
            )));
        }
        let mut sorted = ids.clone();
        sorted.sort_unstable();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidInput("point ids must be unique".into()));
        }
        Ok(Self { data, ids })
    }

    /// Builds a point set from row vectors of equal length.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let d = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != d) {
            return Err(Error::Shape("rows have unequal lengths".into()));
        }
        let flat: Vec<f64> = rows.iter().flatten().copied().collect();
        let data = Array2::from_shape_vec((n, d), flat)
            .map_err(|e| Error::Shape(e.to_string()))?;
        Self::new(data)
    }

    pub fn len(&self) -> usize {
        self.data.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.data.nrows() == 0
    }

    pub fn dim(&self) -> usize {
        self.data.ncols()
    }

    pub fn data(&self) -> &Array2<f64> {
        &self.data
    }

    pub fn ids(&self) -> &[u64] {
        &self.ids
    }

    pub fn row(&self, i: usize) -> ArrayView1<'_, f64> {
        self.data.row(i)
    }

    /// Squared Euclidean distance between rows `i` and `j`.
    pub fn sq_dist(&self, i: usize, j: usize) -> f64 {
        let a = self.data.row(i);
        let b = self.data.row(j);
        a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum()
    }

    /// Returns a copy with a subset of rows (ids preserved).
    pub fn select(&self, rows: &[usize]) -> Result<Self> {
        let data = self.data.select(ndarray::Axis(0), rows);
        let ids = rows.iter().map(|&r| self.ids[r]).collect();
        Self::with_ids(data, ids)
    }

    /// Writes `<stem>.json` (header) and `<stem>.bin` (row-major little-endian f32).
    pub fn save(&self, header_path: &Path) -> Result<()> {
        let payload_path = header_path.with_extension("bin");
        let header = PointSetHeader {
            n: self.len(),
            d: self.dim(),
            dtype: "f32".into(),
            order: "row-major".into(),
            payload: payload_path
                .file_name()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default(),
            ids: self.ids.clone(),
        };
        io::write_json(header_path, &header)?;
        let bytes = io::f32_to_le_bytes(self.data.iter().map(|&v| v as f32));
        io::write_bytes(&payload_path, &bytes)
    }

    pub fn load(header_path: &Path) -> Result<Self> {
        let header: PointSetHeader = io::read_json(header_path)?;
        if header.dtype != "f32" || header.order != "row-major" {
            return Err(Error::InvalidInput(format!(
                "unsupported point set encoding {}/{}",
                header.dtype, header.order
            )));
        }
        let payload_path: PathBuf = match header_path.parent() {
            Some(dir) => dir.join(&header.payload),
            None => PathBuf::from(&header.payload),
        };
        let values = io::le_bytes_to_f32(&io::read_bytes(&payload_path)?)?;
        if values.len() != header.n * header.d {
            return Err(Error::Shape(format!(
                "payload holds {} values, header declares {}x{}",
                values.len(),
                header.n,
                header.d
            )));
        }
        let data = Array2::from_shape_vec(
            (header.n, header.d),
            values.into_iter().map(f64::from).collect(),
        )
        .map_err(|e| Error::Shape(e.to_string()))?;
        let ids = if header.ids.is_empty() {
            (0..header.n as u64).collect()
        } else {
            header.ids
        };
        Self::with_ids(data, ids)
    }
}

/// Writes categorical labels, one UTF-8 token per line.
pub fn write_labels(path: &Path, labels: &[String]) -> Result<()> {
    if let Some(bad) = labels.iter().find(|l| l.contains('\n') || l.is_empty()) {
        return Err(Error::InvalidInput(format!("label {bad:?} is not a single token")));
    }
    let mut text = labels.join("\n");
    text.push('\n');
    io::write_bytes(path, text.as_bytes())
}

pub fn read_labels(path: &Path) -> Result<Vec<String>> {
    Ok(io::read_string(path)?
        .lines()
        .filter(|l| !l.is_empty())
        .map(str::to_owned)
        .collect())
}
