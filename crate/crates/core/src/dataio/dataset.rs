use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::export::{read_matrix, write_matrix, MatrixFormat};
use crate::error::{Error, Result};
use crate::numcore::Matrix;

/// Several feature views over the same `n` samples.
///
/// Each view is stored `d_v x n`: one column per sample.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiViewDataset {
    pub views: Vec<Matrix>,
    pub n: usize,
    pub k: usize,
    pub labels: Option<Vec<usize>>,
    pub view_names: Vec<String>,
}

impl MultiViewDataset {
    pub fn new(
        views: Vec<Matrix>,
        k: usize,
        labels: Option<Vec<usize>>,
        view_names: Vec<String>,
    ) -> Result<Self> {
        let n = views
            .first()
            .map(Matrix::cols)
            .ok_or_else(|| Error::InvalidInput("dataset needs at least one view".into()))?;
        for (v, m) in views.iter().enumerate() {
            if m.cols() != n {
                return Err(Error::shape(format!("view {v} sample count"), n, m.cols()));
            }
        }
        if view_names.len() != views.len() {
            return Err(Error::shape("view names", views.len(), view_names.len()));
        }
        if let Some(labels) = &labels {
            if labels.len() != n {
                return Err(Error::shape("labels", n, labels.len()));
            }
            if let Some((index, &label)) = labels.iter().enumerate().find(|(_, &l)| l >= k) {
                return Err(Error::BadLabel {
                    index,
                    label: label as i64,
                    k,
                });
            }
        }
        Ok(Self {
            views,
            n,
            k,
            labels,
            view_names,
        })
    }

    pub fn num_views(&self) -> usize {
        self.views.len()
    }

    pub fn view_dims(&self) -> Vec<usize> {
        self.views.iter().map(Matrix::rows).collect()
    }

    /// Views stacked into one `(Σ d_v) x n` matrix.
    pub fn concatenated(&self) -> Matrix {
        let parts: Vec<&Matrix> = self.views.iter().collect();
        Matrix::vstack(&parts).expect("views share n")
    }
}

/// `meta.json` of a dataset directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub n: usize,
    pub k: usize,
    #[serde(default)]
    pub labels: bool,
    #[serde(default)]
    pub label_base: u8,
    pub views: Vec<ViewMeta>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViewMeta {
    pub name: String,
    pub dim: usize,
    pub file: String,
    pub format: MatrixFormat,
}

pub const META_FILE: &str = "meta.json";
pub const LABELS_FILE: &str = "labels.csv";

/// Loads a dataset directory (`meta.json`, view files, optional `labels.csv`).
pub fn load_dataset(dir: impl AsRef<Path>) -> Result<MultiViewDataset> {
    let dir = dir.as_ref();
    let meta_path = dir.join(META_FILE);
    if !meta_path.is_file() {
        return Err(Error::MissingFile(meta_path));
    }
    let text = fs::read_to_string(&meta_path).map_err(|e| Error::io(&meta_path, e))?;
    let meta: DatasetMeta = serde_json::from_str(&text)?;
    if meta.views.is_empty() {
        return Err(Error::InvalidInput("meta.json lists no views".into()));
    }
    if meta.label_base > 1 {
        return Err(Error::InvalidInput(format!("label_base must be 0 or 1, got {}", meta.label_base)));
    }

    let mut views = Vec::with_capacity(meta.views.len());
    let mut names = Vec::with_capacity(meta.views.len());
    for view in &meta.views {
        let path = dir.join(&view.file);
        if !path.is_file() {
            return Err(Error::MissingFile(path));
        }
        let samples = read_matrix(&path, view.format, view.dim)?;
        if samples.rows() != meta.n {
            return Err(Error::shape(
                format!("view `{}` sample count", view.name),
                meta.n,
                samples.rows(),
            ));
        }
        views.push(samples.transpose());
        names.push(view.name.clone());
    }

    let labels = if meta.labels {
        let path = dir.join(LABELS_FILE);
        if !path.is_file() {
            return Err(Error::MissingFile(path));
        }
        Some(read_labels(&path, meta.label_base, meta.k)?)
    } else {
        None
    };
    if let Some(l) = &labels {
        if l.len() != meta.n {
            return Err(Error::shape("labels.csv length", meta.n, l.len()));
        }
    }
    MultiViewDataset::new(views, meta.k, labels, names)
}

/// Reads one integer label per line, shifting by `base`.
pub fn read_labels(path: &Path, base: u8, k: usize) -> Result<Vec<usize>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut labels = Vec::new();
    for (index, line) in text.lines().map(str::trim).filter(|l| !l.is_empty()).enumerate() {
        let raw: i64 = line
            .parse()
            .map_err(|_| Error::InvalidInput(format!("{}: bad label `{line}`", path.display())))?;
        let shifted = raw - i64::from(base);
        if shifted < 0 || shifted >= k as i64 {
            return Err(Error::BadLabel {
                index,
                label: shifted,
                k,
            });
        }
        labels.push(shifted as usize);
    }
    Ok(labels)
}

pub fn write_labels(path: &Path, labels: &[usize]) -> Result<()> {
    let mut text = String::with_capacity(labels.len() * 3);
    for l in labels {
        text.push_str(&l.to_string());
        text.push('\n');
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Writes `ds` in the directory layout read by [`load_dataset`] (0-based labels).
pub fn save_dataset(ds: &MultiViewDataset, dir: impl AsRef<Path>, format: MatrixFormat) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let ext = match format {
        MatrixFormat::Csv => "csv",
        MatrixFormat::F64Bin => "f64bin",
    };
    let mut views = Vec::with_capacity(ds.num_views());
    for (v, (m, name)) in ds.views.iter().zip(&ds.view_names).enumerate() {
        let file = format!("view{v}.{ext}");
        write_matrix(&m.transpose(), &dir.join(&file), format)?;
        views.push(ViewMeta {
            name: name.clone(),
            dim: m.rows(),
            file,
            format,
        });
    }
    if let Some(labels) = &ds.labels {
        write_labels(&dir.join(LABELS_FILE), labels)?;
    }
    let meta = DatasetMeta {
        n: ds.n,
        k: ds.k,
        labels: ds.labels.is_some(),
        label_base: 0,
        views,
    };
    let meta_path = dir.join(META_FILE);
    fs::write(&meta_path, serde_json::to_string_pretty(&meta)?).map_err(|e| Error::io(&meta_path, e))
}

/// Rescales every feature (row) of every view to `[0, 1]`.
/// Constant features map to 0.
pub fn normalize_minmax(ds: &MultiViewDataset) -> MultiViewDataset {
    let mut out = ds.clone();
    for view in &mut out.views {
        for r in 0..view.rows() {
            let row = view.row_mut(r);
            let (lo, hi) = row
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
            let range = hi - lo;
            for v in row.iter_mut() {
                *v = if range > 0.0 { ((*v - lo) / range).clamp(0.0, 1.0) } else { 0.0 };
            }
        }
    }
    out
}
