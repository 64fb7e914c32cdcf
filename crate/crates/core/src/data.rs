//! Datasets: IDX and CSV loaders, Gaussian-cluster generator, seeded
//! split and batching.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::rng::SplitMix64;

const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
const IDX_LABELS_MAGIC: u32 = 0x0000_0801;

/// Feature matrix (one row per sample) with integer class labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Matrix,
    labels: Vec<usize>,
    n_classes: usize,
}

impl Dataset {
    pub fn new(features: Matrix, labels: Vec<usize>, n_classes: usize) -> Result<Self> {
        if labels.len() != features.rows() {
            return Err(Error::shape(
                format!("{} labels", features.rows()),
                labels.len(),
            ));
        }
        if let Some((i, &l)) = labels.iter().enumerate().find(|(_, &l)| l >= n_classes) {
            return Err(Error::input(format!(
                "label {l} of sample {i} is not below n_classes = {n_classes}"
            )));
        }
        Ok(Self {
            features,
            labels,
            n_classes,
        })
    }

    /// Infers `n_classes` as `max(label) + 1`.
    pub fn from_labels(features: Matrix, labels: Vec<usize>) -> Result<Self> {
        let n_classes = labels.iter().max().map_or(0, |m| m + 1);
        Self::new(features, labels, n_classes)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.features.cols()
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn features(&self) -> &Matrix {
        &self.features
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    #[inline]
    pub fn sample(&self, i: usize) -> &[f64] {
        self.features.row(i)
    }

    #[inline]
    pub fn label(&self, i: usize) -> usize {
        self.labels[i]
    }

    /// Samples at `idx`, in that order, keeping `n_classes`.
    pub fn subset(&self, idx: &[usize]) -> Dataset {
        Dataset {
            features: self.features.select_rows(idx),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
            n_classes: self.n_classes,
        }
    }

    /// First `n` samples.
    pub fn head(&self, n: usize) -> Dataset {
        let idx: Vec<usize> = (0..n.min(self.len())).collect();
        self.subset(&idx)
    }

    /// `self` followed by `other`.
    pub fn concat(&self, other: &Dataset) -> Result<Dataset> {
        if self.n_features() != other.n_features() && !self.is_empty() && !other.is_empty() {
            return Err(Error::shape(
                format!("{} features", self.n_features()),
                other.n_features(),
            ));
        }
        let cols = if self.is_empty() { other.n_features() } else { self.n_features() };
        let mut data = self.features.as_slice().to_vec();
        data.extend_from_slice(other.features.as_slice());
        let mut labels = self.labels.clone();
        labels.extend_from_slice(&other.labels);
        Dataset::new(
            Matrix::from_vec(labels.len(), cols, data)?,
            labels,
            self.n_classes.max(other.n_classes),
        )
    }

    /// Overrides the class count, e.g. to match a model's output width.
    pub fn with_n_classes(mut self, n_classes: usize) -> Result<Self> {
        if let Some(&l) = self.labels.iter().find(|&&l| l >= n_classes) {
            return Err(Error::input(format!("label {l} is not below n_classes = {n_classes}")));
        }
        self.n_classes = n_classes;
        Ok(self)
    }
}

fn be_u32(bytes: &[u8], offset: usize, what: &str) -> Result<u32> {
    bytes
        .get(offset..offset + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| Error::at_offset(offset, format!("file ends before {what}")))
}

/// Parses an IDX image/label file pair held in memory.
pub fn parse_idx(images: &[u8], labels: &[u8]) -> Result<Dataset> {
    let magic = be_u32(images, 0, "image magic")?;
    if magic != IDX_IMAGES_MAGIC {
        return Err(Error::at_offset(
            0,
            format!("image magic {magic:#010x}, expected {IDX_IMAGES_MAGIC:#010x}"),
        ));
    }
    let n = be_u32(images, 4, "image count")? as usize;
    let h = be_u32(images, 8, "row count")? as usize;
    let w = be_u32(images, 12, "column count")? as usize;
    let pixels = n * h * w;
    if images.len() < 16 + pixels {
        return Err(Error::at_offset(
            images.len(),
            format!("image data truncated: need {pixels} pixel bytes after the header"),
        ));
    }

    let magic = be_u32(labels, 0, "label magic")?;
    if magic != IDX_LABELS_MAGIC {
        return Err(Error::at_offset(
            0,
            format!("label magic {magic:#010x}, expected {IDX_LABELS_MAGIC:#010x}"),
        ));
    }
    let n_labels = be_u32(labels, 4, "label count")? as usize;
    if n_labels != n {
        return Err(Error::at_offset(
            4,
            format!("label count {n_labels} does not match image count {n}"),
        ));
    }
    if labels.len() < 8 + n {
        return Err(Error::at_offset(
            labels.len(),
            format!("label data truncated: need {n} label bytes"),
        ));
    }

    let features: Vec<f64> = images[16..16 + pixels]
        .iter()
        .map(|&b| f64::from(b) / 255.0)
        .collect();
    let labels: Vec<usize> = labels[8..8 + n].iter().map(|&b| usize::from(b)).collect();
    Dataset::from_labels(Matrix::from_vec(n, h * w, features)?, labels)
}

pub fn load_idx(images_path: impl AsRef<Path>, labels_path: impl AsRef<Path>) -> Result<Dataset> {
    let (ip, lp) = (images_path.as_ref(), labels_path.as_ref());
    let images = fs::read(ip).map_err(|e| Error::io(ip, e))?;
    let labels = fs::read(lp).map_err(|e| Error::io(lp, e))?;
    parse_idx(&images, &labels)
}

/// Reads a headered numeric CSV; every column except `label_column` is a
/// feature, in header order.
pub fn load_csv(path: impl AsRef<Path>, label_column: &str) -> Result<Dataset> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_csv(&text, label_column)
}

pub fn parse_csv(text: &str, label_column: &str) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header = reader
        .headers()
        .map_err(|e| Error::at_line(1, e.to_string()))?
        .clone();
    let label_idx = header
        .iter()
        .position(|h| h == label_column)
        .ok_or_else(|| Error::at_line(1, format!("no column named `{label_column}`")))?;
    let width = header.len();

    let mut features = Vec::new();
    let mut labels = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            Error::at_line(line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        if record.len() != width {
            return Err(Error::at_line(
                line,
                format!("expected {width} cells, found {}", record.len()),
            ));
        }
        for (c, cell) in record.iter().enumerate() {
            if cell.is_empty() {
                return Err(Error::at_line(line, format!("missing value in column {c}")));
            }
            if c == label_idx {
                let label: usize = cell
                    .parse()
                    .map_err(|_| Error::at_line(line, format!("label `{cell}` is not a class index")))?;
                labels.push(label);
            } else {
                let v: f64 = cell
                    .parse()
                    .map_err(|_| Error::at_line(line, format!("`{cell}` is not numeric")))?;
                if !v.is_finite() {
                    return Err(Error::at_line(line, format!("non-finite value `{cell}`")));
                }
                features.push(v);
            }
        }
    }
    let n = labels.len();
    Dataset::from_labels(Matrix::from_vec(n, width - 1, features)?, labels)
}

/// CSV with header `f0,..,f{d-1},label`. Values use shortest round-trip
/// formatting so [`load_csv`] reproduces them exactly.
pub fn to_csv(data: &Dataset) -> String {
    let mut out = String::new();
    for c in 0..data.n_features() {
        out.push_str(&format!("f{c},"));
    }
    out.push_str("label\n");
    for i in 0..data.len() {
        for v in data.sample(i) {
            out.push_str(&format!("{v:?},"));
        }
        out.push_str(&format!("{}\n", data.label(i)));
    }
    out
}

/// Atomically replaces `path` with `contents` (temp file, then rename).
pub fn write_atomic(path: impl AsRef<Path>, contents: &[u8]) -> Result<()> {
    let path = path.as_ref();
    let mut tmp_name = path.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    tmp_name.push(".tmp");
    let tmp = path.with_file_name(tmp_name);
    let write = || -> std::io::Result<()> {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(contents)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    };
    write().map_err(|e| {
        let _ = fs::remove_file(&tmp);
        Error::io(path, e)
    })
}

/// Gaussian blobs: one center per class drawn uniformly from `[0,1]^dims`,
/// then `per_class` points per class with isotropic standard deviation
/// `spread`. Samples are interleaved by class (sample `k` of class `c` sits
/// at index `k * n_classes + c`), so every prefix is close to balanced.
pub fn synth_clusters(seed: u64, n_classes: usize, dims: usize, per_class: usize, spread: f64) -> Result<Dataset> {
    if n_classes == 0 || dims == 0 || per_class == 0 {
        return Err(Error::Config("n_classes, dims and per_class must all be >= 1".into()));
    }
    if !(spread >= 0.0 && spread.is_finite()) {
        return Err(Error::Config(format!("spread must be finite and >= 0, got {spread}")));
    }
    let mut rng = SplitMix64::new(seed);
    let centers: Vec<Vec<f64>> = (0..n_classes)
        .map(|_| (0..dims).map(|_| rng.next_f64()).collect())
        .collect();
    let n = n_classes * per_class;
    let mut features = Vec::with_capacity(n * dims);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..per_class {
        for (c, center) in centers.iter().enumerate() {
            for &m in center {
                features.push(m + spread * rng.normal());
            }
            labels.push(c);
        }
    }
    Dataset::new(Matrix::from_vec(n, dims, features)?, labels, n_classes)
}

/// Seeded partition into `(train, val)`. Each side keeps the original
/// relative order of its samples.
pub fn split(data: &Dataset, train_fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::Config(format!(
            "train fraction must lie in (0, 1), got {train_fraction}"
        )));
    }
    let n = data.len();
    let n_train = (n as f64 * train_fraction).round() as usize;
    if n_train == 0 || n_train == n {
        return Err(Error::input(format!(
            "splitting {n} samples at {train_fraction} leaves one side empty"
        )));
    }
    let perm = SplitMix64::new(seed).permutation(n);
    let mut train_idx = perm[..n_train].to_vec();
    let mut val_idx = perm[n_train..].to_vec();
    train_idx.sort_unstable();
    val_idx.sort_unstable();
    Ok((data.subset(&train_idx), data.subset(&val_idx)))
}

/// Sample indices for one epoch, reshuffled from `(seed, epoch)`; the last
/// batch may be short.
pub fn batch_indices(n: usize, batch_size: usize, seed: u64, epoch: u64) -> Result<Vec<Vec<usize>>> {
    if batch_size == 0 {
        return Err(Error::Config("batch size must be >= 1".into()));
    }
    let perm = SplitMix64::derive(seed, epoch).permutation(n);
    Ok(perm.chunks(batch_size).map(<[usize]>::to_vec).collect())
}

/// Batches of `data` for one epoch, as datasets.
pub fn batches(data: &Dataset, batch_size: usize, seed: u64, epoch: u64) -> Result<Vec<Dataset>> {
    Ok(batch_indices(data.len(), batch_size, seed, epoch)?
        .iter()
        .map(|idx| data.subset(idx))
        .collect())
}
