//! Multi-view datasets: validation, row normalization, synthetic blobs, and
//! the on-disk directory format.
//!
//! A dataset directory holds `manifest.json`, one matrix file per view and an
//! optional labels file:
//!
//! ```text
//! data/
//!   manifest.json   {"n":300,"v":2,"c":3,"views":["view0.dmx","view1.csv"],
//!                    "normalize":true,"labels":"labels.txt"}
//!   view0.dmx       "DMX1" | u64 rows | u64 cols | rows*cols f64, all little-endian
//!   view1.csv       one sample per line, comma separated, no header
//!   labels.txt      one integer per line
//! ```

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::ad::Matrix;
use crate::error::{DmacError, Result};

pub const DMX_MAGIC: &[u8; 4] = b"DMX1";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const LABELS_FILE: &str = "labels.txt";

/// `v` feature matrices over the same `n` samples, plus optional labels.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiViewDataset {
    views: Vec<Matrix>,
    labels: Option<Vec<usize>>,
    clusters: usize,
}

impl MultiViewDataset {
    pub fn new(views: Vec<Matrix>, labels: Option<Vec<usize>>, clusters: usize) -> Result<Self> {
        if views.is_empty() {
            return Err(DmacError::Argument("a dataset needs at least one view".into()));
        }
        let n = views[0].rows();
        for (a, v) in views.iter().enumerate() {
            if v.rows() != n {
                return Err(DmacError::Argument(format!(
                    "view {a} has {} rows, view 0 has {n}",
                    v.rows()
                )));
            }
        }
        if clusters < 2 {
            return Err(DmacError::Argument(format!(
                "cluster count must be at least 2, got {clusters}"
            )));
        }
        if let Some(l) = &labels {
            if l.len() != n {
                return Err(DmacError::Argument(format!(
                    "{} labels for {n} samples",
                    l.len()
                )));
            }
            if let Some(bad) = l.iter().find(|&&x| x >= clusters) {
                return Err(DmacError::Argument(format!(
                    "label {bad} out of range for {clusters} clusters"
                )));
            }
        }
        Ok(Self {
            views,
            labels,
            clusters,
        })
    }

    pub fn views(&self) -> &[Matrix] {
        &self.views
    }

    pub fn labels(&self) -> Option<&[usize]> {
        self.labels.as_deref()
    }

    pub fn n(&self) -> usize {
        self.views[0].rows()
    }

    pub fn v(&self) -> usize {
        self.views.len()
    }

    pub fn c(&self) -> usize {
        self.clusters
    }

    /// Per-view feature widths.
    pub fn dims(&self) -> Vec<usize> {
        self.views.iter().map(Matrix::cols).collect()
    }

    /// Copy with every view row-normalized; returns the zero rows found per view.
    pub fn normalized(&self) -> (Self, Vec<Vec<usize>>) {
        let mut zero_rows = Vec::with_capacity(self.v());
        let views = self
            .views
            .iter()
            .map(|v| {
                let r = l2_normalize_rows(v);
                zero_rows.push(r.zero_rows);
                r.matrix
            })
            .collect();
        (
            Self {
                views,
                labels: self.labels.clone(),
                clusters: self.clusters,
            },
            zero_rows,
        )
    }
}

/// Result of [`l2_normalize_rows`].
#[derive(Debug, Clone)]
pub struct RowNormalization {
    pub matrix: Matrix,
    /// Rows that were all zero and left untouched.
    pub zero_rows: Vec<usize>,
}

/// Scales every nonzero row to unit Euclidean norm.
pub fn l2_normalize_rows(x: &Matrix) -> RowNormalization {
    let mut matrix = x.clone();
    let mut zero_rows = Vec::new();
    for i in 0..matrix.rows() {
        let row = matrix.row_mut(i);
        let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            zero_rows.push(i);
            continue;
        }
        for v in row {
            *v /= norm;
        }
    }
    if !zero_rows.is_empty() {
        log::warn!(
            "{} all-zero rows left unnormalized (first: {})",
            zero_rows.len(),
            zero_rows[0]
        );
    }
    RowNormalization { matrix, zero_rows }
}

/// Parameters for [`generate_synthetic`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub n: usize,
    pub c: usize,
    /// Feature width of each view; its length is the view count.
    pub dims: Vec<usize>,
    /// Standard deviation of the Gaussian the cluster centers are drawn from.
    pub spread: f64,
    /// Standard deviation of within-cluster noise.
    pub noise: f64,
    pub seed: u64,
}

impl SyntheticSpec {
    /// Blobs with `v` views of widths 16, 24, 32, ...
    pub fn blobs(n: usize, v: usize, c: usize, seed: u64) -> Self {
        Self {
            n,
            c,
            dims: (0..v).map(|a| 16 + 8 * a).collect(),
            spread: 10.0,
            noise: 1.0,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.c < 2 || self.n < self.c {
            return Err(DmacError::Argument(format!(
                "need 2 <= c <= n, got n = {}, c = {}",
                self.n, self.c
            )));
        }
        if self.dims.is_empty() || self.dims.contains(&0) {
            return Err(DmacError::Argument(
                "every view needs a positive width".into(),
            ));
        }
        if !(self.spread > 0.0 && self.spread.is_finite()) {
            return Err(DmacError::Argument(format!(
                "center spread must be positive, got {}",
                self.spread
            )));
        }
        if !(self.noise >= 0.0 && self.noise.is_finite()) {
            return Err(DmacError::Argument(format!(
                "noise scale must be nonnegative, got {}",
                self.noise
            )));
        }
        Ok(())
    }
}

/// Isotropic Gaussian blobs, one center per cluster and view.
///
/// Sample `i` belongs to cluster `i mod c`, so cluster sizes differ by at
/// most one. A zero noise scale makes every cluster's samples identical.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<MultiViewDataset> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let labels: Vec<usize> = (0..spec.n).map(|i| i % spec.c).collect();
    let mut views = Vec::with_capacity(spec.dims.len());
    for &d in &spec.dims {
        let centers = Matrix::from_fn(spec.c, d, |_, _| {
            let draw: f64 = StandardNormal.sample(&mut rng);
            spec.spread * draw
        });
        let mut x = Matrix::zeros(spec.n, d);
        // noise = 0 must give exact copies, so skip sampling entirely
        let noise = (spec.noise > 0.0).then(|| Normal::new(0.0, spec.noise).expect("scale"));
        for (i, &l) in labels.iter().enumerate() {
            let center = centers.row(l);
            let row = x.row_mut(i);
            for (dst, &cv) in row.iter_mut().zip(center) {
                *dst = cv + noise.map_or(0.0, |nd| nd.sample(&mut rng));
            }
        }
        views.push(x);
    }
    MultiViewDataset::new(views, Some(labels), spec.c)
}

/// Matrix file encoding, chosen by extension.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MatrixFormat {
    Csv,
    Dmx,
}

impl MatrixFormat {
    pub fn extension(self) -> &'static str {
        match self {
            MatrixFormat::Csv => "csv",
            MatrixFormat::Dmx => "dmx",
        }
    }

    pub fn from_path(path: &Path) -> Option<Self> {
        match path.extension()?.to_str()? {
            "csv" => Some(MatrixFormat::Csv),
            "dmx" => Some(MatrixFormat::Dmx),
            _ => None,
        }
    }
}

impl std::str::FromStr for MatrixFormat {
    type Err = DmacError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(MatrixFormat::Csv),
            "dmx" => Ok(MatrixFormat::Dmx),
            other => Err(DmacError::Argument(format!(
                "unknown matrix format `{other}` (expected csv or dmx)"
            ))),
        }
    }
}

/// Contents of `manifest.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub n: usize,
    pub v: usize,
    pub c: usize,
    pub views: Vec<String>,
    #[serde(default)]
    pub normalize: bool,
    #[serde(default)]
    pub labels: Option<String>,
}

pub fn write_dmx(path: &Path, x: &Matrix) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(DMX_MAGIC)?;
    w.write_all(&(x.rows() as u64).to_le_bytes())?;
    w.write_all(&(x.cols() as u64).to_le_bytes())?;
    for v in x.as_slice() {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_dmx(path: &Path) -> Result<Matrix> {
    let load_err = |reason: String| DmacError::Load {
        path: path.to_path_buf(),
        reason,
    };
    let mut bytes = Vec::new();
    File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| load_err(e.to_string()))?;
    if bytes.len() < 20 || &bytes[..4] != DMX_MAGIC {
        return Err(load_err("missing DMX1 header".into()));
    }
    let word = |at: usize| u64::from_le_bytes(bytes[at..at + 8].try_into().unwrap()) as usize;
    let (rows, cols) = (word(4), word(12));
    let body = &bytes[20..];
    let expected = rows
        .checked_mul(cols)
        .and_then(|c| c.checked_mul(8))
        .ok_or_else(|| load_err(format!("{rows}x{cols} overflows")))?;
    if body.len() != expected {
        return Err(load_err(format!(
            "{rows}x{cols} needs {expected} payload bytes, found {}",
            body.len()
        )));
    }
    let data = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Matrix::from_vec(rows, cols, data)
}

pub fn write_csv(path: &Path, x: &Matrix) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_path(path)?;
    for row in x.row_iter() {
        w.write_record(row.iter().map(|v| v.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv(path: &Path) -> Result<Matrix> {
    let load_err = |reason: String| DmacError::Load {
        path: path.to_path_buf(),
        reason,
    };
    let mut r = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| load_err(e.to_string()))?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| load_err(e.to_string()))?;
        let row = rec
            .iter()
            .map(|f| f.parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| load_err(format!("line {}: {e}", i + 1)))?;
        rows.push(row);
    }
    Matrix::from_rows(&rows).map_err(|e| load_err(e.to_string()))
}

pub fn read_matrix(path: &Path) -> Result<Matrix> {
    match MatrixFormat::from_path(path) {
        Some(MatrixFormat::Csv) => read_csv(path),
        Some(MatrixFormat::Dmx) => read_dmx(path),
        None => Err(DmacError::Load {
            path: path.to_path_buf(),
            reason: "view files must end in .csv or .dmx".into(),
        }),
    }
}

pub fn write_matrix(path: &Path, x: &Matrix) -> Result<()> {
    match MatrixFormat::from_path(path) {
        Some(MatrixFormat::Csv) => write_csv(path, x),
        Some(MatrixFormat::Dmx) => write_dmx(path, x),
        None => Err(DmacError::Argument(format!(
            "cannot infer matrix format of {}",
            path.display()
        ))),
    }
}

pub fn write_labels(path: &Path, labels: &[usize]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for l in labels {
        writeln!(w, "{l}")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_labels(path: &Path) -> Result<Vec<usize>> {
    let f = File::open(path).map_err(|e| DmacError::Load {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(f).lines().enumerate() {
        let line = line?;
        let t = line.trim();
        if t.is_empty() {
            continue;
        }
        out.push(t.parse().map_err(|e| DmacError::Load {
            path: path.to_path_buf(),
            reason: format!("line {}: {e}", i + 1),
        })?);
    }
    Ok(out)
}

/// Writes `dataset` as a directory; `normalize` is recorded in the manifest
/// and applied on load, not here.
pub fn save_dataset(
    dataset: &MultiViewDataset,
    dir: &Path,
    format: MatrixFormat,
    normalize: bool,
) -> Result<Manifest> {
    fs::create_dir_all(dir)?;
    let views: Vec<String> = (0..dataset.v())
        .map(|a| format!("view{a}.{}", format.extension()))
        .collect();
    for (name, x) in views.iter().zip(dataset.views()) {
        write_matrix(&dir.join(name), x)?;
    }
    let labels = match dataset.labels() {
        Some(l) => {
            write_labels(&dir.join(LABELS_FILE), l)?;
            Some(LABELS_FILE.to_string())
        }
        None => None,
    };
    let manifest = Manifest {
        n: dataset.n(),
        v: dataset.v(),
        c: dataset.c(),
        views,
        normalize,
        labels,
    };
    let mut text = serde_json::to_string_pretty(&manifest)?;
    text.push('\n');
    fs::write(dir.join(MANIFEST_FILE), text)?;
    Ok(manifest)
}

/// Reads and validates a dataset directory, normalizing rows if the manifest asks.
pub fn load_dataset(dir: &Path) -> Result<MultiViewDataset> {
    let load_err = |path: PathBuf, reason: String| DmacError::Load { path, reason };
    let manifest_path = dir.join(MANIFEST_FILE);
    let text = fs::read_to_string(&manifest_path)
        .map_err(|e| load_err(manifest_path.clone(), e.to_string()))?;
    let manifest: Manifest = serde_json::from_str(&text)
        .map_err(|e| load_err(manifest_path.clone(), e.to_string()))?;
    if manifest.views.len() != manifest.v {
        return Err(load_err(
            manifest_path,
            format!(
                "manifest lists {} view files but v = {}",
                manifest.views.len(),
                manifest.v
            ),
        ));
    }

    let mut views = Vec::with_capacity(manifest.v);
    for name in &manifest.views {
        let path = dir.join(name);
        if !path.exists() {
            return Err(load_err(path, "missing view file".into()));
        }
        let x = read_matrix(&path)?;
        if x.rows() != manifest.n {
            return Err(load_err(
                path,
                format!(
                    "row-count mismatch: {} rows but manifest says n = {}",
                    x.rows(),
                    manifest.n
                ),
            ));
        }
        views.push(x);
    }

    let labels = match &manifest.labels {
        Some(name) => {
            let path = dir.join(name);
            let l = read_labels(&path)?;
            if l.len() != manifest.n {
                return Err(load_err(
                    path,
                    format!("{} labels for n = {}", l.len(), manifest.n),
                ));
            }
            if let Some(bad) = l.iter().find(|&&x| x >= manifest.c) {
                return Err(load_err(
                    path,
                    format!("label {bad} out of range for c = {}", manifest.c),
                ));
            }
            Some(l)
        }
        None => None,
    };

    let ds = MultiViewDataset::new(views, labels, manifest.c)
        .map_err(|e| load_err(manifest_path, e.to_string()))?;
    Ok(if manifest.normalize {
        ds.normalized().0
    } else {
        ds
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn normalize_examples() {
        let x = Matrix::from_rows(&[[3.0, 4.0], [0.0, 0.0], [0.6, 0.8]]).unwrap();
        let r = l2_normalize_rows(&x);
        assert_eq!(r.matrix.row(0), &[0.6, 0.8]);
        assert_eq!(r.matrix.row(1), &[0.0, 0.0]);
        assert_eq!(r.zero_rows, vec![1]);
        for (a, b) in r.matrix.row(2).iter().zip(x.row(2)) {
            assert!((a - b).abs() <= 1e-15);
        }
    }

    proptest! {
        #[test]
        fn normalized_rows_have_unit_norm(
            rows in prop::collection::vec(prop::collection::vec(-1e3f64..1e3, 4), 1..20)
        ) {
            let x = Matrix::from_rows(&rows).unwrap();
            let r = l2_normalize_rows(&x);
            for (i, row) in r.matrix.row_iter().enumerate() {
                let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
                if r.zero_rows.contains(&i) {
                    prop_assert_eq!(norm, 0.0);
                } else {
                    prop_assert!((norm - 1.0).abs() <= 1e-12);
                }
            }
        }
    }

    #[test]
    fn synthetic_is_deterministic() {
        let spec = SyntheticSpec::blobs(50, 2, 3, 7);
        assert_eq!(
            generate_synthetic(&spec).unwrap(),
            generate_synthetic(&spec).unwrap()
        );
    }

    #[test]
    fn zero_noise_gives_identical_cluster_members() {
        let mut spec = SyntheticSpec::blobs(30, 2, 3, 1);
        spec.noise = 0.0;
        let ds = generate_synthetic(&spec).unwrap();
        let labels = ds.labels().unwrap();
        for x in ds.views() {
            for i in 0..30 {
                for j in 0..30 {
                    if labels[i] == labels[j] {
                        assert_eq!(x.row(i), x.row(j));
                    }
                }
            }
        }
    }

    #[test]
    fn dataset_rejects_inconsistent_views_and_labels() {
        let a = Matrix::zeros(10, 2);
        let b = Matrix::zeros(11, 2);
        assert!(MultiViewDataset::new(vec![a.clone(), b], None, 2).is_err());
        assert!(MultiViewDataset::new(vec![a.clone()], Some(vec![2; 10]), 2).is_err());
        assert!(MultiViewDataset::new(vec![a], None, 1).is_err());
    }
}
