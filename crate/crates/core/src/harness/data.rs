//! Synthetic identity clusters, deterministic train/gallery/query splits,
//! and the labeled-feature text format.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use ndarray::Array2;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::HarnessError;

/// Recipe for a synthetic identity-clustered dataset: `num_ids` centroids
/// uniformly distributed on a sphere of radius √`input_dim` (so individual
/// coordinates stay O(1)), each carrying `samples_per_id` Gaussian samples
/// with per-coordinate standard deviation `cluster_spread`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticSpec {
    pub num_ids: usize,
    pub samples_per_id: usize,
    pub input_dim: usize,
    pub cluster_spread: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    /// The desk-scale benchmark: 100 identities × 10 samples in 64
    /// dimensions with spread 0.3.
    fn default() -> Self {
        SyntheticSpec {
            num_ids: 100,
            samples_per_id: 10,
            input_dim: 64,
            cluster_spread: 0.3,
            seed: 1,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.num_ids < 2 {
            return Err(HarnessError::BadSpec(format!(
                "num_ids must be at least 2, got {}",
                self.num_ids
            )));
        }
        if self.samples_per_id < 2 {
            return Err(HarnessError::BadSpec(format!(
                "samples_per_id must be at least 2 so each identity can appear in both query and gallery, got {}",
                self.samples_per_id
            )));
        }
        if self.input_dim == 0 {
            return Err(HarnessError::BadSpec("input_dim must be positive".into()));
        }
        if !(self.cluster_spread.is_finite() && self.cluster_spread >= 0.0) {
            return Err(HarnessError::BadSpec(format!(
                "cluster_spread must be finite and non-negative, got {}",
                self.cluster_spread
            )));
        }
        Ok(())
    }
}

/// Feature rows plus identity labels; row `i` belongs to `labels[i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSet {
    pub features: Array2<f64>,
    pub labels: Vec<usize>,
}

impl LabeledSet {
    pub fn new(features: Array2<f64>, labels: Vec<usize>) -> Result<Self, HarnessError> {
        if features.nrows() != labels.len() {
            return Err(HarnessError::BadSpec(format!(
                "{} feature rows but {} labels",
                features.nrows(),
                labels.len()
            )));
        }
        Ok(LabeledSet { features, labels })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.ncols()
    }

    /// New set holding the given rows, in the given order.
    fn take(&self, indices: &[usize]) -> LabeledSet {
        let dim = self.dim();
        let mut features = Array2::zeros((indices.len(), dim));
        let mut labels = Vec::with_capacity(indices.len());
        for (r, &i) in indices.iter().enumerate() {
            features.row_mut(r).assign(&self.features.row(i));
            labels.push(self.labels[i]);
        }
        LabeledSet { features, labels }
    }
}

/// Disjoint train/gallery/query parts of one dataset. Every identity is
/// present in both gallery and query; `num_classes` is one past the largest
/// label, which is the classifier head size training expects.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSplit {
    pub train: LabeledSet,
    pub gallery: LabeledSet,
    pub query: LabeledSet,
    pub num_classes: usize,
}

/// Generate the clustered dataset and split it per identity, all
/// deterministically from `spec.seed`.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<DatasetSplit, HarnessError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let dim = spec.input_dim;
    let scale = (dim as f64).sqrt();
    let n = spec.num_ids * spec.samples_per_id;
    let mut features = Array2::zeros((n, dim));
    let mut labels = Vec::with_capacity(n);
    for id in 0..spec.num_ids {
        let centroid = loop {
            let v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 1e-12 {
                break v.into_iter().map(|x| x / norm * scale).collect::<Vec<_>>();
            }
        };
        for s in 0..spec.samples_per_id {
            let row = id * spec.samples_per_id + s;
            for c in 0..dim {
                let z: f64 = rng.sample(StandardNormal);
                features[[row, c]] = centroid[c] + spec.cluster_spread * z;
            }
            labels.push(id);
        }
    }
    let split_seed = rng.gen();
    split_per_id(&LabeledSet { features, labels }, split_seed)
}

/// Deterministic per-identity partition: each identity contributes
/// `max(1, n/5)` query samples and `max(1, n/5)` gallery samples; the rest
/// train. Identities need at least 2 samples; with exactly 2 the training
/// part ends up empty (still a valid retrieval benchmark).
pub fn split_per_id(set: &LabeledSet, seed: u64) -> Result<DatasetSplit, HarnessError> {
    let mut by_id: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, &label) in set.labels.iter().enumerate() {
        by_id.entry(label).or_default().push(i);
    }
    if by_id.len() < 2 {
        return Err(HarnessError::BadSpec(format!(
            "need at least 2 identities, got {}",
            by_id.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train_idx = Vec::new();
    let mut gallery_idx = Vec::new();
    let mut query_idx = Vec::new();
    for (id, mut indices) in by_id {
        if indices.len() < 2 {
            return Err(HarnessError::BadSpec(format!(
                "identity {} has {} sample(s); need at least 2",
                id,
                indices.len()
            )));
        }
        indices.shuffle(&mut rng);
        let n = indices.len();
        let n_query = (n / 5).max(1);
        let n_gallery = (n / 5).max(1);
        query_idx.extend_from_slice(&indices[..n_query]);
        gallery_idx.extend_from_slice(&indices[n_query..n_query + n_gallery]);
        train_idx.extend_from_slice(&indices[n_query + n_gallery..]);
    }
    // Keep original row order within each part so output depends on the
    // shuffle only through part membership.
    train_idx.sort_unstable();
    gallery_idx.sort_unstable();
    query_idx.sort_unstable();
    let num_classes = set.labels.iter().copied().max().unwrap_or(0) + 1;
    Ok(DatasetSplit {
        train: set.take(&train_idx),
        gallery: set.take(&gallery_idx),
        query: set.take(&query_idx),
        num_classes,
    })
}

/// Write `set` as UTF-8 text: a `dim=<D>` header, then one
/// `label,v1,...,vD` row per sample. Values print in shortest round-trip
/// form, so save → load reproduces the set exactly.
pub fn save_features(path: &Path, set: &LabeledSet) -> Result<(), HarnessError> {
    let mut out = String::with_capacity(16 * set.len() * (set.dim() + 1));
    writeln!(out, "dim={}", set.dim()).expect("string write");
    for (row, &label) in set.features.rows().into_iter().zip(&set.labels) {
        write!(out, "{label}").expect("string write");
        for v in row.iter() {
            write!(out, ",{v}").expect("string write");
        }
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

/// Parse a feature file produced by [`save_features`] (or by hand). Line
/// numbers in errors are 1-based and count the header.
pub fn load_features(path: &Path) -> Result<LabeledSet, HarnessError> {
    parse_features(&fs::read_to_string(path)?)
}

pub(super) fn parse_features(text: &str) -> Result<LabeledSet, HarnessError> {
    let mut lines = text.lines().enumerate();
    let header = match lines.next() {
        Some((_, h)) => h.trim(),
        None => {
            return Err(HarnessError::ParseError {
                line: 1,
                message: "empty file; expected a dim=<D> header".into(),
            })
        }
    };
    let dim: usize = header
        .strip_prefix("dim=")
        .ok_or_else(|| HarnessError::ParseError {
            line: 1,
            message: format!("expected a dim=<D> header, got {header:?}"),
        })?
        .trim()
        .parse()
        .map_err(|_| HarnessError::ParseError {
            line: 1,
            message: format!("invalid dimension in header {header:?}"),
        })?;
    if dim == 0 {
        return Err(HarnessError::ParseError {
            line: 1,
            message: "dimension must be positive".into(),
        });
    }
    let mut values = Vec::new();
    let mut labels = Vec::new();
    for (i, raw) in lines {
        let line_no = i + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let mut parts = line.split(',');
        let label_text = parts.next().expect("split yields at least one part");
        let label: usize = label_text
            .trim()
            .parse()
            .map_err(|_| HarnessError::ParseError {
                line: line_no,
                message: format!("invalid label {label_text:?}"),
            })?;
        let row: Vec<&str> = parts.collect();
        if row.len() != dim {
            return Err(HarnessError::DimInconsistent {
                line: line_no,
                expected: dim,
                got: row.len(),
            });
        }
        for v in row {
            values.push(v.trim().parse::<f64>().map_err(|_| {
                HarnessError::ParseError {
                    line: line_no,
                    message: format!("invalid value {v:?}"),
                }
            })?);
        }
        labels.push(label);
    }
    let n = labels.len();
    let features =
        Array2::from_shape_vec((n, dim), values).expect("collected exactly n*dim values");
    LabeledSet::new(features, labels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::retrieval::{top_k_accuracy, Gallery, Metric};
    use tempfile::tempdir;

    #[test]
    fn zero_spread_clusters_are_perfectly_retrievable() {
        let spec = SyntheticSpec {
            num_ids: 12,
            samples_per_id: 5,
            input_dim: 16,
            cluster_spread: 0.0,
            seed: 3,
        };
        let split = generate_synthetic(&spec).unwrap();
        let gallery =
            Gallery::new(split.gallery.features.clone(), split.gallery.labels.clone()).unwrap();
        let top1 = top_k_accuracy(
            &gallery,
            &split.query.features,
            &split.query.labels,
            1,
            Metric::L2,
            false,
        )
        .unwrap();
        assert_eq!(top1.accuracy(), 1.0);
        assert_eq!(top1.skipped, 0);
    }

    #[test]
    fn same_spec_and_seed_reproduce_identical_datasets() {
        let spec = SyntheticSpec::default();
        let a = generate_synthetic(&spec).unwrap();
        let b = generate_synthetic(&spec).unwrap();
        assert_eq!(a, b);
        let c = generate_synthetic(&SyntheticSpec { seed: spec.seed + 1, ..spec }).unwrap();
        assert_ne!(a.train.features, c.train.features);
    }

    /// Nearest-centroid on the raw inputs of the default benchmark: with
    /// spread 0.3 against unit-scale centroids the classes are far apart,
    /// so the oracle should be nearly perfect.
    #[test]
    fn default_benchmark_nearest_centroid_oracle() {
        let split = generate_synthetic(&SyntheticSpec::default()).unwrap();
        let dim = split.train.dim();
        let mut sums: BTreeMap<usize, (Vec<f64>, usize)> = BTreeMap::new();
        for (row, &label) in split.train.features.rows().into_iter().zip(&split.train.labels) {
            let entry = sums.entry(label).or_insert_with(|| (vec![0.0; dim], 0));
            for (s, v) in entry.0.iter_mut().zip(row.iter()) {
                *s += v;
            }
            entry.1 += 1;
        }
        let centroids: Vec<(usize, Vec<f64>)> = sums
            .into_iter()
            .map(|(label, (sum, count))| {
                (label, sum.into_iter().map(|s| s / count as f64).collect())
            })
            .collect();
        let mut correct = 0;
        for (row, &label) in split.query.features.rows().into_iter().zip(&split.query.labels) {
            let best = centroids
                .iter()
                .min_by(|a, b| {
                    let da: f64 = a.1.iter().zip(row.iter()).map(|(c, x)| (c - x).powi(2)).sum();
                    let db: f64 = b.1.iter().zip(row.iter()).map(|(c, x)| (c - x).powi(2)).sum();
                    da.total_cmp(&db)
                })
                .expect("non-empty centroid list");
            if best.0 == label {
                correct += 1;
            }
        }
        let accuracy = correct as f64 / split.query.len() as f64;
        assert!(accuracy >= 0.9, "nearest-centroid oracle got {accuracy}");
    }

    #[test]
    fn split_sizes_and_disjointness() {
        let spec = SyntheticSpec {
            num_ids: 7,
            samples_per_id: 10,
            input_dim: 4,
            cluster_spread: 0.5,
            seed: 9,
        };
        let split = generate_synthetic(&spec).unwrap();
        // 10 per id → 2 query + 2 gallery + 6 train.
        assert_eq!(split.query.len(), 14);
        assert_eq!(split.gallery.len(), 14);
        assert_eq!(split.train.len(), 42);
        assert_eq!(split.num_classes, 7);
        for id in 0..7 {
            for part in [&split.train, &split.gallery, &split.query] {
                assert!(part.labels.contains(&id));
            }
        }
        // Disjoint: no identical rows across parts (spread > 0 makes every
        // sample unique with probability 1).
        for qr in split.query.features.rows() {
            for gr in split.gallery.features.rows() {
                assert!(qr.iter().zip(gr.iter()).any(|(a, b)| a != b));
            }
        }
    }

    #[test]
    fn minimal_identities_split_without_train_rows() {
        let set = LabeledSet::new(
            Array2::from_shape_vec((4, 2), vec![0.0, 0.0, 1.0, 1.0, 2.0, 2.0, 3.0, 3.0]).unwrap(),
            vec![0, 0, 1, 1],
        )
        .unwrap();
        let split = split_per_id(&set, 5).unwrap();
        assert_eq!(split.query.len(), 2);
        assert_eq!(split.gallery.len(), 2);
        assert!(split.train.is_empty());
        let lone = LabeledSet::new(Array2::zeros((3, 2)), vec![0, 0, 1]).unwrap();
        assert!(matches!(split_per_id(&lone, 0), Err(HarnessError::BadSpec(_))));
    }

    #[test]
    fn spec_validation_rejects_degenerate_shapes() {
        let ok = SyntheticSpec::default();
        assert!(ok.validate().is_ok());
        for bad in [
            SyntheticSpec { num_ids: 1, ..ok },
            SyntheticSpec { samples_per_id: 1, ..ok },
            SyntheticSpec { input_dim: 0, ..ok },
            SyntheticSpec { cluster_spread: -0.1, ..ok },
            SyntheticSpec { cluster_spread: f64::NAN, ..ok },
        ] {
            assert!(matches!(bad.validate(), Err(HarnessError::BadSpec(_))));
        }
    }

    #[test]
    fn feature_file_roundtrip_is_lossless() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("features.txt");
        let set = LabeledSet::new(
            Array2::from_shape_vec(
                (3, 2),
                vec![0.1, -2.5e-7, std::f64::consts::PI, 1.0 / 3.0, 1e300, -0.0],
            )
            .unwrap(),
            vec![4, 0, 17],
        )
        .unwrap();
        save_features(&path, &set).unwrap();
        let loaded = load_features(&path).unwrap();
        assert_eq!(loaded.labels, set.labels);
        assert_eq!(loaded.features, set.features);
    }

    #[test]
    fn malformed_rows_name_their_line() {
        match parse_features("dim=2\n0,1.0,2.0\nx,3,4\n") {
            Err(HarnessError::ParseError { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected a label parse error, got {other:?}"),
        }
        match parse_features("dim=2\n0,1.0,oops\n") {
            Err(HarnessError::ParseError { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected a value parse error, got {other:?}"),
        }
        match parse_features("") {
            Err(HarnessError::ParseError { line, .. }) => assert_eq!(line, 1),
            other => panic!("expected a header error, got {other:?}"),
        }
        match parse_features("dim=zero\n") {
            Err(HarnessError::ParseError { line, .. }) => assert_eq!(line, 1),
            other => panic!("expected a header error, got {other:?}"),
        }
    }

    #[test]
    fn row_length_mismatch_reports_dim_inconsistent() {
        match parse_features("dim=2\n0,1.0,2.0\n1,3.0,4.0,5.0\n") {
            Err(HarnessError::DimInconsistent { line, expected, got }) => {
                assert_eq!((line, expected, got), (3, 2, 3));
            }
            other => panic!("expected DimInconsistent, got {other:?}"),
        }
    }
}
