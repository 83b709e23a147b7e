//! Nearest-neighbor retrieval and its evaluation metrics.
//!
//! A [`Gallery`] holds one feature vector per database item plus an integer
//! identity label. Queries are ranked against it under a chosen [`Metric`],
//! and accuracy is reported as top-k hit rate or mean average precision.
//! Ranking is fully deterministic: ties in distance break toward the lower
//! gallery index.

use ndarray::{Array2, ArrayView1};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum RetrievalError {
    #[error("gallery has {features} feature rows but {labels} labels")]
    MismatchedLengths { features: usize, labels: usize },
    #[error("gallery is empty")]
    EmptyGallery,
    #[error("query has {got} dimensions, gallery stores {expected}")]
    DimMismatch { expected: usize, got: usize },
}

/// Distance used for ranking.
///
/// `L2` orders by squared Euclidean distance (same ordering as Euclidean).
/// `Cosine` orders by `1 − cos(a, b)`; all-zero vectors are treated as
/// orthogonal to everything.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    L2,
    Cosine,
}

impl Metric {
    pub fn distance(self, a: ArrayView1<f64>, b: ArrayView1<f64>) -> f64 {
        match self {
            Metric::L2 => a
                .iter()
                .zip(b.iter())
                .map(|(x, y)| (x - y) * (x - y))
                .sum(),
            Metric::Cosine => {
                let dot: f64 = a.iter().zip(b.iter()).map(|(x, y)| x * y).sum();
                let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
                let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
                if na == 0.0 || nb == 0.0 {
                    1.0
                } else {
                    1.0 - dot / (na * nb)
                }
            }
        }
    }
}

/// Database side of retrieval: row-per-item features and identity labels.
#[derive(Debug, Clone)]
pub struct Gallery {
    features: Array2<f64>,
    labels: Vec<usize>,
}

impl Gallery {
    pub fn new(features: Array2<f64>, labels: Vec<usize>) -> Result<Self, RetrievalError> {
        if features.nrows() != labels.len() {
            return Err(RetrievalError::MismatchedLengths {
                features: features.nrows(),
                labels: labels.len(),
            });
        }
        if features.nrows() == 0 {
            return Err(RetrievalError::EmptyGallery);
        }
        Ok(Gallery { features, labels })
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

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn features(&self) -> &Array2<f64> {
        &self.features
    }
}

/// Gallery indices sorted best-match first. `exclude` drops one index from
/// consideration (used when a query is a corrupted copy of a gallery item).
pub fn rank(
    gallery: &Gallery,
    query: ArrayView1<f64>,
    metric: Metric,
    exclude: Option<usize>,
) -> Result<Vec<usize>, RetrievalError> {
    if query.len() != gallery.dim() {
        return Err(RetrievalError::DimMismatch {
            expected: gallery.dim(),
            got: query.len(),
        });
    }
    let mut order: Vec<(f64, usize)> = gallery
        .features
        .outer_iter()
        .enumerate()
        .filter(|(i, _)| Some(*i) != exclude)
        .map(|(i, row)| (metric.distance(query, row), i))
        .collect();
    order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    Ok(order.into_iter().map(|(_, i)| i).collect())
}

/// Outcome of a top-k evaluation. Queries whose identity does not appear in
/// the (possibly self-excluded) gallery cannot be retrieved and are tallied
/// as `skipped` rather than as misses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TopKResult {
    pub hits: usize,
    pub evaluated: usize,
    pub skipped: usize,
}

impl TopKResult {
    pub fn accuracy(&self) -> f64 {
        if self.evaluated == 0 {
            0.0
        } else {
            self.hits as f64 / self.evaluated as f64
        }
    }
}

/// Fraction of queries whose identity appears among the k nearest gallery
/// items. With `exclude_self`, query row `i` never matches gallery row `i`.
pub fn top_k_accuracy(
    gallery: &Gallery,
    queries: &Array2<f64>,
    query_labels: &[usize],
    k: usize,
    metric: Metric,
    exclude_self: bool,
) -> Result<TopKResult, RetrievalError> {
    if queries.nrows() != query_labels.len() {
        return Err(RetrievalError::MismatchedLengths {
            features: queries.nrows(),
            labels: query_labels.len(),
        });
    }
    let mut result = TopKResult { hits: 0, evaluated: 0, skipped: 0 };
    for (i, query) in queries.outer_iter().enumerate() {
        let exclude = if exclude_self { Some(i) } else { None };
        let label = query_labels[i];
        let reachable = gallery
            .labels
            .iter()
            .enumerate()
            .any(|(j, &l)| l == label && Some(j) != exclude);
        if !reachable {
            result.skipped += 1;
            continue;
        }
        let order = rank(gallery, query, metric, exclude)?;
        result.evaluated += 1;
        if order.iter().take(k).any(|&j| gallery.labels[j] == label) {
            result.hits += 1;
        }
    }
    Ok(result)
}

/// Mean average precision plus the evaluated/skipped tally.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MapResult {
    pub map: f64,
    pub evaluated: usize,
    pub skipped: usize,
}

/// Mean over queries of average precision: for each query, precision at
/// every rank holding a same-identity item, averaged over those ranks.
pub fn mean_average_precision(
    gallery: &Gallery,
    queries: &Array2<f64>,
    query_labels: &[usize],
    metric: Metric,
    exclude_self: bool,
) -> Result<MapResult, RetrievalError> {
    if queries.nrows() != query_labels.len() {
        return Err(RetrievalError::MismatchedLengths {
            features: queries.nrows(),
            labels: query_labels.len(),
        });
    }
    let mut sum = 0.0;
    let mut evaluated = 0;
    let mut skipped = 0;
    for (i, query) in queries.outer_iter().enumerate() {
        let exclude = if exclude_self { Some(i) } else { None };
        let order = rank(gallery, query, metric, exclude)?;
        let label = query_labels[i];
        let mut relevant_seen = 0usize;
        let mut precision_sum = 0.0;
        for (pos, &j) in order.iter().enumerate() {
            if gallery.labels[j] == label {
                relevant_seen += 1;
                precision_sum += relevant_seen as f64 / (pos + 1) as f64;
            }
        }
        if relevant_seen == 0 {
            skipped += 1;
        } else {
            sum += precision_sum / relevant_seen as f64;
            evaluated += 1;
        }
    }
    let map = if evaluated == 0 { 0.0 } else { sum / evaluated as f64 };
    Ok(MapResult { map, evaluated, skipped })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::arr2;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn line_gallery(points: &[(f64, usize)]) -> Gallery {
        let features =
            Array2::from_shape_vec((points.len(), 1), points.iter().map(|p| p.0).collect())
                .unwrap();
        Gallery::new(features, points.iter().map(|p| p.1).collect()).unwrap()
    }

    #[test]
    fn rank_orders_by_distance_with_index_tiebreak() {
        let g = line_gallery(&[(2.0, 0), (0.0, 1), (4.0, 2), (0.0, 3)]);
        let order = rank(&g, ndarray::arr1(&[0.1]).view(), Metric::L2, None).unwrap();
        // 0.0 and 0.0 tie exactly; lower index first.
        assert_eq!(order, vec![1, 3, 0, 2]);
        let order = rank(&g, ndarray::arr1(&[0.1]).view(), Metric::L2, Some(1)).unwrap();
        assert_eq!(order, vec![3, 0, 2]);
    }

    #[test]
    fn cosine_ignores_magnitude() {
        let features = arr2(&[[10.0, 0.0], [0.0, 0.1], [-1.0, 0.0]]);
        let g = Gallery::new(features, vec![0, 1, 2]).unwrap();
        let q = ndarray::arr1(&[0.5, 0.01]);
        let order = rank(&g, q.view(), Metric::Cosine, None).unwrap();
        assert_eq!(order[0], 0); // aligned direction wins despite magnitude
        assert_eq!(order[2], 2); // opposite direction loses
        // Zero vector is maximally distant from everything.
        let zq = ndarray::arr1(&[0.0, 0.0]);
        let d = Metric::Cosine.distance(zq.view(), g.features().row(0));
        assert_eq!(d, 1.0);
    }

    #[test]
    fn top_k_counts_hits_and_skips() {
        let g = line_gallery(&[(0.0, 7), (1.0, 8), (2.0, 7)]);
        let queries = arr2(&[[0.1], [1.1], [5.0]]);
        // Labels: the first two exist in the gallery, label 99 does not.
        let r = top_k_accuracy(&g, &queries, &[7, 8, 99], 1, Metric::L2, false).unwrap();
        assert_eq!(r, TopKResult { hits: 2, evaluated: 2, skipped: 1 });
        assert_eq!(r.accuracy(), 1.0);
        // k=1 misses when the nearest item has the wrong identity.
        let r = top_k_accuracy(&g, &arr2(&[[0.9]]), &[7], 1, Metric::L2, false).unwrap();
        assert_eq!(r, TopKResult { hits: 0, evaluated: 1, skipped: 0 });
        // ...but k=2 reaches the correct one.
        let r = top_k_accuracy(&g, &arr2(&[[0.9]]), &[7], 2, Metric::L2, false).unwrap();
        assert_eq!(r.hits, 1);
    }

    #[test]
    fn exclude_self_forces_cross_item_matches() {
        // Two items per identity; queries are the gallery itself.
        let g = line_gallery(&[(0.0, 0), (0.4, 0), (10.0, 1), (10.4, 1)]);
        let queries = g.features().clone();
        let labels = g.labels().to_vec();
        let with_self = top_k_accuracy(&g, &queries, &labels, 1, Metric::L2, false).unwrap();
        assert_eq!(with_self.hits, 4); // every item finds itself
        let without = top_k_accuracy(&g, &queries, &labels, 1, Metric::L2, true).unwrap();
        assert_eq!(without.hits, 4); // the twin is still nearest
        // A lone identity cannot match anything once itself is excluded.
        let g = line_gallery(&[(0.0, 0), (1.0, 1)]);
        let queries = g.features().clone();
        let labels = g.labels().to_vec();
        let r = top_k_accuracy(&g, &queries, &labels, 1, Metric::L2, true).unwrap();
        assert_eq!(r, TopKResult { hits: 0, evaluated: 0, skipped: 2 });
    }

    #[test]
    fn map_matches_hand_computed_values() {
        // Relevant items land at ranks 1 and 3: AP = (1/1 + 2/3)/2 = 5/6.
        let g = line_gallery(&[(0.0, 5), (1.0, 6), (2.0, 5)]);
        let r =
            mean_average_precision(&g, &arr2(&[[0.1]]), &[5], Metric::L2, false).unwrap();
        assert!((r.map - 5.0 / 6.0).abs() < 1e-12);
        assert_eq!((r.evaluated, r.skipped), (1, 0));

        // Single relevant item at rank 2: AP = 1/2.
        let g = line_gallery(&[(0.0, 6), (1.0, 5)]);
        let r =
            mean_average_precision(&g, &arr2(&[[0.1]]), &[5], Metric::L2, false).unwrap();
        assert!((r.map - 0.5).abs() < 1e-12);

        // Unretrievable identity is skipped, not averaged as zero.
        let r =
            mean_average_precision(&g, &arr2(&[[0.1]]), &[99], Metric::L2, false).unwrap();
        assert_eq!((r.map, r.evaluated, r.skipped), (0.0, 0, 1));
    }

    #[test]
    fn map_is_one_when_all_relevant_items_rank_first() {
        let g = line_gallery(&[(0.0, 0), (0.1, 0), (9.0, 1), (9.1, 1)]);
        let queries = arr2(&[[0.05], [9.05]]);
        let r = mean_average_precision(&g, &queries, &[0, 1], Metric::L2, false).unwrap();
        assert!((r.map - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rank_agrees_with_naive_rescan() {
        let mut rng = ChaCha8Rng::seed_from_u64(404);
        for _ in 0..50 {
            let n = rng.gen_range(1..40);
            let d = rng.gen_range(1..8);
            let features = Array2::from_shape_fn((n, d), |_| rng.gen_range(-3.0..3.0));
            let labels = (0..n).map(|_| rng.gen_range(0..5)).collect();
            let g = Gallery::new(features.clone(), labels).unwrap();
            let query: Vec<f64> = (0..d).map(|_| rng.gen_range(-3.0..3.0)).collect();
            let q = ndarray::Array1::from(query);
            for metric in [Metric::L2, Metric::Cosine] {
                let got = rank(&g, q.view(), metric, None).unwrap();
                let mut naive: Vec<(f64, usize)> = (0..n)
                    .map(|i| (metric.distance(q.view(), features.row(i)), i))
                    .collect();
                naive.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
                let naive: Vec<usize> = naive.into_iter().map(|(_, i)| i).collect();
                assert_eq!(got, naive);
            }
        }
    }

    #[test]
    fn constructor_and_query_errors() {
        assert!(matches!(
            Gallery::new(Array2::zeros((2, 3)), vec![0]),
            Err(RetrievalError::MismatchedLengths { features: 2, labels: 1 })
        ));
        assert!(matches!(
            Gallery::new(Array2::zeros((0, 3)), vec![]),
            Err(RetrievalError::EmptyGallery)
        ));
        let g = Gallery::new(Array2::zeros((1, 3)), vec![0]).unwrap();
        assert!(matches!(
            rank(&g, ndarray::arr1(&[1.0]).view(), Metric::L2, None),
            Err(RetrievalError::DimMismatch { expected: 3, got: 1 })
        ));
    }
}
