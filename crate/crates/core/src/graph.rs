//! Affinity graphs and normalized spectral clustering.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng as _;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::rng::{self, tag};
use crate::solvers::CoefficientMatrix;

/// Symmetric nonnegative weight matrix with cached degrees.
#[derive(Debug, Clone, PartialEq)]
pub struct AffinityGraph {
    weights: DMatrix<f64>,
    degrees: DVector<f64>,
}

impl AffinityGraph {
    /// Wraps an existing weight matrix. It must be square, finite,
    /// nonnegative and exactly symmetric.
    pub fn from_weights(weights: DMatrix<f64>) -> Result<Self> {
        if !weights.is_square() || weights.nrows() < 1 {
            return Err(Error::shape("affinity matrix must be square and nonempty"));
        }
        let n = weights.nrows();
        for c in 0..n {
            for r in 0..n {
                let v = weights[(r, c)];
                if !v.is_finite() || v < 0.0 {
                    return Err(Error::param(format!("affinity entry ({r}, {c}) = {v} is not a finite nonnegative value")));
                }
                if v != weights[(c, r)] {
                    return Err(Error::param("affinity matrix is not symmetric"));
                }
            }
        }
        let degrees = DVector::from_iterator(n, weights.row_iter().map(|r| r.sum()));
        Ok(AffinityGraph { weights, degrees })
    }

    pub fn weights(&self) -> &DMatrix<f64> {
        &self.weights
    }

    pub fn degrees(&self) -> &DVector<f64> {
        &self.degrees
    }

    pub fn len(&self) -> usize {
        self.weights.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// `I − D^(−½) W D^(−½)`, with `D^(−½) = 0` at isolated vertices.
    pub fn normalized_laplacian(&self) -> DMatrix<f64> {
        let n = self.len();
        let inv_root = self.degrees.map(|d| if d > 0.0 { 1.0 / d.sqrt() } else { 0.0 });
        let mut l = DMatrix::from_fn(n, n, |r, c| -inv_root[r] * self.weights[(r, c)] * inv_root[c]);
        for i in 0..n {
            l[(i, i)] += 1.0;
        }
        l
    }
}

impl From<&CoefficientMatrix> for AffinityGraph {
    fn from(z: &CoefficientMatrix) -> Self {
        build_affinity(z)
    }
}

/// `W = (|Z| + |Zᵀ|) / 2`.
pub fn build_affinity(z: &CoefficientMatrix) -> AffinityGraph {
    let z = z.values();
    let n = z.nrows();
    let weights = DMatrix::from_fn(n, n, |r, c| {
        // same operand order for (r, c) and (c, r) so W is bit-symmetric
        let (a, b) = if r <= c { (z[(r, c)], z[(c, r)]) } else { (z[(c, r)], z[(r, c)]) };
        (a.abs() + b.abs()) / 2.0
    });
    let degrees = DVector::from_iterator(n, weights.row_iter().map(|r| r.sum()));
    AffinityGraph { weights, degrees }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralEmbedding {
    /// `n × k`, rows normalized to unit length (zero rows stay zero).
    pub embedding: DMatrix<f64>,
    /// All `n` eigenvalues of the normalized Laplacian, ascending.
    pub eigenvalues: DVector<f64>,
    /// Vertices with zero degree.
    pub isolated: Vec<usize>,
    /// Raised when some vertex is isolated or some embedding row is zero.
    pub degenerate: bool,
}

pub fn spectral_embed(graph: &AffinityGraph, k: usize) -> Result<SpectralEmbedding> {
    let n = graph.len();
    if k < 2 || k > n {
        return Err(Error::param(format!("k must be in 2..={n}, got {k}")));
    }
    let eig = SymmetricEigen::new(graph.normalized_laplacian());
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]).then(a.cmp(&b)));
    let eigenvalues = DVector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
    let mut embedding = DMatrix::from_fn(n, k, |r, c| eig.eigenvectors[(r, order[c])]);
    let mut zero_row = false;
    for mut row in embedding.row_iter_mut() {
        let norm = row.norm();
        if norm > 0.0 {
            row /= norm;
        } else {
            zero_row = true;
        }
    }
    let isolated: Vec<usize> = (0..n).filter(|&i| graph.degrees[i] <= 0.0).collect();
    Ok(SpectralEmbedding {
        embedding,
        eigenvalues,
        degenerate: zero_row || !isolated.is_empty(),
        isolated,
    })
}

/// Integer cluster assignment with labels in `0..k`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ClusterLabels {
    labels: Vec<usize>,
    k: usize,
}

impl ClusterLabels {
    pub fn new(labels: Vec<usize>, k: usize) -> Result<Self> {
        if k == 0 || labels.len() < k {
            return Err(Error::InvalidLabels(format!("need 1 <= k <= n, got k={k}, n={}", labels.len())));
        }
        if let Some(bad) = labels.iter().find(|&&l| l >= k) {
            return Err(Error::InvalidLabels(format!("label {bad} is not below k={k}")));
        }
        Ok(ClusterLabels { labels, k })
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn into_labels(self) -> Vec<usize> {
        self.labels
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KmeansOptions {
    pub restarts: usize,
    pub max_iter: usize,
}

impl Default for KmeansOptions {
    fn default() -> Self {
        KmeansOptions {
            restarts: 20,
            max_iter: 300,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KmeansResult {
    pub labels: ClusterLabels,
    /// Within-cluster sum of squares of the winning restart.
    pub wcss: f64,
    pub restart: usize,
}

/// k-means on the rows of `points` with the default iteration cap.
pub fn kmeans(points: &DMatrix<f64>, k: usize, restarts: usize, seed: u64) -> Result<ClusterLabels> {
    let opts = KmeansOptions {
        restarts,
        ..KmeansOptions::default()
    };
    Ok(kmeans_with(points, k, &opts, seed)?.labels)
}

/// Best of `restarts` k-means++ / Lloyd runs, chosen by (WCSS, restart index).
pub fn kmeans_with(points: &DMatrix<f64>, k: usize, opts: &KmeansOptions, seed: u64) -> Result<KmeansResult> {
    let n = points.nrows();
    if opts.restarts == 0 || opts.max_iter == 0 {
        return Err(Error::param("k-means needs at least one restart and one iteration"));
    }
    if k == 0 || k > n {
        return Err(Error::param(format!("k must be in 1..={n}, got {k}")));
    }
    if points.iter().any(|v| !v.is_finite()) {
        return Err(Error::param("k-means points must be finite"));
    }
    let rows: Vec<Vec<f64>> = points.row_iter().map(|r| r.iter().copied().collect()).collect();
    let runs: Vec<(f64, Vec<usize>)> = (0..opts.restarts)
        .into_par_iter()
        .map(|restart| {
            let mut rng = rng::stream(seed, restart as u64, tag::KMEANS);
            lloyd(&rows, k, opts.max_iter, &mut rng)
        })
        .collect();
    let (restart, (wcss, labels)) = runs
        .into_iter()
        .enumerate()
        .min_by(|(i, a), (j, b)| a.0.total_cmp(&b.0).then(i.cmp(j)))
        .expect("at least one restart");
    Ok(KmeansResult {
        labels: ClusterLabels::new(first_appearance_order(&labels), k)?,
        wcss,
        restart,
    })
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn seed_centers(rows: &[Vec<f64>], k: usize, rng: &mut rng::Rng) -> Vec<Vec<f64>> {
    let n = rows.len();
    let mut centers = vec![rows[rng.random_range(0..n)].clone()];
    let mut nearest: Vec<f64> = rows.iter().map(|r| sq_dist(r, &centers[0])).collect();
    while centers.len() < k {
        let total: f64 = nearest.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.random_range(0.0..total);
            let mut chosen = n - 1;
            for (i, &w) in nearest.iter().enumerate() {
                if target < w {
                    chosen = i;
                    break;
                }
                target -= w;
            }
            chosen
        } else {
            rng.random_range(0..n)
        };
        centers.push(rows[pick].clone());
        for (i, r) in rows.iter().enumerate() {
            nearest[i] = nearest[i].min(sq_dist(r, &centers[centers.len() - 1]));
        }
    }
    centers
}

fn assign(rows: &[Vec<f64>], centers: &[Vec<f64>]) -> (Vec<usize>, Vec<f64>) {
    rows.iter()
        .map(|r| {
            let mut best = (0, f64::INFINITY);
            for (c, center) in centers.iter().enumerate() {
                let d = sq_dist(r, center);
                if d < best.1 {
                    best = (c, d);
                }
            }
            best
        })
        .unzip()
}

fn lloyd(rows: &[Vec<f64>], k: usize, max_iter: usize, rng: &mut rng::Rng) -> (f64, Vec<usize>) {
    let dim = rows[0].len();
    let mut centers = seed_centers(rows, k, rng);
    let (mut labels, mut dists) = assign(rows, &centers);
    for _ in 0..max_iter {
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (r, &l) in rows.iter().zip(&labels) {
            counts[l] += 1;
            for (s, v) in sums[l].iter_mut().zip(r) {
                *s += v;
            }
        }
        for c in 0..k {
            if counts[c] > 0 {
                centers[c] = sums[c].iter().map(|s| s / counts[c] as f64).collect();
            } else {
                // reseed from the point farthest from its current center
                let far = (0..rows.len())
                    .max_by(|&a, &b| dists[a].total_cmp(&dists[b]).then(b.cmp(&a)))
                    .expect("nonempty");
                centers[c] = rows[far].clone();
                dists[far] = 0.0;
            }
        }
        let (next, next_dists) = assign(rows, &centers);
        let changed = next != labels;
        labels = next;
        dists = next_dists;
        if !changed {
            break;
        }
    }
    (dists.iter().sum(), labels)
}

fn first_appearance_order(labels: &[usize]) -> Vec<usize> {
    let mut map = std::collections::HashMap::new();
    labels
        .iter()
        .map(|&l| {
            let next = map.len();
            *map.entry(l).or_insert(next)
        })
        .collect()
}

/// Normalized-cut clustering: spectral embedding of the affinity graph
/// followed by k-means on the embedded rows.
pub fn ncut_cluster(graph: &AffinityGraph, k: usize, seed: u64) -> Result<ClusterLabels> {
    let emb = spectral_embed(graph, k)?;
    kmeans(&emb.embedding, k, KmeansOptions::default().restarts, seed)
}
