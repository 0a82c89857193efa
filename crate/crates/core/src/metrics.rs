//! Clustering accuracy under the best label matching, and (normalized)
//! mutual information in bits.

use std::collections::BTreeMap;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub accuracy: f64,
    pub nmi: f64,
    pub mi: f64,
    /// `(predicted label, true label)` pairs chosen by the assignment.
    pub mapping: Vec<(usize, usize)>,
}

fn check_lengths(y: &[usize], p: &[usize]) -> Result<()> {
    if y.len() != p.len() {
        return Err(Error::InvalidLabels(format!(
            "label vectors differ in length: {} vs {}",
            y.len(),
            p.len()
        )));
    }
    if y.is_empty() {
        return Err(Error::InvalidLabels("label vectors are empty".into()));
    }
    Ok(())
}

/// Maps arbitrary label ids to `0..k` in increasing id order.
fn compress(labels: &[usize]) -> (Vec<usize>, Vec<usize>) {
    let ids: BTreeMap<usize, usize> = labels.iter().map(|&l| (l, 0)).collect();
    let originals: Vec<usize> = ids.keys().copied().collect();
    let index: BTreeMap<usize, usize> = originals.iter().enumerate().map(|(i, &l)| (l, i)).collect();
    (labels.iter().map(|l| index[l]).collect(), originals)
}

fn contingency(y: &[usize], p: &[usize]) -> (Vec<Vec<usize>>, Vec<usize>, Vec<usize>) {
    let (yc, y_ids) = compress(y);
    let (pc, p_ids) = compress(p);
    let mut table = vec![vec![0usize; p_ids.len()]; y_ids.len()];
    for (&a, &b) in yc.iter().zip(&pc) {
        table[a][b] += 1;
    }
    (table, y_ids, p_ids)
}

/// Fraction of points whose predicted cluster maps to their true class
/// under the best one-to-one matching of cluster ids to class ids.
pub fn accuracy(y: &[usize], p: &[usize]) -> Result<(f64, Vec<(usize, usize)>)> {
    check_lengths(y, p)?;
    let (table, y_ids, p_ids) = contingency(y, p);
    let size = y_ids.len().max(p_ids.len());
    // cost[pred][true] = −matches, zero-padded to square
    let cost: Vec<Vec<i64>> = (0..size)
        .map(|j| {
            (0..size)
                .map(|i| {
                    if i < y_ids.len() && j < p_ids.len() {
                        -(table[i][j] as i64)
                    } else {
                        0
                    }
                })
                .collect()
        })
        .collect();
    let assignment = hungarian(&cost);
    let mut matched = 0usize;
    let mut mapping = Vec::new();
    for (j, &i) in assignment.iter().enumerate() {
        if j < p_ids.len() && i < y_ids.len() {
            matched += table[i][j];
            mapping.push((p_ids[j], y_ids[i]));
        }
    }
    Ok((matched as f64 / y.len() as f64, mapping))
}

/// Minimum-cost perfect assignment on a square matrix (shortest augmenting
/// paths with potentials, O(n³)). Returns `row -> column`.
fn hungarian(cost: &[Vec<i64>]) -> Vec<usize> {
    let n = cost.len();
    // 1-based arrays; column 0 is the virtual source
    let mut u = vec![0i64; n + 1];
    let mut v = vec![0i64; n + 1];
    let mut owner = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for row in 1..=n {
        owner[0] = row;
        let mut col0 = 0usize;
        let mut minv = vec![i64::MAX; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[col0] = true;
            let r0 = owner[col0];
            let mut delta = i64::MAX;
            let mut col1 = 0usize;
            for col in 1..=n {
                if used[col] {
                    continue;
                }
                let cur = cost[r0 - 1][col - 1] - u[r0] - v[col];
                if cur < minv[col] {
                    minv[col] = cur;
                    way[col] = col0;
                }
                if minv[col] < delta {
                    delta = minv[col];
                    col1 = col;
                }
            }
            for col in 0..=n {
                if used[col] {
                    u[owner[col]] += delta;
                    v[col] -= delta;
                } else {
                    minv[col] -= delta;
                }
            }
            col0 = col1;
            if owner[col0] == 0 {
                break;
            }
        }
        loop {
            let col1 = way[col0];
            owner[col0] = owner[col1];
            col0 = col1;
            if col0 == 0 {
                break;
            }
        }
    }
    let mut result = vec![0usize; n];
    for col in 1..=n {
        result[owner[col] - 1] = col - 1;
    }
    result
}

/// Entropy in bits of a count vector. Counts are summed in sorted order so
/// equal multisets of counts give bit-identical entropies.
fn count_entropy(mut counts: Vec<usize>, n: f64) -> f64 {
    counts.retain(|&c| c > 0);
    counts.sort_unstable();
    let h: f64 = counts
        .into_iter()
        .map(|c| {
            let p = c as f64 / n;
            -p * p.log2()
        })
        .sum();
    h.max(0.0)
}

/// Shannon entropy of a labeling, in bits.
pub fn entropy(labels: &[usize]) -> Result<f64> {
    if labels.is_empty() {
        return Err(Error::InvalidLabels("label vector is empty".into()));
    }
    let mut counts = BTreeMap::new();
    for &l in labels {
        *counts.entry(l).or_insert(0usize) += 1;
    }
    Ok(count_entropy(counts.into_values().collect(), labels.len() as f64))
}

/// Mutual information in bits, as `H(y) + H(p) − H(y, p)`.
pub fn mutual_information(y: &[usize], p: &[usize]) -> Result<f64> {
    check_lengths(y, p)?;
    let (table, _, _) = contingency(y, p);
    let joint: Vec<usize> = table.iter().flatten().copied().collect();
    let h_joint = count_entropy(joint, y.len() as f64);
    Ok((entropy(y)? + entropy(p)? - h_joint).max(0.0))
}

/// `MI / max(H(y), H(p))`. When both labelings are constant the ratio is
/// undefined; it is taken as 1 (they are the same partition).
pub fn nmi(y: &[usize], p: &[usize]) -> Result<f64> {
    check_lengths(y, p)?;
    let denom = entropy(y)?.max(entropy(p)?);
    if denom == 0.0 {
        // both constant: a single block each, hence equal as partitions
        return Ok(1.0);
    }
    Ok((mutual_information(y, p)? / denom).clamp(0.0, 1.0))
}

pub fn evaluate(y: &[usize], p: &[usize]) -> Result<EvalReport> {
    let (accuracy, mapping) = accuracy(y, p)?;
    Ok(EvalReport {
        accuracy,
        nmi: nmi(y, p)?,
        mi: mutual_information(y, p)?,
        mapping,
    })
}
