//! ReliefF feature ranking and per-group feature subsets.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::{feature_index, FEATURE_NAMES};

#[derive(Debug, Error, PartialEq)]
pub enum SelectionError {
    #[error("dataset is empty")]
    Empty,
    #[error("ReliefF needs at least two classes")]
    SingleClass,
    #[error("class '{class}' has {size} rows, need at least {need}")]
    InsufficientClassSize { class: String, size: usize, need: usize },
    #[error("k = {k} exceeds dimension {dim}")]
    KTooLarge { k: usize, dim: usize },
    #[error("row {row} has dimension {got}, expected {expected}")]
    DimensionMismatch { row: usize, got: usize, expected: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledRow {
    /// Stable identity of the row, e.g. `dialogue/speaker/utterance`.
    pub id: String,
    pub features: Vec<f64>,
    pub label: String,
    pub speaker: String,
    /// Partition key such as speaker gender.
    pub group: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LabeledDataset {
    pub rows: Vec<LabeledRow>,
}

impl LabeledDataset {
    pub fn new(rows: Vec<LabeledRow>) -> Result<Self, SelectionError> {
        if let Some(first) = rows.first() {
            let expected = first.features.len();
            if let Some((row, r)) = rows.iter().enumerate().find(|(_, r)| r.features.len() != expected) {
                return Err(SelectionError::DimensionMismatch {
                    row,
                    got: r.features.len(),
                    expected,
                });
            }
        }
        Ok(Self { rows })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.rows.first().map_or(0, |r| r.features.len())
    }

    /// Labels present, sorted.
    pub fn class_set(&self) -> Vec<String> {
        let mut classes: Vec<String> = self.rows.iter().map(|r| r.label.clone()).collect();
        classes.sort();
        classes.dedup();
        classes
    }
}

/// Ordered feature indices with their weights, best first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSubset {
    pub indices: Vec<usize>,
    pub weights: Vec<f64>,
}

impl FeatureSubset {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.indices.iter().map(|&i| x[i]).collect()
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.indices
            .iter()
            .map(|&i| FEATURE_NAMES.get(i).copied().unwrap_or("?"))
            .collect()
    }

    fn from_names(names: &[&str]) -> Self {
        let n = names.len();
        Self {
            indices: names
                .iter()
                .map(|name| feature_index(name).expect("known feature name"))
                .collect(),
            // rank scores; no measured weights accompany these lists
            weights: (0..n).map(|i| (n - i) as f64 / n as f64).collect(),
        }
    }
}

/// Published top-7 arousal features for male speakers. Formant ranges are
/// not part of the vector, so "range of F2" maps to mean F2.
pub fn arousal_top7_male() -> FeatureSubset {
    FeatureSubset::from_names(&[
        "f2",
        "pitch_range",
        "pitch_max",
        "band_2000_up",
        "voiced_run_max_frames",
        "denergy_std",
        "energy_max",
    ])
}

/// Published top-7 arousal features for female speakers.
pub fn arousal_top7_female() -> FeatureSubset {
    FeatureSubset::from_names(&[
        "pitch_mean",
        "dpitch_range",
        "voiced_run_mean_frames",
        "band_0_200",
        "nonsilent_frame_ratio",
        "pitch_max",
        "energy_max",
    ])
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn fnv1a(s: &str) -> u64 {
    s.bytes()
        .fold(0xcbf2_9ce4_8422_2325, |h, b| (h ^ b as u64).wrapping_mul(0x0100_0000_01b3))
}

/// ReliefF relevance weights, one per feature, each in [-1, 1].
///
/// Features are min-max scaled over the dataset and compared with Manhattan
/// distance. When `n_iters` is below the row count, the sampled rows are
/// chosen by a hash of `seed` and each row's id, so the choice does not
/// depend on row order. Otherwise every row is visited once.
pub fn relieff_weights(data: &LabeledDataset, k_neighbors: usize, n_iters: usize, seed: u64) -> Result<Vec<f64>, SelectionError> {
    if data.is_empty() {
        return Err(SelectionError::Empty);
    }
    let classes = data.class_set();
    if classes.len() < 2 {
        return Err(SelectionError::SingleClass);
    }
    let n = data.len();
    let dim = data.dim();
    let class_of: Vec<usize> = data
        .rows
        .iter()
        .map(|r| classes.binary_search(&r.label).expect("label in class set"))
        .collect();
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); classes.len()];
    for (i, &c) in class_of.iter().enumerate() {
        members[c].push(i);
    }
    for (c, m) in members.iter().enumerate() {
        if m.len() < k_neighbors + 1 {
            return Err(SelectionError::InsufficientClassSize {
                class: classes[c].clone(),
                size: m.len(),
                need: k_neighbors + 1,
            });
        }
    }
    let prior: Vec<f64> = members.iter().map(|m| m.len() as f64 / n as f64).collect();

    let mut lo = vec![f64::INFINITY; dim];
    let mut hi = vec![f64::NEG_INFINITY; dim];
    for r in &data.rows {
        for (f, &v) in r.features.iter().enumerate() {
            lo[f] = lo[f].min(v);
            hi[f] = hi[f].max(v);
        }
    }
    let scaled: Vec<Vec<f64>> = data
        .rows
        .iter()
        .map(|r| {
            r.features
                .iter()
                .enumerate()
                .map(|(f, &v)| if hi[f] > lo[f] { (v - lo[f]) / (hi[f] - lo[f]) } else { 0.0 })
                .collect()
        })
        .collect();

    let sampled: Vec<usize> = if n_iters >= n || n_iters == 0 {
        (0..n).collect()
    } else {
        let mut keyed: Vec<(u64, &str, usize)> = data
            .rows
            .iter()
            .enumerate()
            .map(|(i, r)| (splitmix64(seed ^ fnv1a(&r.id)), r.id.as_str(), i))
            .collect();
        keyed.sort();
        keyed.into_iter().take(n_iters).map(|(_, _, i)| i).collect()
    };

    let m = sampled.len() as f64;
    let k = k_neighbors.max(1);
    let scale = 1.0 / (m * k as f64);
    let mut w = vec![0.0; dim];
    let manhattan = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>();

    for &i in &sampled {
        let ci = class_of[i];
        for (c, rows) in members.iter().enumerate() {
            let mut near: Vec<(f64, &str, usize)> = rows
                .iter()
                .filter(|&&j| j != i)
                .map(|&j| (manhattan(&scaled[i], &scaled[j]), data.rows[j].id.as_str(), j))
                .collect();
            near.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(b.1)).then(a.2.cmp(&b.2)));
            let factor = if c == ci {
                -scale
            } else {
                scale * prior[c] / (1.0 - prior[ci])
            };
            for &(_, _, j) in near.iter().take(k) {
                for (f, wf) in w.iter_mut().enumerate() {
                    *wf += factor * (scaled[i][f] - scaled[j][f]).abs();
                }
            }
        }
    }
    Ok(w)
}

/// The `k` best features; equal weights keep ascending index order.
pub fn select_top_k(weights: &[f64], k: usize) -> Result<FeatureSubset, SelectionError> {
    if k > weights.len() {
        return Err(SelectionError::KTooLarge { k, dim: weights.len() });
    }
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| weights[b].total_cmp(&weights[a]).then(a.cmp(&b)));
    order.truncate(k);
    Ok(FeatureSubset {
        weights: order.iter().map(|&i| weights[i]).collect(),
        indices: order,
    })
}

/// Splits rows by group key, keeping row order within each group.
pub fn partition_by_group(data: &LabeledDataset) -> BTreeMap<String, LabeledDataset> {
    let mut groups: BTreeMap<String, LabeledDataset> = BTreeMap::new();
    for row in &data.rows {
        groups.entry(row.group.clone()).or_default().rows.push(row.clone());
    }
    groups
}
