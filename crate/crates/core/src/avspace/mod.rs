//! Arousal–valence space analysis: per-video descriptors, clustering of
//! video means, occupancy statistics and a grid index over frame labels.

mod frame_index;
mod kmeans;

pub use frame_index::{FrameHit, FrameIndex};
pub use kmeans::{kmeans_cluster, kmeans_with_trace, KMeansTrace, MAX_LLOYD_ITERATIONS};

use std::collections::BTreeMap;
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{AVSample, VideoRecord, N_COEFFS};
use crate::error::{Error, Result};

/// Summary of one video.
#[derive(Debug, Clone, PartialEq)]
pub struct VideoDescriptor {
    pub video_id: String,
    pub mean_av: AVSample,
    pub coeff_mean: [f64; N_COEFFS],
    /// Population variance per dimension.
    pub coeff_var: [f64; N_COEFFS],
}

impl VideoDescriptor {
    /// `[coeff_mean ‖ coeff_var]`, the 100-dim vector used for similarity.
    pub fn feature_vector(&self) -> [f64; 2 * N_COEFFS] {
        let mut out = [0.0; 2 * N_COEFFS];
        out[..N_COEFFS].copy_from_slice(&self.coeff_mean);
        out[N_COEFFS..].copy_from_slice(&self.coeff_var);
        out
    }

    pub fn feature_distance_squared(&self, other: &VideoDescriptor) -> f64 {
        let m: f64 = self
            .coeff_mean
            .iter()
            .zip(&other.coeff_mean)
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        let v: f64 = self
            .coeff_var
            .iter()
            .zip(&other.coeff_var)
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        m + v
    }
}

pub fn video_stats(v: &VideoRecord) -> Result<VideoDescriptor> {
    if v.is_empty() || v.labels.is_empty() {
        return Err(Error::EmptyVideo(v.id.clone()));
    }
    let n = v.len() as f64;
    let (sa, sv) = v
        .labels
        .iter()
        .fold((0.0, 0.0), |(a, b), l| (a + l.arousal, b + l.valence));
    let mean_av = AVSample::new(
        (sa / v.labels.len() as f64).clamp(-1.0, 1.0),
        (sv / v.labels.len() as f64).clamp(-1.0, 1.0),
    );

    let mut coeff_mean = [0.0; N_COEFFS];
    for f in &v.frames {
        for (m, c) in coeff_mean.iter_mut().zip(&f.0) {
            *m += c;
        }
    }
    coeff_mean.iter_mut().for_each(|m| *m /= n);

    let mut coeff_var = [0.0; N_COEFFS];
    for f in &v.frames {
        for d in 0..N_COEFFS {
            let dev = f[d] - coeff_mean[d];
            coeff_var[d] += dev * dev;
        }
    }
    coeff_var.iter_mut().for_each(|s| *s /= n);

    Ok(VideoDescriptor {
        video_id: v.id.clone(),
        mean_av,
        coeff_mean,
        coeff_var,
    })
}

/// Descriptors for every video, in input order.
pub fn describe_all(videos: &[&VideoRecord]) -> Result<Vec<VideoDescriptor>> {
    videos.par_iter().map(|v| video_stats(v)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClusterMethod {
    Kmeans,
    Kbin,
}

impl fmt::Display for ClusterMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ClusterMethod::Kmeans => "kmeans",
            ClusterMethod::Kbin => "kbin",
        })
    }
}

/// Assignment of videos to AV-plane clusters.
#[derive(Debug, Clone, PartialEq)]
pub struct Clustering {
    pub method: ClusterMethod,
    pub k: usize,
    pub assignment: BTreeMap<String, usize>,
    pub centroids: Vec<AVSample>,
    pub occupancy: Vec<usize>,
}

impl Clustering {
    pub(crate) fn from_labels(
        method: ClusterMethod,
        descs: &[VideoDescriptor],
        labels: &[usize],
        centroids: Vec<AVSample>,
    ) -> Result<Self> {
        let k = centroids.len();
        let mut occupancy = vec![0; k];
        let mut assignment = BTreeMap::new();
        for (d, &c) in descs.iter().zip(labels) {
            if assignment.insert(d.video_id.clone(), c).is_some() {
                return Err(Error::DuplicateId(d.video_id.clone()));
            }
            occupancy[c] += 1;
        }
        Ok(Clustering {
            method,
            k,
            assignment,
            centroids,
            occupancy,
        })
    }

    pub fn cluster_of(&self, video_id: &str) -> Option<usize> {
        self.assignment.get(video_id).copied()
    }
}

/// Number of bins per axis for a perfect-square `k`.
fn bins_per_axis(k: usize) -> Result<usize> {
    let side = (k as f64).sqrt().round() as usize;
    if k < 4 || side * side != k {
        return Err(Error::Config(format!(
            "K-bin clustering needs a perfect square K >= 4, got {k}"
        )));
    }
    Ok(side)
}

/// Index of the bin containing `x` when `[-1, 1]` is cut into `side`
/// left-closed bins; the top edge belongs to the last bin.
pub fn axis_bin(x: f64, side: usize) -> usize {
    let raw = ((x + 1.0) * side as f64 / 2.0).floor();
    if raw <= 0.0 {
        0
    } else {
        (raw as usize).min(side - 1)
    }
}

/// Row-major cell id of an AV point on a `side × side` grid.
pub fn kbin_cell(p: &AVSample, side: usize) -> usize {
    axis_bin(p.arousal, side) * side + axis_bin(p.valence, side)
}

/// Bins video means on a `√K × √K` grid over `[-1, 1]²`.
pub fn kbin_cluster(descs: &[VideoDescriptor], k: usize) -> Result<Clustering> {
    let side = bins_per_axis(k)?;
    let width = 2.0 / side as f64;
    let center = |i: usize| -1.0 + (i as f64 + 0.5) * width;
    let centroids = (0..k)
        .map(|c| AVSample::new(center(c / side), center(c % side)))
        .collect();
    let labels: Vec<usize> = descs.iter().map(|d| kbin_cell(&d.mean_av, side)).collect();
    Clustering::from_labels(ClusterMethod::Kbin, descs, &labels, centroids)
}

/// Balance summary of a clustering.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OccupancyReport {
    pub counts: Vec<usize>,
    pub min_count: usize,
    /// Natural-log entropy of the occupancy distribution.
    pub entropy: f64,
}

pub fn occupancy_report(c: &Clustering) -> Result<OccupancyReport> {
    occupancy_from_counts(&c.occupancy)
}

pub fn occupancy_from_counts(counts: &[usize]) -> Result<OccupancyReport> {
    let total: usize = counts.iter().sum();
    if total == 0 {
        return Err(Error::Invalid("occupancy report over zero videos".into()));
    }
    let entropy = counts
        .iter()
        .filter(|&&n| n > 0)
        .map(|&n| {
            let p = n as f64 / total as f64;
            -p * p.ln()
        })
        .sum::<f64>()
        .max(0.0);
    Ok(OccupancyReport {
        counts: counts.to_vec(),
        min_count: counts.iter().copied().min().unwrap_or(0),
        entropy,
    })
}

/// Per-frame label histogram on a `side × side` grid, as
/// `counts[a_bin][v_bin]`.
pub fn av_histogram<'a>(
    videos: impl IntoIterator<Item = &'a VideoRecord>,
    side: usize,
) -> Vec<Vec<usize>> {
    let mut h = vec![vec![0; side]; side];
    for v in videos {
        for l in &v.labels {
            h[axis_bin(l.arousal, side)][axis_bin(l.valence, side)] += 1;
        }
    }
    h
}
