//! Lloyd's k-means on video mean-AV points with k-means++ seeding.

use rand::Rng;

use super::{ClusterMethod, Clustering, VideoDescriptor};
use crate::dataset::AVSample;
use crate::error::{Error, Result};
use crate::seed::{StreamRng, StreamSeed};

pub const MAX_LLOYD_ITERATIONS: usize = 100;

/// Inertia after every assignment step, plus the final state.
#[derive(Debug, Clone)]
pub struct KMeansTrace {
    pub inertia: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

fn nearest(p: &AVSample, centroids: &[AVSample]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (i, c) in centroids.iter().enumerate() {
        let d = p.distance_squared(c);
        if d < best.1 {
            best = (i, d);
        }
    }
    best
}

fn assign(points: &[AVSample], centroids: &[AVSample]) -> (Vec<usize>, f64) {
    let mut inertia = 0.0;
    let labels = points
        .iter()
        .map(|p| {
            let (i, d) = nearest(p, centroids);
            inertia += d;
            i
        })
        .collect();
    (labels, inertia)
}

fn plus_plus_init(points: &[AVSample], k: usize, rng: &mut StreamRng) -> Vec<AVSample> {
    let mut centroids = Vec::with_capacity(k);
    centroids.push(points[rng.random_range(0..points.len())]);
    let mut d2: Vec<f64> = points
        .iter()
        .map(|p| p.distance_squared(&centroids[0]))
        .collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut u = rng.random::<f64>() * total;
            let mut chosen = points.len() - 1;
            for (i, &w) in d2.iter().enumerate() {
                if w > 0.0 && u < w {
                    chosen = i;
                    break;
                }
                u -= w;
            }
            // Rounding can walk past the end; fall back to the last positive weight.
            if d2[chosen] == 0.0 {
                chosen = d2.iter().rposition(|&w| w > 0.0).expect("total > 0");
            }
            chosen
        } else {
            rng.random_range(0..points.len())
        };
        let c = points[pick];
        for (w, p) in d2.iter_mut().zip(points) {
            *w = w.min(p.distance_squared(&c));
        }
        centroids.push(c);
    }
    centroids
}

fn update_centroids(points: &[AVSample], labels: &[usize], centroids: &mut [AVSample]) {
    let k = centroids.len();
    let mut sums = vec![(0.0, 0.0, 0usize); k];
    for (p, &l) in points.iter().zip(labels) {
        sums[l].0 += p.arousal;
        sums[l].1 += p.valence;
        sums[l].2 += 1;
    }
    let mut empty = Vec::new();
    for (c, (sa, sv, n)) in centroids.iter_mut().zip(&sums) {
        if *n > 0 {
            *c = AVSample::new(sa / *n as f64, sv / *n as f64);
        }
    }
    for (i, s) in sums.iter().enumerate() {
        if s.2 == 0 {
            empty.push(i);
        }
    }
    // Reseed each empty cluster at the point farthest from its nearest centroid.
    for e in empty {
        let mut far = (0, -1.0);
        for (i, p) in points.iter().enumerate() {
            let d = nearest(p, centroids).1;
            if d > far.1 {
                far = (i, d);
            }
        }
        centroids[e] = points[far.0];
    }
}

/// Runs k-means and returns the clustering together with its inertia trace.
pub fn kmeans_with_trace(
    descs: &[VideoDescriptor],
    k: usize,
    seed: u64,
) -> Result<(Clustering, KMeansTrace)> {
    if k == 0 {
        return Err(Error::Config("k-means needs K >= 1".into()));
    }
    if k > descs.len() {
        return Err(Error::Config(format!(
            "k-means K = {k} exceeds the number of videos ({})",
            descs.len()
        )));
    }
    let points: Vec<AVSample> = descs.iter().map(|d| d.mean_av).collect();
    let mut rng = StreamSeed::new(seed).with_str("kmeans").rng();
    let mut centroids = plus_plus_init(&points, k, &mut rng);

    let (mut labels, inertia) = assign(&points, &centroids);
    let mut trace = KMeansTrace {
        inertia: vec![inertia],
        iterations: 0,
        converged: false,
    };
    while trace.iterations < MAX_LLOYD_ITERATIONS {
        trace.iterations += 1;
        update_centroids(&points, &labels, &mut centroids);
        let (next, inertia) = assign(&points, &centroids);
        trace.inertia.push(inertia);
        let stable = next == labels;
        labels = next;
        if stable {
            trace.converged = true;
            break;
        }
    }
    let clustering = Clustering::from_labels(ClusterMethod::Kmeans, descs, &labels, centroids)?;
    Ok((clustering, trace))
}

/// Lloyd's algorithm on the videos' mean AV values.
///
/// Deterministic in `(descs order, k, seed)`.
pub fn kmeans_cluster(descs: &[VideoDescriptor], k: usize, seed: u64) -> Result<Clustering> {
    kmeans_with_trace(descs, k, seed).map(|(c, _)| c)
}
