//! Uniform-grid index over the AV labels of every frame in a video pool.

use std::cmp::Ordering;

use super::axis_bin;
use crate::dataset::{AVSample, VideoRecord};

#[derive(Debug, Clone, Copy)]
struct Entry {
    video: u32,
    frame: u32,
    label: AVSample,
}

/// Result of a nearest-frame query.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameHit<'a> {
    pub video: &'a VideoRecord,
    pub frame: usize,
    pub distance_squared: f64,
}

/// Grid over `[-1, 1]²` mapping cells to the frames whose labels fall in them.
///
/// Queries return exactly the Euclidean nearest frame; ties go to the lower
/// video id, then the lower frame index.
#[derive(Debug, Clone)]
pub struct FrameIndex<'a> {
    pool: &'a [VideoRecord],
    side: usize,
    /// CSR layout: entries of cell `c` are `entries[offsets[c]..offsets[c + 1]]`.
    offsets: Vec<usize>,
    entries: Vec<Entry>,
}

impl<'a> FrameIndex<'a> {
    pub fn build(pool: &'a [VideoRecord], cells_per_axis: usize) -> Self {
        let side = cells_per_axis.max(1);
        let cell_of = |l: &AVSample| axis_bin(l.arousal, side) * side + axis_bin(l.valence, side);

        let mut counts = vec![0usize; side * side + 1];
        for v in pool {
            for l in &v.labels {
                counts[cell_of(l) + 1] += 1;
            }
        }
        for c in 1..counts.len() {
            counts[c] += counts[c - 1];
        }
        let offsets = counts;
        let mut cursor = offsets.clone();
        let placeholder = Entry {
            video: 0,
            frame: 0,
            label: AVSample::default(),
        };
        let mut entries = vec![placeholder; *offsets.last().unwrap_or(&0)];
        for (vi, v) in pool.iter().enumerate() {
            for (t, l) in v.labels.iter().enumerate() {
                let c = cell_of(l);
                entries[cursor[c]] = Entry {
                    video: vi as u32,
                    frame: t as u32,
                    label: *l,
                };
                cursor[c] += 1;
            }
        }
        FrameIndex {
            pool,
            side,
            offsets,
            entries,
        }
    }

    pub fn pool(&self) -> &'a [VideoRecord] {
        self.pool
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn cells_per_axis(&self) -> usize {
        self.side
    }

    /// `(video index in pool, frame)` of every entry in a cell.
    pub fn cell(&self, a_bin: usize, v_bin: usize) -> impl Iterator<Item = (usize, usize)> + '_ {
        let c = a_bin * self.side + v_bin;
        self.entries[self.offsets[c]..self.offsets[c + 1]]
            .iter()
            .map(|e| (e.video as usize, e.frame as usize))
    }

    fn better(&self, a: &Entry, da: f64, b: &Entry, db: f64) -> bool {
        match da.partial_cmp(&db).unwrap_or(Ordering::Equal) {
            Ordering::Less => true,
            Ordering::Greater => false,
            Ordering::Equal => {
                let (ia, ib) = (
                    &self.pool[a.video as usize].id,
                    &self.pool[b.video as usize].id,
                );
                (ia, a.frame) < (ib, b.frame)
            }
        }
    }

    /// Nearest indexed frame to `q`, or `None` for an empty index.
    pub fn nearest(&self, q: &AVSample) -> Option<FrameHit<'a>> {
        if self.entries.is_empty() {
            return None;
        }
        let side = self.side as isize;
        let width = 2.0 / self.side as f64;
        let qa = axis_bin(q.arousal, self.side) as isize;
        let qv = axis_bin(q.valence, self.side) as isize;

        let mut best: Option<(Entry, f64)> = None;
        for r in 0..side {
            for a in (qa - r)..=(qa + r) {
                for v in (qv - r)..=(qv + r) {
                    let on_ring = (a - qa).abs() == r || (v - qv).abs() == r;
                    if !on_ring || a < 0 || v < 0 || a >= side || v >= side {
                        continue;
                    }
                    let c = (a * side + v) as usize;
                    for e in &self.entries[self.offsets[c]..self.offsets[c + 1]] {
                        let d = e.label.distance_squared(q);
                        let take = match &best {
                            None => true,
                            Some((b, db)) => self.better(e, d, b, *db),
                        };
                        if take {
                            best = Some((*e, d));
                        }
                    }
                }
            }
            // Every unvisited frame lies outside the (2r+1)² block around the
            // query cell, so at least `gap` away from the query.
            if let Some((_, db)) = best {
                let mut gap = f64::INFINITY;
                if qa - r > 0 {
                    gap = gap.min(q.arousal - (-1.0 + (qa - r) as f64 * width));
                }
                if qa + r < side - 1 {
                    gap = gap.min((-1.0 + (qa + r + 1) as f64 * width) - q.arousal);
                }
                if qv - r > 0 {
                    gap = gap.min(q.valence - (-1.0 + (qv - r) as f64 * width));
                }
                if qv + r < side - 1 {
                    gap = gap.min((-1.0 + (qv + r + 1) as f64 * width) - q.valence);
                }
                // Strict, and shrunk by a margin covering bin-edge rounding: an
                // equally distant frame outside may still win the tie-break.
                let gap = gap - 1e-9;
                if gap.is_infinite() || (gap > 0.0 && db < gap * gap) {
                    break;
                }
            }
        }
        best.map(|(e, d)| FrameHit {
            video: &self.pool[e.video as usize],
            frame: e.frame as usize,
            distance_squared: d,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{CoefficientFrame, DEFAULT_FPS};
    use crate::seed::StreamRng;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    fn pool_from(labels: &[Vec<(f64, f64)>]) -> Vec<VideoRecord> {
        labels
            .iter()
            .enumerate()
            .map(|(i, ls)| VideoRecord {
                id: format!("v{i:04}"),
                subject_id: "s".into(),
                fps: DEFAULT_FPS,
                frames: vec![CoefficientFrame::zeros(); ls.len()],
                labels: ls.iter().map(|&(a, v)| AVSample::new(a, v)).collect(),
                provenance: None,
            })
            .collect()
    }

    /// Exhaustive scan with the documented tie-break.
    fn brute_force(pool: &[VideoRecord], q: &AVSample) -> (String, usize, f64) {
        let mut best: Option<(String, usize, f64)> = None;
        for v in pool {
            for (t, l) in v.labels.iter().enumerate() {
                let d = (l.arousal - q.arousal).powi(2) + (l.valence - q.valence).powi(2);
                let better = match &best {
                    None => true,
                    Some((bid, bt, bd)) => d < *bd || (d == *bd && (&v.id, t) < (bid, *bt)),
                };
                if better {
                    best = Some((v.id.clone(), t, d));
                }
            }
        }
        best.unwrap()
    }

    #[test]
    fn exact_hit() {
        let pool = pool_from(&[vec![(0.1, 0.2), (0.3, -0.7)], vec![(0.9, 0.9)]]);
        let idx = FrameIndex::build(&pool, 8);
        let hit = idx.nearest(&AVSample::new(0.3, -0.7)).unwrap();
        assert_eq!(
            (hit.video.id.as_str(), hit.frame, hit.distance_squared),
            ("v0000", 1, 0.0)
        );
        assert_eq!(idx.len(), 3);
    }

    #[test]
    fn equidistant_prefers_lower_video_id() {
        let pool = pool_from(&[vec![(0.5, 0.0)], vec![(-0.5, 0.0)]]);
        // Reverse so the lower id is not first in pool order.
        let pool: Vec<_> = pool.into_iter().rev().collect();
        let idx = FrameIndex::build(&pool, 4);
        let hit = idx.nearest(&AVSample::new(0.0, 0.0)).unwrap();
        assert_eq!(hit.video.id, "v0000");
    }

    #[test]
    fn empty_pool_has_no_nearest() {
        let pool: Vec<VideoRecord> = Vec::new();
        assert!(FrameIndex::build(&pool, 4)
            .nearest(&AVSample::default())
            .is_none());
    }

    #[test]
    fn every_frame_in_exactly_one_cell() {
        let mut rng = StreamRng::seed_from_u64(5);
        let labels: Vec<Vec<(f64, f64)>> = (0..7)
            .map(|_| {
                (0..30)
                    .map(|_| (rng.random_range(-1.0..=1.0), rng.random_range(-1.0..=1.0)))
                    .collect()
            })
            .collect();
        let pool = pool_from(&labels);
        let idx = FrameIndex::build(&pool, 6);
        let mut seen = std::collections::HashSet::new();
        for a in 0..6 {
            for v in 0..6 {
                for key in idx.cell(a, v) {
                    assert!(seen.insert(key));
                }
            }
        }
        assert_eq!(seen.len(), 7 * 30);
    }

    #[test]
    fn random_queries_match_brute_force() {
        let mut rng = StreamRng::seed_from_u64(17);
        let labels: Vec<Vec<(f64, f64)>> = (0..10)
            .map(|_| {
                (0..50)
                    .map(|_| (rng.random_range(-1.0..=1.0), rng.random_range(-1.0..=1.0)))
                    .collect()
            })
            .collect();
        let pool = pool_from(&labels);
        for cells in [1, 3, 10, 32] {
            let idx = FrameIndex::build(&pool, cells);
            for _ in 0..100 {
                let q = AVSample::new(rng.random_range(-1.0..=1.0), rng.random_range(-1.0..=1.0));
                let hit = idx.nearest(&q).unwrap();
                let (id, t, d) = brute_force(&pool, &q);
                assert_eq!(
                    (hit.video.id.clone(), hit.frame, hit.distance_squared),
                    (id, t, d)
                );
            }
        }
    }

    proptest! {
        // Coarse lattice coordinates make exact ties common.
        #[test]
        fn matches_brute_force_with_ties(
            labels in prop::collection::vec(prop::collection::vec((-4i32..=4, -4i32..=4), 1..20), 1..12),
            queries in prop::collection::vec((-8i32..=8, -8i32..=8), 1..20),
            cells in 1usize..12,
        ) {
            let labels: Vec<Vec<(f64, f64)>> = labels.iter()
                .map(|v| v.iter().map(|&(a, b)| (a as f64 / 4.0, b as f64 / 4.0)).collect())
                .collect();
            let pool = pool_from(&labels);
            let idx = FrameIndex::build(&pool, cells);
            for &(a, b) in &queries {
                let q = AVSample::new(a as f64 / 8.0, b as f64 / 8.0);
                let hit = idx.nearest(&q).unwrap();
                let (id, t, d) = brute_force(&pool, &q);
                prop_assert_eq!((hit.video.id.clone(), hit.frame, hit.distance_squared), (id, t, d));
            }
        }
    }
}
