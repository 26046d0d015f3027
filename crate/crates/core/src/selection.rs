//! Source and target video selection.
//!
//! Sources come from the least populated AV clusters first. Each source then
//! gets its own list of targets, drawn by one of three strategies.

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashSet};
use std::fmt;

use rand::seq::{IndexedRandom, SliceRandom};
use serde::{Deserialize, Serialize};

use crate::avspace::{Clustering, VideoDescriptor};
use crate::error::{Error, Result};
use crate::seed::StreamSeed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetStrategy {
    /// Uniform over the whole pool.
    Random,
    /// Same AV cluster as the source, spilling into the nearest clusters.
    Near,
    /// Closest in expression-statistics space.
    Similar,
}

impl fmt::Display for TargetStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TargetStrategy::Random => "random",
            TargetStrategy::Near => "near",
            TargetStrategy::Similar => "similar",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionConfig {
    pub n_sources: usize,
    pub n_targets_per_source: usize,
    pub target_strategy: TargetStrategy,
    /// Drop candidates sharing the source's subject.
    #[serde(default)]
    pub exclude_same_subject: bool,
    pub seed: u64,
}

impl SelectionConfig {
    pub fn validate(&self, pool_size: usize) -> Result<()> {
        if self.n_sources == 0 || self.n_targets_per_source == 0 {
            return Err(Error::Config(
                "n_sources and n_targets_per_source must be positive".into(),
            ));
        }
        if self.n_sources > pool_size {
            return Err(Error::Config(format!(
                "{} sources requested from a pool of {pool_size}",
                self.n_sources
            )));
        }
        if self.n_targets_per_source + 1 > pool_size {
            return Err(Error::Config(format!(
                "{} targets per source need a pool of at least {}, have {pool_size}",
                self.n_targets_per_source,
                self.n_targets_per_source + 1
            )));
        }
        Ok(())
    }
}

/// Greedy drain of the smallest clusters.
///
/// Clusters are visited in ascending occupancy (ties by cluster id); within a
/// cluster, pool videos are taken in ascending id order.
pub fn select_sources(c: &Clustering, pool: &[&str], n_sources: usize) -> Result<Vec<String>> {
    if n_sources > pool.len() {
        return Err(Error::Config(format!(
            "{n_sources} sources requested from a pool of {}",
            pool.len()
        )));
    }
    let mut members: BTreeMap<usize, Vec<&str>> = BTreeMap::new();
    for &id in pool {
        let cluster = c
            .cluster_of(id)
            .ok_or_else(|| Error::Invalid(format!("pool video `{id}` has no cluster")))?;
        members.entry(cluster).or_default().push(id);
    }
    let mut order: Vec<usize> = members.keys().copied().collect();
    order.sort_by_key(|&k| (c.occupancy[k], k));

    let mut out = Vec::with_capacity(n_sources);
    for k in order {
        let ids = members.get_mut(&k).expect("key from map");
        ids.sort_unstable();
        for id in ids.iter() {
            if out.len() == n_sources {
                return Ok(out);
            }
            out.push(id.to_string());
        }
    }
    Ok(out)
}

/// Picks `n` targets for one source.
///
/// `pool` holds the candidate descriptors; the source itself is skipped if
/// present. Candidates are ordered by id before any random draw so that the
/// result does not depend on pool order.
pub fn select_targets(
    source: &VideoDescriptor,
    strategy: TargetStrategy,
    n: usize,
    pool: &[VideoDescriptor],
    c: &Clustering,
    seed: u64,
) -> Result<Vec<String>> {
    let mut candidates: Vec<&VideoDescriptor> = pool
        .iter()
        .filter(|d| d.video_id != source.video_id)
        .collect();
    candidates.sort_by(|a, b| a.video_id.cmp(&b.video_id));
    let unique: HashSet<&str> = candidates.iter().map(|d| d.video_id.as_str()).collect();
    if unique.len() != candidates.len() {
        return Err(Error::Invalid("target pool contains duplicate ids".into()));
    }
    if n > candidates.len() {
        return Err(Error::Config(format!(
            "{n} targets requested but only {} candidates for `{}`",
            candidates.len(),
            source.video_id
        )));
    }
    let mut rng = StreamSeed::new(seed)
        .with_str("targets")
        .with_str(&source.video_id)
        .rng();

    let picked: Vec<&VideoDescriptor> = match strategy {
        TargetStrategy::Random => candidates.choose_multiple(&mut rng, n).copied().collect(),
        TargetStrategy::Similar => {
            let mut scored: Vec<(f64, &VideoDescriptor)> = candidates
                .iter()
                .map(|d| (source.feature_distance_squared(d), *d))
                .collect();
            scored.sort_by(|a, b| {
                a.0.partial_cmp(&b.0)
                    .unwrap_or(Ordering::Equal)
                    .then_with(|| a.1.video_id.cmp(&b.1.video_id))
            });
            scored.into_iter().take(n).map(|(_, d)| d).collect()
        }
        TargetStrategy::Near => {
            let home = c.cluster_of(&source.video_id).ok_or_else(|| {
                Error::Invalid(format!("source `{}` has no cluster", source.video_id))
            })?;
            let mut by_cluster: BTreeMap<usize, Vec<&VideoDescriptor>> = BTreeMap::new();
            for d in &candidates {
                let k = c.cluster_of(&d.video_id).ok_or_else(|| {
                    Error::Invalid(format!("candidate `{}` has no cluster", d.video_id))
                })?;
                by_cluster.entry(k).or_default().push(d);
            }
            let centre = c.centroids[home];
            let mut visit: Vec<usize> = by_cluster.keys().copied().filter(|&k| k != home).collect();
            visit.sort_by(|&a, &b| {
                let da = c.centroids[a].distance_squared(&centre);
                let db = c.centroids[b].distance_squared(&centre);
                da.partial_cmp(&db)
                    .unwrap_or(Ordering::Equal)
                    .then(a.cmp(&b))
            });
            visit.insert(0, home);

            let mut out = Vec::with_capacity(n);
            for k in visit {
                let Some(members) = by_cluster.get_mut(&k) else {
                    continue;
                };
                members.shuffle(&mut rng);
                let need = n - out.len();
                out.extend(members.iter().take(need).copied());
                if out.len() == n {
                    break;
                }
            }
            out
        }
    };
    Ok(picked.into_iter().map(|d| d.video_id.clone()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::avspace::{kbin_cluster, ClusterMethod};
    use crate::dataset::{AVSample, N_COEFFS};
    use crate::seed::StreamRng;
    use proptest::prelude::{prop, prop_assert, prop_assert_eq, proptest};
    use rand::{Rng, SeedableRng};

    fn desc(id: &str, a: f64, v: f64) -> VideoDescriptor {
        VideoDescriptor {
            video_id: id.into(),
            mean_av: AVSample::new(a, v),
            coeff_mean: [0.0; N_COEFFS],
            coeff_var: [0.0; N_COEFFS],
        }
    }

    fn manual_clustering(assign: &[(&str, usize)], k: usize) -> Clustering {
        let mut occupancy = vec![0; k];
        for &(_, c) in assign {
            occupancy[c] += 1;
        }
        Clustering {
            method: ClusterMethod::Kbin,
            k,
            assignment: assign.iter().map(|&(id, c)| (id.to_string(), c)).collect(),
            centroids: (0..k)
                .map(|i| AVSample::new(-0.9 + 0.3 * i as f64, 0.0))
                .collect(),
            occupancy,
        }
    }

    #[test]
    fn sources_drain_smallest_cluster_first() {
        let assign = [
            ("a0", 0),
            ("a1", 0),
            ("a2", 0),
            ("a3", 0),
            ("a4", 0),
            ("b0", 1),
            ("c2", 2),
            ("c0", 2),
            ("c1", 2),
        ];
        let c = manual_clustering(&assign, 3);
        let pool: Vec<&str> = assign.iter().map(|p| p.0).collect();
        assert_eq!(select_sources(&c, &pool, 3).unwrap(), ["b0", "c0", "c1"]);
        let all = select_sources(&c, &pool, pool.len()).unwrap();
        assert_eq!(all.len(), pool.len());
        assert!(select_sources(&c, &pool, 10).is_err());
    }

    #[test]
    fn equal_occupancy_drains_lower_cluster_id() {
        let c = manual_clustering(&[("x", 1), ("y", 0), ("z", 1), ("w", 0)], 2);
        assert_eq!(
            select_sources(&c, &["x", "y", "z", "w"], 2).unwrap(),
            ["w", "y"]
        );
    }

    #[test]
    fn similar_ranks_exact_match_first() {
        let mut src = desc("src", 0.0, 0.0);
        src.coeff_mean[3] = 1.0;
        let mut twin = desc("zz", 0.5, 0.5);
        twin.coeff_mean[3] = 1.0;
        let mut other = desc("aa", 0.0, 0.0);
        other.coeff_var[0] = 0.1;
        let pool = vec![other, twin, src.clone()];
        let c = manual_clustering(&[("src", 0), ("zz", 0), ("aa", 0)], 1);
        let t = select_targets(&src, TargetStrategy::Similar, 2, &pool, &c, 0).unwrap();
        assert_eq!(t, ["zz", "aa"]);
    }

    #[test]
    fn similar_matches_exhaustive_sort() {
        let mut rng = StreamRng::seed_from_u64(21);
        let mut pool = Vec::new();
        for i in 0..21 {
            let mut d = desc(&format!("v{i:02}"), 0.0, 0.0);
            for j in 0..N_COEFFS {
                d.coeff_mean[j] = rng.random_range(-2.0..2.0);
                d.coeff_var[j] = rng.random_range(0.0..1.0);
            }
            pool.push(d);
        }
        let src = pool[0].clone();
        let c = kbin_cluster(&pool, 4).unwrap();
        // Oracle: full 100-dim Euclidean distance, sorted.
        let mut oracle: Vec<(f64, String)> = pool[1..]
            .iter()
            .map(|d| {
                let a = src.feature_vector();
                let b = d.feature_vector();
                let s: f64 = a.iter().zip(b.iter()).map(|(x, y)| (x - y).powi(2)).sum();
                (s.sqrt(), d.video_id.clone())
            })
            .collect();
        oracle.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        let expected: Vec<String> = oracle.into_iter().take(6).map(|p| p.1).collect();
        assert_eq!(
            select_targets(&src, TargetStrategy::Similar, 6, &pool, &c, 5).unwrap(),
            expected
        );
    }

    #[test]
    fn near_falls_back_to_closest_cluster() {
        let pool = vec![
            desc("s", 0.0, 0.0),
            desc("a", 0.0, 0.0),
            desc("b", 0.0, 0.0),
            desc("c", 0.0, 0.0),
        ];
        // Centroids at -0.9, -0.6, -0.3, 0.0 on the arousal axis.
        let c = manual_clustering(&[("s", 0), ("a", 3), ("b", 1), ("c", 2)], 4);
        let t = select_targets(&pool[0], TargetStrategy::Near, 1, &pool, &c, 9).unwrap();
        assert_eq!(t, ["b"]);
        let t = select_targets(&pool[0], TargetStrategy::Near, 3, &pool, &c, 9).unwrap();
        assert_eq!(t, ["b", "c", "a"]);
    }

    #[test]
    fn near_prefers_home_cluster() {
        let pool: Vec<_> = ["s", "h1", "h2", "h3", "o1"]
            .iter()
            .map(|id| desc(id, 0.0, 0.0))
            .collect();
        let c = manual_clustering(&[("s", 0), ("h1", 0), ("h2", 0), ("h3", 0), ("o1", 1)], 2);
        for seed in 0..20 {
            let t = select_targets(&pool[0], TargetStrategy::Near, 2, &pool, &c, seed).unwrap();
            assert!(t.iter().all(|id| id.starts_with('h')), "{t:?}");
        }
    }

    #[test]
    fn pool_too_small_is_an_error() {
        let pool = vec![desc("s", 0.0, 0.0), desc("a", 0.0, 0.0)];
        let c = manual_clustering(&[("s", 0), ("a", 0)], 1);
        assert!(select_targets(&pool[0], TargetStrategy::Random, 2, &pool, &c, 0).is_err());
    }

    #[test]
    fn config_validation() {
        let cfg = SelectionConfig {
            n_sources: 0,
            n_targets_per_source: 1,
            target_strategy: TargetStrategy::Similar,
            exclude_same_subject: false,
            seed: 0,
        };
        assert!(cfg.validate(5).is_err());
        let cfg = SelectionConfig {
            n_sources: 5,
            ..cfg
        };
        cfg.validate(5).unwrap();
        assert!(SelectionConfig {
            n_targets_per_source: 5,
            ..cfg.clone()
        }
        .validate(5)
        .is_err());
        assert!(SelectionConfig {
            n_sources: 6,
            ..cfg
        }
        .validate(5)
        .is_err());
    }

    fn random_pool(n: usize, seed: u64) -> Vec<VideoDescriptor> {
        let mut rng = StreamRng::seed_from_u64(seed);
        (0..n)
            .map(|i| {
                let mut d = desc(
                    &format!("v{i:03}"),
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                );
                for j in 0..N_COEFFS {
                    // Coarse values so that exact distance ties occur.
                    d.coeff_mean[j] = rng.random_range(0..3) as f64;
                }
                d
            })
            .collect()
    }

    proptest! {
        #[test]
        fn targets_unique_and_exclude_source(n_pool in 3usize..30, seed in 0u64..1000, pick in 0usize..30) {
            let pool = random_pool(n_pool, seed);
            let c = kbin_cluster(&pool, 9).unwrap();
            let src = &pool[pick % n_pool];
            let n = 1 + (seed as usize) % (n_pool - 1);
            for s in [TargetStrategy::Random, TargetStrategy::Near, TargetStrategy::Similar] {
                let t = select_targets(src, s, n, &pool, &c, seed).unwrap();
                prop_assert_eq!(t.len(), n);
                let set: HashSet<&String> = t.iter().collect();
                prop_assert_eq!(set.len(), n);
                prop_assert!(!t.contains(&src.video_id));
                prop_assert_eq!(&t, &select_targets(src, s, n, &pool, &c, seed).unwrap());
            }
        }

        #[test]
        fn selection_ignores_pool_order(n_pool in 3usize..25, seed in 0u64..1000,
                                        perm in prop::collection::vec(0usize..1000, 25)) {
            let pool = random_pool(n_pool, seed);
            let c = kbin_cluster(&pool, 4).unwrap();
            let mut shuffled = pool.clone();
            let mut keyed: Vec<_> = shuffled.drain(..).zip(perm.iter()).collect();
            keyed.sort_by_key(|p| *p.1);
            let shuffled: Vec<_> = keyed.into_iter().map(|p| p.0).collect();
            let n = n_pool - 1;
            for s in [TargetStrategy::Random, TargetStrategy::Near, TargetStrategy::Similar] {
                prop_assert_eq!(
                    select_targets(&pool[0], s, n.min(4), &pool, &c, seed).unwrap(),
                    select_targets(&pool[0], s, n.min(4), &shuffled, &c, seed).unwrap()
                );
            }
        }

        #[test]
        fn sources_respect_greedy_order(n_pool in 1usize..40, seed in 0u64..1000, frac in 0.0f64..=1.0) {
            let pool = random_pool(n_pool, seed);
            let c = kbin_cluster(&pool, 9).unwrap();
            let ids: Vec<&str> = pool.iter().map(|d| d.video_id.as_str()).collect();
            let n = ((n_pool as f64) * frac) as usize;
            let chosen = select_sources(&c, &ids, n).unwrap();
            prop_assert_eq!(chosen.len(), n);
            let chosen_set: HashSet<&str> = chosen.iter().map(String::as_str).collect();
            let max_selected = chosen.iter().map(|id| c.occupancy[c.cluster_of(id).unwrap()]).max();
            let min_unselected = ids.iter().filter(|id| !chosen_set.contains(**id))
                .map(|id| c.occupancy[c.cluster_of(id).unwrap()]).min();
            if let (Some(a), Some(b)) = (max_selected, min_unselected) {
                prop_assert!(a <= b);
            }
        }
    }
}
