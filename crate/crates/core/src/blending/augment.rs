use std::collections::{HashMap, HashSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{blend, blend_frame_based, resample_video, BlendParams};
use crate::avspace::{
    describe_all, kbin_cluster, kmeans_cluster, occupancy_report, ClusterMethod, FrameIndex,
    VideoDescriptor,
};
use crate::dataset::{Alignment, BlendMethod, Dataset, Partition, VideoRecord};
use crate::error::{Error, Result};
use crate::seed::StreamSeed;
use crate::selection::{select_sources, select_targets, SelectionConfig, TargetStrategy};

pub const SYNTHETIC_PREFIX: &str = "syn_";

const FRAME_INDEX_CELLS: usize = 16;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentConfig {
    pub clustering: ClusterMethod,
    pub k: usize,
    pub selection: SelectionConfig,
    pub alignment: Alignment,
    pub blend_method: BlendMethod,
    pub seed: u64,
}

impl AugmentConfig {
    /// Video-based alignment, full weighted blending and similar targets
    /// over a 16-bin AV grid.
    pub fn recommended(n_sources: usize, n_targets_per_source: usize, seed: u64) -> Self {
        AugmentConfig {
            clustering: ClusterMethod::Kbin,
            k: 16,
            selection: SelectionConfig {
                n_sources,
                n_targets_per_source,
                target_strategy: TargetStrategy::Similar,
                exclude_same_subject: false,
                seed,
            },
            alignment: Alignment::VideoBased,
            blend_method: BlendMethod::FullWeighted,
            seed,
        }
    }
}

/// Stream used for the blend of one (source, target rank) pair.
fn pair_seed(seed: u64, source_id: &str, rank: usize) -> StreamSeed {
    StreamSeed::new(seed)
        .with_str("pair")
        .with_str(source_id)
        .with_u64(rank as u64)
}

fn synthesize(
    src: &VideoRecord,
    tgt: &VideoRecord,
    rank: usize,
    cfg: &AugmentConfig,
) -> Result<VideoRecord> {
    let stream = pair_seed(cfg.seed, &src.id, rank);
    let mut rng = stream.rng();
    let mut out = match cfg.alignment {
        Alignment::VideoBased => {
            let aligned = resample_video(tgt, src.len())?;
            let params = BlendParams::sample(cfg.blend_method, &mut rng);
            blend(src, &aligned, &params)?
        }
        Alignment::FrameBased => {
            let pool = std::slice::from_ref(tgt);
            let index = FrameIndex::build(pool, FRAME_INDEX_CELLS);
            blend_frame_based(src, &index, cfg.blend_method, &mut rng)?
        }
    };
    out.id = format!("{SYNTHETIC_PREFIX}{}_{rank}", src.id);
    if let Some(p) = out.provenance.as_mut() {
        p.target_id = tgt.id.clone();
        p.seed = stream.value();
    }
    Ok(out)
}

/// Extends `d` with `n_sources × n_targets_per_source` synthetic training
/// videos.
///
/// Only non-synthetic train videos take part. Every random choice comes from
/// a stream derived from the configured seeds and the ids involved, so the
/// result does not depend on the rayon thread count.
pub fn augment(d: &Dataset, cfg: &AugmentConfig) -> Result<Dataset> {
    let Some(split) = &d.split else {
        return Err(Error::Invalid("augmentation needs a split dataset".into()));
    };
    let pool: Vec<&VideoRecord> = d
        .videos
        .iter()
        .filter(|v| !v.is_synthetic() && split.get(&v.id) == Some(&Partition::Train))
        .collect();
    cfg.selection.validate(pool.len())?;

    let descs = describe_all(&pool)?;
    let clustering = match cfg.clustering {
        ClusterMethod::Kbin => kbin_cluster(&descs, cfg.k)?,
        ClusterMethod::Kmeans => {
            let seed = StreamSeed::new(cfg.seed).with_str("clustering").value();
            kmeans_cluster(&descs, cfg.k, seed)?
        }
    };
    let ids: Vec<&str> = pool.iter().map(|v| v.id.as_str()).collect();
    let sources = select_sources(&clustering, &ids, cfg.selection.n_sources)?;

    let by_id: HashMap<&str, (&VideoRecord, &VideoDescriptor)> = pool
        .iter()
        .zip(&descs)
        .map(|(v, desc)| (v.id.as_str(), (*v, desc)))
        .collect();

    let sel = &cfg.selection;
    let plans: Vec<(&str, Vec<String>)> = sources
        .par_iter()
        .map(|sid| {
            let (src, src_desc) = by_id[sid.as_str()];
            let candidates: Vec<VideoDescriptor> = if sel.exclude_same_subject {
                descs
                    .iter()
                    .filter(|c| by_id[c.video_id.as_str()].0.subject_id != src.subject_id)
                    .cloned()
                    .collect()
            } else {
                descs.clone()
            };
            let targets = select_targets(
                src_desc,
                sel.target_strategy,
                sel.n_targets_per_source,
                &candidates,
                &clustering,
                sel.seed,
            )?;
            Ok((sid.as_str(), targets))
        })
        .collect::<Result<_>>()?;

    let pairs: Vec<(&str, usize, &str)> = plans
        .iter()
        .flat_map(|(s, ts)| ts.iter().enumerate().map(move |(k, t)| (*s, k, t.as_str())))
        .collect();
    let synthetic: Vec<VideoRecord> = pairs
        .par_iter()
        .map(|&(s, k, t)| synthesize(by_id[s].0, by_id[t].0, k, cfg))
        .collect::<Result<_>>()?;

    let existing: HashSet<&str> = d.videos.iter().map(|v| v.id.as_str()).collect();
    if let Some(v) = synthetic.iter().find(|v| existing.contains(v.id.as_str())) {
        return Err(Error::DuplicateId(v.id.clone()));
    }

    let mut split = split.clone();
    for v in &synthetic {
        split.insert(v.id.clone(), Partition::Train);
    }
    let mut videos = d.videos.clone();
    videos.extend(synthetic);
    Dataset::new(d.fps, videos, Some(split))
}

/// Balance of the train partition before and after augmentation, measured
/// on a K-bin grid of video mean AV values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentReport {
    pub n_synthetic: usize,
    pub entropy_before: f64,
    pub entropy_after: f64,
    pub min_count_before: usize,
    pub min_count_after: usize,
}

impl AugmentReport {
    pub fn compute(before: &Dataset, after: &Dataset, k: usize) -> Result<Self> {
        let occupancy = |d: &Dataset| {
            let train = d.partition(Partition::Train);
            let descs = describe_all(&train)?;
            occupancy_report(&kbin_cluster(&descs, k)?)
        };
        let b = occupancy(before)?;
        let a = occupancy(after)?;
        let count = |d: &Dataset| d.videos.iter().filter(|v| v.is_synthetic()).count();
        Ok(AugmentReport {
            n_synthetic: count(after) - count(before),
            entropy_before: b.entropy,
            entropy_after: a.entropy,
            min_count_before: b.min_count,
            min_count_after: a.min_count,
        })
    }
}
