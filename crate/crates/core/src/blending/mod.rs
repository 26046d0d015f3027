//! Synthesis of new coefficient sequences by blending a source video with a
//! target video, and the augmentation pipeline built on it.
//!
//! Three blend rules are supported:
//!
//! | rule                 | coefficients                                     | label weight                  |
//! |----------------------|--------------------------------------------------|-------------------------------|
//! | `full_weighted`      | `w·src + (1−w)·tgt` on every dimension           | `w`                           |
//! | `random`             | `src` on the kept dimensions, `tgt` elsewhere     | `|kept| / 50`                 |
//! | `selective_weighted` | `src` on the kept dimensions, weighted elsewhere  | `(|kept| + w·(50−|kept|)) / 50` |
//!
//! Labels are always `λ·src_label + (1−λ)·tgt_label` per frame, with `λ` the
//! label weight from the table.

mod augment;
mod resample;

pub use augment::{augment, AugmentConfig, AugmentReport, SYNTHETIC_PREFIX};
pub use resample::resample_video;

use rand::seq::index;
use rand::Rng;

use crate::avspace::FrameIndex;
use crate::dataset::{Alignment, BlendMethod, CoefficientFrame, Provenance, VideoRecord, N_COEFFS};
use crate::error::{Error, Result};
use crate::seed::StreamRng;

/// Range of pipeline-sampled blend weights.
pub const WEIGHT_RANGE: (f64, f64) = (0.25, 0.75);

/// Range of pipeline-sampled kept-subset sizes.
pub const KEPT_SIZE_RANGE: (usize, usize) = (10, 40);

/// `w·a + (1−w)·b`, evaluated so the result never leaves `[min(a,b), max(a,b)]`.
#[inline]
pub fn mix(a: f64, b: f64, w: f64) -> f64 {
    if w == 1.0 {
        a
    } else {
        b + w * (a - b)
    }
}

/// Fully resolved parameters of one blend.
#[derive(Debug, Clone, PartialEq)]
pub enum BlendParams {
    FullWeighted { weight: f64 },
    Random { kept: Vec<usize> },
    SelectiveWeighted { kept: Vec<usize>, weight: f64 },
}

impl BlendParams {
    pub fn method(&self) -> BlendMethod {
        match self {
            BlendParams::FullWeighted { .. } => BlendMethod::FullWeighted,
            BlendParams::Random { .. } => BlendMethod::Random,
            BlendParams::SelectiveWeighted { .. } => BlendMethod::SelectiveWeighted,
        }
    }

    pub fn weight(&self) -> Option<f64> {
        match self {
            BlendParams::FullWeighted { weight }
            | BlendParams::SelectiveWeighted { weight, .. } => Some(*weight),
            BlendParams::Random { .. } => None,
        }
    }

    pub fn kept(&self) -> Option<&[usize]> {
        match self {
            BlendParams::Random { kept } | BlendParams::SelectiveWeighted { kept, .. } => {
                Some(kept)
            }
            BlendParams::FullWeighted { .. } => None,
        }
    }

    /// Weight of the source labels in the blended labels.
    pub fn label_weight(&self) -> f64 {
        let n = N_COEFFS as f64;
        match self {
            BlendParams::FullWeighted { weight } => *weight,
            BlendParams::Random { kept } => kept.len() as f64 / n,
            BlendParams::SelectiveWeighted { kept, weight } => {
                let k = kept.len() as f64;
                (k + weight * (n - k)) / n
            }
        }
    }

    /// Per-dimension source weight.
    fn dim_weights(&self) -> [f64; N_COEFFS] {
        let mut w = [self.weight().unwrap_or(0.0); N_COEFFS];
        if let Some(kept) = self.kept() {
            for &d in kept {
                w[d] = 1.0;
            }
        }
        w
    }

    fn validate(&self) -> Result<()> {
        if let Some(w) = self.weight() {
            if !(0.0..=1.0).contains(&w) {
                return Err(Error::Invalid(format!("blend weight {w} outside [0, 1]")));
            }
        }
        if let Some(kept) = self.kept() {
            if !kept.windows(2).all(|p| p[0] < p[1]) || kept.iter().any(|&d| d >= N_COEFFS) {
                return Err(Error::Invalid(
                    "kept indices must be strictly increasing and below 50".into(),
                ));
            }
        }
        Ok(())
    }

    /// Draws parameters for `method` the way the pipeline does: one weight
    /// uniform in `[0.25, 0.75]` and/or a kept subset whose size is uniform in
    /// `{10, …, 40}`.
    pub fn sample(method: BlendMethod, rng: &mut StreamRng) -> BlendParams {
        let weight = |rng: &mut StreamRng| rng.random_range(WEIGHT_RANGE.0..=WEIGHT_RANGE.1);
        let kept = |rng: &mut StreamRng| {
            let size = rng.random_range(KEPT_SIZE_RANGE.0..=KEPT_SIZE_RANGE.1);
            let mut kept = index::sample(rng, N_COEFFS, size).into_vec();
            kept.sort_unstable();
            kept
        };
        match method {
            BlendMethod::FullWeighted => BlendParams::FullWeighted {
                weight: weight(rng),
            },
            BlendMethod::Random => BlendParams::Random { kept: kept(rng) },
            BlendMethod::SelectiveWeighted => {
                let kept = kept(rng);
                BlendParams::SelectiveWeighted {
                    kept,
                    weight: weight(rng),
                }
            }
        }
    }
}

/// Blends two equal-length videos.
///
/// The result carries id `syn_<source id>`, the source's subject, and a
/// video-based provenance with seed 0; the augmentation pipeline replaces
/// these with the run's identifiers.
pub fn blend(src: &VideoRecord, tgt: &VideoRecord, params: &BlendParams) -> Result<VideoRecord> {
    if src.len() != tgt.len() {
        return Err(Error::LengthMismatch {
            id: format!("{} / {}", src.id, tgt.id),
            frames: src.len(),
            labels: tgt.len(),
        });
    }
    if src.is_empty() {
        return Err(Error::EmptyVideo(src.id.clone()));
    }
    params.validate()?;
    let dim_w = params.dim_weights();
    let label_w = params.label_weight();

    let frames = src
        .frames
        .iter()
        .zip(&tgt.frames)
        .map(|(s, t)| {
            let mut out = CoefficientFrame::zeros();
            for d in 0..N_COEFFS {
                out[d] = mix(s[d], t[d], dim_w[d]);
            }
            out
        })
        .collect();
    let labels = src
        .labels
        .iter()
        .zip(&tgt.labels)
        .map(|(s, t)| s.lerp(t, label_w))
        .collect();

    Ok(VideoRecord {
        id: format!("syn_{}", src.id),
        subject_id: src.subject_id.clone(),
        fps: src.fps,
        frames,
        labels,
        provenance: Some(Provenance {
            source_id: src.id.clone(),
            target_id: tgt.id.clone(),
            alignment: Alignment::VideoBased,
            blend_method: params.method(),
            weight: params.weight(),
            kept_indices: params.kept().map(<[usize]>::to_vec),
            label_weight: label_w,
            seed: 0,
        }),
    })
}

pub fn blend_full_weighted(src: &VideoRecord, tgt: &VideoRecord, w: f64) -> Result<VideoRecord> {
    blend(src, tgt, &BlendParams::FullWeighted { weight: w })
}

pub fn blend_random(src: &VideoRecord, tgt: &VideoRecord, kept: &[usize]) -> Result<VideoRecord> {
    blend(
        src,
        tgt,
        &BlendParams::Random {
            kept: kept.to_vec(),
        },
    )
}

pub fn blend_selective(
    src: &VideoRecord,
    tgt: &VideoRecord,
    kept: &[usize],
    w: f64,
) -> Result<VideoRecord> {
    blend(
        src,
        tgt,
        &BlendParams::SelectiveWeighted {
            kept: kept.to_vec(),
            weight: w,
        },
    )
}

/// Builds the per-frame partner sequence for `src`: frame `t` is the pool
/// frame whose label is nearest to `src.labels[t]`.
pub fn match_frames(src: &VideoRecord, index: &FrameIndex<'_>) -> Result<VideoRecord> {
    if index.is_empty() {
        return Err(Error::Invalid(
            "frame-based blending needs a non-empty pool".into(),
        ));
    }
    if index.pool().iter().any(|v| v.id == src.id) {
        return Err(Error::Invalid(format!(
            "frame pool must not contain the source video `{}`",
            src.id
        )));
    }
    let mut frames = Vec::with_capacity(src.len());
    let mut labels = Vec::with_capacity(src.len());
    let mut contributors: Vec<&str> = Vec::new();
    for l in &src.labels {
        let hit = index.nearest(l).expect("index is non-empty");
        frames.push(hit.video.frames[hit.frame]);
        labels.push(hit.video.labels[hit.frame]);
        contributors.push(&hit.video.id);
    }
    contributors.sort_unstable();
    contributors.dedup();
    Ok(VideoRecord {
        id: contributors.join("+"),
        subject_id: String::new(),
        fps: src.fps,
        frames,
        labels,
        provenance: None,
    })
}

/// Frame-based blending: pairs every source frame with its nearest pool
/// frame in AV space, then blends with one set of parameters drawn from
/// `rng` for the whole video.
///
/// Matched frames come from unrelated moments of unrelated videos, so the
/// output is generally not temporally smooth.
pub fn blend_frame_based(
    src: &VideoRecord,
    index: &FrameIndex<'_>,
    method: BlendMethod,
    rng: &mut StreamRng,
) -> Result<VideoRecord> {
    let partner = match_frames(src, index)?;
    let params = BlendParams::sample(method, rng);
    let mut out = blend(src, &partner, &params)?;
    if let Some(p) = out.provenance.as_mut() {
        p.alignment = Alignment::FrameBased;
    }
    Ok(out)
}
