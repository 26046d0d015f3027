//! Synthetic corpora with exactly known labels.
//!
//! Each subject gets an archetype coefficient vector; each video adds a few
//! band-limited sinusoids per channel on top of it. Labels are a fixed linear
//! map of the coefficients, `(a, v) = A·F(t)`, so anything that blends
//! coefficients and labels consistently can be checked exactly.
//!
//! Sinusoid frequencies are whole numbers of cycles per video, so every
//! video's mean label equals `A` applied to its base vector. That is what
//! lets the skew control place whole videos in a chosen AV quadrant.

use std::f64::consts::TAU;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{
    AVSample, CoefficientFrame, Dataset, VideoRecord, COEFF_RANGE, DEFAULT_FPS, N_COEFFS,
};
use crate::error::{Error, Result};
use crate::seed::{StreamRng, StreamSeed};

/// Minimum generated video length, one trainer window.
pub const MIN_VIDEO_LEN: usize = 100;

/// Label-space extent of subject archetypes.
const ARCHETYPE_AV: f64 = 0.6;
/// Skewed archetypes sit at least this far from both axes.
const SKEW_MARGIN: f64 = 0.2;
/// Per-video jitter of the mean label around the subject archetype.
const VIDEO_JITTER: f64 = 0.05;

/// Quadrant of the AV plane, written `<arousal sign><valence sign>`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Quadrant {
    #[serde(rename = "++")]
    PlusPlus,
    #[serde(rename = "+-")]
    PlusMinus,
    #[serde(rename = "-+")]
    MinusPlus,
    #[serde(rename = "--")]
    MinusMinus,
}

impl Quadrant {
    pub fn signs(self) -> (f64, f64) {
        match self {
            Quadrant::PlusPlus => (1.0, 1.0),
            Quadrant::PlusMinus => (1.0, -1.0),
            Quadrant::MinusPlus => (-1.0, 1.0),
            Quadrant::MinusMinus => (-1.0, -1.0),
        }
    }

    pub fn contains(self, p: &AVSample) -> bool {
        let (sa, sv) = self.signs();
        p.arousal * sa > 0.0 && p.valence * sv > 0.0
    }
}

impl FromStr for Quadrant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "++" => Ok(Quadrant::PlusPlus),
            "+-" => Ok(Quadrant::PlusMinus),
            "-+" => Ok(Quadrant::MinusPlus),
            "--" => Ok(Quadrant::MinusMinus),
            _ => Err(Error::Config(format!(
                "unknown quadrant `{s}` (use ++, +-, -+ or --)"
            ))),
        }
    }
}

impl fmt::Display for Quadrant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (a, v) = self.signs();
        let c = |x: f64| if x > 0.0 { '+' } else { '-' };
        write!(f, "{}{}", c(a), c(v))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenConfig {
    pub n_subjects: usize,
    pub videos_per_subject: usize,
    /// Inclusive frame-count range.
    pub len_range: (usize, usize),
    pub fps: f64,
    pub n_harmonics: usize,
    pub skew_quadrant: Option<Quadrant>,
    pub skew_fraction: f64,
    /// Upper bound on the summed sinusoid amplitude per channel.
    pub amplitude: f64,
    /// Half-width of the label-free part of subject archetypes.
    pub archetype_spread: f64,
    /// Highest sinusoid frequency, in Hz.
    pub max_frequency: f64,
    pub seed: u64,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            n_subjects: 40,
            videos_per_subject: 3,
            // Mean length 586 frames.
            len_range: (500, 672),
            fps: DEFAULT_FPS,
            n_harmonics: 4,
            skew_quadrant: None,
            skew_fraction: 0.0,
            amplitude: 0.5,
            archetype_spread: 1.5,
            max_frequency: 1.0,
            seed: 0,
        }
    }
}

impl GenConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.n_subjects == 0 || self.videos_per_subject == 0 {
            return bad("need at least one subject and one video per subject");
        }
        if self.len_range.0 < MIN_VIDEO_LEN {
            return bad("minimum video length is 100 frames");
        }
        if self.len_range.0 > self.len_range.1 {
            return bad("len_range minimum exceeds maximum");
        }
        if !(self.fps.is_finite() && self.fps > 0.0) {
            return bad("fps must be positive");
        }
        if !(0.0..=1.0).contains(&self.skew_fraction) {
            return bad("skew_fraction must lie in [0, 1]");
        }
        if !(self.amplitude.is_finite() && self.amplitude >= 0.0)
            || !(self.archetype_spread.is_finite() && self.archetype_spread >= 0.0)
        {
            return bad("amplitude and archetype_spread must be non-negative");
        }
        if !(self.max_frequency.is_finite() && self.max_frequency > 0.0) {
            return bad("max_frequency must be positive");
        }
        Ok(())
    }
}

/// Linear map from a coefficient frame to `(arousal, valence)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearOracle {
    pub rows: [[f64; N_COEFFS]; 2],
}

#[derive(Serialize, Deserialize)]
struct OracleFile {
    shape: [usize; 2],
    /// Row-major.
    data: Vec<f64>,
}

impl LinearOracle {
    pub fn apply(&self, f: &CoefficientFrame) -> AVSample {
        let dot = |r: &[f64; N_COEFFS]| r.iter().zip(&f.0).map(|(a, b)| a * b).sum::<f64>();
        AVSample::new(dot(&self.rows[0]), dot(&self.rows[1]))
    }

    pub fn to_json(&self) -> String {
        let file = OracleFile {
            shape: [2, N_COEFFS],
            data: self.rows.iter().flatten().copied().collect(),
        };
        serde_json::to_string_pretty(&file).expect("oracle serializes") + "\n"
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: OracleFile =
            serde_json::from_str(text).map_err(|e| Error::Invalid(format!("oracle file: {e}")))?;
        if file.shape != [2, N_COEFFS] || file.data.len() != 2 * N_COEFFS {
            return Err(Error::Invalid("oracle must be a 2x50 matrix".into()));
        }
        let mut rows = [[0.0; N_COEFFS]; 2];
        rows[0].copy_from_slice(&file.data[..N_COEFFS]);
        rows[1].copy_from_slice(&file.data[N_COEFFS..]);
        Ok(LinearOracle { rows })
    }

    fn transpose_apply(&self, p: (f64, f64)) -> [f64; N_COEFFS] {
        std::array::from_fn(|j| self.rows[0][j] * p.0 + self.rows[1][j] * p.1)
    }

    /// Removes the component of `z` the oracle can see.
    fn project_out(&self, z: &mut [f64; N_COEFFS]) {
        for r in &self.rows {
            let d: f64 = r.iter().zip(z.iter()).map(|(a, b)| a * b).sum();
            for (zj, rj) in z.iter_mut().zip(r) {
                *zj -= d * rj;
            }
        }
    }
}

pub fn oracle_labels(o: &LinearOracle, frames: &[CoefficientFrame]) -> Vec<AVSample> {
    frames.iter().map(|f| o.apply(f)).collect()
}

/// Random 2×50 matrix with orthonormal rows.
fn orthonormal_rows(rng: &mut StreamRng) -> [[f64; N_COEFFS]; 2] {
    loop {
        let mut r0: [f64; N_COEFFS] = std::array::from_fn(|_| rng.random_range(-1.0..1.0));
        let mut r1: [f64; N_COEFFS] = std::array::from_fn(|_| rng.random_range(-1.0..1.0));
        let n0 = r0.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n0 < 1e-6 {
            continue;
        }
        r0.iter_mut().for_each(|x| *x /= n0);
        let d: f64 = r0.iter().zip(&r1).map(|(a, b)| a * b).sum();
        r1.iter_mut().zip(&r0).for_each(|(x, a)| *x -= d * a);
        let n1 = r1.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n1 < 1e-6 {
            continue;
        }
        r1.iter_mut().for_each(|x| *x /= n1);
        return [r0, r1];
    }
}

struct Harmonic {
    amplitude: f64,
    cycles: usize,
    phase: f64,
}

struct SubjectPlan {
    base: [f64; N_COEFFS],
}

fn plan_video(
    cfg: &GenConfig,
    oracle: &LinearOracle,
    subject: &SubjectPlan,
    s: usize,
    k: usize,
) -> Result<Vec<CoefficientFrame>> {
    let mut rng = StreamSeed::new(cfg.seed)
        .with_str("video")
        .with_u64(s as u64)
        .with_u64(k as u64)
        .rng();
    let len = rng.random_range(cfg.len_range.0..=cfg.len_range.1);
    let jitter = (
        rng.random_range(-VIDEO_JITTER..=VIDEO_JITTER),
        rng.random_range(-VIDEO_JITTER..=VIDEO_JITTER),
    );
    let shift = oracle.transpose_apply(jitter);
    let max_cycles = ((cfg.max_frequency * len as f64 / cfg.fps).floor() as usize).max(1);

    let mut base = subject.base;
    base.iter_mut().zip(&shift).for_each(|(b, s)| *b += s);

    let channels: Vec<Vec<Harmonic>> = (0..N_COEFFS)
        .map(|_| {
            let share: Vec<f64> = (0..cfg.n_harmonics).map(|_| rng.random::<f64>()).collect();
            share
                .iter()
                .map(|u| Harmonic {
                    amplitude: cfg.amplitude * u / cfg.n_harmonics.max(1) as f64,
                    cycles: rng.random_range(1..=max_cycles),
                    phase: rng.random_range(0.0..TAU),
                })
                .collect()
        })
        .collect();

    for (j, hs) in channels.iter().enumerate() {
        let envelope: f64 = hs.iter().map(|h| h.amplitude).sum();
        if base[j].abs() + envelope > COEFF_RANGE {
            return Err(Error::Config(format!(
                "infeasible amplitude budget: channel {j} of subject {s} needs |base| {:.3} + amplitude {envelope:.3} <= 4",
                base[j].abs()
            )));
        }
    }

    let frames = (0..len)
        .map(|t| {
            let mut f = CoefficientFrame(base);
            for (j, hs) in channels.iter().enumerate() {
                for h in hs {
                    let angle = TAU * ((h.cycles * t) % len) as f64 / len as f64 + h.phase;
                    f[j] += h.amplitude * angle.sin();
                }
            }
            f
        })
        .collect();
    Ok(frames)
}

/// Builds a corpus and the oracle that labels it.
pub fn generate_corpus(cfg: &GenConfig) -> Result<(Dataset, LinearOracle)> {
    cfg.validate()?;
    let root = StreamSeed::new(cfg.seed);
    let mut oracle = LinearOracle {
        rows: orthonormal_rows(&mut root.with_str("oracle").rng()),
    };

    let subjects: Vec<SubjectPlan> = (0..cfg.n_subjects)
        .map(|s| {
            let mut rng = root.with_str("subject").with_u64(s as u64).rng();
            let skewed = rng.random::<f64>() < cfg.skew_fraction;
            let mean_av = match (cfg.skew_quadrant, skewed) {
                (Some(q), true) => {
                    let (sa, sv) = q.signs();
                    (
                        sa * rng.random_range(SKEW_MARGIN..=ARCHETYPE_AV),
                        sv * rng.random_range(SKEW_MARGIN..=ARCHETYPE_AV),
                    )
                }
                _ => (
                    rng.random_range(-ARCHETYPE_AV..=ARCHETYPE_AV),
                    rng.random_range(-ARCHETYPE_AV..=ARCHETYPE_AV),
                ),
            };
            let mut hidden: [f64; N_COEFFS] = std::array::from_fn(|_| {
                rng.random_range(-cfg.archetype_spread..=cfg.archetype_spread)
            });
            oracle.project_out(&mut hidden);
            let visible = oracle.transpose_apply(mean_av);
            SubjectPlan {
                base: std::array::from_fn(|j| visible[j] + hidden[j]),
            }
        })
        .collect();

    let keys: Vec<(usize, usize)> = (0..cfg.n_subjects)
        .flat_map(|s| (0..cfg.videos_per_subject).map(move |k| (s, k)))
        .collect();
    let tracks: Vec<Vec<CoefficientFrame>> = keys
        .par_iter()
        .map(|&(s, k)| plan_video(cfg, &oracle, &subjects[s], s, k))
        .collect::<Result<_>>()?;

    // Shrink the oracle if any raw label leaves [-1, 1]; positive scaling
    // keeps every video's mean in its quadrant.
    let peak = tracks
        .par_iter()
        .map(|frames| {
            frames
                .iter()
                .map(|f| {
                    let l = oracle.apply(f);
                    l.arousal.abs().max(l.valence.abs())
                })
                .fold(0.0, f64::max)
        })
        .reduce(|| 0.0, f64::max);
    if peak > 1.0 {
        let scale = (1.0 - 1e-9) / peak;
        oracle.rows.iter_mut().flatten().for_each(|x| *x *= scale);
    }

    let width = (cfg.n_subjects.max(2) - 1).to_string().len().max(3);
    let videos = keys
        .iter()
        .zip(tracks)
        .map(|(&(s, k), frames)| VideoRecord {
            id: format!("s{s:0width$}_v{k}"),
            subject_id: format!("s{s:0width$}"),
            fps: cfg.fps,
            labels: oracle_labels(&oracle, &frames),
            frames,
            provenance: None,
        })
        .collect();
    let dataset = Dataset::new(cfg.fps, videos, None)?;
    Ok((dataset, oracle))
}
