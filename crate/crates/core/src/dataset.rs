//! Coefficient-sequence data model, persistence and subject-independent
//! splitting.
//!
//! A [`Dataset`] is a list of [`VideoRecord`]s, each holding one 50-dim
//! expression coefficient frame and one arousal/valence label per video
//! frame. On disk a dataset is a JSON manifest plus one CSV per video:
//!
//! ```text
//! manifest.json
//! videos/<id>.csv     frame,arousal,valence,c00,...,c49
//! ```

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed::StreamSeed;

/// Dimensionality of an expression coefficient frame.
pub const N_COEFFS: usize = 50;

/// Coefficients outside `[-COEFF_RANGE, COEFF_RANGE]` are reported as outliers.
pub const COEFF_RANGE: f64 = 4.0;

pub const DEFAULT_FPS: f64 = 50.0;

pub const MANIFEST_FILE: &str = "manifest.json";

/// One (arousal, valence) annotation, both in `[-1, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct AVSample {
    pub arousal: f64,
    pub valence: f64,
}

impl AVSample {
    pub const fn new(arousal: f64, valence: f64) -> Self {
        AVSample { arousal, valence }
    }

    pub fn is_valid(&self) -> bool {
        let ok = |x: f64| x.is_finite() && (-1.0..=1.0).contains(&x);
        ok(self.arousal) && ok(self.valence)
    }

    pub fn distance_squared(&self, other: &AVSample) -> f64 {
        let da = self.arousal - other.arousal;
        let dv = self.valence - other.valence;
        da * da + dv * dv
    }

    /// `w * self + (1 - w) * other`, per component.
    pub fn lerp(&self, other: &AVSample, w: f64) -> AVSample {
        use crate::blending::mix;
        AVSample {
            arousal: mix(self.arousal, other.arousal, w),
            valence: mix(self.valence, other.valence, w),
        }
    }
}

/// One frame of expression coefficients.
#[derive(Clone, Copy, PartialEq)]
pub struct CoefficientFrame(pub [f64; N_COEFFS]);

impl CoefficientFrame {
    pub const fn zeros() -> Self {
        CoefficientFrame([0.0; N_COEFFS])
    }

    pub fn from_slice(values: &[f64]) -> Result<Self> {
        let arr: [f64; N_COEFFS] = values.try_into().map_err(|_| {
            Error::Invalid(format!(
                "coefficient frame needs {N_COEFFS} values, got {}",
                values.len()
            ))
        })?;
        Ok(CoefficientFrame(arr))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|c| c.is_finite())
    }
}

impl Default for CoefficientFrame {
    fn default() -> Self {
        Self::zeros()
    }
}

impl fmt::Debug for CoefficientFrame {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.0.iter()).finish()
    }
}

impl std::ops::Index<usize> for CoefficientFrame {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl std::ops::IndexMut<usize> for CoefficientFrame {
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        &mut self.0[i]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Alignment {
    VideoBased,
    FrameBased,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlendMethod {
    Random,
    SelectiveWeighted,
    FullWeighted,
}

impl BlendMethod {
    pub fn uses_weight(self) -> bool {
        matches!(
            self,
            BlendMethod::SelectiveWeighted | BlendMethod::FullWeighted
        )
    }

    pub fn uses_kept_subset(self) -> bool {
        matches!(self, BlendMethod::Random | BlendMethod::SelectiveWeighted)
    }
}

/// How a synthetic video was produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub source_id: String,
    pub target_id: String,
    pub alignment: Alignment,
    pub blend_method: BlendMethod,
    pub weight: Option<f64>,
    pub kept_indices: Option<Vec<usize>>,
    pub label_weight: f64,
    pub seed: u64,
}

impl Provenance {
    /// Checks the field-presence rules tied to `blend_method`.
    ///
    /// `weight_range` is the admissible interval for `weight`; the pipeline
    /// uses `[0.25, 0.75]`, direct blend calls may use any weight in `[0, 1]`.
    pub fn validate(&self, weight_range: (f64, f64)) -> Result<()> {
        let m = self.blend_method;
        match (m.uses_weight(), self.weight) {
            (true, None) => return Err(Error::Invalid(format!("{m:?} provenance needs a weight"))),
            (false, Some(_)) => {
                return Err(Error::Invalid(format!(
                    "{m:?} provenance must not carry a weight"
                )))
            }
            (true, Some(w)) if !(weight_range.0..=weight_range.1).contains(&w) => {
                return Err(Error::Invalid(format!(
                    "blend weight {w} outside [{}, {}]",
                    weight_range.0, weight_range.1
                )))
            }
            _ => {}
        }
        match (m.uses_kept_subset(), &self.kept_indices) {
            (true, None) => {
                return Err(Error::Invalid(format!(
                    "{m:?} provenance needs kept_indices"
                )))
            }
            (false, Some(_)) => {
                return Err(Error::Invalid(format!(
                    "{m:?} provenance must not carry kept_indices"
                )))
            }
            (true, Some(kept)) => {
                let sorted = kept.windows(2).all(|p| p[0] < p[1]);
                if !sorted || kept.iter().any(|&i| i >= N_COEFFS) {
                    return Err(Error::Invalid(
                        "kept_indices must be strictly increasing and below 50".into(),
                    ));
                }
            }
            _ => {}
        }
        if !(0.0..=1.0).contains(&self.label_weight) {
            return Err(Error::Invalid(format!(
                "label_weight {} outside [0, 1]",
                self.label_weight
            )));
        }
        Ok(())
    }
}

/// One labeled coefficient sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct VideoRecord {
    pub id: String,
    pub subject_id: String,
    pub fps: f64,
    pub frames: Vec<CoefficientFrame>,
    pub labels: Vec<AVSample>,
    pub provenance: Option<Provenance>,
}

impl VideoRecord {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn is_synthetic(&self) -> bool {
        self.provenance.is_some()
    }

    /// Checks the structural invariants of a single video.
    pub fn validate(&self) -> Result<()> {
        validate_id(&self.id)?;
        if self.frames.len() != self.labels.len() {
            return Err(Error::LengthMismatch {
                id: self.id.clone(),
                frames: self.frames.len(),
                labels: self.labels.len(),
            });
        }
        if self.frames.is_empty() {
            return Err(Error::EmptyVideo(self.id.clone()));
        }
        if !(self.fps.is_finite() && self.fps > 0.0) {
            return Err(Error::Invalid(format!(
                "video `{}`: fps must be positive",
                self.id
            )));
        }
        if let Some(t) = self.frames.iter().position(|f| !f.is_finite()) {
            return Err(Error::Invalid(format!(
                "video `{}`: non-finite coefficient at frame {t}",
                self.id
            )));
        }
        if let Some(t) = self.labels.iter().position(|l| !l.is_valid()) {
            let l = self.labels[t];
            return Err(Error::LabelOutOfRange(format!(
                "video `{}` frame {t}: ({}, {})",
                self.id, l.arousal, l.valence
            )));
        }
        if let Some(p) = &self.provenance {
            p.validate((0.0, 1.0))?;
        }
        Ok(())
    }

    /// Number of coefficient values outside `[-4, 4]`.
    pub fn outlier_count(&self) -> usize {
        self.frames
            .iter()
            .flat_map(|f| f.0.iter())
            .filter(|c| c.abs() > COEFF_RANGE)
            .count()
    }
}

pub(crate) fn validate_id(id: &str) -> Result<()> {
    let ok = !id.is_empty()
        && !id.starts_with('.')
        && id
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '-' | '.'));
    if ok {
        Ok(())
    } else {
        Err(Error::InvalidId(id.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Partition {
    Train,
    Val,
    Test,
}

impl Partition {
    pub const ALL: [Partition; 3] = [Partition::Train, Partition::Val, Partition::Test];

    pub fn as_str(self) -> &'static str {
        match self {
            Partition::Train => "train",
            Partition::Val => "val",
            Partition::Test => "test",
        }
    }
}

impl fmt::Display for Partition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Partition {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Partition::Train),
            "val" => Ok(Partition::Val),
            "test" => Ok(Partition::Test),
            _ => Err(Error::Config(format!("unknown partition `{s}`"))),
        }
    }
}

/// A validated collection of videos.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub fps: f64,
    pub videos: Vec<VideoRecord>,
    pub split: Option<BTreeMap<String, Partition>>,
}

impl Dataset {
    /// Builds a dataset, checking every invariant. An empty split map is
    /// stored as `None`, matching what the manifest can represent.
    pub fn new(
        fps: f64,
        videos: Vec<VideoRecord>,
        split: Option<BTreeMap<String, Partition>>,
    ) -> Result<Self> {
        let split = split.filter(|s| !s.is_empty());
        let d = Dataset { fps, videos, split };
        d.validate()?;
        Ok(d)
    }

    pub fn empty(fps: f64) -> Self {
        Dataset {
            fps,
            videos: Vec::new(),
            split: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.fps.is_finite() && self.fps > 0.0) {
            return Err(Error::Invalid(format!(
                "dataset fps {} must be positive",
                self.fps
            )));
        }
        let mut seen = HashSet::with_capacity(self.videos.len());
        for v in &self.videos {
            v.validate()?;
            if !seen.insert(v.id.as_str()) {
                return Err(Error::DuplicateId(v.id.clone()));
            }
        }
        let Some(split) = &self.split else {
            return Ok(());
        };
        if split.len() != self.videos.len()
            || self.videos.iter().any(|v| !split.contains_key(&v.id))
        {
            return Err(Error::Invalid(
                "split must assign every video exactly once".into(),
            ));
        }
        let mut subject_part: BTreeMap<&str, Partition> = BTreeMap::new();
        for v in &self.videos {
            let p = split[&v.id];
            if v.is_synthetic() {
                if p != Partition::Train {
                    return Err(Error::Invalid(format!(
                        "synthetic video `{}` is in {p}, not train",
                        v.id
                    )));
                }
                continue;
            }
            match subject_part.insert(&v.subject_id, p) {
                Some(prev) if prev != p => {
                    return Err(Error::Invalid(format!(
                        "subject `{}` appears in both {prev} and {p}",
                        v.subject_id
                    )))
                }
                _ => {}
            }
        }
        Ok(())
    }

    pub fn get(&self, id: &str) -> Option<&VideoRecord> {
        self.videos.iter().find(|v| v.id == id)
    }

    pub fn partition_of(&self, id: &str) -> Option<Partition> {
        self.split.as_ref()?.get(id).copied()
    }

    /// Videos of `partition`, in dataset order. Empty when the dataset has
    /// no split.
    pub fn partition(&self, partition: Partition) -> Vec<&VideoRecord> {
        self.videos
            .iter()
            .filter(|v| self.partition_of(&v.id) == Some(partition))
            .collect()
    }

    pub fn subjects(&self) -> BTreeSet<&str> {
        self.videos.iter().map(|v| v.subject_id.as_str()).collect()
    }

    /// `(video id, frame, dimension, value)` for every coefficient outside
    /// `[-4, 4]`.
    pub fn outliers(&self) -> Vec<(String, usize, usize, f64)> {
        let mut out = Vec::new();
        for v in &self.videos {
            for (t, f) in v.frames.iter().enumerate() {
                for (d, &c) in f.0.iter().enumerate() {
                    if c.abs() > COEFF_RANGE {
                        out.push((v.id.clone(), t, d, c));
                    }
                }
            }
        }
        out
    }
}

// ---------------------------------------------------------------------------
// Persistence

#[derive(Serialize, Deserialize)]
struct Manifest {
    fps: f64,
    videos: Vec<ManifestEntry>,
}

#[derive(Serialize, Deserialize)]
struct ManifestEntry {
    id: String,
    subject: String,
    path: String,
    synthetic: bool,
    split: Option<Partition>,
    provenance: Option<Provenance>,
}

/// Formats a float with 17 significant digits.
pub(crate) fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn csv_header() -> Vec<String> {
    let mut h = vec!["frame".to_string(), "arousal".into(), "valence".into()];
    h.extend((0..N_COEFFS).map(|i| format!("c{i:02}")));
    h
}

/// Serializes one video to the per-video CSV format.
pub fn write_video_csv<W: Write>(v: &VideoRecord, mut out: W) -> std::io::Result<()> {
    use std::fmt::Write as _;
    // Every field is numeric or a fixed column name, so no quoting is
    // needed; writing rows directly avoids a String per value.
    let mut row = csv_header().join(",");
    row.push('\n');
    out.write_all(row.as_bytes())?;
    for (t, (f, l)) in v.frames.iter().zip(&v.labels).enumerate() {
        row.clear();
        write!(row, "{t},{:.16e},{:.16e}", l.arousal, l.valence).expect("write to String");
        for c in &f.0 {
            write!(row, ",{c:.16e}").expect("write to String");
        }
        row.push('\n');
        out.write_all(row.as_bytes())?;
    }
    out.flush()
}

/// Parses a per-video CSV into `(frames, labels)`.
///
/// Errors name the file and the 1-based line of the offending row.
pub fn read_video_csv(path: &Path) -> Result<(Vec<CoefficientFrame>, Vec<AVSample>)> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(std::io::BufReader::new(file));
    let schema = |line: u64, message: String| Error::Schema {
        path: path.to_path_buf(),
        line,
        message,
    };
    let expected = csv_header();
    let mut frames = Vec::new();
    let mut labels = Vec::new();
    let mut record = csv::StringRecord::new();
    let mut first = true;
    loop {
        let more = r.read_record(&mut record).map_err(|e| match e.kind() {
            csv::ErrorKind::Io(_) => Error::io(path, std::io::Error::other(e.to_string())),
            _ => schema(e.position().map_or(0, |p| p.line()), e.to_string()),
        })?;
        if !more {
            break;
        }
        let line = record.position().map_or(0, |p| p.line());
        if first {
            first = false;
            if record.iter().ne(expected.iter().map(String::as_str)) {
                return Err(schema(
                    line,
                    "header must be frame,arousal,valence,c00..c49".into(),
                ));
            }
            continue;
        }
        if record.len() != 3 + N_COEFFS {
            return Err(schema(
                line,
                format!("expected {} columns, found {}", 3 + N_COEFFS, record.len()),
            ));
        }
        let frame: usize = record[0].trim().parse().map_err(|_| {
            schema(
                line,
                format!("frame index `{}` is not an integer", &record[0]),
            )
        })?;
        if frame != frames.len() {
            return Err(schema(
                line,
                format!("expected frame {}, found {frame}", frames.len()),
            ));
        }
        let num = |i: usize| -> Result<f64> {
            record[i].trim().parse::<f64>().map_err(|_| {
                schema(
                    line,
                    format!("column {i}: `{}` is not a number", &record[i]),
                )
            })
        };
        let label = AVSample::new(num(1)?, num(2)?);
        if !label.is_valid() {
            return Err(Error::LabelOutOfRange(format!(
                "{}:{line}: ({}, {})",
                path.display(),
                label.arousal,
                label.valence
            )));
        }
        let mut f = CoefficientFrame::zeros();
        for d in 0..N_COEFFS {
            f[d] = num(3 + d)?;
        }
        if !f.is_finite() {
            return Err(schema(line, "non-finite coefficient".into()));
        }
        frames.push(f);
        labels.push(label);
    }
    if first {
        return Err(schema(1, "missing header".into()));
    }
    Ok((frames, labels))
}

fn video_rel_path(id: &str) -> String {
    format!("videos/{id}.csv")
}

/// Writes `d` under `dir` and returns the manifest path.
pub fn save_dataset(d: &Dataset, dir: &Path) -> Result<PathBuf> {
    fs::create_dir_all(dir.join("videos")).map_err(|e| Error::io(dir, e))?;
    d.videos.par_iter().try_for_each(|v| -> Result<()> {
        let path = dir.join(video_rel_path(&v.id));
        let mut buf = Vec::with_capacity(v.len() * 1300);
        write_video_csv(v, &mut buf).map_err(|e| Error::io(&path, e))?;
        fs::write(&path, buf).map_err(|e| Error::io(&path, e))
    })?;
    let manifest = Manifest {
        fps: d.fps,
        videos: d
            .videos
            .iter()
            .map(|v| ManifestEntry {
                id: v.id.clone(),
                subject: v.subject_id.clone(),
                path: video_rel_path(&v.id),
                synthetic: v.is_synthetic(),
                split: d.partition_of(&v.id),
                provenance: v.provenance.clone(),
            })
            .collect(),
    };
    let path = dir.join(MANIFEST_FILE);
    let mut text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    text.push('\n');
    fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

/// Loads a dataset from a manifest file (or a directory containing
/// `manifest.json`). Coefficient outliers are logged, not rejected.
pub fn load_dataset(manifest_path: &Path) -> Result<Dataset> {
    let manifest_path = if manifest_path.is_dir() {
        manifest_path.join(MANIFEST_FILE)
    } else {
        manifest_path.to_path_buf()
    };
    let text = fs::read_to_string(&manifest_path).map_err(|e| Error::io(&manifest_path, e))?;
    let manifest: Manifest = serde_json::from_str(&text).map_err(|e| Error::Manifest {
        path: manifest_path.clone(),
        source: e,
    })?;
    let base = manifest_path.parent().unwrap_or(Path::new("."));

    let mut seen = HashSet::new();
    for e in &manifest.videos {
        validate_id(&e.id)?;
        if !seen.insert(e.id.as_str()) {
            return Err(Error::DuplicateId(e.id.clone()));
        }
        if e.synthetic != e.provenance.is_some() {
            return Err(Error::Invalid(format!(
                "video `{}`: synthetic flag disagrees with provenance",
                e.id
            )));
        }
    }

    let fps = manifest.fps;
    let videos = manifest
        .videos
        .par_iter()
        .map(|e| -> Result<VideoRecord> {
            let (frames, labels) = read_video_csv(&base.join(&e.path))?;
            Ok(VideoRecord {
                id: e.id.clone(),
                subject_id: e.subject.clone(),
                fps,
                frames,
                labels,
                provenance: e.provenance.clone(),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let n_split = manifest.videos.iter().filter(|e| e.split.is_some()).count();
    let split = match n_split {
        0 => None,
        n if n == manifest.videos.len() => Some(
            manifest
                .videos
                .iter()
                .map(|e| (e.id.clone(), e.split.expect("checked")))
                .collect(),
        ),
        _ => {
            return Err(Error::Invalid(
                "manifest assigns a split to some videos but not all".into(),
            ))
        }
    };

    let d = Dataset::new(fps, videos, split)?;
    for v in &d.videos {
        let n = v.outlier_count();
        if n > 0 {
            log::warn!("video `{}`: {n} coefficient(s) outside [-4, 4]", v.id);
        }
    }
    Ok(d)
}

// ---------------------------------------------------------------------------
// Splitting

/// Assigns every subject to train/val/test.
///
/// Subjects are shuffled with the seeded RNG, then each goes to the
/// partition whose video count is furthest below `ratio * total` (ties go to
/// the earlier partition). All videos of a subject share a partition.
pub fn split_by_subject(d: &Dataset, ratios: [f64; 3], seed: u64) -> Result<Dataset> {
    if ratios.iter().any(|r| !(r.is_finite() && *r >= 0.0)) {
        return Err(Error::Config("split ratios must be non-negative".into()));
    }
    let sum: f64 = ratios.iter().sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(Error::Config(format!("split ratios sum to {sum}, not 1")));
    }
    if let Some(v) = d.videos.iter().find(|v| v.is_synthetic()) {
        return Err(Error::Invalid(format!(
            "cannot split a dataset containing synthetic video `{}`",
            v.id
        )));
    }
    let mut per_subject: BTreeMap<&str, usize> = BTreeMap::new();
    for v in &d.videos {
        *per_subject.entry(&v.subject_id).or_default() += 1;
    }
    if per_subject.len() < 3 {
        return Err(Error::Invalid(format!(
            "need at least 3 subjects to split, found {}",
            per_subject.len()
        )));
    }

    let mut subjects: Vec<(&str, usize)> = per_subject.into_iter().collect();
    subjects.shuffle(&mut StreamSeed::new(seed).with_str("split").rng());

    let total = d.videos.len() as f64;
    let mut counts = [0usize; 3];
    let mut assigned: BTreeMap<&str, Partition> = BTreeMap::new();
    for (subject, n) in subjects {
        let deficit = |p: usize| ratios[p] * total - counts[p] as f64;
        let mut best = 0;
        for p in 1..3 {
            if deficit(p) > deficit(best) + 1e-9 {
                best = p;
            }
        }
        counts[best] += n;
        assigned.insert(subject, Partition::ALL[best]);
    }

    let split = d
        .videos
        .iter()
        .map(|v| (v.id.clone(), assigned[v.subject_id.as_str()]))
        .collect();
    Dataset::new(d.fps, d.videos.clone(), Some(split))
}
