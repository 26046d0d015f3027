//! Regression metrics for continuous affect: RMSE, Pearson correlation and
//! Lin's concordance correlation coefficient (CCC), the combined training
//! loss, and evaluation of prediction files.
//!
//! All moments are population moments (divide by `n`).
//!
//! CCC is evaluated in covariance form,
//!
//! ```text
//!            2 · cov(x, y)
//! CCC = ─────────────────────────────
//!       σx² + σy² + (μx − μy)²
//! ```
//!
//! which equals `2 σx σy PCC / (σx² + σy² + (μx − μy)²)` whenever PCC is
//! defined and stays finite when one series is constant.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataset::{AVSample, Dataset, Partition};
use crate::error::{Error, Result};

/// Denominators below this make CCC the identical-constants case.
const CCC_DEGENERATE: f64 = 1e-15;

/// A prediction series `x` and its ground truth `y`.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesPair {
    x: Vec<f64>,
    y: Vec<f64>,
}

impl SeriesPair {
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        if x.len() != y.len() {
            return Err(Error::Invalid(format!(
                "series lengths differ: {} vs {}",
                x.len(),
                y.len()
            )));
        }
        if x.is_empty() {
            return Err(Error::Invalid("empty series".into()));
        }
        if x.iter().chain(&y).any(|v| !v.is_finite()) {
            return Err(Error::Invalid("series contain non-finite values".into()));
        }
        Ok(SeriesPair { x, y })
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn moments(&self) -> Moments {
        Moments::of(&self.x, &self.y)
    }
}

/// Population means, variances and covariance of a series pair, accumulated
/// in a single pass with Welford updates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Moments {
    pub n: usize,
    pub mean_x: f64,
    pub mean_y: f64,
    pub var_x: f64,
    pub var_y: f64,
    pub cov: f64,
}

impl Moments {
    pub fn of(x: &[f64], y: &[f64]) -> Moments {
        let (mut mx, mut my, mut m2x, mut m2y, mut cxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for (i, (&a, &b)) in x.iter().zip(y).enumerate() {
            let n = (i + 1) as f64;
            let dx = a - mx;
            let dy = b - my;
            mx += dx / n;
            my += dy / n;
            m2x += dx * (a - mx);
            m2y += dy * (b - my);
            cxy += dx * (b - my);
        }
        let n = x.len().min(y.len());
        let nf = n.max(1) as f64;
        Moments {
            n,
            mean_x: mx,
            mean_y: my,
            var_x: m2x / nf,
            var_y: m2y / nf,
            cov: cxy / nf,
        }
    }
}

pub fn rmse(p: &SeriesPair) -> f64 {
    let ss: f64 = p.x.iter().zip(&p.y).map(|(a, b)| (a - b) * (a - b)).sum();
    (ss / p.len() as f64).sqrt()
}

/// Pearson correlation. Errors when either series has zero variance.
pub fn pcc(p: &SeriesPair) -> Result<f64> {
    let m = p.moments();
    if m.var_x <= 0.0 {
        return Err(Error::UndefinedCorrelation("prediction"));
    }
    if m.var_y <= 0.0 {
        return Err(Error::UndefinedCorrelation("ground truth"));
    }
    Ok((m.cov / (m.var_x.sqrt() * m.var_y.sqrt())).clamp(-1.0, 1.0))
}

/// Lin's concordance correlation coefficient.
pub fn ccc(p: &SeriesPair) -> Result<f64> {
    if p.len() < 2 {
        return Err(Error::Invalid("CCC needs at least two samples".into()));
    }
    let m = p.moments();
    let dm = m.mean_x - m.mean_y;
    let denom = m.var_x + m.var_y + dm * dm;
    if denom < CCC_DEGENERATE {
        return Ok(1.0);
    }
    Ok((2.0 * m.cov / denom).clamp(-1.0, 1.0))
}

/// Mixture weights of the combined loss.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub rmse: f64,
    pub pcc: f64,
    pub ccc: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights {
            rmse: 1.0,
            pcc: 1.0,
            ccc: 1.0,
        }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        let w = [self.rmse, self.pcc, self.ccc];
        if w.iter().any(|x| !(x.is_finite() && *x >= 0.0)) || w.iter().all(|&x| x == 0.0) {
            return Err(Error::Config(
                "loss weights must be non-negative with at least one positive".into(),
            ));
        }
        Ok(())
    }
}

/// `λ_rmse·RMSE + λ_pcc·(1 − PCC) + λ_ccc·(1 − CCC)` for one dimension.
/// An undefined PCC contributes `1 − PCC = 1`.
pub fn dimension_loss(p: &SeriesPair, w: &LossWeights) -> Result<f64> {
    let one_minus_pcc = pcc(p).map_or(1.0, |r| 1.0 - r);
    Ok(w.rmse * rmse(p) + w.pcc * one_minus_pcc + w.ccc * (1.0 - ccc(p)?))
}

/// Mean of the arousal and valence dimension losses.
pub fn combined_loss(arousal: &SeriesPair, valence: &SeriesPair, w: &LossWeights) -> Result<f64> {
    w.validate()?;
    Ok(0.5 * (dimension_loss(arousal, w)? + dimension_loss(valence, w)?))
}

// ---------------------------------------------------------------------------
// Prediction files

pub const PREDICTION_HEADER: [&str; 4] =
    ["video_id", "window_start", "arousal_pred", "valence_pred"];

/// Key of one evaluation window.
pub type WindowKey = (String, usize);

/// Window geometry shared with the sequence trainer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Windowing {
    pub length: usize,
    pub stride: usize,
}

impl Default for Windowing {
    fn default() -> Self {
        Windowing {
            length: 100,
            stride: 50,
        }
    }
}

impl Windowing {
    /// Window starts `0, stride, 2·stride, …` that fit inside `n` frames.
    pub fn starts(&self, n: usize) -> impl Iterator<Item = usize> {
        let last = n.checked_sub(self.length);
        let stride = self.stride;
        (0..)
            .map(move |i| i * stride)
            .take_while(move |&s| last.is_some_and(|l| s <= l))
    }
}

/// Ground-truth label of every window of `partition`, keyed in canonical
/// `(video id, window start)` order. A window's label is the mean of its
/// per-frame labels.
pub fn window_truth(
    d: &Dataset,
    partition: Partition,
    windowing: Windowing,
) -> Result<BTreeMap<WindowKey, AVSample>> {
    if windowing.length == 0 || windowing.stride == 0 {
        return Err(Error::Config(
            "window length and stride must be positive".into(),
        ));
    }
    if d.split.is_none() {
        return Err(Error::Invalid("evaluation needs a split dataset".into()));
    }
    let mut out = BTreeMap::new();
    for v in d.partition(partition) {
        if v.len() < windowing.length {
            return Err(Error::Invalid(format!(
                "video `{}` has {} frames, shorter than the {}-frame window",
                v.id,
                v.len(),
                windowing.length
            )));
        }
        for s in windowing.starts(v.len()) {
            let w = &v.labels[s..s + windowing.length];
            let n = w.len() as f64;
            let a = w.iter().map(|l| l.arousal).sum::<f64>() / n;
            let val = w.iter().map(|l| l.valence).sum::<f64>() / n;
            out.insert((v.id.clone(), s), AVSample::new(a, val));
        }
    }
    Ok(out)
}

/// Reads a prediction CSV. Duplicate keys are an error.
pub fn read_predictions(path: &Path) -> Result<BTreeMap<WindowKey, AVSample>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = csv::Reader::from_reader(std::io::BufReader::new(file));
    let schema = |line: u64, message: String| Error::Schema {
        path: path.to_path_buf(),
        line,
        message,
    };
    let header = r.headers().map_err(|e| schema(1, e.to_string()))?.clone();
    if header.iter().ne(PREDICTION_HEADER) {
        return Err(schema(
            1,
            format!("header must be {}", PREDICTION_HEADER.join(",")),
        ));
    }
    let mut out = BTreeMap::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| schema(e.position().map_or(0, |p| p.line()), e.to_string()))?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != 4 {
            return Err(schema(
                line,
                format!("expected 4 columns, found {}", rec.len()),
            ));
        }
        let start: usize = rec[1].trim().parse().map_err(|_| {
            schema(
                line,
                format!("window_start `{}` is not an integer", &rec[1]),
            )
        })?;
        let num = |i: usize| {
            rec[i]
                .trim()
                .parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| schema(line, format!("`{}` is not a finite number", &rec[i])))
        };
        let pred = AVSample::new(num(2)?, num(3)?);
        if out.insert((rec[0].to_string(), start), pred).is_some() {
            return Err(schema(
                line,
                format!("duplicate prediction for ({}, {start})", &rec[0]),
            ));
        }
    }
    Ok(out)
}

pub fn write_predictions<W: Write>(
    preds: &BTreeMap<WindowKey, AVSample>,
    out: W,
) -> std::io::Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    w.write_record(PREDICTION_HEADER)?;
    for ((id, start), p) in preds {
        w.write_record([
            id.clone(),
            start.to_string(),
            crate::dataset::fmt_f64(p.arousal),
            crate::dataset::fmt_f64(p.valence),
        ])?;
    }
    w.flush()
}

/// Evaluation summary; the CCC columns mirror the usual arousal / valence /
/// mean reporting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub ccc_arousal: f64,
    pub ccc_valence: f64,
    pub ccc_mean: f64,
    pub pcc_arousal: Option<f64>,
    pub pcc_valence: Option<f64>,
    pub rmse_arousal: f64,
    pub rmse_valence: f64,
    pub n_windows: usize,
}

fn key_name(k: &WindowKey) -> String {
    format!("{}@{}", k.0, k.1)
}

/// Scores predictions against window truths, concatenating all windows in
/// canonical key order.
pub fn evaluate(
    preds: &BTreeMap<WindowKey, AVSample>,
    truth: &BTreeMap<WindowKey, AVSample>,
) -> Result<EvalReport> {
    let missing: Vec<String> = truth
        .keys()
        .filter(|k| !preds.contains_key(*k))
        .map(key_name)
        .collect();
    let extra: Vec<String> = preds
        .keys()
        .filter(|k| !truth.contains_key(*k))
        .map(key_name)
        .collect();
    if !missing.is_empty() || !extra.is_empty() {
        return Err(Error::PredictionKeys { missing, extra });
    }
    let series = |f: fn(&AVSample) -> f64| {
        SeriesPair::new(
            preds.values().map(f).collect(),
            truth.values().map(f).collect(),
        )
    };
    let a = series(|s| s.arousal)?;
    let v = series(|s| s.valence)?;
    let ccc_arousal = ccc(&a)?;
    let ccc_valence = ccc(&v)?;
    Ok(EvalReport {
        ccc_arousal,
        ccc_valence,
        ccc_mean: 0.5 * (ccc_arousal + ccc_valence),
        pcc_arousal: pcc(&a).ok(),
        pcc_valence: pcc(&v).ok(),
        rmse_arousal: rmse(&a),
        rmse_valence: rmse(&v),
        n_windows: a.len(),
    })
}

/// Reads `pred_file` and scores it against `partition` of `truth`.
pub fn eval_predictions(
    pred_file: &Path,
    truth: &Dataset,
    partition: Partition,
    windowing: Windowing,
) -> Result<EvalReport> {
    let preds = read_predictions(pred_file)?;
    let expected = window_truth(truth, partition, windowing)?;
    if expected.is_empty() {
        return Err(Error::Invalid(format!(
            "partition {partition} has no windows"
        )));
    }
    evaluate(&preds, &expected)
}
