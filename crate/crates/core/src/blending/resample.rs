use crate::dataset::{AVSample, CoefficientFrame, VideoRecord, N_COEFFS};
use crate::error::{Error, Result};

/// Linear interpolation of `xs` at fractional index `pos`.
fn sample<T: Copy>(xs: &[T], pos: f64, lerp: impl Fn(&T, &T, f64) -> T) -> T {
    let i = (pos.floor() as usize).min(xs.len() - 1);
    let frac = pos - i as f64;
    if frac <= 0.0 || i + 1 >= xs.len() {
        xs[i]
    } else {
        lerp(&xs[i], &xs[i + 1], frac)
    }
}

/// Resamples every coefficient and label channel of `v` to `new_len` frames.
///
/// Both sequences are treated as functions of normalized time in `[0, 1]`;
/// output frame `i` sits at time `i / (new_len - 1)`. A single-frame output
/// takes the first frame.
pub fn resample_video(v: &VideoRecord, new_len: usize) -> Result<VideoRecord> {
    if new_len == 0 {
        return Err(Error::Invalid("cannot resample to zero frames".into()));
    }
    if v.is_empty() {
        return Err(Error::EmptyVideo(v.id.clone()));
    }
    if new_len == v.len() {
        return Ok(v.clone());
    }
    let mut frames = Vec::with_capacity(new_len);
    let mut labels = Vec::with_capacity(new_len);
    for i in 0..new_len {
        // Integer numerator keeps the endpoints exact.
        let pos = if new_len > 1 {
            (i * (v.len() - 1)) as f64 / (new_len - 1) as f64
        } else {
            0.0
        };
        frames.push(sample(&v.frames, pos, |a, b, t| {
            let mut out = CoefficientFrame::zeros();
            for d in 0..N_COEFFS {
                out[d] = super::mix(b[d], a[d], t);
            }
            out
        }));
        labels.push(sample(&v.labels, pos, |a, b, t| {
            AVSample::new(
                super::mix(b.arousal, a.arousal, t),
                super::mix(b.valence, a.valence, t),
            )
        }));
    }
    Ok(VideoRecord {
        frames,
        labels,
        ..v.clone()
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::DEFAULT_FPS;
    use proptest::prelude::*;

    fn channel_video(values: &[f64]) -> VideoRecord {
        VideoRecord {
            id: "v".into(),
            subject_id: "s".into(),
            fps: DEFAULT_FPS,
            frames: values
                .iter()
                .map(|&x| {
                    let mut f = CoefficientFrame::zeros();
                    f[0] = x;
                    f[7] = 2.5;
                    f
                })
                .collect(),
            labels: values
                .iter()
                .map(|&x| AVSample::new(x / 4.0, 0.3))
                .collect(),
            provenance: None,
        }
    }

    #[test]
    fn identity_length() {
        let v = channel_video(&[0.1, -0.4, 3.0]);
        assert_eq!(resample_video(&v, 3).unwrap(), v);
    }

    #[test]
    fn two_points_to_three() {
        let r = resample_video(&channel_video(&[0.0, 1.0]), 3).unwrap();
        let ch: Vec<f64> = r.frames.iter().map(|f| f[0]).collect();
        assert_eq!(ch, [0.0, 0.5, 1.0]);
        let a: Vec<f64> = r.labels.iter().map(|l| l.arousal).collect();
        assert_eq!(a, [0.0, 0.125, 0.25]);
    }

    #[test]
    fn rejects_zero_length() {
        assert!(resample_video(&channel_video(&[1.0]), 0).is_err());
    }

    #[test]
    fn single_frame_source_repeats() {
        let r = resample_video(&channel_video(&[0.7]), 5).unwrap();
        assert!(r.frames.iter().all(|f| f[0] == 0.7));
    }

    proptest! {
        #[test]
        fn constant_channels_stay_constant(values in prop::collection::vec(-4.0f64..4.0, 1..50), n in 1usize..200) {
            let r = resample_video(&channel_video(&values), n).unwrap();
            prop_assert_eq!(r.len(), n);
            prop_assert!(r.frames.iter().all(|f| f[7] == 2.5 && f[1] == 0.0));
            prop_assert!(r.labels.iter().all(|l| l.valence == 0.3));
            // Endpoints are preserved and values stay within the input range.
            prop_assert_eq!(r.frames[0][0], values[0]);
            if n > 1 {
                prop_assert_eq!(r.frames[n - 1][0], *values.last().unwrap());
            }
            let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(r.frames.iter().all(|f| f[0] >= lo && f[0] <= hi));
        }
    }
}
