use std::collections::BTreeMap;

use avblend::dataset::{
    load_dataset, save_dataset, split_by_subject, AVSample, Alignment, BlendMethod,
    CoefficientFrame, Dataset, Partition, Provenance, VideoRecord, DEFAULT_FPS,
};
use proptest::prelude::*;

fn arb_frame() -> impl Strategy<Value = CoefficientFrame> {
    prop::collection::vec(
        prop_oneof![-5.0f64..5.0, Just(0.0), Just(-0.0), Just(1e-300)],
        50,
    )
    .prop_map(|v| CoefficientFrame::from_slice(&v).unwrap())
}

fn arb_label() -> impl Strategy<Value = AVSample> {
    (-1.0f64..=1.0, -1.0f64..=1.0).prop_map(|(a, v)| AVSample::new(a, v))
}

fn arb_provenance() -> impl Strategy<Value = Option<Provenance>> {
    prop_oneof![
        Just(None),
        (
            0.25f64..=0.75,
            any::<u64>(),
            prop::collection::btree_set(0usize..50, 1..20)
        )
            .prop_map(|(w, seed, kept)| Some(Provenance {
                source_id: "src".into(),
                target_id: "tgt".into(),
                alignment: Alignment::VideoBased,
                blend_method: BlendMethod::SelectiveWeighted,
                weight: Some(w),
                kept_indices: Some(kept.into_iter().collect()),
                label_weight: w,
                seed,
            })),
    ]
}

fn arb_video(i: usize) -> impl Strategy<Value = VideoRecord> {
    (1usize..6, arb_provenance()).prop_flat_map(move |(n, provenance)| {
        (
            prop::collection::vec(arb_frame(), n),
            prop::collection::vec(arb_label(), n),
            0usize..3,
        )
            .prop_map(move |(frames, labels, subject)| VideoRecord {
                id: format!("v{i}"),
                subject_id: format!("s{subject}"),
                fps: DEFAULT_FPS,
                frames,
                labels,
                provenance: provenance.clone(),
            })
    })
}

fn arb_dataset() -> impl Strategy<Value = Dataset> {
    (0usize..5)
        .prop_flat_map(|n| (0..n).map(arb_video).collect::<Vec<_>>())
        .prop_flat_map(|videos| (Just(videos), any::<bool>()))
        .prop_map(|(videos, with_split)| {
            // Partition by subject so the split is always valid.
            let split = with_split.then(|| {
                videos
                    .iter()
                    .map(|v| {
                        let p = if v.is_synthetic() {
                            Partition::Train
                        } else {
                            let s: usize = v.subject_id[1..].parse().unwrap();
                            Partition::ALL[s % 3]
                        };
                        (v.id.clone(), p)
                    })
                    .collect::<BTreeMap<_, _>>()
            });
            Dataset::new(DEFAULT_FPS, videos, split).unwrap()
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn save_load_round_trip(d in arb_dataset()) {
        let dir = tempfile::tempdir().unwrap();
        let path = save_dataset(&d, dir.path()).unwrap();
        let back = load_dataset(&path).unwrap();
        // Bit-exact, which is stronger than 15 significant digits.
        prop_assert_eq!(&back, &d);
        let again = save_dataset(&back, dir.path()).unwrap();
        prop_assert_eq!(std::fs::read(&path).unwrap(), std::fs::read(again).unwrap());
    }

    #[test]
    fn split_invariants(per_subject in prop::collection::vec(1usize..6, 3..25), seed in any::<u64>(),
                        r in (1u32..20, 0u32..10, 0u32..10)) {
        let mut videos = Vec::new();
        for (s, &n) in per_subject.iter().enumerate() {
            for k in 0..n {
                videos.push(VideoRecord {
                    id: format!("s{s}_v{k}"),
                    subject_id: format!("s{s}"),
                    fps: DEFAULT_FPS,
                    frames: vec![CoefficientFrame::zeros()],
                    labels: vec![AVSample::default()],
                    provenance: None,
                });
            }
        }
        let d = Dataset::new(DEFAULT_FPS, videos, None).unwrap();
        let total = (r.0 + r.1 + r.2) as f64;
        let ratios = [r.0 as f64 / total, r.1 as f64 / total, 1.0 - (r.0 + r.1) as f64 / total];
        let s = split_by_subject(&d, ratios, seed).unwrap();
        prop_assert_eq!(&s, &split_by_subject(&d, ratios, seed).unwrap());

        let n = d.videos.len() as f64;
        let max_share = *per_subject.iter().max().unwrap() as f64 / n;
        for (i, p) in Partition::ALL.iter().enumerate() {
            let frac = s.partition(*p).len() as f64 / n;
            prop_assert!((frac - ratios[i]).abs() <= max_share + 1e-9,
                "{p}: {frac} vs {} (max share {max_share})", ratios[i]);
        }
        let mut subject_part = BTreeMap::new();
        for v in &s.videos {
            let p = s.partition_of(&v.id).unwrap();
            prop_assert_eq!(*subject_part.entry(v.subject_id.clone()).or_insert(p), p);
        }
    }
}
