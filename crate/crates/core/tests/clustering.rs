use avblend::avspace::{kmeans_cluster, FrameIndex, VideoDescriptor};
use avblend::dataset::{AVSample, CoefficientFrame, VideoRecord, DEFAULT_FPS, N_COEFFS};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const CORNERS: [(f64, f64); 4] = [(0.8, 0.8), (0.8, -0.8), (-0.8, 0.8), (-0.8, -0.8)];

fn descriptor(i: usize, p: AVSample) -> VideoDescriptor {
    VideoDescriptor {
        video_id: format!("v{i:02}"),
        mean_av: p,
        coeff_mean: [0.0; N_COEFFS],
        coeff_var: [0.0; N_COEFFS],
    }
}

fn sse(points: &[AVSample], members: &[usize]) -> f64 {
    if members.is_empty() {
        return 0.0;
    }
    let n = members.len() as f64;
    let ma = members.iter().map(|&i| points[i].arousal).sum::<f64>() / n;
    let mv = members.iter().map(|&i| points[i].valence).sum::<f64>() / n;
    members
        .iter()
        .map(|&i| (points[i].arousal - ma).powi(2) + (points[i].valence - mv).powi(2))
        .sum()
}

/// Optimal 2-partition by exhaustive search, as a membership mask with
/// point 0 always on the `false` side.
fn brute_force_two(points: &[AVSample]) -> (f64, Vec<bool>) {
    let n = points.len();
    let mut best = (f64::INFINITY, Vec::new());
    for mask in 1u32..(1 << (n - 1)) {
        let side: Vec<bool> = (0..n).map(|i| i > 0 && mask >> (i - 1) & 1 == 1).collect();
        let a: Vec<usize> = (0..n).filter(|&i| !side[i]).collect();
        let b: Vec<usize> = (0..n).filter(|&i| side[i]).collect();
        let cost = sse(points, &a) + sse(points, &b);
        if cost < best.0 {
            best = (cost, side);
        }
    }
    best
}

#[test]
fn kmeans_recovers_two_separated_clouds() {
    let mut rng = ChaCha8Rng::seed_from_u64(30);
    for trial in 0..500 {
        let (ca, cb) = loop {
            let a = rng.random_range(0..4);
            let b = rng.random_range(0..4);
            if a != b {
                break (CORNERS[a], CORNERS[b]);
            }
        };
        let n = rng.random_range(2..=10);
        let n_a = rng.random_range(1..n);
        let mut points = Vec::with_capacity(n);
        let mut truth = Vec::with_capacity(n);
        for i in 0..n {
            let c = if i < n_a { ca } else { cb };
            // Radius 0.2 keeps each cloud's diameter below the 1.2 gap.
            let r = rng.random_range(0.0..0.2f64);
            let t = rng.random_range(0.0..std::f64::consts::TAU);
            points.push(AVSample::new(c.0 + r * t.cos(), c.1 + r * t.sin()));
            truth.push(i >= n_a);
        }

        let (best, side) = brute_force_two(&points);
        assert_eq!(side, truth, "brute force disagrees with the construction");

        let descs: Vec<_> = points
            .iter()
            .enumerate()
            .map(|(i, &p)| descriptor(i, p))
            .collect();
        let c = kmeans_cluster(&descs, 2, trial).unwrap();
        let label: Vec<usize> = descs
            .iter()
            .map(|d| c.cluster_of(&d.video_id).unwrap())
            .collect();
        let got: Vec<bool> = label.iter().map(|&l| l != label[0]).collect();
        assert_eq!(got, side, "trial {trial}");
        let members = |k: usize| (0..n).filter(|&i| label[i] == k).collect::<Vec<_>>();
        assert!((sse(&points, &members(0)) + sse(&points, &members(1)) - best).abs() <= 1e-12);
    }
}

fn pool(rng: &mut ChaCha8Rng, n_videos: usize, max_len: usize, lattice: bool) -> Vec<VideoRecord> {
    (0..n_videos)
        .map(|i| {
            let len = rng.random_range(1..=max_len);
            let mut coord = || {
                if lattice {
                    // Coarse lattice values force exact distance ties.
                    rng.random_range(-4i32..=4) as f64 / 4.0
                } else {
                    rng.random_range(-1.0..=1.0)
                }
            };
            let labels = (0..len).map(|_| AVSample::new(coord(), coord())).collect();
            VideoRecord {
                id: format!("p{i:03}"),
                subject_id: "s".into(),
                fps: DEFAULT_FPS,
                frames: vec![CoefficientFrame::zeros(); len],
                labels,
                provenance: None,
            }
        })
        .collect()
}

/// Linear scan with ties broken by (video id, frame).
fn brute_nearest(pool: &[VideoRecord], q: &AVSample) -> (String, usize, f64) {
    let mut best: Option<(String, usize, f64)> = None;
    for v in pool {
        for (t, l) in v.labels.iter().enumerate() {
            let d = l.distance_squared(q);
            let better = match &best {
                None => true,
                Some((id, f, bd)) => d < *bd || (d == *bd && (&v.id, t) < (id, *f)),
            };
            if better {
                best = Some((v.id.clone(), t, d));
            }
        }
    }
    best.unwrap()
}

#[test]
fn frame_index_equals_brute_force_scan() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for round in 0..40 {
        let lattice = round % 2 == 1;
        let n_videos = rng.random_range(1..=20);
        let p = pool(&mut rng, n_videos, 100, lattice);
        let frames: usize = p.iter().map(|v| v.len()).sum();
        assert!(frames <= 2000);
        for cells in [1, 4, 16, 33] {
            let index = FrameIndex::build(&p, cells);
            assert_eq!(index.len(), frames);
            for _ in 0..100 {
                let q = if lattice {
                    AVSample::new(
                        rng.random_range(-8i32..=8) as f64 / 8.0,
                        rng.random_range(-8i32..=8) as f64 / 8.0,
                    )
                } else {
                    AVSample::new(rng.random_range(-1.0..=1.0), rng.random_range(-1.0..=1.0))
                };
                let hit = index.nearest(&q).unwrap();
                let (id, frame, d) = brute_nearest(&p, &q);
                assert_eq!((hit.video.id.as_str(), hit.frame), (id.as_str(), frame));
                assert_eq!(hit.distance_squared, d);
            }
        }
    }
}

#[test]
fn frame_index_on_a_full_two_thousand_frame_pool() {
    let mut rng = ChaCha8Rng::seed_from_u64(32);
    let mut p = pool(&mut rng, 20, 100, false);
    for v in &mut p {
        v.frames.resize(100, CoefficientFrame::zeros());
        v.labels.resize_with(100, || {
            AVSample::new(rng.random_range(-1.0..=1.0), rng.random_range(-1.0..=1.0))
        });
    }
    let index = FrameIndex::build(&p, 16);
    assert_eq!(index.len(), 2000);
    for _ in 0..1000 {
        let q = AVSample::new(rng.random_range(-1.0..=1.0), rng.random_range(-1.0..=1.0));
        let hit = index.nearest(&q).unwrap();
        let (id, frame, _) = brute_nearest(&p, &q);
        assert_eq!((hit.video.id.as_str(), hit.frame), (id.as_str(), frame));
    }
}
