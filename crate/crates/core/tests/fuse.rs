use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use turbfuse::dtcwt::{forward, forward_plane, inverse_plane, DtcwtPyramid, FilterBank};
use turbfuse::filter::gaussian_blur;
use turbfuse::fuse::{
    activity, fuse_frames, fuse_frames_detailed, fuse_sequence, segment_level, FusionConfig,
    PIXEL_MAX, REGION,
};
use turbfuse::metrics::psnr;
use turbfuse::register::{reference_frame, register_sequence, FlowParams};
use turbfuse::select::sharpness;
use turbfuse::simulate::{degrade, text_card, TurbulenceParams, DEFAULT_TEXT};
use turbfuse::{Error, Frame, FrameSequence, Plane};

mod common;
use common::texture;

fn config(mode: &str) -> FusionConfig {
    FusionConfig {
        mode: mode.into(),
        ..Default::default()
    }
}

fn random_plane(w: usize, h: usize, seed: u64) -> Plane {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Plane::from_fn(w, h, |_, _| rng.random::<f64>())
}

/// Connected components by repeated label propagation until nothing
/// changes; independent of the flood fill under test.
fn propagate_labels(mask: &[bool], w: usize, h: usize) -> usize {
    let mut label: Vec<usize> = (0..w * h).map(|i| if mask[i] { i + 1 } else { 0 }).collect();
    loop {
        let mut changed = false;
        for y in 0..h {
            for x in 0..w {
                let i = y * w + x;
                if label[i] == 0 {
                    continue;
                }
                for ny in y.saturating_sub(1)..=(y + 1).min(h - 1) {
                    for nx in x.saturating_sub(1)..=(x + 1).min(w - 1) {
                        let j = ny * w + nx;
                        if label[j] != 0 && label[j] < label[i] {
                            label[i] = label[j];
                            changed = true;
                        }
                    }
                }
            }
        }
        if !changed {
            break;
        }
    }
    let mut roots: Vec<usize> = label.into_iter().filter(|&l| l != 0).collect();
    roots.sort_unstable();
    roots.dedup();
    roots.len()
}

#[test]
fn activity_of_zero_pyramid_is_zero() {
    let pyr = forward_plane(&random_plane(32, 32, 1), 3, &FilterBank::default()).unwrap();
    let a = activity(&pyr.zeros_like());
    assert!(a.levels.iter().all(|l| l.data().iter().all(|&v| v == 0.0)));
}

#[test]
fn activity_is_magnitude_sum() {
    let pyr = forward_plane(&random_plane(32, 32, 1), 2, &FilterBank::default()).unwrap();
    let mut z = pyr.zeros_like();
    z.levels[1].bands[3].re.set(2, 1, 3.0);
    z.levels[1].bands[3].im.set(2, 1, 4.0);
    let a = activity(&z);
    assert_eq!(a.levels[1].get(2, 1), 5.0);
    assert_eq!(a.levels[1].data().iter().sum::<f64>(), 5.0);
    assert_eq!(a.levels[0].data().iter().sum::<f64>(), 0.0);
}

#[test]
fn activity_ignores_sign() {
    let pyr = forward_plane(&random_plane(40, 24, 2), 3, &FilterBank::default()).unwrap();
    let mut neg = pyr.clone();
    for l in &mut neg.levels {
        for b in l.bands.iter_mut().step_by(2) {
            b.re = b.re.map(|v| -v);
            b.im = b.im.map(|v| -v);
        }
    }
    assert_eq!(activity(&pyr), activity(&neg));
}

#[test]
fn constant_activity_has_no_regions() {
    let labels = segment_level(&Plane::filled(16, 12, 0.7), 1.0);
    assert_eq!(labels.region_count, 0);
    assert!(labels.labels.iter().all(|&l| l == 0));
}

#[test]
fn two_blocks_make_two_regions() {
    let map = Plane::from_fn(20, 16, |x, y| {
        let a = (2..5).contains(&x) && (3..6).contains(&y);
        let b = (12..15).contains(&x) && (9..12).contains(&y);
        if a || b {
            1.0
        } else {
            0.0
        }
    });
    let labels = segment_level(&map, 1.0);
    let mean = map.mean();
    let sd = (map.data().iter().map(|v| (v - mean).powi(2)).sum::<f64>() / map.len() as f64).sqrt();
    let mask: Vec<bool> = map.data().iter().map(|&v| v > mean + sd).collect();
    assert_eq!(labels.region_count, propagate_labels(&mask, 20, 16));
    assert_eq!(labels.region_count, 2);
    // raster discovery order
    assert_eq!(labels.get(2, 3), 1);
    assert_eq!(labels.get(14, 11), 2);
}

#[test]
fn diagonal_neighbours_connect() {
    let map = Plane::from_fn(10, 10, |x, y| if x == y { 1.0 } else { 0.0 });
    assert_eq!(segment_level(&map, 1.0).region_count, 1);
}

#[test]
fn fusing_copies_is_identity() {
    let bank = FilterBank::default();
    let img = random_plane(48, 40, 3);
    let pyr = forward_plane(&img, 4, &bank).unwrap();
    for mode in [PIXEL_MAX, REGION] {
        let fused = fuse_sequence(&vec![pyr.clone(); 4], &config(mode)).unwrap();
        assert_eq!(fused, pyr, "{mode}");
        assert!(inverse_plane(&fused, &bank).unwrap().max_abs_diff(&img) < 1e-8);
    }
}

#[test]
fn pixel_max_takes_larger_coefficients() {
    let bank = FilterBank::default();
    let p1 = forward_plane(&random_plane(32, 32, 4), 3, &bank).unwrap();
    let mut p2 = p1.clone();
    for l in &mut p2.levels {
        for b in &mut l.bands {
            b.re = b.re.map(|v| 2.0 * v);
            b.im = b.im.map(|v| 2.0 * v);
        }
    }
    p2.lowpass = p1.lowpass.map(|v| 2.0 * v);
    let fused = fuse_sequence(&[p1.clone(), p2.clone()], &config(PIXEL_MAX)).unwrap();
    for (fl, l2) in fused.levels.iter().zip(&p2.levels) {
        for (fb, b2) in fl.bands.iter().zip(&l2.bands) {
            for i in 0..fb.re.len() {
                // zero coefficients tie and resolve to frame 1, which is also zero
                let (a, b) = (fb.re.data()[i], b2.re.data()[i]);
                assert_eq!(a, b);
                assert_eq!(fb.im.data()[i], b2.im.data()[i]);
            }
        }
    }
    for i in 0..fused.lowpass.len() {
        let mean = (p1.lowpass.data()[i] + p2.lowpass.data()[i]) / 2.0;
        assert_eq!(fused.lowpass.data()[i], mean);
    }
}

#[test]
fn pixel_max_ties_go_to_first_frame() {
    let bank = FilterBank::default();
    let p1 = forward_plane(&random_plane(32, 32, 4), 2, &bank).unwrap();
    let mut p2 = p1.clone();
    // same magnitudes, opposite sign: a pure tie everywhere
    for l in &mut p2.levels {
        for b in &mut l.bands {
            b.re = b.re.map(|v| -v);
            b.im = b.im.map(|v| -v);
        }
    }
    let fused = fuse_sequence(&[p1.clone(), p2], &config(PIXEL_MAX)).unwrap();
    assert_eq!(fused.levels, p1.levels);
}

#[test]
fn lowpass_is_exact_mean() {
    let bank = FilterBank::default();
    let pyrs: Vec<DtcwtPyramid> = (0..5)
        .map(|s| forward_plane(&random_plane(36, 28, s), 3, &bank).unwrap())
        .collect();
    for mode in [PIXEL_MAX, REGION] {
        let fused = fuse_sequence(&pyrs, &config(mode)).unwrap();
        for i in 0..fused.lowpass.len() {
            let mut s = 0.0;
            for p in &pyrs {
                s += p.lowpass.data()[i];
            }
            assert_eq!(fused.lowpass.data()[i], s / 5.0);
        }
    }
}

#[test]
fn region_mode_without_regions_is_pixel_max() {
    let bank = FilterBank::default();
    let pyrs: Vec<DtcwtPyramid> = (0..3)
        .map(|s| forward_plane(&random_plane(32, 32, 10 + s), 3, &bank).unwrap())
        .collect();
    let mut cfg = config(REGION);
    cfg.threshold_k = 1e9;
    let region = fuse_sequence(&pyrs, &cfg).unwrap();
    let max = fuse_sequence(&pyrs, &config(PIXEL_MAX)).unwrap();
    assert_eq!(region, max);
}

#[test]
fn region_winner_supplies_every_orientation() {
    // frame 1 is the image, frame 0 a much weaker copy: every region must
    // come from frame 1 in all six orientations
    let bank = FilterBank::default();
    let strong = forward_plane(&texture(48, 48, 3).into_plane(), 3, &bank).unwrap();
    let mut weak = strong.clone();
    for l in &mut weak.levels {
        for b in &mut l.bands {
            b.re = b.re.map(|v| 0.25 * v);
            b.im = b.im.map(|v| 0.25 * v);
        }
    }
    let (frames_fused, detail) = {
        let fused = turbfuse::fuse::fuse_with(
            &turbfuse::fuse::fusion_rules(),
            &[weak, strong.clone()],
            &config(REGION),
        )
        .unwrap();
        (fused.pyramid, fused.regions.unwrap())
    };
    assert!(detail.levels.iter().any(|l| l.region_count > 0));
    assert_eq!(frames_fused.levels, strong.levels);
}

#[test]
fn shape_mismatch_names_level() {
    let bank = FilterBank::default();
    let a = forward_plane(&random_plane(32, 32, 1), 3, &bank).unwrap();
    let b = forward_plane(&random_plane(32, 48, 1), 3, &bank).unwrap();
    let err = fuse_sequence(&[a, b], &config(PIXEL_MAX)).unwrap_err();
    assert!(matches!(err, Error::PyramidShape { level: 1 }));
    assert_eq!(err.to_string(), "pyramid shape mismatch at level 1");
}

#[test]
fn empty_input_is_rejected() {
    assert!(fuse_sequence(&[], &config(PIXEL_MAX)).is_err());
}

#[test]
fn unknown_mode_is_rejected() {
    let seq = FrameSequence::from_frames(vec![texture(32, 32, 1)]).unwrap();
    let err = fuse_frames(&seq, &config("average"), &FilterBank::default()).unwrap_err();
    assert!(err.to_string().contains("average"), "{err}");
}

#[test]
fn single_and_identical_frames_round_trip() {
    let bank = FilterBank::default();
    let f = texture(50, 38, 6);
    for n in [1, 3] {
        let seq = FrameSequence::from_frames(vec![f.clone(); n]).unwrap();
        for mode in [PIXEL_MAX, REGION] {
            let out = fuse_frames(&seq, &config(mode), &bank).unwrap();
            assert!(out.as_plane().max_abs_diff(f.as_plane()) < 1e-8, "{n} {mode}");
        }
    }
}

#[test]
fn fusing_complementary_blur_beats_both_inputs() {
    let bank = FilterBank::default();
    let clean = text_card(128, 96, DEFAULT_TEXT).unwrap();
    let blurred = gaussian_blur(clean.as_plane(), 2.0);
    let half = |top: bool| {
        Frame::from_fn(128, 96, |x, y| {
            if (y < 48) == top {
                blurred.get(x, y)
            } else {
                clean.get(x, y)
            }
        })
    };
    let (a, b) = (half(true), half(false));
    let best = sharpness(&a).unwrap().max(sharpness(&b).unwrap());
    let seq = FrameSequence::from_frames(vec![a, b]).unwrap();
    for mode in [PIXEL_MAX, REGION] {
        let fused = fuse_frames(&seq, &config(mode), &bank).unwrap();
        let s = sharpness(&Frame::clamped(fused.as_plane())).unwrap();
        assert!(s > best, "{mode}: {s} <= {best}");
    }
}

#[test]
fn fused_registered_sequence_beats_temporal_mean() {
    let clean = text_card(128, 128, DEFAULT_TEXT).unwrap();
    let params = TurbulenceParams {
        frames: 50,
        ..Default::default()
    };
    let (seq, _) = degrade(&clean, &params).unwrap();
    let registered = register_sequence(&seq, &FlowParams::default(), 1).unwrap();
    let baseline = psnr(&reference_frame(&registered), &clean).unwrap();
    for mode in [PIXEL_MAX, REGION] {
        let fused = fuse_frames(&registered, &config(mode), &FilterBank::default()).unwrap();
        let p = psnr(&Frame::clamped(fused.as_plane()), &clean).unwrap();
        assert!(p >= baseline, "{mode}: {p} < {baseline}");
    }
}

#[test]
fn region_map_dump_writes_levels() {
    let dir = tempfile::tempdir().unwrap();
    let frames: Vec<Frame> = (0..3).map(|s| texture(64, 64, s)).collect();
    let seq = FrameSequence::from_frames(frames).unwrap();
    let (_, detail) = fuse_frames_detailed(&seq, &config(REGION), &FilterBank::default()).unwrap();
    let regions = detail.regions.unwrap();
    regions.dump(dir.path()).unwrap();
    for l in 1..=4 {
        let img = image::open(dir.path().join(format!("regions_level{l}.png")))
            .unwrap()
            .into_luma16();
        let labels = &regions.levels[l - 1];
        assert_eq!(img.get_pixel(0, 0).0[0] as u32, labels.get(0, 0));
        let max = img.pixels().map(|p| p.0[0] as usize).max().unwrap();
        assert_eq!(max, labels.region_count);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn pixel_max_is_permutation_invariant(seed in any::<u64>(), n in 2usize..5) {
        let bank = FilterBank::default();
        let frames: Vec<Frame> = (0..n).map(|i| texture(32, 32, seed.wrapping_add(i as u64))).collect();
        let pyrs: Vec<DtcwtPyramid> = frames.iter().map(|f| forward(f, 3, &bank).unwrap()).collect();
        let mut rev = pyrs.clone();
        rev.reverse();
        let a = fuse_sequence(&pyrs, &config(PIXEL_MAX)).unwrap();
        let b = fuse_sequence(&rev, &config(PIXEL_MAX)).unwrap();
        prop_assert_eq!(&a.levels, &b.levels);
        prop_assert!(a.lowpass.max_abs_diff(&b.lowpass) < 1e-12);
    }

    #[test]
    fn labels_are_contiguous(seed in any::<u64>(), k in 0.2f64..2.0) {
        let map = random_plane(24, 20, seed);
        let l = segment_level(&map, k);
        let mut seen = vec![false; l.region_count + 1];
        for &v in &l.labels {
            prop_assert!((v as usize) <= l.region_count);
            seen[v as usize] = true;
        }
        prop_assert!(seen[1..].iter().all(|&s| s));
        prop_assert_eq!(segment_level(&map, k), l);
    }
}
