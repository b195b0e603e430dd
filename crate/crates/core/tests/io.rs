use image::{GrayImage, ImageFormat, Luma, Rgb, RgbImage};

use turbfuse::io::{list_frame_files, load_frame, load_sequence, save_frame};
use turbfuse::{Error, Frame};

#[test]
fn png_round_trip_is_exact_on_the_grid() {
    let dir = tempfile::tempdir().unwrap();
    let f = Frame::from_fn(17, 9, |x, y| ((x * 13 + y * 7) % 256) as f64 / 255.0);
    let path = dir.path().join("a.png");
    save_frame(&f, &path).unwrap();
    assert_eq!(load_frame(&path).unwrap(), f);
}

#[test]
fn rgb_png_becomes_luminance() {
    let dir = tempfile::tempdir().unwrap();
    let mut img = RgbImage::new(2, 1);
    img.put_pixel(0, 0, Rgb([0, 255, 0]));
    img.put_pixel(1, 0, Rgb([40, 40, 40]));
    let path = dir.path().join("c.png");
    img.save_with_format(&path, ImageFormat::Png).unwrap();
    let f = load_frame(&path).unwrap();
    assert!((f.get(0, 0) - 0.587).abs() < 1e-12);
    assert_eq!(f.get(1, 0), 40.0 / 255.0);
}

#[test]
fn sequence_is_sorted_and_filtered() {
    let dir = tempfile::tempdir().unwrap();
    for (name, v) in [("b_002.png", 20u8), ("a_010.png", 10), ("b_001.png", 30)] {
        GrayImage::from_pixel(4, 4, Luma([v])).save(dir.path().join(name)).unwrap();
    }
    std::fs::write(dir.path().join("notes.txt"), "x").unwrap();
    std::fs::write(dir.path().join("c.pgm"), b"P2 4 4 255\n0 0 0 0 0 0 0 0 0 0 0 0 0 0 0 0\n").unwrap();

    let all = load_sequence(dir.path(), "*").unwrap();
    assert_eq!(all.source_ids(), ["a_010.png", "b_001.png", "b_002.png", "c.pgm"]);
    let b = load_sequence(dir.path(), "b_*").unwrap();
    assert_eq!(b.source_ids(), ["b_001.png", "b_002.png"]);
    assert_eq!(b.frames()[0].get(0, 0), 30.0 / 255.0);
    assert_eq!(list_frame_files(dir.path(), "*.pgm").unwrap().len(), 1);
}

#[test]
fn empty_match_and_mixed_sizes_are_errors() {
    let dir = tempfile::tempdir().unwrap();
    assert!(matches!(load_sequence(dir.path(), "*"), Err(Error::NoFrames { .. })));
    GrayImage::new(4, 4).save(dir.path().join("a.png")).unwrap();
    GrayImage::new(5, 4).save(dir.path().join("b.png")).unwrap();
    let err = load_sequence(dir.path(), "*").unwrap_err();
    assert!(matches!(err, Error::InconsistentFrameSize { .. }));
    assert!(err.to_string().contains("b.png"), "{err}");
}

#[test]
fn corrupt_file_names_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.png");
    std::fs::write(&path, b"not a png").unwrap();
    let err = load_frame(&path).unwrap_err();
    assert!(matches!(err, Error::Decode { .. }));
    assert!(err.to_string().contains("bad.png"));
}
