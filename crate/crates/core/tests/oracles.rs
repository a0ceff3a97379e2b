//! Comparisons against values frozen from independent implementations
//! (libjpeg through Pillow, Pillow's bicubic resampler, scikit-image SSIM).
//! `data/make_fixtures.py` regenerates them.

use std::path::{Path, PathBuf};

use noisepair::jpeg::{jpeg_roundtrip, JpegSpec};
use noisepair::resize::{resize, ResizeKernel, ResizeSpec};
use noisepair::stats::{blockiness, psnr, ssim};
use noisepair::{load_png, Image};

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name)
}

fn reference() -> serde_json::Value {
    serde_json::from_slice(&std::fs::read(data("oracle_values.json")).unwrap()).unwrap()
}

fn corpus(name: &str) -> Image {
    load_png(data(&format!("corpus_{name}.png"))).unwrap()
}

#[test]
fn jpeg_psnr_tracks_libjpeg() {
    let r = reference();
    for name in ["astronaut_face", "coffee", "chelsea"] {
        let img = corpus(name);
        let mut previous = 0.0;
        for q in [20u8, 50, 95] {
            let out = jpeg_roundtrip(
                &img,
                &JpegSpec {
                    quality: q,
                    subsample_chroma: true,
                },
            )
            .unwrap();
            let ours = psnr(&out, &img).unwrap();
            let theirs = r["jpeg_psnr_db"][format!("{name}@{q}")].as_f64().unwrap();
            assert!((ours - theirs).abs() < 1.0, "{name}@{q}: {ours:.2} vs {theirs:.2}");
            assert!(ours > previous);
            previous = ours;
        }
    }
}

#[test]
fn low_quality_is_blockier() {
    for name in ["astronaut_face", "coffee", "chelsea", "hubble", "retina"] {
        let img = corpus(name);
        let b = |q| {
            blockiness(
                &jpeg_roundtrip(
                    &img,
                    &JpegSpec {
                        quality: q,
                        subsample_chroma: true,
                    },
                )
                .unwrap(),
            )
            .unwrap()
        };
        assert!(b(20) > b(95), "{name}");
    }
}

#[test]
fn bicubic_half_then_double_matches_pillow() {
    let r = reference();
    for name in ["astronaut_face", "coffee", "chelsea"] {
        let img = corpus(name);
        let down = resize(&img, &ResizeSpec::new(ResizeKernel::Bicubic, 0.5, (256, 256)).unwrap()).unwrap();
        assert_eq!(down.dims(), (128, 128, 3));
        let up = resize(&down, &ResizeSpec::new(ResizeKernel::Bicubic, 2.0, (128, 128)).unwrap()).unwrap();
        let ours = psnr(&up, &img).unwrap();
        let theirs = r["bicubic_half_double_psnr_db"][name].as_f64().unwrap();
        assert!((ours - theirs).abs() < 1.5, "{name}: {ours:.2} vs {theirs:.2}");
    }
}

#[test]
fn ssim_matches_scikit_image() {
    let r = reference();
    for i in 0..5 {
        let a = load_png(data(&format!("ssim_ref_{i}.png"))).unwrap();
        let b = load_png(data(&format!("ssim_dist_{i}.png"))).unwrap();
        let ours = ssim(&a, &b).unwrap();
        let theirs = r["ssim"][i.to_string()].as_f64().unwrap();
        assert!((ours - theirs).abs() < 1e-3, "pair {i}: {ours:.5} vs {theirs:.5}");
    }
}
