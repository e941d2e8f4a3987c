use abscam::cam::{normalize, upsample};
use abscam::grid::Grid;
use abscam::imaging::export::{read_binary, read_csv, to_csv_string, write_binary};
use abscam::imaging::*;
use proptest::prelude::*;

/// Brute-force oracle: stable sort of (value, index) pairs, descending.
fn oracle_topk(values: &[f64], k: usize) -> Vec<bool> {
    let mut pairs: Vec<(f64, usize)> = values.iter().copied().zip(0..).collect();
    // bubble sort keeps equal keys in their original order
    for i in 0..pairs.len() {
        for j in 0..pairs.len() - 1 - i {
            if pairs[j].0 < pairs[j + 1].0 {
                pairs.swap(j, j + 1);
            }
        }
    }
    let mut bits = vec![false; values.len()];
    for &(_, idx) in &pairs[..k] {
        bits[idx] = true;
    }
    bits
}

#[test]
fn constant_map_selects_scan_order_prefix() {
    for (h, w) in [(3, 3), (4, 5), (7, 2)] {
        let map = Grid::filled(h, w, 0.25);
        let mask = topk_mask(&map, 0.5).unwrap();
        let k = (h * w).div_ceil(2);
        assert_eq!(mask.bits(), oracle_topk(map.values(), k).as_slice());
        assert!(mask.bits()[..k].iter().all(|b| *b) && mask.bits()[k..].iter().all(|b| !*b));
    }
}

/// Dense 2D convolution with the same reflected borders, as an independent check.
fn dense_blur(plane: &[f64], h: usize, w: usize, sigma: f64) -> Vec<f64> {
    let r = (2.0 * sigma).ceil() as i64;
    let mut kernel = Vec::new();
    for dy in -r..=r {
        for dx in -r..=r {
            kernel.push((dy, dx, (-((dy * dy + dx * dx) as f64) / (2.0 * sigma * sigma)).exp()));
        }
    }
    let total: f64 = kernel.iter().map(|k| k.2).sum();
    let reflect = |i: i64, n: usize| -> usize {
        let n = n as i64;
        let mut i = i;
        while i < 0 || i >= n {
            i = if i < 0 { -i } else { 2 * (n - 1) - i };
        }
        i as usize
    };
    let mut out = vec![0.0; h * w];
    for y in 0..h {
        for x in 0..w {
            out[y * w + x] = kernel
                .iter()
                .map(|&(dy, dx, k)| k * plane[reflect(y as i64 + dy, h) * w + reflect(x as i64 + dx, w)])
                .sum::<f64>()
                / total;
        }
    }
    out
}

#[test]
fn bright_pixel_blur_matches_dense_oracle_and_keeps_mass() {
    let img = ImageTensor::from_fn(9, 9, |r, c| if (r, c) == (4, 4) { [1.0, 0.5, 0.0] } else { [0.0; 3] }).unwrap();
    for sigma in [1.0, 2.0] {
        let out = gaussian_blur(&img, sigma).unwrap();
        for c in 0..3 {
            let expected = dense_blur(&img.channel(c), 9, 9, sigma);
            for (a, b) in out.channel(c).iter().zip(&expected) {
                assert!((a - b).abs() < 1e-12);
            }
            if sigma == 1.0 {
                // support fits inside the image, so nothing folds back at the border
                let before: f64 = img.channel(c).iter().sum();
                let after: f64 = out.channel(c).iter().sum();
                assert!((before - after).abs() < 1e-4, "channel {c}: {before} vs {after}");
            }
        }
        assert!(out.pixel(4, 4)[0] < 1.0 && out.pixel(4, 5)[0] > 0.0);
    }
}

#[test]
fn constant_and_near_identity_blur() {
    let flat = ImageTensor::filled(6, 5, [0.3, 0.6, 0.9]).unwrap();
    for (a, b) in gaussian_blur(&flat, 2.0).unwrap().pixels().iter().zip(flat.pixels()) {
        assert!((a - b).abs() < 1e-12);
    }
    let img = synthetic::fixture_image(1, 16);
    for (a, b) in gaussian_blur(&img, 0.1).unwrap().pixels().iter().zip(img.pixels()) {
        assert!((a - b).abs() < 1e-3);
    }
    assert!(gaussian_blur(&img, 0.0).is_err());
}

#[test]
fn blur_with_kernel_wider_than_image() {
    let img = ImageTensor::from_fn(4, 4, |r, c| [(r * 4 + c) as f64 / 15.0, 0.2, 0.9]).unwrap();
    let out = gaussian_blur(&img, DEFAULT_BLUR_SIGMA).unwrap();
    for c in 0..3 {
        let expected = dense_blur(&img.channel(c), 4, 4, DEFAULT_BLUR_SIGMA);
        for (a, b) in out.channel(c).iter().zip(&expected) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}

#[test]
fn upsample_2x2_to_4x4_matches_closed_form() {
    let (a, b, c, d) = (0.0, 1.0, 2.0, 5.0);
    let src = Grid::from_rows(&[[a, b], [c, d]]);
    let out = upsample(&src, (4, 4)).unwrap();
    // half-pixel centres: source coordinate (i + 0.5) / 2 - 0.5, clamped to [0, 1]
    let t = [0.0, 0.25, 0.75, 1.0];
    for (i, &y) in t.iter().enumerate() {
        for (j, &x) in t.iter().enumerate() {
            let expected = a * (1.0 - y) * (1.0 - x) + b * (1.0 - y) * x + c * y * (1.0 - x) + d * y * x;
            assert!((out.get(i, j) - expected).abs() < 1e-12, "({i},{j})");
        }
    }
}

#[test]
fn load_resizes_and_normalizes() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("gray.png");
    ImageTensor::filled(48, 64, [128.0 / 255.0; 3]).unwrap().save_png(&path).unwrap();
    let loaded = load_and_preprocess(&path, (32, 32), &Preprocessing::default()).unwrap();
    assert_eq!(loaded.image.dims(), (32, 32));
    assert_eq!(loaded.original_size, (48, 64));
    assert!(loaded.warnings.is_empty());
    let plane = 32 * 32;
    for c in 0..3 {
        let expected = (128.0 / 255.0 - IMAGENET_MEAN[c]) / IMAGENET_STD[c];
        assert!(loaded.input.tensor()[c * plane..(c + 1) * plane].iter().all(|v| (v - expected).abs() < 1e-12));
    }
}

#[test]
fn grayscale_input_is_converted_with_warning() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("luma.png");
    image::GrayImage::from_pixel(8, 8, image::Luma([200])).save(&path).unwrap();
    let loaded = load_and_preprocess(&path, (8, 8), &Preprocessing::default()).unwrap();
    assert_eq!(loaded.warnings.len(), 1);
    assert_eq!(loaded.image.pixel(0, 0), [200.0 / 255.0; 3]);
}

#[test]
fn unreadable_file_names_path() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("broken.png");
    std::fs::write(&path, b"not an image").unwrap();
    let err = load_and_preprocess(&path, (8, 8), &Preprocessing::default()).unwrap_err();
    assert!(matches!(err, abscam::Error::Ingestion { .. }));
    assert!(err.to_string().contains("broken.png"));
    let missing = load_and_preprocess(dir.path().join("nope.jpg"), (8, 8), &Preprocessing::default()).unwrap_err();
    assert!(missing.to_string().contains("nope.jpg"));
}

#[test]
fn jpeg_input_is_accepted() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("scene.jpg");
    synthetic::fixture_image(0, 40).to_rgb8().save(&path).unwrap();
    let loaded = load_and_preprocess(&path, (32, 32), &Preprocessing::default()).unwrap();
    assert_eq!(loaded.image.dims(), (32, 32));
}

fn grid_strategy() -> impl Strategy<Value = Grid> {
    (1usize..8, 1usize..8).prop_flat_map(|(h, w)| {
        prop::collection::vec(-5.0f64..5.0, h * w).prop_map(move |v| Grid::new(h, w, v).unwrap())
    })
}

fn image_strategy() -> impl Strategy<Value = ImageTensor> {
    (1usize..7, 1usize..7).prop_flat_map(|(h, w)| {
        prop::collection::vec(0.0f64..=1.0, h * w * 3).prop_map(move |v| ImageTensor::new(h, w, v).unwrap())
    })
}

proptest! {
    #[test]
    fn topk_covers_ceiling_fraction(map in grid_strategy(), fraction in 0.001f64..=1.0) {
        let mask = topk_mask(&map, fraction).unwrap();
        let n = map.len();
        prop_assert_eq!(mask.count(), topk_count(fraction, n));
        prop_assert!((mask.covered_fraction() - topk_count(fraction, n) as f64 / n as f64).abs() < 1e-15);
        let expected = oracle_topk(map.values(), mask.count());
        prop_assert_eq!(mask.bits(), expected.as_slice());
    }

    #[test]
    fn topk_invariant_under_increasing_transform(map in grid_strategy(), fraction in 0.01f64..=1.0) {
        let shifted = map.map(|v| 2.0 * v + 1.0);
        prop_assert_eq!(topk_mask(&map, fraction).unwrap(), topk_mask(&shifted, fraction).unwrap());
    }

    #[test]
    fn blur_stays_in_unit_range(img in image_strategy(), sigma in 0.1f64..6.0) {
        let out = gaussian_blur(&img, sigma).unwrap();
        prop_assert!(out.pixels().iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn preprocessing_round_trip(img in image_strategy()) {
        let back = Preprocessing::default().normalize(&img).denormalize();
        for (a, b) in back.iter().zip(img.pixels()) {
            prop_assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn map_files_round_trip(map in grid_strategy()) {
        let unit = normalize(&map).unwrap();
        let parsed = read_csv(&to_csv_string(&unit)).unwrap();
        prop_assert_eq!(parsed.dims(), unit.dims());
        for (a, b) in parsed.values().iter().zip(unit.values()) {
            prop_assert!((a - b).abs() <= 5e-7);
        }
        let mut buf = Vec::new();
        write_binary(&unit, &mut buf).unwrap();
        let back = read_binary(&buf[..]).unwrap();
        for (a, b) in back.values().iter().zip(unit.values()) {
            prop_assert_eq!(*a, f64::from(*b as f32));
        }
    }
}
