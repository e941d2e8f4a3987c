use abscam::imaging::synthetic::fixture_image;
use abscam::imaging::ImageTensor;
use abscam::model::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn checksum(v: &[f64]) -> (f64, f64) {
    (v.iter().sum(), v.iter().enumerate().map(|(i, x)| (i as f64 + 1.0) * x).sum())
}

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * b.abs().max(1.0)
}

// Frozen from the seed-0 reference model on fixtures 0..3 (32x32).
const GOLDEN_LOGITS: [[f64; 6]; 3] = [
    [0.8976872351473433, 0.5468222903050162, 0.31643621916852915, 1.665713604765548, -1.2751104339396337, 0.45885555397807576],
    [1.580343601011874, 1.1462755157762008, 0.7482932143290388, 1.894922762716801, -1.542914583187197, -0.5392337007861737],
    [0.9038024464960941, 0.17777171667388642, 0.5999743575650489, 1.00703136004717, -1.5408113363046585, 0.011695803805300192],
];

#[test]
fn zero_input_yields_output_bias() {
    let h = build_reference_cnn(0);
    let input = abscam::NormalizedInput::from_tensor(32, 32, vec![0.0; 3 * 32 * 32], *h.preprocessing()).unwrap();
    let scores = h.forward(&input).unwrap();
    let Layer::Linear(fc2) = &h.network().layers.last().unwrap().layer else { panic!("head is linear") };
    assert_eq!(scores.logits, fc2.bias);
}

#[test]
fn golden_logits_on_fixtures() {
    let h = build_reference_cnn(0);
    for (i, golden) in GOLDEN_LOGITS.iter().enumerate() {
        let s = h.forward_image(&fixture_image(i, 32)).unwrap();
        for (a, b) in s.logits.iter().zip(golden) {
            assert!(close(*a, *b, 1e-10), "fixture {i}: {a} vs {b}");
        }
        assert!((s.probs.iter().sum::<f64>() - 1.0).abs() < 1e-6);
    }
}

#[test]
fn probabilities_sum_to_one_on_random_inputs() {
    let h = build_reference_cnn(3);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..10 {
        let img = ImageTensor::from_fn(32, 32, |_, _| [rng.random(), rng.random(), rng.random()]).unwrap();
        let s = h.forward_image(&img).unwrap();
        assert!((s.probs.iter().sum::<f64>() - 1.0).abs() < 1e-6);
        assert!(s.probs.iter().all(|p| (0.0..=1.0).contains(p)));
    }
}

#[test]
fn feature_maps_shape_determinism_and_golden_checksum() {
    let h = build_reference_cnn(0);
    let input = h.normalize(&fixture_image(0, 32));
    let conv2 = h.layer("conv2").unwrap();
    let a = h.feature_maps(&input, &conv2).unwrap();
    let b = h.feature_maps(&input, &conv2).unwrap();
    assert_eq!(a.channel_count(), 16);
    assert_eq!(a.spatial_dims(), (16, 16));
    assert_eq!(a.pixels_per_channel(), 256);
    assert_eq!(a, b);
    let (s, ws) = checksum(a.activations());
    assert!(close(s, 1660.982514325789, 1e-10), "{s}");
    assert!(close(ws, 3341365.980641394, 1e-10), "{ws}");
}

#[test]
fn same_seed_same_parameters() {
    assert_eq!(build_reference_cnn(5).network().parameter_checksum(), build_reference_cnn(5).network().parameter_checksum());
    assert_ne!(build_reference_cnn(5).network().parameter_checksum(), build_reference_cnn(6).network().parameter_checksum());
    let names = build_reference_cnn(0).layer_names();
    assert!(names.iter().any(|n| n == REFERENCE_TARGET_LAYER));
}

/// Central differences through the injected-activation path; cells whose
/// ±ε segment crosses a ReLU or pooling switch (one-sided slopes disagree)
/// are resampled.
fn finite_difference_check(h: &ClassifierHandle, image: &ImageTensor, layer_name: &str, cells_wanted: usize, seed: u64) {
    let eps = 1e-3;
    let layer = h.layer(layer_name).unwrap();
    let input = h.normalize(image);
    let features = h.feature_maps(&input, &layer).unwrap();
    let grads: Vec<GradStack> = (0..h.num_classes()).map(|c| h.class_gradient(&input, &layer, c).unwrap()).collect();
    let (k, hh, ww) = (features.channel_count(), features.spatial_dims().0, features.spatial_dims().1);
    let base = h.forward_from_layer(&layer, &features).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut checked = 0;
    let mut attempts = 0;
    while checked < cells_wanted {
        attempts += 1;
        assert!(attempts < cells_wanted * 20, "too many kinked cells on {layer_name}");
        let cell = rng.random_range(0..k * hh * ww);
        let bump = |delta: f64| {
            let mut v = features.activations().to_vec();
            v[cell] += delta;
            h.forward_from_layer(&layer, &FeatureStack::new(k, hh, ww, v).unwrap()).unwrap()
        };
        let plus = bump(eps);
        let minus = bump(-eps);
        let smooth = (0..h.num_classes()).all(|c| {
            let fwd = (plus[c] - base[c]) / eps;
            let bwd = (base[c] - minus[c]) / eps;
            (fwd - bwd).abs() <= 1e-6_f64.max(1e-4 * fwd.abs())
        });
        if !smooth {
            continue;
        }
        for (c, g) in grads.iter().enumerate() {
            let fd = (plus[c] - minus[c]) / (2.0 * eps);
            let analytic = g.grads()[cell];
            let tol = 1e-3_f64.max(1e-2 * fd.abs());
            assert!((analytic - fd).abs() <= tol, "{layer_name} cell {cell} class {c}: analytic {analytic} vs fd {fd}");
        }
        checked += 1;
    }
}

#[test]
fn gradients_match_finite_differences() {
    let h = build_reference_cnn(0);
    let img = fixture_image(1, 32);
    for layer in ["conv1", "conv2", "conv3"] {
        finite_difference_check(&h, &img, layer, 50, 11);
    }
}

#[test]
fn disconnected_class_has_zero_gradient() {
    let cfg = ReferenceCnnConfig { disconnected_class: Some(2), ..Default::default() };
    let h = cfg.build();
    let input = h.normalize(&fixture_image(0, 32));
    for name in ["conv1", "conv2", "conv3", "fc1"] {
        let g = h.class_gradient(&input, &h.layer(name).unwrap(), 2).unwrap();
        assert!(g.grads().iter().all(|v| *v == 0.0), "{name}");
    }
}

#[test]
fn doubling_output_weights_doubles_gradients() {
    let h = build_reference_cnn(0);
    let mut doubled = h.clone();
    if let Some((w, _)) = doubled.network_mut().layers.last_mut().unwrap().layer.parameters_mut() {
        w.iter_mut().for_each(|v| *v *= 2.0);
    }
    let input = h.normalize(&fixture_image(2, 32));
    for name in ["fc1", "conv3"] {
        let layer = h.layer(name).unwrap();
        let g1 = h.class_gradient(&input, &layer, 1).unwrap();
        let g2 = doubled.class_gradient(&input, &layer, 1).unwrap();
        for (a, b) in g1.grads().iter().zip(g2.grads()) {
            assert!((2.0 * a - b).abs() <= 1e-12 * b.abs().max(1.0));
        }
    }
    // fc1 -> logit is the linear head itself: gradient equals the weight row
    let Layer::Linear(fc2) = &h.network().layers.last().unwrap().layer else { unreachable!() };
    let g = h.class_gradient(&input, &h.layer("fc1").unwrap(), 1).unwrap();
    assert_eq!(g.grads(), &fc2.weights[fc2.in_features..2 * fc2.in_features]);
}

#[test]
fn randomization_is_seeded_and_copy_on_write() {
    let h = build_reference_cnn(0);
    let img = fixture_image(0, 32);
    let before = h.forward_image(&img).unwrap();
    let conv2 = h.layer("conv2").unwrap();
    let a = h.randomize_layers(RandomizationMode::Independent, &conv2, 9).unwrap();
    let b = h.randomize_layers(RandomizationMode::Independent, &conv2, 9).unwrap();
    assert_eq!(a.handle.network(), b.handle.network());
    assert_eq!(a.randomized_layers, vec!["conv2".to_string()]);
    assert_eq!(h.forward_image(&img).unwrap(), before);
    assert_ne!(a.handle.forward_image(&img).unwrap(), before);
}

#[test]
fn cascade_from_first_layer_touches_every_parameterized_layer() {
    let h = build_reference_cnn(0);
    let conv1 = h.layer("conv1").unwrap();
    let r = h.randomize_layers(RandomizationMode::Cascade, &conv1, 4).unwrap();
    for (orig, new) in h.network().layers.iter().zip(&r.handle.network().layers) {
        match (orig.layer.parameters(), new.layer.parameters()) {
            (Some((w0, _)), Some((w1, _))) => assert_ne!(w0, w1, "{}", orig.name),
            (None, None) => {}
            _ => unreachable!(),
        }
    }
    assert_eq!(r.randomized_layers, vec!["fc2", "fc1", "conv3", "conv2", "conv1"]);
}

#[test]
fn randomized_weights_match_original_spread() {
    let h = build_reference_cnn(0);
    let conv3 = h.layer("conv3").unwrap();
    let r = h.randomize_layers(RandomizationMode::Independent, &conv3, 1).unwrap();
    let std = |v: &[f64]| {
        let m = v.iter().sum::<f64>() / v.len() as f64;
        (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / v.len() as f64).sqrt()
    };
    let (w0, b0) = h.network().layers[conv3.index].layer.parameters().unwrap();
    let (w1, b1) = r.handle.network().layers[conv3.index].layer.parameters().unwrap();
    assert!((std(w1) / std(w0) - 1.0).abs() < 0.1);
    assert!(b0.iter().chain(b1).all(|v| *v == 0.0));
}

#[test]
fn cascade_and_independent_agree_on_top_layer() {
    let h = build_reference_cnn(0);
    let fc2 = h.layer("fc2").unwrap();
    let a = h.randomize_layers(RandomizationMode::Cascade, &fc2, 3).unwrap();
    let b = h.randomize_layers(RandomizationMode::Independent, &fc2, 3).unwrap();
    assert_eq!(a.handle.network(), b.handle.network());
}

#[test]
fn tiny_input_sizes_are_supported() {
    let h = ReferenceCnnConfig { input_size: (4, 4), ..Default::default() }.build();
    let s = h.forward_image(&fixture_image(0, 4)).unwrap();
    assert_eq!(s.probs.len(), 6);
    finite_difference_check(&h, &fixture_image(0, 4), "conv2", 20, 2);
}
