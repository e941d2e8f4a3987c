use abscam::cam::*;
use abscam::grid::Grid;
use abscam::imaging::{synthetic::fixture_image, topk_mask, ImageTensor};
use abscam::model::{FeatureStack, GradStack, ReferenceCnnConfig};
use abscam::{build_reference_cnn, ClassifierHandle, LayerRef};
use proptest::prelude::*;

const CLASS: usize = 3;

/// (sum, Σ(i+1)·v) of each method's map on fixtures 0..3 at class 3, default params.
const GOLDEN: [(&str, [(f64, f64); 3]); 6] = [
    ("abs-cam", [(415.7869249636648, 177904.3876610063), (520.7553330339548, 250576.8289706983), (502.1870189854427, 243294.9495107496)]),
    ("abs-cam-init", [(276.5550486570329, 101652.157565549), (428.60725594490947, 186221.65780309006), (362.8890320627822, 151038.96318394103)]),
    ("grad-cam", [(229.6509481646296, 89807.39185700516), (315.0072482943658, 135818.91815034678), (231.47359343784032, 115873.57950564958)]),
    ("grad-cam++", [(309.23641737492915, 119231.93794481795), (412.70156866593703, 180838.6393647744), (392.36128094343525, 174691.12932779558)]),
    ("sg-cam++", [(302.14537016931183, 116595.56322400697), (408.559840877804, 180521.85298970065), (401.6380221374165, 182738.80060507075)]),
    ("score-cam", [(415.786924963665, 177904.38766100636), (520.7553330339549, 250576.82897069838), (502.1870189854428, 243294.9495107496)]),
];

fn checksum(grid: &Grid) -> (f64, f64) {
    let v = grid.values();
    (v.iter().sum(), v.iter().enumerate().map(|(i, x)| (i + 1) as f64 * x).sum())
}

fn setup() -> (ClassifierHandle, LayerRef) {
    let handle = build_reference_cnn(0);
    let layer = handle.default_layer();
    (handle, layer)
}

#[test]
fn golden_checksums() {
    let (handle, layer) = setup();
    let params = MethodParams { class: ClassSelection::Fixed(CLASS), ..Default::default() };
    for (id, expected) in GOLDEN {
        let method: Method = id.parse().unwrap();
        for (i, (sum, weighted)) in expected.iter().enumerate() {
            let map = explain_class(&handle, &fixture_image(i, 32), method, &layer, CLASS, &params).unwrap();
            let (s, w) = checksum(&map.grid);
            assert!((s - sum).abs() < 1e-9 * sum.abs().max(1.0), "{id} fixture {i}: sum {s} vs {sum}");
            assert!((w - weighted).abs() < 1e-9 * weighted.abs().max(1.0), "{id} fixture {i}: {w} vs {weighted}");
        }
    }
}

// Independent straight-line implementation of the two-phase algorithm.
fn bilinear(src: &[f64], h: usize, w: usize, out_h: usize, out_w: usize) -> Vec<f64> {
    let coord = |dst: usize, n_in: usize, n_out: usize| -> (usize, usize, f64) {
        let pos = ((dst as f64 + 0.5) * n_in as f64 / n_out as f64 - 0.5).max(0.0);
        let lo = (pos.floor() as usize).min(n_in - 1);
        let hi = (lo + 1).min(n_in - 1);
        // at a clamped border both taps are the same pixel; sample it directly
        (lo, hi, if hi == lo { 0.0 } else { pos - lo as f64 })
    };
    let mut out = Vec::with_capacity(out_h * out_w);
    for y in 0..out_h {
        let (y0, y1, fy) = coord(y, h, out_h);
        for x in 0..out_w {
            let (x0, x1, fx) = coord(x, w, out_w);
            let top = src[y0 * w + x0] * (1.0 - fx) + src[y0 * w + x1] * fx;
            let bottom = src[y1 * w + x0] * (1.0 - fx) + src[y1 * w + x1] * fx;
            out.push(top * (1.0 - fy) + bottom * fy);
        }
    }
    out
}

fn minmax(v: &[f64]) -> Vec<f64> {
    let lo = v.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if hi == lo {
        return vec![0.0; v.len()];
    }
    v.iter().map(|x| (x - lo) / (hi - lo)).collect()
}

fn straight_line_abs_cam(handle: &ClassifierHandle, image: &ImageTensor, layer: &LayerRef, class: usize) -> Vec<f64> {
    let input = handle.normalize(image);
    let (feats, grads, _) = handle.features_and_gradient(&input, layer, class).unwrap();
    let (h, w) = feats.spatial_dims();
    let (oh, ow) = image.dims();
    let mut total = vec![0.0; oh * ow];
    for k in 0..feats.channel_count() {
        let g = grads.channel(k);
        let wk = g.iter().map(|x| x.abs()).sum::<f64>() / g.len() as f64;
        let scaled: Vec<f64> = feats.channel(k).iter().map(|a| wk * a).collect();
        let m0 = minmax(&bilinear(&scaled, h, w, oh, ow));
        let mut masked = image.clone();
        for r in 0..oh {
            for c in 0..ow {
                let p = image.pixel(r, c);
                let m = m0[r * ow + c];
                masked.set_pixel(r, c, [p[0] * m, p[1] * m, p[2] * m]);
            }
        }
        let logits = handle.forward_image(&masked).unwrap().logits;
        let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let denom: f64 = logits.iter().map(|l| (l - max).exp()).sum();
        let s = (logits[class] - max).exp() / denom;
        for (t, m) in total.iter_mut().zip(&m0) {
            *t += s * m;
        }
    }
    minmax(&total.iter().map(|v| v.max(0.0)).collect::<Vec<_>>())
}

#[test]
fn abs_cam_matches_straight_line_oracle() {
    let (handle, layer) = setup();
    for i in 0..3 {
        let image = fixture_image(i, 32);
        let expected = straight_line_abs_cam(&handle, &image, &layer, CLASS);
        for execution in [Execution::Sequential, Execution::Parallel] {
            let map = abs_cam_with(&handle, &image, &handle.normalize(&image), &layer, CLASS, execution).unwrap();
            assert_eq!(map.grid.values(), expected.as_slice(), "fixture {i}");
        }
    }
}

#[test]
fn parallel_and_sequential_rescoring_are_bitwise_equal() {
    let (handle, layer) = setup();
    let image = fixture_image(2, 32);
    let input = handle.normalize(&image);
    let a = score_cam_with(&handle, &image, &input, &layer, CLASS, Execution::Sequential).unwrap();
    let b = score_cam_with(&handle, &image, &input, &layer, CLASS, Execution::Parallel).unwrap();
    assert_eq!(a, b);
}

#[test]
fn abs_cam_init_two_channel_hand_oracle() {
    // A⁰ = [[1,0],[0,2]], A¹ = [[0,3],[1,0]], w = [2, -1]
    // Σ = [[2,-3],[-1,4]] → relu [[2,0],[0,4]] → normalized [[0.5,0],[0,1]]
    let feats = FeatureStack::new(2, 2, 2, vec![1.0, 0.0, 0.0, 2.0, 0.0, 3.0, 1.0, 0.0]).unwrap();
    let weights = ChannelWeights { weights: vec![2.0, -1.0], class: 0 };
    let map = abs_cam_init_map(&feats, &weights, (2, 2)).unwrap();
    assert_eq!(map.grid.values(), &[0.5, 0.0, 0.0, 1.0]);
    assert_eq!(map.method_id, "abs-cam-init");
    let wrong = ChannelWeights { weights: vec![1.0], class: 0 };
    assert!(abs_cam_init_map(&feats, &wrong, (2, 2)).is_err());
}

#[test]
fn single_channel_init_reduces_to_relu_of_activation() {
    let a = vec![-1.0, 0.5, 2.0, 0.0];
    let feats = FeatureStack::new(1, 2, 2, a.clone()).unwrap();
    let map = abs_cam_init_map(&feats, &ChannelWeights { weights: vec![1.0], class: 0 }, (4, 4)).unwrap();
    let expected = normalize(&upsample(&relu(&Grid::new(2, 2, a).unwrap()), (4, 4)).unwrap()).unwrap();
    assert_eq!(map.grid, expected);
}

#[test]
fn abs_weights_of_nonnegative_grads_equal_gap_weights() {
    let g = GradStack::new(2, 2, 2, vec![0.5, 1.0, 0.0, 2.5, 3.0, 0.0, 0.25, 0.75], 0).unwrap();
    assert_eq!(abs_grad_weights(&g).weights, gap_weights(&g).weights);
    let zero = GradStack::new(2, 1, 2, vec![0.0; 4], 0).unwrap();
    assert_eq!(abs_grad_weights(&zero).weights, vec![0.0, 0.0]);
}

#[test]
fn nonnegative_head_makes_abs_cam_init_equal_grad_cam() {
    let handle = ReferenceCnnConfig { nonnegative_head: true, ..Default::default() }.build();
    let layer = handle.default_layer();
    let mut cases = 0;
    for i in 0..4 {
        let image = fixture_image(i, 32);
        let input = handle.normalize(&image);
        for class in 0..handle.num_classes() {
            let grads = handle.class_gradient(&input, &layer, class).unwrap();
            assert!(grads.grads().iter().all(|g| *g >= 0.0));
            let a = abs_cam_init(&handle, &input, &layer, class).unwrap();
            let b = grad_cam(&handle, &input, &layer, class).unwrap();
            for (x, y) in a.grid.values().iter().zip(b.grid.values()) {
                assert!((x - y).abs() < 1e-6);
            }
            cases += 1;
        }
    }
    assert!(cases >= 20);
}

#[test]
fn nonpositive_grads_give_zero_grad_cam_and_pp() {
    let feats = FeatureStack::new(2, 2, 2, vec![1.0, 0.0, 3.0, 2.0, 0.5, 0.5, 0.0, 1.0]).unwrap();
    let grads = GradStack::new(2, 2, 2, vec![-1.0, -0.5, 0.0, -2.0, -0.1, -0.3, -0.2, 0.0], 0).unwrap();
    assert!(grad_cam_map(&feats, &grads, (4, 4)).unwrap().grid.values().iter().all(|v| *v == 0.0));
    assert!(grad_cam_pp_weights(&feats, &grads).unwrap().weights.iter().all(|w| *w == 0.0));
}

#[test]
fn abs_cam_and_grad_cam_diverge_on_mixed_sign_fixture() {
    let (handle, layer) = setup();
    let image = fixture_image(0, 32);
    let input = handle.normalize(&image);
    let grads = handle.class_gradient(&input, &layer, CLASS).unwrap();
    assert!(grads.grads().iter().any(|g| *g < 0.0) && grads.grads().iter().any(|g| *g > 0.0));
    let a = abs_cam_init(&handle, &input, &layer, CLASS).unwrap();
    let b = grad_cam(&handle, &input, &layer, CLASS).unwrap();
    assert_ne!(topk_mask(&a.grid, 0.1).unwrap(), topk_mask(&b.grid, 0.1).unwrap());
}

#[test]
fn smooth_without_noise_equals_grad_cam_pp() {
    let (handle, layer) = setup();
    let input = handle.normalize(&fixture_image(1, 32));
    let plain = grad_cam_pp(&handle, &input, &layer, CLASS).unwrap();
    let smooth = smooth_grad_cam_pp(&handle, &input, &layer, CLASS, 1, 0.0, 99).unwrap();
    assert_eq!(plain.grid, smooth.grid);
    let again = smooth_grad_cam_pp(&handle, &input, &layer, CLASS, 3, 0.2, 7).unwrap();
    assert_eq!(again, smooth_grad_cam_pp(&handle, &input, &layer, CLASS, 3, 0.2, 7).unwrap());
    assert_ne!(again.grid, smooth_grad_cam_pp(&handle, &input, &layer, CLASS, 3, 0.2, 8).unwrap().grid);
    assert!(smooth_grad_cam_pp(&handle, &input, &layer, CLASS, 0, 0.1, 0).is_err());
}

#[test]
fn every_method_outputs_unit_range_at_input_size() {
    let (handle, _) = setup();
    let image = fixture_image(2, 32);
    for layer in ["conv2", "conv3"] {
        let params = MethodParams { layer: Some(layer.into()), ..Default::default() };
        for method in Method::ALL {
            let map = explain(&handle, &image, method, &params).unwrap();
            assert_eq!(map.grid.dims(), (32, 32));
            assert!(map.grid.values().iter().all(|v| (0.0..=1.0).contains(v)), "{method} at {layer}");
            assert_eq!(map.method_id, method.id());
            assert_eq!(map, explain(&handle, &image, method, &params).unwrap());
        }
    }
}

#[test]
fn registry_rejects_bad_layer_and_class() {
    let (handle, _) = setup();
    let image = fixture_image(0, 32);
    let bad_layer = MethodParams { layer: Some("conv9".into()), ..Default::default() };
    let err = explain(&handle, &image, Method::AbsCam, &bad_layer).unwrap_err();
    assert!(err.to_string().contains("conv3"), "{err}");
    let bad_class = MethodParams { class: ClassSelection::Fixed(6), ..Default::default() };
    assert!(matches!(
        explain(&handle, &image, Method::GradCam, &bad_class),
        Err(abscam::Error::ClassOutOfRange { class: 6, num_classes: 6 })
    ));
    assert!("lime".parse::<Method>().is_err());
}

#[test]
fn k1_rescoring_returns_the_channel_map() {
    let map = normalize(&Grid::from_rows(&[[0.0, 0.2], [0.9, 0.4]])).unwrap();
    let out = combine_scored(std::slice::from_ref(&map), &[0.37]).unwrap();
    for (a, b) in out.values().iter().zip(map.values()) {
        assert!((a - b).abs() < 1e-12);
    }
    assert!(combine_scored(&[map.clone(), map], &[0.0, 0.0]).unwrap().values().iter().all(|v| *v == 0.0));
}

fn stack_strategy() -> impl Strategy<Value = GradStack> {
    (1usize..6, 1usize..5, 1usize..5).prop_flat_map(|(k, h, w)| {
        prop::collection::vec(-10.0f64..10.0, k * h * w).prop_map(move |v| GradStack::new(k, h, w, v, 0).unwrap())
    })
}

fn maps_strategy() -> impl Strategy<Value = (Vec<Grid>, Vec<f64>)> {
    (1usize..5, 2usize..6, 2usize..6).prop_flat_map(|(k, h, w)| {
        (
            prop::collection::vec(prop::collection::vec(0.0f64..1.0, h * w), k)
                .prop_map(move |vs| vs.into_iter().map(|v| Grid::new(h, w, v).unwrap()).collect()),
            prop::collection::vec(0.0f64..1.0, k),
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn abs_weights_are_nonnegative(g in stack_strategy()) {
        let w = abs_grad_weights(&g);
        prop_assert_eq!(w.weights.len(), g.channel_count());
        prop_assert!(w.weights.iter().all(|x| *x >= 0.0));
    }

    #[test]
    fn scaling_scores_keeps_pixel_ranking((maps, scores) in maps_strategy(), factor in 0.01f64..100.0) {
        let scaled: Vec<f64> = scores.iter().map(|s| s * factor).collect();
        let a = combine_scored(&maps, &scores).unwrap();
        let b = combine_scored(&maps, &scaled).unwrap();
        // identical up to rounding, so the rank order only differs between near-ties
        for (x, y) in a.values().iter().zip(b.values()) {
            prop_assert!((x - y).abs() < 1e-9);
        }
        let order_a = a.descending_order();
        let order_b = b.descending_order();
        for (i, j) in order_a.iter().zip(&order_b) {
            prop_assert!(i == j || (a.values()[*i] - a.values()[*j]).abs() < 1e-9);
        }
    }

    #[test]
    fn normalize_lands_in_unit_range(v in prop::collection::vec(-1e3f64..1e3, 1..40)) {
        let n = v.len();
        let out = normalize(&Grid::new(1, n, v).unwrap()).unwrap();
        prop_assert!(out.values().iter().all(|x| (0.0..=1.0).contains(x)));
        let (lo, hi) = out.min_max();
        prop_assert!((lo == 0.0 && hi == 1.0) || hi == 0.0);
    }
}
