//! Seeded desk-scale reference classifier.
//!
//! Architecture for the default 32×32 input (`relu` fused into conv/fc1):
//!
//! | layer | op                         | output    |
//! |-------|----------------------------|-----------|
//! | conv1 | 3×3 conv 3→8, ReLU         | 8×32×32   |
//! | pool1 | 2×2 max pool               | 8×16×16   |
//! | conv2 | 3×3 conv 8→16, ReLU        | 16×16×16  |
//! | pool2 | 2×2 max pool               | 16×8×8    |
//! | conv3 | 3×3 conv 16→16, ReLU       | 16×8×8    |
//! | pool3 | 2×2 max pool               | 16×4×4    |
//! | fc1   | linear 256→32, ReLU        | 32        |
//! | fc2   | linear 32→6 (logits)       | 6         |
//!
//! Conv and fc1 weights are He-normal, fc2 weights are `N(0, 1/fan_in)`,
//! fc2 biases `N(0, 0.1²)`, every other bias is zero, all from a ChaCha8 stream
//! seeded by `seed`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::imaging::Preprocessing;

use super::{ClassifierHandle, Conv2d, Layer, Linear, NamedLayer, Network};

/// The last convolutional layer, used as the default CAM target.
pub const REFERENCE_TARGET_LAYER: &str = "conv3";

#[derive(Clone, Debug, PartialEq)]
pub struct ReferenceCnnConfig {
    pub seed: u64,
    pub input_size: (usize, usize),
    pub num_classes: usize,
    pub conv_channels: [usize; 3],
    pub hidden: usize,
    /// Take absolute values of the fc weights, which makes every gradient
    /// reaching the conv layers nonnegative.
    pub nonnegative_head: bool,
    /// Zero the logit row of this class so no layer has a path to it.
    pub disconnected_class: Option<usize>,
}

impl Default for ReferenceCnnConfig {
    fn default() -> Self {
        ReferenceCnnConfig {
            seed: 0,
            input_size: (32, 32),
            num_classes: 6,
            conv_channels: [8, 16, 16],
            hidden: 32,
            nonnegative_head: false,
            disconnected_class: None,
        }
    }
}

impl ReferenceCnnConfig {
    pub fn with_seed(seed: u64) -> Self {
        ReferenceCnnConfig { seed, ..Default::default() }
    }

    pub fn build(&self) -> ClassifierHandle {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut layers = Vec::new();
        let (mut h, mut w) = self.input_size;
        let mut in_c = 3;
        for (i, &out_c) in self.conv_channels.iter().enumerate() {
            let fan_in = in_c * 9;
            layers.push(NamedLayer {
                name: format!("conv{}", i + 1),
                layer: Layer::Conv2d(Conv2d {
                    in_channels: in_c,
                    out_channels: out_c,
                    kernel: 3,
                    relu: true,
                    weights: draw(&mut rng, out_c * fan_in, (2.0 / fan_in as f64).sqrt()),
                    bias: vec![0.0; out_c],
                }),
            });
            layers.push(NamedLayer { name: format!("pool{}", i + 1), layer: Layer::MaxPool2 });
            in_c = out_c;
            h = h.div_ceil(2);
            w = w.div_ceil(2);
        }
        let flat = in_c * h * w;
        let mut fc1 = draw(&mut rng, self.hidden * flat, (2.0 / flat as f64).sqrt());
        let mut fc2 = draw(&mut rng, self.num_classes * self.hidden, (1.0 / self.hidden as f64).sqrt());
        let fc2_bias = draw(&mut rng, self.num_classes, 0.1);
        if self.nonnegative_head {
            fc1.iter_mut().chain(fc2.iter_mut()).for_each(|v| *v = v.abs());
        }
        if let Some(c) = self.disconnected_class {
            fc2[c * self.hidden..(c + 1) * self.hidden].fill(0.0);
        }
        layers.push(NamedLayer {
            name: "fc1".into(),
            layer: Layer::Linear(Linear { in_features: flat, out_features: self.hidden, relu: true, weights: fc1, bias: vec![0.0; self.hidden] }),
        });
        layers.push(NamedLayer {
            name: "fc2".into(),
            layer: Layer::Linear(Linear {
                in_features: self.hidden,
                out_features: self.num_classes,
                relu: false,
                weights: fc2,
                bias: fc2_bias,
            }),
        });
        ClassifierHandle::new(
            format!("reference-cnn-s{}", self.seed),
            Network { layers },
            self.input_size,
            Preprocessing::default(),
            REFERENCE_TARGET_LAYER,
        )
        .expect("reference architecture is consistent")
    }
}

fn draw(rng: &mut ChaCha8Rng, n: usize, std: f64) -> Vec<f64> {
    let normal = Normal::new(0.0, std).expect("positive std");
    (0..n).map(|_| normal.sample(rng)).collect()
}

/// The default reference CNN (32×32 input, 6 classes) seeded with `seed`.
pub fn build_reference_cnn(seed: u64) -> ClassifierHandle {
    ReferenceCnnConfig::with_seed(seed).build()
}
