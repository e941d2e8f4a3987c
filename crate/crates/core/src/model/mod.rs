//! Uniform access to a differentiable image classifier: scores, named-layer
//! activations, class-score gradients and seeded weight randomization.

mod network;
pub mod profile;
mod reference;

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::{ImageTensor, NormalizedInput, Preprocessing};

pub use network::{Conv2d, Layer, Linear, NamedLayer, Network, Tensor3, Trace};
pub use profile::{ModelProfile, WeightSource};
pub use reference::{build_reference_cnn, ReferenceCnnConfig, REFERENCE_TARGET_LAYER};

/// A layer name resolved against a specific handle.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct LayerRef {
    pub name: String,
    pub index: usize,
}

/// `K × h × w` activations captured at one layer.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureStack {
    channels: usize,
    height: usize,
    width: usize,
    activations: Vec<f64>,
}

impl FeatureStack {
    pub fn new(channels: usize, height: usize, width: usize, activations: Vec<f64>) -> Result<Self> {
        if activations.len() != channels * height * width || height == 0 || width == 0 {
            return Err(Error::arg(format!("{} activations do not form {channels}x{height}x{width}", activations.len())));
        }
        if activations.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric { stage: "feature capture".into() });
        }
        Ok(FeatureStack { channels, height, width, activations })
    }

    pub fn channel_count(&self) -> usize {
        self.channels
    }

    pub fn spatial_dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    /// `Z = h · w`
    pub fn pixels_per_channel(&self) -> usize {
        self.height * self.width
    }

    pub fn channel(&self, k: usize) -> &[f64] {
        let z = self.pixels_per_channel();
        &self.activations[k * z..(k + 1) * z]
    }

    pub fn activations(&self) -> &[f64] {
        &self.activations
    }

    pub fn to_tensor(&self) -> Tensor3 {
        Tensor3 { channels: self.channels, height: self.height, width: self.width, data: self.activations.clone() }
    }
}

/// Gradients of one class score with respect to a [`FeatureStack`].
#[derive(Clone, Debug, PartialEq)]
pub struct GradStack {
    channels: usize,
    height: usize,
    width: usize,
    grads: Vec<f64>,
    target_class: usize,
}

impl GradStack {
    pub fn new(channels: usize, height: usize, width: usize, grads: Vec<f64>, target_class: usize) -> Result<Self> {
        if grads.len() != channels * height * width || height == 0 || width == 0 {
            return Err(Error::arg(format!("{} gradients do not form {channels}x{height}x{width}", grads.len())));
        }
        Ok(GradStack { channels, height, width, grads, target_class })
    }

    pub fn channel_count(&self) -> usize {
        self.channels
    }

    pub fn spatial_dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn pixels_per_channel(&self) -> usize {
        self.height * self.width
    }

    pub fn channel(&self, k: usize) -> &[f64] {
        let z = self.pixels_per_channel();
        &self.grads[k * z..(k + 1) * z]
    }

    pub fn grads(&self) -> &[f64] {
        &self.grads
    }

    pub fn target_class(&self) -> usize {
        self.target_class
    }

    pub fn matches(&self, features: &FeatureStack) -> bool {
        (self.channels, self.height, self.width) == (features.channels, features.height, features.width)
    }
}

/// Pre-softmax logit and post-softmax probability of one class.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScorePair {
    pub logit: f64,
    pub prob: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Scores {
    pub logits: Vec<f64>,
    pub probs: Vec<f64>,
}

impl Scores {
    pub fn from_logits(logits: Vec<f64>) -> Self {
        let probs = softmax(&logits);
        Scores { logits, probs }
    }

    /// Index of the most probable class (lowest index on ties).
    pub fn predicted(&self) -> usize {
        let mut best = 0;
        for (i, p) in self.probs.iter().enumerate() {
            if *p > self.probs[best] {
                best = i;
            }
        }
        best
    }

    pub fn pair(&self, class: usize) -> ScorePair {
        ScorePair { logit: self.logits[class], prob: self.probs[class] }
    }
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RandomizationMode {
    /// Re-initialize every parameterized layer from the output down to the target.
    Cascade,
    /// Re-initialize only the target layer.
    Independent,
}

impl std::str::FromStr for RandomizationMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cascade" | "cr" | "CR" => Ok(RandomizationMode::Cascade),
            "independent" | "ir" | "IR" => Ok(RandomizationMode::Independent),
            other => Err(Error::arg(format!("unknown randomization mode `{other}`"))),
        }
    }
}

impl std::fmt::Display for RandomizationMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            RandomizationMode::Cascade => "cascade",
            RandomizationMode::Independent => "independent",
        })
    }
}

/// A randomized copy of a handle plus any warnings raised while producing it.
#[derive(Clone, Debug)]
pub struct Randomized {
    pub handle: ClassifierHandle,
    pub randomized_layers: Vec<String>,
    pub warnings: Vec<String>,
}

/// Inference and gradient access to one classifier.
///
/// Cloning is cheap: the network is shared until a clone is mutated.
/// A single handle must not be driven from several threads at once;
/// give each worker its own clone.
#[derive(Clone, Debug)]
pub struct ClassifierHandle {
    model_id: String,
    network: Arc<Network>,
    input_size: (usize, usize),
    num_classes: usize,
    preprocessing: Preprocessing,
    default_layer: String,
}

impl ClassifierHandle {
    pub fn new(
        model_id: impl Into<String>,
        network: Network,
        input_size: (usize, usize),
        preprocessing: Preprocessing,
        default_layer: impl Into<String>,
    ) -> Result<Self> {
        let num_classes = network.validate(input_size.0, input_size.1)?;
        let default_layer = default_layer.into();
        if network.position(&default_layer).is_none() {
            return Err(Error::UnknownLayer { name: default_layer, available: network.layer_names() });
        }
        Ok(ClassifierHandle {
            model_id: model_id.into(),
            network: Arc::new(network),
            input_size,
            num_classes,
            preprocessing,
            default_layer,
        })
    }

    pub fn model_id(&self) -> &str {
        &self.model_id
    }

    /// Layer names ordered input → output.
    pub fn layer_names(&self) -> Vec<String> {
        self.network.layer_names()
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn input_size(&self) -> (usize, usize) {
        self.input_size
    }

    pub fn preprocessing(&self) -> &Preprocessing {
        &self.preprocessing
    }

    pub fn network(&self) -> &Network {
        &self.network
    }

    /// Mutable access; detaches this handle from any clones sharing the network.
    pub fn network_mut(&mut self) -> &mut Network {
        Arc::make_mut(&mut self.network)
    }

    pub fn layer(&self, name: &str) -> Result<LayerRef> {
        self.network
            .position(name)
            .map(|index| LayerRef { name: name.to_owned(), index })
            .ok_or_else(|| Error::UnknownLayer { name: name.to_owned(), available: self.layer_names() })
    }

    pub fn default_layer(&self) -> LayerRef {
        self.layer(&self.default_layer).expect("validated at construction")
    }

    /// Parameterized layers, ordered input → output.
    pub fn parameterized_layers(&self) -> Vec<LayerRef> {
        self.network
            .layers
            .iter()
            .enumerate()
            .filter(|(_, l)| l.layer.has_parameters())
            .map(|(index, l)| LayerRef { name: l.name.clone(), index })
            .collect()
    }

    fn check_layer(&self, layer: &LayerRef) -> Result<()> {
        match self.network.layers.get(layer.index) {
            Some(l) if l.name == layer.name => Ok(()),
            _ => Err(Error::UnknownLayer { name: layer.name.clone(), available: self.layer_names() }),
        }
    }

    fn check_class(&self, class: usize) -> Result<()> {
        if class >= self.num_classes {
            return Err(Error::ClassOutOfRange { class, num_classes: self.num_classes });
        }
        Ok(())
    }

    fn to_tensor(&self, input: &NormalizedInput) -> Result<Tensor3> {
        let (h, w) = input.dims();
        if (h, w) != self.input_size {
            return Err(Error::ShapeMismatch {
                expected_h: self.input_size.0,
                expected_w: self.input_size.1,
                got_c: 3,
                got_h: h,
                got_w: w,
            });
        }
        Ok(Tensor3 { channels: 3, height: h, width: w, data: input.tensor().to_vec() })
    }

    pub fn normalize(&self, image: &ImageTensor) -> NormalizedInput {
        self.preprocessing.normalize(image)
    }

    pub fn forward(&self, input: &NormalizedInput) -> Result<Scores> {
        let trace = self.network.forward_trace(self.to_tensor(input)?);
        Ok(Scores::from_logits(trace.logits().to_vec()))
    }

    /// Normalizes a `[0, 1]` image with this model's statistics and runs it.
    pub fn forward_image(&self, image: &ImageTensor) -> Result<Scores> {
        self.forward(&self.normalize(image))
    }

    pub fn class_prob(&self, image: &ImageTensor, class: usize) -> Result<f64> {
        self.check_class(class)?;
        Ok(self.forward_image(image)?.probs[class])
    }

    pub fn feature_maps(&self, input: &NormalizedInput, layer: &LayerRef) -> Result<FeatureStack> {
        self.check_layer(layer)?;
        let trace = self.network.forward_trace(self.to_tensor(input)?);
        let t = &trace.outputs[layer.index];
        FeatureStack::new(t.channels, t.height, t.width, t.data.clone())
    }

    /// Gradient of the pre-softmax score of `class` with respect to `layer`'s output.
    pub fn class_gradient(&self, input: &NormalizedInput, layer: &LayerRef, class: usize) -> Result<GradStack> {
        Ok(self.features_and_gradient(input, layer, class)?.1)
    }

    /// Activations, gradient and scores from a single forward/backward pass.
    pub fn features_and_gradient(
        &self,
        input: &NormalizedInput,
        layer: &LayerRef,
        class: usize,
    ) -> Result<(FeatureStack, GradStack, Scores)> {
        self.check_layer(layer)?;
        self.check_class(class)?;
        if layer.index + 1 == self.network.layers.len() {
            return Err(Error::NotDifferentiable(layer.name.clone()));
        }
        let trace = self.network.forward_trace(self.to_tensor(input)?);
        let mut seed = vec![0.0; self.num_classes];
        seed[class] = 1.0;
        let g = self.network.backward_to(&trace, &seed, layer.index);
        let t = &trace.outputs[layer.index];
        let features = FeatureStack::new(t.channels, t.height, t.width, t.data.clone())?;
        let grads = GradStack::new(g.channels, g.height, g.width, g.data, class)?;
        Ok((features, grads, Scores::from_logits(trace.logits().to_vec())))
    }

    /// Logits obtained by injecting `activations` as the output of `layer`
    /// and running only the layers above it.
    pub fn forward_from_layer(&self, layer: &LayerRef, activations: &FeatureStack) -> Result<Vec<f64>> {
        self.check_layer(layer)?;
        Ok(self.network.forward_from(layer.index, activations.to_tensor()))
    }

    /// Copy of this handle with re-initialized weights; `self` is untouched.
    ///
    /// Each layer draws from `N(0, σ²)` where `σ` is the standard deviation of
    /// that layer's original weights (biases likewise from the bias spread).
    /// The stream for a layer depends only on `seed` and the layer position,
    /// so cascade and independent runs agree on any layer both touch.
    pub fn randomize_layers(&self, mode: RandomizationMode, target: &LayerRef, seed: u64) -> Result<Randomized> {
        self.check_layer(target)?;
        let mut handle = self.clone();
        let mut warnings = Vec::new();
        let mut randomized_layers = Vec::new();
        let indices: Vec<usize> = match mode {
            RandomizationMode::Cascade => (target.index..self.network.layers.len()).rev().collect(),
            RandomizationMode::Independent => vec![target.index],
        };
        if !self.network.layers[target.index].layer.has_parameters() {
            let msg = format!("layer `{}` has no parameters; nothing to randomize there", target.name);
            log::warn!("{msg}");
            warnings.push(msg);
        }
        let net = handle.network_mut();
        for index in indices {
            let named = &mut net.layers[index];
            let Some((weights, bias)) = named.layer.parameters_mut() else { continue };
            let mut rng = ChaCha8Rng::seed_from_u64(layer_stream(seed, index));
            redraw(weights, &mut rng);
            redraw(bias, &mut rng);
            randomized_layers.push(named.name.clone());
        }
        Ok(Randomized { handle, randomized_layers, warnings })
    }
}

fn layer_stream(seed: u64, index: usize) -> u64 {
    // splitmix64 finalizer over (seed, index)
    let mut z = seed ^ (index as u64 + 1).wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn redraw(values: &mut [f64], rng: &mut ChaCha8Rng) {
    if values.is_empty() {
        return;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let std = (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
    if std == 0.0 {
        values.fill(0.0);
        return;
    }
    let normal = Normal::new(0.0, std).expect("finite positive std");
    for v in values {
        *v = normal.sample(rng);
    }
}
