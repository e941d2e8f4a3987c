//! A minimal sequential CNN: same-padded convolutions with optional fused ReLU,
//! 2×2 max pooling and fully connected layers, with reverse-mode gradients.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Channel-major `C × H × W` activations.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor3 {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub data: Vec<f64>,
}

impl Tensor3 {
    pub fn zeros(channels: usize, height: usize, width: usize) -> Self {
        Tensor3 { channels, height, width, data: vec![0.0; channels * height * width] }
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.channels, self.height, self.width)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Conv2d {
    pub in_channels: usize,
    pub out_channels: usize,
    /// Odd square kernel size; padding is `kernel / 2` so spatial dims are kept.
    pub kernel: usize,
    pub relu: bool,
    /// `[out][in][ky][kx]`
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Linear {
    pub in_features: usize,
    pub out_features: usize,
    pub relu: bool,
    /// `[out][in]`, input flattened channel-major.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Layer {
    Conv2d(Conv2d),
    /// 2×2 window, stride 2, ceil mode (partial windows at odd borders).
    MaxPool2,
    Linear(Linear),
}

impl Layer {
    pub fn has_parameters(&self) -> bool {
        !matches!(self, Layer::MaxPool2)
    }

    /// Mutable `(weights, bias)` of a parameterized layer.
    pub fn parameters_mut(&mut self) -> Option<(&mut Vec<f64>, &mut Vec<f64>)> {
        match self {
            Layer::Conv2d(c) => Some((&mut c.weights, &mut c.bias)),
            Layer::Linear(l) => Some((&mut l.weights, &mut l.bias)),
            Layer::MaxPool2 => None,
        }
    }

    pub fn parameters(&self) -> Option<(&[f64], &[f64])> {
        match self {
            Layer::Conv2d(c) => Some((&c.weights, &c.bias)),
            Layer::Linear(l) => Some((&l.weights, &l.bias)),
            Layer::MaxPool2 => None,
        }
    }

    fn output_shape(&self, (c, h, w): (usize, usize, usize)) -> Result<(usize, usize, usize)> {
        match self {
            Layer::Conv2d(conv) => {
                if conv.in_channels != c {
                    return Err(Error::arg(format!("conv expects {} channels, got {c}", conv.in_channels)));
                }
                Ok((conv.out_channels, h, w))
            }
            Layer::MaxPool2 => Ok((c, h.div_ceil(2), w.div_ceil(2))),
            Layer::Linear(lin) => {
                if lin.in_features != c * h * w {
                    return Err(Error::arg(format!("linear expects {} inputs, got {}", lin.in_features, c * h * w)));
                }
                Ok((lin.out_features, 1, 1))
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NamedLayer {
    pub name: String,
    #[serde(flatten)]
    pub layer: Layer,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Network {
    pub layers: Vec<NamedLayer>,
}

/// Per-layer outputs of one forward pass, kept for backpropagation.
#[derive(Clone, Debug)]
pub struct Trace {
    pub input: Tensor3,
    pub outputs: Vec<Tensor3>,
    pool_argmax: Vec<Option<Vec<usize>>>,
}

impl Trace {
    pub fn logits(&self) -> &[f64] {
        &self.outputs.last().expect("network has layers").data
    }
}

impl Network {
    pub fn layer_names(&self) -> Vec<String> {
        self.layers.iter().map(|l| l.name.clone()).collect()
    }

    pub fn position(&self, name: &str) -> Option<usize> {
        self.layers.iter().position(|l| l.name == name)
    }

    /// Checks that layer shapes chain for the given input size and the
    /// network ends in a flat vector; returns the number of outputs.
    pub fn validate(&self, height: usize, width: usize) -> Result<usize> {
        if self.layers.is_empty() {
            return Err(Error::arg("network has no layers"));
        }
        let mut shape = (3, height, width);
        for l in &self.layers {
            shape = l.layer.output_shape(shape).map_err(|e| Error::arg(format!("layer `{}`: {e}", l.name)))?;
            let params_ok = match &l.layer {
                Layer::Conv2d(c) => {
                    c.kernel % 2 == 1
                        && c.weights.len() == c.out_channels * c.in_channels * c.kernel * c.kernel
                        && c.bias.len() == c.out_channels
                }
                Layer::Linear(lin) => {
                    lin.weights.len() == lin.in_features * lin.out_features && lin.bias.len() == lin.out_features
                }
                Layer::MaxPool2 => true,
            };
            if !params_ok {
                return Err(Error::arg(format!("layer `{}` has inconsistent parameter sizes", l.name)));
            }
        }
        if shape.1 != 1 || shape.2 != 1 {
            return Err(Error::arg("network must end in a linear layer"));
        }
        Ok(shape.0)
    }

    pub fn forward_trace(&self, input: Tensor3) -> Trace {
        let mut outputs = Vec::with_capacity(self.layers.len());
        let mut pool_argmax = Vec::with_capacity(self.layers.len());
        for (i, l) in self.layers.iter().enumerate() {
            let x = if i == 0 { &input } else { &outputs[i - 1] };
            let (y, argmax) = apply(&l.layer, x);
            outputs.push(y);
            pool_argmax.push(argmax);
        }
        Trace { input, outputs, pool_argmax }
    }

    /// Runs the layers after `layer`, treating `activation` as that layer's output.
    pub fn forward_from(&self, layer: usize, activation: Tensor3) -> Vec<f64> {
        let mut x = activation;
        for l in &self.layers[layer + 1..] {
            x = apply(&l.layer, &x).0;
        }
        x.data
    }

    /// Gradient of `Σ_o seed[o] · logit_o` with respect to the output of layer `target`.
    pub fn backward_to(&self, trace: &Trace, seed: &[f64], target: usize) -> Tensor3 {
        let last = self.layers.len() - 1;
        let mut grad = Tensor3 { channels: seed.len(), height: 1, width: 1, data: seed.to_vec() };
        for i in (target + 1..=last).rev() {
            let input = if i == 0 { &trace.input } else { &trace.outputs[i - 1] };
            grad = backprop_layer(&self.layers[i].layer, input, &trace.outputs[i], trace.pool_argmax[i].as_deref(), &grad);
        }
        grad
    }

    /// FNV-1a over the bit patterns of every parameter.
    pub fn parameter_checksum(&self) -> u64 {
        let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
        for l in &self.layers {
            if let Some((w, b)) = l.layer.parameters() {
                for v in w.iter().chain(b) {
                    for byte in v.to_bits().to_le_bytes() {
                        hash ^= u64::from(byte);
                        hash = hash.wrapping_mul(0x0100_0000_01b3);
                    }
                }
            }
        }
        hash
    }
}

fn apply(layer: &Layer, x: &Tensor3) -> (Tensor3, Option<Vec<usize>>) {
    match layer {
        Layer::Conv2d(c) => (conv_forward(c, x), None),
        Layer::MaxPool2 => {
            let (y, idx) = pool_forward(x);
            (y, Some(idx))
        }
        Layer::Linear(l) => (linear_forward(l, x), None),
    }
}

fn conv_forward(conv: &Conv2d, x: &Tensor3) -> Tensor3 {
    let (h, w) = (x.height, x.width);
    let k = conv.kernel;
    let pad = (k / 2) as isize;
    let plane = h * w;
    let mut out = Tensor3::zeros(conv.out_channels, h, w);
    for co in 0..conv.out_channels {
        let dst = &mut out.data[co * plane..(co + 1) * plane];
        dst.fill(conv.bias[co]);
        for ci in 0..conv.in_channels {
            let src = &x.data[ci * plane..(ci + 1) * plane];
            let kern = &conv.weights[(co * conv.in_channels + ci) * k * k..][..k * k];
            for ky in 0..k {
                let dy = ky as isize - pad;
                for kx in 0..k {
                    let dx = kx as isize - pad;
                    let wgt = kern[ky * k + kx];
                    let (y_lo, y_hi) = valid_range(dy, h);
                    let (x_lo, x_hi) = valid_range(dx, w);
                    for oy in y_lo..y_hi {
                        let iy = (oy as isize + dy) as usize;
                        let src_row = &src[iy * w..(iy + 1) * w];
                        let dst_row = &mut dst[oy * w..(oy + 1) * w];
                        for ox in x_lo..x_hi {
                            dst_row[ox] += wgt * src_row[(ox as isize + dx) as usize];
                        }
                    }
                }
            }
        }
        if conv.relu {
            dst.iter_mut().for_each(|v| *v = v.max(0.0));
        }
    }
    out
}

/// Output positions `o` for which `o + offset` is inside `[0, n)`.
fn valid_range(offset: isize, n: usize) -> (usize, usize) {
    let lo = (-offset).max(0) as usize;
    let hi = (n as isize - offset).clamp(0, n as isize) as usize;
    (lo.min(hi), hi)
}

fn pool_forward(x: &Tensor3) -> (Tensor3, Vec<usize>) {
    let (oh, ow) = (x.height.div_ceil(2), x.width.div_ceil(2));
    let mut out = Tensor3::zeros(x.channels, oh, ow);
    let mut argmax = vec![0; x.channels * oh * ow];
    for c in 0..x.channels {
        let base = c * x.height * x.width;
        for oy in 0..oh {
            for ox in 0..ow {
                let mut best = base + 2 * oy * x.width + 2 * ox;
                for iy in 2 * oy..(2 * oy + 2).min(x.height) {
                    for ix in 2 * ox..(2 * ox + 2).min(x.width) {
                        let idx = base + iy * x.width + ix;
                        if x.data[idx] > x.data[best] {
                            best = idx;
                        }
                    }
                }
                let o = (c * oh + oy) * ow + ox;
                out.data[o] = x.data[best];
                argmax[o] = best;
            }
        }
    }
    (out, argmax)
}

fn linear_forward(lin: &Linear, x: &Tensor3) -> Tensor3 {
    let mut out = Tensor3::zeros(lin.out_features, 1, 1);
    for (o, dst) in out.data.iter_mut().enumerate() {
        let row = &lin.weights[o * lin.in_features..(o + 1) * lin.in_features];
        let mut acc = lin.bias[o];
        for (w, v) in row.iter().zip(&x.data) {
            acc += w * v;
        }
        *dst = if lin.relu { acc.max(0.0) } else { acc };
    }
    out
}

fn relu_gate(relu: bool, output: &Tensor3, grad: &Tensor3) -> Vec<f64> {
    if relu {
        grad.data.iter().zip(&output.data).map(|(g, y)| if *y > 0.0 { *g } else { 0.0 }).collect()
    } else {
        grad.data.clone()
    }
}

fn backprop_layer(layer: &Layer, input: &Tensor3, output: &Tensor3, argmax: Option<&[usize]>, grad: &Tensor3) -> Tensor3 {
    let mut gin = Tensor3::zeros(input.channels, input.height, input.width);
    match layer {
        Layer::Linear(lin) => {
            let gpre = relu_gate(lin.relu, output, grad);
            for (o, g) in gpre.iter().enumerate() {
                if *g == 0.0 {
                    continue;
                }
                let row = &lin.weights[o * lin.in_features..(o + 1) * lin.in_features];
                for (dst, w) in gin.data.iter_mut().zip(row) {
                    *dst += w * g;
                }
            }
        }
        Layer::MaxPool2 => {
            let argmax = argmax.expect("pool trace records argmax");
            for (o, g) in grad.data.iter().enumerate() {
                gin.data[argmax[o]] += g;
            }
        }
        Layer::Conv2d(conv) => {
            let gpre = relu_gate(conv.relu, output, grad);
            let (h, w) = (input.height, input.width);
            let k = conv.kernel;
            let pad = (k / 2) as isize;
            let plane = h * w;
            for co in 0..conv.out_channels {
                let gsrc = &gpre[co * plane..(co + 1) * plane];
                for ci in 0..conv.in_channels {
                    let dst = &mut gin.data[ci * plane..(ci + 1) * plane];
                    let kern = &conv.weights[(co * conv.in_channels + ci) * k * k..][..k * k];
                    for ky in 0..k {
                        let dy = ky as isize - pad;
                        for kx in 0..k {
                            let dx = kx as isize - pad;
                            let wgt = kern[ky * k + kx];
                            let (y_lo, y_hi) = valid_range(dy, h);
                            let (x_lo, x_hi) = valid_range(dx, w);
                            for oy in y_lo..y_hi {
                                let iy = (oy as isize + dy) as usize;
                                for ox in x_lo..x_hi {
                                    dst[iy * w + (ox as isize + dx) as usize] += wgt * gsrc[oy * w + ox];
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    gin
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_conv() -> Conv2d {
        Conv2d { in_channels: 1, out_channels: 1, kernel: 3, relu: false, weights: (1..=9).map(f64::from).collect(), bias: vec![0.5] }
    }

    #[test]
    fn conv_matches_hand_computation() {
        // 2x2 input [[1,2],[3,4]], kernel 1..9 centred, zero padding
        let x = Tensor3 { channels: 1, height: 2, width: 2, data: vec![1.0, 2.0, 3.0, 4.0] };
        let y = conv_forward(&tiny_conv(), &x);
        // out(0,0) = w5*1 + w6*2 + w8*3 + w9*4 + 0.5
        assert_eq!(y.data[0], 5.0 + 12.0 + 24.0 + 36.0 + 0.5);
        // out(1,1) = w1*1 + w2*2 + w4*3 + w5*4 + 0.5
        assert_eq!(y.data[3], 1.0 + 4.0 + 12.0 + 20.0 + 0.5);
    }

    #[test]
    fn pool_ceil_mode_and_first_max() {
        let x = Tensor3 { channels: 1, height: 3, width: 3, data: vec![1.0, 1.0, 0.0, 0.0, 0.0, 0.0, 2.0, 5.0, 7.0] };
        let (y, idx) = pool_forward(&x);
        assert_eq!(y.shape(), (1, 2, 2));
        assert_eq!(y.data, vec![1.0, 0.0, 5.0, 7.0]);
        assert_eq!(idx, vec![0, 2, 7, 8]);
    }

    #[test]
    fn valid_range_edges() {
        assert_eq!(valid_range(-1, 4), (1, 4));
        assert_eq!(valid_range(1, 4), (0, 3));
        assert_eq!(valid_range(5, 4), (0, 0));
    }
}
