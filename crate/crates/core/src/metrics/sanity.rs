//! Model-parameter randomization checks for saliency methods.

use serde::Serialize;

use crate::cam::{explain_class, Method, MethodParams, SaliencyMap};
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::imaging::ImageTensor;
use crate::model::{ClassifierHandle, LayerRef, RandomizationMode};

/// Spearman rank correlation with average ranks for ties.
/// Returns 0 when either input is constant.
pub fn spearman(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len(), "spearman inputs differ in length");
    let ra = ranks(a);
    let rb = ranks(b);
    let n = a.len() as f64;
    let ma = ra.iter().sum::<f64>() / n;
    let mb = rb.iter().sum::<f64>() / n;
    let (mut cov, mut va, mut vb) = (0.0, 0.0, 0.0);
    for (x, y) in ra.iter().zip(&rb) {
        cov += (x - ma) * (y - mb);
        va += (x - ma) * (x - ma);
        vb += (y - mb) * (y - mb);
    }
    if va == 0.0 || vb == 0.0 {
        return 0.0;
    }
    cov / (va * vb).sqrt()
}

fn ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&i, &j| v[i].total_cmp(&v[j]));
    let mut out = vec![0.0; v.len()];
    let mut start = 0;
    while start < idx.len() {
        let mut end = start + 1;
        while end < idx.len() && v[idx[end]] == v[idx[start]] {
            end += 1;
        }
        let avg = (start + end - 1) as f64 / 2.0 + 1.0;
        for &i in &idx[start..end] {
            out[i] = avg;
        }
        start = end;
    }
    out
}

#[derive(Clone, Debug, Serialize)]
pub struct LayerSimilarity {
    pub layer: String,
    pub mean_similarity: f64,
    pub per_seed: Vec<f64>,
    /// Map from the first seed, for visual strips.
    #[serde(skip)]
    pub example_map: Grid,
}

#[derive(Clone, Debug)]
pub struct SanityReport {
    pub method: Method,
    pub mode: RandomizationMode,
    pub class: usize,
    pub original: SaliencyMap,
    /// Ordered from the output layer towards the input.
    pub layers: Vec<LayerSimilarity>,
    pub warnings: Vec<String>,
}

impl SanityReport {
    pub fn similarities(&self) -> Vec<f64> {
        self.layers.iter().map(|l| l.mean_similarity).collect()
    }
}

/// For each parameterized layer (output → input) and each seed, randomizes the
/// model per `mode`, recomputes the map for the same class and records its
/// Spearman similarity to the original map. `layers` restricts the layers
/// visited; `None` means all parameterized layers.
pub fn sanity_check(
    handle: &ClassifierHandle,
    image: &ImageTensor,
    method: Method,
    params: &MethodParams,
    mode: RandomizationMode,
    seeds: &[u64],
    layers: Option<&[LayerRef]>,
) -> Result<SanityReport> {
    if seeds.is_empty() {
        return Err(Error::arg("sanity check needs at least one seed"));
    }
    let target_layer = params.resolve_layer(handle)?;
    let class = params.resolve_class(handle, image)?;
    let original = explain_class(handle, image, method, &target_layer, class, params)?;
    let mut visit: Vec<LayerRef> = match layers {
        Some(l) => l.to_vec(),
        None => handle.parameterized_layers(),
    };
    visit.sort_by_key(|l| std::cmp::Reverse(l.index));

    let mut warnings = Vec::new();
    let mut rows = Vec::with_capacity(visit.len());
    for layer in &visit {
        let mut per_seed = Vec::with_capacity(seeds.len());
        let mut example_map = None;
        for &seed in seeds {
            let randomized = handle.randomize_layers(mode, layer, seed)?;
            warnings.extend(randomized.warnings);
            let map = explain_class(&randomized.handle, image, method, &target_layer, class, params)?;
            per_seed.push(spearman(original.grid.values(), map.grid.values()));
            example_map.get_or_insert(map.grid);
        }
        let mean_similarity = per_seed.iter().sum::<f64>() / per_seed.len() as f64;
        rows.push(LayerSimilarity {
            layer: layer.name.clone(),
            mean_similarity,
            per_seed,
            example_map: example_map.expect("at least one seed"),
        });
    }
    Ok(SanityReport { method, mode, class, original, layers: rows, warnings })
}

/// Fraction of adjacent pairs `(s_i, s_{i+1})` with `s_{i+1} ≤ s_i`; 1 for fewer than two values.
pub fn monotone_fraction(similarities: &[f64]) -> f64 {
    if similarities.len() < 2 {
        return 1.0;
    }
    let pairs = similarities.len() - 1;
    similarities.windows(2).filter(|w| w[1] <= w[0]).count() as f64 / pairs as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spearman_self_is_one() {
        let a = [0.3, 0.1, 0.9, 0.5, 0.5];
        assert!((spearman(&a, &a) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn spearman_reversed_is_minus_one() {
        let a = [1.0, 2.0, 3.0, 4.0];
        let b = [8.0, 6.0, 4.0, 2.0];
        assert!((spearman(&a, &b) + 1.0).abs() < 1e-12);
    }

    #[test]
    fn spearman_constant_is_zero() {
        assert_eq!(spearman(&[0.1, 0.7, 0.3], &[0.0, 0.0, 0.0]), 0.0);
    }

    #[test]
    fn ranks_average_ties() {
        assert_eq!(ranks(&[10.0, 20.0, 10.0, 5.0]), vec![2.5, 4.0, 2.5, 1.0]);
    }

    #[test]
    fn monotone_fraction_counts_non_increasing_pairs() {
        assert_eq!(monotone_fraction(&[1.0, 0.8, 0.9, 0.2, 0.2]), 0.75);
        assert_eq!(monotone_fraction(&[0.4]), 1.0);
    }
}
