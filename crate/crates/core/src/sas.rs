//! Semantic-aware pathway: deep feature-map integration.
//!
//! Every feature map of a layer is resized to image resolution and turned
//! into a spatial probability distribution with a max-shifted softmax. The
//! layer map is the sum of its distributions, and the pathway output is a
//! weighted sum of layer maps.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::{normalize_range, SaliencyMap};

/// Convolutional layer group of the feature extractor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Layer {
    #[serde(rename = "conv1")]
    Conv1,
    #[serde(rename = "conv2")]
    Conv2,
    #[serde(rename = "conv3")]
    Conv3,
    #[serde(rename = "conv4")]
    Conv4,
    #[serde(rename = "conv5")]
    Conv5,
}

impl Layer {
    pub const ALL: [Layer; 5] = [Layer::Conv1, Layer::Conv2, Layer::Conv3, Layer::Conv4, Layer::Conv5];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        ["conv1", "conv2", "conv3", "conv4", "conv5"][self.index()]
    }

    /// `(map count, native side length)` of the VGG-16 reference export.
    pub fn reference_geometry(self) -> (usize, usize) {
        [(128, 224), (256, 112), (768, 56), (1536, 28), (1536, 14)][self.index()]
    }
}

impl fmt::Display for Layer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Layer {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Layer::ALL
            .into_iter()
            .find(|l| l.name() == s)
            .ok_or_else(|| Error::InvalidValue(format!("unknown layer {s:?}")))
    }
}

/// All maps of one layer, stored map-major then row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureLayer {
    pub layer: Layer,
    pub maps: usize,
    pub height: usize,
    pub width: usize,
    pub data: Vec<f32>,
}

impl FeatureLayer {
    pub fn new(layer: Layer, maps: usize, height: usize, width: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != maps * height * width {
            return Err(Error::InvalidDimensions(format!(
                "{layer}: {} values for {maps} maps of {width}x{height}",
                data.len()
            )));
        }
        if maps > 0 && (height == 0 || width == 0) {
            return Err(Error::InvalidDimensions(format!("{layer}: zero-sized maps")));
        }
        Ok(FeatureLayer {
            layer,
            maps,
            height,
            width,
            data,
        })
    }

    pub fn map(&self, k: usize) -> &[f32] {
        let n = self.height * self.width;
        &self.data[k * n..(k + 1) * n]
    }
}

/// Feature maps of one image, grouped by layer.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureStack {
    pub image_width: usize,
    pub image_height: usize,
    pub layers: Vec<FeatureLayer>,
}

impl FeatureStack {
    pub fn new(image_width: usize, image_height: usize, layers: Vec<FeatureLayer>) -> Result<Self> {
        if image_width == 0 || image_height == 0 {
            return Err(Error::InvalidDimensions("image dims must be >= 1".into()));
        }
        for (i, l) in layers.iter().enumerate() {
            if layers[..i].iter().any(|o| o.layer == l.layer) {
                return Err(Error::InvalidValue(format!("duplicate layer {}", l.layer)));
            }
        }
        Ok(FeatureStack {
            image_width,
            image_height,
            layers,
        })
    }

    pub fn layer(&self, layer: Layer) -> Option<&FeatureLayer> {
        self.layers.iter().find(|l| l.layer == layer)
    }

    /// Differences from the reference exporter's geometry. These are not
    /// errors; synthetic and subset stacks are legitimate inputs.
    pub fn reference_mismatches(&self) -> Vec<String> {
        self.layers
            .iter()
            .filter_map(|l| {
                let (maps, side) = l.layer.reference_geometry();
                (l.maps != maps || l.height != side || l.width != side).then(|| {
                    format!(
                        "{}: {} maps of {}x{} (reference: {maps} maps of {side}x{side})",
                        l.layer, l.maps, l.width, l.height
                    )
                })
            })
            .collect()
    }
}

/// Sign of the softmax exponent.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Eq3Mode {
    /// `exp(C − M)`: strongest responses get the highest probability.
    #[default]
    Standard,
    /// `exp(M − C)`, as typeset: the weakest responses win.
    Literal,
}

impl FromStr for Eq3Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "standard" => Ok(Eq3Mode::Standard),
            "literal" => Ok(Eq3Mode::Literal),
            _ => Err(Error::InvalidValue(format!("unknown eq3 mode {s:?}"))),
        }
    }
}

/// Spatial softmax of one map, summing to 1.
///
/// Literal mode is evaluated as `exp(min − C)`, which differs from
/// `exp(M − C)` only by a constant factor that cancels in the
/// normalization and cannot overflow.
pub fn spatial_softmax(values: &[f64], mode: Eq3Mode) -> Vec<f64> {
    let mut out: Vec<f64> = match mode {
        Eq3Mode::Standard => {
            let m = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            values.iter().map(|c| (c - m).exp()).collect()
        }
        Eq3Mode::Literal => {
            let m = values.iter().copied().fold(f64::INFINITY, f64::min);
            values.iter().map(|c| (m - c).exp()).collect()
        }
    };
    let sum: f64 = out.iter().sum();
    out.iter_mut().for_each(|p| *p /= sum);
    out
}

/// `Σ_k softmax(C_k)` over equally sized grids.
pub fn aggregate_grids(grids: &[Vec<f64>], mode: Eq3Mode) -> Result<Vec<f64>> {
    let Some(first) = grids.first() else {
        return Err(Error::EmptyLayer("no maps".into()));
    };
    let mut acc = vec![0.0; first.len()];
    for g in grids {
        if g.len() != acc.len() {
            return Err(Error::DimensionMismatch("feature maps differ in size".into()));
        }
        for (a, p) in acc.iter_mut().zip(spatial_softmax(g, mode)) {
            *a += p;
        }
    }
    Ok(acc)
}

/// Layer saliency `S_l`, at the stack's image resolution.
pub fn aggregate_layer(stack: &FeatureStack, layer: Layer, mode: Eq3Mode) -> Result<SaliencyMap> {
    let fl = stack
        .layer(layer)
        .ok_or_else(|| Error::MissingLayer(layer.name().into()))?;
    if fl.maps == 0 {
        return Err(Error::EmptyLayer(layer.name().into()));
    }
    let (w, h) = (stack.image_width, stack.image_height);
    let mut acc = vec![0.0; w * h];
    for k in 0..fl.maps {
        let native: Vec<f64> = fl.map(k).iter().map(|v| f64::from(*v).max(0.0)).collect();
        let resized = SaliencyMap::new(fl.width, fl.height, native)?.resize_bilinear(w, h)?;
        for (a, p) in acc.iter_mut().zip(spatial_softmax(resized.values(), mode)) {
            *a += p;
        }
    }
    Ok(SaliencyMap::from_vec_unchecked(w, h, acc))
}

/// Named weight vectors over conv1..conv5.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WeightPreset {
    W1,
    W2,
    W3,
    W4,
    W5,
    #[serde(rename = "w_all")]
    WAll,
    Custom,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LayerWeights {
    pub preset: WeightPreset,
    pub weights: [f64; 5],
}

impl LayerWeights {
    pub fn preset(preset: WeightPreset) -> Self {
        let weights = match preset {
            WeightPreset::WAll => [0.2; 5],
            WeightPreset::Custom => panic!("custom weights need LayerWeights::custom"),
            one_hot => {
                let mut w = [0.0; 5];
                w[one_hot as usize] = 1.0;
                w
            }
        };
        LayerWeights { preset, weights }
    }

    pub fn custom(weights: [f64; 5]) -> Result<Self> {
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) || weights.iter().sum::<f64>() <= 0.0 {
            return Err(Error::InvalidValue(format!(
                "layer weights must be non-negative with a positive sum, got {weights:?}"
            )));
        }
        Ok(LayerWeights {
            preset: WeightPreset::Custom,
            weights,
        })
    }

    pub fn weight(&self, layer: Layer) -> f64 {
        self.weights[layer.index()]
    }

    pub fn active_layers(&self) -> impl Iterator<Item = Layer> + '_ {
        Layer::ALL.into_iter().filter(|l| self.weight(*l) > 0.0)
    }
}

impl FromStr for LayerWeights {
    type Err = Error;

    /// Accepts `w1`..`w5`, `all` / `w_all`, or five comma-separated numbers.
    fn from_str(s: &str) -> Result<Self> {
        let preset = match s {
            "w1" => WeightPreset::W1,
            "w2" => WeightPreset::W2,
            "w3" => WeightPreset::W3,
            "w4" => WeightPreset::W4,
            "w5" => WeightPreset::W5,
            "all" | "w_all" => WeightPreset::WAll,
            _ => {
                let parts = s
                    .split(',')
                    .map(|p| p.trim().parse::<f64>())
                    .collect::<std::result::Result<Vec<_>, _>>()
                    .map_err(|_| Error::InvalidValue(format!("unknown weights {s:?}")))?;
                let arr: [f64; 5] = parts
                    .try_into()
                    .map_err(|_| Error::InvalidValue(format!("expected 5 weights in {s:?}")))?;
                return LayerWeights::custom(arr);
            }
        };
        Ok(LayerWeights::preset(preset))
    }
}

/// `normalize(Σ_l w_l S_l)`. `maps[l]` may be `None` only where `w_l = 0`.
pub fn combine_layers(maps: &[Option<SaliencyMap>; 5], weights: &LayerWeights) -> Result<SaliencyMap> {
    let mut acc: Option<Vec<f64>> = None;
    let mut dims = None;
    for layer in weights.active_layers() {
        let map = maps[layer.index()]
            .as_ref()
            .ok_or_else(|| Error::MissingLayer(layer.name().into()))?;
        if *dims.get_or_insert(map.dims()) != map.dims() {
            return Err(Error::DimensionMismatch(format!("{layer} map has different dims")));
        }
        let w = weights.weight(layer);
        let a = acc.get_or_insert_with(|| vec![0.0; map.values().len()]);
        a.iter_mut().zip(map.values()).for_each(|(a, v)| *a += w * v);
    }
    let (Some(acc), Some((w, h))) = (acc, dims) else {
        return Err(Error::InvalidValue("no layer has a positive weight".into()));
    };
    Ok(normalize_range(&SaliencyMap::from_vec_unchecked(w, h, acc)))
}

/// Full semantic-aware map at the stack's image resolution.
pub fn sas_saliency(stack: &FeatureStack, weights: &LayerWeights, mode: Eq3Mode) -> Result<SaliencyMap> {
    for m in stack.reference_mismatches() {
        log::debug!("feature stack differs from reference export: {m}");
    }
    let active: Vec<Layer> = weights.active_layers().collect();
    let computed: Vec<(Layer, SaliencyMap)> = active
        .par_iter()
        .map(|&l| aggregate_layer(stack, l, mode).map(|m| (l, m)))
        .collect::<Result<_>>()?;
    let mut maps: [Option<SaliencyMap>; 5] = Default::default();
    for (l, m) in computed {
        maps[l.index()] = Some(m);
    }
    combine_layers(&maps, weights)
}
