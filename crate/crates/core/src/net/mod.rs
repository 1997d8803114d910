//! Shared two-level U-Net mapping a 40x120 polar descriptor to a 40x120 embedding.
//!
//! ```text
//! 1 -> c1 -> c1 ─┬─ pool ─ c2 -> c2 ─┬─ pool ─ c3 -> c3
//!                │                   └──────── cat(up) -> c2
//!                └──────────────────────────── cat(up) -> c1 -> 1 (linear)
//! ```
//!
//! All convolutions are 3x3, circular along sectors and zero-padded along
//! rings. The same parameters serve radar and lidar inputs.

pub mod ops;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::grid::Grid;
use ops::FeatureMap;

/// Channel widths of the three resolution levels.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Architecture {
    pub widths: [usize; 3],
}

pub const LAYER_COUNT: usize = 9;
pub const LAYER_NAMES: [&str; LAYER_COUNT] =
    ["enc1a", "enc1b", "enc2a", "enc2b", "bottleneck_a", "bottleneck_b", "dec2", "dec1", "head"];

impl Architecture {
    pub const fn standard() -> Self {
        Self { widths: [8, 16, 32] }
    }

    /// Narrow variant used for gradient checks.
    pub const fn reduced() -> Self {
        Self { widths: [2, 4, 8] }
    }

    /// `(out_channels, in_channels)` per convolution, in forward order.
    pub fn layer_shapes(&self) -> [(usize, usize); LAYER_COUNT] {
        let [c1, c2, c3] = self.widths;
        [(c1, 1), (c1, c1), (c2, c1), (c2, c2), (c3, c2), (c3, c3), (c2, c3 + c2), (c1, c2 + c1), (1, c1)]
    }

    pub fn parameter_count(&self) -> usize {
        self.layer_shapes().iter().map(|(o, i)| o * i * 9 + o).sum()
    }

    /// Recovers the widths from a per-layer `(out, in)` table, checking that it
    /// chains consistently. Errors name the first inconsistent layer.
    pub fn from_layer_shapes(shapes: &[(usize, usize)]) -> std::result::Result<Self, String> {
        if shapes.len() != LAYER_COUNT {
            return Err(format!("expected {LAYER_COUNT} layers, found {}", shapes.len()));
        }
        let arch = Self { widths: [shapes[0].0, shapes[2].0, shapes[4].0] };
        if arch.widths.contains(&0) {
            return Err("zero channel width".into());
        }
        for (i, (got, want)) in shapes.iter().zip(arch.layer_shapes()).enumerate() {
            if *got != want {
                return Err(format!(
                    "layer {i} ({}) has shape {}x{} but the chain implies {}x{}",
                    LAYER_NAMES[i], got.0, got.1, want.0, want.1
                ));
            }
        }
        Ok(arch)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvLayer {
    pub out_channels: usize,
    pub in_channels: usize,
    /// `out x in x 3 x 3`, row-major.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl ConvLayer {
    pub fn zeros(out_channels: usize, in_channels: usize) -> Self {
        Self {
            out_channels,
            in_channels,
            weights: vec![0.0; out_channels * in_channels * 9],
            bias: vec![0.0; out_channels],
        }
    }

    pub fn fan_in(&self) -> usize {
        self.in_channels * 9
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetParams {
    pub arch: Architecture,
    pub layers: Vec<ConvLayer>,
}

/// Gradients, shape-congruent with [`NetParams`].
#[derive(Debug, Clone, PartialEq)]
pub struct ParamGrads {
    pub layers: Vec<ConvLayer>,
}

impl ParamGrads {
    pub fn zeros(arch: &Architecture) -> Self {
        Self { layers: arch.layer_shapes().iter().map(|&(o, i)| ConvLayer::zeros(o, i)).collect() }
    }

    pub fn add_assign(&mut self, other: &ParamGrads) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            a.weights.iter_mut().zip(&b.weights).for_each(|(x, y)| *x += y);
            a.bias.iter_mut().zip(&b.bias).for_each(|(x, y)| *x += y);
        }
    }

    pub fn scale(&mut self, s: f64) {
        for l in &mut self.layers {
            l.weights.iter_mut().for_each(|v| *v *= s);
            l.bias.iter_mut().for_each(|v| *v *= s);
        }
    }

    pub fn is_zero(&self) -> bool {
        self.layers.iter().all(|l| l.weights.iter().chain(&l.bias).all(|v| *v == 0.0))
    }
}

/// Inputs and pre-activations of every convolution in one forward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    arch: Architecture,
    inputs: Vec<FeatureMap>,
    pre_activations: Vec<FeatureMap>,
}

impl ForwardCache {
    /// Post-activation output of layer `i` (the head is linear).
    pub fn activation(&self, i: usize) -> FeatureMap {
        let z = self.pre_activations[i].clone();
        if i + 1 == LAYER_COUNT {
            z
        } else {
            z.relu()
        }
    }
}

pub const MAP_ROWS: usize = 40;
pub const MAP_COLS: usize = 120;

/// Rounds to the nearest `f32`; stored parameters stay exactly representable
/// in the on-disk checkpoint format.
#[inline]
pub(crate) fn to_f32_precision(v: f64) -> f64 {
    v as f32 as f64
}

impl NetParams {
    /// Uniform kernels with standard deviation `1/sqrt(fan_in)`, zero biases.
    pub fn init(seed: u64, arch: Architecture) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layers = arch
            .layer_shapes()
            .iter()
            .map(|&(o, i)| {
                let mut layer = ConvLayer::zeros(o, i);
                let bound = (3.0 / layer.fan_in() as f64).sqrt();
                layer.weights.iter_mut().for_each(|w| *w = to_f32_precision(rng.random_range(-bound..bound)));
                layer
            })
            .collect();
        Self { arch, layers }
    }

    pub fn parameter_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    pub fn forward(&self, input: &Grid) -> Result<(Grid, ForwardCache)> {
        input.ensure_shape(MAP_ROWS, MAP_COLS, "network input")?;
        let x0 = FeatureMap { channels: 1, height: MAP_ROWS, width: MAP_COLS, data: input.as_slice().to_vec() };
        let mut inputs = Vec::with_capacity(LAYER_COUNT);
        let mut pre = Vec::with_capacity(LAYER_COUNT);
        let mut conv = |i: usize, x: FeatureMap, inputs: &mut Vec<FeatureMap>| -> FeatureMap {
            let l = &self.layers[i];
            let z = ops::conv3x3(&x, &l.weights, &l.bias, l.out_channels);
            inputs.push(x);
            pre.push(z.clone());
            z
        };

        let a1 = conv(0, x0, &mut inputs).relu();
        let skip1 = conv(1, a1, &mut inputs).relu();
        let a3 = conv(2, ops::avg_pool2(&skip1), &mut inputs).relu();
        let skip2 = conv(3, a3, &mut inputs).relu();
        let a5 = conv(4, ops::avg_pool2(&skip2), &mut inputs).relu();
        let a6 = conv(5, a5, &mut inputs).relu();
        let a7 = conv(6, FeatureMap::concat(&ops::upsample2(&a6), &skip2), &mut inputs).relu();
        let a8 = conv(7, FeatureMap::concat(&ops::upsample2(&a7), &skip1), &mut inputs).relu();
        let out = conv(8, a8, &mut inputs);

        let embedding = Grid::from_vec(MAP_ROWS, MAP_COLS, out.data)?;
        Ok((embedding, ForwardCache { arch: self.arch, inputs, pre_activations: pre }))
    }

    pub fn embed(&self, input: &Grid) -> Result<Grid> {
        Ok(self.forward(input)?.0)
    }

    /// Exact reverse-mode gradients; returns parameter and input gradients.
    pub fn backward(&self, cache: &ForwardCache, grad_output: &Grid) -> Result<(ParamGrads, Grid)> {
        if cache.arch != self.arch || cache.inputs.len() != LAYER_COUNT {
            return Err(Error::ShapeMismatch(format!(
                "forward cache built for {:?} cannot be used with {:?}",
                cache.arch.widths, self.arch.widths
            )));
        }
        grad_output.ensure_shape(MAP_ROWS, MAP_COLS, "output gradient")?;
        let [_, c2, c3] = self.arch.widths;
        let mut grads = ParamGrads::zeros(&self.arch);

        let step = |i: usize, g: FeatureMap, grads: &mut ParamGrads, masked: bool| -> FeatureMap {
            let g = if masked { g.mask_relu(&cache.pre_activations[i]) } else { g };
            let gl = &mut grads.layers[i];
            ops::conv3x3_backward(&cache.inputs[i], &self.layers[i].weights, &g, &mut gl.weights, &mut gl.bias, true)
                .expect("input gradient requested")
        };

        let g_out = FeatureMap { channels: 1, height: MAP_ROWS, width: MAP_COLS, data: grad_output.as_slice().to_vec() };
        let g_a8 = step(8, g_out, &mut grads, false);
        let (g_up2, mut g_skip1) = step(7, g_a8, &mut grads, true).split(c2);
        let g_a7 = ops::upsample2_backward(&g_up2);
        let (g_up1, mut g_skip2) = step(6, g_a7, &mut grads, true).split(c3);
        let g_a6 = ops::upsample2_backward(&g_up1);
        let g_a5 = step(5, g_a6, &mut grads, true);
        let g_p2 = step(4, g_a5, &mut grads, true);
        g_skip2.add_assign(&ops::avg_pool2_backward(&g_p2));
        let g_a3 = step(3, g_skip2, &mut grads, true);
        let g_p1 = step(2, g_a3, &mut grads, true);
        g_skip1.add_assign(&ops::avg_pool2_backward(&g_p1));
        let g_a1 = step(1, g_skip1, &mut grads, true);
        let g_x = step(0, g_a1, &mut grads, true);
        Ok((grads, Grid::from_vec(MAP_ROWS, MAP_COLS, g_x.data)?))
    }

    /// Flat view of every parameter, weights then bias per layer.
    pub fn flat_values(&self) -> Vec<f64> {
        self.layers.iter().flat_map(|l| l.weights.iter().chain(&l.bias).copied()).collect()
    }

    /// Overwrites every parameter from a flat slice in [`NetParams::flat_values`] order.
    pub fn set_flat(&mut self, values: &[f64]) -> Result<()> {
        if values.len() != self.parameter_count() {
            return Err(Error::ShapeMismatch(format!(
                "{} values for {} parameters",
                values.len(),
                self.parameter_count()
            )));
        }
        let mut it = values.iter();
        for l in &mut self.layers {
            for x in l.weights.iter_mut().chain(l.bias.iter_mut()) {
                *x = *it.next().expect("length checked");
            }
        }
        Ok(())
    }

    /// Mutable access to the `n`-th parameter in [`NetParams::flat_values`] order.
    pub fn flat_mut(&mut self, mut n: usize) -> &mut f64 {
        for l in &mut self.layers {
            if n < l.weights.len() {
                return &mut l.weights[n];
            }
            n -= l.weights.len();
            if n < l.bias.len() {
                return &mut l.bias[n];
            }
            n -= l.bias.len();
        }
        panic!("parameter index out of range");
    }
}

impl ParamGrads {
    pub fn flat_values(&self) -> Vec<f64> {
        self.layers.iter().flat_map(|l| l.weights.iter().chain(&l.bias).copied()).collect()
    }
}
