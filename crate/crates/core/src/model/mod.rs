//! The spectrogram CNN: stacked `conv3x3 -> ReLU -> maxpool2x2` blocks,
//! a ReLU hidden layer and a linear output producing one logit per class.
//!
//! Forward and backward passes are written out by hand in [`network`];
//! the loss lives in [`loss`] and persistence in [`checkpoint`].

pub mod checkpoint;
mod gradcheck;
mod gemm;
pub mod loss;
pub mod network;

pub use checkpoint::{load_checkpoint, save_checkpoint, CHECKPOINT_MAGIC};
pub use gradcheck::{gradient_check, GradCheck};
pub use loss::{bce_with_logits, sigmoid};
pub use network::{backward, forward, predict_proba, ForwardCache};

use std::sync::atomic::{AtomicU64, Ordering};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub input_channels: usize,
    pub input_height: usize,
    pub input_width: usize,
    /// Output channels of each conv block; each block halves the spatial size.
    pub conv_channels: Vec<usize>,
    pub kernel_size: usize,
    pub fc_hidden: usize,
    pub num_classes: usize,
    pub weight_init_seed: u64,
}

impl ModelConfig {
    /// 1x128x128 input, conv widths 64/128/256/512, 128 hidden units.
    pub fn full_size(num_classes: usize) -> Self {
        Self {
            input_channels: 1,
            input_height: 128,
            input_width: 128,
            conv_channels: vec![64, 128, 256, 512],
            kernel_size: 3,
            fc_hidden: 128,
            num_classes,
            weight_init_seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::InvalidConfig(msg));
        if self.input_channels == 0 || self.fc_hidden == 0 || self.num_classes == 0 {
            return fail("channels, hidden width and class count must be positive".into());
        }
        if self.kernel_size != 3 {
            return fail(format!("only 3x3 kernels are supported, got {}", self.kernel_size));
        }
        if self.conv_channels.is_empty() || self.conv_channels.contains(&0) {
            return fail("conv_channels must be non-empty and positive".into());
        }
        let factor = 1usize << self.conv_channels.len();
        if !self.input_height.is_multiple_of(factor) || !self.input_width.is_multiple_of(factor) || self.input_height == 0 || self.input_width == 0 {
            return fail(format!(
                "input {}x{} is not divisible by 2^{} pooling",
                self.input_height,
                self.input_width,
                self.conv_channels.len()
            ));
        }
        Ok(())
    }

    /// Spatial size after the last pooling.
    pub fn final_spatial(&self) -> (usize, usize) {
        let shift = self.conv_channels.len();
        (self.input_height >> shift, self.input_width >> shift)
    }

    pub fn flatten_size(&self) -> usize {
        let (h, w) = self.final_spatial();
        self.conv_channels.last().copied().unwrap_or(0) * h * w
    }

    pub fn input_len(&self) -> usize {
        self.input_channels * self.input_height * self.input_width
    }

    /// `(name, shape, fan_in)` for every parameter tensor in declaration
    /// order.
    pub fn tensor_layout(&self) -> Vec<(String, Vec<usize>, usize)> {
        let k = self.kernel_size;
        let mut layout = Vec::new();
        let mut in_ch = self.input_channels;
        for (i, &out_ch) in self.conv_channels.iter().enumerate() {
            let fan_in = in_ch * k * k;
            layout.push((format!("conv{}.weight", i + 1), vec![out_ch, in_ch, k, k], fan_in));
            layout.push((format!("conv{}.bias", i + 1), vec![out_ch], fan_in));
            in_ch = out_ch;
        }
        let flat = self.flatten_size();
        layout.push(("fc1.weight".into(), vec![self.fc_hidden, flat], flat));
        layout.push(("fc1.bias".into(), vec![self.fc_hidden], flat));
        layout.push((
            "fc2.weight".into(),
            vec![self.num_classes, self.fc_hidden],
            self.fc_hidden,
        ));
        layout.push(("fc2.bias".into(), vec![self.num_classes], self.fc_hidden));
        layout
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(name: impl Into<String>, shape: Vec<usize>) -> Self {
        let len = shape.iter().product();
        Self {
            name: name.into(),
            shape,
            data: vec![0.0; len],
        }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }
}

static NEXT_STAMP: AtomicU64 = AtomicU64::new(1);

fn fresh_stamp() -> u64 {
    NEXT_STAMP.fetch_add(1, Ordering::Relaxed)
}

/// All weights and biases, in [`ModelConfig::tensor_layout`] order.
///
/// Every mutation through [`ModelParams::tensors_mut`] re-stamps the
/// parameters, invalidating activation caches taken before it.
#[derive(Debug)]
pub struct ModelParams {
    config: ModelConfig,
    tensors: Vec<Tensor>,
    stamp: u64,
}

impl Clone for ModelParams {
    fn clone(&self) -> Self {
        Self {
            config: self.config.clone(),
            tensors: self.tensors.clone(),
            stamp: fresh_stamp(),
        }
    }
}

impl PartialEq for ModelParams {
    fn eq(&self, other: &Self) -> bool {
        self.config == other.config && self.tensors == other.tensors
    }
}

impl ModelParams {
    pub fn zeros(config: &ModelConfig) -> Result<Self> {
        config.validate()?;
        let tensors = config
            .tensor_layout()
            .into_iter()
            .map(|(name, shape, _)| Tensor::zeros(name, shape))
            .collect();
        Ok(Self {
            config: config.clone(),
            tensors,
            stamp: fresh_stamp(),
        })
    }

    /// Builds parameters from explicit tensors, checking them against the
    /// layout of `config`.
    pub fn from_tensors(config: &ModelConfig, tensors: Vec<Tensor>) -> Result<Self> {
        config.validate()?;
        let layout = config.tensor_layout();
        if layout.len() != tensors.len() {
            return Err(Error::ShapeMismatch(format!(
                "expected {} tensors, got {}",
                layout.len(),
                tensors.len()
            )));
        }
        for ((name, shape, _), t) in layout.iter().zip(&tensors) {
            if &t.shape != shape || t.data.len() != shape.iter().product::<usize>() {
                return Err(Error::ShapeMismatch(format!(
                    "{name}: expected shape {shape:?}, got {:?}",
                    t.shape
                )));
            }
            if t.data.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidConfig(format!("{name} contains non-finite values")));
            }
        }
        Ok(Self {
            config: config.clone(),
            tensors,
            stamp: fresh_stamp(),
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn tensors(&self) -> &[Tensor] {
        &self.tensors
    }

    pub fn tensors_mut(&mut self) -> &mut [Tensor] {
        self.stamp = fresh_stamp();
        &mut self.tensors
    }

    pub fn num_parameters(&self) -> usize {
        self.tensors.iter().map(Tensor::len).sum()
    }

    pub(crate) fn stamp(&self) -> u64 {
        self.stamp
    }

    pub(crate) fn conv(&self, block: usize) -> (&Tensor, &Tensor) {
        (&self.tensors[2 * block], &self.tensors[2 * block + 1])
    }

    pub(crate) fn dense(&self, layer: usize) -> (&Tensor, &Tensor) {
        let base = 2 * self.config.conv_channels.len() + 2 * layer;
        (&self.tensors[base], &self.tensors[base + 1])
    }
}

/// He-uniform weights, `U(-sqrt(6 / fan_in), sqrt(6 / fan_in))`, and zero
/// biases, drawn from a stream seeded by `weight_init_seed`.
pub fn init_params(config: &ModelConfig) -> Result<ModelParams> {
    let mut params = ModelParams::zeros(config)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.weight_init_seed);
    let layout = config.tensor_layout();
    for (t, (_, shape, fan_in)) in params.tensors.iter_mut().zip(layout) {
        if shape.len() == 1 {
            continue;
        }
        let bound = (6.0 / fan_in as f64).sqrt();
        t.data
            .iter_mut()
            .for_each(|w| *w = rng.gen_range(-bound..bound));
    }
    Ok(params)
}

/// Per-tensor gradients, same layout as [`ModelParams`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub tensors: Vec<Tensor>,
}

impl Gradients {
    pub fn zeros_like(params: &ModelParams) -> Self {
        Self {
            tensors: params
                .tensors()
                .iter()
                .map(|t| Tensor::zeros(t.name.clone(), t.shape.clone()))
                .collect(),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.tensors
            .iter()
            .flat_map(|t| t.data.iter())
            .fold(0.0, |m, v| m.max(v.abs()))
    }
}
