//! The two-stage CNN: six 5x5 conv layers with interleaved 3x3 average
//! pools for feature extraction, then two fully connected layers (hidden
//! ReLU, 2-way softmax head) for classification.

use crate::autograd::{Graph, NodeId};
use crate::error::{Error, Result};
use crate::ops::{self, Mode};
use crate::rng::SeedRng;
use crate::tensor::Tensor;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::io::{Read, Write};
use std::path::Path;

pub const NUM_CONV_LAYERS: usize = 6;

/// Widths and regularization knobs of the network. Everything the
/// architecture leaves free is set here.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    /// Output channels of each of the six conv layers.
    pub filters: [usize; NUM_CONV_LAYERS],
    /// Width of the hidden fully connected layer.
    pub fc_width: usize,
    /// Dropout rate after each conv layer (training only).
    pub dropout_conv: f64,
    /// Dropout rate after the hidden fully connected layer (training only).
    pub dropout_fc: f64,
    /// L2 coefficient applied to the classification-layer weights.
    pub l2_lambda: f64,
    /// Expected input image size as (height, width).
    pub input_size: (usize, usize),
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            filters: [8, 8, 16, 16, 32, 32],
            fc_width: 64,
            dropout_conv: 0.1,
            dropout_fc: 0.3,
            l2_lambda: 1e-4,
            input_size: (96, 96),
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.filters.iter().any(|&f| f == 0) || self.fc_width == 0 {
            return Err(Error::Parameter("all layer widths must be >= 1".into()));
        }
        for (name, rate) in [("dropout_conv", self.dropout_conv), ("dropout_fc", self.dropout_fc)] {
            if !(0.0..1.0).contains(&rate) {
                return Err(Error::Parameter(format!("{name} must be in [0, 1), got {rate}")));
            }
        }
        if !(self.l2_lambda >= 0.0) {
            return Err(Error::Parameter(format!("l2_lambda must be >= 0, got {}", self.l2_lambda)));
        }
        if self.input_size.0 < 1 || self.input_size.1 < 1 {
            return Err(Error::Parameter(format!(
                "input size must be at least 1x1, got {:?}",
                self.input_size
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvLayer {
    pub kernels: Tensor,
    pub bias: Tensor,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    pub weights: Tensor,
    pub bias: Tensor,
}

/// Fig-1-shaped network with its parameters and regularization settings.
#[derive(Debug, Clone, PartialEq)]
pub struct CnnModel {
    pub config: ModelConfig,
    pub conv: Vec<ConvLayer>,
    pub fc_hidden: DenseLayer,
    pub fc_output: DenseLayer,
}

/// One entry of the architecture walk, at the granularity of the layer
/// diagram: conv-conv-pool three times, then flatten and the two FC heads.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayerKind {
    Conv,
    AvgPool,
    Flatten,
    DenseRelu,
    DenseSoftmax,
}

/// A recorded training forward pass: the tape plus the interesting nodes.
pub struct ModelGraph {
    pub graph: Graph,
    pub loss: NodeId,
    pub probs: NodeId,
    /// Parameter leaves in canonical order (matching the params the graph
    /// was built over).
    pub params: Vec<NodeId>,
}

impl CnnModel {
    pub fn layer_sequence(&self) -> Vec<LayerKind> {
        let mut seq = Vec::new();
        for i in 0..self.conv.len() {
            seq.push(LayerKind::Conv);
            if i % 2 == 1 {
                seq.push(LayerKind::AvgPool);
            }
        }
        seq.push(LayerKind::Flatten);
        seq.push(LayerKind::DenseRelu);
        seq.push(LayerKind::DenseSoftmax);
        seq
    }

    /// Parameter tensors in canonical order: conv kernels/bias pairs, then
    /// the two dense layers' weights/bias pairs.
    pub fn params(&self) -> Vec<&Tensor> {
        let mut v = Vec::with_capacity(self.conv.len() * 2 + 4);
        for layer in &self.conv {
            v.push(&layer.kernels);
            v.push(&layer.bias);
        }
        v.push(&self.fc_hidden.weights);
        v.push(&self.fc_hidden.bias);
        v.push(&self.fc_output.weights);
        v.push(&self.fc_output.bias);
        v
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        let mut v = Vec::with_capacity(self.conv.len() * 2 + 4);
        for layer in &mut self.conv {
            v.push(&mut layer.kernels);
            v.push(&mut layer.bias);
        }
        v.push(&mut self.fc_hidden.weights);
        v.push(&mut self.fc_hidden.bias);
        v.push(&mut self.fc_output.weights);
        v.push(&mut self.fc_output.bias);
        v
    }

    pub fn param_names(&self) -> Vec<String> {
        let mut v = Vec::with_capacity(self.conv.len() * 2 + 4);
        for i in 0..self.conv.len() {
            v.push(format!("conv{}.kernels", i + 1));
            v.push(format!("conv{}.bias", i + 1));
        }
        for name in ["fc_hidden.weights", "fc_hidden.bias", "fc_output.weights", "fc_output.bias"] {
            v.push(name.to_string());
        }
        v
    }

    /// Indices (into the canonical parameter order) of the classification
    /// layers; everything before is feature extraction.
    pub fn classification_param_range(&self) -> std::ops::Range<usize> {
        let n = self.conv.len() * 2 + 4;
        n - 4..n
    }

    pub fn total_param_count(&self) -> usize {
        self.params().iter().map(|t| t.len()).sum()
    }

    fn check_input(&self, image: &Tensor) -> Result<()> {
        let (h, w) = self.config.input_size;
        if image.shape() != [h, w, 1] {
            return Err(Error::Shape(format!(
                "model expects input [{h}, {w}, 1], got {:?}",
                image.shape()
            )));
        }
        Ok(())
    }

    /// Class probabilities for one image. Train mode applies dropout from
    /// the given stream; inference is deterministic and needs no stream.
    pub fn forward(&self, image: &Tensor, mode: Mode, rng: Option<&mut SeedRng>) -> Result<[f64; 2]> {
        match mode {
            Mode::Infer => {
                let feats = self.features(image)?;
                self.classifier_probs(&feats)
            }
            Mode::Train => {
                let rng = rng.ok_or_else(|| {
                    Error::Usage("training-mode forward requires a random stream".into())
                })?;
                let mg = self.training_graph(image, 0, 1.0, rng)?;
                let p = mg.graph.value(mg.probs);
                Ok([p.data()[0], p.data()[1]])
            }
        }
    }

    /// Positive-class (index 1) probability at inference.
    pub fn predict_positive(&self, image: &Tensor) -> Result<f64> {
        Ok(self.forward(image, Mode::Infer, None)?[1])
    }

    /// Deterministic feature extraction: conv/pool stack plus flatten, no
    /// dropout. This is the frozen half during fine-tuning.
    pub fn features(&self, image: &Tensor) -> Result<Tensor> {
        self.check_input(image)?;
        let mut x = image.clone();
        for (i, layer) in self.conv.iter().enumerate() {
            x = ops::conv2d(&x, &layer.kernels, &layer.bias)?;
            x = ops::relu(&x);
            if i % 2 == 1 {
                x = ops::avg_pool3(&x)?;
            }
        }
        let n = x.len();
        x.reshaped(vec![n])
    }

    /// Classification stage at inference: hidden ReLU layer then softmax.
    pub fn classifier_probs(&self, features: &Tensor) -> Result<[f64; 2]> {
        let h = ops::dense(features, &self.fc_hidden.weights, &self.fc_hidden.bias)?;
        let h = ops::relu(&h);
        let logits = ops::dense(&h, &self.fc_output.weights, &self.fc_output.bias)?;
        let p = ops::softmax(&logits)?;
        Ok([p.data()[0], p.data()[1]])
    }

    /// L2 penalty over the classification-layer weights only; conv
    /// parameters and all biases are excluded.
    pub fn l2_penalty(&self) -> f64 {
        self.config.l2_lambda
            * (ops::square_sum(&self.fc_hidden.weights) + ops::square_sum(&self.fc_output.weights))
    }

    /// Record a full training pass for one labeled image: dropout after
    /// every conv layer and the hidden FC layer, cost-sensitive BCE, and
    /// the L2 penalty on the classification weights.
    pub fn training_graph(
        &self,
        image: &Tensor,
        label: u8,
        pos_weight: f64,
        rng: &mut SeedRng,
    ) -> Result<ModelGraph> {
        self.check_input(image)?;
        let mut g = Graph::new();
        let mut params = Vec::new();
        let conv_nodes: Vec<(NodeId, NodeId)> = self
            .conv
            .iter()
            .map(|l| {
                let k = g.leaf(l.kernels.clone());
                let b = g.leaf(l.bias.clone());
                params.push(k);
                params.push(b);
                (k, b)
            })
            .collect();
        let fc_h_w = g.leaf(self.fc_hidden.weights.clone());
        let fc_h_b = g.leaf(self.fc_hidden.bias.clone());
        let fc_o_w = g.leaf(self.fc_output.weights.clone());
        let fc_o_b = g.leaf(self.fc_output.bias.clone());
        params.extend([fc_h_w, fc_h_b, fc_o_w, fc_o_b]);

        let mut x = g.leaf_no_grad(image.clone());
        for (i, &(k, b)) in conv_nodes.iter().enumerate() {
            x = g.conv2d(x, k, b)?;
            x = g.relu(x);
            x = g.dropout(x, self.config.dropout_conv, Mode::Train, rng)?;
            if i % 2 == 1 {
                x = g.avg_pool3(x)?;
            }
        }
        x = g.flatten(x);
        x = g.dense(x, fc_h_w, fc_h_b)?;
        x = g.relu(x);
        x = g.dropout(x, self.config.dropout_fc, Mode::Train, rng)?;
        let logits = g.dense(x, fc_o_w, fc_o_b)?;
        let probs = g.softmax(logits)?;
        let bce = g.weighted_bce(probs, label, pos_weight)?;
        let loss = self.attach_l2(&mut g, bce, fc_h_w, fc_o_w)?;
        Ok(ModelGraph { graph: g, loss, probs, params })
    }

    /// Record a classification-stage-only training pass over precomputed
    /// features. The parameter leaves are just the four FC tensors.
    pub fn classifier_graph(
        &self,
        features: &Tensor,
        label: u8,
        pos_weight: f64,
        rng: &mut SeedRng,
    ) -> Result<ModelGraph> {
        let mut g = Graph::new();
        let fc_h_w = g.leaf(self.fc_hidden.weights.clone());
        let fc_h_b = g.leaf(self.fc_hidden.bias.clone());
        let fc_o_w = g.leaf(self.fc_output.weights.clone());
        let fc_o_b = g.leaf(self.fc_output.bias.clone());
        let params = vec![fc_h_w, fc_h_b, fc_o_w, fc_o_b];

        let mut x = g.leaf(features.clone());
        x = g.dense(x, fc_h_w, fc_h_b)?;
        x = g.relu(x);
        x = g.dropout(x, self.config.dropout_fc, Mode::Train, rng)?;
        let logits = g.dense(x, fc_o_w, fc_o_b)?;
        let probs = g.softmax(logits)?;
        let bce = g.weighted_bce(probs, label, pos_weight)?;
        let loss = self.attach_l2(&mut g, bce, fc_h_w, fc_o_w)?;
        Ok(ModelGraph { graph: g, loss, probs, params })
    }

    fn attach_l2(&self, g: &mut Graph, bce: NodeId, fc_h_w: NodeId, fc_o_w: NodeId) -> Result<NodeId> {
        if self.config.l2_lambda == 0.0 {
            return Ok(bce);
        }
        let s1 = g.square_sum(fc_h_w);
        let s2 = g.square_sum(fc_o_w);
        let ss = g.add_scaled(s1, s2, 1.0)?;
        g.add_scaled(bce, ss, self.config.l2_lambda)
    }

    /// Plain data loss (no penalty) at inference, for validation monitoring.
    pub fn infer_loss(&self, image: &Tensor, label: u8, pos_weight: f64) -> Result<f64> {
        let p = self.forward(image, Mode::Infer, None)?;
        let t = Tensor::from_vec(vec![2], vec![p[0], p[1]])?;
        ops::weighted_bce(&t, label, pos_weight)
    }
}

fn ceil_div3_chain(mut v: usize) -> usize {
    for _ in 0..3 {
        v = v.div_ceil(3);
    }
    v
}

/// Spatial feature-map size after the three stride-3 pools.
pub fn pooled_size(input_size: (usize, usize)) -> (usize, usize) {
    (ceil_div3_chain(input_size.0), ceil_div3_chain(input_size.1))
}

/// Flattened feature length for a config.
pub fn feature_len(config: &ModelConfig) -> usize {
    let (h, w) = pooled_size(config.input_size);
    h * w * config.filters[NUM_CONV_LAYERS - 1]
}

/// Build a freshly initialized model: He-uniform weights drawn from the
/// given stream in canonical parameter order, zero biases.
pub fn build_model(config: &ModelConfig, rng: &mut SeedRng) -> Result<CnnModel> {
    config.validate()?;
    let he_uniform = |fan_in: usize, len: usize, shape: Vec<usize>, rng: &mut SeedRng| {
        let limit = (6.0 / fan_in as f64).sqrt();
        let data = (0..len).map(|_| rng.gen_range(-limit..limit)).collect();
        Tensor::from_vec(shape, data).expect("shape/len agree")
    };

    let mut conv = Vec::with_capacity(NUM_CONV_LAYERS);
    let mut cin = 1;
    for &cout in &config.filters {
        let fan_in = ops::KERNEL_EXTENT * ops::KERNEL_EXTENT * cin;
        let kernels = he_uniform(
            fan_in,
            fan_in * cout,
            vec![ops::KERNEL_EXTENT, ops::KERNEL_EXTENT, cin, cout],
            rng,
        );
        conv.push(ConvLayer { kernels, bias: Tensor::zeros(vec![cout]) });
        cin = cout;
    }

    let n_feat = feature_len(config);
    let fc_hidden = DenseLayer {
        weights: he_uniform(n_feat, config.fc_width * n_feat, vec![config.fc_width, n_feat], rng),
        bias: Tensor::zeros(vec![config.fc_width]),
    };
    let fc_output = DenseLayer {
        weights: he_uniform(config.fc_width, 2 * config.fc_width, vec![2, config.fc_width], rng),
        bias: Tensor::zeros(vec![2]),
    };

    Ok(CnnModel { config: config.clone(), conv, fc_hidden, fc_output })
}

// ---------------------------------------------------------------------------
// Binary serialization: magic "PQS1", version u32, kind byte, JSON config,
// then each parameter tensor as a shape header plus little-endian f64 data,
// in canonical layer order.
// ---------------------------------------------------------------------------

pub const MAGIC: [u8; 4] = *b"PQS1";
pub const FORMAT_VERSION: u32 = 1;
pub const KIND_MODEL: u8 = 0;
pub const KIND_ENSEMBLE: u8 = 1;

fn read_exact_or<R: Read>(r: &mut R, buf: &mut [u8], what: &str) -> Result<()> {
    r.read_exact(buf)
        .map_err(|_| Error::Format(format!("truncated file while reading {what}")))
}

pub(crate) fn read_u32<R: Read>(r: &mut R, what: &str) -> Result<u32> {
    let mut b = [0u8; 4];
    read_exact_or(r, &mut b, what)?;
    Ok(u32::from_le_bytes(b))
}

pub(crate) fn write_tensor<W: Write>(w: &mut W, t: &Tensor) -> Result<()> {
    w.write_all(&(t.shape().len() as u32).to_le_bytes())?;
    for &d in t.shape() {
        w.write_all(&(d as u32).to_le_bytes())?;
    }
    for &v in t.data() {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub(crate) fn read_tensor<R: Read>(r: &mut R, what: &str) -> Result<Tensor> {
    let ndim = read_u32(r, what)? as usize;
    if ndim > 8 {
        return Err(Error::Format(format!("implausible rank {ndim} for {what}")));
    }
    let mut shape = Vec::with_capacity(ndim);
    for _ in 0..ndim {
        shape.push(read_u32(r, what)? as usize);
    }
    let len: usize = shape.iter().product();
    let mut data = vec![0.0f64; len];
    for v in &mut data {
        let mut b = [0u8; 8];
        read_exact_or(r, &mut b, what)?;
        *v = f64::from_le_bytes(b);
    }
    Tensor::from_vec(shape, data)
}

/// Check magic and version, returning the kind byte.
pub(crate) fn read_header<R: Read>(r: &mut R) -> Result<u8> {
    let mut magic = [0u8; 4];
    read_exact_or(r, &mut magic, "magic")?;
    if magic != MAGIC {
        return Err(Error::Format(format!("bad magic {magic:?}, expected {MAGIC:?}")));
    }
    let version = read_u32(r, "version")?;
    if version != FORMAT_VERSION {
        return Err(Error::UnsupportedVersion { found: version, supported: FORMAT_VERSION });
    }
    let mut kind = [0u8; 1];
    read_exact_or(r, &mut kind, "kind")?;
    Ok(kind[0])
}

pub(crate) fn write_header<W: Write>(w: &mut W, kind: u8) -> Result<()> {
    w.write_all(&MAGIC)?;
    w.write_all(&FORMAT_VERSION.to_le_bytes())?;
    w.write_all(&[kind])?;
    Ok(())
}

pub(crate) fn write_model_body<W: Write>(w: &mut W, model: &CnnModel) -> Result<()> {
    let cfg = serde_json::to_vec(&model.config)
        .map_err(|e| Error::Format(format!("config serialization failed: {e}")))?;
    w.write_all(&(cfg.len() as u32).to_le_bytes())?;
    w.write_all(&cfg)?;
    for t in model.params() {
        write_tensor(w, t)?;
    }
    Ok(())
}

pub(crate) fn read_model_body<R: Read>(r: &mut R) -> Result<CnnModel> {
    let cfg_len = read_u32(r, "config length")? as usize;
    if cfg_len > 1 << 20 {
        return Err(Error::Format(format!("implausible config length {cfg_len}")));
    }
    let mut cfg_bytes = vec![0u8; cfg_len];
    read_exact_or(r, &mut cfg_bytes, "config")?;
    let config: ModelConfig = serde_json::from_slice(&cfg_bytes)
        .map_err(|e| Error::Format(format!("bad embedded config: {e}")))?;
    config.validate()?;

    // Build a zero model for the shapes, then fill from the stream.
    let mut rng = crate::rng::rng_from_seed(0);
    let mut model = build_model(&config, &mut rng)?;
    let names = model.param_names();
    for (i, slot) in model.params_mut().into_iter().enumerate() {
        let t = read_tensor(r, &names[i])?;
        if t.shape() != slot.shape() {
            return Err(Error::Format(format!(
                "{}: stored shape {:?} does not match config shape {:?}",
                names[i],
                t.shape(),
                slot.shape()
            )));
        }
        *slot = t;
    }
    Ok(model)
}

/// Write a model file.
pub fn save_model(model: &CnnModel, path: &Path) -> Result<()> {
    let mut buf = Vec::new();
    write_header(&mut buf, KIND_MODEL)?;
    write_model_body(&mut buf, model)?;
    std::fs::write(path, buf)?;
    Ok(())
}

/// Read a model file back; fails cleanly on bad magic, unsupported version
/// or truncation, never returning a partial model.
pub fn load_model(path: &Path) -> Result<CnnModel> {
    let bytes = std::fs::read(path)?;
    let mut r = bytes.as_slice();
    let kind = read_header(&mut r)?;
    if kind != KIND_MODEL {
        return Err(Error::Format(format!("expected a model file (kind 0), got kind {kind}")));
    }
    read_model_body(&mut r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;

    #[test]
    fn default_config_parameter_counts() {
        let cfg = ModelConfig::default();
        let mut rng = rng_from_seed(3);
        let model = build_model(&cfg, &mut rng).unwrap();
        // conv1 alone: 5*5*1*8 kernels + 8 biases.
        assert_eq!(model.conv[0].kernels.len() + model.conv[0].bias.len(), 208);
        // Closed-form total over the whole default stack.
        let mut expect = 0;
        let mut cin = 1;
        for &cout in &cfg.filters {
            expect += 25 * cin * cout + cout;
            cin = cout;
        }
        let feat = feature_len(&cfg);
        expect += feat * cfg.fc_width + cfg.fc_width;
        expect += cfg.fc_width * 2 + 2;
        assert_eq!(model.total_param_count(), expect);
        assert_eq!(model.total_param_count(), 82_874);
    }

    #[test]
    fn pool_chain_sizes() {
        assert_eq!(pooled_size((96, 96)), (4, 4));
        // Intermediate checks of the ceil-div chain: 96 -> 32 -> 11 -> 4.
        assert_eq!(96usize.div_ceil(3), 32);
        assert_eq!(32usize.div_ceil(3), 11);
        assert_eq!(11usize.div_ceil(3), 4);
    }

    #[test]
    fn same_seed_same_parameters() {
        let cfg = ModelConfig::default();
        let a = build_model(&cfg, &mut rng_from_seed(9)).unwrap();
        let b = build_model(&cfg, &mut rng_from_seed(9)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn architecture_walk_matches_diagram() {
        let model = build_model(&ModelConfig::default(), &mut rng_from_seed(1)).unwrap();
        use LayerKind::*;
        assert_eq!(
            model.layer_sequence(),
            vec![
                Conv, Conv, AvgPool, Conv, Conv, AvgPool, Conv, Conv, AvgPool, Flatten, DenseRelu,
                DenseSoftmax
            ]
        );
    }

    fn small_config() -> ModelConfig {
        ModelConfig {
            filters: [2, 2, 3, 3, 4, 4],
            fc_width: 8,
            dropout_conv: 0.0,
            dropout_fc: 0.0,
            l2_lambda: 0.0,
            input_size: (12, 12),
        }
    }

    fn random_image(h: usize, w: usize, seed: u64) -> Tensor {
        let mut rng = rng_from_seed(seed);
        Tensor::from_vec(vec![h, w, 1], (0..h * w).map(|_| rng.gen_range(0.0..1.0)).collect())
            .unwrap()
    }

    #[test]
    fn inference_is_bitwise_repeatable() {
        let model = build_model(&small_config(), &mut rng_from_seed(5)).unwrap();
        let img = random_image(12, 12, 7);
        let a = model.forward(&img, Mode::Infer, None).unwrap();
        let b = model.forward(&img, Mode::Infer, None).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn zero_fc_weights_give_even_split() {
        let mut model = build_model(&small_config(), &mut rng_from_seed(5)).unwrap();
        for v in model.fc_hidden.weights.data_mut() {
            *v = 0.0;
        }
        for v in model.fc_output.weights.data_mut() {
            *v = 0.0;
        }
        let p = model.forward(&random_image(12, 12, 8), Mode::Infer, None).unwrap();
        assert_eq!(p, [0.5, 0.5]);
    }

    #[test]
    fn probabilities_are_normalized() {
        let model = build_model(&small_config(), &mut rng_from_seed(6)).unwrap();
        for seed in 0..100 {
            let p = model.forward(&random_image(12, 12, seed), Mode::Infer, None).unwrap();
            assert!(p[0] > 0.0 && p[0] < 1.0 && p[1] > 0.0 && p[1] < 1.0);
            assert!((p[0] + p[1] - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn l2_penalty_counts_fc_weights_only() {
        let mut model = build_model(&small_config(), &mut rng_from_seed(5)).unwrap();
        model.config.l2_lambda = 0.0;
        assert_eq!(model.l2_penalty(), 0.0);

        model.config.l2_lambda = 0.5;
        for p in model.params_mut() {
            for v in p.data_mut() {
                *v = 0.0;
            }
        }
        assert_eq!(model.l2_penalty(), 0.0);
        model.fc_hidden.weights.data_mut()[0] = 2.0;
        assert_eq!(model.l2_penalty(), 2.0);
        // Conv weights must not contribute.
        model.conv[0].kernels.data_mut()[0] = 100.0;
        assert_eq!(model.l2_penalty(), 2.0);
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let model = build_model(&small_config(), &mut rng_from_seed(5)).unwrap();
        let img = random_image(13, 12, 7);
        assert!(matches!(model.forward(&img, Mode::Infer, None), Err(Error::Shape(_))));
    }

    #[test]
    fn save_load_round_trip_is_bit_identical() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.pqs");
        let model = build_model(&small_config(), &mut rng_from_seed(21)).unwrap();
        save_model(&model, &path).unwrap();
        let loaded = load_model(&path).unwrap();
        assert_eq!(model, loaded);
        let img = random_image(12, 12, 3);
        assert_eq!(
            model.forward(&img, Mode::Infer, None).unwrap(),
            loaded.forward(&img, Mode::Infer, None).unwrap()
        );
    }

    #[test]
    fn truncated_file_is_a_format_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.pqs");
        let model = build_model(&small_config(), &mut rng_from_seed(21)).unwrap();
        save_model(&model, &path).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() / 2]).unwrap();
        assert!(matches!(load_model(&path), Err(Error::Format(_))));
    }

    #[test]
    fn future_version_is_rejected_by_name() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.pqs");
        let model = build_model(&small_config(), &mut rng_from_seed(21)).unwrap();
        save_model(&model, &path).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        bytes[4..8].copy_from_slice(&(FORMAT_VERSION + 1).to_le_bytes());
        std::fs::write(&path, bytes).unwrap();
        match load_model(&path) {
            Err(Error::UnsupportedVersion { found, supported }) => {
                assert_eq!(found, FORMAT_VERSION + 1);
                assert_eq!(supported, FORMAT_VERSION);
            }
            other => panic!("expected version error, got {other:?}"),
        }
    }

    #[test]
    fn bad_magic_is_named() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.pqs");
        std::fs::write(&path, b"NOPE....").unwrap();
        match load_model(&path) {
            Err(Error::Format(msg)) => assert!(msg.contains("magic"), "{msg}"),
            other => panic!("expected format error, got {other:?}"),
        }
    }
}
