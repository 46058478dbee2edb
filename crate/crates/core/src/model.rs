//! Convolutional sentence classifier.
//!
//! ```text
//! indices ─► embedding lookup (max_len x dim)
//!         ─► for each width w, filters_per_width filters:
//!              a_t = relu(filter · window[t, t+w) + bias), t = 0..=max_len-w
//!              pooled = max_t a_t
//!         ─► sigmoid(dense · pooled + dense_bias)
//! ```
//!
//! Gradients are computed analytically in [`ModelParams::backward`] and can
//! be checked against central differences with
//! [`ModelParams::numerical_gradient`]. All sums run left to right in a
//! fixed order so results are bit-reproducible.

use alloc::collections::BTreeMap;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng as _;
use thiserror::Error;

use crate::corpus::{preprocess, Label, PreprocessConfig};
use crate::embeddings::EmbeddingMatrix;
use crate::math;
use crate::rng;
use crate::vocab::Vocabulary;

pub const DEFAULT_FILTER_WIDTHS: [usize; 3] = [2, 3, 4];
pub const DEFAULT_FILTERS_PER_WIDTH: usize = 32;
pub const DEFAULT_LEARNING_RATE: f64 = 0.5;

/// Probability clamp used by [`bce_loss`].
pub const LOSS_EPSILON: f64 = 1e-7;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("filter width {width} exceeds max_len {max_len}")]
    WidthExceedsMaxLen { width: usize, max_len: usize },
    #[error("filter widths must be non-empty and at least 1")]
    InvalidWidths,
    #[error("filters_per_width must be at least 1")]
    ZeroFilters,
    #[error("max_len and dim must be at least 1")]
    ZeroShape,
    #[error("learning rate must be finite and non-negative, got {0}")]
    InvalidLearningRate(f64),
    #[error("embedding dimension {found} does not match configured dim {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("input has length {found}, expected {expected}")]
    InputLength { expected: usize, found: usize },
    #[error("token index {index} out of range for {rows} embedding rows")]
    IndexOutOfRange { index: u32, rows: usize },
    #[error("vocabulary has {vocab} tokens but the embedding has {embedding}")]
    VocabularyMismatch { vocab: usize, embedding: usize },
    #[error("batch is empty")]
    EmptyBatch,
    #[error("non-finite {0} during training")]
    NonFinite(&'static str),
    #[error("finite-difference step must be positive, got {0}")]
    InvalidStep(f64),
}

/// Architecture and optimization settings.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub max_len: usize,
    pub dim: usize,
    pub filter_widths: Vec<usize>,
    pub filters_per_width: usize,
    pub learning_rate: f64,
    pub fine_tune_embeddings: bool,
    pub seed: u64,
}

impl ModelConfig {
    pub fn new(max_len: usize, dim: usize) -> Self {
        ModelConfig {
            max_len,
            dim,
            filter_widths: DEFAULT_FILTER_WIDTHS.to_vec(),
            filters_per_width: DEFAULT_FILTERS_PER_WIDTH,
            learning_rate: DEFAULT_LEARNING_RATE,
            fine_tune_embeddings: false,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.max_len == 0 || self.dim == 0 {
            return Err(ModelError::ZeroShape);
        }
        if self.filter_widths.is_empty() || self.filter_widths.contains(&0) {
            return Err(ModelError::InvalidWidths);
        }
        if let Some(&width) = self.filter_widths.iter().find(|&&w| w > self.max_len) {
            return Err(ModelError::WidthExceedsMaxLen {
                width,
                max_len: self.max_len,
            });
        }
        if self.filters_per_width == 0 {
            return Err(ModelError::ZeroFilters);
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(ModelError::InvalidLearningRate(self.learning_rate));
        }
        Ok(())
    }

    /// Length of the pooled feature vector.
    pub fn n_features(&self) -> usize {
        self.filter_widths.len() * self.filters_per_width
    }
}

/// Filters of one width: `weights` is `filters x width x dim` row-major,
/// `bias` has one entry per filter.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvBank {
    pub width: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl ConvBank {
    fn zeros(width: usize, filters: usize, dim: usize) -> Self {
        ConvBank {
            width,
            weights: vec![0.0; filters * width * dim],
            bias: vec![0.0; filters],
        }
    }

    fn filter_len(&self) -> usize {
        self.weights.len() / self.bias.len()
    }

    fn filter(&self, f: usize) -> &[f64] {
        let n = self.filter_len();
        &self.weights[f * n..(f + 1) * n]
    }
}

/// Trainable state. The embedding is shared copy-on-write, so snapshots
/// of a model with frozen embeddings are cheap.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub config: ModelConfig,
    pub embedding: Arc<EmbeddingMatrix>,
    pub conv: Vec<ConvBank>,
    pub dense_weights: Vec<f64>,
    pub dense_bias: f64,
}

/// Gradient of the loss with the same layout as [`ModelParams`].
/// Embedding gradients are stored sparsely by row and are `None` when the
/// embedding is frozen.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub conv: Vec<ConvBank>,
    pub dense_weights: Vec<f64>,
    pub dense_bias: f64,
    pub embedding: Option<BTreeMap<u32, Vec<f64>>>,
    embedding_rows: usize,
    dim: usize,
}

/// Addresses one scalar parameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamSlot {
    ConvWeight { bank: usize, index: usize },
    ConvBias { bank: usize, filter: usize },
    DenseWeight(usize),
    DenseBias,
    Embedding { row: usize, col: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub label: Label,
    pub probability: f64,
}

/// Uniform Glorot bound for a layer.
fn glorot_bound(fan_in: usize, fan_out: usize) -> f64 {
    math::sqrt(6.0 / (fan_in + fan_out) as f64)
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    for (x, y) in a.iter().zip(b) {
        s += x * y;
    }
    s
}

/// Numerically stable logistic function, kept strictly inside (0, 1).
pub fn sigmoid(z: f64) -> f64 {
    let p = if z >= 0.0 {
        1.0 / (1.0 + math::exp(-z))
    } else {
        let e = math::exp(z);
        e / (1.0 + e)
    };
    p.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0)
}

/// Binary cross-entropy with `p` clamped to `[LOSS_EPSILON, 1 - LOSS_EPSILON]`.
pub fn bce_loss(p: f64, y: Label) -> f64 {
    let p = p.clamp(LOSS_EPSILON, 1.0 - LOSS_EPSILON);
    match y {
        Label::Bullying => -math::ln(p),
        Label::NoBullying => -math::ln(1.0 - p),
    }
}

/// Intermediate values of one forward pass.
struct Trace {
    embedded: Vec<f64>,
    /// Per feature: start position of the winning window and its
    /// pre-activation value.
    argmax: Vec<usize>,
    pre: Vec<f64>,
    pooled: Vec<f64>,
    prob: f64,
}

pub fn init_model(config: ModelConfig, embedding: Arc<EmbeddingMatrix>) -> Result<ModelParams, ModelError> {
    ModelParams::init(config, embedding)
}

impl ModelParams {
    /// Glorot-uniform weights and zero biases, from `config.seed`.
    pub fn init(config: ModelConfig, embedding: Arc<EmbeddingMatrix>) -> Result<Self, ModelError> {
        config.validate()?;
        if embedding.dim() != config.dim {
            return Err(ModelError::DimensionMismatch {
                expected: config.dim,
                found: embedding.dim(),
            });
        }
        let mut rng = rng::seeded(config.seed);
        let dim = config.dim;
        let filters = config.filters_per_width;
        let conv = config
            .filter_widths
            .iter()
            .map(|&w| {
                let a = glorot_bound(w * dim, w * filters);
                let mut bank = ConvBank::zeros(w, filters, dim);
                for x in &mut bank.weights {
                    *x = rng.gen_range(-a..a);
                }
                bank
            })
            .collect();
        let n = config.n_features();
        let a = glorot_bound(n, 1);
        let dense_weights = (0..n).map(|_| rng.gen_range(-a..a)).collect();
        Ok(ModelParams {
            config,
            embedding,
            conv,
            dense_weights,
            dense_bias: 0.0,
        })
    }

    fn check_input(&self, x: &[u32]) -> Result<(), ModelError> {
        if x.len() != self.config.max_len {
            return Err(ModelError::InputLength {
                expected: self.config.max_len,
                found: x.len(),
            });
        }
        let rows = self.embedding.rows();
        if let Some(&index) = x.iter().find(|&&i| i as usize >= rows) {
            return Err(ModelError::IndexOutOfRange { index, rows });
        }
        Ok(())
    }

    fn trace(&self, x: &[u32]) -> Result<Trace, ModelError> {
        self.check_input(x)?;
        let dim = self.config.dim;
        let max_len = self.config.max_len;
        let mut embedded = vec![0.0; max_len * dim];
        for (t, &idx) in x.iter().enumerate() {
            embedded[t * dim..(t + 1) * dim].copy_from_slice(self.embedding.row(idx as usize));
        }
        // Windows starting at or after the last real token only see zero
        // rows, so they all evaluate to exactly the bias.
        let content_len = x.iter().rposition(|&i| i != 0).map_or(0, |p| p + 1);

        let n = self.config.n_features();
        let mut argmax = Vec::with_capacity(n);
        let mut pre = Vec::with_capacity(n);
        let mut pooled = Vec::with_capacity(n);
        for bank in &self.conv {
            let w = bank.width;
            let positions = max_len - w + 1;
            for (f, &b) in bank.bias.iter().enumerate() {
                let filter = bank.filter(f);
                let mut best_t = 0;
                let mut best = f64::NEG_INFINITY;
                for t in 0..positions {
                    let z = if t < content_len {
                        dot(&embedded[t * dim..(t + w) * dim], filter) + b
                    } else {
                        b
                    };
                    if z > best {
                        best = z;
                        best_t = t;
                    }
                    if t >= content_len {
                        break;
                    }
                }
                argmax.push(best_t);
                pre.push(best);
                pooled.push(if best > 0.0 { best } else { 0.0 });
            }
        }
        let logit = dot(&self.dense_weights, &pooled) + self.dense_bias;
        Ok(Trace {
            embedded,
            argmax,
            pre,
            pooled,
            prob: sigmoid(logit),
        })
    }

    /// Probability that `x` is bullying.
    pub fn forward(&self, x: &[u32]) -> Result<f64, ModelError> {
        Ok(self.trace(x)?.prob)
    }

    pub fn loss(&self, x: &[u32], y: Label) -> Result<f64, ModelError> {
        Ok(bce_loss(self.forward(x)?, y))
    }

    /// Loss and its analytic gradient. Max-pooling routes the gradient to
    /// the first maximal window; relu has zero slope at 0.
    pub fn backward(&self, x: &[u32], y: Label) -> Result<(f64, Gradients), ModelError> {
        let tr = self.trace(x)?;
        let loss = bce_loss(tr.prob, y);
        let dim = self.config.dim;
        let mut g = Gradients::zeros(self);

        let dlogit = tr.prob - y.as_f64();
        for (gw, p) in g.dense_weights.iter_mut().zip(&tr.pooled) {
            *gw = dlogit * p;
        }
        g.dense_bias = dlogit;

        let mut feature = 0;
        for (bank, gbank) in self.conv.iter().zip(g.conv.iter_mut()) {
            let w = bank.width;
            let flen = w * dim;
            for f in 0..bank.bias.len() {
                let j = feature;
                feature += 1;
                if tr.pre[j] <= 0.0 {
                    continue;
                }
                let dz = dlogit * self.dense_weights[j];
                let t = tr.argmax[j];
                gbank.bias[f] = dz;
                let window = &tr.embedded[t * dim..(t + w) * dim];
                for (gw, e) in gbank.weights[f * flen..(f + 1) * flen].iter_mut().zip(window) {
                    *gw = dz * e;
                }
                if let Some(rows) = g.embedding.as_mut() {
                    let filter = bank.filter(f);
                    for k in 0..w {
                        let idx = x[t + k];
                        if idx == 0 {
                            continue;
                        }
                        let row = rows.entry(idx).or_insert_with(|| vec![0.0; dim]);
                        for (r, fw) in row.iter_mut().zip(&filter[k * dim..(k + 1) * dim]) {
                            *r += dz * fw;
                        }
                    }
                }
            }
        }
        Ok((loss, g))
    }

    /// Every trainable scalar in canonical order: conv weights and biases
    /// bank by bank, dense weights, dense bias, then (when fine-tuning)
    /// embedding rows 1.. in row-major order.
    pub fn slots(&self) -> Vec<ParamSlot> {
        let mut out = Vec::new();
        for (bank, b) in self.conv.iter().enumerate() {
            out.extend((0..b.weights.len()).map(|index| ParamSlot::ConvWeight { bank, index }));
            out.extend((0..b.bias.len()).map(|filter| ParamSlot::ConvBias { bank, filter }));
        }
        out.extend((0..self.dense_weights.len()).map(ParamSlot::DenseWeight));
        out.push(ParamSlot::DenseBias);
        if self.config.fine_tune_embeddings {
            for row in 1..self.embedding.rows() {
                out.extend((0..self.config.dim).map(|col| ParamSlot::Embedding { row, col }));
            }
        }
        out
    }

    pub fn get(&self, slot: ParamSlot) -> f64 {
        match slot {
            ParamSlot::ConvWeight { bank, index } => self.conv[bank].weights[index],
            ParamSlot::ConvBias { bank, filter } => self.conv[bank].bias[filter],
            ParamSlot::DenseWeight(j) => self.dense_weights[j],
            ParamSlot::DenseBias => self.dense_bias,
            ParamSlot::Embedding { row, col } => self.embedding.row(row)[col],
        }
    }

    pub fn get_mut(&mut self, slot: ParamSlot) -> &mut f64 {
        match slot {
            ParamSlot::ConvWeight { bank, index } => &mut self.conv[bank].weights[index],
            ParamSlot::ConvBias { bank, filter } => &mut self.conv[bank].bias[filter],
            ParamSlot::DenseWeight(j) => &mut self.dense_weights[j],
            ParamSlot::DenseBias => &mut self.dense_bias,
            ParamSlot::Embedding { row, col } => &mut Arc::make_mut(&mut self.embedding).row_mut(row)[col],
        }
    }

    /// Central differences `(L(θ+h) - L(θ-h)) / 2h` for every slot.
    pub fn numerical_gradient(&self, x: &[u32], y: Label, step: f64) -> Result<Gradients, ModelError> {
        if !(step > 0.0 && step.is_finite()) {
            return Err(ModelError::InvalidStep(step));
        }
        self.check_input(x)?;
        let mut probe = self.clone();
        let mut g = Gradients::zeros(self);
        for slot in self.slots() {
            let orig = probe.get(slot);
            *probe.get_mut(slot) = orig + step;
            let plus = probe.loss(x, y)?;
            *probe.get_mut(slot) = orig - step;
            let minus = probe.loss(x, y)?;
            *probe.get_mut(slot) = orig;
            let d = (plus - minus) / (2.0 * step);
            match slot {
                ParamSlot::Embedding { row, col } => {
                    if d != 0.0 {
                        let rows = g.embedding.get_or_insert_with(BTreeMap::new);
                        rows.entry(row as u32).or_insert_with(|| vec![0.0; self.config.dim])[col] = d;
                    }
                }
                other => *g.get_mut(other) = d,
            }
        }
        Ok(g)
    }

    /// One plain gradient-descent step on the batch-mean loss. Returns the
    /// mean loss before the update.
    ///
    /// Examples are accumulated in a canonical order (by label, then by
    /// index vector), so any permutation of the same batch produces a
    /// bit-identical update.
    pub fn train_step(&mut self, batch: &[(&[u32], Label)]) -> Result<f64, ModelError> {
        if batch.is_empty() {
            return Err(ModelError::EmptyBatch);
        }
        let mut order: Vec<usize> = (0..batch.len()).collect();
        order.sort_by(|&a, &b| batch[a].1.cmp(&batch[b].1).then_with(|| batch[a].0.cmp(batch[b].0)));

        let mut total = Gradients::zeros(self);
        let mut loss_sum = 0.0;
        for i in order {
            let (x, y) = batch[i];
            let (loss, g) = self.backward(x, y)?;
            loss_sum += loss;
            total.accumulate(&g);
        }
        let n = batch.len() as f64;
        total.divide(n);
        let mean_loss = loss_sum / n;
        if !mean_loss.is_finite() {
            return Err(ModelError::NonFinite("loss"));
        }
        if !total.is_finite() {
            return Err(ModelError::NonFinite("gradient"));
        }
        self.apply(&total, self.config.learning_rate);
        if !self.is_finite() {
            return Err(ModelError::NonFinite("parameter"));
        }
        Ok(mean_loss)
    }

    fn apply(&mut self, g: &Gradients, lr: f64) {
        if lr == 0.0 {
            return;
        }
        for (bank, gbank) in self.conv.iter_mut().zip(&g.conv) {
            for (w, d) in bank.weights.iter_mut().zip(&gbank.weights) {
                *w -= lr * d;
            }
            for (b, d) in bank.bias.iter_mut().zip(&gbank.bias) {
                *b -= lr * d;
            }
        }
        for (w, d) in self.dense_weights.iter_mut().zip(&g.dense_weights) {
            *w -= lr * d;
        }
        self.dense_bias -= lr * g.dense_bias;
        if let Some(rows) = &g.embedding {
            if self.config.fine_tune_embeddings && !rows.is_empty() {
                let emb = Arc::make_mut(&mut self.embedding);
                for (&row, d) in rows {
                    if row == 0 {
                        continue;
                    }
                    for (e, dv) in emb.row_mut(row as usize).iter_mut().zip(d) {
                        *e -= lr * dv;
                    }
                }
            }
        }
    }

    pub fn is_finite(&self) -> bool {
        self.conv
            .iter()
            .all(|b| b.weights.iter().chain(&b.bias).all(|x| x.is_finite()))
            && self.dense_weights.iter().all(|x| x.is_finite())
            && self.dense_bias.is_finite()
            && self.embedding.as_slice().iter().all(|x| x.is_finite())
    }

    /// Classifies an already-encoded input. Probability 0.5 counts as
    /// bullying.
    pub fn classify(&self, x: &[u32]) -> Result<Prediction, ModelError> {
        let probability = self.forward(x)?;
        Ok(Prediction {
            label: threshold(probability),
            probability,
        })
    }

    /// Preprocesses, encodes and classifies a raw text.
    pub fn predict(&self, text: &str, config: &PreprocessConfig, vocab: &Vocabulary) -> Result<Prediction, ModelError> {
        if vocab.len() != self.embedding.vocab_len() {
            return Err(ModelError::VocabularyMismatch {
                vocab: vocab.len(),
                embedding: self.embedding.vocab_len(),
            });
        }
        let tokens = preprocess(text, config);
        self.classify(&vocab.encode(&tokens, self.config.max_len))
    }
}

/// Decision rule: `p >= 0.5` is bullying.
pub fn threshold(p: f64) -> Label {
    if p >= 0.5 {
        Label::Bullying
    } else {
        Label::NoBullying
    }
}

impl Gradients {
    pub fn zeros(params: &ModelParams) -> Self {
        let dim = params.config.dim;
        Gradients {
            conv: params
                .conv
                .iter()
                .map(|b| ConvBank::zeros(b.width, b.bias.len(), dim))
                .collect(),
            dense_weights: vec![0.0; params.dense_weights.len()],
            dense_bias: 0.0,
            embedding: params.config.fine_tune_embeddings.then(BTreeMap::new),
            embedding_rows: params.embedding.rows(),
            dim,
        }
    }

    pub fn get(&self, slot: ParamSlot) -> f64 {
        match slot {
            ParamSlot::ConvWeight { bank, index } => self.conv[bank].weights[index],
            ParamSlot::ConvBias { bank, filter } => self.conv[bank].bias[filter],
            ParamSlot::DenseWeight(j) => self.dense_weights[j],
            ParamSlot::DenseBias => self.dense_bias,
            ParamSlot::Embedding { row, col } => self
                .embedding
                .as_ref()
                .and_then(|rows| rows.get(&(row as u32)))
                .map_or(0.0, |r| r[col]),
        }
    }

    fn get_mut(&mut self, slot: ParamSlot) -> &mut f64 {
        match slot {
            ParamSlot::ConvWeight { bank, index } => &mut self.conv[bank].weights[index],
            ParamSlot::ConvBias { bank, filter } => &mut self.conv[bank].bias[filter],
            ParamSlot::DenseWeight(j) => &mut self.dense_weights[j],
            ParamSlot::DenseBias => &mut self.dense_bias,
            ParamSlot::Embedding { row, col } => {
                let dim = self.dim;
                &mut self
                    .embedding
                    .get_or_insert_with(BTreeMap::new)
                    .entry(row as u32)
                    .or_insert_with(|| vec![0.0; dim])[col]
            }
        }
    }

    /// Dense copy in [`ModelParams::slots`] order; embedding rows are
    /// included only when an embedding gradient is present.
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for b in &self.conv {
            out.extend_from_slice(&b.weights);
            out.extend_from_slice(&b.bias);
        }
        out.extend_from_slice(&self.dense_weights);
        out.push(self.dense_bias);
        if let Some(rows) = &self.embedding {
            for row in 1..self.embedding_rows {
                match rows.get(&(row as u32)) {
                    Some(r) => out.extend_from_slice(r),
                    None => out.extend(core::iter::repeat_n(0.0, self.dim)),
                }
            }
        }
        out
    }

    fn accumulate(&mut self, other: &Gradients) {
        for (a, b) in self.conv.iter_mut().zip(&other.conv) {
            for (x, y) in a.weights.iter_mut().zip(&b.weights) {
                *x += y;
            }
            for (x, y) in a.bias.iter_mut().zip(&b.bias) {
                *x += y;
            }
        }
        for (x, y) in self.dense_weights.iter_mut().zip(&other.dense_weights) {
            *x += y;
        }
        self.dense_bias += other.dense_bias;
        if let (Some(mine), Some(theirs)) = (self.embedding.as_mut(), other.embedding.as_ref()) {
            for (&row, v) in theirs {
                let dst = mine.entry(row).or_insert_with(|| vec![0.0; v.len()]);
                for (x, y) in dst.iter_mut().zip(v) {
                    *x += y;
                }
            }
        }
    }

    fn divide(&mut self, n: f64) {
        let all = self
            .conv
            .iter_mut()
            .flat_map(|b| b.weights.iter_mut().chain(b.bias.iter_mut()))
            .chain(self.dense_weights.iter_mut())
            .chain(core::iter::once(&mut self.dense_bias));
        for x in all {
            *x /= n;
        }
        if let Some(rows) = self.embedding.as_mut() {
            for x in rows.values_mut().flatten() {
                *x /= n;
            }
        }
    }

    pub fn is_finite(&self) -> bool {
        self.flatten().iter().all(|x| x.is_finite())
    }
}
