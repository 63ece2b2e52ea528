//! The attention-based BLSTM classifier: embedding → BLSTM → attention → sigmoid unit.
//!
//! Without attention the context vector is the mean of the valid BLSTM columns,
//! which is attention with uniform weights over the valid positions.

mod attention;
mod checkpoint;
mod optim;
mod train;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use attention::{
    attention_backward, attention_forward, bce_loss, AttentionParams, ClassifierParams,
};
pub use checkpoint::{Checkpoint, CheckpointError, CHECKPOINT_FORMAT, CHECKPOINT_VERSION};
pub use optim::{adamax_update, AdamaxConfig, AdamaxState, Moments};
pub use train::{train, train_with, EpochRecord, ModelOptimizer, TrainReport};

use crate::numkit::{derive_seed, dot, sigmoid_scalar, Matrix, NumError, Rng};
use crate::recurrent::{blstm_backward, blstm_forward_columns, BlstmOutput, LstmParams, RecurrentError};
use crate::textprep::{TokenSeq, DEFAULT_MAX_LEN};
use crate::vocab::{init_embeddings, EmbeddingMode, EmbeddingTable, PretrainedVectors, VocabError, Vocabulary, PAD_INDEX};

pub const DEFAULT_EMBED_DIM: usize = 200;
pub const DEFAULT_HIDDEN: usize = 64;
pub const DEFAULT_EPOCHS: usize = 5;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error(transparent)]
    Num(#[from] NumError),
    #[error(transparent)]
    Recurrent(#[from] RecurrentError),
    #[error(transparent)]
    Vocab(#[from] VocabError),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("token id {id} outside vocabulary of size {size}")]
    TokenId { id: usize, size: usize },
    #[error("training set must contain both classes")]
    SingleClass,
    #[error("training set is empty")]
    EmptyTrainingSet,
    #[error("label {0} is not binary")]
    Label(u8),
}

/// Embedding initialization regime.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    /// Random, trained.
    M1,
    /// Pretrained, frozen.
    M2,
    /// Pretrained, fine-tuned.
    M3,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::M1, Variant::M2, Variant::M3];

    pub fn embedding_mode(self) -> EmbeddingMode {
        match self {
            Variant::M1 => EmbeddingMode::RandomTrainable,
            Variant::M2 => EmbeddingMode::PretrainedFrozen,
            Variant::M3 => EmbeddingMode::PretrainedTrainable,
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::M1 => "M1",
            Variant::M2 => "M2",
            Variant::M3 => "M3",
        })
    }
}

impl FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "m1" => Ok(Variant::M1),
            "m2" => Ok(Variant::M2),
            "m3" => Ok(Variant::M3),
            _ => Err(format!("unknown variant {s:?} (expected m1, m2 or m3)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub embed_dim: usize,
    pub hidden: usize,
    pub max_len: usize,
    pub variant: Variant,
    pub use_attention: bool,
    pub epochs: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub batch_size: usize,
    /// Global L2 gradient-norm clip; off when `None`.
    pub clip_norm: Option<f64>,
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        let opt = AdamaxConfig::default();
        Self {
            embed_dim: DEFAULT_EMBED_DIM,
            hidden: DEFAULT_HIDDEN,
            max_len: DEFAULT_MAX_LEN,
            variant: Variant::M1,
            use_attention: true,
            epochs: DEFAULT_EPOCHS,
            learning_rate: opt.learning_rate,
            beta1: opt.beta1,
            beta2: opt.beta2,
            batch_size: 1,
            clip_norm: None,
            seed: 42,
        }
    }
}

impl ModelConfig {
    /// Display name, e.g. `Att-BLSTM-M2` or `BLSTM-M1`.
    pub fn name(&self) -> String {
        let prefix = if self.use_attention { "Att-BLSTM" } else { "BLSTM" };
        format!("{prefix}-{}", self.variant)
    }

    pub fn optimizer(&self) -> AdamaxConfig {
        AdamaxConfig {
            learning_rate: self.learning_rate,
            beta1: self.beta1,
            beta2: self.beta2,
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let positive = [
            ("embed_dim", self.embed_dim),
            ("hidden", self.hidden),
            ("max_len", self.max_len),
            ("batch_size", self.batch_size),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(ModelError::Config(format!("{name} must be positive")));
            }
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(ModelError::Config("learning_rate must be positive".into()));
        }
        for (name, b) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(0.0..1.0).contains(&b) {
                return Err(ModelError::Config(format!("{name} must lie in [0, 1)")));
            }
        }
        if let Some(c) = self.clip_norm {
            if !(c > 0.0) {
                return Err(ModelError::Config("clip_norm must be positive".into()));
            }
        }
        Ok(())
    }
}

/// A post encoded as vocabulary ids with its mask and label.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Example {
    pub ids: Vec<usize>,
    pub mask: Vec<bool>,
    pub label: u8,
}

impl Example {
    pub fn new(seq: &TokenSeq, vocab: &Vocabulary, label: u8) -> Self {
        Self {
            ids: vocab.encode(seq),
            mask: seq.mask.clone(),
            label,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttBlstmModel {
    pub config: ModelConfig,
    pub embedding: EmbeddingTable,
    pub fwd: LstmParams,
    pub bwd: LstmParams,
    pub attention: Option<AttentionParams>,
    pub head: ClassifierParams,
}

/// Everything the backward pass needs from a forward call.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    ids: Vec<usize>,
    mask: Vec<bool>,
    blstm: BlstmOutput,
    alpha: Vec<f64>,
    context: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct Forward {
    pub probability: f64,
    /// Attention weights; `None` for models without attention.
    pub attention: Option<Vec<f64>>,
    pub cache: ForwardCache,
}

/// Gradients with the same layout as the model; embedding gradients are per column.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelGrads {
    pub fwd: LstmParams,
    pub bwd: LstmParams,
    pub attention: Option<AttentionParams>,
    pub head: ClassifierParams,
    pub embedding: BTreeMap<usize, Vec<f64>>,
}

impl ModelGrads {
    pub fn zeros_like(model: &AttBlstmModel) -> Self {
        let (d, l) = (model.config.embed_dim, model.config.hidden);
        Self {
            fwd: LstmParams::zeros(d, l),
            bwd: LstmParams::zeros(d, l),
            attention: model
                .attention
                .as_ref()
                .map(|a| AttentionParams::zeros(a.w.len(), a.b.len())),
            head: ClassifierParams::zeros(2 * l),
            embedding: BTreeMap::new(),
        }
    }

    pub fn tensors(&self) -> Vec<&[f64]> {
        let mut out = self.fwd.tensors();
        out.extend(self.bwd.tensors());
        if let Some(a) = &self.attention {
            out.push(&a.w);
            out.push(&a.b);
        }
        out.push(&self.head.w);
        out.push(std::slice::from_ref(&self.head.b));
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = self.fwd.tensors_mut();
        out.extend(self.bwd.tensors_mut());
        if let Some(a) = &mut self.attention {
            out.push(&mut a.w);
            out.push(&mut a.b);
        }
        out.push(&mut self.head.w);
        out.push(std::slice::from_mut(&mut self.head.b));
        out
    }

    pub fn add_assign(&mut self, other: &ModelGrads) {
        for (a, b) in self.tensors_mut().into_iter().zip(other.tensors()) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
        for (id, col) in &other.embedding {
            let entry = self
                .embedding
                .entry(*id)
                .or_insert_with(|| vec![0.0; col.len()]);
            for (x, y) in entry.iter_mut().zip(col) {
                *x += y;
            }
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for t in self.tensors_mut() {
            t.iter_mut().for_each(|v| *v *= factor);
        }
        for col in self.embedding.values_mut() {
            col.iter_mut().for_each(|v| *v *= factor);
        }
    }

    pub fn l2_norm(&self) -> f64 {
        let dense: f64 = self
            .tensors()
            .iter()
            .flat_map(|t| t.iter())
            .map(|v| v * v)
            .sum();
        let sparse: f64 = self
            .embedding
            .values()
            .flat_map(|c| c.iter())
            .map(|v| v * v)
            .sum();
        (dense + sparse).sqrt()
    }
}

impl AttBlstmModel {
    /// Initializes all parameters from `config.seed`.
    pub fn new(
        config: ModelConfig,
        vocab: &Vocabulary,
        pretrained: Option<&PretrainedVectors>,
    ) -> Result<Self, ModelError> {
        config.validate()?;
        let mut rng = Rng::new(derive_seed(config.seed, "init"));
        let embedding = init_embeddings(
            vocab,
            config.variant.embedding_mode(),
            config.embed_dim,
            pretrained,
            &mut rng,
        )?;
        let (d, l) = (config.embed_dim, config.hidden);
        let fwd = LstmParams::init(d, l, &mut rng);
        let bwd = LstmParams::init(d, l, &mut rng);
        let attention = config
            .use_attention
            .then(|| AttentionParams::init(2 * l, config.max_len, &mut rng));
        let head = ClassifierParams::init(2 * l, &mut rng);
        Ok(Self {
            config,
            embedding,
            fwd,
            bwd,
            attention,
            head,
        })
    }

    /// Model with every parameter zero (embedding included).
    pub fn zeros(config: ModelConfig, vocab_size: usize) -> Self {
        let (d, l) = (config.embed_dim, config.hidden);
        Self {
            embedding: EmbeddingTable {
                matrix: Matrix::zeros(d, vocab_size),
                mode: config.variant.embedding_mode(),
            },
            fwd: LstmParams::zeros(d, l),
            bwd: LstmParams::zeros(d, l),
            attention: config
                .use_attention
                .then(|| AttentionParams::zeros(2 * l, config.max_len)),
            head: ClassifierParams::zeros(2 * l),
            config,
        }
    }

    pub fn name(&self) -> String {
        self.config.name()
    }

    pub fn vocab_size(&self) -> usize {
        self.embedding.vocab_size()
    }

    /// Checks that all parts agree on d, l and T.
    pub fn validate(&self) -> Result<(), ModelError> {
        self.config.validate()?;
        let (d, l) = (self.config.embed_dim, self.config.hidden);
        let bad = |what: &str| Err(ModelError::Config(format!("inconsistent {what}")));
        if self.embedding.dim() != d {
            return bad("embedding dimension");
        }
        if self.embedding.mode != self.config.variant.embedding_mode() {
            return bad("embedding mode");
        }
        for p in [&self.fwd, &self.bwd] {
            p.validate()?;
            if p.input_size() != d || p.hidden_size() != l {
                return bad("LSTM dimensions");
            }
        }
        match (&self.attention, self.config.use_attention) {
            (Some(a), true) if a.w.len() == 2 * l && a.b.len() == self.config.max_len => {}
            (None, false) => {}
            _ => return bad("attention parameters"),
        }
        if self.head.w.len() != 2 * l {
            return bad("classifier width");
        }
        Ok(())
    }

    /// Dense parameter tensors in a fixed order (embedding excluded).
    pub fn tensors(&self) -> Vec<&[f64]> {
        let mut out = self.fwd.tensors();
        out.extend(self.bwd.tensors());
        if let Some(a) = &self.attention {
            out.push(&a.w);
            out.push(&a.b);
        }
        out.push(&self.head.w);
        out.push(std::slice::from_ref(&self.head.b));
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = self.fwd.tensors_mut();
        out.extend(self.bwd.tensors_mut());
        if let Some(a) = &mut self.attention {
            out.push(&mut a.w);
            out.push(&mut a.b);
        }
        out.push(&mut self.head.w);
        out.push(std::slice::from_mut(&mut self.head.b));
        out
    }

    pub fn tensor_names(&self) -> Vec<String> {
        let mut out = LstmParams::tensor_names("fwd");
        out.extend(LstmParams::tensor_names("bwd"));
        if self.attention.is_some() {
            out.push("attention.w".into());
            out.push("attention.b".into());
        }
        out.push("head.w".into());
        out.push("head.b".into());
        out
    }

    fn check_ids(&self, ids: &[usize]) -> Result<(), ModelError> {
        let size = self.vocab_size();
        match ids.iter().find(|&&id| id >= size) {
            Some(&id) => Err(ModelError::TokenId { id, size }),
            None => Ok(()),
        }
    }

    pub fn forward(&self, ids: &[usize], mask: &[bool]) -> Result<Forward, ModelError> {
        if ids.len() != mask.len() {
            return Err(NumError::Shape {
                left: (ids.len(), 1),
                right: (mask.len(), 1),
            }
            .into());
        }
        self.check_ids(ids)?;
        let d = self.config.embed_dim;
        let columns: Vec<Vec<f64>> = ids
            .iter()
            .zip(mask)
            .map(|(&id, &m)| {
                if m {
                    self.embedding.column(id)
                } else {
                    vec![0.0; d]
                }
            })
            .collect();
        let blstm = blstm_forward_columns(&self.fwd, &self.bwd, &columns, mask, d)?;
        let (alpha, context) = match &self.attention {
            Some(att) => attention_forward(att, &blstm.h, mask)?,
            None => {
                let valid = mask.iter().filter(|m| **m).count();
                if valid == 0 {
                    return Err(NumError::EmptySequence.into());
                }
                let weight = 1.0 / valid as f64;
                let alpha: Vec<f64> = mask.iter().map(|&m| if m { weight } else { 0.0 }).collect();
                let mut context = vec![0.0; blstm.h.rows()];
                for (t, a) in alpha.iter().enumerate() {
                    if *a != 0.0 {
                        for (k, r) in context.iter_mut().enumerate() {
                            *r += a * blstm.h.get(k, t);
                        }
                    }
                }
                (alpha, context)
            }
        };
        let logit = dot(&self.head.w, &context) + self.head.b;
        let probability = sigmoid_scalar(logit);
        Ok(Forward {
            probability,
            attention: self.attention.as_ref().map(|_| alpha.clone()),
            cache: ForwardCache {
                ids: ids.to_vec(),
                mask: mask.to_vec(),
                blstm,
                alpha,
                context,
            },
        })
    }

    pub fn forward_seq(&self, seq: &TokenSeq, vocab: &Vocabulary) -> Result<Forward, ModelError> {
        let ids = vocab.encode(seq);
        self.forward(&ids, &seq.mask)
    }

    pub fn probability(&self, ids: &[usize], mask: &[bool]) -> Result<f64, ModelError> {
        Ok(self.forward(ids, mask)?.probability)
    }

    /// Gradients of the cross-entropy loss for `label` through the cached forward pass.
    pub fn backward(&self, fwd: &Forward, label: u8) -> Result<ModelGrads, ModelError> {
        if label > 1 {
            return Err(ModelError::Label(label));
        }
        let cache = &fwd.cache;
        let d_logit = fwd.probability - f64::from(label);
        let mut grads = ModelGrads::zeros_like(self);
        grads.head.b = d_logit;
        for (g, r) in grads.head.w.iter_mut().zip(&cache.context) {
            *g = d_logit * r;
        }
        let d_context: Vec<f64> = self.head.w.iter().map(|w| d_logit * w).collect();
        let h = &cache.blstm.h;
        let dh = match &self.attention {
            Some(att) => {
                let (dw, db, dh) = attention_backward(att, h, &cache.alpha, &d_context);
                grads.attention = Some(AttentionParams { w: dw, b: db });
                dh
            }
            None => {
                let mut dh = Matrix::zeros(h.rows(), h.cols());
                for (t, a) in cache.alpha.iter().enumerate() {
                    if *a != 0.0 {
                        for (k, g) in d_context.iter().enumerate() {
                            dh.set(k, t, a * g);
                        }
                    }
                }
                dh
            }
        };
        let (lstm_grads, dx) = blstm_backward(&self.fwd, &self.bwd, &cache.blstm.cache, &dh)?;
        grads.fwd = lstm_grads.fwd;
        grads.bwd = lstm_grads.bwd;
        if self.embedding.trainable() {
            let d = self.config.embed_dim;
            for (t, (&id, &m)) in cache.ids.iter().zip(&cache.mask).enumerate() {
                if !m || id == PAD_INDEX {
                    continue;
                }
                let col = grads.embedding.entry(id).or_insert_with(|| vec![0.0; d]);
                for (k, g) in col.iter_mut().enumerate() {
                    *g += dx.get(k, t);
                }
            }
        }
        Ok(grads)
    }

    /// Loss and gradients for one example.
    pub fn loss_and_grads(&self, example: &Example) -> Result<(f64, ModelGrads), ModelError> {
        let fwd = self.forward(&example.ids, &example.mask)?;
        let loss = bce_loss(fwd.probability, example.label);
        let grads = self.backward(&fwd, example.label)?;
        Ok((loss, grads))
    }

    pub fn loss(&self, example: &Example) -> Result<f64, ModelError> {
        Ok(bce_loss(
            self.probability(&example.ids, &example.mask)?,
            example.label,
        ))
    }

    /// Mean loss over `examples`; `None` when empty.
    pub fn mean_loss(&self, examples: &[Example]) -> Result<Option<f64>, ModelError> {
        if examples.is_empty() {
            return Ok(None);
        }
        let mut total = 0.0;
        for e in examples {
            total += self.loss(e)?;
        }
        Ok(Some(total / examples.len() as f64))
    }

    /// Label 1 iff p ≥ threshold.
    pub fn predict(&self, ids: &[usize], mask: &[bool], threshold: f64) -> Result<u8, ModelError> {
        Ok(u8::from(self.probability(ids, mask)? >= threshold))
    }

    pub fn predict_seq(
        &self,
        seq: &TokenSeq,
        vocab: &Vocabulary,
        threshold: f64,
    ) -> Result<u8, ModelError> {
        Ok(u8::from(self.forward_seq(seq, vocab)?.probability >= threshold))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::textprep::fit_length;
    use crate::vocab::build_vocab;

    fn tiny_config(use_attention: bool) -> ModelConfig {
        ModelConfig {
            embed_dim: 5,
            hidden: 3,
            max_len: 6,
            use_attention,
            ..ModelConfig::default()
        }
    }

    fn vocab_and_seq() -> (Vocabulary, TokenSeq) {
        let toks: Vec<String> = "opiate dose black milk".split(' ').map(str::to_owned).collect();
        let seq = fit_length(&toks, 6).unwrap();
        (build_vocab(std::slice::from_ref(&seq), 1).unwrap(), seq)
    }

    #[test]
    fn names_and_defaults() {
        let c = ModelConfig::default();
        assert_eq!((c.epochs, c.embed_dim, c.max_len), (5, 200, 100));
        assert_eq!(c.name(), "Att-BLSTM-M1");
        let b = ModelConfig {
            use_attention: false,
            variant: Variant::M3,
            ..c
        };
        assert_eq!(b.name(), "BLSTM-M3");
        assert_eq!("M2".parse::<Variant>().unwrap(), Variant::M2);
        assert!("m4".parse::<Variant>().is_err());
    }

    #[test]
    fn zero_model_gives_half() {
        let (vocab, seq) = vocab_and_seq();
        for att in [true, false] {
            let m = AttBlstmModel::zeros(tiny_config(att), vocab.len());
            let f = m.forward_seq(&seq, &vocab).unwrap();
            assert_eq!(f.probability, 0.5);
            assert_eq!(m.predict_seq(&seq, &vocab, 0.5).unwrap(), 1);
        }
    }

    #[test]
    fn attention_weights_invariants() {
        let (vocab, seq) = vocab_and_seq();
        let m = AttBlstmModel::new(tiny_config(true), &vocab, None).unwrap();
        let f = m.forward_seq(&seq, &vocab).unwrap();
        let alpha = f.attention.unwrap();
        assert!((alpha.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert_eq!(&alpha[4..], &[0.0, 0.0]);
        assert!(f.probability > 0.0 && f.probability < 1.0);
        let blstm = AttBlstmModel::new(tiny_config(false), &vocab, None).unwrap();
        assert!(blstm.forward_seq(&seq, &vocab).unwrap().attention.is_none());
    }

    #[test]
    fn extra_padding_does_not_change_probability() {
        let (vocab, seq) = vocab_and_seq();
        for att in [true, false] {
            let m = AttBlstmModel::new(tiny_config(att), &vocab, None).unwrap();
            let ids = vocab.encode(&seq);
            let p = m.probability(&ids, &seq.mask).unwrap();
            let mut ids2 = ids.clone();
            let mut mask2 = seq.mask.clone();
            ids2.extend([PAD_INDEX; 7]);
            mask2.extend([false; 7]);
            assert_eq!(m.probability(&ids2, &mask2).unwrap().to_bits(), p.to_bits());
        }
    }

    #[test]
    fn threshold_monotone_and_inclusive() {
        let (vocab, seq) = vocab_and_seq();
        let m = AttBlstmModel::new(tiny_config(true), &vocab, None).unwrap();
        let ids = vocab.encode(&seq);
        let p = m.probability(&ids, &seq.mask).unwrap();
        assert_eq!(m.predict(&ids, &seq.mask, p).unwrap(), 1);
        let mut last = 1;
        for k in 0..=20 {
            let label = m.predict(&ids, &seq.mask, k as f64 / 20.0).unwrap();
            assert!(label <= last);
            last = label;
        }
    }

    #[test]
    fn bad_ids_and_labels_rejected() {
        let (vocab, seq) = vocab_and_seq();
        let m = AttBlstmModel::new(tiny_config(true), &vocab, None).unwrap();
        let mut ids = vocab.encode(&seq);
        ids[0] = 999;
        assert!(matches!(m.forward(&ids, &seq.mask), Err(ModelError::TokenId { .. })));
        let f = m.forward_seq(&seq, &vocab).unwrap();
        assert!(matches!(m.backward(&f, 2), Err(ModelError::Label(2))));
        assert!(m.forward(&vocab.encode(&seq), &[false; 6]).is_err());
    }

    #[test]
    fn frozen_embedding_gets_no_gradient() {
        let (vocab, seq) = vocab_and_seq();
        let pre = crate::vocab::parse_embedding_file("opiate 0.1 0.2 0.3 0.4 0.5\n".as_bytes(), 5).unwrap();
        let cfg = ModelConfig {
            variant: Variant::M2,
            ..tiny_config(true)
        };
        let m = AttBlstmModel::new(cfg, &vocab, Some(&pre)).unwrap();
        let ex = Example::new(&seq, &vocab, 1);
        let (_, g) = m.loss_and_grads(&ex).unwrap();
        assert!(g.embedding.is_empty());
        let cfg3 = ModelConfig {
            variant: Variant::M3,
            ..tiny_config(true)
        };
        let m3 = AttBlstmModel::new(cfg3, &vocab, Some(&pre)).unwrap();
        let (_, g3) = m3.loss_and_grads(&ex).unwrap();
        assert_eq!(g3.embedding.len(), 4);
        assert!(!g3.embedding.contains_key(&PAD_INDEX));
    }

    #[test]
    fn validate_catches_inconsistency() {
        let (vocab, _) = vocab_and_seq();
        let mut m = AttBlstmModel::new(tiny_config(true), &vocab, None).unwrap();
        assert!(m.validate().is_ok());
        m.attention = None;
        assert!(m.validate().is_err());
        assert!(ModelConfig { hidden: 0, ..ModelConfig::default() }.validate().is_err());
        assert!(ModelConfig { beta1: 1.0, ..ModelConfig::default() }.validate().is_err());
    }
}
