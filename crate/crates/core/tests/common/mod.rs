#![allow(dead_code)]

use attblstm::model::{AttBlstmModel, Example, ModelConfig, Variant};
use attblstm::numkit::Rng;
use attblstm::textprep::fit_length;
use attblstm::vocab::{build_vocab, PretrainedVectors, Vocabulary};

pub const FD_STEP: f64 = 1e-5;

/// Relative error with an absolute floor so vanishing gradients compare absolutely.
pub fn rel_err(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-5)
}

pub fn central<F: FnMut(f64) -> f64>(mut f: F, x: f64) -> f64 {
    (f(x + FD_STEP) - f(x - FD_STEP)) / (2.0 * FD_STEP)
}

#[derive(Debug, Default)]
pub struct GradReport {
    pub checked: usize,
    pub max_err: f64,
    pub worst: String,
}

impl GradReport {
    pub fn record(&mut self, name: &str, analytic: f64, numeric: f64) {
        let e = rel_err(analytic, numeric);
        self.checked += 1;
        if e >= self.max_err {
            self.max_err = e;
            self.worst = format!("{name}: analytic {analytic:.3e} numeric {numeric:.3e}");
        }
    }

    pub fn merge(&mut self, other: GradReport) {
        self.checked += other.checked;
        if other.max_err >= self.max_err {
            self.max_err = other.max_err;
            self.worst = other.worst;
        }
    }
}

const WORDS: &[&str] = &[
    "opiate", "black", "dose", "milk", "tea", "garden", "walk", "rain", "river", "chair", "paper",
    "bread", "coffee", "water", "summer", "winter", "friend", "music",
];

/// A vocabulary of 20 entries (18 words plus the two reserved tokens).
pub fn tiny_vocab() -> Vocabulary {
    let toks: Vec<String> = WORDS.iter().map(|w| w.to_string()).collect();
    build_vocab(&[fit_length(&toks, toks.len()).unwrap()], 1).unwrap()
}

pub fn tiny_pretrained(dim: usize, seed: u64) -> PretrainedVectors {
    let mut rng = Rng::new(seed);
    let mut p = PretrainedVectors::new(dim);
    for w in &WORDS[..12] {
        let v: Vec<f64> = (0..dim).map(|_| rng.uniform(-0.5, 0.5)).collect();
        p.insert(w.to_string(), v).unwrap();
    }
    p
}

/// A random example of length `t` with `valid` leading real tokens.
pub fn random_example(rng: &mut Rng, vocab: &Vocabulary, t: usize, valid: usize, label: u8) -> Example {
    let ids = (0..t)
        .map(|i| if i < valid { 1 + rng.below(vocab.len() - 1) } else { 0 })
        .collect();
    let mask = (0..t).map(|i| i < valid).collect();
    Example { ids, mask, label }
}

pub fn tiny_model(seed: u64, variant: Variant, use_attention: bool) -> (AttBlstmModel, Vocabulary) {
    let vocab = tiny_vocab();
    let cfg = ModelConfig {
        embed_dim: 8,
        hidden: 4,
        max_len: 6,
        variant,
        use_attention,
        seed,
        ..ModelConfig::default()
    };
    let pre = variant
        .embedding_mode()
        .needs_pretrained()
        .then(|| tiny_pretrained(8, seed));
    let mut model = AttBlstmModel::new(cfg, &vocab, pre.as_ref()).unwrap();
    // Move attention bias and head bias off zero so their gradients are exercised generically.
    let mut rng = Rng::new(seed ^ 0xA5A5);
    if let Some(a) = &mut model.attention {
        for b in &mut a.b {
            *b = rng.uniform(-0.3, 0.3);
        }
    }
    model.head.b = rng.uniform(-0.2, 0.2);
    (model, vocab)
}

/// Compares analytic gradients of the example loss with central differences
/// for every dense tensor and every trainable embedding column the example touches.
pub fn model_gradcheck(model: &AttBlstmModel, ex: &Example) -> GradReport {
    let mut report = GradReport::default();
    let (_, grads) = model.loss_and_grads(ex).unwrap();
    let names = model.tensor_names();
    let analytic: Vec<Vec<f64>> = grads.tensors().iter().map(|t| t.to_vec()).collect();
    let mut m = model.clone();
    for (ti, name) in names.iter().enumerate() {
        for e in 0..analytic[ti].len() {
            let x0 = m.tensors()[ti][e];
            let num = central(
                |x| {
                    m.tensors_mut()[ti][e] = x;
                    m.loss(ex).unwrap()
                },
                x0,
            );
            m.tensors_mut()[ti][e] = x0;
            report.record(&format!("{name}[{e}]"), analytic[ti][e], num);
        }
    }
    if model.embedding.trainable() {
        let v = model.vocab_size();
        let d = model.config.embed_dim;
        let mut cols: Vec<usize> = ex
            .ids
            .iter()
            .zip(&ex.mask)
            .filter(|(_, m)| **m)
            .map(|(&id, _)| id)
            .collect();
        cols.sort_unstable();
        cols.dedup();
        for col in cols {
            let g = grads.embedding.get(&col).cloned().unwrap_or_else(|| vec![0.0; d]);
            for k in 0..d {
                let idx = k * v + col;
                let x0 = m.embedding.matrix.as_slice()[idx];
                let num = central(
                    |x| {
                        m.embedding.matrix.as_mut_slice()[idx] = x;
                        m.loss(ex).unwrap()
                    },
                    x0,
                );
                m.embedding.matrix.as_mut_slice()[idx] = x0;
                report.record(&format!("embedding[{k},{col}]"), g[k], num);
            }
        }
    }
    report
}
