use std::ops::ControlFlow;

use serde::{Deserialize, Serialize};

use super::optim::{adamax_update, AdamaxConfig, Moments};
use super::{AttBlstmModel, Example, ModelError, ModelGrads};
use crate::numkit::{derive_seed, Rng};

/// AdaMax state covering every trainable tensor of a model.
///
/// Embedding moments are updated lazily: only columns that received a
/// gradient in a step are touched, with the shared step counter.
#[derive(Debug, Clone)]
pub struct ModelOptimizer {
    config: AdamaxConfig,
    t: u64,
    dense: Vec<Moments>,
    embedding: Option<Moments>,
}

impl ModelOptimizer {
    pub fn new(model: &AttBlstmModel) -> Self {
        Self {
            config: model.config.optimizer(),
            t: 0,
            dense: model.tensors().iter().map(|t| Moments::zeros(t.len())).collect(),
            embedding: model
                .embedding
                .trainable()
                .then(|| Moments::zeros(model.embedding.matrix.as_slice().len())),
        }
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    pub fn step(&mut self, model: &mut AttBlstmModel, grads: &ModelGrads) {
        self.t += 1;
        let step = self.config.step_size(self.t);
        for ((param, grad), moments) in model
            .tensors_mut()
            .into_iter()
            .zip(grads.tensors())
            .zip(&mut self.dense)
        {
            adamax_update(&self.config, step, &mut moments.m, &mut moments.u, param, grad);
        }
        let Some(emb) = &mut self.embedding else {
            return;
        };
        if !model.embedding.trainable() {
            return;
        }
        // Row-major d×v: column j occupies indices k·v + j.
        let v = model.embedding.vocab_size();
        let data = model.embedding.matrix.as_mut_slice();
        for (&col, g) in &grads.embedding {
            for (k, &gk) in g.iter().enumerate() {
                let idx = k * v + col;
                adamax_update(
                    &self.config,
                    step,
                    std::slice::from_mut(&mut emb.m[idx]),
                    std::slice::from_mut(&mut emb.u[idx]),
                    std::slice::from_mut(&mut data[idx]),
                    std::slice::from_ref(&gk),
                );
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrainReport {
    pub epochs: Vec<EpochRecord>,
}

impl TrainReport {
    pub fn train_losses(&self) -> Vec<f64> {
        self.epochs.iter().map(|e| e.train_loss).collect()
    }

    pub fn val_losses(&self) -> Vec<Option<f64>> {
        self.epochs.iter().map(|e| e.val_loss).collect()
    }

    /// `epoch,train_loss,val_loss` rows with a header line.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,train_loss,val_loss\n");
        for e in &self.epochs {
            let val = e.val_loss.map(|v| v.to_string()).unwrap_or_default();
            out.push_str(&format!("{},{},{}\n", e.epoch, e.train_loss, val));
        }
        out
    }
}

/// Trains for `model.config.epochs` epochs. See [`train_with`].
pub fn train(
    model: &mut AttBlstmModel,
    train_set: &[Example],
    val_set: &[Example],
) -> Result<TrainReport, ModelError> {
    train_with(model, train_set, val_set, |_, _, _| ControlFlow::Continue(()))
}

/// Per-example (or mini-batch) AdaMax training over a seeded shuffle.
///
/// After each epoch the mean loss over the full training and validation sets
/// is recorded and `on_epoch` is called; returning `Break` stops early.
pub fn train_with<F>(
    model: &mut AttBlstmModel,
    train_set: &[Example],
    val_set: &[Example],
    mut on_epoch: F,
) -> Result<TrainReport, ModelError>
where
    F: FnMut(&EpochRecord, &AttBlstmModel, &[Example]) -> ControlFlow<()>,
{
    model.validate()?;
    if train_set.is_empty() {
        return Err(ModelError::EmptyTrainingSet);
    }
    if let Some(e) = train_set.iter().chain(val_set).find(|e| e.label > 1) {
        return Err(ModelError::Label(e.label));
    }
    let positives = train_set.iter().filter(|e| e.label == 1).count();
    if positives == 0 || positives == train_set.len() {
        return Err(ModelError::SingleClass);
    }
    let mut optimizer = ModelOptimizer::new(model);
    let batch = model.config.batch_size;
    let clip = model.config.clip_norm;
    let mut report = TrainReport::default();
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    for epoch in 1..=model.config.epochs {
        let mut rng = Rng::new(derive_seed(model.config.seed, &format!("shuffle/{epoch}")));
        order.sort_unstable();
        rng.shuffle(&mut order);
        for chunk in order.chunks(batch) {
            let mut acc: Option<ModelGrads> = None;
            for &i in chunk {
                let (_, g) = model.loss_and_grads(&train_set[i])?;
                match &mut acc {
                    Some(a) => a.add_assign(&g),
                    None => acc = Some(g),
                }
            }
            let mut grads = acc.expect("chunks are nonempty");
            if chunk.len() > 1 {
                grads.scale(1.0 / chunk.len() as f64);
            }
            if let Some(max_norm) = clip {
                let norm = grads.l2_norm();
                if norm > max_norm {
                    grads.scale(max_norm / norm);
                }
            }
            optimizer.step(model, &grads);
        }
        let record = EpochRecord {
            epoch,
            train_loss: model.mean_loss(train_set)?.expect("nonempty training set"),
            val_loss: model.mean_loss(val_set)?,
        };
        let flow = on_epoch(&record, model, train_set);
        report.epochs.push(record);
        if flow.is_break() {
            break;
        }
    }
    Ok(report)
}
