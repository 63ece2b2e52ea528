//! End-to-end helpers shared by the command line and the test suites:
//! preprocessing a corpus, fitting a model on index subsets, and running
//! model comparisons over shared fold plans.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::baselines::{bow_featurize, Baseline, BaselineError, BaselineKind};
use crate::corpus::{Corpus, RawPost};
use crate::evalstat::{
    cross_validate_with_plans, fold_plans, wilcoxon_signed_rank, CvResult, EvalError, FoldPlan,
    WilcoxonResult,
};
use crate::model::{train, AttBlstmModel, Example, ModelConfig, ModelError, TrainReport, Variant};
use crate::numkit::derive_seed;
use crate::textprep::{PrepError, Preprocessor, TokenSeq};
use crate::vocab::{build_vocab, PretrainedVectors, VocabError, Vocabulary};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("post {id}: {source}")]
    Prep { id: String, source: PrepError },
    #[error(transparent)]
    Vocab(#[from] VocabError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Baseline(#[from] BaselineError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("{0} needs pretrained embeddings")]
    MissingPretrained(String),
}

/// A corpus after preprocessing, aligned with its posts.
#[derive(Debug, Clone, PartialEq)]
pub struct Prepared {
    pub ids: Vec<String>,
    pub seqs: Vec<TokenSeq>,
    pub labels: Vec<u8>,
}

impl Prepared {
    pub fn new(posts: &[RawPost], prep: &Preprocessor) -> Result<Self, PipelineError> {
        let seqs = posts
            .iter()
            .map(|p| {
                prep.process(&p.text).map_err(|source| PipelineError::Prep {
                    id: p.id.clone(),
                    source,
                })
            })
            .collect::<Result<_, _>>()?;
        Ok(Self {
            ids: posts.iter().map(|p| p.id.clone()).collect(),
            seqs,
            labels: posts.iter().map(|p| p.label).collect(),
        })
    }

    pub fn from_corpus(corpus: &Corpus, prep: &Preprocessor) -> Result<Self, PipelineError> {
        Self::new(&corpus.posts, prep)
    }

    pub fn len(&self) -> usize {
        self.seqs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.seqs.is_empty()
    }

    pub fn vocab_for(&self, indices: &[usize]) -> Result<Vocabulary, PipelineError> {
        let seqs: Vec<TokenSeq> = indices.iter().map(|&i| self.seqs[i].clone()).collect();
        Ok(build_vocab(&seqs, 1)?)
    }

    pub fn examples(&self, indices: &[usize], vocab: &Vocabulary) -> Vec<Example> {
        indices
            .iter()
            .map(|&i| Example::new(&self.seqs[i], vocab, self.labels[i]))
            .collect()
    }
}

/// A neural configuration or a bag-of-words baseline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ModelSpec {
    Neural { config: ModelConfig },
    Baseline { baseline: BaselineKind },
}

impl ModelSpec {
    pub fn name(&self) -> String {
        match self {
            ModelSpec::Neural { config } => config.name(),
            ModelSpec::Baseline { baseline } => baseline.display_name().to_owned(),
        }
    }

    /// The six neural variants (with and without attention for M1–M3).
    pub fn neural_grid(base: &ModelConfig) -> Vec<ModelSpec> {
        let mut out = Vec::new();
        for variant in Variant::ALL {
            for use_attention in [true, false] {
                out.push(ModelSpec::Neural {
                    config: ModelConfig {
                        variant,
                        use_attention,
                        ..base.clone()
                    },
                });
            }
        }
        out
    }
}

/// A trained neural model together with the vocabulary it was built on.
#[derive(Debug, Clone)]
pub struct Fitted {
    pub model: AttBlstmModel,
    pub vocab: Vocabulary,
    pub report: TrainReport,
}

/// Builds the vocabulary on `train_idx`, initializes and trains a neural model.
pub fn fit_neural(
    data: &Prepared,
    config: &ModelConfig,
    train_idx: &[usize],
    val_idx: &[usize],
    pretrained: Option<&PretrainedVectors>,
) -> Result<Fitted, PipelineError> {
    if config.variant.embedding_mode().needs_pretrained() && pretrained.is_none() {
        return Err(PipelineError::MissingPretrained(config.name()));
    }
    let vocab = data.vocab_for(train_idx)?;
    let mut model = AttBlstmModel::new(config.clone(), &vocab, pretrained)?;
    let train_set = data.examples(train_idx, &vocab);
    let val_set = data.examples(val_idx, &vocab);
    let report = train(&mut model, &train_set, &val_set)?;
    Ok(Fitted { model, vocab, report })
}

/// Trains `spec` on `train_idx` and predicts labels for `test_idx`.
pub fn fit_predict(
    data: &Prepared,
    spec: &ModelSpec,
    train_idx: &[usize],
    test_idx: &[usize],
    pretrained: Option<&PretrainedVectors>,
    seed: u64,
) -> Result<Vec<u8>, PipelineError> {
    match spec {
        ModelSpec::Neural { config } => {
            let config = ModelConfig {
                seed,
                ..config.clone()
            };
            let fitted = fit_neural(data, &config, train_idx, &[], pretrained)?;
            test_idx
                .iter()
                .map(|&i| {
                    Ok(fitted
                        .model
                        .predict_seq(&data.seqs[i], &fitted.vocab, 0.5)?)
                })
                .collect()
        }
        ModelSpec::Baseline { baseline } => {
            let vocab = data.vocab_for(train_idx)?;
            let train_set: Vec<_> = train_idx
                .iter()
                .map(|&i| (bow_featurize(&data.seqs[i], &vocab), data.labels[i]))
                .collect();
            let model = Baseline::fit(*baseline, &train_set, seed)?;
            Ok(test_idx
                .iter()
                .map(|&i| model.predict(&bow_featurize(&data.seqs[i], &vocab)))
                .collect())
        }
    }
}

/// Per-fold model seed; depends only on the root seed and the fold key.
pub fn fold_seed(root: u64, repeat: usize, fold: usize) -> u64 {
    derive_seed(root, &format!("model/{repeat}/{fold}"))
}

pub fn cross_validate_spec(
    data: &Prepared,
    spec: &ModelSpec,
    plans: &[FoldPlan],
    root_seed: u64,
    pretrained: Option<&PretrainedVectors>,
    jobs: usize,
) -> Result<CvResult, PipelineError> {
    Ok(cross_validate_with_plans(&data.labels, plans, jobs, |r, j, train_idx, test_idx| {
        fit_predict(data, spec, train_idx, test_idx, pretrained, fold_seed(root_seed, r, j))
    })?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelResult {
    pub name: String,
    pub spec: ModelSpec,
    pub cv: CvResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairwiseTest {
    pub a: String,
    pub b: String,
    pub metric: String,
    /// `None` when every paired difference is zero.
    pub result: Option<WilcoxonResult>,
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub k: usize,
    pub repeats: usize,
    pub seed: u64,
    pub models: Vec<ModelResult>,
    pub pairwise: Vec<PairwiseTest>,
}

/// Runs repeated CV for every spec on the same fold plans, then a Wilcoxon
/// signed-rank test on paired per-fold F1 for every pair of models.
pub fn compare_models(
    data: &Prepared,
    specs: &[ModelSpec],
    k: usize,
    repeats: usize,
    seed: u64,
    pretrained: Option<&PretrainedVectors>,
    jobs: usize,
) -> Result<Comparison, PipelineError> {
    let plans = fold_plans(&data.labels, k, repeats, seed)?;
    let mut models = Vec::with_capacity(specs.len());
    for spec in specs {
        let cv = cross_validate_spec(data, spec, &plans, seed, pretrained, jobs)?;
        models.push(ModelResult {
            name: spec.name(),
            spec: spec.clone(),
            cv,
        });
    }
    let mut pairwise = Vec::new();
    for i in 0..models.len() {
        for j in i + 1..models.len() {
            pairwise.push(paired_f1_test(&models[i], &models[j])?);
        }
    }
    Ok(Comparison {
        k,
        repeats,
        seed,
        models,
        pairwise,
    })
}

pub fn paired_f1_test(a: &ModelResult, b: &ModelResult) -> Result<PairwiseTest, PipelineError> {
    let (result, note) = match wilcoxon_signed_rank(&a.cv.f1_scores(), &b.cv.f1_scores()) {
        Ok(r) => (Some(r), None),
        Err(EvalError::Degenerate) => (None, Some("no difference".to_owned())),
        Err(e) => return Err(e.into()),
    };
    Ok(PairwiseTest {
        a: a.name.clone(),
        b: b.name.clone(),
        metric: "f1".to_owned(),
        result,
        note,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{synth_corpus, Lexicon, SynthSpec};

    fn small() -> Prepared {
        let c = synth_corpus(
            &SynthSpec {
                n_posts: 40,
                seed: 3,
                ..SynthSpec::default()
            },
            &Lexicon::default(),
        )
        .unwrap();
        Prepared::from_corpus(&c, &Preprocessor::new(crate::textprep::StopWords::builtin(), 30)).unwrap()
    }

    #[test]
    fn self_comparison_reports_no_difference() {
        let data = small();
        let nb = ModelSpec::Baseline {
            baseline: BaselineKind::Nb,
        };
        let cmp = compare_models(&data, &[nb.clone(), nb], 5, 3, 1, None, 1).unwrap();
        assert_eq!(cmp.models.iter().map(|m| m.cv.folds.len()).sum::<usize>(), 30);
        assert_eq!(cmp.pairwise.len(), 1);
        assert!(cmp.pairwise[0].result.is_none());
        assert_eq!(cmp.pairwise[0].note.as_deref(), Some("no difference"));
    }

    #[test]
    fn pretrained_variant_requires_vectors() {
        let data = small();
        let spec = ModelSpec::Neural {
            config: ModelConfig {
                variant: Variant::M2,
                embed_dim: 4,
                hidden: 2,
                max_len: 30,
                epochs: 1,
                ..ModelConfig::default()
            },
        };
        let idx: Vec<usize> = (0..data.len()).collect();
        assert!(matches!(
            fit_predict(&data, &spec, &idx, &idx, None, 0),
            Err(PipelineError::MissingPretrained(_))
        ));
    }

    #[test]
    fn grid_has_six_variants() {
        let names: Vec<String> = ModelSpec::neural_grid(&ModelConfig::default())
            .iter()
            .map(ModelSpec::name)
            .collect();
        assert_eq!(names.len(), 6);
        assert!(names.contains(&"Att-BLSTM-M2".to_owned()));
        assert!(names.contains(&"BLSTM-M3".to_owned()));
    }
}
