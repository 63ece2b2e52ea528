//! Bag-of-words features and classical baselines: logistic regression,
//! multinomial naive Bayes and a linear SVM.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numkit::{sigmoid_scalar, Rng};
use crate::textprep::TokenSeq;
use crate::vocab::Vocabulary;

#[derive(Debug, Error, PartialEq)]
pub enum BaselineError {
    #[error("training data must contain both classes")]
    SingleClass,
    #[error("feature dimension mismatch: {expected} vs {found}")]
    Dimension { expected: usize, found: usize },
    #[error("label {0} is not binary")]
    Label(u8),
}

/// Sparse token counts over a vocabulary of size `dim`.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct BowVector {
    pub dim: usize,
    pub counts: BTreeMap<usize, u32>,
}

impl BowVector {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            counts: BTreeMap::new(),
        }
    }

    pub fn add(&mut self, index: usize, count: u32) {
        assert!(index < self.dim, "index {index} outside dimension {}", self.dim);
        if count > 0 {
            *self.counts.entry(index).or_default() += count;
        }
    }

    pub fn dot(&self, w: &[f64]) -> f64 {
        self.counts.iter().map(|(&i, &c)| w[i] * f64::from(c)).sum()
    }

    pub fn total(&self) -> u64 {
        self.counts.values().map(|&c| u64::from(c)).sum()
    }

    pub fn scaled(&self, factor: u32) -> Self {
        Self {
            dim: self.dim,
            counts: self.counts.iter().map(|(&i, &c)| (i, c * factor)).collect(),
        }
    }
}

/// Counts valid tokens; unknown tokens count under `<UNK>`, padding never counts.
pub fn bow_featurize(seq: &TokenSeq, vocab: &Vocabulary) -> BowVector {
    let mut v = BowVector::new(vocab.len());
    for tok in seq.valid_tokens() {
        v.add(vocab.index_of(tok), 1);
    }
    v
}

fn check_data(data: &[(BowVector, u8)]) -> Result<usize, BaselineError> {
    let dim = data.first().map(|(x, _)| x.dim).unwrap_or(0);
    let mut seen = [false; 2];
    for (x, y) in data {
        if *y > 1 {
            return Err(BaselineError::Label(*y));
        }
        if x.dim != dim {
            return Err(BaselineError::Dimension {
                expected: dim,
                found: x.dim,
            });
        }
        seen[*y as usize] = true;
    }
    if seen == [true, true] {
        Ok(dim)
    } else {
        Err(BaselineError::SingleClass)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LinearKind {
    LogisticRegression,
    LinearSvm,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub kind: LinearKind,
}

impl LinearModel {
    pub fn score(&self, x: &BowVector) -> f64 {
        x.dot(&self.weights) + self.bias
    }

    /// σ(w·x + b); meaningful for logistic regression.
    pub fn probability(&self, x: &BowVector) -> f64 {
        sigmoid_scalar(self.score(x))
    }

    /// Label 1 iff w·x + b ≥ 0 (equivalently p ≥ 0.5 for logistic regression).
    pub fn predict(&self, x: &BowVector) -> u8 {
        u8::from(self.score(x) >= 0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogRegConfig {
    pub l2: f64,
    pub tolerance: f64,
    pub max_iter: usize,
}

impl Default for LogRegConfig {
    fn default() -> Self {
        Self {
            l2: 1e-4,
            tolerance: 1e-6,
            max_iter: 5000,
        }
    }
}

/// Objective values after each accepted step (index 0 is the initial value).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LogRegTrace {
    pub losses: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

fn logreg_objective(data: &[(BowVector, u8)], w: &[f64], b: f64, l2: f64) -> f64 {
    let n = data.len() as f64;
    let data_loss: f64 = data
        .iter()
        .map(|(x, y)| {
            let z = x.dot(w) + b;
            softplus(z) - f64::from(*y) * z
        })
        .sum::<f64>()
        / n;
    data_loss + 0.5 * l2 * w.iter().map(|v| v * v).sum::<f64>()
}

/// Full-batch gradient descent on mean cross-entropy + (λ/2)‖w‖² from zero weights.
/// Each step starts at 1.0 and halves until the objective satisfies an Armijo decrease.
pub fn train_logreg(
    data: &[(BowVector, u8)],
    config: &LogRegConfig,
) -> Result<(LinearModel, LogRegTrace), BaselineError> {
    let dim = check_data(data)?;
    let n = data.len() as f64;
    let mut w = vec![0.0; dim];
    let mut b = 0.0;
    let mut loss = logreg_objective(data, &w, b, config.l2);
    let mut trace = LogRegTrace {
        losses: vec![loss],
        ..LogRegTrace::default()
    };
    for _ in 0..config.max_iter {
        let mut gw: Vec<f64> = w.iter().map(|v| config.l2 * v).collect();
        let mut gb = 0.0;
        for (x, y) in data {
            let r = (sigmoid_scalar(x.dot(&w) + b) - f64::from(*y)) / n;
            gb += r;
            for (&i, &c) in &x.counts {
                gw[i] += r * f64::from(c);
            }
        }
        let gnorm_inf = gw.iter().fold(gb.abs(), |m, g| m.max(g.abs()));
        if gnorm_inf < config.tolerance {
            trace.converged = true;
            break;
        }
        let gsq: f64 = gw.iter().map(|g| g * g).sum::<f64>() + gb * gb;
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let cand_w: Vec<f64> = w.iter().zip(&gw).map(|(v, g)| v - step * g).collect();
            let cand_b = b - step * gb;
            let cand = logreg_objective(data, &cand_w, cand_b, config.l2);
            if cand <= loss - 1e-4 * step * gsq {
                accepted = Some((cand_w, cand_b, cand));
                break;
            }
            step *= 0.5;
        }
        let Some((nw, nb, nl)) = accepted else {
            // No representable decrease left.
            trace.converged = true;
            break;
        };
        w = nw;
        b = nb;
        loss = nl;
        trace.losses.push(loss);
        trace.iterations += 1;
    }
    Ok((
        LinearModel {
            weights: w,
            bias: b,
            kind: LinearKind::LogisticRegression,
        },
        trace,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SvmConfig {
    pub lambda: f64,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for SvmConfig {
    fn default() -> Self {
        Self {
            lambda: 1e-4,
            epochs: 2000,
            seed: 0,
        }
    }
}

/// Pegasos-style subgradient descent on mean hinge loss + (λ/2)‖w‖² with step 1/(λt).
/// The bias is an extra constant feature and is regularized with the weights.
pub fn train_linear_svm(
    data: &[(BowVector, u8)],
    config: &SvmConfig,
) -> Result<LinearModel, BaselineError> {
    let dim = check_data(data)?;
    // w = scale · v, last entry of v is the bias.
    let mut v = vec![0.0; dim + 1];
    let mut scale = 1.0;
    let mut rng = Rng::new(config.seed);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut t: u64 = 0;
    for _ in 0..config.epochs {
        rng.shuffle(&mut order);
        for &i in &order {
            t += 1;
            let (x, y) = &data[i];
            let y = if *y == 1 { 1.0 } else { -1.0 };
            let eta = 1.0 / (config.lambda * t as f64);
            let margin = y * scale * (x.dot(&v) + v[dim]);
            let shrink = 1.0 - eta * config.lambda;
            if shrink <= 0.0 {
                v.iter_mut().for_each(|e| *e = 0.0);
                scale = 1.0;
            } else {
                scale *= shrink;
            }
            if margin < 1.0 {
                let step = eta * y / scale;
                for (&j, &c) in &x.counts {
                    v[j] += step * f64::from(c);
                }
                v[dim] += step;
            }
            if scale < 1e-9 {
                v.iter_mut().for_each(|e| *e *= scale);
                scale = 1.0;
            }
        }
    }
    let bias = v[dim] * scale;
    v.truncate(dim);
    v.iter_mut().for_each(|e| *e *= scale);
    Ok(LinearModel {
        weights: v,
        bias,
        kind: LinearKind::LinearSvm,
    })
}

/// Multinomial naive Bayes with additive smoothing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NbModel {
    pub log_prior: [f64; 2],
    pub log_likelihood: [Vec<f64>; 2],
    pub alpha: f64,
}

impl NbModel {
    /// Unnormalized log joint: log P(c) + Σ_w count(w)·log P(w|c).
    pub fn log_joint(&self, x: &BowVector) -> [f64; 2] {
        [0, 1].map(|c| self.log_prior[c] + x.dot(&self.log_likelihood[c]))
    }

    /// Argmax posterior; ties go to label 1.
    pub fn predict(&self, x: &BowVector) -> u8 {
        let [l0, l1] = self.log_joint(x);
        u8::from(l1 >= l0)
    }
}

pub const DEFAULT_NB_ALPHA: f64 = 1.0;

/// likelihood(w|c) = (count(w,c) + α) / (total(c) + α·v); priors from class frequencies.
pub fn train_nb(data: &[(BowVector, u8)], alpha: f64) -> Result<NbModel, BaselineError> {
    let dim = check_data(data)?;
    let mut counts = [vec![0.0; dim], vec![0.0; dim]];
    let mut docs = [0usize; 2];
    for (x, y) in data {
        let c = *y as usize;
        docs[c] += 1;
        for (&i, &n) in &x.counts {
            counts[c][i] += f64::from(n);
        }
    }
    let n = data.len() as f64;
    let log_prior = [0, 1].map(|c| (docs[c] as f64 / n).ln());
    let log_likelihood = counts.map(|cnt| {
        let total: f64 = cnt.iter().sum();
        let denom = (total + alpha * dim as f64).ln();
        cnt.iter().map(|k| (k + alpha).ln() - denom).collect()
    });
    Ok(NbModel {
        log_prior,
        log_likelihood,
        alpha,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BaselineKind {
    LogReg,
    Nb,
    Svm,
}

impl BaselineKind {
    pub const ALL: [BaselineKind; 3] = [BaselineKind::LogReg, BaselineKind::Nb, BaselineKind::Svm];

    pub fn display_name(self) -> &'static str {
        match self {
            BaselineKind::LogReg => "LogisticRegression",
            BaselineKind::Nb => "NaiveBayes",
            BaselineKind::Svm => "LinearSVM",
        }
    }
}

impl fmt::Display for BaselineKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BaselineKind::LogReg => "logreg",
            BaselineKind::Nb => "nb",
            BaselineKind::Svm => "svm",
        })
    }
}

impl FromStr for BaselineKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "logreg" | "lr" => Ok(BaselineKind::LogReg),
            "nb" => Ok(BaselineKind::Nb),
            "svm" => Ok(BaselineKind::Svm),
            other => Err(format!("unknown baseline {other:?} (expected logreg, nb or svm)")),
        }
    }
}

/// A trained baseline of any kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Baseline {
    Linear(LinearModel),
    NaiveBayes(NbModel),
}

impl Baseline {
    pub fn fit(kind: BaselineKind, data: &[(BowVector, u8)], seed: u64) -> Result<Self, BaselineError> {
        Ok(match kind {
            BaselineKind::LogReg => Baseline::Linear(train_logreg(data, &LogRegConfig::default())?.0),
            BaselineKind::Nb => Baseline::NaiveBayes(train_nb(data, DEFAULT_NB_ALPHA)?),
            BaselineKind::Svm => Baseline::Linear(train_linear_svm(
                data,
                &SvmConfig {
                    seed,
                    ..SvmConfig::default()
                },
            )?),
        })
    }

    pub fn predict(&self, x: &BowVector) -> u8 {
        baseline_predict(self, x)
    }
}

pub fn baseline_predict(model: &Baseline, x: &BowVector) -> u8 {
    match model {
        Baseline::Linear(m) => m.predict(x),
        Baseline::NaiveBayes(m) => m.predict(x),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::textprep::fit_length;
    use crate::vocab::build_vocab;

    fn seq(words: &str, t: usize) -> TokenSeq {
        let toks: Vec<String> = words.split_whitespace().map(str::to_owned).collect();
        fit_length(&toks, t).unwrap()
    }

    fn bow(dim: usize, entries: &[(usize, u32)]) -> BowVector {
        let mut v = BowVector::new(dim);
        for &(i, c) in entries {
            v.add(i, c);
        }
        v
    }

    #[test]
    fn featurize_counts_valid_tokens() {
        let vocab = build_vocab(&[seq("black tar", 4)], 1).unwrap();
        let x = bow_featurize(&seq("black tar black", 6), &vocab);
        let black = vocab.get("black").unwrap();
        let tar = vocab.get("tar").unwrap();
        assert_eq!(x.counts, BTreeMap::from([(black, 2), (tar, 1)]));
        let y = bow_featurize(&seq("heroin black", 6), &vocab);
        assert_eq!(y.counts, BTreeMap::from([(1, 1), (black, 1)]));
        assert!(!y.counts.contains_key(&0));
    }

    #[test]
    fn logreg_separates_pair() {
        let data = vec![(bow(1, &[(0, 1)]), 1), (bow(1, &[]), 0)];
        let (m, trace) = train_logreg(&data, &LogRegConfig::default()).unwrap();
        assert!(data.iter().all(|(x, y)| m.predict(x) == *y));
        assert!(trace.losses.windows(2).all(|w| w[1] <= w[0]));
        assert!((m.probability(&data[0].0) - sigmoid_scalar(m.score(&data[0].0))).abs() == 0.0);
    }

    #[test]
    fn logreg_zero_iterations_is_half() {
        let data = vec![(bow(2, &[(0, 3)]), 1), (bow(2, &[(1, 1)]), 0)];
        let cfg = LogRegConfig {
            max_iter: 0,
            ..LogRegConfig::default()
        };
        let (m, _) = train_logreg(&data, &cfg).unwrap();
        for (x, _) in &data {
            assert_eq!(m.probability(x), 0.5);
            assert_eq!(m.predict(x), 1);
        }
    }

    #[test]
    fn logreg_duplicated_data_same_fit() {
        let data = vec![
            (bow(3, &[(0, 2), (1, 1)]), 1),
            (bow(3, &[(1, 1), (2, 2)]), 0),
            (bow(3, &[(0, 1)]), 1),
            (bow(3, &[(2, 1), (0, 1)]), 0),
        ];
        let cfg = LogRegConfig {
            max_iter: 300,
            ..LogRegConfig::default()
        };
        let (a, _) = train_logreg(&data, &cfg).unwrap();
        let doubled: Vec<_> = data.iter().chain(&data).cloned().collect();
        let (b, _) = train_logreg(&doubled, &cfg).unwrap();
        for (x, y) in a.weights.iter().zip(&b.weights) {
            assert!((x - y).abs() < 1e-9, "{x} vs {y}");
        }
        assert!((a.bias - b.bias).abs() < 1e-9);
    }

    #[test]
    fn nb_hand_computed_posterior() {
        let vocab = build_vocab(&[seq("opiate dose milk tea", 5)], 1).unwrap();
        let data = vec![
            (bow_featurize(&seq("opiate dose", 5), &vocab), 1),
            (bow_featurize(&seq("milk tea", 5), &vocab), 0),
        ];
        let nb = train_nb(&data, 1.0).unwrap();
        let x = bow_featurize(&seq("opiate", 5), &vocab);
        // v = 6: class 1 → (1+1)/(2+6), class 0 → (0+1)/(2+6); equal priors.
        let [l0, l1] = nb.log_joint(&x);
        assert!((l1 - (0.5f64.ln() + 0.25f64.ln())).abs() < 1e-12);
        assert!((l0 - (0.5f64.ln() + 0.125f64.ln())).abs() < 1e-12);
        assert_eq!(nb.predict(&x), 1);
        for c in 0..2 {
            let s: f64 = nb.log_likelihood[c].iter().map(|l| l.exp()).sum();
            assert!((s - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn nb_symmetry_ties_and_priors() {
        let data = vec![(bow(4, &[(2, 1)]), 1), (bow(4, &[(3, 1)]), 0)];
        let swapped = vec![(bow(4, &[(3, 1)]), 1), (bow(4, &[(2, 1)]), 0)];
        let a = train_nb(&data, 1.0).unwrap();
        let b = train_nb(&swapped, 1.0).unwrap();
        let q2 = bow(4, &[(2, 2)]);
        assert_eq!(a.predict(&q2), 1);
        assert_eq!(b.predict(&q2), 0);
        // balanced word seen once in each class → tie → 1
        let tie = bow(4, &[(2, 1), (3, 1)]);
        assert_eq!(a.predict(&tie), 1);
        let skewed = vec![
            (bow(4, &[(2, 1)]), 0),
            (bow(4, &[(2, 1)]), 0),
            (bow(4, &[(3, 1)]), 1),
        ];
        let nb = train_nb(&skewed, 1.0).unwrap();
        let empty = BowVector::new(4);
        assert_eq!(nb.log_joint(&empty), nb.log_prior);
        assert_eq!(nb.predict(&empty), 0);
    }

    #[test]
    fn svm_separable_toy() {
        let data = vec![
            (bow(2, &[(0, 2)]), 1),
            (bow(2, &[(0, 3), (1, 1)]), 1),
            (bow(2, &[(1, 2)]), 0),
            (bow(2, &[(1, 3), (0, 1)]), 0),
        ];
        let cfg = SvmConfig {
            seed: 5,
            ..SvmConfig::default()
        };
        let m = train_linear_svm(&data, &cfg).unwrap();
        assert!(data.iter().all(|(x, y)| m.predict(x) == *y));
        assert_eq!(m, train_linear_svm(&data, &cfg).unwrap());

        let doubled: Vec<_> = data.iter().map(|(x, y)| (x.scaled(2), *y)).collect();
        let m2 = train_linear_svm(&doubled, &cfg).unwrap();
        for (x, _) in &data {
            assert_eq!(m.predict(x), m2.predict(&x.scaled(2)));
        }
    }

    #[test]
    fn single_class_and_dimension_errors() {
        let one = vec![(bow(2, &[(0, 1)]), 1), (bow(2, &[(1, 1)]), 1)];
        assert_eq!(train_nb(&one, 1.0).unwrap_err(), BaselineError::SingleClass);
        assert!(train_logreg(&one, &LogRegConfig::default()).is_err());
        assert!(train_linear_svm(&one, &SvmConfig::default()).is_err());
        let mixed = vec![(bow(2, &[]), 1), (bow(3, &[]), 0)];
        assert!(matches!(train_nb(&mixed, 1.0), Err(BaselineError::Dimension { .. })));
    }

    #[test]
    fn zero_linear_model_predicts_one() {
        let m = LinearModel {
            weights: vec![0.0; 3],
            bias: 0.0,
            kind: LinearKind::LinearSvm,
        };
        assert_eq!(baseline_predict(&Baseline::Linear(m), &bow(3, &[(1, 4)])), 1);
    }

    #[test]
    fn kinds_parse() {
        let kinds: Vec<BaselineKind> = "logreg,nb,svm".split(',').map(|s| s.parse().unwrap()).collect();
        assert_eq!(kinds, BaselineKind::ALL.to_vec());
        assert!("tree".parse::<BaselineKind>().is_err());
    }
}
