//! Classification metrics, stratified splits, repeated k-fold cross-validation
//! and the Wilcoxon signed-rank test.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numkit::{derive_seed, Rng};

pub const DEFAULT_FOLDS: usize = 5;
pub const DEFAULT_REPEATS: usize = 3;

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("length mismatch: {0} predictions vs {1} labels")]
    Length(usize, usize),
    #[error("nothing to evaluate")]
    Empty,
    #[error("class {0} is absent")]
    ClassAbsent(u8),
    #[error("corpus too small for a train/validation/test split ({0} < 10)")]
    TooSmall(usize),
    #[error("cannot stratify {k} folds: minority class has {minority} examples")]
    Stratification { k: usize, minority: usize },
    #[error("all paired differences are zero")]
    Degenerate,
    #[error("label {0} is not binary")]
    Label(u8),
    #[error("fold {repeat}/{fold}: {message}")]
    Trainer {
        repeat: usize,
        fold: usize,
        message: String,
    },
}

/// Positive class is label 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub tn: usize,
}

impl ConfusionMatrix {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.fn_ + self.tn
    }
}

pub fn confusion(predictions: &[u8], labels: &[u8]) -> Result<ConfusionMatrix, EvalError> {
    if predictions.len() != labels.len() {
        return Err(EvalError::Length(predictions.len(), labels.len()));
    }
    if labels.is_empty() {
        return Err(EvalError::Empty);
    }
    let mut cm = ConfusionMatrix::default();
    for (&p, &y) in predictions.iter().zip(labels) {
        match (p, y) {
            (1, 1) => cm.tp += 1,
            (1, 0) => cm.fp += 1,
            (0, 1) => cm.fn_ += 1,
            (0, 0) => cm.tn += 1,
            (p, y) => return Err(EvalError::Label(p.max(y))),
        }
    }
    Ok(cm)
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MetricsReport {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl MetricsReport {
    fn fields(&self) -> [f64; 4] {
        [self.accuracy, self.precision, self.recall, self.f1]
    }

    fn from_fields(f: [f64; 4]) -> Self {
        Self {
            accuracy: f[0],
            precision: f[1],
            recall: f[2],
            f1: f[3],
        }
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Precision, recall and F1 are 0 when their denominators vanish.
pub fn metrics(cm: &ConfusionMatrix) -> MetricsReport {
    let precision = ratio(cm.tp, cm.tp + cm.fp);
    let recall = ratio(cm.tp, cm.tp + cm.fn_);
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    MetricsReport {
        accuracy: ratio(cm.tp + cm.tn, cm.total()),
        precision,
        recall,
        f1,
    }
}

fn class_indices(labels: &[u8]) -> Result<[Vec<usize>; 2], EvalError> {
    let mut by_class = [Vec::new(), Vec::new()];
    for (i, &y) in labels.iter().enumerate() {
        if y > 1 {
            return Err(EvalError::Label(y));
        }
        by_class[y as usize].push(i);
    }
    for (c, idx) in by_class.iter().enumerate() {
        if idx.is_empty() {
            return Err(EvalError::ClassAbsent(c as u8));
        }
    }
    Ok(by_class)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

/// Stratified split: 20% test, then 30% of the remainder as validation (56/24/20 overall).
pub fn split_train_val_test(labels: &[u8], seed: u64) -> Result<Split, EvalError> {
    if labels.len() < 10 {
        return Err(EvalError::TooSmall(labels.len()));
    }
    let by_class = class_indices(labels)?;
    let mut rng = Rng::new(seed);
    let mut split = Split {
        train: Vec::new(),
        val: Vec::new(),
        test: Vec::new(),
    };
    for mut idx in by_class {
        rng.shuffle(&mut idx);
        let n = idx.len();
        let n_test = (0.2 * n as f64).round() as usize;
        let n_val = (0.3 * (n - n_test) as f64).round() as usize;
        split.test.extend_from_slice(&idx[..n_test]);
        split.val.extend_from_slice(&idx[n_test..n_test + n_val]);
        split.train.extend_from_slice(&idx[n_test + n_val..]);
    }
    split.train.sort_unstable();
    split.val.sort_unstable();
    split.test.sort_unstable();
    Ok(split)
}

/// Stratified fold assignment.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub k: usize,
    pub seed: u64,
    pub assignment: Vec<usize>,
}

impl FoldPlan {
    /// Shuffles each class, then deals examples round-robin, continuing the
    /// fold counter across classes so fold sizes differ by at most one.
    /// Requires `k ≤` minority count, except for leave-one-out (`k == n`).
    pub fn stratified(labels: &[u8], k: usize, seed: u64) -> Result<Self, EvalError> {
        let by_class = class_indices(labels)?;
        let minority = by_class[0].len().min(by_class[1].len());
        if k < 2 || (k > minority && k != labels.len()) {
            return Err(EvalError::Stratification { k, minority });
        }
        let mut rng = Rng::new(seed);
        let mut assignment = vec![0; labels.len()];
        let mut next = 0;
        for mut idx in by_class {
            rng.shuffle(&mut idx);
            for i in idx {
                assignment[i] = next % k;
                next += 1;
            }
        }
        Ok(Self {
            k,
            seed,
            assignment,
        })
    }

    /// (train, test) index lists for fold `j`.
    pub fn fold(&self, j: usize) -> (Vec<usize>, Vec<usize>) {
        (0..self.assignment.len()).partition(|&i| self.assignment[i] != j)
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &f in &self.assignment {
            sizes[f] += 1;
        }
        sizes
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub repeat: usize,
    pub fold: usize,
    pub confusion: ConfusionMatrix,
    pub metrics: MetricsReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    pub k: usize,
    pub repeats: usize,
    pub folds: Vec<FoldResult>,
    pub mean: MetricsReport,
    /// Sample standard deviation (n − 1); zero for a single fold.
    pub std: MetricsReport,
}

impl CvResult {
    pub fn from_folds(k: usize, repeats: usize, mut folds: Vec<FoldResult>) -> Self {
        folds.sort_by_key(|f| (f.repeat, f.fold));
        let n = folds.len() as f64;
        let mut mean = [0.0; 4];
        for f in &folds {
            for (m, v) in mean.iter_mut().zip(f.metrics.fields()) {
                *m += v / n;
            }
        }
        let mut var = [0.0; 4];
        if folds.len() > 1 {
            for f in &folds {
                for ((s, v), m) in var.iter_mut().zip(f.metrics.fields()).zip(mean) {
                    *s += (v - m).powi(2) / (n - 1.0);
                }
            }
        }
        Self {
            k,
            repeats,
            folds,
            mean: MetricsReport::from_fields(mean),
            std: MetricsReport::from_fields(var.map(f64::sqrt)),
        }
    }

    pub fn f1_scores(&self) -> Vec<f64> {
        self.folds.iter().map(|f| f.metrics.f1).collect()
    }

    pub fn accuracies(&self) -> Vec<f64> {
        self.folds.iter().map(|f| f.metrics.accuracy).collect()
    }
}

/// Fold plans for every repeat, seeded independently of any model.
pub fn fold_plans(labels: &[u8], k: usize, repeats: usize, seed: u64) -> Result<Vec<FoldPlan>, EvalError> {
    (0..repeats)
        .map(|r| FoldPlan::stratified(labels, k, derive_seed(seed, &format!("folds/{r}"))))
        .collect()
}

/// Repeated stratified k-fold cross-validation.
///
/// `fit_predict(repeat, fold, train, test)` returns predictions for `test`.
/// With `jobs > 1` folds run on a thread pool; results are keyed by
/// (repeat, fold) so the outcome does not depend on scheduling.
pub fn cross_validate<F, E>(
    labels: &[u8],
    k: usize,
    repeats: usize,
    seed: u64,
    jobs: usize,
    fit_predict: F,
) -> Result<CvResult, EvalError>
where
    F: Fn(usize, usize, &[usize], &[usize]) -> Result<Vec<u8>, E> + Sync,
    E: std::fmt::Display,
{
    let plans = fold_plans(labels, k, repeats, seed)?;
    cross_validate_with_plans(labels, &plans, jobs, fit_predict)
}

pub fn cross_validate_with_plans<F, E>(
    labels: &[u8],
    plans: &[FoldPlan],
    jobs: usize,
    fit_predict: F,
) -> Result<CvResult, EvalError>
where
    F: Fn(usize, usize, &[usize], &[usize]) -> Result<Vec<u8>, E> + Sync,
    E: std::fmt::Display,
{
    let k = plans.first().map(|p| p.k).unwrap_or(0);
    if plans.iter().any(|p| p.k != k || p.assignment.len() != labels.len()) {
        return Err(EvalError::Length(plans.len(), labels.len()));
    }
    let jobs_list: Vec<(usize, usize)> = (0..plans.len())
        .flat_map(|r| (0..k).map(move |j| (r, j)))
        .collect();
    let run = |&(r, j): &(usize, usize)| -> Result<FoldResult, EvalError> {
        let (train, test) = plans[r].fold(j);
        let preds = fit_predict(r, j, &train, &test).map_err(|e| EvalError::Trainer {
            repeat: r,
            fold: j,
            message: e.to_string(),
        })?;
        let truth: Vec<u8> = test.iter().map(|&i| labels[i]).collect();
        let cm = confusion(&preds, &truth)?;
        Ok(FoldResult {
            repeat: r,
            fold: j,
            confusion: cm,
            metrics: metrics(&cm),
        })
    };
    let folds: Vec<FoldResult> = if jobs > 1 {
        use rayon::prelude::*;
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .expect("thread pool");
        pool.install(|| jobs_list.par_iter().map(run).collect::<Result<_, _>>())?
    } else {
        jobs_list.iter().map(run).collect::<Result<_, _>>()?
    };
    Ok(CvResult::from_folds(k, plans.len(), folds))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum WilcoxonMethod {
    Exact,
    NormalApprox,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WilcoxonResult {
    /// min(W⁺, W⁻).
    pub statistic: f64,
    pub w_plus: f64,
    pub w_minus: f64,
    pub n_effective: usize,
    pub p_value: f64,
    pub method: WilcoxonMethod,
}

/// Largest sample size for which the exact null distribution is used.
pub const WILCOXON_EXACT_MAX: usize = 25;

/// Average ranks (1-based) of `values`, ties sharing the mean of their positions.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &o in &order[i..=j] {
            ranks[o] = rank;
        }
        i = j + 1;
    }
    ranks
}

/// Two-sided Wilcoxon signed-rank test on d = a − b. Zero differences are
/// dropped; ties get average ranks. Exact for n ≤ 25, otherwise a normal
/// approximation with tie-corrected variance and continuity correction.
pub fn wilcoxon_signed_rank(a: &[f64], b: &[f64]) -> Result<WilcoxonResult, EvalError> {
    if a.len() != b.len() {
        return Err(EvalError::Length(a.len(), b.len()));
    }
    if a.is_empty() {
        return Err(EvalError::Empty);
    }
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).filter(|d| *d != 0.0).collect();
    if diffs.is_empty() {
        return Err(EvalError::Degenerate);
    }
    let n = diffs.len();
    let abs: Vec<f64> = diffs.iter().map(|d| d.abs()).collect();
    let ranks = average_ranks(&abs);
    let w_plus: f64 = diffs.iter().zip(&ranks).filter(|(d, _)| **d > 0.0).map(|(_, r)| r).sum();
    let w_minus: f64 = diffs.iter().zip(&ranks).filter(|(d, _)| **d < 0.0).map(|(_, r)| r).sum();
    let statistic = w_plus.min(w_minus);
    let (p_value, method) = if n <= WILCOXON_EXACT_MAX {
        (exact_p(&ranks, statistic), WilcoxonMethod::Exact)
    } else {
        (normal_p(&abs, &ranks, statistic), WilcoxonMethod::NormalApprox)
    };
    Ok(WilcoxonResult {
        statistic,
        w_plus,
        w_minus,
        n_effective: n,
        p_value,
        method,
    })
}

/// Counts sign assignments by dynamic programming over doubled (integer) ranks;
/// gives the same distribution as enumerating all 2ⁿ patterns.
fn exact_p(ranks: &[f64], statistic: f64) -> f64 {
    let doubled: Vec<usize> = ranks.iter().map(|r| (2.0 * r).round() as usize).collect();
    let max_sum: usize = doubled.iter().sum();
    let mut counts = vec![0.0f64; max_sum + 1];
    counts[0] = 1.0;
    let mut reach = 0;
    for &r in &doubled {
        for s in (0..=reach).rev() {
            if counts[s] != 0.0 {
                counts[s + r] += counts[s];
            }
        }
        reach += r;
    }
    let target = (2.0 * statistic).round() as usize;
    let tail: f64 = counts[..=target.min(max_sum)].iter().sum();
    let total = 2f64.powi(ranks.len() as i32);
    (2.0 * tail / total).min(1.0)
}

fn normal_p(abs: &[f64], ranks: &[f64], statistic: f64) -> f64 {
    let n = ranks.len() as f64;
    let mean = n * (n + 1.0) / 4.0;
    let mut tie_term = 0.0;
    let mut sorted: Vec<f64> = abs.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i;
        while j + 1 < sorted.len() && sorted[j + 1] == sorted[i] {
            j += 1;
        }
        let t = (j - i + 1) as f64;
        tie_term += t * t * t - t;
        i = j + 1;
    }
    let var = n * (n + 1.0) * (2.0 * n + 1.0) / 24.0 - tie_term / 48.0;
    let z = ((statistic - mean).abs() - 0.5).max(0.0) / var.sqrt();
    libm::erfc(z / std::f64::consts::SQRT_2).clamp(f64::MIN_POSITIVE, 1.0)
}
