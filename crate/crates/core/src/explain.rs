//! Attention-based explanations: per-post top-k words, the aggregate
//! word-importance dictionary and highlighted token streams.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::RawPost;
use crate::model::{AttBlstmModel, ModelError};
use crate::textprep::{PrepError, Preprocessor, TokenSeq};
use crate::vocab::Vocabulary;

pub const DEFAULT_TOP_K: usize = 5;

#[derive(Debug, Error)]
pub enum ExplainError {
    #[error("report for {report:?} does not belong to post {post:?}")]
    Mismatch { post: String, report: String },
    #[error("attention has {alpha} weights for a sequence of length {seq}")]
    Length { alpha: usize, seq: usize },
    #[error("BLSTM variants have no attention layer")]
    NoAttention,
    #[error("post {id}: {source}")]
    Prep { id: String, source: PrepError },
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopWord {
    pub token: String,
    pub weight: f64,
    pub position: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttentionReport {
    pub doc_id: String,
    /// Valid tokens only.
    pub tokens: Vec<String>,
    /// Attention weights at the valid positions.
    pub weights: Vec<f64>,
    /// Highest weights first; ties go to the earlier position.
    pub top_k: Vec<TopWord>,
}

/// Picks the `k` highest-weight valid positions. Positions index into the full sequence.
pub fn top_k_words(
    doc_id: &str,
    seq: &TokenSeq,
    alpha: &[f64],
    k: usize,
) -> Result<AttentionReport, ExplainError> {
    if alpha.len() != seq.len() {
        return Err(ExplainError::Length {
            alpha: alpha.len(),
            seq: seq.len(),
        });
    }
    let valid: Vec<usize> = (0..seq.len()).filter(|&t| seq.mask[t]).collect();
    let mut ranked = valid.clone();
    ranked.sort_by(|&a, &b| alpha[b].total_cmp(&alpha[a]).then(a.cmp(&b)));
    ranked.truncate(k);
    Ok(AttentionReport {
        doc_id: doc_id.to_owned(),
        tokens: valid.iter().map(|&t| seq.tokens[t].clone()).collect(),
        weights: valid.iter().map(|&t| alpha[t]).collect(),
        top_k: ranked
            .into_iter()
            .map(|t| TopWord {
                token: seq.tokens[t].clone(),
                weight: alpha[t],
                position: t,
            })
            .collect(),
    })
}

/// Selection counts per word; a word chosen at two positions of one post counts twice.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct WordImportanceDict {
    pub counts: BTreeMap<String, usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WordCount {
    pub word: String,
    pub count: usize,
}

impl WordImportanceDict {
    pub fn get(&self, word: &str) -> usize {
        self.counts.get(word).copied().unwrap_or(0)
    }

    pub fn total(&self) -> usize {
        self.counts.values().sum()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    /// Count descending, then alphabetical.
    pub fn sorted(&self) -> Vec<WordCount> {
        let mut out: Vec<WordCount> = self
            .counts
            .iter()
            .map(|(w, &c)| WordCount {
                word: w.clone(),
                count: c,
            })
            .collect();
        out.sort_by(|a, b| b.count.cmp(&a.count).then_with(|| a.word.cmp(&b.word)));
        out
    }

    pub fn top(&self, n: usize) -> Vec<WordCount> {
        let mut s = self.sorted();
        s.truncate(n);
        s
    }
}

pub fn aggregate_dictionary(reports: &[AttentionReport]) -> WordImportanceDict {
    let mut dict = WordImportanceDict::default();
    for r in reports {
        for w in &r.top_k {
            *dict.counts.entry(w.token.clone()).or_default() += 1;
        }
    }
    dict
}

/// Renders the report's token stream with every selected position wrapped in `[[ ]]`.
pub fn highlight(post: &RawPost, report: &AttentionReport) -> Result<String, ExplainError> {
    if post.id != report.doc_id {
        return Err(ExplainError::Mismatch {
            post: post.id.clone(),
            report: report.doc_id.clone(),
        });
    }
    Ok(render_marked(report))
}

fn render_marked(report: &AttentionReport) -> String {
    let mut out = String::new();
    for (t, tok) in report.tokens.iter().enumerate() {
        if t > 0 {
            out.push(' ');
        }
        if report.top_k.iter().any(|w| w.position == t) {
            out.push_str("[[");
            out.push_str(tok);
            out.push_str("]]");
        } else {
            out.push_str(tok);
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Highlight {
    pub id: String,
    pub label: u8,
    pub markup: String,
}

/// The explanation export file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplanationExport {
    pub k: usize,
    pub reports: Vec<AttentionReport>,
    pub dictionary: Vec<WordCount>,
    pub highlights: Vec<Highlight>,
}

/// Runs the attention model over `posts` and collects reports, the dictionary and highlights.
pub fn explain_posts(
    model: &AttBlstmModel,
    vocab: &Vocabulary,
    prep: &Preprocessor,
    posts: &[RawPost],
    k: usize,
) -> Result<ExplanationExport, ExplainError> {
    if model.attention.is_none() {
        return Err(ExplainError::NoAttention);
    }
    let mut reports = Vec::with_capacity(posts.len());
    let mut highlights = Vec::with_capacity(posts.len());
    for post in posts {
        let seq = prep.process(&post.text).map_err(|source| ExplainError::Prep {
            id: post.id.clone(),
            source,
        })?;
        let fwd = model.forward_seq(&seq, vocab)?;
        let alpha = fwd.attention.ok_or(ExplainError::NoAttention)?;
        let report = top_k_words(&post.id, &seq, &alpha, k)?;
        highlights.push(Highlight {
            id: post.id.clone(),
            label: post.label,
            markup: highlight(post, &report)?,
        });
        reports.push(report);
    }
    let dictionary = aggregate_dictionary(&reports).sorted();
    Ok(ExplanationExport {
        k,
        reports,
        dictionary,
        highlights,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::textprep::fit_length;

    fn seq(words: &str, len: usize) -> TokenSeq {
        let t: Vec<String> = words.split(' ').map(str::to_owned).collect();
        fit_length(&t, len).unwrap()
    }

    fn post(id: &str) -> RawPost {
        RawPost {
            id: id.into(),
            text: String::new(),
            label: 1,
        }
    }

    #[test]
    fn one_hot_attention() {
        let s = seq("milk opiate tea", 5);
        let r = top_k_words("a", &s, &[0.0, 1.0, 0.0, 0.0, 0.0], 5).unwrap();
        assert_eq!(r.top_k[0].token, "opiate");
        assert_eq!(r.top_k[0].weight, 1.0);
        assert_eq!(r.top_k.len(), 3);
        assert_eq!(r.tokens.len(), 3);
        assert_eq!(r.weights, vec![0.0, 1.0, 0.0]);
    }

    #[test]
    fn sorted_by_weight_with_position_ties() {
        let s = seq("opiate dose milk", 3);
        let r = top_k_words("a", &s, &[0.5, 0.3, 0.2], 5).unwrap();
        let order: Vec<&str> = r.top_k.iter().map(|w| w.token.as_str()).collect();
        assert_eq!(order, ["opiate", "dose", "milk"]);
        let tied = top_k_words("a", &seq("x y z w", 4), &[0.25; 4], 2).unwrap();
        assert_eq!(tied.top_k.iter().map(|w| w.position).collect::<Vec<_>>(), [0, 1]);
        assert!(top_k_words("a", &s, &[1.0], 1).is_err());
    }

    #[test]
    fn dictionary_counts_per_position() {
        let s = seq("black black milk", 3);
        let r1 = top_k_words("a", &s, &[0.4, 0.4, 0.2], 2).unwrap();
        let r2 = top_k_words("b", &seq("black tea", 2), &[0.9, 0.1], 1).unwrap();
        let d = aggregate_dictionary(&[r1.clone(), r2]);
        assert_eq!(d.get("black"), 3);
        assert_eq!(d.total(), 3);
        assert!(aggregate_dictionary(&[]).is_empty());
        let d2 = aggregate_dictionary(&[r1]);
        assert_eq!(d2.total(), 2);
    }

    #[test]
    fn dictionary_sorted_desc() {
        let mut d = WordImportanceDict::default();
        d.counts.insert("b".into(), 1);
        d.counts.insert("a".into(), 1);
        d.counts.insert("c".into(), 4);
        let words: Vec<String> = d.sorted().into_iter().map(|w| w.word).collect();
        assert_eq!(words, ["c", "a", "b"]);
    }

    #[test]
    fn highlight_markup() {
        let s = seq("feel sick need some opiate today", 6);
        let mut alpha = vec![0.0; 6];
        alpha[4] = 1.0;
        let r = top_k_words("p", &s, &alpha, 1).unwrap();
        assert_eq!(
            highlight(&post("p"), &r).unwrap(),
            "feel sick need some [[opiate]] today"
        );
        let none = top_k_words("p", &s, &alpha, 0).unwrap();
        assert!(!highlight(&post("p"), &none).unwrap().contains("[["));
        assert!(matches!(highlight(&post("q"), &r), Err(ExplainError::Mismatch { .. })));
        let twice = top_k_words("p", &seq("black milk black", 3), &[0.4, 0.2, 0.4], 2).unwrap();
        assert_eq!(highlight(&post("p"), &twice).unwrap(), "[[black]] milk [[black]]");
    }
}
