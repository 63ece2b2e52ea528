//! Vocabulary construction, GloVe-format vector parsing and embedding tables.

use std::collections::HashMap;
use std::io::BufRead;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numkit::{stable_hash, Matrix, Rng};
use crate::textprep::{TokenSeq, PAD_TOKEN};

pub const UNK_TOKEN: &str = "<UNK>";
pub const PAD_INDEX: usize = 0;
pub const UNK_INDEX: usize = 1;

#[derive(Debug, Error)]
pub enum VocabError {
    #[error("cannot build a vocabulary from an empty corpus")]
    EmptyCorpus,
    #[error("embedding file line {line}: {message}")]
    Format { line: usize, message: String },
    #[error("reading embedding file: {0}")]
    Io(#[from] std::io::Error),
    #[error("embedding mode {0:?} requires pretrained vectors")]
    MissingPretrained(EmbeddingMode),
    #[error("dimension mismatch: expected {expected}, got {found}")]
    Dimension { expected: usize, found: usize },
    #[error("invalid vocabulary: {0}")]
    Invalid(String),
}

/// Token ↔ index bijection. Index 0 is `<END>`, index 1 is `<UNK>`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<String>", into = "Vec<String>")]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocabulary {
    pub fn from_tokens(tokens: Vec<String>) -> Result<Self, VocabError> {
        if tokens.get(PAD_INDEX).map(String::as_str) != Some(PAD_TOKEN)
            || tokens.get(UNK_INDEX).map(String::as_str) != Some(UNK_TOKEN)
        {
            return Err(VocabError::Invalid(
                "reserved tokens must occupy indices 0 and 1".into(),
            ));
        }
        let mut index = HashMap::with_capacity(tokens.len());
        for (i, t) in tokens.iter().enumerate() {
            if index.insert(t.clone(), i).is_some() {
                return Err(VocabError::Invalid(format!("duplicate token {t:?}")));
            }
        }
        Ok(Self { tokens, index })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn get(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    /// Index of `token`, falling back to `<UNK>`.
    pub fn index_of(&self, token: &str) -> usize {
        self.get(token).unwrap_or(UNK_INDEX)
    }

    pub fn token(&self, index: usize) -> Option<&str> {
        self.tokens.get(index).map(String::as_str)
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    /// Token ids for a fitted sequence. Padding positions map to `<END>`.
    pub fn encode(&self, seq: &TokenSeq) -> Vec<usize> {
        seq.tokens
            .iter()
            .zip(&seq.mask)
            .map(|(t, &m)| if m { self.index_of(t) } else { PAD_INDEX })
            .collect()
    }
}

impl TryFrom<Vec<String>> for Vocabulary {
    type Error = VocabError;

    fn try_from(tokens: Vec<String>) -> Result<Self, Self::Error> {
        Self::from_tokens(tokens)
    }
}

impl From<Vocabulary> for Vec<String> {
    fn from(v: Vocabulary) -> Self {
        v.tokens
    }
}

/// Counts valid tokens across the corpus and keeps those seen at least `min_count` times.
/// Order: reserved tokens, then descending frequency, ties lexicographic.
pub fn build_vocab(corpus: &[TokenSeq], min_count: usize) -> Result<Vocabulary, VocabError> {
    if corpus.is_empty() {
        return Err(VocabError::EmptyCorpus);
    }
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for seq in corpus {
        for tok in seq.valid_tokens() {
            *counts.entry(tok).or_default() += 1;
        }
    }
    let mut kept: Vec<(&str, usize)> = counts
        .into_iter()
        .filter(|(t, c)| *c >= min_count && *t != PAD_TOKEN && *t != UNK_TOKEN)
        .collect();
    kept.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    let mut tokens = vec![PAD_TOKEN.to_owned(), UNK_TOKEN.to_owned()];
    tokens.extend(kept.into_iter().map(|(t, _)| t.to_owned()));
    Vocabulary::from_tokens(tokens)
}

/// Vectors loaded from a GloVe-style text file.
#[derive(Debug, Clone, PartialEq)]
pub struct PretrainedVectors {
    dim: usize,
    vectors: HashMap<String, Vec<f64>>,
}

impl PretrainedVectors {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            vectors: HashMap::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn get(&self, token: &str) -> Option<&[f64]> {
        self.vectors.get(token).map(Vec::as_slice)
    }

    /// Inserts unless already present; returns whether it was inserted.
    pub fn insert(&mut self, token: String, vector: Vec<f64>) -> Result<bool, VocabError> {
        if vector.len() != self.dim {
            return Err(VocabError::Dimension {
                expected: self.dim,
                found: vector.len(),
            });
        }
        if self.vectors.contains_key(&token) {
            return Ok(false);
        }
        self.vectors.insert(token, vector);
        Ok(true)
    }
}

/// Parses `token v1 v2 ... vd` lines. Blank lines are skipped; the first occurrence
/// of a duplicated token wins.
pub fn parse_embedding_file<R: BufRead>(
    reader: R,
    expected_dim: usize,
) -> Result<PretrainedVectors, VocabError> {
    let mut out = PretrainedVectors::new(expected_dim);
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let mut parts = line.split(' ').filter(|p| !p.is_empty());
        let token = parts.next().unwrap_or_default().to_owned();
        let mut vector = Vec::with_capacity(expected_dim);
        for p in parts {
            let v: f64 = p.parse().map_err(|_| VocabError::Format {
                line: line_no,
                message: format!("unparsable number {p:?}"),
            })?;
            if !v.is_finite() {
                return Err(VocabError::Format {
                    line: line_no,
                    message: format!("non-finite number {p:?}"),
                });
            }
            vector.push(v);
        }
        if vector.len() != expected_dim {
            return Err(VocabError::Format {
                line: line_no,
                message: format!("expected {expected_dim} values, found {}", vector.len()),
            });
        }
        out.insert(token, vector)?;
    }
    Ok(out)
}

/// How the embedding matrix is initialized and whether it is trained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EmbeddingMode {
    /// Random initialization, updated during training.
    RandomTrainable,
    /// Pretrained vectors kept constant.
    PretrainedFrozen,
    /// Pretrained vectors used as the starting point and updated.
    PretrainedTrainable,
}

impl EmbeddingMode {
    pub fn trainable(self) -> bool {
        self != EmbeddingMode::PretrainedFrozen
    }

    pub fn needs_pretrained(self) -> bool {
        self != EmbeddingMode::RandomTrainable
    }
}

/// The d×v embedding matrix; column `j` embeds vocabulary entry `j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingTable {
    pub matrix: Matrix,
    pub mode: EmbeddingMode,
}

impl EmbeddingTable {
    pub fn dim(&self) -> usize {
        self.matrix.rows()
    }

    pub fn vocab_size(&self) -> usize {
        self.matrix.cols()
    }

    pub fn trainable(&self) -> bool {
        self.mode.trainable()
    }

    pub fn column(&self, index: usize) -> Vec<f64> {
        self.matrix.column(index)
    }
}

fn oov_vector(token: &str, dim: usize) -> Vec<f64> {
    let bound = 0.5 / dim as f64;
    let mut rng = Rng::new(stable_hash(token));
    (0..dim).map(|_| rng.uniform(-bound, bound)).collect()
}

pub fn init_embeddings(
    vocab: &Vocabulary,
    mode: EmbeddingMode,
    dim: usize,
    pretrained: Option<&PretrainedVectors>,
    rng: &mut Rng,
) -> Result<EmbeddingTable, VocabError> {
    if dim == 0 {
        return Err(VocabError::Dimension {
            expected: 1,
            found: 0,
        });
    }
    let mut matrix = Matrix::zeros(dim, vocab.len());
    match mode {
        EmbeddingMode::RandomTrainable => {
            let bound = 0.5 / dim as f64;
            for j in 0..vocab.len() {
                let col: Vec<f64> = (0..dim).map(|_| rng.uniform(-bound, bound)).collect();
                if j != PAD_INDEX {
                    matrix.set_column(j, &col);
                }
            }
        }
        EmbeddingMode::PretrainedFrozen | EmbeddingMode::PretrainedTrainable => {
            let pre = pretrained.ok_or(VocabError::MissingPretrained(mode))?;
            if pre.dim() != dim {
                return Err(VocabError::Dimension {
                    expected: dim,
                    found: pre.dim(),
                });
            }
            for (j, tok) in vocab.tokens().iter().enumerate().skip(PAD_INDEX + 1) {
                match pre.get(tok) {
                    Some(v) => matrix.set_column(j, v),
                    None => matrix.set_column(j, &oov_vector(tok, dim)),
                }
            }
        }
    }
    Ok(EmbeddingTable { matrix, mode })
}

/// Gathers embedding columns for each position; unknown tokens use `<UNK>`.
pub fn lookup(table: &EmbeddingTable, seq: &TokenSeq, vocab: &Vocabulary) -> Matrix {
    let ids = vocab.encode(seq);
    let mut out = Matrix::zeros(table.dim(), ids.len());
    for (t, &id) in ids.iter().enumerate() {
        out.set_column(t, &table.column(id));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::textprep::fit_length;

    fn seq(words: &str, t: usize) -> TokenSeq {
        let toks: Vec<String> = words.split_whitespace().map(str::to_owned).collect();
        fit_length(&toks, t).unwrap()
    }

    #[test]
    fn vocab_order_and_pruning() {
        let corpus = vec![seq("a b", 4), seq("b c", 4)];
        let v = build_vocab(&corpus, 1).unwrap();
        assert_eq!(v.tokens(), &["<END>", "<UNK>", "b", "a", "c"]);
        let v2 = build_vocab(&corpus, 2).unwrap();
        assert_eq!(v2.tokens(), &["<END>", "<UNK>", "b"]);
        assert!(matches!(build_vocab(&[], 1), Err(VocabError::EmptyCorpus)));
    }

    #[test]
    fn vocab_json_roundtrip_validates() {
        let v = build_vocab(&[seq("x y y", 5)], 1).unwrap();
        let json = serde_json::to_string(&v).unwrap();
        assert_eq!(serde_json::from_str::<Vocabulary>(&json).unwrap(), v);
        assert!(serde_json::from_str::<Vocabulary>(r#"["a","<UNK>"]"#).is_err());
    }

    #[test]
    fn parse_lines() {
        let p = parse_embedding_file("hello 0.1 -0.2 0.3\n".as_bytes(), 3).unwrap();
        assert_eq!(p.get("hello").unwrap(), &[0.1, -0.2, 0.3]);

        match parse_embedding_file("hello 0.1\n".as_bytes(), 3) {
            Err(VocabError::Format { line, .. }) => assert_eq!(line, 1),
            other => panic!("unexpected {other:?}"),
        }
        match parse_embedding_file("a 1 2\nb 1 x\n".as_bytes(), 2) {
            Err(VocabError::Format { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
        let dup = parse_embedding_file("hello 1 2\nhello 3 4\n".as_bytes(), 2).unwrap();
        assert_eq!(dup.get("hello").unwrap(), &[1.0, 2.0]);
        assert_eq!(dup.len(), 1);
    }

    fn pretrained() -> PretrainedVectors {
        parse_embedding_file("opiate 0.5 0.25 -1\ndose 1 2 3\n".as_bytes(), 3).unwrap()
    }

    #[test]
    fn pretrained_columns_copied_and_pad_zero() {
        let vocab = build_vocab(&[seq("opiate dose milk", 5)], 1).unwrap();
        let pre = pretrained();
        for mode in [EmbeddingMode::PretrainedFrozen, EmbeddingMode::PretrainedTrainable] {
            let table = init_embeddings(&vocab, mode, 3, Some(&pre), &mut Rng::new(1)).unwrap();
            assert_eq!(table.column(vocab.get("opiate").unwrap()), vec![0.5, 0.25, -1.0]);
            assert_eq!(table.column(PAD_INDEX), vec![0.0; 3]);
            let milk = table.column(vocab.get("milk").unwrap());
            assert!(milk.iter().all(|x| x.abs() <= 0.5 / 3.0));
            assert_eq!(milk, oov_vector("milk", 3));
        }
        let random =
            init_embeddings(&vocab, EmbeddingMode::RandomTrainable, 3, None, &mut Rng::new(1))
                .unwrap();
        assert_eq!(random.column(PAD_INDEX), vec![0.0; 3]);
        assert!(random.trainable());
    }

    #[test]
    fn init_errors_and_determinism() {
        let vocab = build_vocab(&[seq("opiate dose", 5)], 1).unwrap();
        assert!(matches!(
            init_embeddings(&vocab, EmbeddingMode::PretrainedFrozen, 3, None, &mut Rng::new(1)),
            Err(VocabError::MissingPretrained(_))
        ));
        assert!(matches!(
            init_embeddings(
                &vocab,
                EmbeddingMode::PretrainedTrainable,
                4,
                Some(&pretrained()),
                &mut Rng::new(1)
            ),
            Err(VocabError::Dimension { .. })
        ));
        let a = init_embeddings(&vocab, EmbeddingMode::RandomTrainable, 6, None, &mut Rng::new(5))
            .unwrap();
        let b = init_embeddings(&vocab, EmbeddingMode::RandomTrainable, 6, None, &mut Rng::new(5))
            .unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn lookup_gathers_columns() {
        let vocab = build_vocab(&[seq("opiate dose", 5)], 1).unwrap();
        let table =
            init_embeddings(&vocab, EmbeddingMode::RandomTrainable, 4, None, &mut Rng::new(2))
                .unwrap();
        let s = seq("dose heroin", 100);
        let x = lookup(&table, &s, &vocab);
        assert_eq!(x.shape(), (4, 100));
        assert_eq!(x.column(0), table.column(vocab.get("dose").unwrap()));
        assert_eq!(x.column(1), table.column(UNK_INDEX));
        for t in 2..100 {
            assert_eq!(x.column(t), table.column(PAD_INDEX));
        }
    }
}
