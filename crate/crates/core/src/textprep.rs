//! Text normalization, stop-word filtering, lemmatization and length fitting.

use std::collections::HashSet;
use std::io::BufRead;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Padding token appended to short sequences.
pub const PAD_TOKEN: &str = "<END>";
/// Default fitted sequence length.
pub const DEFAULT_MAX_LEN: usize = 100;
/// Posts with fewer tokens than this after preprocessing are not admitted to a corpus.
pub const MIN_POST_TOKENS: usize = 15;

#[derive(Debug, Error)]
pub enum PrepError {
    #[error("post has no tokens after preprocessing")]
    EmptyPost,
    #[error("sequence length must be positive")]
    ZeroLength,
    #[error("reading stop-word list: {0}")]
    Io(#[from] std::io::Error),
}

/// English stop words in normalized form (apostrophes already removed).
const BUILTIN_STOPWORDS: &[&str] = &[
    "i", "me", "my", "myself", "we", "our", "ours", "ourselves", "you", "youre", "youve", "youll",
    "youd", "your", "yours", "yourself", "yourselves", "he", "him", "his", "himself", "she",
    "shes", "her", "hers", "herself", "it", "its", "itself", "they", "them", "their", "theirs",
    "themselves", "what", "which", "who", "whom", "this", "that", "thatll", "these", "those", "am",
    "is", "are", "was", "were", "be", "been", "being", "have", "has", "had", "having", "do",
    "does", "did", "doing", "a", "an", "the", "and", "but", "if", "or", "because", "as", "until",
    "while", "of", "at", "by", "for", "with", "about", "against", "between", "into", "through",
    "during", "before", "after", "above", "below", "to", "from", "up", "down", "in", "out", "on",
    "off", "over", "under", "again", "further", "then", "once", "here", "there", "when", "where",
    "why", "how", "all", "any", "both", "each", "few", "more", "most", "other", "some", "such",
    "no", "nor", "not", "only", "own", "same", "so", "than", "too", "very", "s", "t", "can",
    "will", "just", "don", "dont", "should", "shouldve", "now", "d", "ll", "m", "o", "re", "ve",
    "y", "ain", "aren", "arent", "couldn", "couldnt", "didn", "didnt", "doesn", "doesnt", "hadn",
    "hadnt", "hasn", "hasnt", "haven", "havent", "isn", "isnt", "ma", "mightn", "mightnt",
    "mustn", "mustnt", "needn", "neednt", "shan", "shant", "shouldn", "shouldnt", "wasn",
    "wasnt", "weren", "werent", "won", "wont", "wouldn", "wouldnt",
];

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct StopWords(HashSet<String>);

impl StopWords {
    pub fn builtin() -> Self {
        Self(BUILTIN_STOPWORDS.iter().map(|s| s.to_string()).collect())
    }

    pub fn empty() -> Self {
        Self::default()
    }

    /// One token per line; blank lines ignored. Entries are normalized like post text.
    pub fn from_reader<R: BufRead>(reader: R) -> Result<Self, PrepError> {
        let mut set = HashSet::new();
        for line in reader.lines() {
            let word = normalize(&line?);
            if !word.is_empty() {
                set.insert(word);
            }
        }
        Ok(Self(set))
    }

    pub fn contains(&self, token: &str) -> bool {
        self.0.contains(token)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl<S: Into<String>> FromIterator<S> for StopWords {
    fn from_iter<I: IntoIterator<Item = S>>(iter: I) -> Self {
        Self(iter.into_iter().map(Into::into).collect())
    }
}

/// Lowercases, strips everything but letters, digits and whitespace, and collapses whitespace.
pub fn normalize(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut pending_space = false;
    for ch in text.chars() {
        if ch.is_whitespace() {
            pending_space = !out.is_empty();
        } else if ch.is_alphanumeric() {
            for lower in ch.to_lowercase().filter(|c| c.is_alphanumeric()) {
                if pending_space {
                    out.push(' ');
                    pending_space = false;
                }
                out.push(lower);
            }
        }
    }
    out
}

pub fn tokenize_filter(text: &str, stopwords: &StopWords) -> Vec<String> {
    text.split_whitespace()
        .filter(|t| !stopwords.contains(t))
        .map(str::to_owned)
        .collect()
}

pub trait Lemmatizer: Send + Sync {
    fn lemma(&self, token: &str) -> String;
}

/// Suffix-stripping lemmatizer. The longest matching suffix decides:
///
/// | suffix | replacement | condition |
/// |--------|-------------|-----------|
/// | `sses` | `ss` | |
/// | `ies`  | `y`  | |
/// | `ing`  | ``   | remaining stem has ≥ 3 chars |
/// | `ed`   | ``   | remaining stem has ≥ 3 chars |
/// | `s`    | ``   | not `ss` or `us`, stem nonempty |
#[derive(Debug, Clone, Copy, Default)]
pub struct SuffixLemmatizer;

impl Lemmatizer for SuffixLemmatizer {
    fn lemma(&self, token: &str) -> String {
        let stem_len = |suffix: &str| token.chars().count() - suffix.chars().count();
        if let Some(stem) = token.strip_suffix("sses") {
            return format!("{stem}ss");
        }
        if let Some(stem) = token.strip_suffix("ies") {
            return format!("{stem}y");
        }
        if let Some(stem) = token.strip_suffix("ing") {
            return if stem_len("ing") >= 3 { stem.to_owned() } else { token.to_owned() };
        }
        if let Some(stem) = token.strip_suffix("ed") {
            return if stem_len("ed") >= 3 { stem.to_owned() } else { token.to_owned() };
        }
        if let Some(stem) = token.strip_suffix('s') {
            if !stem.is_empty() && !token.ends_with("ss") && !token.ends_with("us") {
                return stem.to_owned();
            }
        }
        token.to_owned()
    }
}

pub fn lemmatize(tokens: &[String]) -> Vec<String> {
    tokens.iter().map(|t| SuffixLemmatizer.lemma(t)).collect()
}

/// A fixed-length token window with a validity mask.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenSeq {
    pub tokens: Vec<String>,
    pub mask: Vec<bool>,
    pub original_length: usize,
}

impl TokenSeq {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn valid_len(&self) -> usize {
        self.mask.iter().filter(|m| **m).count()
    }

    pub fn valid_tokens(&self) -> impl Iterator<Item = &str> {
        self.tokens
            .iter()
            .zip(&self.mask)
            .filter(|(_, m)| **m)
            .map(|(t, _)| t.as_str())
    }
}

/// Truncates to the first `max_len` tokens or pads with [`PAD_TOKEN`].
pub fn fit_length(tokens: &[String], max_len: usize) -> Result<TokenSeq, PrepError> {
    if max_len == 0 {
        return Err(PrepError::ZeroLength);
    }
    if tokens.is_empty() {
        return Err(PrepError::EmptyPost);
    }
    let keep = tokens.len().min(max_len);
    let mut out: Vec<String> = tokens[..keep].to_vec();
    let mut mask = vec![true; keep];
    out.resize(max_len, PAD_TOKEN.to_owned());
    mask.resize(max_len, false);
    Ok(TokenSeq {
        tokens: out,
        mask,
        original_length: tokens.len(),
    })
}

/// The full preprocessing chain: normalize, drop stop words, lemmatize, fit length.
pub struct Preprocessor {
    stopwords: StopWords,
    lemmatizer: Box<dyn Lemmatizer>,
    max_len: usize,
}

impl std::fmt::Debug for Preprocessor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Preprocessor")
            .field("stopwords", &self.stopwords.len())
            .field("max_len", &self.max_len)
            .finish()
    }
}

impl Default for Preprocessor {
    fn default() -> Self {
        Self::new(StopWords::builtin(), DEFAULT_MAX_LEN)
    }
}

impl Preprocessor {
    pub fn new(stopwords: StopWords, max_len: usize) -> Self {
        Self {
            stopwords,
            lemmatizer: Box::new(SuffixLemmatizer),
            max_len,
        }
    }

    pub fn with_lemmatizer(mut self, lemmatizer: Box<dyn Lemmatizer>) -> Self {
        self.lemmatizer = lemmatizer;
        self
    }

    pub fn max_len(&self) -> usize {
        self.max_len
    }

    pub fn stopwords(&self) -> &StopWords {
        &self.stopwords
    }

    /// Normalized tokens with stop words removed, before lemmatization.
    pub fn surface_tokens(&self, text: &str) -> Vec<String> {
        tokenize_filter(&normalize(text), &self.stopwords)
    }

    /// Lemmatized tokens of unbounded length.
    pub fn tokens(&self, text: &str) -> Vec<String> {
        self.surface_tokens(text)
            .iter()
            .map(|t| self.lemmatizer.lemma(t))
            .collect()
    }

    pub fn process(&self, text: &str) -> Result<TokenSeq, PrepError> {
        fit_length(&self.tokens(text), self.max_len)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn toks(s: &[&str]) -> Vec<String> {
        s.iter().map(|t| t.to_string()).collect()
    }

    #[test]
    fn normalize_examples() {
        assert_eq!(normalize("I've got Weed!!"), "ive got weed");
        assert_eq!(normalize(""), "");
        assert_eq!(normalize("600 mg… PRETTY often"), "600 mg pretty often");
        assert_eq!(normalize("  a\t\n b  "), "a b");
        assert_eq!(normalize("!!! ..."), "");
    }

    #[test]
    fn filter_examples() {
        let sw: StopWords = ["i", "like"].into_iter().collect();
        assert_eq!(tokenize_filter("i feel like opiates", &sw), toks(&["feel", "opiates"]));
        let the: StopWords = ["the"].into_iter().collect();
        assert!(tokenize_filter("the the the", &the).is_empty());
        assert_eq!(
            tokenize_filter("black tar heroin", &StopWords::empty()),
            toks(&["black", "tar", "heroin"])
        );
    }

    #[test]
    fn lemma_rules() {
        assert_eq!(lemmatize(&toks(&["opiates"])), toks(&["opiate"]));
        assert_eq!(lemmatize(&toks(&["dose"])), toks(&["dose"]));
        assert_eq!(
            lemmatize(&toks(&["addiction", "feelings"])),
            toks(&["addiction", "feeling"])
        );
        let cases = [
            ("pharmacies", "pharmacy"),
            ("classes", "class"),
            ("glass", "glass"),
            ("opium", "opium"),
            ("virus", "virus"),
            ("craving", "crav"),
            ("sing", "sing"),
            ("used", "used"),
            ("relapsed", "relaps"),
            ("s", "s"),
        ];
        for (input, want) in cases {
            assert_eq!(SuffixLemmatizer.lemma(input), want, "{input}");
        }
    }

    #[test]
    fn fit_length_examples() {
        let long: Vec<String> = (0..120).map(|i| format!("w{i}")).collect();
        let seq = fit_length(&long, 100).unwrap();
        assert_eq!(seq.tokens, long[..100].to_vec());
        assert_eq!(seq.original_length, 120);
        assert!(seq.mask.iter().all(|m| *m));

        let seq = fit_length(&toks(&["a", "b", "c"]), 5).unwrap();
        assert_eq!(seq.tokens, toks(&["a", "b", "c", "<END>", "<END>"]));
        assert_eq!(seq.mask, vec![true, true, true, false, false]);
        assert_eq!(seq.original_length, 3);

        assert!(matches!(fit_length(&[], 100), Err(PrepError::EmptyPost)));
        assert!(matches!(fit_length(&toks(&["a"]), 0), Err(PrepError::ZeroLength)));
    }

    #[test]
    fn pipeline_filters_then_lemmatizes() {
        let pre = Preprocessor::new(StopWords::builtin(), 8);
        let seq = pre.process("I've been taking Opiates, and the cravings are BAD.").unwrap();
        assert_eq!(
            seq.valid_tokens().collect::<Vec<_>>(),
            vec!["ive", "tak", "opiate", "craving", "bad"]
        );
        assert_eq!(seq.len(), 8);
    }

    #[test]
    fn stopword_file_is_normalized() {
        let sw = StopWords::from_reader("The\n\nDon't\n  like \n".as_bytes()).unwrap();
        assert!(sw.contains("the") && sw.contains("dont") && sw.contains("like"));
        assert_eq!(sw.len(), 3);
    }

    proptest! {
        #[test]
        fn normalize_is_idempotent(s in "\\PC{0,60}") {
            let once = normalize(&s);
            prop_assert_eq!(normalize(&once), once);
        }

        #[test]
        fn fit_length_shape(n in 1usize..60, t in 1usize..50) {
            let tokens: Vec<String> = (0..n).map(|i| format!("t{i}")).collect();
            let seq = fit_length(&tokens, t).unwrap();
            prop_assert_eq!(seq.tokens.len(), t);
            prop_assert_eq!(seq.valid_len(), n.min(t));
            for (tok, m) in seq.tokens.iter().zip(&seq.mask) {
                if !*m { prop_assert_eq!(tok.as_str(), PAD_TOKEN); }
            }
        }

        #[test]
        fn filtered_tokens_exclude_stopwords(words in proptest::collection::vec("[a-e]{1,2}", 0..20)) {
            let sw: StopWords = ["a", "bb", "cd"].into_iter().collect();
            let out = tokenize_filter(&words.join(" "), &sw);
            prop_assert!(out.iter().all(|t| !sw.contains(t)));
        }
    }
}
