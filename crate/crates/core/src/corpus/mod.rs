//! Labeled corpus files (JSON Lines), the keyword/slang lexicon and a
//! deterministic synthetic corpus generator.

use std::collections::{BTreeMap, HashSet};
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numkit::{derive_seed, Rng};
use crate::textprep::{Preprocessor, MIN_POST_TOKENS};

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("corpus io: {0}")]
    Io(#[from] io::Error),
    #[error("line {line}: malformed record: {message}")]
    Malformed { line: usize, message: String },
    #[error("line {line}: duplicate id {id:?}")]
    DuplicateId { line: usize, id: String },
    #[error("line {line}: label {label} is not 0 or 1 (filter multi-class labels to binary first)")]
    Label { line: usize, label: i64 },
    #[error("invalid synthetic spec: {0}")]
    Spec(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawPost {
    pub id: String,
    pub text: String,
    pub label: u8,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Corpus {
    pub posts: Vec<RawPost>,
    /// Ids of posts dropped for having fewer than the minimum number of tokens.
    pub skipped_short: Vec<String>,
}

impl Corpus {
    pub fn len(&self) -> usize {
        self.posts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.posts.is_empty()
    }

    /// [negatives, positives].
    pub fn class_counts(&self) -> [usize; 2] {
        let pos = self.posts.iter().filter(|p| p.label == 1).count();
        [self.posts.len() - pos, pos]
    }

    pub fn labels(&self) -> Vec<u8> {
        self.posts.iter().map(|p| p.label).collect()
    }
}

#[derive(Deserialize)]
struct Record {
    id: String,
    text: String,
    label: i64,
}

/// Reads JSON Lines records `{"id": .., "text": .., "label": 0|1}`.
/// Blank lines are ignored; posts with fewer than 15 tokens after
/// preprocessing are skipped and listed in `skipped_short`.
pub fn read_corpus<R: BufRead>(reader: R, prep: &Preprocessor) -> Result<Corpus, CorpusError> {
    let mut corpus = Corpus::default();
    let mut seen = HashSet::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: Record = serde_json::from_str(&line).map_err(|e| CorpusError::Malformed {
            line: line_no,
            message: e.to_string(),
        })?;
        if !seen.insert(rec.id.clone()) {
            return Err(CorpusError::DuplicateId {
                line: line_no,
                id: rec.id,
            });
        }
        let label = match rec.label {
            0 | 1 => rec.label as u8,
            other => {
                return Err(CorpusError::Label {
                    line: line_no,
                    label: other,
                })
            }
        };
        if prep.surface_tokens(&rec.text).len() < MIN_POST_TOKENS {
            corpus.skipped_short.push(rec.id);
            continue;
        }
        corpus.posts.push(RawPost {
            id: rec.id,
            text: rec.text,
            label,
        });
    }
    Ok(corpus)
}

pub fn load_corpus(path: &Path, prep: &Preprocessor) -> Result<Corpus, CorpusError> {
    read_corpus(BufReader::new(File::open(path)?), prep)
}

pub fn write_corpus<W: Write>(posts: &[RawPost], mut writer: W) -> Result<(), CorpusError> {
    for p in posts {
        serde_json::to_writer(&mut writer, p).map_err(io::Error::from)?;
        writer.write_all(b"\n")?;
    }
    writer.flush()?;
    Ok(())
}

pub fn save_corpus(posts: &[RawPost], path: &Path) -> Result<(), CorpusError> {
    write_corpus(posts, BufWriter::new(File::create(path)?))
}

/// Opioid keywords and street-slang terms, each with a reference occurrence
/// weight used when planting words into synthetic posts.
#[derive(Debug, Clone, PartialEq)]
pub struct Lexicon {
    pub keywords: Vec<(String, u32)>,
    pub slang: Vec<(String, u32)>,
}

const KEYWORDS: &[(&str, u32)] = &[("opiates", 766), ("opiate", 447), ("opioid", 265), ("opium", 97)];
const SLANG: &[(&str, u32)] = &[
    ("black", 522),
    ("dreams", 150),
    ("chocolate", 60),
    ("china", 46),
    ("gum", 27),
    ("toys", 26),
    ("incense", 4),
    ("pox", 4),
    ("hops", 3),
    ("cruz", 3),
    ("auntie", 2),
    ("hocus", 1),
];

impl Default for Lexicon {
    fn default() -> Self {
        let own = |xs: &[(&str, u32)]| xs.iter().map(|(w, c)| (w.to_string(), *c)).collect();
        Self {
            keywords: own(KEYWORDS),
            slang: own(SLANG),
        }
    }
}

impl Lexicon {
    pub fn words(&self) -> impl Iterator<Item = &str> {
        self.keywords.iter().chain(&self.slang).map(|(w, _)| w.as_str())
    }

    pub fn contains(&self, word: &str) -> bool {
        self.words().any(|w| w == word)
    }

    /// Lexicon words as they appear after preprocessing.
    pub fn lemmas(&self, prep: &Preprocessor) -> Vec<String> {
        let mut out: Vec<String> = self.words().flat_map(|w| prep.tokens(w)).collect();
        out.sort();
        out.dedup();
        out
    }

    fn weighted(&self) -> Vec<(&str, u32)> {
        self.keywords
            .iter()
            .chain(&self.slang)
            .map(|(w, c)| (w.as_str(), (*c).max(1)))
            .collect()
    }
}

/// Occurrences of each lexicon word across the posts, counted on normalized,
/// stop-word-filtered tokens before lemmatization so inflected keywords stay distinct.
pub fn lexicon_stats(posts: &[RawPost], lexicon: &Lexicon, prep: &Preprocessor) -> BTreeMap<String, usize> {
    let mut counts: BTreeMap<String, usize> = lexicon.words().map(|w| (w.to_owned(), 0)).collect();
    for p in posts {
        for tok in prep.surface_tokens(&p.text) {
            if let Some(c) = counts.get_mut(&tok) {
                *c += 1;
            }
        }
    }
    counts
}

/// Words associated with drug use that are not lexicon entries; they raise the
/// base rate of positive posts without planting a lexicon word.
pub const CONTEXT_WORDS: &[&str] = &[
    "dose", "tolerance", "withdrawal", "relapse", "detox", "sober", "craving", "rehab",
    "methadone", "overdose", "addict", "needle",
];

const FILLER: &str = include_str!("filler.txt");

pub fn filler_words() -> Vec<&'static str> {
    FILLER.lines().filter(|l| !l.is_empty()).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthSpec {
    pub n_posts: usize,
    /// Fraction of posts labeled positive before noise.
    pub positive_rate: f64,
    /// Probability that a positive post contains a lexicon word.
    pub theta: f64,
    /// Fraction of each class whose label is flipped.
    pub noise: f64,
    /// Per-token probability of a context word in positive posts; negatives use a twentieth of it.
    pub context_rate: f64,
    pub min_len: usize,
    pub max_len: usize,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            n_posts: 400,
            positive_rate: 0.5,
            theta: 0.9,
            noise: 0.05,
            context_rate: 0.12,
            min_len: 60,
            max_len: 100,
            seed: 7,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<(), CorpusError> {
        for (name, p) in [
            ("positive_rate", self.positive_rate),
            ("theta", self.theta),
            ("noise", self.noise),
            ("context_rate", self.context_rate),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(CorpusError::Spec(format!("{name} = {p} is not a probability")));
            }
        }
        if self.n_posts < 4 {
            return Err(CorpusError::Spec(format!("n_posts = {} (need at least 4)", self.n_posts)));
        }
        if self.min_len < MIN_POST_TOKENS || self.min_len > self.max_len {
            return Err(CorpusError::Spec(format!(
                "post length range {}..={} must start at {} or more",
                self.min_len, self.max_len, MIN_POST_TOKENS
            )));
        }
        Ok(())
    }
}

fn weighted_pick<'a>(rng: &mut Rng, items: &[(&'a str, u32)]) -> &'a str {
    let total: usize = items.iter().map(|(_, w)| *w as usize).sum();
    let mut r = rng.below(total);
    for (w, c) in items {
        if r < *c as usize {
            return w;
        }
        r -= *c as usize;
    }
    items[items.len() - 1].0
}

/// Generates a corpus of filler words drawn with Zipf frequencies, where positive posts carry a lexicon word with
/// probability θ, negatives with probability (1 − θ)·0.2, and exactly
/// round(noise·n_c) labels of each class are flipped.
pub fn synth_corpus(spec: &SynthSpec, lexicon: &Lexicon) -> Result<Corpus, CorpusError> {
    spec.validate()?;
    let filler = filler_words();
    // Zipf weights 1/rank over the filler list.
    let zipf: Vec<f64> = (1..=filler.len())
        .scan(0.0, |acc, r| {
            *acc += 1.0 / r as f64;
            Some(*acc)
        })
        .collect();
    let zipf_total = zipf[zipf.len() - 1];
    let lex = lexicon.weighted();
    let mut rng = Rng::new(derive_seed(spec.seed, "synth"));
    let n_pos = (spec.positive_rate * spec.n_posts as f64).round() as usize;
    let mut labels: Vec<u8> = (0..spec.n_posts).map(|i| u8::from(i < n_pos)).collect();
    rng.shuffle(&mut labels);

    let mut posts = Vec::with_capacity(spec.n_posts);
    for (i, &y) in labels.iter().enumerate() {
        let len = spec.min_len + rng.below(spec.max_len - spec.min_len + 1);
        let ctx_rate = if y == 1 { spec.context_rate } else { spec.context_rate / 20.0 };
        let mut words: Vec<&str> = (0..len)
            .map(|_| {
                if rng.bernoulli(ctx_rate) {
                    CONTEXT_WORDS[rng.below(CONTEXT_WORDS.len())]
                } else {
                    let u = rng.next_f64() * zipf_total;
                    filler[zipf.partition_point(|&c| c <= u).min(filler.len() - 1)]
                }
            })
            .collect();
        let plant = if y == 1 {
            rng.bernoulli(spec.theta).then(|| 1 + rng.below(2))
        } else {
            rng.bernoulli((1.0 - spec.theta) * 0.2).then_some(1)
        };
        for _ in 0..plant.unwrap_or(0) {
            let pos = rng.below(len);
            words[pos] = weighted_pick(&mut rng, &lex);
        }
        let mut text = words.join(" ");
        text.push('.');
        posts.push(RawPost {
            id: format!("synth-{i:05}"),
            text,
            label: y,
        });
    }

    let mut noise_rng = Rng::new(derive_seed(spec.seed, "synth/noise"));
    let mut flipped = Vec::new();
    for class in [0u8, 1] {
        let mut idx: Vec<usize> = (0..posts.len()).filter(|&i| posts[i].label == class).collect();
        let flips = (spec.noise * idx.len() as f64).round() as usize;
        noise_rng.shuffle(&mut idx);
        flipped.extend_from_slice(&idx[..flips]);
    }
    for i in flipped {
        posts[i].label = 1 - posts[i].label;
    }
    Ok(Corpus {
        posts,
        skipped_short: Vec::new(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::textprep::{lemmatize, StopWords};

    fn prep() -> Preprocessor {
        Preprocessor::default()
    }

    fn long_text(extra: &str) -> String {
        format!("{extra} {}", filler_words()[..20].join(" "))
    }

    #[test]
    fn filler_is_clean() {
        let f = filler_words();
        assert_eq!(f.len(), 500);
        let set: HashSet<_> = f.iter().collect();
        assert_eq!(set.len(), f.len());
        let sw = StopWords::builtin();
        let lex = Lexicon::default();
        let lex_lemmas = lex.lemmas(&prep());
        for w in &f {
            assert!(!sw.contains(w), "{w}");
            assert!(!lex.contains(w) && !CONTEXT_WORDS.contains(w), "{w}");
            let lemma = &lemmatize(&[w.to_string()])[0];
            assert_eq!(lemma, w);
            assert!(!lex_lemmas.contains(lemma));
        }
    }

    #[test]
    fn lexicon_shape() {
        let lex = Lexicon::default();
        assert_eq!(lex.keywords.len(), 4);
        assert_eq!(lex.slang.len(), 12);
        let k: HashSet<_> = lex.keywords.iter().map(|(w, _)| w).collect();
        assert!(lex.slang.iter().all(|(w, _)| !k.contains(w)));
    }

    #[test]
    fn loads_valid_and_skips_short() {
        let data = format!(
            "{}\n\n{}\n",
            serde_json::json!({"id": "a", "text": long_text("opiates"), "label": 1}),
            serde_json::json!({"id": "b", "text": "too short", "label": 0}),
        );
        let c = read_corpus(data.as_bytes(), &prep()).unwrap();
        assert_eq!(c.len(), 1);
        assert_eq!(c.skipped_short, vec!["b".to_owned()]);
        assert_eq!(c.class_counts(), [0, 1]);
    }

    #[test]
    fn load_errors() {
        let p = prep();
        let dup = format!(
            "{0}\n{0}\n",
            serde_json::json!({"id": "x", "text": long_text(""), "label": 1})
        );
        match read_corpus(dup.as_bytes(), &p) {
            Err(CorpusError::DuplicateId { line: 2, id }) => assert_eq!(id, "x"),
            other => panic!("{other:?}"),
        }
        let bad = r#"{"id": "x", "text": "t", "label": 3}"#;
        assert!(matches!(
            read_corpus(bad.as_bytes(), &p),
            Err(CorpusError::Label { line: 1, label: 3 })
        ));
        let broken = "{\"id\": \"ok\", \"text\": \"t\", \"label\": 0}\n{nope";
        assert!(matches!(
            read_corpus(broken.as_bytes(), &p),
            Err(CorpusError::Malformed { line: 2, .. })
        ));
    }

    #[test]
    fn write_then_load_roundtrip() {
        let c = synth_corpus(&SynthSpec { n_posts: 30, ..SynthSpec::default() }, &Lexicon::default()).unwrap();
        let mut buf = Vec::new();
        write_corpus(&c.posts, &mut buf).unwrap();
        let back = read_corpus(buf.as_slice(), &prep()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn synth_properties() {
        let lex = Lexicon::default();
        let spec = SynthSpec {
            theta: 1.0,
            noise: 0.0,
            ..SynthSpec::default()
        };
        let c = synth_corpus(&spec, &lex).unwrap();
        assert_eq!(c.class_counts(), [200, 200]);
        for p in c.posts.iter().filter(|p| p.label == 1) {
            assert!(p.text.trim_end_matches('.').split(' ').any(|w| lex.contains(w)));
        }
        let noisy = synth_corpus(&SynthSpec::default(), &lex).unwrap();
        assert_eq!(noisy.class_counts(), [200, 200]);
        let mut a = Vec::new();
        let mut b = Vec::new();
        write_corpus(&noisy.posts, &mut a).unwrap();
        write_corpus(&synth_corpus(&SynthSpec::default(), &lex).unwrap().posts, &mut b).unwrap();
        assert_eq!(a, b);
        assert!(synth_corpus(&SynthSpec { theta: 1.5, ..spec.clone() }, &lex).is_err());
        assert!(synth_corpus(&SynthSpec { n_posts: 3, ..spec }, &lex).is_err());
    }

    #[test]
    fn stats_count_occurrences() {
        let lex = Lexicon::default();
        let post = RawPost {
            id: "1".into(),
            text: "opiate opiate black".into(),
            label: 1,
        };
        let s = lexicon_stats(&[post.clone()], &lex, &prep());
        assert_eq!(s["opiate"], 2);
        assert_eq!(s["black"], 1);
        assert_eq!(s["opiates"], 0);
        assert!(lexicon_stats(&[], &lex, &prep()).values().all(|&c| c == 0));
        let other = RawPost {
            id: "2".into(),
            text: "Opiates, black!".into(),
            label: 0,
        };
        assert_eq!(
            lexicon_stats(&[post.clone(), other.clone()], &lex, &prep()),
            lexicon_stats(&[other, post], &lex, &prep())
        );
    }
}
