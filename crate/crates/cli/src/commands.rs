use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;

use attblstm::baselines::BaselineKind;
use attblstm::corpus::{lexicon_stats, load_corpus, save_corpus, synth_corpus, Corpus, Lexicon, SynthSpec};
use attblstm::evalstat::{confusion, metrics, split_train_val_test, MetricsReport, Split};
use attblstm::explain::{explain_posts, ExplanationExport};
use attblstm::model::{Checkpoint, EpochRecord};
use attblstm::numkit::derive_seed;
use attblstm::pipeline::{compare_models, fit_neural, Comparison, ModelSpec, Prepared};
use attblstm::textprep::{Preprocessor, StopWords};
use attblstm::vocab::{parse_embedding_file, PretrainedVectors};
use attblstm::{ModelConfig, Variant};

use crate::args::{
    Axis, Cli, Command, CompareArgs, DataArgs, ExplainArgs, ModelArgs, StatsArgs, SweepArgs,
    SynthArgs, TrainArgs,
};
use crate::error::CliError;

/// Dimensions for which pretrained vector files are distributed.
const PRETRAINED_DIMS: [usize; 4] = [50, 100, 200, 300];

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Train(a) => cmd_train(a),
        Command::Compare(a) => cmd_compare(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Explain(a) => cmd_explain(a),
        Command::Synth(a) => cmd_synth(a),
        Command::Stats(a) => cmd_stats(a),
    }
}

fn unix_time() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

fn preprocessor(data: &DataArgs, max_len: usize) -> Result<Preprocessor, CliError> {
    let stopwords = match &data.stopwords {
        Some(p) => StopWords::from_reader(BufReader::new(File::open(p)?))
            .map_err(|e| CliError::data(format!("{}: {e}", p.display())))?,
        None => StopWords::builtin(),
    };
    Ok(Preprocessor::new(stopwords, max_len))
}

fn load(data: &DataArgs, prep: &Preprocessor) -> Result<Corpus, CliError> {
    let corpus = load_corpus(&data.corpus, prep)
        .map_err(|e| CliError::from(e).context(&data.corpus))?;
    if !corpus.skipped_short.is_empty() {
        eprintln!(
            "warning: skipped {} posts shorter than the minimum length",
            corpus.skipped_short.len()
        );
    }
    Ok(corpus)
}

impl CliError {
    fn context(self, path: &Path) -> Self {
        match self {
            CliError::Data(m) => CliError::Data(format!("{}: {m}", path.display())),
            other => other,
        }
    }
}

/// Defaults, then the JSON config file, then explicit flags.
fn model_config(args: &ModelArgs) -> Result<ModelConfig, CliError> {
    let mut cfg = match &args.config {
        Some(p) => {
            let text = fs::read_to_string(p)?;
            serde_json::from_str(&text)
                .map_err(|e| CliError::usage(format!("{}: {e}", p.display())))?
        }
        None => ModelConfig::default(),
    };
    if let Some(v) = args.dim {
        cfg.embed_dim = v;
    }
    if let Some(v) = args.hidden {
        cfg.hidden = v;
    }
    if let Some(v) = args.max_len {
        cfg.max_len = v;
    }
    if let Some(v) = args.epochs {
        cfg.epochs = v;
    }
    if let Some(v) = args.variant {
        cfg.variant = v.into();
    }
    if args.no_attention {
        cfg.use_attention = false;
    }
    if let Some(v) = args.learning_rate {
        cfg.learning_rate = v;
    }
    if let Some(v) = args.batch_size {
        cfg.batch_size = v;
    }
    if args.clip_norm.is_some() {
        cfg.clip_norm = args.clip_norm;
    }
    if let Some(v) = args.seed {
        cfg.seed = v;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn embedding_path(template: &str, dim: usize) -> PathBuf {
    PathBuf::from(template.replace("{dim}", &dim.to_string()))
}

/// Loads pretrained vectors when a file is given; pretrained variants require one.
fn pretrained_for(
    args: &ModelArgs,
    variants: &[Variant],
    dim: usize,
) -> Result<Option<PretrainedVectors>, CliError> {
    let needs = variants.iter().any(|v| v.embedding_mode().needs_pretrained());
    let Some(template) = &args.embeddings else {
        if needs {
            return Err(CliError::usage(
                "variants m2 and m3 need --embeddings PATH (pretrained vectors)",
            ));
        }
        return Ok(None);
    };
    if !PRETRAINED_DIMS.contains(&dim) {
        return Err(CliError::usage(format!(
            "--dim {dim} is not one of 50, 100, 200, 300 required with --embeddings"
        )));
    }
    let path = embedding_path(template, dim);
    let file = File::open(&path).map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
    let vectors = parse_embedding_file(BufReader::new(file), dim)
        .map_err(|e| CliError::from(e).context(&path))?;
    Ok(Some(vectors))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, serde_json::to_string_pretty(value)?)?;
    Ok(())
}

#[derive(Serialize)]
struct RunEcho<'a> {
    command: &'a str,
    corpus: &'a Path,
    embeddings: Option<&'a str>,
    stopwords: Option<&'a Path>,
    model: &'a ModelConfig,
}

#[derive(Serialize)]
struct SplitSizes {
    train: usize,
    val: usize,
    test: usize,
}

#[derive(Serialize)]
struct TrainReportFile<'a> {
    config: RunEcho<'a>,
    created_unix: u64,
    model: String,
    split: SplitSizes,
    epochs: &'a [EpochRecord],
    test: MetricsReport,
}

struct TrainOutcome {
    checkpoint: Checkpoint,
    epochs: Vec<EpochRecord>,
    test: MetricsReport,
    split: Split,
}

fn train_once(
    data: &Prepared,
    cfg: &ModelConfig,
    pretrained: Option<&PretrainedVectors>,
) -> Result<TrainOutcome, CliError> {
    let split = split_train_val_test(&data.labels, derive_seed(cfg.seed, "split"))?;
    let fitted = fit_neural(data, cfg, &split.train, &split.val, pretrained)?;
    let preds = split
        .test
        .iter()
        .map(|&i| fitted.model.predict_seq(&data.seqs[i], &fitted.vocab, 0.5))
        .collect::<Result<Vec<u8>, _>>()?;
    let truth: Vec<u8> = split.test.iter().map(|&i| data.labels[i]).collect();
    let test = metrics(&confusion(&preds, &truth)?);
    Ok(TrainOutcome {
        checkpoint: Checkpoint::new(fitted.model, fitted.vocab),
        epochs: fitted.report.epochs,
        test,
        split,
    })
}

fn loss_csv(epochs: &[EpochRecord]) -> String {
    attblstm::model::TrainReport {
        epochs: epochs.to_vec(),
    }
    .to_csv()
}

fn cmd_train(a: TrainArgs) -> Result<(), CliError> {
    let cfg = model_config(&a.model)?;
    let pretrained = pretrained_for(&a.model, &[cfg.variant], cfg.embed_dim)?;
    let prep = preprocessor(&a.data, cfg.max_len)?;
    let corpus = load(&a.data, &prep)?;
    let data = Prepared::from_corpus(&corpus, &prep)?;
    let out = train_once(&data, &cfg, pretrained.as_ref())?;

    fs::create_dir_all(&a.out)?;
    out.checkpoint.save(&a.out.join("checkpoint.json"))?;
    fs::write(a.out.join("loss_curve.csv"), loss_csv(&out.epochs))?;
    let report = TrainReportFile {
        config: RunEcho {
            command: "train",
            corpus: &a.data.corpus,
            embeddings: a.model.embeddings.as_deref(),
            stopwords: a.data.stopwords.as_deref(),
            model: &cfg,
        },
        created_unix: unix_time(),
        model: cfg.name(),
        split: SplitSizes {
            train: out.split.train.len(),
            val: out.split.val.len(),
            test: out.split.test.len(),
        },
        epochs: &out.epochs,
        test: out.test,
    };
    write_json(&a.out.join("train_report.json"), &report)?;
    println!(
        "{}: test accuracy {:.4}, F1 {:.4}; wrote {}",
        cfg.name(),
        out.test.accuracy,
        out.test.f1,
        a.out.display()
    );
    Ok(())
}

/// Parses names like `att-m1`, `blstm-m3` or `all`.
fn neural_specs(names: &[String], base: &ModelConfig) -> Result<Vec<ModelSpec>, CliError> {
    let mut out = Vec::new();
    for name in names {
        let lower = name.trim().to_lowercase();
        if lower == "all" {
            out.extend(ModelSpec::neural_grid(base));
            continue;
        }
        let (attn, variant) = lower
            .strip_prefix("att-blstm-")
            .or_else(|| lower.strip_prefix("att-"))
            .map(|v| (true, v))
            .or_else(|| lower.strip_prefix("blstm-").map(|v| (false, v)))
            .ok_or_else(|| CliError::usage(format!("unknown model {name:?} (expected att-mK or blstm-mK)")))?;
        let variant: Variant = variant
            .parse()
            .map_err(|_| CliError::usage(format!("unknown variant in {name:?}")))?;
        out.push(ModelSpec::Neural {
            config: ModelConfig {
                variant,
                use_attention: attn,
                ..base.clone()
            },
        });
    }
    Ok(out)
}

#[derive(Serialize)]
struct CompareEcho<'a> {
    #[serde(flatten)]
    run: RunEcho<'a>,
    models: &'a [String],
    baselines: &'a [String],
    k: usize,
    repeats: usize,
    seed: u64,
}

#[derive(Serialize)]
struct CompareReportFile<'a> {
    config: CompareEcho<'a>,
    created_unix: u64,
    #[serde(flatten)]
    comparison: &'a Comparison,
}

fn cmd_compare(a: CompareArgs) -> Result<(), CliError> {
    let base = model_config(&a.model)?;
    let mut specs = neural_specs(&a.models, &base)?;
    for b in &a.baselines {
        let kind: BaselineKind = b
            .parse()
            .map_err(|_| CliError::usage(format!("unknown baseline {b:?} (expected logreg, nb or svm)")))?;
        specs.push(ModelSpec::Baseline { baseline: kind });
    }
    if specs.len() < 2 {
        return Err(CliError::usage("compare needs at least two models (--models, --baselines)"));
    }
    let variants: Vec<Variant> = specs
        .iter()
        .filter_map(|s| match s {
            ModelSpec::Neural { config } => Some(config.variant),
            ModelSpec::Baseline { .. } => None,
        })
        .collect();
    let pretrained = pretrained_for(&a.model, &variants, base.embed_dim)?;
    let prep = preprocessor(&a.data, base.max_len)?;
    let corpus = load(&a.data, &prep)?;
    let data = Prepared::from_corpus(&corpus, &prep)?;
    let cmp = compare_models(
        &data,
        &specs,
        a.k,
        a.repeats,
        base.seed,
        pretrained.as_ref(),
        a.jobs.max(1),
    )?;
    let report = CompareReportFile {
        config: CompareEcho {
            run: RunEcho {
                command: "compare",
                corpus: &a.data.corpus,
                embeddings: a.model.embeddings.as_deref(),
                stopwords: a.data.stopwords.as_deref(),
                model: &base,
            },
            models: &a.models,
            baselines: &a.baselines,
            k: a.k,
            repeats: a.repeats,
            seed: base.seed,
        },
        created_unix: unix_time(),
        comparison: &cmp,
    };
    write_json(&a.out.join("compare_report.json"), &report)?;
    for m in &cmp.models {
        println!(
            "{:<20} F1 {:.4} ± {:.4}  accuracy {:.4} ± {:.4}",
            m.name, m.cv.mean.f1, m.cv.std.f1, m.cv.mean.accuracy, m.cv.std.accuracy
        );
    }
    for p in &cmp.pairwise {
        match &p.result {
            Some(r) => println!("{} vs {}: Wilcoxon p = {:.4}", p.a, p.b, r.p_value),
            None => println!("{} vs {}: no difference", p.a, p.b),
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct SweepRow {
    value: usize,
    test: MetricsReport,
    epochs: Vec<EpochRecord>,
}

#[derive(Serialize)]
struct SweepReportFile<'a> {
    config: RunEcho<'a>,
    axis: Axis,
    created_unix: u64,
    model: String,
    rows: Vec<SweepRow>,
}

fn cmd_sweep(a: SweepArgs) -> Result<(), CliError> {
    if a.values.is_empty() {
        return Err(CliError::usage("--values must list at least one value"));
    }
    let base = model_config(&a.model)?;
    let prep = preprocessor(&a.data, base.max_len)?;
    let corpus = load(&a.data, &prep)?;
    let data = Prepared::from_corpus(&corpus, &prep)?;
    let mut rows = Vec::with_capacity(a.values.len());
    for &value in &a.values {
        let cfg = match a.axis {
            Axis::Epochs => ModelConfig {
                epochs: value,
                ..base.clone()
            },
            Axis::Dimension => ModelConfig {
                embed_dim: value,
                ..base.clone()
            },
        };
        cfg.validate()?;
        let pretrained = pretrained_for(&a.model, &[cfg.variant], cfg.embed_dim)?;
        let out = train_once(&data, &cfg, pretrained.as_ref())?;
        println!("{:?}={value}: test F1 {:.4}", a.axis, out.test.f1);
        rows.push(SweepRow {
            value,
            test: out.test,
            epochs: out.epochs,
        });
    }
    let report = SweepReportFile {
        config: RunEcho {
            command: "sweep",
            corpus: &a.data.corpus,
            embeddings: a.model.embeddings.as_deref(),
            stopwords: a.data.stopwords.as_deref(),
            model: &base,
        },
        axis: a.axis,
        created_unix: unix_time(),
        model: base.name(),
        rows,
    };
    write_json(&a.out.join("sweep_report.json"), &report)
}

fn cmd_explain(a: ExplainArgs) -> Result<(), CliError> {
    let ck = Checkpoint::load(&a.checkpoint).map_err(|e| CliError::from(e).context(&a.checkpoint))?;
    if ck.model.attention.is_none() {
        return Err(CliError::usage(format!(
            "{} is a {} checkpoint: BLSTM variants have no attention layer",
            a.checkpoint.display(),
            ck.model.name()
        )));
    }
    let prep = preprocessor(&a.data, ck.model.config.max_len)?;
    let corpus = load(&a.data, &prep)?;
    let export: ExplanationExport = explain_posts(&ck.model, &ck.vocabulary, &prep, &corpus.posts, a.top_k)?;
    write_json(&a.out.join("explanations.json"), &export)?;
    let marked: String = export
        .highlights
        .iter()
        .map(|h| format!("{}\t{}\t{}\n", h.id, h.label, h.markup))
        .collect();
    fs::write(a.out.join("highlights.tsv"), marked)?;
    for w in export.dictionary.iter().take(10) {
        println!("{:<16} {}", w.word, w.count);
    }
    Ok(())
}

fn cmd_synth(a: SynthArgs) -> Result<(), CliError> {
    let defaults = SynthSpec::default();
    let spec = SynthSpec {
        n_posts: a.n_posts,
        theta: a.theta,
        noise: a.noise,
        positive_rate: a.positive_rate.unwrap_or(defaults.positive_rate),
        min_len: a.min_len.unwrap_or(defaults.min_len),
        max_len: a.max_len.unwrap_or(defaults.max_len),
        seed: a.seed,
        ..defaults
    };
    let corpus = synth_corpus(&spec, &Lexicon::default())?;
    if let Some(dir) = a.out.parent() {
        fs::create_dir_all(dir)?;
    }
    save_corpus(&corpus.posts, &a.out)?;
    let [neg, pos] = corpus.class_counts();
    println!("wrote {} posts ({pos} positive, {neg} negative) to {}", corpus.len(), a.out.display());
    Ok(())
}

#[derive(Serialize)]
struct StatsFile {
    posts: usize,
    skipped_short: usize,
    negatives: usize,
    positives: usize,
    lexicon: BTreeMap<String, usize>,
}

fn cmd_stats(a: StatsArgs) -> Result<(), CliError> {
    let prep = preprocessor(&a.data, attblstm::textprep::DEFAULT_MAX_LEN)?;
    let corpus = load(&a.data, &prep)?;
    let [negatives, positives] = corpus.class_counts();
    let stats = StatsFile {
        posts: corpus.len(),
        skipped_short: corpus.skipped_short.len(),
        negatives,
        positives,
        lexicon: lexicon_stats(&corpus.posts, &Lexicon::default(), &prep),
    };
    let json = serde_json::to_string_pretty(&stats)?;
    if let Some(out) = &a.out {
        write_json(out, &stats)?;
    }
    println!("{json}");
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn model_names_parse() {
        let base = ModelConfig::default();
        let specs = neural_specs(&["att-m1".into(), "BLSTM-M2".into(), "att-blstm-m3".into()], &base).unwrap();
        let names: Vec<String> = specs.iter().map(ModelSpec::name).collect();
        assert_eq!(names, ["Att-BLSTM-M1", "BLSTM-M2", "Att-BLSTM-M3"]);
        assert_eq!(neural_specs(&["all".into()], &base).unwrap().len(), 6);
        assert!(neural_specs(&["lstm-m1".into()], &base).is_err());
    }

    #[test]
    fn embedding_template_expands() {
        assert_eq!(embedding_path("glove.6B.{dim}d.txt", 100), PathBuf::from("glove.6B.100d.txt"));
        assert_eq!(embedding_path("vectors.txt", 50), PathBuf::from("vectors.txt"));
    }

    #[test]
    fn pretrained_rules() {
        let args = ModelArgs {
            config: None,
            embeddings: None,
            dim: None,
            hidden: None,
            max_len: None,
            epochs: None,
            variant: None,
            no_attention: false,
            learning_rate: None,
            batch_size: None,
            clip_norm: None,
            seed: None,
        };
        assert!(matches!(pretrained_for(&args, &[Variant::M2], 200), Err(CliError::Usage(_))));
        assert!(pretrained_for(&args, &[Variant::M1], 200).unwrap().is_none());
        let with = ModelArgs {
            embeddings: Some("missing.txt".into()),
            ..args
        };
        assert!(matches!(pretrained_for(&with, &[Variant::M2], 64), Err(CliError::Usage(_))));
        assert!(matches!(pretrained_for(&with, &[Variant::M2], 50), Err(CliError::Data(_))));
    }
}
