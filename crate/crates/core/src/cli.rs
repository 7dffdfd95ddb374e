//! Command-line interface.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{ArgAction, Args, Parser, Subcommand};
use serde::ser::SerializeMap;
use serde::{Deserialize, Serialize, Serializer};

use crate::cognition::{annotate, CognitionModel, FeaturizerMode, SvrHyper};
use crate::convnet::RegularizerConfig;
use crate::corpus::{
    dataset_stats, load_dataset, record_to_json, LabelSpace, LabeledDataset, Schema, SummaryRow, DEFAULT_EMOTIONS,
    DEFAULT_FACTORS,
};
use crate::error::{Error, Result};
use crate::metrics::EvalMode;
use crate::partition::{categorize_unchecked, fit_thresholds, validate_categories};
use crate::pipeline::{cross_validate, train_pipeline, PipelineConfig, ResourceManifest, TrainedPipeline};
use crate::resources::{PosTagset, Resources};

pub const EXIT_OK: i32 = 0;
pub const EXIT_RUNTIME: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "cogemo", version, about = "Cognition-aware emotion recognition for short texts")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct GlobalArgs {
    /// Base random seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Training epochs per classifier [default: 50].
    #[arg(long, global = true)]
    epochs: Option<usize>,
    /// Mini-batch size [default: 128].
    #[arg(long = "batch-size", global = true)]
    batch_size: Option<usize>,
    /// Adam learning rate [default: 1e-6].
    #[arg(long, global = true)]
    lr: Option<f64>,
    /// Expected embedding width; checked against the embedding file [default: 200].
    #[arg(long = "embedding-dim", global = true)]
    embedding_dim: Option<usize>,
    /// Weight regularizer: nsw:ALPHA,BETA,LAMBDA | dropconnect:N | none [default: nsw:1.5,1,0].
    #[arg(long, global = true)]
    dropout: Option<RegularizerConfig>,
    /// Comma-separated factor names.
    #[arg(long, global = true, value_delimiter = ',')]
    factors: Option<Vec<String>>,
    /// Comma-separated emotion names.
    #[arg(long, global = true, value_delimiter = ',')]
    emotions: Option<Vec<String>>,
    /// JSON file with settings; command-line flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// More log output (repeat for debug).
    #[arg(short, long, global = true, action = ArgAction::Count)]
    verbose: u8,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train factor regressors and write inferred factor scores into an emotion corpus.
    AnnotateCognitive {
        /// Corpus with factor scores used to train the regressors.
        #[arg(long)]
        personality: PathBuf,
        /// Emotion corpus to annotate.
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        embeddings: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit factor thresholds and report the resulting categories.
    Partition {
        /// Corpus with factor scores used to fit thresholds.
        #[arg(long)]
        personality: PathBuf,
        /// Annotated corpus to split; defaults to the threshold corpus.
        #[arg(long)]
        data: Option<PathBuf>,
        /// Write the JSON report here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train regressors and the classifier ensemble into a model directory.
    Train {
        #[arg(long)]
        personality: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        embeddings: PathBuf,
        /// Emotion lexicon file (repeatable).
        #[arg(long = "lexicon", required = true)]
        lexicons: Vec<PathBuf>,
        /// File with one POS tag per line.
        #[arg(long)]
        tagset: Option<PathBuf>,
        #[arg(long)]
        model: PathBuf,
    },
    /// Predict emotions for JSONL texts.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        input: PathBuf,
        /// Output file; stdout when omitted.
        #[arg(long)]
        output: Option<PathBuf>,
        /// Emit one emotion per text.
        #[arg(long)]
        multiclass: bool,
        #[command(flatten)]
        resources: ResourceOverride,
    },
    /// Score a trained model, or cross-validate the pipeline when no model is given.
    Evaluate {
        /// Labelled corpus.
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        model: Option<PathBuf>,
        /// Separate factor corpus for cross-validation.
        #[arg(long)]
        personality: Option<PathBuf>,
        /// Number of folds for cross-validation.
        #[arg(long, default_value_t = 10)]
        folds: usize,
        #[arg(long)]
        multiclass: bool,
        /// Write the JSON report here.
        #[arg(long)]
        report: Option<PathBuf>,
        #[command(flatten)]
        resources: ResourceOverride,
    },
    /// Summary statistics of a corpus.
    Stats {
        #[arg(long)]
        data: PathBuf,
        /// Print JSON instead of a table.
        #[arg(long)]
        json: bool,
    },
}

#[derive(Debug, Args)]
struct ResourceOverride {
    /// Embedding file (defaults to the one recorded in the model).
    #[arg(long)]
    embeddings: Option<PathBuf>,
    /// Lexicon file, repeatable (defaults to those recorded in the model).
    #[arg(long = "lexicon")]
    lexicons: Vec<PathBuf>,
    #[arg(long)]
    tagset: Option<PathBuf>,
}

/// Settings accepted by `--config`.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    seed: Option<u64>,
    epochs: Option<usize>,
    batch_size: Option<usize>,
    lr: Option<f64>,
    embedding_dim: Option<usize>,
    dropout: Option<String>,
    factors: Option<Vec<String>>,
    emotions: Option<Vec<String>>,
    windows: Option<Vec<usize>>,
    filters: Option<usize>,
    hidden: Option<Vec<usize>>,
    attention_hidden: Option<usize>,
    min_category_size: Option<usize>,
    featurizer: Option<FeaturizerMode>,
    svr: Option<SvrHyper>,
}

struct Settings {
    pipeline: PipelineConfig,
    labels: LabelSpace,
    embedding_dim: Option<usize>,
    seed: u64,
}

fn resolve(g: &GlobalArgs) -> Result<Settings> {
    let file: FileConfig = match &g.config {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
            serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", p.display())))?
        }
        None => FileConfig::default(),
    };
    let mut pipeline = PipelineConfig::default();
    let net = &mut pipeline.ensemble.network;
    let seed = g.seed.or(file.seed).unwrap_or(0);
    net.seed = seed;
    if let Some(v) = g.epochs.or(file.epochs) {
        net.epochs = v;
    }
    if let Some(v) = g.batch_size.or(file.batch_size) {
        net.batch_size = v;
    }
    if let Some(v) = g.lr.or(file.lr) {
        net.learning_rate = v;
    }
    match (&g.dropout, &file.dropout) {
        (Some(r), _) => net.regularizer = *r,
        (None, Some(s)) => net.regularizer = s.parse()?,
        (None, None) => {}
    }
    if let Some(v) = file.windows {
        net.windows = v;
    }
    if let Some(v) = file.filters {
        net.n_filters = v;
    }
    if let Some(v) = file.hidden {
        net.hidden = v;
    }
    if let Some(v) = file.attention_hidden {
        net.attention_hidden = v;
    }
    if let Some(v) = file.min_category_size {
        pipeline.ensemble.min_category_size = v;
    }
    if let Some(v) = file.featurizer {
        pipeline.featurizer = v;
    }
    if let Some(v) = file.svr {
        pipeline.svr = v;
    }
    pipeline.svr.seed = seed;
    let names = |flag: &Option<Vec<String>>, file: Option<Vec<String>>, default: &[&str]| -> Vec<String> {
        flag.clone()
            .or(file)
            .unwrap_or_else(|| default.iter().map(|s| s.to_string()).collect())
    };
    let labels = LabelSpace::new(
        names(&g.emotions, file.emotions, &DEFAULT_EMOTIONS),
        names(&g.factors, file.factors, &DEFAULT_FACTORS),
    );
    Ok(Settings {
        pipeline,
        labels,
        embedding_dim: g.embedding_dim.or(file.embedding_dim),
        seed,
    })
}

fn load_tagset(path: Option<&Path>) -> Result<PosTagset> {
    match path {
        None => Ok(PosTagset::default()),
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
            PosTagset::new(
                text.lines()
                    .map(str::trim)
                    .filter(|l| !l.is_empty())
                    .map(String::from)
                    .collect(),
            )
        }
    }
}

fn check_dim(resources: &Resources<f64>, expected: Option<usize>) -> Result<()> {
    match expected {
        Some(d) if d != resources.dim() => Err(Error::Config(format!(
            "embeddings are {}-dimensional, --embedding-dim asks for {d}",
            resources.dim()
        ))),
        _ => Ok(()),
    }
}

fn load_resources(
    embeddings: &Path,
    lexicons: &[PathBuf],
    tagset: PosTagset,
    expected_dim: Option<usize>,
) -> Result<(Resources<f64>, ResourceManifest)> {
    let res = Resources::load(embeddings, lexicons, tagset)?;
    check_dim(&res, expected_dim)?;
    let manifest = ResourceManifest {
        embeddings: absolute(embeddings),
        lexicons: lexicons.iter().map(|p| absolute(p)).collect(),
        tagset: res.tagset.tags().to_vec(),
        fingerprints: res.fingerprints.clone(),
    };
    Ok((res, manifest))
}

fn absolute(p: &Path) -> PathBuf {
    fs::canonicalize(p).unwrap_or_else(|_| p.to_path_buf())
}

/// Resources for a saved model: recorded paths unless overridden, with
/// content digests checked against those recorded at training time.
fn model_resources(model: &Path, over: &ResourceOverride, expected_dim: Option<usize>) -> Result<Resources<f64>> {
    let recorded = ResourceManifest::load(model)?;
    let embeddings = over.embeddings.clone().unwrap_or(recorded.embeddings.clone());
    let lexicons = if over.lexicons.is_empty() {
        recorded.lexicons.clone()
    } else {
        over.lexicons.clone()
    };
    let tagset = match &over.tagset {
        Some(p) => load_tagset(Some(p))?,
        None => PosTagset::new(recorded.tagset.clone())?,
    };
    let (res, manifest) = load_resources(&embeddings, &lexicons, tagset, expected_dim)?;
    if manifest.fingerprints != recorded.fingerprints {
        return Err(Error::Config(
            "embedding or lexicon files differ from those the model was trained with".into(),
        ));
    }
    Ok(res)
}

fn write_output(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text).map_err(|e| Error::io(p, e)),
        None => {
            let mut out = io::stdout().lock();
            out.write_all(text.as_bytes())
                .and_then(|_| out.flush())
                .map_err(|e| Error::io(Path::new("<stdout>"), e))
        }
    }
}

struct Ordered<'a, V>(Vec<(&'a str, V)>);

impl<V: Serialize> Serialize for Ordered<'_, V> {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut map = s.serialize_map(Some(self.0.len()))?;
        for (k, v) in &self.0 {
            map.serialize_entry(k, v)?;
        }
        map.end()
    }
}

#[derive(Serialize)]
struct LabelLine<'a> {
    id: &'a str,
    emotions: Ordered<'a, u8>,
}

#[derive(Serialize)]
struct ClassLine<'a> {
    id: &'a str,
    emotion: &'a str,
}

fn stats_table(rows: &[SummaryRow]) -> String {
    let mut out = format!(
        "{:<12} {:>7} {:>8} {:>8} {:>8} {:>8} {:>8}\n",
        "name", "count", "max", "min", "mean", "std", "median"
    );
    for r in rows {
        out.push_str(&format!(
            "{:<12} {:>7} {:>8.3} {:>8.3} {:>8.3} {:>8.3} {:>8.3}\n",
            r.name, r.count, r.max, r.min, r.mean, r.std, r.median
        ));
    }
    out
}

#[derive(Serialize)]
struct PartitionReport<'a> {
    factors: &'a [String],
    thresholds: Vec<f64>,
    categories: Vec<CategorySummary>,
    lemmas: crate::partition::LemmaReport,
}

#[derive(Serialize)]
struct CategorySummary {
    index: usize,
    factor: String,
    side: crate::partition::Side,
    size: usize,
}

fn execute(cli: Cli) -> Result<()> {
    let settings = resolve(&cli.global)?;
    let labels = &settings.labels;
    match cli.command {
        Command::AnnotateCognitive {
            personality,
            data,
            embeddings,
            out,
        } => {
            let dp = load_dataset(&personality, Schema::Cognitive, labels)?;
            let de = load_dataset(&data, Schema::Text, labels)?;
            let (res, _) = load_resources(&embeddings, &[], PosTagset::default(), settings.embedding_dim)?;
            let model = CognitionModel::train(&dp, &res.embeddings, settings.pipeline.featurizer, settings.pipeline.svr)?;
            let annotated = annotate(&de, &model, &res.embeddings)?;
            let text: String = annotated
                .records
                .iter()
                .map(|r| record_to_json(r, &annotated.labels).map(|l| l + "\n"))
                .collect::<Result<_>>()?;
            fs::write(&out, text).map_err(|e| Error::io(&out, e))
        }
        Command::Partition { personality, data, out } => {
            let dp = load_dataset(&personality, Schema::Cognitive, labels)?;
            let alphas = fit_thresholds::<f64>(&dp, None)?;
            let target = match data {
                Some(p) => load_dataset(&p, Schema::Cognitive, labels)?,
                None => dp,
            };
            let cognitive: Vec<_> = target.records.iter().filter_map(|r| r.cognitive.clone()).collect();
            let cats = categorize_unchecked(&cognitive, &alphas)?;
            let lemmas = validate_categories(&cats, &cognitive, &alphas);
            let report = PartitionReport {
                factors: &labels.factors,
                thresholds: alphas.alphas.clone(),
                categories: cats
                    .iter()
                    .map(|c| CategorySummary {
                        index: c.index,
                        factor: labels.factors[c.factor].clone(),
                        side: c.side,
                        size: c.len(),
                    })
                    .collect(),
                lemmas,
            };
            write_output(out.as_deref(), &(serde_json::to_string_pretty(&report)? + "\n"))
        }
        Command::Train {
            personality,
            data,
            embeddings,
            lexicons,
            tagset,
            model,
        } => {
            let dp = load_dataset(&personality, Schema::Cognitive, labels)?;
            let de = load_dataset(&data, Schema::Emotion, labels)?;
            let tags = load_tagset(tagset.as_deref())?;
            let (res, manifest) = load_resources(&embeddings, &lexicons, tags, settings.embedding_dim)?;
            let trained = train_pipeline(&dp, &de, &res, &settings.pipeline)?;
            trained.save(&model)?;
            manifest.save(&model)
        }
        Command::Predict {
            model,
            input,
            output,
            multiclass,
            resources,
        } => {
            let pipeline = TrainedPipeline::<f64>::load(&model)?;
            let res = model_resources(&model, &resources, settings.embedding_dim)?;
            let model_labels = LabelSpace::new(pipeline.ensemble.emotions.clone(), pipeline.ensemble.factors.clone());
            let ds = load_dataset(&input, Schema::Text, &model_labels)?;
            let emotions = &pipeline.ensemble.emotions;
            let mut text = String::new();
            if multiclass {
                for (r, c) in ds.records.iter().zip(pipeline.predict_multiclass_dataset(&ds, &res)?) {
                    let line = ClassLine {
                        id: &r.text.id,
                        emotion: &emotions[c],
                    };
                    text.push_str(&(serde_json::to_string(&line)? + "\n"));
                }
            } else {
                for (r, v) in ds.records.iter().zip(pipeline.predict_dataset(&ds, &res)?) {
                    let line = LabelLine {
                        id: &r.text.id,
                        emotions: Ordered(emotions.iter().map(String::as_str).zip(v.as_bits()).collect()),
                    };
                    text.push_str(&(serde_json::to_string(&line)? + "\n"));
                }
            }
            write_output(output.as_deref(), &text)
        }
        Command::Evaluate {
            data,
            model,
            personality,
            folds,
            multiclass,
            report,
            resources,
        } => {
            let mode = if multiclass {
                EvalMode::MultiClass
            } else {
                EvalMode::MultiLabel
            };
            let metrics = match model {
                Some(model) => {
                    let pipeline = TrainedPipeline::<f64>::load(&model)?;
                    let res = model_resources(&model, &resources, settings.embedding_dim)?;
                    let model_labels =
                        LabelSpace::new(pipeline.ensemble.emotions.clone(), pipeline.ensemble.factors.clone());
                    let ds = load_dataset(&data, Schema::Emotion, &model_labels)?;
                    pipeline.evaluate(&ds, &res, mode)?
                }
                None => {
                    let embeddings = resources
                        .embeddings
                        .as_deref()
                        .ok_or_else(|| Error::Config("cross-validation needs --embeddings".into()))?;
                    let tags = load_tagset(resources.tagset.as_deref())?;
                    let (res, _) = load_resources(embeddings, &resources.lexicons, tags, settings.embedding_dim)?;
                    let cv = match personality {
                        Some(p) => {
                            let dp = load_dataset(&p, Schema::Cognitive, labels)?;
                            let de = load_dataset(&data, Schema::Emotion, labels)?;
                            cross_validate(&de, Some(&dp), &res, &settings.pipeline, folds, settings.seed, mode)?
                        }
                        None => {
                            let de = load_dataset(&data, Schema::Both, labels)?;
                            cross_validate(&de, None, &res, &settings.pipeline, folds, settings.seed, mode)?
                        }
                    };
                    cv.ensemble
                }
            };
            if let Some(p) = &report {
                fs::write(p, metrics.to_json()?).map_err(|e| Error::io(p, e))?;
            }
            write_output(None, &metrics.to_table())
        }
        Command::Stats { data, json } => {
            let ds: LabeledDataset = load_dataset(&data, Schema::Text, labels)?;
            let stats = dataset_stats(&ds);
            let text = if json {
                serde_json::to_string_pretty(&stats)? + "\n"
            } else {
                let mut t = format!("records: {}\n", stats.records);
                if !stats.emotions.is_empty() {
                    t.push('\n');
                    t.push_str(&stats_table(&stats.emotions));
                }
                if !stats.factors.is_empty() {
                    t.push('\n');
                    t.push_str(&stats_table(&stats.factors));
                }
                t
            };
            write_output(None, &text)
        }
    }
}

fn init_logging(verbose: u8) {
    let level = match verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    let _ = env_logger::Builder::new()
        .filter_level(level)
        .parse_default_env()
        .try_init();
}

/// Runs the CLI on `argv` (program name first) and returns the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    init_logging(cli.global.verbose);
    match execute(cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_RUNTIME
        }
    }
}
