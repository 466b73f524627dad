//! `palettizer` command line: corpus generation, training, evaluation,
//! extraction, recommendation and the HTTP service.

use std::io::{BufRead, Write as _};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use palettizer::eval::{run_protocol, train_test_split, EvalProtocolConfig};
use palettizer::extract::{extract_document, ExtractParams};
use palettizer::raster::{AnnotationSet, RasterImage};
use palettizer::recommender::{train, Imputer, MeanImputer, MiceConfig, MiceImputer, TrainConfig, VaeacModel};
use palettizer::synth::generate_corpus;
use palettizer::{featurize, recommend, strip_spatial, FeatureVector, InfographicDoc, Lexicon, PreferenceSet};
use palettizer_service::{AppState, ServiceConfig};
use serde_json::{json, Value};

#[derive(Parser)]
#[command(name = "palettizer", version, about = "Palette recommendation for infographics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a deterministic synthetic corpus as JSON lines.
    GenCorpus {
        #[arg(long, default_value_t = 100)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output file; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also render `<id>.png` and `<id>.annotations.json` here.
        #[arg(long)]
        images: Option<PathBuf>,
    },
    /// Train a VAEAC checkpoint.
    Train {
        #[command(flatten)]
        corpus: CorpusArgs,
        #[command(flatten)]
        training: TrainArgs,
        /// Drop the spatial columns before training.
        #[arg(long)]
        non_spatial: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Complete a feature vector with a trained checkpoint.
    Impute {
        #[arg(long)]
        model: PathBuf,
        /// FeatureVector JSON; hidden entries are those with mask = true.
        #[arg(long)]
        request: PathBuf,
        #[arg(long, default_value_t = 5)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Spatial vs non-spatial VAEAC on the same split.
    Ablate {
        #[command(flatten)]
        corpus: CorpusArgs,
        #[command(flatten)]
        training: TrainArgs,
    },
    /// All four methods on the held-out split, as CSV.
    Evaluate {
        #[command(flatten)]
        corpus: CorpusArgs,
        #[command(flatten)]
        training: TrainArgs,
        /// Use this checkpoint instead of training the spatial model.
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Turn a PNG plus data-element annotations into a document.
    Extract {
        #[arg(long)]
        image: PathBuf,
        #[arg(long)]
        annotations: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Extraction is deterministic; accepted so every command takes one.
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Recommend palettes for a document.
    Recommend {
        #[arg(long)]
        doc: PathBuf,
        /// Checkpoint; a chained-equations model is fitted when omitted.
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        lexicon: Option<PathBuf>,
        /// `id=#RRGGBB`, repeatable.
        #[arg(long = "pin")]
        pins: Vec<String>,
        /// `id=word`, repeatable.
        #[arg(long = "word")]
        words: Vec<String>,
        /// Comma-separated node ids sharing one color, repeatable.
        #[arg(long = "bind")]
        bindings: Vec<String>,
        #[arg(long, default_value_t = 5)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Run the HTTP service. `$PALETTIZER_CONFIG` overrides `--config`.
    Serve {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Overrides the config's seed policy with a fixed seed.
        #[arg(long)]
        seed: Option<u64>,
    },
}

#[derive(Args)]
struct CorpusArgs {
    /// JSON lines from `gen-corpus`; generated in memory when omitted.
    #[arg(long)]
    corpus: Option<PathBuf>,
    #[arg(long, default_value_t = 2000)]
    n: usize,
    #[arg(long, default_value_t = 0.2)]
    test_fraction: f64,
    #[arg(long, default_value_t = 7)]
    seed: u64,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long, default_value_t = 50)]
    epochs: usize,
    #[arg(long, value_delimiter = ',', default_value = "256,256")]
    hidden: Vec<usize>,
    #[arg(long, default_value_t = 32)]
    latent: usize,
}

impl TrainArgs {
    fn config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            hidden: self.hidden.clone(),
            latent: self.latent,
            seed,
            ..Default::default()
        }
    }
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()))
        .with_writer(std::io::stderr)
        .init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::GenCorpus { n, seed, out, images } => gen_corpus(n, seed, out.as_deref(), images.as_deref()),
        Command::Train {
            corpus,
            training,
            non_spatial,
            out,
        } => {
            let (train_set, _) = load_split(&corpus)?;
            let train_set = if non_spatial { strip_all(&train_set)? } else { train_set };
            let (model, report) = train(&train_set, &training.config(corpus.seed))?;
            model.save(&out).with_context(|| format!("writing {}", out.display()))?;
            eprintln!(
                "trained on {} vectors, kept epoch {} ({:.1}s)",
                report.train_size, report.selected_epoch, report.wall_time_secs
            );
            Ok(())
        }
        Command::Impute { model, request, n, seed } => {
            let model = VaeacModel::load(&model)?;
            let request: FeatureVector = serde_json::from_str(&read(&request)?).context("parsing request")?;
            let out = model.impute(&request, n, seed)?;
            emit(&serde_json::to_string_pretty(&out)?)
        }
        Command::Ablate { corpus, training } => {
            let (train_set, test) = load_split(&corpus)?;
            let config = training.config(corpus.seed);
            let (spatial, _) = train(&train_set, &config)?;
            let (flat, _) = train(&strip_all(&train_set)?, &config)?;
            let stds = MeanImputer::fit(&train_set)?.normalizer.std;
            let table = run_protocol(&[&spatial, &flat], &test, &stds, &protocol(corpus.seed))?;
            emit(&table.to_text())
        }
        Command::Evaluate { corpus, training, model } => {
            let (train_set, test) = load_split(&corpus)?;
            let config = training.config(corpus.seed);
            let vaeac = match model {
                Some(p) => VaeacModel::load(&p)?,
                None => train(&train_set, &config)?.0,
            };
            let (flat, _) = train(&strip_all(&train_set)?, &config)?;
            let mice = MiceImputer::fit(&train_set, MiceConfig::default())?;
            let mean = MeanImputer::fit(&train_set)?;
            let methods: [&dyn Imputer; 4] = [&vaeac, &flat, &mice, &mean];
            let table = run_protocol(&methods, &test, &mean.normalizer.std, &protocol(corpus.seed))?;
            emit(&table.to_csv())
        }
        Command::Extract {
            image,
            annotations,
            out,
            seed: _,
        } => {
            let bytes = std::fs::read(&image).with_context(|| format!("reading {}", image.display()))?;
            let img = RasterImage::decode_png(&bytes)?;
            let ann: AnnotationSet = serde_json::from_str(&read(&annotations)?).context("parsing annotations")?;
            let doc = extract_document(&img, &ann, &ExtractParams::default())?;
            write_or_print(out.as_deref(), &serde_json::to_string_pretty(&doc)?)
        }
        Command::Recommend {
            doc,
            model,
            lexicon,
            pins,
            words,
            bindings,
            n,
            seed,
        } => {
            let doc = InfographicDoc::from_json(&read(&doc)?).context("parsing document")?;
            let prefs = parse_prefs(&pins, &words, &bindings)?;
            let lexicon = match lexicon {
                Some(p) => Lexicon::from_json(&read(&p)?)?,
                None => Lexicon::builtin(),
            };
            let model: Box<dyn Imputer> = match model {
                Some(p) => Box::new(VaeacModel::load(&p)?),
                None => Box::new(palettizer_service::config::fallback_model()?),
            };
            let palettes = recommend(&doc, &prefs, n, model.as_ref(), &lexicon, seed)?;
            let out: Vec<Value> = palettes.iter().map(|p| json!({ "colors": p.to_hex(), "palette": p })).collect();
            emit(&serde_json::to_string_pretty(&out)?)
        }
        Command::Serve { config, seed } => {
            let mut config = ServiceConfig::load(config.as_deref())?;
            if let Some(seed) = seed {
                config.seed_policy = palettizer_service::SeedPolicy::Fixed { seed };
            }
            let state = AppState::from_config(config)?;
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(palettizer_service::serve(state))?;
            Ok(())
        }
    }
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn write_or_print(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => emit(text),
    }
}

/// Write to stdout; a closed pipe (`| head`) is not an error.
fn emit(text: &str) -> Result<()> {
    let mut out = std::io::stdout().lock();
    let res = out.write_all(text.as_bytes()).and_then(|()| {
        if !text.ends_with('\n') {
            out.write_all(b"\n")?;
        }
        out.flush()
    });
    match res {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

fn protocol(seed: u64) -> EvalProtocolConfig {
    EvalProtocolConfig {
        seed,
        ..Default::default()
    }
}

fn strip_all(vs: &[FeatureVector]) -> Result<Vec<FeatureVector>> {
    Ok(vs.iter().map(strip_spatial).collect::<Result<_, _>>()?)
}

fn gen_corpus(n: usize, seed: u64, out: Option<&Path>, images: Option<&Path>) -> Result<()> {
    let items = generate_corpus(n, seed);
    if let Some(dir) = images {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let mut text = String::new();
    for item in &items {
        let line = json!({ "id": item.id, "doc": item.doc, "annotations": item.annotations });
        text.push_str(&serde_json::to_string(&line)?);
        text.push('\n');
        if let Some(dir) = images {
            std::fs::write(dir.join(format!("{}.png", item.id)), item.render().encode_png())?;
            std::fs::write(
                dir.join(format!("{}.annotations.json", item.id)),
                serde_json::to_string_pretty(&item.annotations)?,
            )?;
        }
    }
    write_or_print(out, &text)
}

/// Featurized train/test split, keyed by item id.
fn load_split(args: &CorpusArgs) -> Result<(Vec<FeatureVector>, Vec<(String, FeatureVector)>)> {
    let labeled: Vec<(String, FeatureVector)> = match &args.corpus {
        Some(path) => {
            let file = std::fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
            let mut out = Vec::new();
            for (i, line) in std::io::BufReader::new(file).lines().enumerate() {
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                let v: Value = serde_json::from_str(&line).with_context(|| format!("{}:{}", path.display(), i + 1))?;
                let id = v["id"].as_str().map_or_else(|| format!("line{}", i + 1), str::to_string);
                let doc: InfographicDoc = serde_json::from_value(v["doc"].clone())
                    .with_context(|| format!("{}:{}: bad document", path.display(), i + 1))?;
                out.push((id, featurize(&doc)?));
            }
            out
        }
        None => generate_corpus(args.n, args.seed)
            .iter()
            .map(|i| Ok((i.id.clone(), featurize(&i.doc)?)))
            .collect::<Result<_>>()?,
    };
    if labeled.len() < 2 {
        bail!("corpus needs at least two documents, got {}", labeled.len());
    }
    let (train_part, test) = train_test_split(labeled, args.test_fraction, args.seed);
    Ok((train_part.into_iter().map(|(_, v)| v).collect(), test))
}

fn split_pair<'a>(s: &'a str, flag: &str) -> Result<(&'a str, &'a str)> {
    s.split_once('=')
        .filter(|(k, v)| !k.is_empty() && !v.is_empty())
        .ok_or_else(|| anyhow!("--{flag} expects id=value, got {s:?}"))
}

/// Goes through the same JSON path as the HTTP API so pins get identical
/// hex parsing and validation.
fn parse_prefs(pins: &[String], words: &[String], bindings: &[String]) -> Result<PreferenceSet> {
    let mut exact = serde_json::Map::new();
    for p in pins {
        let (id, hex) = split_pair(p, "pin")?;
        exact.insert(id.into(), json!(hex));
    }
    let mut vague = serde_json::Map::new();
    for w in words {
        let (id, word) = split_pair(w, "word")?;
        vague.insert(id.into(), json!(word));
    }
    let bindings: Vec<Vec<&str>> = bindings
        .iter()
        .map(|b| b.split(',').map(str::trim).filter(|s| !s.is_empty()).collect())
        .collect();
    serde_json::from_value(json!({ "exact": exact, "vague": vague, "bindings": bindings })).context("invalid preferences")
}
