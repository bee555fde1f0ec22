use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde_json::json;

use evigraph::checkpoint::Checkpoint;
use evigraph::data::{
    load_corpus, load_dataset, load_predictions, load_srl_collection, parse_srl_document, to_srl_json,
    write_dataset, write_lines, Document, Instance,
};
use evigraph::eval::evaluate;
use evigraph::graph::{build_graph, Origin};
use evigraph::pipeline::ablate::format_table;
use evigraph::pipeline::{
    ablate, predict_all, retrieve_documents, select_evidence, synthesize, train, LexicalScorer, Scorer,
    SynthOptions, TrainedScorer, Variant,
};
use evigraph::sort::{document_order, order_evidence};
use evigraph::{Config, Error, Result};

#[derive(Parser)]
#[command(name = "evigraph", version, about = "Graph-based claim verification")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// Random seed; overrides the config file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Config file, JSON or `key = value` lines.
    #[arg(long, global = true, env = "EVIGRAPH_CONFIG")]
    config: Option<PathBuf>,
    /// Starting values before the config file: default, desk or toy.
    #[arg(long, global = true, default_value = "default")]
    preset: String,
    /// Override one config key, e.g. `--set node_dim=32`. Repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Worker threads for per-instance stages.
    #[arg(long, global = true)]
    jobs: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Build the semantic graph of one SRL document.
    BuildGraph {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum, default_value = "evidence")]
        origin: OriginArg,
    },
    /// Order the evidence of one SRL document by topology sort.
    Sort {
        #[arg(long)]
        input: PathBuf,
        /// Keep document order instead.
        #[arg(long)]
        no_reorder: bool,
    },
    /// Rank corpus documents by title overlap with a claim.
    Retrieve {
        #[arg(long)]
        corpus: PathBuf,
        #[command(flatten)]
        claims: Claims,
    },
    /// Retrieve documents, then rank their sentences.
    Select {
        #[arg(long)]
        corpus: PathBuf,
        #[command(flatten)]
        claims: Claims,
        /// Fit the encoder-based scorer on the gold evidence of --dataset
        /// instead of using lexical overlap.
        #[arg(long)]
        trained: bool,
    },
    /// Train a model and write its checkpoint.
    Train {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        srl: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        ablation: Ablation,
    },
    /// Classify every SRL document with a checkpoint.
    Predict {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        srl: PathBuf,
        /// Predictions JSONL; stdout if absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Score predictions against gold instances.
    Evaluate {
        #[arg(long)]
        preds: PathBuf,
        #[arg(long)]
        gold: PathBuf,
        /// Evidence items considered per prediction; defaults to top_sentences.
        #[arg(long)]
        k: Option<usize>,
    },
    /// Generate the synthetic dataset.
    Synth {
        /// Training instances.
        #[arg(long, default_value_t = 300)]
        n: usize,
        /// Dev instances.
        #[arg(long, default_value_t = 60)]
        dev: usize,
        /// Output directory.
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Train and score every model variant.
    Ablate {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        dev: PathBuf,
        #[arg(long)]
        srl: PathBuf,
        /// Comma-separated training seeds.
        #[arg(long, value_delimiter = ',', default_value = "0,1,2")]
        seeds: Vec<u64>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum OriginArg {
    Claim,
    Evidence,
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct Claims {
    #[arg(long)]
    claim: Option<String>,
    /// Dataset JSONL; one output line per instance.
    #[arg(long)]
    dataset: Option<PathBuf>,
}

#[derive(Args)]
struct Ablation {
    #[arg(long)]
    no_reorder: bool,
    #[arg(long)]
    no_graph: bool,
    #[arg(long)]
    no_both: bool,
}

impl Ablation {
    fn variant(&self) -> Variant {
        match (self.no_reorder, self.no_graph, self.no_both) {
            (_, _, true) | (true, true, _) => Variant::NoBoth,
            (true, false, false) => Variant::NoReorder,
            (false, true, false) => Variant::NoGraph,
            (false, false, false) => Variant::Full,
        }
    }
}

fn config(g: &Global) -> Result<Config> {
    let mut cfg = Config::preset(&g.preset)?;
    if let Some(path) = &g.config {
        cfg = Config::load_onto(cfg, path)?;
    }
    for kv in &g.overrides {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("--set expects KEY=VALUE, got {kv:?}")))?;
        cfg.set(k.trim(), v.trim())?;
    }
    if let Some(seed) = g.seed {
        cfg.seed = seed;
    }
    if let Some(jobs) = g.jobs {
        cfg.jobs = jobs;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn emit(text: String) {
    print_lines([text]);
}

fn print_lines(lines: impl IntoIterator<Item = String>) {
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    for line in lines {
        if writeln!(out, "{line}").is_err() {
            return;
        }
    }
}

fn claims(c: &Claims) -> Result<Vec<(Option<String>, String)>> {
    match (&c.claim, &c.dataset) {
        (Some(text), _) => Ok(vec![(None, text.clone())]),
        (None, Some(path)) => {
            let mut instances = load_dataset(path)?;
            instances.sort_by(|a, b| a.instance_id.cmp(&b.instance_id));
            Ok(instances.into_iter().map(|i| (Some(i.instance_id), i.claim)).collect())
        }
        (None, None) => unreachable!("clap requires one of --claim, --dataset"),
    }
}

fn with_id(id: &Option<String>, key: &str, value: serde_json::Value) -> String {
    match id {
        Some(id) => json!({ "instance_id": id, key: value }).to_string(),
        None => value.to_string(),
    }
}

fn retrieved<'a>(claim: &str, corpus: &'a [Document], m: usize) -> Vec<&'a Document> {
    retrieve_documents(claim, corpus, m)
        .iter()
        .map(|r| corpus.iter().find(|d| d.doc_id == r.doc_id).expect("retrieved from corpus"))
        .collect()
}

fn run(cli: Cli) -> Result<()> {
    let cfg = config(&cli.global)?;
    let _ = rayon::ThreadPoolBuilder::new().num_threads(cfg.jobs).build_global();
    match cli.command {
        Command::BuildGraph { input, origin } => {
            let es = parse_srl_document(&read(&input)?)?;
            let origin = match origin {
                OriginArg::Claim => Origin::Claim,
                OriginArg::Evidence => Origin::Evidence,
            };
            emit(build_graph(&es, origin).to_json());
        }
        Command::Sort { input, no_reorder } => {
            let es = parse_srl_document(&read(&input)?)?;
            let value = if no_reorder || !cfg.reorder {
                json!({ "node_order": [], "sentence_order": document_order(&es), "removed_relations": [] })
            } else {
                serde_json::to_value(order_evidence(&es)).expect("order serializes")
            };
            emit(serde_json::to_string_pretty(&value).expect("json"));
        }
        Command::Retrieve { corpus, claims: c } => {
            let corpus = load_corpus(&corpus)?;
            let claims = claims(&c)?;
            let lines: Vec<String> = claims
                .par_iter()
                .map(|(id, claim)| {
                    let docs = retrieve_documents(claim, &corpus, cfg.top_docs);
                    with_id(id, "documents", serde_json::to_value(docs).expect("json"))
                })
                .collect();
            print_lines(lines);
        }
        Command::Select {
            corpus,
            claims: c,
            trained,
        } => {
            let corpus = load_corpus(&corpus)?;
            let claims = claims(&c)?;
            let scorer: Box<dyn Scorer> = if trained {
                let path = c
                    .dataset
                    .as_ref()
                    .ok_or_else(|| Error::Config("--trained needs --dataset with gold evidence".into()))?;
                let instances: Vec<Instance> = load_dataset(path)?;
                Box::new(TrainedScorer::train(&instances, &corpus, &cfg)?)
            } else {
                Box::new(LexicalScorer)
            };
            let lines: Vec<String> = claims
                .par_iter()
                .map(|(id, claim)| {
                    let docs = retrieved(claim, &corpus, cfg.top_docs);
                    let ranked = select_evidence(claim, &docs, cfg.top_sentences, scorer.as_ref());
                    with_id(id, "evidence", serde_json::to_value(ranked).expect("json"))
                })
                .collect();
            print_lines(lines);
        }
        Command::Train {
            dataset,
            srl,
            out,
            ablation,
        } => {
            let cfg = ablation.variant().apply(&cfg);
            let instances = load_dataset(&dataset)?;
            let sets = load_srl_collection(&srl)?;
            log::info!("training on {} instances with {} srl documents", instances.len(), sets.len());
            let outcome = train(&instances, &sets, &cfg)?;
            outcome.checkpoint().save(&out)?;
            log::info!("wrote {}", out.display());
            let summary = json!({
                "checkpoint": out,
                "seed": cfg.seed,
                "final_loss": outcome.log.final_loss(),
                "training_log": outcome.log,
            });
            emit(serde_json::to_string_pretty(&summary).expect("json"));
        }
        Command::Predict { checkpoint, srl, out } => {
            let model = Checkpoint::load(&checkpoint)?.into_model()?;
            let sets = load_srl_collection(&srl)?;
            let k = model.config.top_sentences;
            log::info!("predicting {} documents", sets.len());
            let preds = predict_all(&model, &sets, k)?;
            let lines = preds.iter().map(|p| serde_json::to_string(p).expect("json"));
            match out {
                Some(path) => write_lines(&path, lines)?,
                None => print_lines(lines),
            }
        }
        Command::Evaluate { preds, gold, k } => {
            let preds = load_predictions(&preds)?;
            let gold = load_dataset(&gold)?;
            let report = evaluate(&preds, &gold, k.unwrap_or(cfg.top_sentences))?;
            emit(serde_json::to_string_pretty(&report).expect("json"));
            eprint!("{}", report.table());
        }
        Command::Synth { n, dev, out } => {
            let data = synthesize(&SynthOptions {
                train: n,
                dev,
                seed: cfg.seed,
            });
            fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
            let corpus = out.join("corpus.jsonl");
            let train_path = out.join("train.jsonl");
            let dev_path = out.join("dev.jsonl");
            let srl_path = out.join("srl.jsonl");
            write_lines(
                &corpus,
                data.corpus.iter().map(|d| serde_json::to_string(d).expect("json")),
            )?;
            write_dataset(&train_path, &data.train)?;
            write_dataset(&dev_path, &data.dev)?;
            write_lines(&srl_path, data.srl.iter().map(to_srl_json))?;
            let summary = json!({
                "seed": cfg.seed,
                "corpus": corpus,
                "train": train_path,
                "dev": dev_path,
                "srl": srl_path,
                "documents": data.corpus.len(),
                "train_instances": data.train.len(),
                "dev_instances": data.dev.len(),
            });
            emit(serde_json::to_string_pretty(&summary).expect("json"));
        }
        Command::Ablate {
            dataset,
            dev,
            srl,
            seeds,
        } => {
            let train_set = load_dataset(&dataset)?;
            let dev_set = load_dataset(&dev)?;
            let sets = load_srl_collection(&srl)?;
            let rows = ablate(&train_set, &dev_set, &sets, &cfg, &seeds, &Variant::ALL)?;
            emit(serde_json::to_string_pretty(&rows).expect("json"));
            eprint!("{}", format_table(&rows));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
