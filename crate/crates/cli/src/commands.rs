use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::de::DeserializeOwned;
use serde::Serialize;
use solace_core::corpus::{run_pipeline, ConversationPair, PipelineConfig};
use solace_core::metrics::{evaluate_corpus, EvalConfig, EvalPair, MetricReport};
use solace_core::train::{
    bigram_examples, load_checkpoint, markov_fixture, save_checkpoint, train, tune, EvalPoint,
    SearchSpace, TinyLM, TokenCorpus, TrainError, TrainOptions, TrainingHistory, TuneOutcome,
    TuneSettings, WordVocab,
};
use solace_gateway::{BoundGateway, GatewayConfig};

use crate::error::Failure;
use crate::run::{
    checkpoint_dir, checkpoint_name, CheckpointEntry, RunConfig, RunManifest, ValPair,
    MANIFEST_FILE, MANIFEST_FORMAT,
};

fn open(path: &Path) -> Result<BufReader<File>, Failure> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Failure::invalid(format!("cannot read {}: {e}", path.display())))
}

fn create(path: &Path) -> Result<BufWriter<File>, Failure> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Failure::runtime(format!("cannot write {}: {e}", path.display())))
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, Failure> {
    serde_json::from_reader(open(path)?)
        .map_err(|e| Failure::invalid(format!("{}: {e}", path.display())))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), Failure> {
    let mut out = create(path)?;
    serde_json::to_writer_pretty(&mut out, value)
        .map_err(|e| Failure::runtime(format!("cannot write {}: {e}", path.display())))?;
    writeln!(out)
        .and_then(|_| out.flush())
        .map_err(|e| Failure::runtime(format!("cannot write {}: {e}", path.display())))
}

pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, Failure> {
    let mut out = Vec::new();
    for (i, line) in open(path)?.lines().enumerate() {
        let line = line.map_err(|e| Failure::runtime(format!("{}: {e}", path.display())))?;
        if line.trim().is_empty() {
            continue;
        }
        let v = serde_json::from_str(&line)
            .map_err(|e| Failure::invalid(format!("{} line {}: {e}", path.display(), i + 1)))?;
        out.push(v);
    }
    Ok(out)
}

fn print_json<T: Serialize>(value: &T) -> Result<(), Failure> {
    let text = serde_json::to_string_pretty(value).map_err(Failure::runtime)?;
    println!("{text}");
    Ok(())
}

pub fn pipeline(input: &Path, output: &Path, config: Option<&Path>) -> Result<(), Failure> {
    let cfg = match config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    let reader = open(input)?;
    let writer = create(output)?;
    let stats = run_pipeline(reader, writer, &cfg)?;
    print_json(&stats)
}

pub fn eval(pairs: &Path, out: &Path) -> Result<(), Failure> {
    let pairs: Vec<EvalPair> = read_jsonl(pairs)?;
    let report = evaluate_corpus(&pairs, None, None, &EvalConfig::default())?;
    write_json(out, &report)
}

/// Summary printed by `train`.
#[derive(Debug, Serialize)]
pub struct TrainSummary {
    pub steps: usize,
    pub skipped_steps: usize,
    pub eval_points: usize,
    pub initial_val_perplexity: f64,
    pub final_val_perplexity: f64,
    pub best_step: usize,
    pub best_val_perplexity: f64,
    pub early_stopped: bool,
    pub checkpoints: String,
}

pub fn train_run(corpus: &Path, config: &Path, history_path: &Path) -> Result<TrainSummary, Failure> {
    let cfg: RunConfig = read_json(config)?;
    cfg.training.validate()?;
    let pairs: Vec<ConversationPair> = read_jsonl(corpus)?;
    if pairs.len() < 2 {
        return Err(Failure::invalid(format!(
            "{}: need at least 2 pairs, found {}",
            corpus.display(),
            pairs.len()
        )));
    }

    let n = pairs.len();
    let n_val = TokenCorpus::new(1, vec![Vec::new(); n])?.val_count(cfg.training.val_fraction);
    let (train_pairs, val_pairs) = pairs.split_at(n - n_val);
    let vocab = WordVocab::build(
        train_pairs
            .iter()
            .flat_map(|p| p.prompt_tokens.iter().chain(&p.response_tokens))
            .map(String::as_str),
    );
    let tokens = TokenCorpus::from_pairs(&pairs, &vocab);
    let (train_seqs, _) = tokens.split(cfg.training.val_fraction);
    let steps_per_epoch = bigram_examples(train_seqs).len() / cfg.training.effective_batch();
    if steps_per_epoch == 0 {
        return Err(Failure::invalid(format!(
            "{}: fewer training bigrams than one effective batch of {}",
            corpus.display(),
            cfg.training.effective_batch()
        )));
    }
    let schedule = cfg.schedule.resolve(steps_per_epoch * cfg.training.epochs)?;

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.training.seed);
    let mut model = TinyLM::new(vocab.len(), cfg.model.hidden, &mut rng);
    if let Some(lora) = cfg.model.lora {
        model.attach_lora(lora, &mut rng)?;
    }
    let plan = cfg.unfreeze.plan(cfg.training.epochs, &model.groups())?;

    let dir = checkpoint_dir(history_path);
    prepare_checkpoint_dir(&dir)?;
    let mut checkpoints = Vec::new();
    let mut save = |p: &EvalPoint, m: &TinyLM| -> Result<(), TrainError> {
        let file = checkpoint_name(p.step);
        save_checkpoint(m, &dir.join(&file))?;
        checkpoints.push(CheckpointEntry { step: p.step, file });
        Ok(())
    };
    let mut opts = TrainOptions::new(&schedule, &plan);
    opts.on_eval = Some(&mut save);
    let history = train(&mut model, &tokens, &cfg.training, opts)?;

    history
        .write_jsonl(create(history_path)?)
        .map_err(|e| Failure::from(e).context(format!("writing {}", history_path.display())))?;
    let manifest = RunManifest {
        format: MANIFEST_FORMAT.into(),
        vocab,
        steps_per_epoch,
        generation: cfg.generation.clone(),
        val_pairs: val_pairs
            .iter()
            .map(|p| ValPair {
                prompt_tokens: p.prompt_tokens.clone(),
                response_tokens: p.response_tokens.clone(),
            })
            .collect(),
        checkpoints,
    };
    write_json(&dir.join(MANIFEST_FILE), &manifest)?;
    Ok(summarize(&history, &dir))
}

fn summarize(history: &TrainingHistory, dir: &Path) -> TrainSummary {
    let first = history.points.first().expect("training evaluates at step 0");
    let last = history.last().expect("training evaluates at step 0");
    let best = history.best().expect("training evaluates at step 0");
    TrainSummary {
        steps: history.steps,
        skipped_steps: history.skipped_steps,
        eval_points: history.points.len(),
        initial_val_perplexity: first.val_perplexity,
        final_val_perplexity: last.val_perplexity,
        best_step: best.step,
        best_val_perplexity: best.val_perplexity,
        early_stopped: history.early_stopped.is_some(),
        checkpoints: dir.display().to_string(),
    }
}

/// Creates the directory, clearing checkpoints left by an earlier run.
fn prepare_checkpoint_dir(dir: &Path) -> Result<(), Failure> {
    let fail = |e: std::io::Error| Failure::runtime(format!("{}: {e}", dir.display()));
    fs::create_dir_all(dir).map_err(fail)?;
    for entry in fs::read_dir(dir).map_err(fail)? {
        let path = entry.map_err(fail)?.path();
        let name = path.file_name().and_then(|s| s.to_str()).unwrap_or_default();
        let stale = (name.starts_with("step-") && name.ends_with(".bin")) || name == MANIFEST_FILE;
        if stale && path.is_file() {
            fs::remove_file(&path).map_err(fail)?;
        }
    }
    Ok(())
}

pub fn train_cmd(corpus: &Path, config: &Path, history: &Path) -> Result<(), Failure> {
    let summary = train_run(corpus, config, history)?;
    print_json(&summary)
}

pub fn tune_cmd(trials: usize, seed: u64, corpus: Option<&Path>) -> Result<TuneOutcome, Failure> {
    if trials == 0 {
        return Err(Failure::invalid("--trials must be >= 1"));
    }
    let tokens = match corpus {
        Some(path) => {
            let pairs: Vec<ConversationPair> = read_jsonl(path)?;
            let vocab = WordVocab::build(
                pairs
                    .iter()
                    .flat_map(|p| p.prompt_tokens.iter().chain(&p.response_tokens))
                    .map(String::as_str),
            );
            TokenCorpus::from_pairs(&pairs, &vocab)
        }
        None => markov_fixture(seed).1,
    };
    Ok(tune(&tokens, &SearchSpace::default(), &TuneSettings::default(), trials, seed)?)
}

/// One `curves` row.
#[derive(Debug, Clone, PartialEq, Serialize, serde::Deserialize)]
pub struct CurveRow {
    pub epoch: f64,
    pub bleu: Option<f64>,
    pub rouge_1: Option<f64>,
    pub coherence: Option<f64>,
    pub distinct_1: Option<f64>,
    pub distinct_2: Option<f64>,
    pub val_perplexity: f64,
}

/// Greedy replies to the held-out prompts, one per pair. Each reply starts
/// from the last prompt word, never emits `<unk>` and is at most as long as
/// its reference.
pub fn generate_replies(model: &TinyLM, manifest: &RunManifest) -> Result<Vec<EvalPair>, TrainError> {
    manifest
        .val_pairs
        .iter()
        .map(|p| {
            let start = p.prompt_tokens.last().map_or(0, |w| manifest.vocab.id(w));
            let len = p.response_tokens.len().min(manifest.generation.max_len);
            let ids = model.greedy_generate(start, len, &[0])?;
            let words: Vec<&str> = ids.iter().map(|&i| manifest.vocab.word(i)).collect();
            Ok(EvalPair {
                id: String::new(),
                candidate: words.join(" "),
                references: vec![p.response_tokens.join(" ")],
            })
        })
        .collect()
}

pub fn curve_rows(history_path: &Path) -> Result<Vec<CurveRow>, Failure> {
    let points = TrainingHistory::read_jsonl(open(history_path)?)
        .map_err(|e| Failure::invalid(format!("{}: {e}", history_path.display())))?;
    if points.is_empty() {
        return Err(Failure::invalid(format!("{}: no evaluation points", history_path.display())));
    }
    let dir = checkpoint_dir(history_path);
    let manifest: RunManifest = read_json(&dir.join(MANIFEST_FILE))?;
    if manifest.format != MANIFEST_FORMAT {
        return Err(Failure::invalid(format!(
            "{}: unsupported format {:?}",
            dir.join(MANIFEST_FILE).display(),
            manifest.format
        )));
    }
    if manifest.val_pairs.is_empty() || manifest.steps_per_epoch == 0 {
        return Err(Failure::invalid(format!("{}: empty run manifest", dir.display())));
    }
    let mut rows = Vec::with_capacity(points.len());
    for p in &points {
        let entry = manifest
            .checkpoints
            .iter()
            .find(|c| c.step == p.step)
            .ok_or_else(|| Failure::invalid(format!("no checkpoint for step {}", p.step)))?;
        let path = dir.join(&entry.file);
        let model = load_checkpoint(&path)
            .map_err(|e| Failure::from(e).context(format!("loading {}", path.display())))?;
        let pairs = generate_replies(&model, &manifest)?;
        let report: MetricReport = evaluate_corpus(&pairs, None, None, &EvalConfig::default())?;
        rows.push(CurveRow {
            epoch: p.step as f64 / manifest.steps_per_epoch as f64,
            bleu: report.bleu,
            rouge_1: report.rouge_1,
            coherence: report.coherence,
            distinct_1: report.distinct_1,
            distinct_2: report.distinct_2,
            val_perplexity: p.val_perplexity,
        });
    }
    Ok(rows)
}

pub fn curves(history: &Path, out: &Path) -> Result<(), Failure> {
    let rows = curve_rows(history)?;
    let fail = |e: csv::Error| Failure::runtime(format!("cannot write {}: {e}", out.display()));
    let mut w = csv::Writer::from_writer(create(out)?);
    for r in &rows {
        w.serialize(r).map_err(fail)?;
    }
    w.flush()
        .map_err(|e| Failure::runtime(format!("cannot write {}: {e}", out.display())))
}

pub fn serve(config: &Path) -> Result<(), Failure> {
    let cfg = GatewayConfig::load(config)?;
    tracing_subscriber::fmt()
        .with_writer(std::io::stderr)
        .with_max_level(tracing_subscriber::filter::LevelFilter::INFO)
        .with_ansi(false)
        .init();
    let rt = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(Failure::runtime)?;
    rt.block_on(async {
        let bound = BoundGateway::bind(&cfg).await?;
        let addr = bound.local_addr()?;
        println!("listening on http://{addr}");
        std::io::stdout()
            .flush()
            .map_err(Failure::runtime)?;
        bound
            .serve(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await?;
        Ok(())
    })
}
