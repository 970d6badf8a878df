//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

#[path = "../../core/tests/support/oracles.rs"]
mod oracles;

use std::io::{BufRead, BufReader, Read};
use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode, Stdio};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use solace_core::corpus::{contains_pii, run_pipeline, ConversationPair, PiiClass, PipelineConfig};
use solace_core::metrics::*;
use solace_core::train::*;

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

fn toks(s: &str) -> Vec<&str> {
    s.split_whitespace().collect()
}

fn metric_oracles() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst: f64 = 0.0;
    for i in 0..500 {
        let vocab = rng.gen_range(1..=6);
        let cand = oracles::random_tokens(&mut rng, vocab, 15);
        let refs: Vec<Vec<u8>> = (0..rng.gen_range(1..=3))
            .map(|_| oracles::random_tokens(&mut rng, vocab, 15))
            .collect();
        let n = rng.gen_range(1..=4);

        let counts = ngram_counts(&cand, n).map_err(|e| e.to_string())?;
        let table = oracles::ngram_table(&cand, n);
        ensure!(counts.distinct() == table.len(), "instance {i}: distinct n-gram count differs");
        for (g, c) in &table {
            ensure!(counts.get(g) == *c, "instance {i}: count of {g:?} differs");
        }

        let got = bleu(&cand, &refs, &BleuConfig::uniform(n)).map_err(|e| e.to_string())?;
        let want = oracles::bleu(&cand, &refs, n, None);
        worst = worst.max((got - want).abs());

        let rn = n.min(3);
        match oracles::rouge_n(&cand, &refs, rn) {
            Some(want) => {
                let got = rouge_n(&cand, &refs, rn).map_err(|e| e.to_string())?;
                worst = worst.max((got - want).abs());
            }
            None => ensure!(rouge_n(&cand, &refs, rn).is_err(), "instance {i}: rouge should be undefined"),
        }

        let mut responses = refs.clone();
        responses.push(cand.clone());
        match oracles::distinct_pooled(&responses, rn) {
            Some(want) => {
                let got = distinct_n(&responses, rn).map_err(|e| e.to_string())?;
                worst = worst.max((got - want).abs());
            }
            None => ensure!(distinct_n(&responses, rn).is_err(), "instance {i}: distinct should be undefined"),
        }
    }
    let elapsed = start.elapsed();
    ensure!(worst <= 1e-12, "max abs deviation {worst:e} > 1e-12");
    ensure!(elapsed < Duration::from_secs(10), "took {elapsed:?}");
    Ok(format!("500 instances, max deviation {worst:e}, {elapsed:.2?}"))
}

fn hand_fixtures() -> Outcome {
    let b = bleu(&toks("the the the the"), &[toks("the cat")], &BleuConfig::uniform(1)).map_err(|e| e.to_string())?;
    ensure!(b == 0.25, "degenerate BLEU {b}");
    let r = rouge_n(&toks("the cat sat"), &[toks("the cat sat on the mat")], 1).map_err(|e| e.to_string())?;
    ensure!(r == 0.5, "ROUGE-1 {r}");
    let text = "a b. a c. a b.";
    let split = split_sentences(text);
    let vocab = Vocabulary::build(split.iter().flatten().map(String::as_str));
    let c = coherence(text, split_sentences, &TfEmbedder::new(vocab)).ok_or("coherence undefined")?;
    ensure!((c - 0.5).abs() <= 1e-12, "coherence {c}");
    let x = toks("i hear how heavy this week has been for you");
    let ident = [
        bleu(&x, std::slice::from_ref(&x), &BleuConfig::default()),
        rouge_n(&x, std::slice::from_ref(&x), 1),
        rouge_n(&x, std::slice::from_ref(&x), 2),
        distinct_n(&[toks("a b c d")], 1),
    ];
    for (i, v) in ident.into_iter().enumerate() {
        let v = v.map_err(|e| e.to_string())?;
        ensure!(v == 1.0, "identity case {i} gave {v}");
    }
    Ok(format!("bleu {b}, rouge_1 {r}, coherence {c}, identities 1.0"))
}

fn schedule_exactness() -> Outcome {
    let warm = LrSchedule::default_warmup(5000);
    let dynamic = LrSchedule::default_dynamic(5000);
    let lr = |s: &LrSchedule, k: usize| s.lr_at(k).map_err(|e| e.to_string());
    let checks = [
        ("warmup lr_at(500)", lr(&warm, 500)?, 2e-5),
        ("dynamic lr_at(0)", lr(&dynamic, 0)?, 2e-5),
        ("dynamic lr_at(1000)", lr(&dynamic, 1000)?, 5e-5),
        ("dynamic lr_at(total)", lr(&dynamic, 5000)?, 1e-6),
    ];
    for (name, got, want) in checks {
        ensure!(got == want, "{name} = {got:e}, expected {want:e}");
    }
    Ok("all four values exact".into())
}

fn random_model(rng: &mut ChaCha8Rng, v: usize, h: usize, lora: bool) -> TinyLM {
    let mut m = TinyLM::new(v, h, rng);
    if lora {
        m.attach_lora(LoraConfig { rank: 2, alpha: 4.0 }, rng).unwrap();
    }
    for x in m.params.values_mut() {
        *x = rng.gen_range(-1.0..1.0);
    }
    m
}

fn random_batch(rng: &mut ChaCha8Rng, v: usize, n: usize) -> Vec<Example> {
    (0..n).map(|_| (rng.gen_range(0..v), rng.gen_range(0..v))).collect()
}

fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let scale = a.iter().map(|x| x * x).sum::<f64>().sqrt() + b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if scale == 0.0 {
        0.0
    } else {
        diff / scale
    }
}

fn no_dropout() -> Option<Dropout<'static, ChaCha8Rng>> {
    None
}

fn gradient_check() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(7001);
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for point in 0..50 {
        let mut m = random_model(&mut rng, 8, 5, point % 2 == 1);
        let batch = random_batch(&mut rng, 8, 6);
        let (_, grad) = m.loss_and_grad(&batch, 0.1, no_dropout(), 1.0).map_err(|e| e.to_string())?;
        for ti in 0..m.params.tensors.len() {
            let mut numeric = Vec::new();
            for j in 0..m.params.tensors[ti].data.len() {
                let orig = m.params.tensors[ti].data[j];
                m.params.tensors[ti].data[j] = orig + h;
                let up = m.batch_loss(&batch, 0.1).map_err(|e| e.to_string())?;
                m.params.tensors[ti].data[j] = orig - h;
                let down = m.batch_loss(&batch, 0.1).map_err(|e| e.to_string())?;
                m.params.tensors[ti].data[j] = orig;
                numeric.push((up - down) / (2.0 * h));
            }
            worst = worst.max(rel_err(&grad.tensors[ti].data, &numeric));
        }
    }
    let elapsed = start.elapsed();
    ensure!(worst < 1e-4, "relative error {worst:e}");
    ensure!(elapsed < Duration::from_secs(30), "took {elapsed:?}");
    Ok(format!("50 points, max relative error {worst:e}, {elapsed:.2?}"))
}

fn accumulation() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7002);
    let mut worst: f64 = 0.0;
    for trial in 0..20 {
        let m = random_model(&mut rng, 16, 8, trial % 3 == 0);
        let batch = random_batch(&mut rng, 16, 128);
        let (_, full) = m.loss_and_grad(&batch, 0.1, no_dropout(), 1.0).map_err(|e| e.to_string())?;
        let micro = batch
            .chunks(32)
            .map(|c| m.loss_and_grad(c, 0.1, no_dropout(), 1.0).map(|(_, g)| g))
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| e.to_string())?;
        let acc = accumulate(&micro, 4).map_err(|e| e.to_string())?;
        worst = worst.max(rel_err(&full.flatten(), &acc.flatten()));
    }
    ensure!(worst <= 1e-9, "relative error {worst:e}");
    Ok(format!("20 trials, max relative error {worst:e}"))
}

fn lora() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7003);
    let w = Matrix::from_fn(12, 9, |_, _| rng.gen_range(-1.0..1.0));
    let fresh = LoraAdapter::init(LoraConfig::default(), 9, 12, &mut rng).map_err(|e| e.to_string())?;
    let mut fresh_worst: f64 = 0.0;
    for _ in 0..100 {
        let x: Vec<f64> = (0..9).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let base = w.matvec(&x).map_err(|e| e.to_string())?;
        let with = lora_forward(&w, &fresh, &x).map_err(|e| e.to_string())?;
        fresh_worst = base.iter().zip(&with).map(|(a, b)| (a - b).abs()).fold(fresh_worst, f64::max);
    }
    ensure!(fresh_worst <= 1e-15, "fresh adapter deviates by {fresh_worst:e}");

    let a = Matrix::from_fn(8, 9, |_, _| rng.gen_range(-1.0..1.0));
    let b = Matrix::from_fn(12, 8, |_, _| rng.gen_range(-1.0..1.0));
    let adapter = LoraAdapter::from_parts(16.0, a, b).map_err(|e| e.to_string())?;
    let merged = merge_lora(&w, &adapter).map_err(|e| e.to_string())?;
    let mut merge_worst: f64 = 0.0;
    for _ in 0..100 {
        let x: Vec<f64> = (0..9).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let y1 = merged.matvec(&x).map_err(|e| e.to_string())?;
        let y2 = lora_forward(&w, &adapter, &x).map_err(|e| e.to_string())?;
        merge_worst = y1.iter().zip(&y2).map(|(a, b)| (a - b).abs()).fold(merge_worst, f64::max);
    }
    ensure!(merge_worst < 1e-9, "merged forward deviates by {merge_worst:e}");
    Ok(format!("fresh {fresh_worst:e}, merged {merge_worst:e}"))
}

fn training_end_to_end() -> Outcome {
    let start = Instant::now();
    let (_, corpus) = markov_fixture(42);
    ensure!(corpus.vocab_size == 16 && corpus.token_count() == 10_000, "unexpected Markov corpus shape");
    let cfg = TrainingConfig {
        seed: 42,
        ..TrainingConfig::default()
    };
    let (train_seqs, val_seqs) = corpus.split(cfg.val_fraction);
    let baseline = unigram_perplexity(&bigram_examples(val_seqs)).map_err(|e| e.to_string())?;
    let total = bigram_examples(train_seqs).len() / cfg.effective_batch() * cfg.epochs;
    let schedule = LrSchedule::warmup_linear_decay(0.01, total / 10, total);
    let mut model = TinyLM::new(16, 16, &mut ChaCha8Rng::seed_from_u64(1));
    let plan = UnfreezePlan::all_trainable(cfg.epochs, &model.groups());
    let history = train(&mut model, &corpus, &cfg, TrainOptions::new(&schedule, &plan)).map_err(|e| e.to_string())?;
    let last = history.last().ok_or("empty history")?;
    ensure!(last.epoch == 3, "run ended at epoch {}", last.epoch);
    ensure!(
        last.val_perplexity < 0.9 * baseline,
        "validation perplexity {:.4} not below 0.9 x unigram {baseline:.4}",
        last.val_perplexity
    );

    let mut es = EarlyStopping::new(3);
    let trace = [5.0, 4.0, 4.1, 4.2, 4.3];
    let decisions: Vec<StopDecision> = trace.iter().enumerate().map(|(i, &x)| es.update(i, x)).collect();
    ensure!(
        decisions[..4].iter().all(|d| *d == StopDecision::Continue),
        "stopped before the third non-improving eval: {decisions:?}"
    );
    ensure!(
        decisions[4]
            == StopDecision::Stop {
                best_step: 1,
                best_metric: 4.0
            },
        "did not stop after the third non-improving eval: {:?}",
        decisions[4]
    );
    let elapsed = start.elapsed();
    ensure!(elapsed < Duration::from_secs(60), "took {elapsed:?}");
    Ok(format!(
        "val ppl {:.4} < 0.9 x {baseline:.4}; early stop at eval 5 with best 4.0; {elapsed:.2?}",
        last.val_perplexity
    ))
}

fn solace(args: &[&str]) -> Result<Vec<u8>, String> {
    let o = Command::new(env!("CARGO_BIN_EXE_solace"))
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    if !o.status.success() {
        return Err(format!("solace {} failed: {}", args[0], String::from_utf8_lossy(&o.stderr)));
    }
    Ok(o.stdout)
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn trend_shape() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let clean = dir.path().join("clean.jsonl");
    let history = dir.path().join("history.jsonl");
    let curves = dir.path().join("curves.csv");
    solace(&[
        "pipeline",
        "--in",
        p(&fixtures().join("dialogues.jsonl")),
        "--out",
        p(&clean),
        "--config",
        p(&fixtures().join("pipeline_sentences.json")),
    ])?;
    solace(&[
        "train",
        "--corpus",
        p(&clean),
        "--config",
        p(&fixtures().join("train.json")),
        "--history",
        p(&history),
    ])?;
    solace(&["curves", "--history", p(&history), "--out", p(&curves)])?;

    let mut reader = csv::Reader::from_path(&curves).map_err(|e| e.to_string())?;
    let header: Vec<String> = reader.headers().map_err(|e| e.to_string())?.iter().map(str::to_owned).collect();
    let rows: Vec<Vec<Option<f64>>> = reader
        .records()
        .map(|r| r.map(|r| r.iter().map(|v| v.parse().ok()).collect()))
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())?;
    let points = std::fs::read_to_string(&history).map_err(|e| e.to_string())?.lines().count();
    ensure!(rows.len() == points && rows.len() >= 2, "{} rows for {points} eval points", rows.len());
    ensure!(
        rows.windows(2).all(|w| w[0][0] <= w[1][0]),
        "epoch column decreases"
    );
    let (first, last) = (&rows[0], &rows[rows.len() - 1]);
    let mut improved = Vec::new();
    let mut detail = Vec::new();
    for name in ["bleu", "rouge_1", "coherence", "distinct_1", "distinct_2"] {
        let col = header.iter().position(|h| h == name).ok_or(format!("missing column {name}"))?;
        let fmt = |v: Option<f64>| v.map_or("undefined".to_owned(), |x| format!("{x:.4}"));
        detail.push(format!("{name} {} -> {}", fmt(first[col]), fmt(last[col])));
        if let (Some(a), Some(b)) = (first[col], last[col]) {
            if b >= a {
                improved.push(name);
            }
        }
    }
    ensure!(improved.len() >= 4, "only {} of 5 non-decreasing: {}", improved.len(), detail.join(", "));
    Ok(format!("{} of 5 non-decreasing over {} rows ({})", improved.len(), rows.len(), detail.join(", ")))
}

fn pipeline_fixture() -> Outcome {
    let cfg = PipelineConfig::load(&fixtures().join("pipeline.json")).map_err(|e| e.to_string())?;
    let input = std::fs::read(fixtures().join("pipeline_fixture.jsonl")).map_err(|e| e.to_string())?;
    let run = || {
        let mut out = Vec::new();
        run_pipeline(input.as_slice(), &mut out, &cfg).map(|s| (out, s)).map_err(|e| e.to_string())
    };
    let (out, stats) = run()?;
    ensure!(stats.kept == 17, "kept {}", stats.kept);
    ensure!(stats.redactions[&PiiClass::Email] == 3, "EMAIL redactions {}", stats.redactions[&PiiClass::Email]);
    let text = String::from_utf8(out.clone()).map_err(|e| e.to_string())?;
    for line in text.lines() {
        let pair: ConversationPair = serde_json::from_str(line).map_err(|e| e.to_string())?;
        ensure!(
            !contains_pii(&pair.prompt_text, &cfg.pii_rules) && !contains_pii(&pair.response_text, &cfg.pii_rules),
            "PII left in {}",
            pair.id
        );
    }
    let (again, stats2) = run()?;
    ensure!(again == out && stats2 == stats, "second run differs");

    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let cli_out = dir.path().join("clean.jsonl");
    solace(&[
        "pipeline",
        "--in",
        p(&fixtures().join("pipeline_fixture.jsonl")),
        "--out",
        p(&cli_out),
        "--config",
        p(&fixtures().join("pipeline.json")),
    ])?;
    ensure!(std::fs::read(&cli_out).map_err(|e| e.to_string())? == out, "CLI output differs from library output");
    Ok("17 kept, 3 EMAIL redactions, no PII in output, repeat runs byte-identical".into())
}

fn gateway() -> Outcome {
    let work = tempfile::tempdir().map_err(|e| e.to_string())?;
    let conf_dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let conf = conf_dir.path().join("gateway.json");
    std::fs::write(&conf, r#"{ "server": { "bind": "127.0.0.1:0" }, "backend": { "kind": "mock", "mock": { "mode": "echo" } } }"#)
        .map_err(|e| e.to_string())?;
    let mut child = Command::new(env!("CARGO_BIN_EXE_solace"))
        .args(["serve", "--config", p(&conf)])
        .current_dir(work.path())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .map_err(|e| e.to_string())?;
    let mut first = String::new();
    BufReader::new(child.stdout.take().unwrap())
        .read_line(&mut first)
        .map_err(|e| e.to_string())?;
    let base = match first.trim().strip_prefix("listening on ") {
        Some(b) => b.to_owned(),
        None => {
            let _ = child.kill();
            return Err(format!("unexpected startup line {first:?}"));
        }
    };

    let rt = tokio::runtime::Runtime::new().map_err(|e| e.to_string())?;
    let results: Result<Vec<(String, u16, serde_json::Value, u128)>, String> = rt.block_on(async {
        let client = reqwest::Client::new();
        let tasks: Vec<_> = (0..100)
            .map(|i| {
                let client = client.clone();
                let url = format!("{base}/v1/chat");
                tokio::spawn(async move {
                    let message = format!("session {i} private note qx{i}marker about my week");
                    let start = Instant::now();
                    let r = client
                        .post(url)
                        .json(&serde_json::json!({ "message": message }))
                        .send()
                        .await
                        .map_err(|e| e.to_string())?;
                    let status = r.status().as_u16();
                    let body: serde_json::Value = r.json().await.map_err(|e| e.to_string())?;
                    Ok::<_, String>((message, status, body, start.elapsed().as_millis()))
                })
            })
            .collect();
        let mut out = Vec::new();
        for t in tasks {
            out.push(t.await.map_err(|e| e.to_string())??);
        }
        Ok(out)
    });

    let _ = Command::new("kill").args(["-INT", &child.id().to_string()]).status();
    let status = child.wait().map_err(|e| e.to_string())?;
    let mut logs = String::new();
    child.stderr.take().unwrap().read_to_string(&mut logs).map_err(|e| e.to_string())?;
    let results = results?;

    let mut latencies = Vec::new();
    for (message, status, body, _) in &results {
        ensure!(*status < 500, "5xx response {status}");
        ensure!(*status == 200, "status {status}");
        ensure!(body["reply"] == format!("MOCK: {message}"), "reply not paired with its request");
        ensure!(body["disclosure"] == solace_gateway::DISCLOSURE, "missing disclosure");
        latencies.push(body["latency_ms"].as_u64().ok_or("missing latency")?);
    }
    latencies.sort_unstable();
    let p50 = latencies[latencies.len() / 2 - 1];
    ensure!(p50 < 50, "p50 latency {p50} ms");
    ensure!(status.code() == Some(0), "server exited with {status}");
    let leftovers: Vec<_> = std::fs::read_dir(work.path()).map_err(|e| e.to_string())?.collect();
    ensure!(leftovers.is_empty(), "working directory has {} entries", leftovers.len());
    ensure!(logs.contains("gateway listening"), "server logs were not captured");
    ensure!(!logs.contains("marker"), "message text reached the logs");
    Ok(format!(
        "100 concurrent chats, 0 x 5xx, echo pairing and disclosure ok, p50 {p50} ms, working dir empty, clean shutdown"
    ))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("metric oracle suite", metric_oracles),
        ("hand fixtures", hand_fixtures),
        ("schedule exactness", schedule_exactness),
        ("gradient check", gradient_check),
        ("accumulation equivalence", accumulation),
        ("lora", lora),
        ("training end-to-end", training_end_to_end),
        ("epoch curve trend shape", trend_shape),
        ("pipeline fixture", pipeline_fixture),
        ("gateway", gateway),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let outcome = std::panic::catch_unwind(check).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        match outcome {
            Ok(detail) => println!("PASS {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL {name}: {detail}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
