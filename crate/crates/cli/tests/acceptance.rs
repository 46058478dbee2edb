//! End-to-end acceptance checks. Each criterion prints one PASS/FAIL line
//! to stderr (uncaptured), and the test fails if any criterion fails.

use std::collections::{BTreeSet, HashMap};
use std::io::Write as _;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::Arc;
use std::time::{Duration, Instant};

use acoso::io;
use acoso_core::corpus::{generate_synthetic_corpus, preprocess, KeywordSet, Label, PreprocessConfig, SyntheticSpec};
use acoso_core::embeddings::{build_embedding_matrix, EmbeddingError, EmbeddingMatrix, WordVectorStore};
use acoso_core::eval::{run_iteration, split_indices, Checkpoint, TrainConfig};
use acoso_core::model::{ModelConfig, ModelParams, ParamSlot};
use acoso_core::rng;
use acoso_core::vocab::{build_frequency, build_vocabulary, corpus_frequency, encode_dataset, DEFAULT_MAX_LEN};
use acoso_core::zipf::{fit_zipf, rank_frequency, RankFrequency};
use rand::Rng as _;

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        let holds: bool = $cond;
        if !holds {
            return Err(format!($($fmt)+));
        }
    };
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_acoso"))
}

fn run_bin(args: &[&str]) -> Result<String, String> {
    let out = bin().args(args).output().map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(format!(
            "`acoso {}` exited with {:?}: {}",
            args.join(" "),
            out.status.code(),
            String::from_utf8_lossy(&out.stderr)
        ));
    }
    Ok(String::from_utf8_lossy(&out.stdout).into_owned())
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs())
}

fn random_embedding(rows: usize, dim: usize, seed: u64) -> Arc<EmbeddingMatrix> {
    let mut r = rng::seeded(seed);
    let data = (0..rows * dim).map(|_| r.gen_range(-1.0..1.0)).collect();
    Arc::new(EmbeddingMatrix::from_rows(rows, dim, data, 1.0))
}

// --- gradient oracle -------------------------------------------------------

fn toy_config(seed: u64, fine_tune: bool) -> ModelConfig {
    ModelConfig {
        max_len: 6,
        dim: 4,
        filter_widths: vec![2, 3],
        filters_per_width: 3,
        learning_rate: 0.1,
        fine_tune_embeddings: fine_tune,
        seed,
    }
}

/// Toy model with seeded non-zero biases: with zero biases an all-padding
/// window sits exactly on the relu kink, where finite differences are
/// one-sided.
fn toy_model(seed: u64, fine_tune: bool) -> ModelParams {
    let mut p = ModelParams::init(toy_config(seed, fine_tune), random_embedding(12, 4, seed ^ 0xe3b)).unwrap();
    let mut r = rng::seeded(seed ^ 0xb1a5);
    for b in p.conv.iter_mut().flat_map(|bank| bank.bias.iter_mut()) {
        *b = r.gen_range(-0.5..0.5);
    }
    p.dense_bias = r.gen_range(-0.5..0.5);
    p
}

fn central_difference(p: &ModelParams, slot: ParamSlot, x: &[u32], y: Label, h: f64) -> f64 {
    let mut probe = p.clone();
    let orig = probe.get(slot);
    *probe.get_mut(slot) = orig + h;
    let plus = probe.loss(x, y).unwrap();
    *probe.get_mut(slot) = orig - h;
    let minus = probe.loss(x, y).unwrap();
    (plus - minus) / (2.0 * h)
}

fn gradient_oracle() -> Outcome {
    let start = Instant::now();
    let mut checked = 0usize;
    let mut worst = 0.0f64;
    for seed in 0..8u64 {
        let mut r = rng::seeded(seed);
        for fine_tune in [false, true] {
            let p = toy_model(seed, fine_tune);
            for case in 0..3 {
                let content = r.gen_range(2..=6usize);
                let mut x: Vec<u32> = (0..content).map(|_| r.gen_range(1..12u32)).collect();
                x.resize(6, 0);
                let y = if case % 2 == 0 { Label::Bullying } else { Label::NoBullying };
                let (_, g) = p.backward(&x, y).unwrap();
                for slot in p.slots() {
                    let a = g.get(slot);
                    let n = central_difference(&p, slot, &x, y, 1e-5);
                    if a.abs() < 1e-8 && n.abs() < 1e-8 {
                        continue;
                    }
                    let e = rel_err(a, n);
                    ensure!(e < 1e-4, "seed {seed} {slot:?}: analytic {a} numeric {n}");
                    worst = worst.max(e);
                    checked += 1;
                }
            }
        }
    }
    let t = start.elapsed();
    ensure!(t < Duration::from_secs(10), "took {t:?}");
    Ok(format!("8 seeds, {checked} components, max rel err {worst:.2e}, {t:.2?}"))
}

// --- overfit ----------------------------------------------------------------

fn synthetic(n_bullying: usize, n_clean: usize, seed: u64) -> Vec<acoso_core::LabeledText> {
    let pos = KeywordSet::default_bullying();
    let neg = KeywordSet::default_no_bullying();
    generate_synthetic_corpus(&SyntheticSpec {
        n_bullying,
        n_clean,
        keywords_pos: &pos,
        keywords_neg: &neg,
        filler_vocab_size: 500,
        zipf_alpha: 1.0,
        seed,
    })
    .unwrap()
}

fn overfit() -> Outcome {
    let start = Instant::now();
    let corpus = synthetic(100, 100, 11);
    let cfg = PreprocessConfig::spanish();
    let vocab = build_vocabulary(&corpus_frequency(&corpus, &cfg), None);
    let store = WordVectorStore::synthetic(vocab.tokens(), 32, 11).unwrap();
    let emb = Arc::new(build_embedding_matrix(&vocab, &store));
    let data = encode_dataset(&corpus, &cfg, &vocab, DEFAULT_MAX_LEN).unwrap();
    let model = ModelConfig::new(DEFAULT_MAX_LEN, 32);
    let train = TrainConfig {
        epochs: 8,
        ..TrainConfig::default()
    };
    let run = run_iteration(&data, &data, &model, emb, &train, 1, 11).map_err(|e| e.to_string())?;
    let last = run.checkpoints.last().unwrap();
    let t = start.elapsed();
    ensure!(run.checkpoints.len() == 8, "{} checkpoints", run.checkpoints.len());
    ensure!(last.train_accuracy >= 0.99, "epoch 8 training accuracy {}", last.train_accuracy);
    ensure!(t < Duration::from_secs(60), "took {t:?}");
    Ok(format!("200 texts, epoch 8 training accuracy {:.2}%, {t:.2?}", last.train_accuracy * 100.0))
}

// --- cross-validation through the binary ------------------------------------

fn parse_csv(text: &str) -> (String, Vec<Vec<String>>) {
    let mut lines = text.lines();
    let header = lines.next().unwrap_or_default().to_string();
    (header, lines.map(|l| l.split(',').map(String::from).collect()).collect())
}

struct CrossvalRun {
    dir: tempfile::TempDir,
}

fn crossval_run(jobs: &str) -> Result<CrossvalRun, String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let p = |n: &str| dir.path().join(n).to_string_lossy().into_owned();
    run_bin(&[
        "synth", "--bullying", "1000", "--clean", "1000", "--seed", "7", "--out", &p("corpus.csv"), "--vectors-out",
        &p("vecs.txt"), "--dim", "32",
    ])?;
    run_bin(&[
        "crossval", "--corpus", &p("corpus.csv"), "--embeddings", &p("vecs.txt"), "--iterations", "4", "--epochs", "8",
        "--seed", "7", "--jobs", jobs, "--out-dir", &p("out"),
    ])?;
    Ok(CrossvalRun { dir })
}

fn check_crossval(run: &CrossvalRun, elapsed: Duration) -> Outcome {
    let out = run.dir.path().join("out");
    let read = |n: &str| std::fs::read_to_string(out.join(n)).map_err(|e| format!("{n}: {e}"));

    let ckpts: Vec<_> = std::fs::read_dir(out.join("checkpoints"))
        .map_err(|e| e.to_string())?
        .filter_map(|e| e.ok())
        .filter(|e| e.path().extension().is_some_and(|x| x == "ckpt"))
        .collect();
    ensure!(ckpts.len() == 32, "{} checkpoint files", ckpts.len());
    for i in 1..=4 {
        for e in 1..=8 {
            let cp = io::load_checkpoint(&out.join("checkpoints").join(io::checkpoint_file_name(i, e)))
                .map_err(|e| e.to_string())?;
            ensure!(cp.iteration == i && cp.epoch == e, "checkpoint {i}/{e} metadata");
        }
    }
    let (h, rows) = parse_csv(&read("checkpoints.csv")?);
    ensure!(h == "iteration,epoch,accuracy,loss,file" && rows.len() == 32, "checkpoints.csv shape");

    let (h3, t3) = parse_csv(&read("table3.csv")?);
    ensure!(h3 == "iteration,selected_epoch,accuracy,loss", "table3 header `{h3}`");
    ensure!(t3.len() == 4, "table3 has {} rows", t3.len());
    for (i, row) in t3.iter().enumerate() {
        ensure!(row.len() == 4 && row[0] == (i + 1).to_string(), "table3 row {row:?}");
        let epoch: usize = row[1].parse().map_err(|_| format!("epoch `{}`", row[1]))?;
        ensure!((1..=8).contains(&epoch), "selected epoch {epoch}");
        let acc: f64 = row[2].parse().map_err(|_| format!("accuracy `{}`", row[2]))?;
        let loss: f64 = row[3].parse().map_err(|_| format!("loss `{}`", row[3]))?;
        ensure!((0.0..=100.0).contains(&acc) && loss >= 0.0, "table3 row {row:?}");
    }

    let (h4, t4) = parse_csv(&read("table4.csv")?);
    ensure!(h4 == "iteration,success_pct,fail_pct", "table4 header `{h4}`");
    ensure!(t4.len() == 5 && t4[4][0] == "average", "table4 needs 4 iteration rows and an average row");
    let mut sum = 0.0;
    for (i, row) in t4[..4].iter().enumerate() {
        ensure!(row.len() == 3 && row[0] == (i + 1).to_string(), "table4 row {row:?}");
        let s: f64 = row[1].parse().unwrap();
        let f: f64 = row[2].parse().unwrap();
        ensure!((s + f - 100.0).abs() < 0.011, "success + fail != 100 in {row:?}");
        sum += s;
    }
    let avg: f64 = t4[4][1].parse().unwrap();
    ensure!((avg - sum / 4.0).abs() <= 0.01, "average {avg} vs mean of rows {}", sum / 4.0);
    ensure!(avg >= 90.0, "average test success {avg}% < 90%");
    ensure!(elapsed < Duration::from_secs(600), "took {elapsed:?}");
    let per: Vec<&str> = t4[..4].iter().map(|r| r[1].as_str()).collect();
    Ok(format!("32 checkpoints, per-iteration success {} %, average {avg:.2}%, {elapsed:.2?}", per.join("/")))
}

fn determinism(a: &CrossvalRun, b: &CrossvalRun) -> Outcome {
    let mut files = vec!["table3.csv".to_string(), "table4.csv".into(), "checkpoints.csv".into(), "vocab.tsv".into()];
    for i in 1..=4 {
        for e in 1..=8 {
            files.push(format!("checkpoints/{}", io::checkpoint_file_name(i, e)));
        }
    }
    for f in &files {
        let x = std::fs::read(a.dir.path().join("out").join(f)).map_err(|e| e.to_string())?;
        let y = std::fs::read(b.dir.path().join("out").join(f)).map_err(|e| e.to_string())?;
        ensure!(x == y, "{f} differs between runs");
    }
    Ok(format!("{} output files byte-identical (--jobs 2 vs --jobs 1)", files.len()))
}

fn held_out_keyword_texts(run: &CrossvalRun) -> Outcome {
    let out = run.dir.path().join("out");
    let (_, t3) = parse_csv(&std::fs::read_to_string(out.join("table3.csv")).unwrap());
    let model = out.join("checkpoints").join(io::checkpoint_file_name(1, t3[0][1].parse().unwrap()));
    let texts: Vec<String> = KeywordSet::default_bullying()
        .phrases()
        .iter()
        .map(|p| format!("dari pufa {p} difu"))
        .collect();
    let input = run.dir.path().join("held_out.txt");
    std::fs::write(&input, texts.join("\n")).unwrap();
    let stdout = run_bin(&[
        "predict", "--model", &model.to_string_lossy(), "--vocab", &out.join("vocab.tsv").to_string_lossy(), "--input",
        &input.to_string_lossy(),
    ])?;
    let probs: Vec<(String, f64)> = stdout
        .lines()
        .map(|l| {
            let (label, p) = l.split_once(',').unwrap();
            (label.to_string(), p.parse().unwrap())
        })
        .collect();
    ensure!(probs.len() == texts.len(), "{} predictions for {} texts", probs.len(), texts.len());
    let confident = probs.iter().filter(|(l, p)| l == "1" && *p > 0.9).count();
    ensure!(
        confident * 10 >= texts.len() * 9,
        "only {confident}/{} bullying-phrase texts got label 1 with p > 0.9",
        texts.len()
    );
    Ok(format!("{confident}/{} texts with a bullying phrase scored label 1, p > 0.9", texts.len()))
}

// --- Zipf -------------------------------------------------------------------

/// Ordinary least squares slope of ln(count) on ln(rank), negated.
fn ols_alpha(counts: &[u64]) -> f64 {
    let pts: Vec<(f64, f64)> = counts
        .iter()
        .enumerate()
        .map(|(i, &c)| (((i + 1) as f64).ln(), (c as f64).ln()))
        .collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    -sxy / sxx
}

fn zipf_recovery() -> Outcome {
    let mut notes = Vec::new();
    for (k, &alpha) in [0.8, 1.0, 1.2].iter().enumerate() {
        let types = 200;
        let weights: Vec<f64> = (1..=types).map(|r| (r as f64).powf(-alpha)).collect();
        let total: f64 = weights.iter().sum();
        let mut r = rng::seeded(100 + k as u64);
        let mut draws = Vec::with_capacity(100_000);
        for _ in 0..100_000 {
            let mut u = r.gen::<f64>() * total;
            let mut idx = types - 1;
            for (i, w) in weights.iter().enumerate() {
                if u < *w {
                    idx = i;
                    break;
                }
                u -= w;
            }
            draws.push(vec![format!("w{idx}")]);
        }
        let freq = build_frequency(&draws);
        let fit = fit_zipf(&rank_frequency(&freq).unwrap(), None).unwrap();
        ensure!((fit.alpha - alpha).abs() <= 0.1, "sampled alpha {alpha}: fitted {}", fit.alpha);
        notes.push(format!("{alpha}->{:.3}", fit.alpha));
    }
    for &alpha in &[0.5, 0.8, 1.0, 1.2, 1.5, 2.0] {
        let counts: Vec<u64> = (1..=100).map(|r| (1e6 * (r as f64).powf(-alpha)).round() as u64).collect();
        let fit = fit_zipf(&RankFrequency::from_counts(&counts), None).unwrap();
        ensure!((fit.alpha - alpha).abs() <= 0.02, "exact alpha {alpha}: fitted {}", fit.alpha);
        let oracle = ols_alpha(&counts);
        ensure!((fit.alpha - oracle).abs() < 1e-9, "fit {} vs OLS oracle {oracle}", fit.alpha);
    }
    Ok(format!("sampled (1e5 draws, 200 types) {}; exact data alpha 0.5..2.0 within 0.02", notes.join(", ")))
}

// --- preprocessing golden suite ---------------------------------------------

fn preprocessing_golden() -> Outcome {
    let es = PreprocessConfig::spanish();
    let mut folded = PreprocessConfig::spanish();
    folded.fold_accents = true;
    let bare = PreprocessConfig::default();
    let cases: &[(&PreprocessConfig, &str, &[&str])] = &[
        (&es, "Hola mundo", &["hola", "mundo"]),
        (&es, "ERES UN IDIOTA", &["eres", "idiota"]),
        (&es, "mira esto https://t.co/abc123 jaja", &["mira", "jaja"]),
        (&es, "www.ejemplo.com tonto", &["tonto"]),
        (&es, "HTTP://MAYUS.COM adios", &["adios"]),
        (&es, "@maria eres fea", &["eres", "fea"]),
        (&es, "@maria, cállate", &["cállate"]),
        (&es, "hola@juan", &["hola", "juan"]),
        (&es, "¡¡¡Qué asco!!!", &["asco"]),
        (&es, "tienes 15 años y 2 gatos", &["tienes", "años", "gatos"]),
        (&es, "R2D2 es un robot", &["r", "d", "robot"]),
        (&es, "niño PEQUEÑO", &["niño", "pequeño"]),
        (&es, "Narizón, cabezón.", &["narizón", "cabezón"]),
        (&es, "el perro de la casa", &["perro", "casa"]),
        (&es, "", &[]),
        (&es, "   \t  ", &[]),
        (&es, "123 456 !!!", &[]),
        (&es, "hola#amigo", &["hola", "amigo"]),
        (&es, "e-mail: test@correo.es", &["mail", "test", "correo"]),
        (&es, "pingüino Ñandú", &["pingüino", "ñandú"]),
        (&es, "te odio, me das asco", &["te", "odio", "me", "das", "asco"]),
        (&es, "Eres patético 😡😡", &["eres", "patético"]),
        (&es, "x.https://a.b y", &["x", "b"]),
        (&es, "¿Por qué NO?", &[]),
        (&es, "jajajaja...xD", &["jajajaja", "xd"]),
        (&folded, "Qué patético niño", &["patetico", "niño"]),
        (&folded, "ÁRBOL pingüino", &["arbol", "pinguino"]),
        (&bare, "de la casa", &["de", "la", "casa"]),
    ];
    for (cfg, input, expected) in cases {
        let got = preprocess(input, cfg);
        ensure!(got == *expected, "{input:?}: got {got:?}, expected {expected:?}");
    }
    Ok(format!("{} cases", cases.len()))
}

// --- vocabulary oracle ------------------------------------------------------

fn vocabulary_oracle() -> Outcome {
    let alphabet = ["a", "b", "c", "ab", "ba", "ñu", "aa", "zz", "m", "mm"];
    for c in 0..10u64 {
        let mut r = rng::seeded(500 + c);
        let n_types = r.gen_range(1..=50usize);
        let types: Vec<String> = (0..n_types)
            .map(|i| format!("{}{}", alphabet[r.gen_range(0..alphabet.len())], i % 7))
            .collect();
        let docs: Vec<Vec<String>> = (0..r.gen_range(1..20))
            .map(|_| (0..r.gen_range(0..15)).map(|_| types[r.gen_range(0..types.len())].clone()).collect())
            .collect();

        let mut counts: HashMap<&str, u64> = HashMap::new();
        for t in docs.iter().flatten() {
            *counts.entry(t).or_default() += 1;
        }
        let mut expected: Vec<(&str, u64)> = counts.into_iter().collect();
        expected.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));

        let vocab = build_vocabulary(&build_frequency(&docs), None);
        ensure!(vocab.len() == expected.len(), "corpus {c}: {} vs {} types", vocab.len(), expected.len());
        for (i, (tok, count)) in expected.iter().enumerate() {
            let idx = i as u32 + 1;
            ensure!(vocab.index(tok) == Some(idx), "corpus {c}: {tok} -> {:?}, expected {idx}", vocab.index(tok));
            ensure!(vocab.count(idx) == Some(*count), "corpus {c}: count of {tok}");
        }
        ensure!(vocab.oov_index() as usize == expected.len() + 1, "corpus {c}: OOV index");
        ensure!(vocab.index("not-a-token").is_none(), "corpus {c}: unknown token indexed");
    }
    Ok("10 random corpora match the brute-force ranking".into())
}

// --- split conservation -----------------------------------------------------

fn split_conservation() -> Outcome {
    let mut r = rng::seeded(77);
    for _ in 0..100 {
        let n = r.gen_range(1..5000usize);
        let seed = r.gen::<u64>();
        let (train, test) = split_indices(n, 0.9, seed).map_err(|e| e.to_string())?;
        ensure!(train.len() + test.len() == n, "n={n}: sizes do not sum");
        ensure!(train.len() == (n as f64 * 0.9).floor() as usize, "n={n}: train size {}", train.len());
        let tr: BTreeSet<usize> = train.iter().copied().collect();
        let te: BTreeSet<usize> = test.iter().copied().collect();
        ensure!(tr.len() == train.len() && te.len() == test.len(), "n={n}: duplicates");
        ensure!(tr.is_disjoint(&te), "n={n}: overlap");
        ensure!(tr.union(&te).count() == n && tr.iter().chain(&te).all(|&i| i < n), "n={n}: not a partition");
    }
    Ok("100 random (n, seed) pairs".into())
}

// --- checkpoint round trip --------------------------------------------------

fn trained_checkpoint(seed: u64, fine_tune: bool) -> Checkpoint {
    let mut cfg = ModelConfig::new(10, 5);
    cfg.filter_widths = vec![1, 2, 4];
    cfg.filters_per_width = 6;
    cfg.fine_tune_embeddings = fine_tune;
    cfg.seed = seed;
    let mut p = ModelParams::init(cfg, random_embedding(22, 5, seed)).unwrap();
    let mut r = rng::seeded(seed);
    for _ in 0..20 {
        let xs: Vec<Vec<u32>> = (0..8).map(|_| (0..10).map(|_| r.gen_range(0..22u32)).collect()).collect();
        let batch: Vec<(&[u32], Label)> = xs
            .iter()
            .map(|x| (x.as_slice(), if x[0] % 2 == 0 { Label::Bullying } else { Label::NoBullying }))
            .collect();
        p.train_step(&batch).unwrap();
    }
    Checkpoint {
        iteration: 2,
        epoch: 5,
        params: p,
        train_accuracy: 0.875,
        train_loss: 0.3125,
    }
}

fn checkpoint_round_trip() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut rejected = 0;
    for (k, fine_tune) in [false, true].into_iter().enumerate() {
        let cp = trained_checkpoint(40 + k as u64, fine_tune);
        let path = dir.path().join(format!("m{k}.ckpt"));
        io::save_checkpoint(&path, &cp).map_err(|e| e.to_string())?;
        let loaded = io::load_checkpoint(&path).map_err(|e| e.to_string())?;
        ensure!(loaded == cp, "loaded checkpoint differs");

        let mut r = rng::seeded(900 + k as u64);
        for _ in 0..100 {
            let len = r.gen_range(0..=10usize);
            let mut x: Vec<u32> = (0..len).map(|_| r.gen_range(0..22u32)).collect();
            x.resize(10, 0);
            let a = cp.params.forward(&x).unwrap();
            let b = loaded.params.forward(&x).unwrap();
            ensure!(a.to_bits() == b.to_bits(), "forward {a} vs {b} on {x:?}");
        }

        let bytes = std::fs::read(&path).unwrap();
        let mut corrupt = |mutate: &dyn Fn(&mut Vec<u8>)| -> Result<(), String> {
            let mut b = bytes.clone();
            mutate(&mut b);
            let p = dir.path().join("bad.ckpt");
            std::fs::write(&p, &b).unwrap();
            ensure!(io::load_checkpoint(&p).is_err(), "corrupted checkpoint accepted");
            rejected += 1;
            Ok(())
        };
        for pos in (0..bytes.len()).step_by(bytes.len() / 37 + 1) {
            corrupt(&|b| b[pos] ^= 0x10)?;
        }
        corrupt(&|b| b.truncate(b.len() - 1))?;
        corrupt(&|b| b.truncate(30))?;
        corrupt(&|b| b.push(0))?;
        corrupt(&|b| b[..8].copy_from_slice(b"NOTACKPT"))?;
        corrupt(&|b| b.clear())?;
    }
    Ok(format!("2 models x 100 inputs bit-identical; {rejected} corrupted files rejected"))
}

// --- embedding loader -------------------------------------------------------

fn embedding_loader() -> Outcome {
    let expected: [(&str, [f64; 4]); 3] = [
        ("hola", [0.1, 0.2, 0.3, 0.4]),
        ("amigo", [1.0, 0.0, -1.0, 2.5]),
        ("feo", [-0.5, 0.25, 1e-3, -7.0]),
    ];
    for name in ["vectors_header.txt", "vectors_plain.txt"] {
        let path = fixture(name);
        ensure!(io::detect_dim(&path).map_err(|e| e.to_string())? == 4, "{name}: detected dim");
        let store = io::load_word_vectors(&path, 4, None).map_err(|e| e.to_string())?;
        ensure!(store.len() == 3, "{name}: {} vectors", store.len());
        for (tok, v) in &expected {
            ensure!(store.get(tok) == Some(&v[..]), "{name}: {tok} -> {:?}", store.get(tok));
        }
        let only = io::load_word_vectors(&path, 4, Some(["feo".to_string()].into())).map_err(|e| e.to_string())?;
        ensure!(only.len() == 1 && only.get("feo").is_some(), "{name}: filter");
    }

    let dim_err = |name: &str| match io::load_word_vectors(&fixture(name), 4, None) {
        Err(io::Error::Embedding { source, .. }) => Ok(source),
        other => Err(format!("{name}: expected an embedding error, got {other:?}")),
    };
    ensure!(
        dim_err("vectors_bad_dim.txt")? == EmbeddingError::Dimension { line: 3, expected: 4, found: 3 },
        "bad_dim error"
    );
    ensure!(
        dim_err("vectors_bad_header.txt")? == EmbeddingError::Dimension { line: 1, expected: 4, found: 5 },
        "bad_header error"
    );
    ensure!(
        matches!(dim_err("vectors_non_numeric.txt")?, EmbeddingError::NonNumeric { line: 3, .. }),
        "non-numeric error"
    );

    let store = io::load_word_vectors(&fixture("vectors_header.txt"), 4, None).unwrap();
    for v_size in [0usize, 1, 3, 7] {
        let toks: Vec<Vec<String>> =
            vec![["amigo", "nuevo", "hola", "x", "y", "z", "feo"][..v_size].iter().map(|s| s.to_string()).collect()];
        let vocab = build_vocabulary(&build_frequency(&toks), None);
        let m = build_embedding_matrix(&vocab, &store);
        ensure!(m.rows() == v_size + 2 && m.dim() == 4, "V={v_size}: shape {}x{}", m.rows(), m.dim());
        ensure!(m.as_slice().len() == (v_size + 2) * 4, "V={v_size}: data length");
        ensure!(m.row(0).iter().all(|&x| x == 0.0), "V={v_size}: padding row not zero");
        for (i, tok) in vocab.tokens().iter().enumerate() {
            if let Some(v) = store.get(tok) {
                ensure!(m.row(i + 1) == v, "V={v_size}: row for {tok}");
            }
        }
    }
    Ok("header/plain fixtures exact; line-numbered errors; (V+2)x4 with zero padding row".into())
}

#[test]
fn acceptance_criteria() {
    let mut failures = Vec::new();
    let mut report = |name: &str, f: &mut dyn FnMut() -> Outcome| {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            Err(e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        let line = match &outcome {
            Ok(detail) => format!("PASS  {name}: {detail}"),
            Err(why) => format!("FAIL  {name}: {why} ({:.2?})", start.elapsed()),
        };
        let _ = writeln!(std::io::stderr().lock(), "{line}");
        if outcome.is_err() {
            failures.push(line);
        }
    };

    report("gradient oracle", &mut gradient_oracle);
    report("overfit sanity", &mut overfit);

    let start = Instant::now();
    let first = crossval_run("2");
    let elapsed = start.elapsed();
    let second = crossval_run("1");
    report("cross-validation analogue", &mut || check_crossval(first.as_ref()?, elapsed));
    report("held-out keyword prediction", &mut || held_out_keyword_texts(first.as_ref()?));
    report("determinism", &mut || determinism(first.as_ref()?, second.as_ref()?));

    report("zipf recovery", &mut zipf_recovery);
    report("preprocessing golden suite", &mut preprocessing_golden);
    report("vocabulary oracle", &mut vocabulary_oracle);
    report("split conservation", &mut split_conservation);
    report("checkpoint round trip", &mut checkpoint_round_trip);
    report("embedding loader", &mut embedding_loader);

    assert!(failures.is_empty(), "failed criteria:\n{}", failures.join("\n"));
}
