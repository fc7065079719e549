//! End-to-end acceptance checks. Prints one line per criterion and exits
//! non-zero when any criterion that ran has failed.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use baitscore::baseline::{ab_fit, ab_predict, AbConfig, FeatureMatrix, FitTrace, Loss, SparseVector, StumpEnsemble};
use baitscore::cues::CueLexicons;
use baitscore::eval::MetricsReport;
use baitscore::media::{category_proportions, proportion_trend, CategoryMap};
use baitscore::model::{
    learnability_config, merge_noisy, network_grad_check, pseudo_label, self_train_report, tiny_config, train, Branch,
    Network, TrainedModel, VectorInput, PUBLISHED_LABELLED, PUBLISHED_UNLABELLED,
};
use baitscore::nn::primitive_checks;
use baitscore::synth::{random_tags, separable_corpus, trend_fixture, unlabelled_corpus};
use baitscore::text::{clean, Vocabulary};
use baitscore::Exec;

use common::*;

enum Verdict {
    Pass(String),
    Fail(String),
    Skip(String),
}

type Check = fn() -> Verdict;

fn check(ok: bool, detail: String) -> Verdict {
    if ok {
        Verdict::Pass(detail)
    } else {
        Verdict::Fail(detail)
    }
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

// ---- gradient oracle ----

fn gradient_oracle() -> Verdict {
    let start = Instant::now();
    let mut worst = (0.0f64, String::new());
    let mut note = |name: String, err: f64| {
        if err > worst.0 || worst.1.is_empty() {
            worst = (err, name);
        }
    };
    for exec in [Exec::Sequential, Exec::Parallel] {
        for (name, r) in primitive_checks(exec).unwrap() {
            note(name.to_string(), r.max_rel_error);
        }
    }
    for branch in [Branch::Cnn, Branch::Lstm] {
        let cfg = tiny_config(branch, vec![VectorInput::CuesTweet, VectorInput::CuesArticle, VectorInput::Image]);
        let r = network_grad_check(&cfg, 3, 7, Exec::Parallel).unwrap();
        note(format!("{branch} fusion network"), r.max_rel_error);
    }
    let secs = start.elapsed().as_secs_f64();
    check(
        worst.0 < 1e-4 && secs < 60.0,
        format!("max relative error {:.2e} ({}), {secs:.1} s", worst.0, worst.1),
    )
}

// ---- learnability ----

fn learnability() -> Verdict {
    let ds = separable_corpus(32, 11);
    let lex = CueLexicons::bundled();
    let y = ds.targets().unwrap();
    let mut parts = Vec::new();
    let mut ok = true;
    for branch in [Branch::Cnn, Branch::Lstm] {
        for cues in [false, true] {
            let start = Instant::now();
            let cfg = learnability_config(branch, cues);
            let toks: Vec<Vec<String>> = ds.posts().iter().map(|p| clean(&p.tweet_text())).collect();
            let vocab = Vocabulary::fit(&toks, cfg.vocab_size).unwrap();
            let m = train(Network::build(&cfg, None).unwrap(), &ds, &vocab, &lex, None, Exec::Parallel).unwrap();
            let preds = m.predict(&ds, &lex, None, Exec::Parallel).unwrap();
            let mse = preds.iter().zip(&y).map(|(p, t)| (p.clickbait_score - t).powi(2)).sum::<f64>() / y.len() as f64;
            let secs = start.elapsed().as_secs_f64();
            ok &= mse < 0.01 && secs < 60.0 && cfg.epochs <= 200;
            parts.push(format!("{branch}{} mse {mse:.1e} in {} epochs, {secs:.1} s", if cues { "+cues" } else { "" }, cfg.epochs));
        }
    }
    check(ok, parts.join("; "))
}

// ---- metric oracle ----

const FIXTURE_TRUTH: [f64; 10] = [0.0, 0.06, 0.2, 0.332, 0.46, 0.532, 0.6, 0.732, 0.86, 1.0];
const FIXTURE_PRED: [f64; 10] = [0.1, 0.0, 0.55, 0.3, 0.5, 0.45, 0.7, 0.9, 0.62, 0.8];

/// Exact rational values for the fixture above: mse 35159/1250000,
/// mae 343/2500, r2 450989/626784, 4 TP / 2 FP / 1 FN.
const EXPECTED: [(&str, f64); 7] = [
    ("mse", 0.0281272),
    ("rmse", 0.16771165731695575),
    ("mae", 0.1372),
    ("r2", 0.7195285776280186),
    ("precision", 2.0 / 3.0),
    ("recall", 0.8),
    ("f1", 8.0 / 11.0),
];

fn metric_oracle() -> Verdict {
    let r = MetricsReport::from_scores(&FIXTURE_PRED, &FIXTURE_TRUTH, 0.5).unwrap();
    let got = [r.mse, r.rmse, r.mae, r.r2, r.precision, r.recall, r.f1];
    let worst = EXPECTED
        .iter()
        .zip(got)
        .map(|((name, e), g)| ((e - g).abs(), *name))
        .fold((0.0, ""), |a, b| if b.0 > a.0 { b } else { a });
    let small = MetricsReport::from_scores(&[0.2, 0.4], &[0.3, 0.8], 0.5).unwrap();
    check(
        worst.0 <= 1e-9 && close(small.mse, 0.085, 1e-12) && close(small.mae, 0.25, 1e-12),
        format!("10 pairs, max deviation {:.1e} ({}); mse([0.2,0.4],[0.3,0.8]) = {}", worst.0, worst.1, small.mse),
    )
}

// ---- AdaBoost transcript oracle ----

/// Dense brute-force least-squares stump over the rows drawn this round.
/// Returns (feature, threshold, left mean, right mean).
fn brute_force_stump(x: &[Vec<f64>], y: &[f64], counts: &[u32]) -> (usize, f64, f64, f64) {
    let mut best: Option<(f64, usize, f64, f64, f64)> = None;
    for j in 0..x[0].len() {
        let mut values: Vec<f64> = (0..x.len()).filter(|&i| counts[i] > 0).map(|i| x[i][j]).collect();
        values.sort_by(f64::total_cmp);
        values.dedup();
        for pair in values.windows(2) {
            let th = pair[0] + (pair[1] - pair[0]) / 2.0;
            let (mut lc, mut ls, mut rc, mut rs) = (0.0, 0.0, 0.0, 0.0);
            for i in 0..x.len() {
                let c = counts[i] as f64;
                if x[i][j] <= th {
                    lc += c;
                    ls += c * y[i];
                } else {
                    rc += c;
                    rs += c * y[i];
                }
            }
            let (lm, rm) = (ls / lc, rs / rc);
            let sse: f64 = (0..x.len())
                .map(|i| {
                    let m = if x[i][j] <= th { lm } else { rm };
                    counts[i] as f64 * (y[i] - m).powi(2)
                })
                .sum();
            if best.is_none_or(|b| sse < b.0 - 1e-12) {
                best = Some((sse, j, th, lm, rm));
            }
        }
    }
    let (_, j, th, l, r) = best.expect("at least two distinct sampled values");
    (j, th, l, r)
}

fn lower_weighted_median(values: &[f64], weights: &[f64]) -> f64 {
    let mut pairs: Vec<(f64, f64)> = values.iter().copied().zip(weights.iter().copied()).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let half = weights.iter().sum::<f64>() / 2.0;
    let mut acc = 0.0;
    for (v, w) in &pairs {
        acc += w;
        if acc >= half {
            return *v;
        }
    }
    pairs.last().unwrap().0
}

/// Replays the AdaBoost.R2 recurrence from the recorded sample counts and
/// returns the largest deviation from the fitted trace and ensemble.
fn replay(x: &[Vec<f64>], y: &[f64], loss: Loss, trace: &FitTrace, ens: &StumpEnsemble) -> Result<f64, String> {
    let n = y.len();
    let (lo, hi) = y.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &t| (a.min(t), b.max(t)));
    let mut w = vec![1.0 / n as f64; n];
    let mut dev = 0.0f64;
    let mut bump = |a: f64, b: f64| dev = dev.max((a - b).abs());
    let mut stumps = Vec::new();
    let mut alphas = Vec::new();
    for (k, round) in trace.rounds.iter().enumerate() {
        if round.sample_counts.iter().sum::<u32>() as usize != n {
            return Err(format!("round {k} drew the wrong number of rows"));
        }
        let (j, th, l, r) = brute_force_stump(x, y, &round.sample_counts);
        let (l, r) = (l.clamp(lo, hi), r.clamp(lo, hi));
        if round.stump.feature as usize != j {
            return Err(format!("round {k}: feature {} vs {j}", round.stump.feature));
        }
        bump(round.stump.threshold, th);
        bump(round.stump.left, l);
        bump(round.stump.right, r);
        let out: Vec<f64> = x.iter().map(|row| if row[j] <= th { l } else { r }).collect();
        let err: Vec<f64> = out.iter().zip(y).map(|(p, t)| (p - t).abs()).collect();
        let max_err = err.iter().copied().fold(0.0, f64::max);
        bump(round.max_error, max_err);
        if max_err == 0.0 {
            stumps.push((j, th, l, r));
            alphas.push(1.0);
            break;
        }
        let losses: Vec<f64> = err
            .iter()
            .map(|e| {
                let z = e / max_err;
                match loss {
                    Loss::Linear => z,
                    Loss::Square => z * z,
                    Loss::Exponential => 1.0 - (-z).exp(),
                }
            })
            .collect();
        let avg: f64 = losses.iter().zip(&w).map(|(a, b)| a * b).sum();
        bump(round.avg_loss, avg);
        if avg >= 0.5 {
            if stumps.is_empty() {
                stumps.push((j, th, l, r));
                alphas.push(1.0);
            }
            break;
        }
        let beta = avg / (1.0 - avg);
        let alpha = (1.0 / beta).ln();
        let (Some(got_beta), Some(got_alpha)) = (round.beta, round.stump_weight) else {
            return Err(format!("round {k} is missing β or its stump weight"));
        };
        bump(got_beta, beta);
        bump(got_alpha, alpha);
        for (wi, li) in w.iter_mut().zip(&losses) {
            *wi *= beta.powf(1.0 - li);
        }
        let total: f64 = w.iter().sum();
        w.iter_mut().for_each(|wi| *wi /= total);
        for (a, b) in round.weights.iter().zip(&w) {
            bump(*a, *b);
        }
        stumps.push((j, th, l, r));
        alphas.push(alpha);
    }
    if stumps.len() != ens.stumps.len() {
        return Err(format!("{} stumps kept vs {} replayed", ens.stumps.len(), stumps.len()));
    }
    for (a, b) in ens.weights.iter().zip(&alphas) {
        bump(*a, *b);
    }
    for row in x {
        let outs: Vec<f64> = stumps.iter().map(|&(j, th, l, r)| if row[j] <= th { l } else { r }).collect();
        let want = lower_weighted_median(&outs, &alphas).clamp(0.0, 1.0);
        bump(ab_predict(ens, &SparseVector::from_dense(row)), want);
    }
    Ok(dev)
}

fn noisy_fixture() -> (Vec<Vec<f64>>, Vec<f64>) {
    let x: Vec<Vec<f64>> = (0..24)
        .map(|i| {
            let i = i as f64;
            vec![i, (i * 7.0) % 5.0, if (i as usize).is_multiple_of(3) { 0.0 } else { (i * 0.37).sin().abs() }]
        })
        .collect();
    let y = x.iter().map(|r| (0.04 * r[0] + 0.1 * (r[1] * 1.3).sin().abs()).clamp(0.0, 1.0)).collect();
    (x, y)
}

fn adaboost_oracle() -> Verdict {
    let x4: Vec<Vec<f64>> = (0..4).map(|i| vec![i as f64]).collect();
    let y4 = [0.0, 0.0, 1.0, 1.0];
    let cfg = AbConfig {
        n_estimators: 10,
        ..AbConfig::default()
    };
    let (ens, trace) = ab_fit(&FeatureMatrix::from_dense(&x4).unwrap(), &y4, cfg, Exec::Sequential).unwrap();
    let dev4 = match replay(&x4, &y4, cfg.loss, &trace, &ens) {
        Ok(d) => d,
        Err(e) => return Verdict::Fail(format!("4-point fixture: {e}")),
    };
    let mse = x4
        .iter()
        .zip(&y4)
        .map(|(r, t)| (ab_predict(&ens, &SparseVector::from_dense(r)) - t).powi(2))
        .sum::<f64>()
        / 4.0;

    let (xn, yn) = noisy_fixture();
    let mut worst = 0.0f64;
    let mut rounds = 0;
    for loss in [Loss::Linear, Loss::Square, Loss::Exponential] {
        for seed in 0..3 {
            let cfg = AbConfig {
                n_estimators: 20,
                loss,
                seed,
            };
            for exec in [Exec::Sequential, Exec::Parallel] {
                let (e, t) = ab_fit(&FeatureMatrix::from_dense(&xn).unwrap(), &yn, cfg, exec).unwrap();
                rounds += t.rounds.len();
                match replay(&xn, &yn, loss, &t, &e) {
                    Ok(d) => worst = worst.max(d),
                    Err(msg) => return Verdict::Fail(format!("noisy fixture, {loss:?} seed {seed}: {msg}")),
                }
            }
        }
    }
    check(
        dev4 <= 1e-9 && worst <= 1e-9 && mse < 0.01,
        format!(
            "4-point: {} round(s), deviation {dev4:.1e}, mse {mse:.1e}; noisy: {rounds} rounds replayed, deviation {worst:.1e}",
            trace.rounds.len()
        ),
    )
}

// ---- dataset statistics and full-scale replication ----

fn corpus_dir() -> Option<PathBuf> {
    std::env::var_os("BAITSCORE_CORPUS_DIR").map(PathBuf::from)
}

fn stats(dir: &Path, with_truth: bool) -> serde_json::Value {
    let inst = dir.join("instances.jsonl");
    let truth = dir.join("truth.jsonl");
    let mut args = vec!["-q", "ingest", "--instances", s(&inst), "--stats"];
    if with_truth {
        args.extend(["--truth", s(&truth)]);
    }
    serde_json::from_slice(&ok(&args).stdout).unwrap()
}

fn dataset_statistics() -> Verdict {
    let Some(root) = corpus_dir() else {
        return Verdict::Skip("set BAITSCORE_CORPUS_DIR to a directory with 2k/, 20k/ and unlabelled/".into());
    };
    let small = stats(&root.join("2k"), true);
    let large = stats(&root.join("20k"), true);
    let unl = stats(&root.join("unlabelled"), false);
    let got = (
        small["n_posts"].as_u64(),
        large["n_posts"].as_u64(),
        unl["n_posts"].as_u64(),
        small["display_ratio"].as_str(),
        large["display_ratio"].as_str(),
    );
    check(
        got == (Some(2_495), Some(19_538), Some(80_012), Some("1:2.23"), Some("1:3.10")),
        format!("{got:?}"),
    )
}

fn full_scale() -> Verdict {
    let (Some(root), Some(emb)) = (corpus_dir(), std::env::var_os("BAITSCORE_EMBEDDINGS")) else {
        return Verdict::Skip("needs BAITSCORE_CORPUS_DIR and BAITSCORE_EMBEDDINGS".into());
    };
    let emb = PathBuf::from(emb);
    let dir = tempfile::tempdir().unwrap();
    let model = dir.path().join("model");
    let pred = dir.path().join("pred.jsonl");
    let (large, small) = (root.join("20k"), root.join("2k"));
    let start = Instant::now();
    ok(&[
        "-q", "--sequential", "train", "--instances", s(&large.join("instances.jsonl")), "--truth",
        s(&large.join("truth.jsonl")), "--arch", "lstm", "--text", "tweet", "--vectors", "cues", "--epochs", "3",
        "--val-fraction", "0", "--embeddings", s(&emb), "--out", s(&model),
    ]);
    ok(&["-q", "--sequential", "predict", "--model", s(&model), "--instances", s(&small.join("instances.jsonl")), "--out", s(&pred)]);
    let elapsed = start.elapsed();
    let report: serde_json::Value = serde_json::from_slice(
        &ok(&["-q", "evaluate", "--pred", s(&pred), "--truth", s(&small.join("truth.jsonl"))]).stdout,
    )
    .unwrap();
    let mse = report["mse"].as_f64().unwrap_or(f64::NAN);
    check(
        mse <= 0.060 && elapsed <= Duration::from_secs(45 * 60),
        format!("mse {mse:.4} (published 0.0449), {:.0} s", elapsed.as_secs_f64()),
    )
}

// ---- self-training bookkeeping ----

fn self_training() -> Verdict {
    let start = Instant::now();
    let lex = CueLexicons::bundled();
    let labelled = separable_corpus(PUBLISHED_LABELLED / 2, 1);
    let unlabelled = unlabelled_corpus(PUBLISHED_UNLABELLED, 2);
    let cfg = tiny_config(Branch::Cnn, vec![]);
    let toks: Vec<Vec<String>> = labelled.posts().iter().take(200).map(|p| clean(&p.tweet_text())).collect();
    let model = TrainedModel {
        network: Network::build(&cfg, None).unwrap(),
        vocab: Vocabulary::fit(&toks, cfg.vocab_size).unwrap(),
        lexicon_fingerprint: lex.fingerprint(),
        history: Vec::new(),
    };
    let pseudo = pseudo_label(&model, &unlabelled, &lex, None, Exec::Parallel).unwrap();
    let merged = merge_noisy(&labelled, &pseudo).unwrap();
    let report = self_train_report(&labelled, &pseudo, &merged).unwrap();
    check(
        report.n_merged == labelled.len() + unlabelled.len()
            && report.n_merged == 99_550
            && report.labels_preserved
            && report.published_count_note.is_some(),
        format!(
            "{} + {} = {} records, labels preserved: {}, note: {}, {:.1} s",
            report.n_labelled,
            report.n_pseudo,
            report.n_merged,
            report.labels_preserved,
            report.published_count_note.as_deref().unwrap_or("none"),
            start.elapsed().as_secs_f64()
        ),
    )
}

// ---- media analysis ----

fn media_analysis() -> Verdict {
    let cmap = CategoryMap::bundled();
    let mut worst = 0.0f64;
    let mut rows = 0;
    for seed in 0..50 {
        let (tags, classes) = random_tags(200, seed, &cmap);
        let t = category_proportions(&tags, &classes, &cmap, 0.5).unwrap();
        for row in t.rows.iter().filter(|r| !r.empty) {
            worst = worst.max((row.proportions.iter().sum::<f64>() - 1.0).abs());
            rows += 1;
        }
    }
    let (tags, scores) = trend_fixture(400, 3, &cmap);
    let trend = proportion_trend(&tags, &scores, &cmap, 5, 0.5).unwrap();
    let vehicle = trend.series("vehicle").unwrap();
    let food = trend.series("food").unwrap();
    let down = vehicle.windows(2).all(|w| w[1].1 < w[0].1);
    let up = food.windows(2).all(|w| w[1].1 > w[0].1);
    let ends = |v: &[(f64, f64)]| format!("{:.2}->{:.2}", v[0].1, v[v.len() - 1].1);
    check(
        worst <= 1e-9 && down && up,
        format!(
            "{rows} rows, max |sum-1| {worst:.1e}; vehicle {}, food {}",
            ends(&vehicle),
            ends(&food)
        ),
    )
}

// ---- determinism ----

fn determinism() -> Verdict {
    let dir = tempfile::tempdir().unwrap();
    let (inst, truth) = write_corpus(dir.path(), "d", &separable_corpus(16, 5));
    let run_once = |tag: &str, extra: &[&str]| -> Vec<u8> {
        let model = dir.path().join(format!("model_{tag}"));
        let pred = dir.path().join(format!("pred_{tag}.jsonl"));
        let mut args: Vec<&str> = vec!["-q", "--seed", "17"];
        args.extend_from_slice(extra);
        args.extend(["train", "--instances", s(&inst), "--truth", s(&truth), "--out", s(&model), "--epochs", "5"]);
        args.extend_from_slice(SMALL);
        ok(&args);
        ok(&["-q", "predict", "--model", s(&model), "--instances", s(&inst), "--out", s(&pred)]);
        std::fs::read(pred).unwrap()
    };
    let a = run_once("a", &[]);
    let b = run_once("b", &[]);
    let c = run_once("c", &["--sequential"]);
    check(
        !a.is_empty() && a == b && a == c,
        format!("{} bytes; repeat identical: {}; sequential identical: {}", a.len(), a == b, a == c),
    )
}

fn main() {
    let criteria: [(&str, Check); 9] = [
        ("gradient oracle", gradient_oracle),
        ("learnability", learnability),
        ("metric oracle", metric_oracle),
        ("adaboost oracle", adaboost_oracle),
        ("dataset statistics", dataset_statistics),
        ("full-scale replication", full_scale),
        ("self-training bookkeeping", self_training),
        ("media analysis", media_analysis),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (name, f) in criteria {
        let verdict = catch_unwind(AssertUnwindSafe(f))
            .unwrap_or_else(|p| {
                let msg = p
                    .downcast_ref::<String>()
                    .cloned()
                    .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                    .unwrap_or_default();
                Verdict::Fail(format!("panicked: {msg}"))
            });
        match verdict {
            Verdict::Pass(d) => println!("PASS    {name}: {d}"),
            Verdict::Skip(d) => println!("SKIPPED {name}: {d}"),
            Verdict::Fail(d) => {
                failed += 1;
                println!("FAIL    {name}: {d}");
            }
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
