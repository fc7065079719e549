use std::collections::HashMap;
use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::Path;

use anyhow::{Context, Result};
use baitscore::baseline::{BaselineConfig, BaselineModel};
use baitscore::cues::CueLexicons;
use baitscore::data::{class_ratio, load_dataset, parse_truth, write_instances, write_truths, Dataset, Post};
use baitscore::eval::MetricsReport;
use baitscore::media::{self, CategoryMap, ImageVectorStore};
use baitscore::model::{
    self, load_pretrained_embeddings, merge_noisy, pseudo_label, self_train_report, CnnConfig, ModelConfig,
    Network, TrainedModel, VectorInput,
};
use baitscore::text::{assemble_document, clean, DocumentSource, Vocabulary};
use baitscore::{Error, Exec};
use serde_json::json;

use crate::args::*;

fn lexicons(dir: Option<&Path>) -> Result<CueLexicons> {
    Ok(match dir {
        Some(d) => CueLexicons::load(d)?,
        None => CueLexicons::bundled(),
    })
}

fn images(path: Option<&Path>, dim: usize) -> Result<Option<ImageVectorStore>> {
    path.map(|p| ImageVectorStore::load(p, dim)).transpose().map_err(Into::into)
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("creating {}", path.display()))?,
    ))
}

fn print_json(value: &serde_json::Value) -> Result<()> {
    let mut out = io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    Ok(())
}

fn documents(ds: &Dataset, source: DocumentSource) -> Vec<Vec<String>> {
    ds.posts().iter().map(|p| clean(&assemble_document(p, source))).collect()
}

/// A truth file on its own, as a dataset of id-only posts in id order.
fn truth_only(path: &Path, scale: Scale) -> Result<Dataset> {
    let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let truths = parse_truth(io::BufReader::new(f), scale.into())?;
    let mut ids: Vec<&String> = truths.keys().collect();
    ids.sort();
    let posts = ids.into_iter().map(Post::new).collect();
    Ok(Dataset::new("truth", posts, Some(truths))?)
}

pub fn ingest(a: &IngestArgs) -> Result<()> {
    let ds = load_dataset(&a.instances, a.truth.as_deref(), a.scale.into())?;
    let ratio = if ds.truths().is_some() { Some(class_ratio(&ds)?) } else { None };
    log::info!("{}: {} posts", ds.name, ds.len());
    if a.stats {
        print_json(&json!({
            "name": ds.name,
            "n_posts": ds.len(),
            "with_images": ds.posts().iter().filter(|p| !p.media_paths.is_empty()).count(),
            "ratio": ratio,
            "display_ratio": ratio.map(|r| r.display_ratio()),
        }))?;
    }
    Ok(())
}

fn model_config(a: &TrainArgs, seed: u64) -> Result<ModelConfig> {
    let cfg = ModelConfig {
        branch: a.arch,
        text_source: a.text,
        text_branch: !a.no_text,
        vector_inputs: VectorInput::parse_list(&a.vectors)?,
        seq_length: a.seq_length,
        vocab_size: a.vocab_size,
        embed_dim: a.embed_dim,
        lstm_units: a.lstm_units,
        cnn: CnnConfig {
            filters_1: a.filters_1,
            kernel_1: a.kernel_1,
            filters_2: a.filters_2,
            kernel_2: a.kernel_2,
            pool_size: a.pool_size,
        },
        dense_units: a.dense_units,
        fusion_units: a.fusion_units,
        head_units: a.head_units,
        image_dim: a.image_dim,
        epochs: a.epochs as usize,
        batch_size: a.batch_size as usize,
        learning_rate: a.learning_rate,
        val_fraction: a.val_fraction,
        cue_normalization: a.cue_normalization,
        missing_image: a.missing_image,
        seed,
    };
    cfg.validate()?;
    Ok(cfg)
}

pub fn train(a: &TrainArgs, seed: u64, exec: Exec) -> Result<()> {
    let cfg = model_config(a, seed)?;
    let ds = load_dataset(&a.instances, Some(&a.truth), a.scale.into())?;
    let lex = lexicons(a.lexicons.as_deref())?;
    let imgs = images(a.images.as_deref(), cfg.image_dim)?;
    let mut corpus = documents(&ds, cfg.text_source);
    if let Some(extra) = &a.vocab_extra {
        corpus.extend(documents(&load_dataset(extra, None, a.scale.into())?, cfg.text_source));
    }
    let vocab = Vocabulary::fit(&corpus, cfg.vocab_size)?;
    let embedding = match &a.embeddings {
        Some(p) => {
            let e = load_pretrained_embeddings(p, &vocab, cfg.vocab_size, cfg.embed_dim, seed)?;
            log::info!("pretrained embeddings cover {:.1}% of the vocabulary", 100.0 * e.coverage);
            Some(e)
        }
        None => None,
    };
    let network = Network::build(&cfg, embedding)?;
    let trained = model::train(network, &ds, &vocab, &lex, imgs.as_ref(), exec)?;
    trained.save(&a.out)?;
    if let Some(last) = trained.history.last() {
        log::info!(
            "saved {} after {} epochs (train mse {:.6}{})",
            a.out.display(),
            last.epoch,
            last.train_loss,
            last.val_loss.map_or(String::new(), |v| format!(", val mse {v:.6}"))
        );
    }
    Ok(())
}

pub fn predict(a: &PredictArgs, exec: Exec) -> Result<()> {
    let ds = load_dataset(&a.instances, None, Default::default())?;
    let preds = if a.model.is_file() {
        let m = BaselineModel::load(&a.model)?;
        let lex = if m.config.cues { Some(lexicons(a.lexicons.as_deref())?) } else { None };
        m.predict(&ds, lex.as_ref(), exec)?
    } else {
        let m = TrainedModel::load(&a.model)?;
        let lex = lexicons(a.lexicons.as_deref())?;
        let imgs = images(a.images.as_deref(), m.config().image_dim)?;
        m.predict(&ds, &lex, imgs.as_ref(), exec)?
    };
    let mut out = output(a.out.as_deref())?;
    model::write_predictions(&preds, &mut out)?;
    out.flush()?;
    log::info!("scored {} posts", preds.len());
    Ok(())
}

pub fn selftrain(a: &SelftrainArgs, seed: u64, exec: Exec) -> Result<()> {
    let m = TrainedModel::load(&a.model)?;
    let lex = lexicons(a.lexicons.as_deref())?;
    let imgs = images(a.images.as_deref(), m.config().image_dim)?;
    let unlabelled = load_dataset(&a.unlabelled, None, a.scale.into())?;
    let labelled = load_dataset(&a.labelled, Some(&a.truth), a.scale.into())?;
    let pseudo = pseudo_label(&m, &unlabelled, &lex, imgs.as_ref(), exec)?;
    let merged = merge_noisy(&labelled, &pseudo)?;
    let report = self_train_report(&labelled, &pseudo, &merged)?;

    fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    write_truths(&pseudo, create(&a.out.join("pseudo_truth.jsonl"))?)?;
    write_instances(merged.posts(), create(&a.out.join("merged_instances.jsonl"))?)?;
    write_truths(&merged, create(&a.out.join("merged_truth.jsonl"))?)?;
    serde_json::to_writer_pretty(create(&a.out.join("report.json"))?, &report)?;
    if let Some(note) = &report.published_count_note {
        log::warn!("{note}");
    }

    if let Some(epochs) = a.retrain_epochs {
        let mut cfg = m.config().clone();
        cfg.epochs = epochs as usize;
        cfg.seed = seed;
        let vocab = Vocabulary::fit(&documents(&merged, cfg.text_source), cfg.vocab_size)?;
        let retrained = model::train(Network::build(&cfg, None)?, &merged, &vocab, &lex, imgs.as_ref(), exec)?;
        retrained.save(&a.out.join("model"))?;
        log::info!("retrained model saved to {}", a.out.join("model").display());
    }
    print_json(&serde_json::to_value(&report)?)
}

pub fn evaluate(a: &EvaluateArgs, quiet: bool) -> Result<()> {
    let f = File::open(&a.pred).with_context(|| format!("opening {}", a.pred.display()))?;
    let preds = model::read_predictions(io::BufReader::new(f))?;
    let truth = truth_only(&a.truth, a.scale)?;
    let report = MetricsReport::evaluate(&preds, &truth)?;
    let value = serde_json::to_value(&report)?;
    if let Some(p) = &a.out {
        serde_json::to_writer_pretty(create(p)?, &value)?;
    }
    print_json(&value)?;
    if !quiet {
        eprint!("{}", report.to_table());
    }
    Ok(())
}

pub fn baseline(a: &BaselineArgs, seed: u64, exec: Exec) -> Result<()> {
    let ds = load_dataset(&a.instances, Some(&a.truth), a.scale.into())?;
    let lex = if a.cues { Some(lexicons(a.lexicons.as_deref())?) } else { None };
    let cfg = BaselineConfig {
        source: a.text,
        cues: a.cues,
        normalization: a.cue_normalization,
        n_estimators: a.estimators as usize,
        loss: a.loss,
        seed,
    };
    let (m, trace) = BaselineModel::train(&ds, cfg, lex.as_ref(), exec)?;
    m.save(&a.out)?;
    if let Some(p) = &a.trace {
        serde_json::to_writer(create(p)?, &trace)?;
    }
    let preds = m.predict(&ds, lex.as_ref(), exec)?;
    let fit = MetricsReport::evaluate(&preds, &ds)?;
    log::info!(
        "baseline: {} stumps over {} features, training mse {:.6}",
        m.ensemble.stumps.len(),
        m.n_features(),
        fit.mse
    );
    Ok(())
}

pub fn analyze_media(a: &MediaArgs) -> Result<()> {
    if a.truth.is_none() && a.pred.is_none() {
        return Err(Error::Config("analyze-media needs --truth, --pred or both".into()).into());
    }
    let tags = media::load_tags(&a.tags)?;
    let cmap = match &a.category_map {
        Some(p) => CategoryMap::load(p)?,
        None => CategoryMap::bundled(),
    };
    let truth = a.truth.as_deref().map(|p| truth_only(p, a.scale)).transpose()?;

    let classes = match &truth {
        Some(t) => {
            let classes: HashMap<String, _> = t
                .aligned_truths()?
                .into_iter()
                .map(|x| (x.id.clone(), x.truth_class))
                .collect();
            let known: Vec<_> = tags.iter().filter(|r| classes.contains_key(&r.id)).cloned().collect();
            log::info!("{} of {} tagged posts have truth labels", known.len(), tags.len());
            Some(media::category_proportions(&known, &classes, &cmap, a.min_confidence)?)
        }
        None => None,
    };

    let scores: HashMap<String, f64> = match (&a.pred, &truth) {
        (Some(p), _) => {
            let f = File::open(p).with_context(|| format!("opening {}", p.display()))?;
            model::read_predictions(io::BufReader::new(f))?
                .into_iter()
                .map(|x| (x.id, x.clickbait_score))
                .collect()
        }
        (None, Some(t)) => t.aligned_truths()?.into_iter().map(|x| (x.id.clone(), x.truth_mean)).collect(),
        (None, None) => unreachable!("checked above"),
    };
    let scored: Vec<_> = tags.iter().filter(|r| scores.contains_key(&r.id)).cloned().collect();
    let trend = media::proportion_trend(&scored, &scores, &cmap, a.bins, a.min_confidence)?;
    if !trend.omitted.is_empty() {
        log::warn!("score bins without detections: {:?}", trend.omitted);
    }
    if let Some(p) = &a.trend_out {
        let mut w = create(p)?;
        trend.write_csv(&mut w)?;
        w.flush()?;
    }
    print_json(&json!({ "classes": classes, "trend": trend }))
}
