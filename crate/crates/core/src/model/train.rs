use std::fs::{self, File};
use std::io::{BufReader, BufWriter};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cues::CueLexicons;
use crate::data::{train_val_split, Dataset};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::media::ImageVectorStore;
use crate::nn::{read_checkpoint, write_checkpoint, Adam, AdamConfig, Graph};
use crate::text::Vocabulary;

use super::config::ModelConfig;
use super::features::{FeatureSet, Featurizer};
use super::network::Network;
use super::Prediction;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean batch MSE over the epoch.
    pub train_loss: f64,
    pub val_loss: Option<f64>,
}

fn mse(pred: &[f64], target: &[f64]) -> f64 {
    pred.iter()
        .zip(target)
        .map(|(p, t)| (p - t) * (p - t))
        .sum::<f64>()
        / pred.len().max(1) as f64
}

/// Mini-batch ADAM on MSE for `config.epochs` epochs. Batch order is
/// reshuffled every epoch from a generator seeded with `config.seed`.
pub fn fit(
    network: &mut Network,
    train: &FeatureSet,
    targets: &[f64],
    val: Option<(&FeatureSet, &[f64])>,
    exec: Exec,
) -> Result<Vec<EpochRecord>> {
    let config = network.config().clone();
    config.validate()?;
    if train.is_empty() {
        return Err(Error::Invalid("cannot train on an empty dataset".into()));
    }
    if targets.len() != train.len() {
        return Err(Error::Shape(format!(
            "{} targets for {} examples",
            targets.len(),
            train.len()
        )));
    }
    let mut adam = Adam::new(
        network.params(),
        AdamConfig {
            lr: config.learning_rate,
            ..Default::default()
        },
    );
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(0x9e37_79b9_7f4a_7c15));
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut history = Vec::with_capacity(config.epochs);

    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        for batch in order.chunks(config.batch_size) {
            let batch_targets: Vec<f64> = batch.iter().map(|&i| targets[i]).collect();
            let grads = {
                let mut g = Graph::with_exec(network.params(), exec);
                let out = network.forward(&mut g, train, batch)?;
                let loss = g.mse(out, &batch_targets)?;
                loss_sum += g.value(loss).data()[0] * batch.len() as f64;
                g.backward(loss)?
            };
            adam.step(network.params_mut(), &grads)?;
        }
        let train_loss = loss_sum / train.len() as f64;
        let val_loss = match val {
            Some((vf, vt)) if !vf.is_empty() => Some(mse(&network.predict(vf, exec)?, vt)),
            _ => None,
        };
        log::info!(
            "epoch {epoch}/{}: train mse {train_loss:.6}{}",
            config.epochs,
            val_loss.map_or(String::new(), |v| format!(", val mse {v:.6}"))
        );
        history.push(EpochRecord {
            epoch,
            train_loss,
            val_loss,
        });
    }
    Ok(history)
}

/// A trained network with everything needed to featurize new posts.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub network: Network,
    pub vocab: Vocabulary,
    pub lexicon_fingerprint: u64,
    pub history: Vec<EpochRecord>,
}

#[derive(Serialize, Deserialize)]
struct ModelMeta {
    format: u32,
    config: ModelConfig,
    lexicon_fingerprint: String,
    history: Vec<EpochRecord>,
}

const PARAMS_FILE: &str = "params.ckpt";
const VOCAB_FILE: &str = "vocab.tsv";
const META_FILE: &str = "model.json";

/// Splits off a validation share when configured, featurizes and fits.
pub fn train(
    mut network: Network,
    dataset: &Dataset,
    vocab: &Vocabulary,
    lexicons: &CueLexicons,
    images: Option<&ImageVectorStore>,
    exec: Exec,
) -> Result<TrainedModel> {
    let config = network.config().clone();
    config.validate()?;
    if dataset.is_empty() {
        return Err(Error::Invalid("cannot train on an empty dataset".into()));
    }
    let featurizer = Featurizer {
        config: &config,
        vocab,
        lexicons,
        images,
    };
    let (train_set, val_set) = if config.val_fraction > 0.0 && dataset.len() >= 2 {
        let (t, v) = train_val_split(dataset, config.val_fraction, config.seed)?;
        (t, Some(v))
    } else {
        (dataset.clone(), None)
    };
    let train_feats = featurizer.featurize(&train_set, exec)?;
    let train_targets = train_set.targets()?;
    let val = match &val_set {
        Some(v) => Some((featurizer.featurize(v, exec)?, v.targets()?)),
        None => None,
    };
    let history = fit(
        &mut network,
        &train_feats,
        &train_targets,
        val.as_ref().map(|(f, t)| (f, t.as_slice())),
        exec,
    )?;
    Ok(TrainedModel {
        network,
        vocab: vocab.clone(),
        lexicon_fingerprint: lexicons.fingerprint(),
        history,
    })
}

impl TrainedModel {
    pub fn config(&self) -> &ModelConfig {
        self.network.config()
    }

    fn check_lexicons(&self, lexicons: &CueLexicons) -> Result<()> {
        if !self.config().vector_inputs.is_empty() && lexicons.fingerprint() != self.lexicon_fingerprint {
            return Err(Error::Config(
                "cue lexicons differ from the ones the model was trained with".into(),
            ));
        }
        Ok(())
    }

    pub fn featurize(
        &self,
        dataset: &Dataset,
        lexicons: &CueLexicons,
        images: Option<&ImageVectorStore>,
        exec: Exec,
    ) -> Result<FeatureSet> {
        self.check_lexicons(lexicons)?;
        Featurizer {
            config: self.config(),
            vocab: &self.vocab,
            lexicons,
            images,
        }
        .featurize(dataset, exec)
    }

    /// One prediction per post, in dataset order.
    pub fn predict(
        &self,
        dataset: &Dataset,
        lexicons: &CueLexicons,
        images: Option<&ImageVectorStore>,
        exec: Exec,
    ) -> Result<Vec<Prediction>> {
        if dataset.is_empty() {
            return Ok(Vec::new());
        }
        let feats = self.featurize(dataset, lexicons, images, exec)?;
        let scores = self.network.predict(&feats, exec)?;
        Ok(feats
            .ids
            .into_iter()
            .zip(scores)
            .map(|(id, clickbait_score)| Prediction { id, clickbait_score })
            .collect())
    }

    /// Writes `params.ckpt`, `vocab.tsv` and `model.json` into `dir`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let create = |name: &str| {
            let p = dir.join(name);
            File::create(&p).map(BufWriter::new).map_err(|e| Error::io(p, e))
        };
        write_checkpoint(self.network.params(), create(PARAMS_FILE)?)?;
        self.vocab.write_tsv(create(VOCAB_FILE)?)?;
        let meta = ModelMeta {
            format: 1,
            config: self.config().clone(),
            lexicon_fingerprint: format!("{:016x}", self.lexicon_fingerprint),
            history: self.history.clone(),
        };
        serde_json::to_writer_pretty(create(META_FILE)?, &meta)?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let open = |name: &str| {
            let p = dir.join(name);
            File::open(&p).map(BufReader::new).map_err(|e| Error::io(p, e))
        };
        let meta: ModelMeta = serde_json::from_reader(open(META_FILE)?)?;
        if meta.format != 1 {
            return Err(Error::Checkpoint(format!("unsupported model format {}", meta.format)));
        }
        let store = read_checkpoint(open(PARAMS_FILE)?)?;
        let vocab = Vocabulary::read_tsv(open(VOCAB_FILE)?, meta.config.vocab_size)?;
        let lexicon_fingerprint = u64::from_str_radix(&meta.lexicon_fingerprint, 16)
            .map_err(|e| Error::Checkpoint(format!("bad lexicon fingerprint: {e}")))?;
        Ok(TrainedModel {
            network: Network::from_parts(&meta.config, store)?,
            vocab,
            lexicon_fingerprint,
            history: meta.history,
        })
    }
}
