//! Late-fusion CNN/LSTM clickbait regressors.

mod check;
mod config;
mod embeddings;
mod features;
mod network;
mod selftrain;
mod train;

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use check::{learnability_config, network_grad_check, random_features, tiny_config, NETWORK_STEP};
pub use config::{Branch, CnnConfig, MissingImage, ModelConfig, VectorInput, IMAGE_DIM};
pub use embeddings::{load_pretrained_embeddings, read_pretrained_embeddings, EmbeddingMatrix};
pub use features::{FeatureSet, Featurizer};
pub use network::Network;
pub use selftrain::{
    merge_noisy, pseudo_label, self_train_report, SelfTrainReport, PUBLISHED_LABELLED, PUBLISHED_MERGED,
    PUBLISHED_UNLABELLED,
};
pub use train::{fit, train, EpochRecord, TrainedModel};

/// One output line: `{"id": "...", "clickbaitScore": 0.42}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub id: String,
    #[serde(rename = "clickbaitScore")]
    pub clickbait_score: f64,
}

pub fn write_predictions<W: Write>(preds: &[Prediction], mut w: W) -> Result<()> {
    for p in preds {
        serde_json::to_writer(&mut w, p)?;
        w.write_all(b"\n").map_err(|e| Error::io("<predictions>", e))?;
    }
    Ok(())
}

pub fn read_predictions<R: BufRead>(r: R) -> Result<Vec<Prediction>> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line.map_err(|e| Error::io("<predictions>", e))?;
        if line.trim().is_empty() {
            continue;
        }
        let p: Prediction = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push(p);
    }
    Ok(out)
}
