//! tf-idf unigrams (optionally followed by cue columns) fed to boosted stumps.

mod adaboost;
mod tfidf;

pub use adaboost::{
    ab_fit, ab_predict, fit_stump, weighted_median, AbConfig, FeatureMatrix, FitTrace, Loss, Round, Stump,
    StumpEnsemble, DEFAULT_ESTIMATORS,
};
pub use tfidf::{SparseVector, TfidfModel};

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::cues::{extract_cues, CueLexicons, Normalization, N_FAMILIES};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::model::Prediction;
use crate::text::{assemble_document, clean, DocumentSource};

const FORMAT: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BaselineConfig {
    pub source: DocumentSource,
    /// Append the five cue values of the same document after the tf-idf block.
    pub cues: bool,
    pub normalization: Normalization,
    pub n_estimators: usize,
    pub loss: Loss,
    pub seed: u64,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        BaselineConfig {
            source: DocumentSource::Tweet,
            cues: false,
            normalization: Normalization::PerToken,
            n_estimators: DEFAULT_ESTIMATORS,
            loss: Loss::Linear,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BaselineModel {
    format: u32,
    pub config: BaselineConfig,
    pub tfidf: TfidfModel,
    /// Hex fingerprint of the lexicons the cue columns were built with.
    pub lexicon_fingerprint: Option<String>,
    pub ensemble: StumpEnsemble,
}

fn tokens(dataset: &Dataset, source: DocumentSource) -> Vec<Vec<String>> {
    dataset.posts().iter().map(|p| clean(&assemble_document(p, source))).collect()
}

fn rows(
    tfidf: &TfidfModel,
    docs: &[Vec<String>],
    cues: Option<(&CueLexicons, Normalization)>,
    exec: Exec,
) -> Vec<SparseVector> {
    let offset = tfidf.n_features() as u32;
    exec.map(docs, |d| {
        let mut v = tfidf.transform(d);
        if let Some((lex, norm)) = cues {
            v.extend_dense(offset, &extract_cues(d, lex, norm).values);
        }
        v
    })
}

impl BaselineModel {
    pub fn n_features(&self) -> usize {
        self.tfidf.n_features() + if self.config.cues { N_FAMILIES } else { 0 }
    }

    pub fn train(
        dataset: &Dataset,
        config: BaselineConfig,
        lexicons: Option<&CueLexicons>,
        exec: Exec,
    ) -> Result<(Self, FitTrace)> {
        let cue_lex = match (config.cues, lexicons) {
            (true, None) => return Err(Error::LexiconMissing("cue".into())),
            (true, Some(l)) => Some((l, config.normalization)),
            (false, _) => None,
        };
        let y = dataset.targets()?;
        let docs = tokens(dataset, config.source);
        let tfidf = TfidfModel::fit(&docs)?;
        let n_cols = tfidf.n_features() + if config.cues { N_FAMILIES } else { 0 };
        let x = FeatureMatrix::from_rows(&rows(&tfidf, &docs, cue_lex, exec), n_cols)?;
        log::info!("baseline: {} documents, {} features", x.n_rows(), n_cols);
        let ab = AbConfig {
            n_estimators: config.n_estimators,
            loss: config.loss,
            seed: config.seed,
        };
        let (ensemble, trace) = ab_fit(&x, &y, ab, exec)?;
        let model = BaselineModel {
            format: FORMAT,
            config,
            tfidf,
            lexicon_fingerprint: cue_lex.map(|(l, _)| format!("{:016x}", l.fingerprint())),
            ensemble,
        };
        Ok((model, trace))
    }

    pub fn predict(&self, dataset: &Dataset, lexicons: Option<&CueLexicons>, exec: Exec) -> Result<Vec<Prediction>> {
        let cue_lex = if self.config.cues {
            let l = lexicons.ok_or_else(|| Error::LexiconMissing("cue".into()))?;
            let fp = format!("{:016x}", l.fingerprint());
            if self.lexicon_fingerprint.as_deref() != Some(fp.as_str()) {
                return Err(Error::Config("lexicons differ from the ones used in training".into()));
            }
            Some((l, self.config.normalization))
        } else {
            None
        };
        let docs = tokens(dataset, self.config.source);
        let rows = rows(&self.tfidf, &docs, cue_lex, exec);
        let scores = exec.map(&rows, |r| ab_predict(&self.ensemble, r));
        Ok(dataset
            .posts()
            .iter()
            .zip(scores)
            .map(|(p, s)| Prediction {
                id: p.id.clone(),
                clickbait_score: s,
            })
            .collect())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let f = File::create(path).map_err(|e| Error::io(path, e))?;
        serde_json::to_writer(BufWriter::new(f), self)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let f = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut m: BaselineModel = serde_json::from_reader(BufReader::new(f))?;
        if m.format != FORMAT {
            return Err(Error::Checkpoint(format!("unsupported baseline format {}", m.format)));
        }
        m.tfidf = m.tfidf.reindex()?;
        m.ensemble.validate()?;
        Ok(m)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{Post, TruthAnnotation};
    use std::collections::HashMap;

    fn corpus() -> Dataset {
        let texts = [
            ("1", "you will not believe this", 1.0),
            ("2", "council approves budget", 0.0),
            ("3", "you will not believe what happened", 1.0),
            ("4", "budget vote delayed", 0.0),
        ];
        let posts = texts
            .iter()
            .map(|(id, t, _)| {
                let mut p = Post::new(*id);
                p.post_text = vec![t.to_string()];
                p
            })
            .collect();
        let truths: HashMap<_, _> = texts
            .iter()
            .map(|(id, _, s)| (id.to_string(), TruthAnnotation::pseudo(*id, *s)))
            .collect();
        Dataset::new("toy", posts, Some(truths)).unwrap()
    }

    #[test]
    fn trains_saves_and_reloads() {
        let ds = corpus();
        let lex = CueLexicons::bundled();
        let cfg = BaselineConfig {
            cues: true,
            n_estimators: 10,
            ..BaselineConfig::default()
        };
        let (m, _) = BaselineModel::train(&ds, cfg, Some(&lex), Exec::Sequential).unwrap();
        let preds = m.predict(&ds, Some(&lex), Exec::Sequential).unwrap();
        for (p, t) in preds.iter().zip(ds.targets().unwrap()) {
            assert!((p.clickbait_score - t).abs() < 0.05);
        }
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ab.json");
        m.save(&path).unwrap();
        let back = BaselineModel::load(&path).unwrap();
        assert_eq!(back.predict(&ds, Some(&lex), Exec::Parallel).unwrap(), preds);
        assert!(back.predict(&ds, None, Exec::Sequential).is_err());
    }
}
