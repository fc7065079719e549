//! Per-post model inputs: the padded token sequence and the fusion vector.

use crate::cues::{extract_cues, CueLexicons};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::media::ImageVectorStore;
use crate::text::{article_text, assemble_document, clean, encode, TokenSequence, Vocabulary};

use super::config::{MissingImage, ModelConfig, VectorInput};

/// Model inputs for a list of posts, aligned by position.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSet {
    pub ids: Vec<String>,
    pub sequences: Vec<TokenSequence>,
    /// Row-major `[len, vector_width]`.
    pub vectors: Vec<f64>,
    pub vector_width: usize,
}

impl FeatureSet {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn vector(&self, row: usize) -> &[f64] {
        &self.vectors[row * self.vector_width..(row + 1) * self.vector_width]
    }
}

/// Turns posts into [`FeatureSet`]s for one model configuration.
pub struct Featurizer<'a> {
    pub config: &'a ModelConfig,
    pub vocab: &'a Vocabulary,
    pub lexicons: &'a CueLexicons,
    pub images: Option<&'a ImageVectorStore>,
}

impl Featurizer<'_> {
    pub fn featurize(&self, dataset: &Dataset, exec: Exec) -> Result<FeatureSet> {
        let cfg = self.config;
        if cfg.uses(VectorInput::Image) && self.images.is_none() && cfg.missing_image == MissingImage::Error {
            return Err(Error::Config("model needs image vectors but none were supplied".into()));
        }
        let width = cfg.vector_width();
        let rows: Vec<Result<(TokenSequence, Vec<f64>)>> = exec.map(dataset.posts(), |post| {
            let seq = if cfg.text_branch {
                encode(&assemble_document(post, cfg.text_source), self.vocab, cfg.seq_length)
            } else {
                TokenSequence(Vec::new())
            };
            let mut vec = Vec::with_capacity(width);
            for input in &cfg.vector_inputs {
                match input {
                    VectorInput::CuesTweet => {
                        let toks = clean(&post.tweet_text());
                        vec.extend(extract_cues(&toks, self.lexicons, cfg.cue_normalization).values);
                    }
                    VectorInput::CuesArticle => {
                        let toks = clean(&article_text(post));
                        vec.extend(extract_cues(&toks, self.lexicons, cfg.cue_normalization).values);
                    }
                    VectorInput::Image => match self.images.and_then(|s| s.get(&post.id)) {
                        Some(v) if v.len() == cfg.image_dim => vec.extend_from_slice(v),
                        Some(v) => {
                            return Err(Error::Dimension {
                                id: post.id.clone(),
                                expected: cfg.image_dim,
                                found: v.len(),
                            })
                        }
                        None => match cfg.missing_image {
                            MissingImage::Zeros => vec.extend(std::iter::repeat_n(0.0, cfg.image_dim)),
                            MissingImage::Error => return Err(Error::MissingImage(post.id.clone())),
                        },
                    },
                }
            }
            Ok((seq, vec))
        });
        let mut out = FeatureSet {
            ids: dataset.posts().iter().map(|p| p.id.clone()).collect(),
            sequences: Vec::with_capacity(rows.len()),
            vectors: Vec::with_capacity(rows.len() * width),
            vector_width: width,
        };
        for r in rows {
            let (seq, vec) = r?;
            out.sequences.push(seq);
            out.vectors.extend(vec);
        }
        Ok(out)
    }
}
