use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::cues::{Normalization, N_FAMILIES};
use crate::error::{Error, Result};
use crate::text::{DocumentSource, DEFAULT_MAX_WORDS, DEFAULT_SEQ_LEN};

/// Width of a precomputed image feature vector.
pub const IMAGE_DIM: usize = 2048;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Branch {
    Cnn,
    Lstm,
}

impl FromStr for Branch {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "cnn" => Ok(Branch::Cnn),
            "lstm" => Ok(Branch::Lstm),
            other => Err(Error::Config(format!("unknown architecture `{other}`"))),
        }
    }
}

impl fmt::Display for Branch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Branch::Cnn => "cnn",
            Branch::Lstm => "lstm",
        })
    }
}

/// A vector block fed to the fusion sub-network. Blocks are always
/// concatenated in declaration order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VectorInput {
    CuesTweet,
    CuesArticle,
    Image,
}

impl VectorInput {
    pub fn width(self, image_dim: usize) -> usize {
        match self {
            VectorInput::CuesTweet | VectorInput::CuesArticle => N_FAMILIES,
            VectorInput::Image => image_dim,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            VectorInput::CuesTweet => "cues_tweet",
            VectorInput::CuesArticle => "cues_article",
            VectorInput::Image => "image",
        }
    }

    /// Parses a comma list; `cues` expands to tweet and article cues.
    pub fn parse_list(s: &str) -> Result<Vec<VectorInput>> {
        let mut out = Vec::new();
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            match part {
                "cues" => out.extend([VectorInput::CuesTweet, VectorInput::CuesArticle]),
                "cues_tweet" => out.push(VectorInput::CuesTweet),
                "cues_article" => out.push(VectorInput::CuesArticle),
                "image" => out.push(VectorInput::Image),
                "none" => {}
                other => return Err(Error::Config(format!("unknown vector input `{other}`"))),
            }
        }
        out.sort();
        out.dedup();
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CnnConfig {
    pub filters_1: usize,
    pub kernel_1: usize,
    pub filters_2: usize,
    pub kernel_2: usize,
    /// `None` pools globally over time; `Some(p)` pools windows of `p` and flattens.
    pub pool_size: Option<usize>,
}

impl Default for CnnConfig {
    fn default() -> Self {
        CnnConfig {
            filters_1: 64,
            kernel_1: 3,
            filters_2: 64,
            kernel_2: 3,
            pool_size: None,
        }
    }
}

/// What to do when a post has no image vector but the model expects one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MissingImage {
    #[default]
    Zeros,
    Error,
}

impl FromStr for MissingImage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "zeros" => Ok(MissingImage::Zeros),
            "error" => Ok(MissingImage::Error),
            other => Err(Error::Config(format!("unknown missing-image policy `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub branch: Branch,
    pub text_source: DocumentSource,
    /// When false the model scores from vector inputs alone.
    pub text_branch: bool,
    pub vector_inputs: Vec<VectorInput>,
    pub seq_length: usize,
    pub vocab_size: usize,
    pub embed_dim: usize,
    pub lstm_units: usize,
    pub cnn: CnnConfig,
    /// Dense layer after the recurrent layer.
    pub dense_units: usize,
    pub fusion_units: usize,
    pub head_units: usize,
    pub image_dim: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Share of the training data held out for per-epoch validation; 0 disables.
    pub val_fraction: f64,
    pub cue_normalization: Normalization,
    pub missing_image: MissingImage,
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            branch: Branch::Lstm,
            text_source: DocumentSource::Tweet,
            text_branch: true,
            vector_inputs: Vec::new(),
            seq_length: DEFAULT_SEQ_LEN,
            vocab_size: DEFAULT_MAX_WORDS,
            embed_dim: 200,
            lstm_units: 56,
            cnn: CnnConfig::default(),
            dense_units: 32,
            fusion_units: 32,
            head_units: 32,
            image_dim: IMAGE_DIM,
            epochs: 3,
            batch_size: 32,
            learning_rate: 0.001,
            val_fraction: 0.2,
            cue_normalization: Normalization::PerToken,
            missing_image: MissingImage::Zeros,
            seed: 0,
        }
    }
}

impl ModelConfig {
    pub fn vector_width(&self) -> usize {
        self.vector_inputs
            .iter()
            .map(|v| v.width(self.image_dim))
            .sum()
    }

    pub fn uses(&self, input: VectorInput) -> bool {
        self.vector_inputs.contains(&input)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if self.epochs < 1 {
            return fail("epochs must be at least 1".into());
        }
        if self.batch_size < 1 {
            return fail("batch size must be at least 1".into());
        }
        if !(0.0..1.0).contains(&self.val_fraction) {
            return fail(format!("validation fraction {} outside [0, 1)", self.val_fraction));
        }
        if self.learning_rate.is_nan() || self.learning_rate <= 0.0 {
            return fail("learning rate must be positive".into());
        }
        let mut sorted = self.vector_inputs.clone();
        sorted.sort();
        sorted.dedup();
        if sorted != self.vector_inputs {
            return fail("vector inputs must be unique and in canonical order".into());
        }
        if !self.text_branch && self.vector_inputs.is_empty() {
            return fail("a fusion-only model needs at least one vector input".into());
        }
        let dims = [
            ("seq_length", self.seq_length),
            ("vocab_size", self.vocab_size),
            ("embed_dim", self.embed_dim),
            ("lstm_units", self.lstm_units),
            ("dense_units", self.dense_units),
            ("fusion_units", self.fusion_units),
            ("head_units", self.head_units),
            ("image_dim", self.image_dim),
            ("filters_1", self.cnn.filters_1),
            ("filters_2", self.cnn.filters_2),
            ("kernel_1", self.cnn.kernel_1),
            ("kernel_2", self.cnn.kernel_2),
        ];
        if let Some((name, _)) = dims.iter().find(|(_, v)| *v == 0) {
            return fail(format!("{name} must be positive"));
        }
        if self.text_branch && self.branch == Branch::Cnn {
            let after = self.cnn_steps_after_conv();
            if after.is_none() {
                return fail(format!(
                    "sequence length {} too short for kernels {} and {}",
                    self.seq_length, self.cnn.kernel_1, self.cnn.kernel_2
                ));
            }
            if let (Some(p), Some(t)) = (self.cnn.pool_size, after) {
                if p == 0 || p > t {
                    return fail(format!("pool size {p} for {t} convolved steps"));
                }
            }
        }
        Ok(())
    }

    pub(crate) fn cnn_steps_after_conv(&self) -> Option<usize> {
        let t1 = (self.seq_length + 1).checked_sub(self.cnn.kernel_1)?;
        let t2 = (t1 + 1).checked_sub(self.cnn.kernel_2)?;
        (t1 >= 1 && t2 >= 1).then_some(t2)
    }
}
