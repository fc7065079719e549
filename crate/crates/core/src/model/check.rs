//! Finite-difference check of a whole network on a tiny configuration.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::exec::Exec;
use crate::nn::{grad_check, GradCheckReport, Tensor};

/// Finite-difference step for whole networks; larger than the primitive
/// step because losses here are sums over many small contributions.
pub const NETWORK_STEP: f64 = 1e-4;
use crate::text::TokenSequence;

use super::config::{Branch, CnnConfig, ModelConfig, VectorInput};
use super::embeddings::EmbeddingMatrix;
use super::features::FeatureSet;
use super::network::Network;

/// Vocabulary 20, sequence 8, embedding 4, recurrent width 3, and
/// four-unit dense layers.
pub fn tiny_config(branch: Branch, vector_inputs: Vec<VectorInput>) -> ModelConfig {
    ModelConfig {
        branch,
        vector_inputs,
        seq_length: 8,
        vocab_size: 20,
        embed_dim: 4,
        lstm_units: 3,
        cnn: CnnConfig {
            filters_1: 4,
            kernel_1: 3,
            filters_2: 4,
            kernel_2: 3,
            pool_size: None,
        },
        dense_units: 4,
        fusion_units: 4,
        head_units: 4,
        image_dim: 6,
        ..ModelConfig::default()
    }
}

/// Reduced widths for fitting small synthetic corpora quickly.
pub fn learnability_config(branch: Branch, with_cues: bool) -> ModelConfig {
    ModelConfig {
        branch,
        vector_inputs: if with_cues { vec![VectorInput::CuesTweet] } else { vec![] },
        seq_length: 16,
        vocab_size: 100,
        embed_dim: 16,
        lstm_units: 8,
        cnn: CnnConfig {
            filters_1: 8,
            kernel_1: 3,
            filters_2: 8,
            kernel_2: 3,
            pool_size: None,
        },
        dense_units: 8,
        fusion_units: 8,
        head_units: 8,
        epochs: 200,
        batch_size: 16,
        learning_rate: 0.01,
        val_fraction: 0.0,
        ..ModelConfig::default()
    }
}

/// Random full-length sequences (no padding) and positive vectors.
pub fn random_features(config: &ModelConfig, n: usize, seed: u64) -> FeatureSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let width = config.vector_width();
    FeatureSet {
        ids: (0..n).map(|i| format!("p{i}")).collect(),
        sequences: (0..n)
            .map(|_| TokenSequence((0..config.seq_length).map(|_| rng.gen_range(1..=config.vocab_size as u32)).collect()))
            .collect(),
        vectors: (0..n * width).map(|_| rng.gen_range(0.05..1.0)).collect(),
        vector_width: width,
    }
}

/// Checks the MSE gradient of every parameter of a freshly built network.
pub fn network_grad_check(config: &ModelConfig, batch: usize, seed: u64, exec: Exec) -> Result<GradCheckReport> {
    let mut cfg = config.clone();
    cfg.seed = seed;
    // Pretrained-scale embeddings; the ±0.05 default leaves the recurrent
    // gradients near the finite-difference noise floor.
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dim = cfg.embed_dim;
    let mut table = vec![0.0; (cfg.vocab_size + 1) * dim];
    table[dim..].iter_mut().for_each(|v| *v = rng.gen_range(-1.0..1.0));
    let embedding = EmbeddingMatrix {
        table: Tensor::new(vec![cfg.vocab_size + 1, dim], table)?,
        coverage: 1.0,
    };
    let mut net = Network::build(&cfg, Some(embedding))?;
    // Zero biases put rectified units exactly on their kink when every input
    // is inactive.
    for (_, p) in net.params_mut().iter_mut() {
        if p.name.ends_with(".b") {
            p.value.data_mut().iter_mut().for_each(|v| *v = rng.gen_range(-0.1..0.1));
        }
    }
    let feats = random_features(&cfg, batch, seed.wrapping_add(1));
    let targets: Vec<f64> = (0..batch).map(|_| rng.gen()).collect();
    let rows: Vec<usize> = (0..batch).collect();
    grad_check(net.params(), NETWORK_STEP, exec, |g| {
        let out = net.forward(g, &feats, &rows)?;
        g.mse(out, &targets)
    })
}
