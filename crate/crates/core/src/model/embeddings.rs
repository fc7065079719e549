//! Embedding-table initialisation from pretrained word vectors.

use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::nn::Tensor;
use crate::text::Vocabulary;

/// Range of the seeded uniform used for rows without a pretrained vector.
pub const RANDOM_INIT_RANGE: f64 = 0.05;

/// `[vocab_size + 1, dim]` table; row 0 is the all-zero padding row.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    pub table: Tensor,
    /// Fraction of vocabulary words found in the pretrained file.
    pub coverage: f64,
}

impl EmbeddingMatrix {
    pub fn random<R: Rng>(vocab_size: usize, dim: usize, rng: &mut R) -> Self {
        let mut data = vec![0.0; (vocab_size + 1) * dim];
        for v in &mut data[dim..] {
            *v = rng.gen_range(-RANDOM_INIT_RANGE..RANDOM_INIT_RANGE);
        }
        EmbeddingMatrix {
            table: Tensor::new(vec![vocab_size + 1, dim], data).expect("sized"),
            coverage: 0.0,
        }
    }

    pub fn row(&self, index: usize) -> &[f64] {
        let dim = self.table.cols();
        &self.table.data()[index * dim..(index + 1) * dim]
    }
}

/// Reads whitespace-delimited `word v1 ... v_dim` lines. Vocabulary words
/// found in the file get its vector; the rest keep seeded random values.
pub fn read_pretrained_embeddings<R: BufRead>(
    reader: R,
    vocab: &Vocabulary,
    vocab_size: usize,
    dim: usize,
    seed: u64,
) -> Result<EmbeddingMatrix> {
    if vocab.len() > vocab_size {
        return Err(Error::Config(format!(
            "vocabulary of {} words exceeds table size {vocab_size}",
            vocab.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut m = EmbeddingMatrix::random(vocab_size, dim, &mut rng);
    let mut found = vec![false; vocab.len() + 1];
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::Parse {
            line: i + 1,
            message: e.to_string(),
        })?;
        let mut parts = line.split_whitespace();
        let Some(word) = parts.next() else { continue };
        let values: Vec<&str> = parts.collect();
        if values.len() != dim {
            return Err(Error::Dimension {
                id: format!("{word} (line {})", i + 1),
                expected: dim,
                found: values.len(),
            });
        }
        let Some(idx) = vocab.index(word) else { continue };
        let idx = idx as usize;
        if found[idx] {
            continue;
        }
        let row = &mut m.table.data_mut()[idx * dim..(idx + 1) * dim];
        for (slot, v) in row.iter_mut().zip(values) {
            *slot = v.parse().map_err(|_| Error::Parse {
                line: i + 1,
                message: format!("bad value `{v}`"),
            })?;
        }
        found[idx] = true;
    }
    let hits = found.iter().filter(|f| **f).count();
    m.coverage = if vocab.is_empty() {
        0.0
    } else {
        hits as f64 / vocab.len() as f64
    };
    log::info!(
        "pretrained embeddings cover {hits}/{} vocabulary words ({:.1}%)",
        vocab.len(),
        100.0 * m.coverage
    );
    Ok(m)
}

pub fn load_pretrained_embeddings(
    path: &Path,
    vocab: &Vocabulary,
    vocab_size: usize,
    dim: usize,
    seed: u64,
) -> Result<EmbeddingMatrix> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    read_pretrained_embeddings(BufReader::new(f), vocab, vocab_size, dim, seed)
}
