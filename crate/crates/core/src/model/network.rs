//! The late-fusion regressor.
//!
//! Text branch: embedding, then either two valid 1-D convolutions and a
//! max-pool (CNN) or a recurrent layer and a dense layer (LSTM). Vector
//! branch: one rectified dense layer over the concatenated cue/image blocks.
//! Both outputs are concatenated, passed through a rectified dense head and a
//! single sigmoid unit.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::nn::{Graph, ParamId, ParamStore, Tensor, Var};

use super::config::{Branch, ModelConfig};
use super::embeddings::EmbeddingMatrix;
use super::features::FeatureSet;

#[derive(Debug, Clone, Copy, PartialEq)]
struct Dense {
    w: ParamId,
    b: ParamId,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Lstm {
    /// `[embed, 4H]`, gate blocks ordered input, forget, cell, output.
    w: ParamId,
    /// `[H, 4H]`
    u: ParamId,
    b: ParamId,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum TextLayers {
    None,
    Cnn { conv1: Dense, conv2: Dense },
    Lstm { cell: Lstm, dense: Dense },
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Layers {
    embedding: Option<ParamId>,
    text: TextLayers,
    fusion: Option<Dense>,
    head: Dense,
    out: Dense,
}

/// Parameters plus the layer wiring for one [`ModelConfig`].
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    config: ModelConfig,
    store: ParamStore,
    layers: Layers,
}

fn dense<R: Rng>(store: &mut ParamStore, name: &str, fan_in: usize, fan_out: usize, rng: &mut R) -> Dense {
    Dense {
        w: store.add_scaled_uniform(format!("{name}.w"), &[fan_in, fan_out], fan_in, fan_out, rng),
        b: store.add_zeros(format!("{name}.b"), &[fan_out]),
    }
}

fn conv<R: Rng>(store: &mut ParamStore, name: &str, k: usize, c: usize, f: usize, rng: &mut R) -> Dense {
    Dense {
        w: store.add_scaled_uniform(format!("{name}.w"), &[k, c, f], k * c, k * f, rng),
        b: store.add_zeros(format!("{name}.b"), &[f]),
    }
}

impl Network {
    /// Builds an untrained network. `embedding` supplies the initial table;
    /// otherwise rows are seeded uniform(−0.05, 0.05) with row 0 zero.
    pub fn build(config: &ModelConfig, embedding: Option<EmbeddingMatrix>) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut store = ParamStore::new();

        let mut text_width = 0;
        let (embedding_id, text) = if config.text_branch {
            let table = match embedding {
                Some(e) => {
                    let expected = [config.vocab_size + 1, config.embed_dim];
                    if e.table.shape() != expected {
                        return Err(Error::Shape(format!(
                            "embedding table {:?}, config expects {expected:?}",
                            e.table.shape()
                        )));
                    }
                    e.table
                }
                None => EmbeddingMatrix::random(config.vocab_size, config.embed_dim, &mut rng).table,
            };
            let emb = store.add("embedding", table);
            let text = match config.branch {
                Branch::Cnn => {
                    let c = config.cnn;
                    let conv1 = conv(&mut store, "conv1", c.kernel_1, config.embed_dim, c.filters_1, &mut rng);
                    let conv2 = conv(&mut store, "conv2", c.kernel_2, c.filters_1, c.filters_2, &mut rng);
                    let steps = config.cnn_steps_after_conv().expect("validated");
                    text_width = match c.pool_size {
                        None => c.filters_2,
                        Some(p) => (steps / p) * c.filters_2,
                    };
                    TextLayers::Cnn { conv1, conv2 }
                }
                Branch::Lstm => {
                    let (e, h) = (config.embed_dim, config.lstm_units);
                    let cell = Lstm {
                        w: store.add_scaled_uniform("lstm.w", &[e, 4 * h], e, 4 * h, &mut rng),
                        u: store.add_scaled_uniform("lstm.u", &[h, 4 * h], h, 4 * h, &mut rng),
                        b: store.add_zeros("lstm.b", &[4 * h]),
                    };
                    let d = dense(&mut store, "lstm_dense", h, config.dense_units, &mut rng);
                    text_width = config.dense_units;
                    TextLayers::Lstm { cell, dense: d }
                }
            };
            (Some(emb), text)
        } else {
            (None, TextLayers::None)
        };

        let fusion = (!config.vector_inputs.is_empty()).then(|| {
            dense(&mut store, "fusion", config.vector_width(), config.fusion_units, &mut rng)
        });
        let fused_width = text_width + fusion.map_or(0, |_| config.fusion_units);
        let head = dense(&mut store, "head", fused_width, config.head_units, &mut rng);
        let out = dense(&mut store, "out", config.head_units, 1, &mut rng);

        Ok(Network {
            config: config.clone(),
            store,
            layers: Layers {
                embedding: embedding_id,
                text,
                fusion,
                head,
                out,
            },
        })
    }

    /// Rebuilds the wiring for `config` around previously saved parameters.
    pub fn from_parts(config: &ModelConfig, store: ParamStore) -> Result<Self> {
        let template = Network::build(
            config,
            config.text_branch.then(|| EmbeddingMatrix {
                table: Tensor::zeros(&[config.vocab_size + 1, config.embed_dim]),
                coverage: 0.0,
            }),
        )?;
        if template.store.len() != store.len() {
            return Err(Error::Checkpoint(format!(
                "checkpoint has {} parameters, configuration needs {}",
                store.len(),
                template.store.len()
            )));
        }
        for ((_, want), (_, got)) in template.store.iter().zip(store.iter()) {
            if want.name != got.name || want.value.shape() != got.value.shape() {
                return Err(Error::Checkpoint(format!(
                    "parameter `{}` {:?} does not match expected `{}` {:?}",
                    got.name,
                    got.value.shape(),
                    want.name,
                    want.value.shape()
                )));
            }
        }
        Ok(Network {
            config: config.clone(),
            store,
            layers: template.layers,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn params(&self) -> &ParamStore {
        &self.store
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.store
    }

    pub fn into_params(self) -> ParamStore {
        self.store
    }

    fn apply_dense(&self, g: &mut Graph, x: Var, d: Dense) -> Result<Var> {
        let w = g.param(d.w);
        let b = g.param(d.b);
        let z = g.matmul(x, w)?;
        g.add_bias(z, b)
    }

    fn apply_conv(&self, g: &mut Graph, x: Var, d: Dense) -> Result<Var> {
        let w = g.param(d.w);
        let b = g.param(d.b);
        let z = g.conv1d(x, w, b)?;
        Ok(g.relu(z))
    }

    fn text_branch(&self, g: &mut Graph, feats: &FeatureSet, rows: &[usize]) -> Result<Option<Var>> {
        let Some(emb_id) = self.layers.embedding else {
            return Ok(None);
        };
        let (bs, t, e) = (rows.len(), self.config.seq_length, self.config.embed_dim);
        for &r in rows {
            if feats.sequences[r].len() != t {
                return Err(Error::Shape(format!(
                    "sequence of length {} for a model with seq_length {t}",
                    feats.sequences[r].len()
                )));
            }
        }
        let emb = g.param(emb_id);
        let out = match self.layers.text {
            TextLayers::None => return Ok(None),
            TextLayers::Cnn { conv1, conv2 } => {
                let indices: Vec<u32> = rows
                    .iter()
                    .flat_map(|&r| feats.sequences[r].indices().iter().copied())
                    .collect();
                let x = g.gather(emb, &indices, Some(0))?;
                let x = g.reshape(x, &[bs, t, e])?;
                let h1 = self.apply_conv(g, x, conv1)?;
                let h2 = self.apply_conv(g, h1, conv2)?;
                match self.config.cnn.pool_size {
                    None => g.global_max_pool(h2)?,
                    Some(p) => {
                        let pooled = g.max_pool(h2, p)?;
                        let width = g.value(pooled).len() / bs;
                        g.reshape(pooled, &[bs, width])?
                    }
                }
            }
            TextLayers::Lstm { cell, dense } => {
                let hdim = self.config.lstm_units;
                // Time-major so each step reads a contiguous block of rows.
                let indices: Vec<u32> = (0..t)
                    .flat_map(|step| rows.iter().map(move |&r| (r, step)))
                    .map(|(r, step)| feats.sequences[r].indices()[step])
                    .collect();
                let x = g.gather(emb, &indices, Some(0))?;
                let w = g.param(cell.w);
                let u = g.param(cell.u);
                let b = g.param(cell.b);
                let xw = g.matmul(x, w)?;
                let xw = g.add_bias(xw, b)?;
                let mut h: Option<Var> = None;
                let mut c: Option<Var> = None;
                for step in 0..t {
                    let mut z = g.slice_rows(xw, step * bs, bs)?;
                    if let Some(h_prev) = h {
                        let hu = g.matmul(h_prev, u)?;
                        z = g.add(z, hu)?;
                    }
                    let zi = g.slice_cols(z, 0, hdim)?;
                    let zf = g.slice_cols(z, hdim, hdim)?;
                    let zg = g.slice_cols(z, 2 * hdim, hdim)?;
                    let zo = g.slice_cols(z, 3 * hdim, hdim)?;
                    let i = g.sigmoid(zi);
                    let gc = g.tanh(zg);
                    let o = g.sigmoid(zo);
                    let ig = g.mul(i, gc)?;
                    let c_new = match c {
                        Some(c_prev) => {
                            let f = g.sigmoid(zf);
                            let fc = g.mul(f, c_prev)?;
                            g.add(fc, ig)?
                        }
                        None => ig,
                    };
                    let tc = g.tanh(c_new);
                    h = Some(g.mul(o, tc)?);
                    c = Some(c_new);
                }
                let d = self.apply_dense(g, h.expect("seq_length >= 1"), dense)?;
                g.relu(d)
            }
        };
        Ok(Some(out))
    }

    /// Scores `rows` of `feats`; returns the `[rows.len(), 1]` sigmoid output.
    pub fn forward(&self, g: &mut Graph, feats: &FeatureSet, rows: &[usize]) -> Result<Var> {
        if rows.is_empty() {
            return Err(Error::Invalid("forward on an empty batch".into()));
        }
        if feats.vector_width != self.config.vector_width() {
            return Err(Error::Shape(format!(
                "feature vectors of width {}, model expects {}",
                feats.vector_width,
                self.config.vector_width()
            )));
        }
        let mut parts = Vec::with_capacity(2);
        if let Some(t) = self.text_branch(g, feats, rows)? {
            parts.push(t);
        }
        if let Some(fusion) = self.layers.fusion {
            let width = feats.vector_width;
            let data: Vec<f64> = rows.iter().flat_map(|&r| feats.vector(r).iter().copied()).collect();
            let v = g.input(Tensor::new(vec![rows.len(), width], data)?);
            let z = self.apply_dense(g, v, fusion)?;
            parts.push(g.relu(z));
        }
        let fused = if parts.len() == 1 { parts[0] } else { g.concat(&parts)? };
        let h = self.apply_dense(g, fused, self.layers.head)?;
        let h = g.relu(h);
        let logit = self.apply_dense(g, h, self.layers.out)?;
        Ok(g.sigmoid(logit))
    }

    /// Clamped scores for every row of `feats`, in order. Chunks are scored
    /// independently, so a post's score does not depend on its neighbours.
    pub fn predict(&self, feats: &FeatureSet, exec: Exec) -> Result<Vec<f64>> {
        const CHUNK: usize = 64;
        let starts: Vec<usize> = (0..feats.len()).step_by(CHUNK).collect();
        let chunks: Vec<Result<Vec<f64>>> = exec.map(&starts, |&start| {
            let rows: Vec<usize> = (start..(start + CHUNK).min(feats.len())).collect();
            let mut g = Graph::new(&self.store);
            let out = self.forward(&mut g, feats, &rows)?;
            Ok(g.value(out).data().to_vec())
        });
        let mut scores = Vec::with_capacity(feats.len());
        for c in chunks {
            scores.extend(c?);
        }
        for (id, s) in feats.ids.iter().zip(&scores) {
            if !s.is_finite() {
                return Err(Error::Invalid(format!("non-finite score for `{id}`")));
            }
        }
        Ok(scores.into_iter().map(|s| s.clamp(0.0, 1.0)).collect())
    }
}
