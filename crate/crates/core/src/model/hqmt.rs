//! Forward pass of the hierarchical qubit-merging transformer.

use crate::error::{Error, Result};
use crate::noise::stream_rng;
use crate::stabilizer::{CodeLayout, LogicalClass, Syndrome};
use crate::tensor::{Graph, Scalar, Tensor, Var};

use super::config::{Activation, ModelConfig, NormPlacement, StageMode};
use super::params::{truncated_normal, ParamId, ParamStore};
use super::patches::fill_patches;

pub const INIT_STD: f64 = 0.02;
pub const NUM_CLASSES: usize = 4;

/// Parameter handles of one transformer block.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockParams {
    pub ln1_gain: ParamId,
    pub ln1_bias: ParamId,
    pub wq: ParamId,
    pub bq: ParamId,
    pub wk: ParamId,
    pub bk: ParamId,
    pub wv: ParamId,
    pub bv: ParamId,
    pub wo: ParamId,
    pub bo: ParamId,
    pub ln2_gain: ParamId,
    pub ln2_bias: ParamId,
    pub w1: ParamId,
    pub b1: ParamId,
    pub w2: ParamId,
    pub b2: ParamId,
}

impl BlockParams {
    pub fn ids(&self) -> [ParamId; 16] {
        [
            self.ln1_gain,
            self.ln1_bias,
            self.wq,
            self.bq,
            self.wk,
            self.bk,
            self.wv,
            self.bv,
            self.wo,
            self.bo,
            self.ln2_gain,
            self.ln2_bias,
            self.w1,
            self.b1,
            self.w2,
            self.b2,
        ]
    }
}

/// Affine layer handles `(weight [in, out], bias [out])`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Affine {
    pub weight: ParamId,
    pub bias: ParamId,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NormParams {
    pub gain: ParamId,
    pub bias: ParamId,
}

/// A decoder instance: configuration plus parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Hqmt {
    config: ModelConfig,
    n: usize,
    m: usize,
    params: ParamStore,
    embed_z: Affine,
    embed_x: Affine,
    stage1: Vec<BlockParams>,
    stage2: Vec<BlockParams>,
    merge: Affine,
    final_norm: Option<NormParams>,
    head: Affine,
}

/// Output of one recorded forward pass.
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    /// `[B, 4]` logits.
    pub logits: Var,
    /// Attention probability maps `[B, t, t]`, one per head per block.
    pub attention: Vec<Var>,
    /// Shape after each pipeline stage.
    pub shapes: Vec<(&'static str, Vec<usize>)>,
}

struct Builder<'a, R> {
    params: &'a mut ParamStore,
    rng: &'a mut R,
}

impl<R: rand::Rng> Builder<'_, R> {
    fn weight(&mut self, name: String, rows: usize, cols: usize) -> ParamId {
        let t = truncated_normal(&[rows, cols], INIT_STD, self.rng);
        self.params.add(name, t)
    }

    fn zeros(&mut self, name: String, len: usize) -> ParamId {
        self.params.add(name, Tensor::zeros(&[len]))
    }

    fn ones(&mut self, name: String, len: usize) -> ParamId {
        self.params.add(name, Tensor::full(&[len], 1.0))
    }

    fn affine(&mut self, prefix: &str, rows: usize, cols: usize) -> Affine {
        Affine {
            weight: self.weight(format!("{prefix}.weight"), rows, cols),
            bias: self.zeros(format!("{prefix}.bias"), cols),
        }
    }

    fn block(&mut self, prefix: &str, d: usize, ffn: usize) -> BlockParams {
        BlockParams {
            ln1_gain: self.ones(format!("{prefix}.ln1.gain"), d),
            ln1_bias: self.zeros(format!("{prefix}.ln1.bias"), d),
            wq: self.weight(format!("{prefix}.attn.wq"), d, d),
            bq: self.zeros(format!("{prefix}.attn.bq"), d),
            wk: self.weight(format!("{prefix}.attn.wk"), d, d),
            bk: self.zeros(format!("{prefix}.attn.bk"), d),
            wv: self.weight(format!("{prefix}.attn.wv"), d, d),
            bv: self.zeros(format!("{prefix}.attn.bv"), d),
            wo: self.weight(format!("{prefix}.attn.wo"), d, d),
            bo: self.zeros(format!("{prefix}.attn.bo"), d),
            ln2_gain: self.ones(format!("{prefix}.ln2.gain"), d),
            ln2_bias: self.zeros(format!("{prefix}.ln2.bias"), d),
            w1: self.weight(format!("{prefix}.ffn.w1"), d, ffn),
            b1: self.zeros(format!("{prefix}.ffn.b1"), ffn),
            w2: self.weight(format!("{prefix}.ffn.w2"), ffn, d),
            b2: self.zeros(format!("{prefix}.ffn.b2"), d),
        }
    }
}

impl Hqmt {
    /// Freshly initialized model: affine weights from a truncated normal with
    /// std 0.02, zero biases, unit normalization gains.
    pub fn new(config: ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let n = config.distance * config.distance;
        let m = (n - 1) / 2;
        let d = config.d_model;
        let ffn = d * config.ffn_mult;
        let mut params = ParamStore::new();
        let mut rng = stream_rng(seed, u64::MAX);
        let mut b = Builder {
            params: &mut params,
            rng: &mut rng,
        };

        let embed_z = b.affine(if config.share_embedding { "embed" } else { "embed_z" }, m, d);
        let embed_x = if config.share_embedding {
            embed_z
        } else {
            b.affine("embed_x", m, d)
        };
        let shared = config.share_weights && config.stage_mode == StageMode::Full;
        let mut stage1 = Vec::new();
        let mut stage2 = Vec::new();
        for j in 0..config.n_blocks {
            if shared {
                let blk = b.block(&format!("shared.block{j}"), d, ffn);
                stage1.push(blk.clone());
                stage2.push(blk);
            } else {
                if config.stage_mode.runs_stage1() {
                    stage1.push(b.block(&format!("stage1.block{j}"), d, ffn));
                }
                if config.stage_mode.runs_stage2() {
                    stage2.push(b.block(&format!("stage2.block{j}"), d, ffn));
                }
            }
        }
        let merge = b.affine("merge", 2 * d, d);
        let final_norm = (config.norm == NormPlacement::Pre).then(|| NormParams {
            gain: b.ones("final_norm.gain".into(), d),
            bias: b.zeros("final_norm.bias".into(), d),
        });
        let head = b.affine("head", d, NUM_CLASSES);

        Ok(Self {
            config,
            n,
            m,
            params,
            embed_z,
            embed_x,
            stage1,
            stage2,
            merge,
            final_norm,
            head,
        })
    }

    /// Rebuilds a model from a configuration and named parameter values.
    pub fn from_named(config: ModelConfig, named: Vec<(String, Tensor<f32>)>) -> Result<Self> {
        let mut model = Self::new(config, 0)?;
        if named.len() != model.params.len() {
            return Err(Error::Format(format!(
                "expected {} parameters, found {}",
                model.params.len(),
                named.len()
            )));
        }
        for (name, value) in named {
            let id = model
                .params
                .find(&name)
                .ok_or_else(|| Error::Format(format!("unexpected parameter {name:?}")))?;
            if model.params.get(id).shape() != value.shape() {
                return Err(Error::Format(format!(
                    "parameter {name:?} has shape {:?}, expected {:?}",
                    value.shape(),
                    model.params.get(id).shape()
                )));
            }
            *model.params.get_mut(id) = value;
        }
        Ok(model)
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn params(&self) -> &ParamStore {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.params
    }

    pub fn stage1_blocks(&self) -> &[BlockParams] {
        &self.stage1
    }

    pub fn stage2_blocks(&self) -> &[BlockParams] {
        &self.stage2
    }

    pub fn embed(&self) -> (Affine, Affine) {
        (self.embed_z, self.embed_x)
    }

    pub fn merge_layer(&self) -> Affine {
        self.merge
    }

    pub fn num_qubits(&self) -> usize {
        self.n
    }

    pub fn check_layout(&self, layout: &CodeLayout) -> Result<()> {
        if layout.distance() != self.config.distance {
            return Err(Error::DistanceMismatch {
                checkpoint: self.config.distance,
                requested: layout.distance(),
            });
        }
        Ok(())
    }

    /// Records every parameter on `g` and returns their handles by id.
    pub fn bind<T: Scalar>(&self, g: &mut Graph<T>, requires_grad: bool) -> Vec<Var> {
        self.params
            .values()
            .iter()
            .map(|t| g.leaf(t.cast::<T>(), requires_grad))
            .collect()
    }

    /// `[B, n, m]` Z- and X-patch tensors for a batch of syndromes.
    pub fn patch_tensors<T: Scalar>(
        &self,
        layout: &CodeLayout,
        syndromes: &[Syndrome],
    ) -> Result<(Tensor<T>, Tensor<T>)> {
        self.check_layout(layout)?;
        let (n, m) = (self.n, self.m);
        let b = syndromes.len();
        let mut z = Vec::with_capacity(b * n * m);
        let mut x = Vec::with_capacity(b * n * m);
        let mut buf = vec![0.0f32; 2 * n * m];
        for s in syndromes {
            if s.m() != m {
                return Err(Error::LengthMismatch {
                    expected: m,
                    actual: s.m(),
                });
            }
            fill_patches(layout, s, &mut buf);
            z.extend(buf[..n * m].iter().map(|&v| T::lit(v as f64)));
            x.extend(buf[n * m..].iter().map(|&v| T::lit(v as f64)));
        }
        Ok((Tensor::new(vec![b, n, m], z)?, Tensor::new(vec![b, n, m], x)?))
    }

    /// Records the full pipeline on `g` for `[B, n, m]` patch inputs.
    pub fn forward_graph<T: Scalar>(
        &self,
        g: &mut Graph<T>,
        p: &[Var],
        patches_z: Var,
        patches_x: Var,
    ) -> Result<ForwardTrace> {
        let mut attention = Vec::new();
        let mut shapes = Vec::new();
        let mut x = embed_tokens(g, p, self.embed_z, self.embed_x, patches_z, patches_x)?;
        shapes.push(("embed", g.shape(x).to_vec()));
        if self.config.stage_mode.runs_stage1() {
            for blk in &self.stage1 {
                x = transformer_block(g, p, blk, &self.config, x, &mut attention)?;
            }
            shapes.push(("stage1", g.shape(x).to_vec()));
        }
        x = qubit_merge(g, p, self.merge, x)?;
        shapes.push(("merge", g.shape(x).to_vec()));
        if self.config.stage_mode.runs_stage2() {
            for blk in &self.stage2 {
                x = transformer_block(g, p, blk, &self.config, x, &mut attention)?;
            }
            shapes.push(("stage2", g.shape(x).to_vec()));
        }
        if let Some(norm) = self.final_norm {
            x = affine_norm(g, p, norm, x)?;
        }
        let pooled = g.mean(x, 1)?;
        shapes.push(("pool", g.shape(pooled).to_vec()));
        let logits = affine(g, p, self.head, pooled)?;
        shapes.push(("logits", g.shape(logits).to_vec()));
        Ok(ForwardTrace {
            logits,
            attention,
            shapes,
        })
    }

    /// Inference over a batch of syndromes, without recording gradients.
    pub fn logits(&self, layout: &CodeLayout, syndromes: &[Syndrome]) -> Result<Vec<[f32; 4]>> {
        if syndromes.is_empty() {
            return Ok(Vec::new());
        }
        let (pz, px) = self.patch_tensors::<f32>(layout, syndromes)?;
        let mut g = Graph::<f32>::new();
        let p = self.bind(&mut g, false);
        let z = g.constant(pz);
        let xv = g.constant(px);
        let trace = self.forward_graph(&mut g, &p, z, xv)?;
        Ok(g.value(trace.logits)
            .data()
            .chunks(NUM_CLASSES)
            .map(|c| [c[0], c[1], c[2], c[3]])
            .collect())
    }

    /// Single-syndrome forward pass.
    pub fn forward(&self, layout: &CodeLayout, s: &Syndrome) -> Result<[f32; 4]> {
        Ok(self.logits(layout, std::slice::from_ref(s))?[0])
    }

    /// Predicted classes in batches of at most `batch` syndromes.
    pub fn predict_batch(
        &self,
        layout: &CodeLayout,
        syndromes: &[Syndrome],
        batch: usize,
    ) -> Result<Vec<LogicalClass>> {
        let mut out = Vec::with_capacity(syndromes.len());
        for chunk in syndromes.chunks(batch.max(1)) {
            out.extend(self.logits(layout, chunk)?.iter().map(|l| predict(l)));
        }
        Ok(out)
    }
}

/// Argmax over `(I, X, Y, Z)` logits; ties go to the earlier class.
pub fn predict(logits: &[f32; 4]) -> LogicalClass {
    let mut best = 0;
    for c in 1..NUM_CLASSES {
        if logits[c] > logits[best] {
            best = c;
        }
    }
    LogicalClass::ALL[best]
}

pub fn affine<T: Scalar>(g: &mut Graph<T>, p: &[Var], layer: Affine, x: Var) -> Result<Var> {
    let y = g.matmul(x, p[layer.weight.0])?;
    g.add(y, p[layer.bias.0])
}

fn affine_norm<T: Scalar>(g: &mut Graph<T>, p: &[Var], norm: NormParams, x: Var) -> Result<Var> {
    let y = g.layer_norm(x);
    let y = g.mul(y, p[norm.gain.0])?;
    g.add(y, p[norm.bias.0])
}

/// `[B, n, m]` Z and X patches to `[B, 2n, d_model]` tokens, Z tokens first.
pub fn embed_tokens<T: Scalar>(
    g: &mut Graph<T>,
    p: &[Var],
    embed_z: Affine,
    embed_x: Affine,
    patches_z: Var,
    patches_x: Var,
) -> Result<Var> {
    let tz = affine(g, p, embed_z, patches_z)?;
    let tx = affine(g, p, embed_x, patches_x)?;
    g.concat(&[tz, tx], 1)
}

/// `softmax(Q Kᵀ / √d_h) V` over the last two axes. Returns the output and
/// the attention probabilities.
pub fn attention<T: Scalar>(g: &mut Graph<T>, q: Var, k: Var, v: Var) -> Result<(Var, Var)> {
    let dh = *g.shape(q).last().unwrap_or(&1);
    let kt = g.transpose(k)?;
    let scores = g.matmul(q, kt)?;
    let scores = g.scale(scores, 1.0 / (dh as f64).sqrt());
    let probs = g.softmax(scores);
    let out = g.matmul(probs, v)?;
    Ok((out, probs))
}

fn multi_head_attention<T: Scalar>(
    g: &mut Graph<T>,
    p: &[Var],
    blk: &BlockParams,
    cfg: &ModelConfig,
    x: Var,
    maps: &mut Vec<Var>,
) -> Result<Var> {
    let proj = |g: &mut Graph<T>, w: ParamId, b: ParamId| -> Result<Var> {
        let y = g.matmul(x, p[w.0])?;
        g.add(y, p[b.0])
    };
    let q = proj(g, blk.wq, blk.bq)?;
    let k = proj(g, blk.wk, blk.bk)?;
    let v = proj(g, blk.wv, blk.bv)?;
    let sizes = vec![cfg.d_head(); cfg.n_heads];
    let (qs, ks, vs) = if cfg.n_heads == 1 {
        (vec![q], vec![k], vec![v])
    } else {
        (
            g.split_last(q, &sizes)?,
            g.split_last(k, &sizes)?,
            g.split_last(v, &sizes)?,
        )
    };
    let mut heads = Vec::with_capacity(cfg.n_heads);
    for h in 0..cfg.n_heads {
        let (out, probs) = attention(g, qs[h], ks[h], vs[h])?;
        heads.push(out);
        maps.push(probs);
    }
    let cat = if heads.len() == 1 {
        heads[0]
    } else {
        g.concat_last(&heads)?
    };
    let y = g.matmul(cat, p[blk.wo.0])?;
    g.add(y, p[blk.bo.0])
}

fn feed_forward<T: Scalar>(
    g: &mut Graph<T>,
    p: &[Var],
    blk: &BlockParams,
    cfg: &ModelConfig,
    x: Var,
) -> Result<Var> {
    let h = g.matmul(x, p[blk.w1.0])?;
    let h = g.add(h, p[blk.b1.0])?;
    let h = match cfg.activation {
        Activation::Gelu => g.gelu(h),
        Activation::Relu => g.relu(h),
    };
    let y = g.matmul(h, p[blk.w2.0])?;
    g.add(y, p[blk.b2.0])
}

/// One block: multi-head self-attention and a position-wise FFN, each with a
/// residual connection and layer normalization. No positional encoding.
pub fn transformer_block<T: Scalar>(
    g: &mut Graph<T>,
    p: &[Var],
    blk: &BlockParams,
    cfg: &ModelConfig,
    x: Var,
    maps: &mut Vec<Var>,
) -> Result<Var> {
    let width = *g.shape(x).last().unwrap_or(&0);
    if width != cfg.d_model {
        return Err(Error::shape("transformer_block", g.shape(x), &[cfg.d_model]));
    }
    let norm1 = NormParams {
        gain: blk.ln1_gain,
        bias: blk.ln1_bias,
    };
    let norm2 = NormParams {
        gain: blk.ln2_gain,
        bias: blk.ln2_bias,
    };
    match cfg.norm {
        NormPlacement::Pre => {
            let h = affine_norm(g, p, norm1, x)?;
            let a = multi_head_attention(g, p, blk, cfg, h, maps)?;
            let x = g.add(x, a)?;
            let h = affine_norm(g, p, norm2, x)?;
            let f = feed_forward(g, p, blk, cfg, h)?;
            g.add(x, f)
        }
        NormPlacement::Post => {
            let a = multi_head_attention(g, p, blk, cfg, x, maps)?;
            let x = g.add(x, a)?;
            let x = affine_norm(g, p, norm1, x)?;
            let f = feed_forward(g, p, blk, cfg, x)?;
            let x = g.add(x, f)?;
            affine_norm(g, p, norm2, x)
        }
    }
}

/// `[B, 2n, d]` → `[B, n, d]`: token `i` and token `n + i` are concatenated
/// and projected back to width `d` by one shared affine map.
pub fn qubit_merge<T: Scalar>(g: &mut Graph<T>, p: &[Var], merge: Affine, x: Var) -> Result<Var> {
    let sh = g.shape(x).to_vec();
    if sh.len() != 3 || sh[1] % 2 != 0 {
        return Err(Error::shape("qubit_merge", &sh, &[]));
    }
    let n = sh[1] / 2;
    let halves = g.split(x, 1, &[n, n])?;
    let cat = g.concat_last(&halves)?;
    affine(g, p, merge, cat)
}
