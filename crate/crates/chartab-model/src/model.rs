//! Multimodal encoder-decoder at desk scale: region features and OCR
//! sentinels enter through a shared 5-d location projection, text enters
//! through the shared word embedding, and attention carries a T5-style
//! bucketed relative bias where every pair touching a region or OCR
//! position shares one dedicated cross-modal bucket. Backpropagation is
//! written out by hand and verified against finite differences.
//!
//! The output head is its own matrix (not tied to the embedding); all
//! arithmetic is f64.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bias::relative_bucket;
use crate::tensor::{axpy, dot, Mat};
use crate::vocab::BOS;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("bad model config: {0}")]
    Config(String),
    #[error("bad input: {0}")]
    Input(String),
    #[error("target sequence is empty")]
    EmptyTarget,
    #[error("epsilon {0} is not a positive finite step")]
    BadEpsilon(f64),
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("loss diverged to a non-finite value at step {step}")]
    Diverged { step: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub d_model: usize,
    pub n_heads: usize,
    pub n_enc_layers: usize,
    pub n_dec_layers: usize,
    pub d_ff: usize,
    /// Width of detector region features.
    pub d_region: usize,
    /// Text-text relative-position buckets; the encoder keeps one extra
    /// bucket for any pair involving a region or OCR position.
    pub n_buckets: usize,
    pub max_distance: usize,
    pub max_input_len: usize,
    pub max_target_len: usize,
    pub vocab_size: usize,
    /// How many OCR sentinels the vocabulary reserves.
    pub n_ocr: usize,
}

impl ModelConfig {
    /// Training-size defaults (still CPU-minutes scale).
    pub fn micro(vocab_size: usize, n_ocr: usize) -> ModelConfig {
        ModelConfig {
            d_model: 64,
            n_heads: 4,
            n_enc_layers: 2,
            n_dec_layers: 2,
            d_ff: 256,
            d_region: 16,
            n_buckets: 32,
            max_distance: 128,
            max_input_len: 256,
            max_target_len: 64,
            vocab_size,
            n_ocr,
        }
    }

    /// Gradient-check size: small enough that finite differences stay sharp.
    pub fn tiny(vocab_size: usize, n_ocr: usize) -> ModelConfig {
        ModelConfig {
            d_model: 8,
            n_heads: 2,
            n_enc_layers: 1,
            n_dec_layers: 1,
            d_ff: 16,
            d_region: 4,
            n_buckets: 4,
            max_distance: 16,
            max_input_len: 64,
            max_target_len: 16,
            vocab_size,
            n_ocr,
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |m: String| Err(ModelError::Config(m));
        if self.d_model == 0 || self.n_heads == 0 || !self.d_model.is_multiple_of(self.n_heads) {
            return bad(format!(
                "d_model {} must be a positive multiple of n_heads {}",
                self.d_model, self.n_heads
            ));
        }
        if self.n_enc_layers == 0 || self.n_dec_layers == 0 {
            return bad("need at least one encoder and one decoder layer".into());
        }
        if self.d_ff == 0 || self.d_region == 0 {
            return bad("d_ff and d_region must be positive".into());
        }
        if self.n_buckets < 2 || !self.n_buckets.is_multiple_of(2) {
            return bad(format!("n_buckets {} must be even and at least 2", self.n_buckets));
        }
        if self.max_distance <= self.n_buckets / 4 {
            return bad(format!(
                "max_distance {} too small for {} buckets",
                self.max_distance, self.n_buckets
            ));
        }
        if self.vocab_size < 5 {
            return bad(format!("vocab size {} cannot hold the specials", self.vocab_size));
        }
        if self.max_input_len == 0 || self.max_target_len == 0 {
            return bad("sequence length limits must be positive".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegionIn {
    pub features: Vec<f64>,
    pub loc: [f64; 5],
}

#[derive(Debug, Clone, PartialEq)]
pub struct OcrIn {
    pub id: usize,
    pub loc: [f64; 5],
}

/// One sample's concatenated input: regions, then OCR sentinels, then text.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MultimodalInput {
    pub regions: Vec<RegionIn>,
    pub ocr: Vec<OcrIn>,
    pub text: Vec<usize>,
}

impl MultimodalInput {
    pub fn len(&self) -> usize {
        self.regions.len() + self.ocr.len() + self.text.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn validate(&self, config: &ModelConfig) -> Result<(), ModelError> {
        let err = |m: String| Err(ModelError::Input(m));
        if self.is_empty() {
            return err("input has no positions".into());
        }
        if self.len() > config.max_input_len {
            return err(format!("input length {} exceeds {}", self.len(), config.max_input_len));
        }
        if self.ocr.len() > config.n_ocr {
            return err(format!(
                "{} OCR tokens exceed the {} reserved sentinels",
                self.ocr.len(),
                config.n_ocr
            ));
        }
        for (i, r) in self.regions.iter().enumerate() {
            if r.features.len() != config.d_region {
                return err(format!(
                    "region {i} feature width {} != d_region {}",
                    r.features.len(),
                    config.d_region
                ));
            }
            if !r.features.iter().chain(r.loc.iter()).all(|v| v.is_finite()) {
                return err(format!("region {i} has non-finite values"));
            }
        }
        for (i, o) in self.ocr.iter().enumerate() {
            if o.id >= config.vocab_size {
                return err(format!("OCR id {} at {i} outside vocab {}", o.id, config.vocab_size));
            }
            if !o.loc.iter().all(|v| v.is_finite()) {
                return err(format!("OCR token {i} has a non-finite location"));
            }
        }
        for (i, &t) in self.text.iter().enumerate() {
            if t >= config.vocab_size {
                return err(format!("text id {t} at {i} outside vocab {}", config.vocab_size));
            }
        }
        Ok(())
    }
}

/// Position kind along the encoder sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    Region,
    Ocr,
    Text,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttnP {
    pub wq: Mat,
    pub wk: Mat,
    pub wv: Mat,
    pub wo: Mat,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncLayerP {
    pub g1: Mat,
    pub attn: AttnP,
    pub g2: Mat,
    pub w1: Mat,
    pub b1: Mat,
    pub w2: Mat,
    pub b2: Mat,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecLayerP {
    pub g1: Mat,
    pub self_attn: AttnP,
    pub gc: Mat,
    pub cross: AttnP,
    pub g2: Mat,
    pub w1: Mat,
    pub b1: Mat,
    pub w2: Mat,
    pub b2: Mat,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MicroModelParams {
    pub config: ModelConfig,
    pub embed: Mat,
    pub region_proj: Mat,
    pub region_bias: Mat,
    pub loc_proj: Mat,
    pub loc_bias: Mat,
    pub enc: Vec<EncLayerP>,
    pub dec: Vec<DecLayerP>,
    pub g_enc_final: Mat,
    pub g_dec_final: Mat,
    /// Shared across encoder layers; column n_buckets is the cross-modal
    /// bucket.
    pub enc_bias: Mat,
    /// Shared across decoder self-attention layers.
    pub dec_bias: Mat,
    pub w_out: Mat,
}

fn xavier(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Mat {
    let s = (6.0 / (rows + cols) as f64).sqrt();
    let mut m = Mat::zeros(rows, cols);
    for v in &mut m.data {
        *v = rng.gen_range(-s..s);
    }
    m
}

fn attn_init(rng: &mut ChaCha8Rng, d: usize) -> AttnP {
    AttnP {
        wq: xavier(rng, d, d),
        wk: xavier(rng, d, d),
        wv: xavier(rng, d, d),
        wo: xavier(rng, d, d),
    }
}

fn ones(cols: usize) -> Mat {
    Mat { rows: 1, cols, data: vec![1.0; cols] }
}

impl MicroModelParams {
    /// Scaled-uniform (Xavier) init for matrices; unit norm gains; zero
    /// biases and zero relative-bias tables.
    pub fn init(config: &ModelConfig, seed: u64) -> Result<MicroModelParams, ModelError> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = config.d_model;
        let enc = (0..config.n_enc_layers)
            .map(|_| EncLayerP {
                g1: ones(d),
                attn: attn_init(&mut rng, d),
                g2: ones(d),
                w1: xavier(&mut rng, d, config.d_ff),
                b1: Mat::zeros(1, config.d_ff),
                w2: xavier(&mut rng, config.d_ff, d),
                b2: Mat::zeros(1, d),
            })
            .collect();
        let dec = (0..config.n_dec_layers)
            .map(|_| DecLayerP {
                g1: ones(d),
                self_attn: attn_init(&mut rng, d),
                gc: ones(d),
                cross: attn_init(&mut rng, d),
                g2: ones(d),
                w1: xavier(&mut rng, d, config.d_ff),
                b1: Mat::zeros(1, config.d_ff),
                w2: xavier(&mut rng, config.d_ff, d),
                b2: Mat::zeros(1, d),
            })
            .collect();
        // A down-scaled output head keeps the initial logits near uniform,
        // so training starts from the analytic ln V loss anchor.
        let mut w_out = xavier(&mut rng, d, config.vocab_size);
        w_out.scale(0.25);
        Ok(MicroModelParams {
            embed: xavier(&mut rng, config.vocab_size, d),
            region_proj: xavier(&mut rng, config.d_region, d),
            region_bias: Mat::zeros(1, d),
            loc_proj: xavier(&mut rng, 5, d),
            loc_bias: Mat::zeros(1, d),
            enc,
            dec,
            g_enc_final: ones(d),
            g_dec_final: ones(d),
            enc_bias: Mat::zeros(config.n_heads, config.n_buckets + 1),
            dec_bias: Mat::zeros(config.n_heads, config.n_buckets),
            w_out,
            config: config.clone(),
        })
    }

    /// Same shapes, all zero — the gradient/velocity container.
    pub fn zeros_like(config: &ModelConfig) -> MicroModelParams {
        let d = config.d_model;
        let zattn = || AttnP {
            wq: Mat::zeros(d, d),
            wk: Mat::zeros(d, d),
            wv: Mat::zeros(d, d),
            wo: Mat::zeros(d, d),
        };
        MicroModelParams {
            embed: Mat::zeros(config.vocab_size, d),
            region_proj: Mat::zeros(config.d_region, d),
            region_bias: Mat::zeros(1, d),
            loc_proj: Mat::zeros(5, d),
            loc_bias: Mat::zeros(1, d),
            enc: (0..config.n_enc_layers)
                .map(|_| EncLayerP {
                    g1: Mat::zeros(1, d),
                    attn: zattn(),
                    g2: Mat::zeros(1, d),
                    w1: Mat::zeros(d, config.d_ff),
                    b1: Mat::zeros(1, config.d_ff),
                    w2: Mat::zeros(config.d_ff, d),
                    b2: Mat::zeros(1, d),
                })
                .collect(),
            dec: (0..config.n_dec_layers)
                .map(|_| DecLayerP {
                    g1: Mat::zeros(1, d),
                    self_attn: zattn(),
                    gc: Mat::zeros(1, d),
                    cross: zattn(),
                    g2: Mat::zeros(1, d),
                    w1: Mat::zeros(d, config.d_ff),
                    b1: Mat::zeros(1, config.d_ff),
                    w2: Mat::zeros(config.d_ff, d),
                    b2: Mat::zeros(1, d),
                })
                .collect(),
            g_enc_final: Mat::zeros(1, d),
            g_dec_final: Mat::zeros(1, d),
            enc_bias: Mat::zeros(config.n_heads, config.n_buckets + 1),
            dec_bias: Mat::zeros(config.n_heads, config.n_buckets),
            w_out: Mat::zeros(d, config.vocab_size),
            config: config.clone(),
        }
    }

    /// Stable enumeration of every trainable tensor; update rules,
    /// checkpointing, and the gradient check all walk this list.
    pub fn tensors(&self) -> Vec<(String, &Mat)> {
        let mut out: Vec<(String, &Mat)> = vec![
            ("embed".into(), &self.embed),
            ("region_proj".into(), &self.region_proj),
            ("region_bias".into(), &self.region_bias),
            ("loc_proj".into(), &self.loc_proj),
            ("loc_bias".into(), &self.loc_bias),
        ];
        for (i, l) in self.enc.iter().enumerate() {
            out.push((format!("enc.{i}.norm1.g"), &l.g1));
            out.push((format!("enc.{i}.attn.wq"), &l.attn.wq));
            out.push((format!("enc.{i}.attn.wk"), &l.attn.wk));
            out.push((format!("enc.{i}.attn.wv"), &l.attn.wv));
            out.push((format!("enc.{i}.attn.wo"), &l.attn.wo));
            out.push((format!("enc.{i}.norm2.g"), &l.g2));
            out.push((format!("enc.{i}.ffn.w1"), &l.w1));
            out.push((format!("enc.{i}.ffn.b1"), &l.b1));
            out.push((format!("enc.{i}.ffn.w2"), &l.w2));
            out.push((format!("enc.{i}.ffn.b2"), &l.b2));
        }
        for (i, l) in self.dec.iter().enumerate() {
            out.push((format!("dec.{i}.norm1.g"), &l.g1));
            out.push((format!("dec.{i}.self.wq"), &l.self_attn.wq));
            out.push((format!("dec.{i}.self.wk"), &l.self_attn.wk));
            out.push((format!("dec.{i}.self.wv"), &l.self_attn.wv));
            out.push((format!("dec.{i}.self.wo"), &l.self_attn.wo));
            out.push((format!("dec.{i}.norm_cross.g"), &l.gc));
            out.push((format!("dec.{i}.cross.wq"), &l.cross.wq));
            out.push((format!("dec.{i}.cross.wk"), &l.cross.wk));
            out.push((format!("dec.{i}.cross.wv"), &l.cross.wv));
            out.push((format!("dec.{i}.cross.wo"), &l.cross.wo));
            out.push((format!("dec.{i}.norm2.g"), &l.g2));
            out.push((format!("dec.{i}.ffn.w1"), &l.w1));
            out.push((format!("dec.{i}.ffn.b1"), &l.b1));
            out.push((format!("dec.{i}.ffn.w2"), &l.w2));
            out.push((format!("dec.{i}.ffn.b2"), &l.b2));
        }
        out.push(("enc_final_norm.g".into(), &self.g_enc_final));
        out.push(("dec_final_norm.g".into(), &self.g_dec_final));
        out.push(("enc_rel_bias".into(), &self.enc_bias));
        out.push(("dec_rel_bias".into(), &self.dec_bias));
        out.push(("w_out".into(), &self.w_out));
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<(String, &mut Mat)> {
        let mut out: Vec<(String, &mut Mat)> = vec![
            ("embed".into(), &mut self.embed),
            ("region_proj".into(), &mut self.region_proj),
            ("region_bias".into(), &mut self.region_bias),
            ("loc_proj".into(), &mut self.loc_proj),
            ("loc_bias".into(), &mut self.loc_bias),
        ];
        for (i, l) in self.enc.iter_mut().enumerate() {
            out.push((format!("enc.{i}.norm1.g"), &mut l.g1));
            out.push((format!("enc.{i}.attn.wq"), &mut l.attn.wq));
            out.push((format!("enc.{i}.attn.wk"), &mut l.attn.wk));
            out.push((format!("enc.{i}.attn.wv"), &mut l.attn.wv));
            out.push((format!("enc.{i}.attn.wo"), &mut l.attn.wo));
            out.push((format!("enc.{i}.norm2.g"), &mut l.g2));
            out.push((format!("enc.{i}.ffn.w1"), &mut l.w1));
            out.push((format!("enc.{i}.ffn.b1"), &mut l.b1));
            out.push((format!("enc.{i}.ffn.w2"), &mut l.w2));
            out.push((format!("enc.{i}.ffn.b2"), &mut l.b2));
        }
        for (i, l) in self.dec.iter_mut().enumerate() {
            out.push((format!("dec.{i}.norm1.g"), &mut l.g1));
            out.push((format!("dec.{i}.self.wq"), &mut l.self_attn.wq));
            out.push((format!("dec.{i}.self.wk"), &mut l.self_attn.wk));
            out.push((format!("dec.{i}.self.wv"), &mut l.self_attn.wv));
            out.push((format!("dec.{i}.self.wo"), &mut l.self_attn.wo));
            out.push((format!("dec.{i}.norm_cross.g"), &mut l.gc));
            out.push((format!("dec.{i}.cross.wq"), &mut l.cross.wq));
            out.push((format!("dec.{i}.cross.wk"), &mut l.cross.wk));
            out.push((format!("dec.{i}.cross.wv"), &mut l.cross.wv));
            out.push((format!("dec.{i}.cross.wo"), &mut l.cross.wo));
            out.push((format!("dec.{i}.norm2.g"), &mut l.g2));
            out.push((format!("dec.{i}.ffn.w1"), &mut l.w1));
            out.push((format!("dec.{i}.ffn.b1"), &mut l.b1));
            out.push((format!("dec.{i}.ffn.w2"), &mut l.w2));
            out.push((format!("dec.{i}.ffn.b2"), &mut l.b2));
        }
        out.push(("enc_final_norm.g".into(), &mut self.g_enc_final));
        out.push(("dec_final_norm.g".into(), &mut self.g_dec_final));
        out.push(("enc_rel_bias".into(), &mut self.enc_bias));
        out.push(("dec_rel_bias".into(), &mut self.dec_bias));
        out.push(("w_out".into(), &mut self.w_out));
        out
    }

    pub fn all_finite(&self) -> bool {
        self.tensors().iter().all(|(_, m)| m.all_finite())
    }
}

const RMS_EPS: f64 = 1e-6;
const NEG_INF: f64 = -1e30;

fn rms_forward(x: &Mat, g: &Mat) -> (Mat, Vec<f64>) {
    let d = x.cols;
    let mut y = Mat::zeros(x.rows, d);
    let mut rs = Vec::with_capacity(x.rows);
    for r in 0..x.rows {
        let row = x.row(r);
        let rms = (dot(row, row) / d as f64 + RMS_EPS).sqrt();
        let out = y.row_mut(r);
        for (i, (&xi, o)) in row.iter().zip(out.iter_mut()).enumerate() {
            *o = xi / rms * g.data[i];
        }
        rs.push(rms);
    }
    (y, rs)
}

fn rms_backward(x: &Mat, g: &Mat, rs: &[f64], dy: &Mat, dg: &mut Mat) -> Mat {
    let d = x.cols as f64;
    let mut dx = Mat::zeros(x.rows, x.cols);
    for (r, &rms) in rs.iter().enumerate() {
        let (xrow, dyrow) = (x.row(r), dy.row(r));
        // dg_i += dy_i · x_i / rms
        for i in 0..x.cols {
            dg.data[i] += dyrow[i] * xrow[i] / rms;
        }
        // a = dy ∘ g; dx = a/rms − x · (a·x)/(d·rms³)
        let mut ax = 0.0;
        for i in 0..x.cols {
            ax += dyrow[i] * g.data[i] * xrow[i];
        }
        let c = ax / (d * rms * rms * rms);
        let dxrow = dx.row_mut(r);
        for i in 0..x.cols {
            dxrow[i] = dyrow[i] * g.data[i] / rms - xrow[i] * c;
        }
    }
    dx
}

struct AttnTape {
    q: Vec<Mat>,
    k: Vec<Mat>,
    v: Vec<Mat>,
    p: Vec<Mat>,
    ctx: Mat,
}

/// `buckets[i][j]` indexes the bias table column for (query i, key j); None
/// disables bias (cross-attention).
fn attn_forward(
    query_in: &Mat,
    mem_in: &Mat,
    p: &AttnP,
    n_heads: usize,
    bias: Option<(&Mat, &[Vec<usize>])>,
    causal: bool,
) -> (Mat, AttnTape) {
    let d = query_in.cols;
    let dk = d / n_heads;
    let scale = 1.0 / (dk as f64).sqrt();
    let (s, t) = (query_in.rows, mem_in.rows);
    let mut ctx = Mat::zeros(s, d);
    let mut tape = AttnTape {
        q: Vec::with_capacity(n_heads),
        k: Vec::with_capacity(n_heads),
        v: Vec::with_capacity(n_heads),
        p: Vec::with_capacity(n_heads),
        ctx: Mat::zeros(0, 0),
    };
    for h in 0..n_heads {
        let (c0, c1) = (h * dk, (h + 1) * dk);
        let qh = query_in.matmul(&p.wq.cols_slice(c0, c1));
        let kh = mem_in.matmul(&p.wk.cols_slice(c0, c1));
        let vh = mem_in.matmul(&p.wv.cols_slice(c0, c1));
        let mut scores = qh.matmul_nt(&kh);
        scores.scale(scale);
        if let Some((table, buckets)) = bias {
            for (i, brow) in buckets.iter().enumerate() {
                let srow = scores.row_mut(i);
                for (j, sv) in srow.iter_mut().enumerate() {
                    *sv += table.at(h, brow[j]);
                }
            }
        }
        if causal {
            for i in 0..s {
                for j in (i + 1)..t {
                    *scores.at_mut(i, j) = NEG_INF;
                }
            }
        }
        // Row softmax.
        let mut probs = Mat::zeros(s, t);
        for i in 0..s {
            let row = scores.row(i);
            let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let prow = probs.row_mut(i);
            let mut z = 0.0;
            for (pv, &sv) in prow.iter_mut().zip(row) {
                *pv = (sv - m).exp();
                z += *pv;
            }
            for pv in prow.iter_mut() {
                *pv /= z;
            }
        }
        let ctx_h = probs.matmul(&vh);
        ctx.add_into_cols(c0, &ctx_h);
        tape.q.push(qh);
        tape.k.push(kh);
        tape.v.push(vh);
        tape.p.push(probs);
    }
    let out = ctx.matmul(&p.wo);
    tape.ctx = ctx;
    (out, tape)
}

/// Returns (d_query_in, d_mem_in); accumulates parameter and bias grads.
#[allow(clippy::too_many_arguments)]
fn attn_backward(
    d_out: &Mat,
    query_in: &Mat,
    mem_in: &Mat,
    p: &AttnP,
    gp: &mut AttnP,
    tape: &AttnTape,
    n_heads: usize,
    bias_grad: Option<(&mut Mat, &[Vec<usize>])>,
) -> (Mat, Mat) {
    let d = query_in.cols;
    let dk = d / n_heads;
    let scale = 1.0 / (dk as f64).sqrt();
    let (s, t) = (query_in.rows, mem_in.rows);
    gp.wo.add_assign(&tape.ctx.matmul_tn(d_out));
    let d_ctx = d_out.matmul_nt(&p.wo);
    let mut d_query = Mat::zeros(s, d);
    let mut d_mem = Mat::zeros(t, d);
    let mut bias_grad = bias_grad;
    for h in 0..n_heads {
        let (c0, c1) = (h * dk, (h + 1) * dk);
        let d_ctx_h = d_ctx.cols_slice(c0, c1);
        let probs = &tape.p[h];
        let mut d_p = d_ctx_h.matmul_nt(&tape.v[h]);
        let d_v = probs.matmul_tn(&d_ctx_h);
        // Softmax backward, row-wise: dS = P ∘ (dP − Σ dP∘P).
        for i in 0..s {
            let prow = probs.row(i);
            let dprow = d_p.row_mut(i);
            let sum: f64 = dprow.iter().zip(prow).map(|(a, b)| a * b).sum();
            for (dv, &pv) in dprow.iter_mut().zip(prow) {
                *dv = pv * (*dv - sum);
            }
        }
        let d_scores = d_p; // renamed after in-place softmax backward
        if let Some((table, buckets)) = bias_grad.as_mut() {
            for i in 0..s {
                let srow = d_scores.row(i);
                for j in 0..t {
                    *table.at_mut(h, buckets[i][j]) += srow[j];
                }
            }
        }
        let mut d_q = d_scores.matmul(&tape.k[h]);
        d_q.scale(scale);
        let mut d_k = d_scores.matmul_tn(&tape.q[h]);
        d_k.scale(scale);
        gp.wq.add_into_cols(c0, &query_in.matmul_tn(&d_q));
        gp.wk.add_into_cols(c0, &mem_in.matmul_tn(&d_k));
        gp.wv.add_into_cols(c0, &mem_in.matmul_tn(&d_v));
        d_query.add_assign(&d_q.matmul_nt(&p.wq.cols_slice(c0, c1)));
        d_mem.add_assign(&d_k.matmul_nt(&p.wk.cols_slice(c0, c1)));
        d_mem.add_assign(&d_v.matmul_nt(&p.wv.cols_slice(c0, c1)));
    }
    (d_query, d_mem)
}

struct FfnTape {
    h: Mat,
}

fn ffn_forward(xn: &Mat, w1: &Mat, b1: &Mat, w2: &Mat, b2: &Mat) -> (Mat, FfnTape) {
    let mut h = xn.matmul(w1);
    for r in 0..h.rows {
        let row = h.row_mut(r);
        for (v, &b) in row.iter_mut().zip(&b1.data) {
            *v += b;
        }
    }
    let mut a = h.clone();
    for v in &mut a.data {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
    let mut out = a.matmul(w2);
    for r in 0..out.rows {
        let row = out.row_mut(r);
        for (v, &b) in row.iter_mut().zip(&b2.data) {
            *v += b;
        }
    }
    (out, FfnTape { h })
}

#[allow(clippy::too_many_arguments)]
fn ffn_backward(
    d_out: &Mat,
    xn: &Mat,
    tape: &FfnTape,
    w1: &Mat,
    w2: &Mat,
    gw1: &mut Mat,
    gb1: &mut Mat,
    gw2: &mut Mat,
    gb2: &mut Mat,
) -> Mat {
    let mut a = tape.h.clone();
    for v in &mut a.data {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
    gw2.add_assign(&a.matmul_tn(d_out));
    for r in 0..d_out.rows {
        axpy(&mut gb2.data, d_out.row(r), 1.0);
    }
    let mut d_h = d_out.matmul_nt(w2);
    for (dv, &hv) in d_h.data.iter_mut().zip(&tape.h.data) {
        if hv <= 0.0 {
            *dv = 0.0;
        }
    }
    gw1.add_assign(&xn.matmul_tn(&d_h));
    for r in 0..d_h.rows {
        axpy(&mut gb1.data, d_h.row(r), 1.0);
    }
    d_h.matmul_nt(w1)
}

/// Projects every input position to `d_model`: regions through the feature
/// projection plus the shared location projection, OCR sentinels through the
/// word embedding plus the same location projection, text through the word
/// embedding alone.
pub fn embed_inputs(
    params: &MicroModelParams,
    input: &MultimodalInput,
) -> Result<(Mat, Vec<Kind>), ModelError> {
    input.validate(&params.config)?;
    let d = params.config.d_model;
    let mut x = Mat::zeros(input.len(), d);
    let mut kinds = Vec::with_capacity(input.len());
    let mut pos = 0usize;
    for r in &input.regions {
        let row = x.row_mut(pos);
        for (i, &f) in r.features.iter().enumerate() {
            axpy(row, params.region_proj.row(i), f);
        }
        axpy(row, &params.region_bias.data, 1.0);
        for (i, &l) in r.loc.iter().enumerate() {
            axpy(row, params.loc_proj.row(i), l);
        }
        axpy(row, &params.loc_bias.data, 1.0);
        kinds.push(Kind::Region);
        pos += 1;
    }
    for o in &input.ocr {
        let row = x.row_mut(pos);
        axpy(row, params.embed.row(o.id), 1.0);
        for (i, &l) in o.loc.iter().enumerate() {
            axpy(row, params.loc_proj.row(i), l);
        }
        axpy(row, &params.loc_bias.data, 1.0);
        kinds.push(Kind::Ocr);
        pos += 1;
    }
    for &t in &input.text {
        x.row_mut(pos).copy_from_slice(params.embed.row(t));
        kinds.push(Kind::Text);
        pos += 1;
    }
    Ok((x, kinds))
}

fn embed_backward(
    params: &MicroModelParams,
    input: &MultimodalInput,
    d_x: &Mat,
    grads: &mut MicroModelParams,
) {
    let mut pos = 0usize;
    for r in &input.regions {
        let drow = d_x.row(pos);
        for (i, &f) in r.features.iter().enumerate() {
            axpy(grads.region_proj.row_mut(i), drow, f);
        }
        axpy(&mut grads.region_bias.data, drow, 1.0);
        for (i, &l) in r.loc.iter().enumerate() {
            axpy(grads.loc_proj.row_mut(i), drow, l);
        }
        axpy(&mut grads.loc_bias.data, drow, 1.0);
        pos += 1;
    }
    for o in &input.ocr {
        let drow = d_x.row(pos);
        axpy(grads.embed.row_mut(o.id), drow, 1.0);
        for (i, &l) in o.loc.iter().enumerate() {
            axpy(grads.loc_proj.row_mut(i), drow, l);
        }
        axpy(&mut grads.loc_bias.data, drow, 1.0);
        pos += 1;
    }
    for &t in &input.text {
        axpy(grads.embed.row_mut(t), d_x.row(pos), 1.0);
        pos += 1;
    }
    let _ = params;
}

/// Encoder pair buckets: text-text pairs use bidirectional distance buckets;
/// any pair touching a region or OCR position shares the final column.
fn encoder_buckets(kinds: &[Kind], config: &ModelConfig) -> Vec<Vec<usize>> {
    let cross = config.n_buckets;
    kinds
        .iter()
        .enumerate()
        .map(|(i, &ki)| {
            kinds
                .iter()
                .enumerate()
                .map(|(j, &kj)| {
                    if ki == Kind::Text && kj == Kind::Text {
                        relative_bucket(
                            j as i64 - i as i64,
                            true,
                            config.n_buckets,
                            config.max_distance,
                        )
                    } else {
                        cross
                    }
                })
                .collect()
        })
        .collect()
}

fn decoder_buckets(len: usize, config: &ModelConfig) -> Vec<Vec<usize>> {
    (0..len)
        .map(|i| {
            (0..len)
                .map(|j| {
                    relative_bucket(
                        j as i64 - i as i64,
                        false,
                        config.n_buckets,
                        config.max_distance,
                    )
                })
                .collect()
        })
        .collect()
}

struct EncLayerTape {
    x_in: Mat,
    xn1: Mat,
    r1: Vec<f64>,
    attn: AttnTape,
    x_mid: Mat,
    xn2: Mat,
    r2: Vec<f64>,
    ffn: FfnTape,
}

struct EncTape {
    buckets: Vec<Vec<usize>>,
    layers: Vec<EncLayerTape>,
    x_last: Mat,
    r_final: Vec<f64>,
    out: Mat,
}

fn encoder_forward(
    params: &MicroModelParams,
    input: &MultimodalInput,
) -> Result<EncTape, ModelError> {
    let (x0, kinds) = embed_inputs(params, input)?;
    let buckets = encoder_buckets(&kinds, &params.config);
    let mut x = x0;
    let mut layers = Vec::with_capacity(params.enc.len());
    for l in &params.enc {
        let x_in = x.clone();
        let (xn1, r1) = rms_forward(&x, &l.g1);
        let (attn_out, attn) = attn_forward(
            &xn1,
            &xn1,
            &l.attn,
            params.config.n_heads,
            Some((&params.enc_bias, &buckets)),
            false,
        );
        x.add_assign(&attn_out);
        let x_mid = x.clone();
        let (xn2, r2) = rms_forward(&x, &l.g2);
        let (ffn_out, ffn) = ffn_forward(&xn2, &l.w1, &l.b1, &l.w2, &l.b2);
        x.add_assign(&ffn_out);
        layers.push(EncLayerTape { x_in, xn1, r1, attn, x_mid, xn2, r2, ffn });
    }
    let x_last = x.clone();
    let (out, r_final) = rms_forward(&x, &params.g_enc_final);
    Ok(EncTape { buckets, layers, x_last, r_final, out })
}

struct DecLayerTape {
    x_in: Mat,
    xn1: Mat,
    r1: Vec<f64>,
    self_attn: AttnTape,
    x_mid1: Mat,
    xnc: Mat,
    rc: Vec<f64>,
    cross: AttnTape,
    x_mid2: Mat,
    xn2: Mat,
    r2: Vec<f64>,
    ffn: FfnTape,
}

struct DecTape {
    dec_in: Vec<usize>,
    buckets: Vec<Vec<usize>>,
    layers: Vec<DecLayerTape>,
    x_last: Mat,
    r_final: Vec<f64>,
    logits: Mat,
}

fn decoder_forward(
    params: &MicroModelParams,
    dec_in: &[usize],
    enc_out: &Mat,
) -> Result<DecTape, ModelError> {
    let d = params.config.d_model;
    let mut x = Mat::zeros(dec_in.len(), d);
    for (p, &id) in dec_in.iter().enumerate() {
        if id >= params.config.vocab_size {
            return Err(ModelError::Input(format!("decoder id {id} outside vocab")));
        }
        x.row_mut(p).copy_from_slice(params.embed.row(id));
    }
    let buckets = decoder_buckets(dec_in.len(), &params.config);
    let mut layers = Vec::with_capacity(params.dec.len());
    for l in &params.dec {
        let x_in = x.clone();
        let (xn1, r1) = rms_forward(&x, &l.g1);
        let (self_out, self_attn) = attn_forward(
            &xn1,
            &xn1,
            &l.self_attn,
            params.config.n_heads,
            Some((&params.dec_bias, &buckets)),
            true,
        );
        x.add_assign(&self_out);
        let x_mid1 = x.clone();
        let (xnc, rc) = rms_forward(&x, &l.gc);
        let (cross_out, cross) =
            attn_forward(&xnc, enc_out, &l.cross, params.config.n_heads, None, false);
        x.add_assign(&cross_out);
        let x_mid2 = x.clone();
        let (xn2, r2) = rms_forward(&x, &l.g2);
        let (ffn_out, ffn) = ffn_forward(&xn2, &l.w1, &l.b1, &l.w2, &l.b2);
        x.add_assign(&ffn_out);
        layers.push(DecLayerTape {
            x_in,
            xn1,
            r1,
            self_attn,
            x_mid1,
            xnc,
            rc,
            cross,
            x_mid2,
            xn2,
            r2,
            ffn,
        });
    }
    let x_last = x.clone();
    let (xf, r_final) = rms_forward(&x, &params.g_dec_final);
    let logits = xf.matmul(&params.w_out);
    Ok(DecTape { dec_in: dec_in.to_vec(), buckets, layers, x_last, r_final, logits })
}

fn teacher_inputs(target: &[usize]) -> Vec<usize> {
    let mut dec_in = Vec::with_capacity(target.len());
    dec_in.push(BOS);
    dec_in.extend_from_slice(&target[..target.len() - 1]);
    dec_in
}

fn cross_entropy(logits: &Mat, target: &[usize]) -> (f64, Mat) {
    let t = target.len() as f64;
    let mut d_logits = Mat::zeros(logits.rows, logits.cols);
    let mut loss = 0.0;
    for (r, &gold) in target.iter().enumerate() {
        let row = logits.row(r);
        let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let z: f64 = row.iter().map(|&v| (v - m).exp()).sum();
        loss += z.ln() + m - row[gold];
        let drow = d_logits.row_mut(r);
        for (j, dv) in drow.iter_mut().enumerate() {
            *dv = ((row[j] - m).exp() / z) / t;
        }
        drow[gold] -= 1.0 / t;
    }
    (loss / t, d_logits)
}

/// Teacher-forced mean cross-entropy of `target` given `input`.
pub fn loss(
    params: &MicroModelParams,
    input: &MultimodalInput,
    target: &[usize],
) -> Result<f64, ModelError> {
    if target.is_empty() {
        return Err(ModelError::EmptyTarget);
    }
    for &id in target {
        if id >= params.config.vocab_size {
            return Err(ModelError::Input(format!("target id {id} outside vocab")));
        }
    }
    let enc = encoder_forward(params, input)?;
    let dec = decoder_forward(params, &teacher_inputs(target), &enc.out)?;
    let (l, _) = cross_entropy(&dec.logits, target);
    Ok(l)
}

/// Loss plus gradients for every parameter tensor (same shapes as params).
pub fn loss_and_grads(
    params: &MicroModelParams,
    input: &MultimodalInput,
    target: &[usize],
) -> Result<(f64, MicroModelParams), ModelError> {
    if target.is_empty() {
        return Err(ModelError::EmptyTarget);
    }
    for &id in target {
        if id >= params.config.vocab_size {
            return Err(ModelError::Input(format!("target id {id} outside vocab")));
        }
    }
    let enc = encoder_forward(params, input)?;
    let dec = decoder_forward(params, &teacher_inputs(target), &enc.out)?;
    let (loss, d_logits) = cross_entropy(&dec.logits, target);

    let mut grads = MicroModelParams::zeros_like(&params.config);

    // Output head and decoder final norm.
    let (xf, _) = rms_forward(&dec.x_last, &params.g_dec_final);
    grads.w_out.add_assign(&xf.matmul_tn(&d_logits));
    let d_xf = d_logits.matmul_nt(&params.w_out);
    let mut d_x = rms_backward(
        &dec.x_last,
        &params.g_dec_final,
        &dec.r_final,
        &d_xf,
        &mut grads.g_dec_final,
    );

    // Decoder layers in reverse; encoder output gradient accumulates across
    // every cross-attention.
    let mut d_enc_out = Mat::zeros(enc.out.rows, enc.out.cols);
    for (li, tape) in dec.layers.iter().enumerate().rev() {
        let lp = &params.dec[li];
        let gl = &mut grads.dec[li];
        // FFN block.
        let d_ffn_out = d_x.clone();
        let d_xn2 = ffn_backward(
            &d_ffn_out,
            &tape.xn2,
            &tape.ffn,
            &lp.w1,
            &lp.w2,
            &mut gl.w1,
            &mut gl.b1,
            &mut gl.w2,
            &mut gl.b2,
        );
        let d_mid2 = rms_backward(&tape.x_mid2, &lp.g2, &tape.r2, &d_xn2, &mut gl.g2);
        d_x.add_assign(&d_mid2);
        // Cross-attention block.
        let d_cross_out = d_x.clone();
        let (d_xnc, d_mem) = attn_backward(
            &d_cross_out,
            &tape.xnc,
            &enc.out,
            &lp.cross,
            &mut gl.cross,
            &tape.cross,
            params.config.n_heads,
            None,
        );
        d_enc_out.add_assign(&d_mem);
        let d_mid1 = rms_backward(&tape.x_mid1, &lp.gc, &tape.rc, &d_xnc, &mut gl.gc);
        d_x.add_assign(&d_mid1);
        // Self-attention block.
        let d_self_out = d_x.clone();
        let (d_xn1, d_mem_self) = attn_backward(
            &d_self_out,
            &tape.xn1,
            &tape.xn1,
            &lp.self_attn,
            &mut gl.self_attn,
            &tape.self_attn,
            params.config.n_heads,
            Some((&mut grads.dec_bias, &dec.buckets)),
        );
        let mut d_norm_in = d_xn1;
        d_norm_in.add_assign(&d_mem_self);
        let d_in = rms_backward(&tape.x_in, &lp.g1, &tape.r1, &d_norm_in, &mut grads.dec[li].g1);
        d_x.add_assign(&d_in);
    }
    // Decoder input embeddings.
    for (p, &id) in dec.dec_in.iter().enumerate() {
        axpy(grads.embed.row_mut(id), d_x.row(p), 1.0);
    }

    // Encoder final norm, then layers in reverse.
    let mut d_x = rms_backward(
        &enc.x_last,
        &params.g_enc_final,
        &enc.r_final,
        &d_enc_out,
        &mut grads.g_enc_final,
    );
    for (li, tape) in enc.layers.iter().enumerate().rev() {
        let lp = &params.enc[li];
        let gl = &mut grads.enc[li];
        let d_ffn_out = d_x.clone();
        let d_xn2 = ffn_backward(
            &d_ffn_out,
            &tape.xn2,
            &tape.ffn,
            &lp.w1,
            &lp.w2,
            &mut gl.w1,
            &mut gl.b1,
            &mut gl.w2,
            &mut gl.b2,
        );
        let d_mid = rms_backward(&tape.x_mid, &lp.g2, &tape.r2, &d_xn2, &mut gl.g2);
        d_x.add_assign(&d_mid);
        let d_attn_out = d_x.clone();
        let (d_xn1, d_mem) = attn_backward(
            &d_attn_out,
            &tape.xn1,
            &tape.xn1,
            &lp.attn,
            &mut gl.attn,
            &tape.attn,
            params.config.n_heads,
            Some((&mut grads.enc_bias, &enc.buckets)),
        );
        let mut d_norm_in = d_xn1;
        d_norm_in.add_assign(&d_mem);
        let d_in = rms_backward(&tape.x_in, &lp.g1, &tape.r1, &d_norm_in, &mut grads.enc[li].g1);
        d_x.add_assign(&d_in);
    }
    embed_backward(params, input, &d_x, &mut grads);

    Ok((loss, grads))
}

/// Final encoder states for `input`, one row per position.
pub fn encode(params: &MicroModelParams, input: &MultimodalInput) -> Result<Mat, ModelError> {
    Ok(encoder_forward(params, input)?.out)
}

/// Deterministic argmax decoding; score ties resolve to the smallest token
/// id. Returns the generated ids, stopping before `eos` or at `max_len`.
pub fn greedy_decode(
    params: &MicroModelParams,
    input: &MultimodalInput,
    max_len: usize,
    eos: usize,
) -> Result<Vec<usize>, ModelError> {
    let enc = encoder_forward(params, input)?;
    let mut seq = vec![BOS];
    let mut out = Vec::new();
    while out.len() < max_len {
        let dec = decoder_forward(params, &seq, &enc.out)?;
        let row = dec.logits.row(dec.logits.rows - 1);
        let mut best = 0usize;
        for (id, &v) in row.iter().enumerate() {
            if v > row[best] {
                best = id;
            }
        }
        if !row[best].is_finite() {
            return Err(ModelError::NonFinite("decoder logits".into()));
        }
        if best == eos {
            break;
        }
        out.push(best);
        seq.push(best);
    }
    Ok(out)
}
