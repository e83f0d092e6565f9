//! Masked-language-model transformer encoder over transaction sentences.
//!
//! Accounts are encoded as one sequence: a leading [CLS] token followed by
//! the account's sentences in chronological order. The MLM head ties its
//! output projection to the input embedding matrix.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::corpus::{AccountCorpus, Vocabulary, CLS, MASK, RESERVED, SENTENCE_LEN};
use crate::error::{Error, Result};
use crate::tensor::ops::{
    add, add_row_broadcast, concat_cols, cross_entropy_logits, gather_rows, layer_norm, matmul,
    mul, relu, slice_cols, transpose,
};
use crate::tensor::{Adam, Parameter, Tensor};

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct EncoderConfig {
    pub layers: usize,
    pub heads: usize,
    pub d_model: usize,
    pub d_ff: usize,
    pub max_len: usize,
    pub dropout: f64,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        EncoderConfig {
            layers: 4,
            heads: 4,
            d_model: 128,
            d_ff: 512,
            // 100 sentences x 6 words + 2 specials
            max_len: 602,
            dropout: 0.1,
        }
    }
}

impl EncoderConfig {
    pub fn validate(&self) -> Result<()> {
        if self.d_model == 0 || self.heads == 0 || self.d_model % self.heads != 0 {
            return Err(Error::BadConfig(format!(
                "d_model {} must be divisible by heads {}",
                self.d_model, self.heads
            )));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::BadConfig(format!("dropout {} outside [0, 1)", self.dropout)));
        }
        Ok(())
    }
}

/// Mix a base seed with stream coordinates into an independent RNG.
pub fn stream_rng(seed: u64, a: u64, b: u64) -> ChaCha8Rng {
    let mut z = seed
        .wrapping_add(a.wrapping_mul(0x9e3779b97f4a7c15))
        .wrapping_add(b.wrapping_mul(0xbf58476d1ce4e5b9));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    ChaCha8Rng::seed_from_u64(z ^ (z >> 31))
}

struct EncoderLayer {
    wq: Parameter,
    wk: Parameter,
    wv: Parameter,
    wo: Parameter,
    ln1_g: Parameter,
    ln1_b: Parameter,
    ff1: Parameter,
    ff1_b: Parameter,
    ff2: Parameter,
    ff2_b: Parameter,
    ln2_g: Parameter,
    ln2_b: Parameter,
}

pub struct TlmModel {
    pub cfg: EncoderConfig,
    pub vocab_size: usize,
    tok_emb: Parameter,
    pos_emb: Parameter,
    layers: Vec<EncoderLayer>,
    mlm_bias: Parameter,
}

fn normal_init(rng: &mut ChaCha8Rng, n: usize, std: f64) -> Vec<f64> {
    let dist = Normal::new(0.0, std).unwrap();
    (0..n).map(|_| dist.sample(rng)).collect()
}

impl TlmModel {
    pub fn new(vocab_size: usize, cfg: EncoderConfig, seed: u64) -> Result<TlmModel> {
        cfg.validate()?;
        let mut rng = stream_rng(seed, 0x71a0, 0);
        let d = cfg.d_model;
        let tok_emb = Parameter::new(
            "tlm.tok_emb",
            &[vocab_size, d],
            normal_init(&mut rng, vocab_size * d, 0.02),
        );
        let pos_emb = Parameter::new(
            "tlm.pos_emb",
            &[cfg.max_len, d],
            normal_init(&mut rng, cfg.max_len * d, 0.02),
        );
        let mut layers = Vec::with_capacity(cfg.layers);
        for l in 0..cfg.layers {
            let p = |name: &str, shape: &[usize], data: Vec<f64>| {
                Parameter::new(format!("tlm.layer{l}.{name}"), shape, data)
            };
            layers.push(EncoderLayer {
                wq: p("wq", &[d, d], normal_init(&mut rng, d * d, 0.02)),
                wk: p("wk", &[d, d], normal_init(&mut rng, d * d, 0.02)),
                wv: p("wv", &[d, d], normal_init(&mut rng, d * d, 0.02)),
                wo: p("wo", &[d, d], normal_init(&mut rng, d * d, 0.02)),
                ln1_g: p("ln1_g", &[d], vec![1.0; d]),
                ln1_b: p("ln1_b", &[d], vec![0.0; d]),
                ff1: p("ff1", &[d, cfg.d_ff], normal_init(&mut rng, d * cfg.d_ff, 0.02)),
                ff1_b: p("ff1_b", &[cfg.d_ff], vec![0.0; cfg.d_ff]),
                ff2: p("ff2", &[cfg.d_ff, d], normal_init(&mut rng, cfg.d_ff * d, 0.02)),
                ff2_b: p("ff2_b", &[d], vec![0.0; d]),
                ln2_g: p("ln2_g", &[d], vec![1.0; d]),
                ln2_b: p("ln2_b", &[d], vec![0.0; d]),
            });
        }
        let mlm_bias = Parameter::new("tlm.mlm_bias", &[vocab_size], vec![0.0; vocab_size]);
        Ok(TlmModel {
            cfg,
            vocab_size,
            tok_emb,
            pos_emb,
            layers,
            mlm_bias,
        })
    }

    pub fn parameters(&self) -> Vec<Parameter> {
        let mut out = vec![self.tok_emb.clone(), self.pos_emb.clone()];
        for l in &self.layers {
            out.extend([
                l.wq.clone(),
                l.wk.clone(),
                l.wv.clone(),
                l.wo.clone(),
                l.ln1_g.clone(),
                l.ln1_b.clone(),
                l.ff1.clone(),
                l.ff1_b.clone(),
                l.ff2.clone(),
                l.ff2_b.clone(),
                l.ln2_g.clone(),
                l.ln2_b.clone(),
            ]);
        }
        out.push(self.mlm_bias.clone());
        out
    }

    pub fn load_parameters(&self, ckpt: &crate::checkpoint::Checkpoint) -> Result<()> {
        for p in self.parameters() {
            let (shape, vals) = ckpt.get(&p.name)?;
            if shape != p.tensor.shape() {
                return Err(Error::InvalidCheckpoint(format!(
                    "parameter `{}` has shape {:?}, expected {:?}",
                    p.name,
                    shape,
                    p.tensor.shape()
                )));
            }
            p.tensor.set_data(vals);
        }
        Ok(())
    }

    fn dropout(&self, x: &Tensor, train: bool, rng: &mut Option<&mut ChaCha8Rng>) -> Result<Tensor> {
        let rate = self.cfg.dropout;
        if !train || rate == 0.0 {
            return Ok(x.clone());
        }
        let rng = rng.as_mut().expect("training mode needs an RNG");
        let keep = 1.0 - rate;
        let mask: Vec<f64> = (0..x.len())
            .map(|_| if rng.random::<f64>() < keep { 1.0 / keep } else { 0.0 })
            .collect();
        mul(x, &Tensor::from_vec(x.shape(), mask))
    }

    /// Per-token contextual embeddings for one token-id sequence.
    pub fn encode(
        &self,
        ids: &[u32],
        train: bool,
        mut rng: Option<&mut ChaCha8Rng>,
    ) -> Result<Tensor> {
        for &id in ids {
            if id as usize >= self.vocab_size {
                return Err(Error::TokenOutOfRange {
                    id,
                    vocab: self.vocab_size,
                });
            }
        }
        let len = ids.len().min(self.cfg.max_len);
        let idx: Vec<usize> = ids[..len].iter().map(|&i| i as usize).collect();
        let pos: Vec<usize> = (0..len).collect();
        let tok = gather_rows(&self.tok_emb.tensor, &idx)?;
        let pe = gather_rows(&self.pos_emb.tensor, &pos)?;
        let mut h = add(&tok, &pe)?;
        h = self.dropout(&h, train, &mut rng)?;

        let d = self.cfg.d_model;
        let dh = d / self.cfg.heads;
        for layer in &self.layers {
            let q = matmul(&h, &layer.wq.tensor)?;
            let k = matmul(&h, &layer.wk.tensor)?;
            let v = matmul(&h, &layer.wv.tensor)?;
            let mut heads = Vec::with_capacity(self.cfg.heads);
            for hd in 0..self.cfg.heads {
                let qh = slice_cols(&q, hd * dh, dh)?;
                let kh = slice_cols(&k, hd * dh, dh)?;
                let vh = slice_cols(&v, hd * dh, dh)?;
                heads.push(crate::tensor::ops::attention(&qh, &kh, &vh)?);
            }
            let mut attn = heads[0].clone();
            for head in &heads[1..] {
                attn = concat_cols(&attn, head)?;
            }
            let attn = self.dropout(&matmul(&attn, &layer.wo.tensor)?, train, &mut rng)?;
            h = layer_norm(&add(&h, &attn)?, &layer.ln1_g.tensor, &layer.ln1_b.tensor, 1e-12)?;
            let ff = add_row_broadcast(&matmul(&h, &layer.ff1.tensor)?, &layer.ff1_b.tensor)?;
            let ff = add_row_broadcast(&matmul(&relu(&ff), &layer.ff2.tensor)?, &layer.ff2_b.tensor)?;
            let ff = self.dropout(&ff, train, &mut rng)?;
            h = layer_norm(&add(&h, &ff)?, &layer.ln2_g.tensor, &layer.ln2_b.tensor, 1e-12)?;
        }
        Ok(h)
    }

    /// Vocabulary logits at the given sequence positions, with the output
    /// projection tied to the input embedding.
    pub fn mlm_logits(&self, hidden: &Tensor, positions: &[usize]) -> Result<Tensor> {
        let states = gather_rows(hidden, positions)?;
        let logits = matmul(&states, &transpose(&self.tok_emb.tensor))?;
        add_row_broadcast(&logits, &self.mlm_bias.tensor)
    }

    /// Final-layer token embeddings plus the sequence-start pooled vector.
    pub fn semantic_embeddings(&self, seq: &[u32]) -> Result<(Tensor, Vec<f64>)> {
        let h = self.encode(seq, false, None)?;
        let d = self.cfg.d_model;
        let pooled = h.with_data(|v| v[..d].to_vec());
        Ok((h, pooled))
    }
}

/// [CLS] plus the account's sentences, oldest truncated to fit `max_len`.
pub fn flatten_account(corpus: &AccountCorpus, max_len: usize) -> Vec<u32> {
    let capacity = (max_len.saturating_sub(1)) / SENTENCE_LEN;
    let skip = corpus.sentences.len().saturating_sub(capacity);
    let mut seq = Vec::with_capacity(1 + (corpus.sentences.len() - skip) * SENTENCE_LEN);
    seq.push(CLS);
    for s in &corpus.sentences[skip..] {
        seq.extend_from_slice(&s.words);
    }
    seq
}

#[derive(Debug, Clone, PartialEq)]
pub struct MaskedBatch {
    pub input: Vec<u32>,
    /// Masked position indices (ascending).
    pub positions: Vec<usize>,
    /// Original token ids at the masked positions.
    pub originals: Vec<u32>,
    /// True where the position holds a real (non-padding) token.
    pub attention_mask: Vec<bool>,
}

/// BERT-style masking: each non-special position is selected independently
/// with probability `rate`; selected positions become [MASK] 80% of the
/// time, a random vocabulary token 10%, and stay unchanged 10%.
pub fn apply_mlm_mask(
    seq: &[u32],
    rate: f64,
    vocab: &Vocabulary,
    rng: &mut ChaCha8Rng,
) -> MaskedBatch {
    assert!(rate > 0.0 && rate < 1.0);
    let n_reserved = RESERVED.len() as u32;
    let n_regular = vocab.len() as u32 - n_reserved;
    let mut input = seq.to_vec();
    let mut positions = Vec::new();
    let mut originals = Vec::new();
    for (i, &tok) in seq.iter().enumerate() {
        if vocab.is_reserved(tok) {
            continue;
        }
        if rng.random::<f64>() >= rate {
            continue;
        }
        positions.push(i);
        originals.push(tok);
        let roll = rng.random::<f64>();
        if roll < 0.8 {
            input[i] = MASK;
        } else if roll < 0.9 && n_regular > 0 {
            input[i] = n_reserved + rng.random_range(0..n_regular);
        }
    }
    MaskedBatch {
        attention_mask: vec![true; input.len()],
        input,
        positions,
        originals,
    }
}

/// Mean negative log-likelihood of the original tokens at masked positions.
pub fn mlm_loss(
    model: &TlmModel,
    batch: &MaskedBatch,
    train: bool,
    rng: Option<&mut ChaCha8Rng>,
) -> Result<Tensor> {
    if batch.positions.is_empty() {
        return Err(Error::NoMaskedPositions);
    }
    let hidden = model.encode(&batch.input, train, rng)?;
    let logits = model.mlm_logits(&hidden, &batch.positions)?;
    let targets: Vec<usize> = batch.originals.iter().map(|&t| t as usize).collect();
    cross_entropy_logits(&logits, &targets)
}

/// Fraction of masked positions whose top-1 prediction recovers the original
/// token.
pub fn masked_accuracy(model: &TlmModel, batch: &MaskedBatch) -> Result<f64> {
    if batch.positions.is_empty() {
        return Err(Error::NoMaskedPositions);
    }
    let hidden = model.encode(&batch.input, false, None)?;
    let logits = model.mlm_logits(&hidden, &batch.positions)?;
    let v = model.vocab_size;
    let correct = logits.with_data(|lv| {
        batch
            .originals
            .iter()
            .enumerate()
            .filter(|&(r, &orig)| {
                let row = &lv[r * v..(r + 1) * v];
                let argmax = row
                    .iter()
                    .enumerate()
                    .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                    .unwrap()
                    .0;
                argmax == orig as usize
            })
            .count()
    });
    Ok(correct as f64 / batch.positions.len() as f64)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub split: String,
    pub loss: f64,
    pub elapsed_ms: u64,
}

pub struct PretrainConfig {
    pub epochs: usize,
    pub lr: f64,
    pub batch_size: usize,
    pub mask_rate: f64,
    pub seed: u64,
}

impl Default for PretrainConfig {
    fn default() -> Self {
        PretrainConfig {
            epochs: 20,
            lr: 1e-5,
            batch_size: 16,
            mask_rate: 0.15,
            seed: 42,
        }
    }
}

/// MLM pretraining over all account sequences. Deterministic given the seed.
pub fn pretrain(
    corpora: &[AccountCorpus],
    vocab: &Vocabulary,
    enc_cfg: EncoderConfig,
    cfg: &PretrainConfig,
) -> Result<(TlmModel, Vec<EpochLog>)> {
    let model = TlmModel::new(vocab.len(), enc_cfg, cfg.seed)?;
    let params = model.parameters();
    let mut opt = Adam::new(cfg.lr);
    let mut logs = Vec::with_capacity(cfg.epochs);

    let sequences: Vec<Vec<u32>> = corpora
        .iter()
        .map(|c| flatten_account(c, model.cfg.max_len))
        .filter(|s| s.len() > 1)
        .collect();

    for epoch in 0..cfg.epochs {
        let start = std::time::Instant::now();
        let mut order: Vec<usize> = (0..sequences.len()).collect();
        let mut shuffle_rng = stream_rng(cfg.seed, 1, epoch as u64);
        // Fisher-Yates
        for i in (1..order.len()).rev() {
            let j = shuffle_rng.random_range(0..=i);
            order.swap(i, j);
        }

        let mut epoch_loss = 0.0;
        let mut n_batches = 0usize;
        for chunk in order.chunks(cfg.batch_size) {
            let mut batch_loss = 0.0;
            let mut contributing = 0usize;
            for &si in chunk {
                let mut mask_rng = stream_rng(cfg.seed, 2 + epoch as u64, si as u64);
                let batch = apply_mlm_mask(&sequences[si], cfg.mask_rate, vocab, &mut mask_rng);
                if batch.positions.is_empty() {
                    continue;
                }
                let mut drop_rng = stream_rng(cfg.seed, 1000 + epoch as u64, si as u64);
                let loss = mlm_loss(&model, &batch, true, Some(&mut drop_rng))?;
                let value = loss.item();
                if !value.is_finite() {
                    return Err(Error::NonFinite(
                        "pretraining loss; try a lower learning rate".into(),
                    ));
                }
                batch_loss += value;
                crate::tensor::ops::scale(&loss, 1.0 / chunk.len() as f64).backward()?;
                contributing += 1;
            }
            if contributing == 0 {
                continue;
            }
            opt.step(&params)?;
            epoch_loss += batch_loss / contributing as f64;
            n_batches += 1;
        }
        logs.push(EpochLog {
            epoch,
            split: "train".into(),
            loss: if n_batches > 0 { epoch_loss / n_batches as f64 } else { f64::NAN },
            elapsed_ms: start.elapsed().as_millis() as u64,
        });
    }
    Ok((model, logs))
}
