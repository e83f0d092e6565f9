//! Embedding fusion, the multi-head attention classifier, and joint training
//! with the account-graph GCN.
//!
//! Per account, semantic token embeddings from the language model are
//! concatenated with similarity embeddings gathered from the vocabulary-graph
//! GCN, projected, and attended; the pooled sequence-start vector is both the
//! classifier input and the account feature fed to the account-graph GCN. The
//! two branch predictions are interpolated with a lambda weight.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::aig::{AccountGcn, AccountGraph};
use crate::corpus::{AccountCorpus, Label, Vocabulary};
use crate::error::{Error, Result};
use crate::metrics::Confusion;
use crate::tasg::{NormAdj, SimilarityGcn, VocabGraph};
use crate::tensor::ops::{
    add, add_row_broadcast, binary_cross_entropy, concat_cols, gather_rows, gather_rows_or_zero,
    layer_norm, matmul, scale, scatter_rows, slice_cols, softmax, stack_rows,
};
use crate::tensor::{Adam, Parameter, Tensor};
use crate::tlm::{flatten_account, stream_rng, EpochLog, TlmModel};

/// Which branch the lambda weight multiplies in the interpolated prediction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum LambdaConvention {
    /// lambda weights the account-graph GCN branch.
    #[default]
    Eq15,
    /// lambda weights the attention-classifier branch.
    Prose,
}

/// `Pred = lambda * gcn + (1 - lambda) * man` under the default convention;
/// the prose convention swaps the two branches.
pub fn joint_predict(
    z_gcn: &Tensor,
    z_man: &Tensor,
    lambda: f64,
    convention: LambdaConvention,
) -> Result<Tensor> {
    if !(0.0..=1.0).contains(&lambda) || !lambda.is_finite() {
        return Err(Error::InvalidLambda(lambda));
    }
    let (a, b) = match convention {
        LambdaConvention::Eq15 => (z_gcn, z_man),
        LambdaConvention::Prose => (z_man, z_gcn),
    };
    add(&scale(a, lambda), &scale(b, 1.0 - lambda))
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct FusionConfig {
    /// Width of the fused account representation.
    pub man_dim: usize,
    pub man_blocks: usize,
    pub man_heads: usize,
    /// Hidden width of the vocabulary-graph GCN.
    pub sim_hidden: usize,
    /// Output width of the vocabulary-graph GCN.
    pub sim_dim: usize,
    /// Hidden width of the account-graph GCN.
    pub acc_hidden: usize,
}

impl Default for FusionConfig {
    fn default() -> Self {
        FusionConfig {
            man_dim: 64,
            man_blocks: 4,
            man_heads: 4,
            sim_hidden: 64,
            sim_dim: 64,
            acc_hidden: 64,
        }
    }
}

impl FusionConfig {
    pub fn validate(&self) -> Result<()> {
        if self.man_dim == 0 || self.man_heads == 0 || self.man_dim % self.man_heads != 0 {
            return Err(Error::BadConfig(format!(
                "man_dim {} must be divisible by man_heads {}",
                self.man_dim, self.man_heads
            )));
        }
        Ok(())
    }
}

struct ManBlock {
    wq: Parameter,
    wk: Parameter,
    wv: Parameter,
    wo: Parameter,
    ln_g: Parameter,
    ln_b: Parameter,
}

/// Multi-head attention classifier. The head weights start at zero so an
/// untrained classifier emits the uniform distribution for any input.
pub struct Man {
    blocks: Vec<ManBlock>,
    head_w: Parameter,
    head_b: Parameter,
    heads: usize,
}

impl Man {
    pub fn new(dim: usize, n_blocks: usize, heads: usize, rng: &mut ChaCha8Rng) -> Man {
        let dist = Normal::new(0.0, 0.02).unwrap();
        let mut init = |n: usize| -> Vec<f64> { (0..n).map(|_| dist.sample(rng)).collect() };
        let blocks = (0..n_blocks)
            .map(|b| {
                let p = |name: &str, data: Vec<f64>| {
                    Parameter::new(format!("man.block{b}.{name}"), &[dim, dim], data)
                };
                ManBlock {
                    wq: p("wq", init(dim * dim)),
                    wk: p("wk", init(dim * dim)),
                    wv: p("wv", init(dim * dim)),
                    wo: p("wo", init(dim * dim)),
                    ln_g: Parameter::new(format!("man.block{b}.ln_g"), &[dim], vec![1.0; dim]),
                    ln_b: Parameter::new(format!("man.block{b}.ln_b"), &[dim], vec![0.0; dim]),
                }
            })
            .collect();
        Man {
            blocks,
            head_w: Parameter::new("man.head_w", &[dim, 2], vec![0.0; dim * 2]),
            head_b: Parameter::new("man.head_b", &[2], vec![0.0; 2]),
            heads,
        }
    }

    fn forward_tokens(&self, x: &Tensor) -> Result<Tensor> {
        let d = x.cols();
        let dh = d / self.heads;
        let mut h = x.clone();
        for block in &self.blocks {
            let q = matmul(&h, &block.wq.tensor)?;
            let k = matmul(&h, &block.wk.tensor)?;
            let v = matmul(&h, &block.wv.tensor)?;
            let mut parts = Vec::with_capacity(self.heads);
            for hd in 0..self.heads {
                parts.push(crate::tensor::ops::attention(
                    &slice_cols(&q, hd * dh, dh)?,
                    &slice_cols(&k, hd * dh, dh)?,
                    &slice_cols(&v, hd * dh, dh)?,
                )?);
            }
            let mut attn = parts[0].clone();
            for p in &parts[1..] {
                attn = concat_cols(&attn, p)?;
            }
            let attn = matmul(&attn, &block.wo.tensor)?;
            h = layer_norm(&add(&h, &attn)?, &block.ln_g.tensor, &block.ln_b.tensor, 1e-12)?;
        }
        Ok(h)
    }

    /// (pooled sequence-start row, class logits) for one fused sequence.
    pub fn forward(&self, x: &Tensor) -> Result<(Tensor, Tensor)> {
        let h = self.forward_tokens(x)?;
        let pooled = gather_rows(&h, &[0])?;
        let logits = add_row_broadcast(&matmul(&pooled, &self.head_w.tensor)?, &self.head_b.tensor)?;
        Ok((pooled, logits))
    }

    pub fn parameters(&self) -> Vec<Parameter> {
        let mut out = Vec::new();
        for b in &self.blocks {
            out.extend([
                b.wq.clone(),
                b.wk.clone(),
                b.wv.clone(),
                b.wo.clone(),
                b.ln_g.clone(),
                b.ln_b.clone(),
            ]);
        }
        out.extend([self.head_w.clone(), self.head_b.clone()]);
        out
    }
}

/// Memory bank of pooled account embeddings. Rows for accounts in the
/// current batch are substituted with live tensors; all other rows are the
/// stored values from the most recent pass that touched them.
pub struct EmbeddingRegistry {
    data: Vec<f64>,
    n: usize,
    d: usize,
}

impl EmbeddingRegistry {
    pub fn new(n: usize, d: usize) -> EmbeddingRegistry {
        EmbeddingRegistry {
            data: vec![0.0; n * d],
            n,
            d,
        }
    }

    pub fn update(&mut self, idx: &[usize], rows: &Tensor) {
        assert_eq!(rows.rows(), idx.len());
        assert_eq!(rows.cols(), self.d);
        rows.with_data(|rv| {
            for (r, &i) in idx.iter().enumerate() {
                self.data[i * self.d..(i + 1) * self.d]
                    .copy_from_slice(&rv[r * self.d..(r + 1) * self.d]);
            }
        });
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.d..(i + 1) * self.d]
    }

    /// Full feature matrix with the given rows replaced by live tensors.
    /// Gradients reach only the live rows.
    pub fn features(&self, idx: &[usize], live: &Tensor) -> Result<Tensor> {
        let base = Tensor::from_vec(&[self.n, self.d], self.data.clone());
        scatter_rows(&base, idx, live)
    }

    pub fn snapshot(&self) -> Tensor {
        Tensor::from_vec(&[self.n, self.d], self.data.clone())
    }
}

/// Labeled accounts plus the two graphs the joint model trains over.
pub struct JointDataset {
    pub corpora: Vec<AccountCorpus>,
    pub vocab: Vocabulary,
    /// None disables the similarity branch (vocabulary-graph mode "off").
    pub vocab_graph: Option<VocabGraph>,
    pub account_graph: AccountGraph,
    pub weighted_aig: bool,
    /// Account-graph node index per corpus entry.
    pub node_idx: Vec<usize>,
    /// 1 = phisher, 0 = normal.
    pub labels: Vec<usize>,
}

impl JointDataset {
    pub fn new(
        corpora: Vec<AccountCorpus>,
        vocab: Vocabulary,
        vocab_graph: Option<VocabGraph>,
        account_graph: AccountGraph,
        weighted_aig: bool,
    ) -> Result<JointDataset> {
        let mut node_idx = Vec::with_capacity(corpora.len());
        let mut labels = Vec::with_capacity(corpora.len());
        for c in &corpora {
            let idx = account_graph.node_index(&c.account).ok_or_else(|| {
                Error::BadConfig(format!(
                    "labeled account `{}` is absent from the account graph",
                    c.account
                ))
            })?;
            node_idx.push(idx);
            labels.push(match c.label {
                Label::Phisher => 1,
                Label::Normal => 0,
                Label::Unlabeled => {
                    return Err(Error::BadConfig(format!(
                        "account `{}` has no label",
                        c.account
                    )))
                }
            });
        }
        Ok(JointDataset {
            corpora,
            vocab,
            vocab_graph,
            account_graph,
            weighted_aig,
            node_idx,
            labels,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Splits {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

/// Deterministic stratified 70/15/15 split over corpus indices.
pub fn stratified_split(labels: &[usize], seed: u64) -> Splits {
    let mut splits = Splits {
        train: Vec::new(),
        val: Vec::new(),
        test: Vec::new(),
    };
    for class in [0usize, 1] {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        let mut rng = stream_rng(seed, 0x5911, class as u64);
        for i in (1..idx.len()).rev() {
            let j = rng.random_range(0..=i);
            idx.swap(i, j);
        }
        let n = idx.len();
        let n_train = (n as f64 * 0.70).round() as usize;
        let n_val = (n as f64 * 0.15).round() as usize;
        splits.train.extend(&idx[..n_train.min(n)]);
        splits.val.extend(&idx[n_train.min(n)..(n_train + n_val).min(n)]);
        splits.test.extend(&idx[(n_train + n_val).min(n)..]);
    }
    splits.train.sort_unstable();
    splits.val.sort_unstable();
    splits.test.sort_unstable();
    splits
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct JointTrainConfig {
    pub epochs: usize,
    pub lr: f64,
    /// Accounts sampled per class per step (with replacement).
    pub batch_per_class: usize,
    pub lambda: f64,
    pub lambda_convention: LambdaConvention,
    pub two_term_ce: bool,
    pub freeze_tlm: bool,
    pub seed: u64,
}

impl Default for JointTrainConfig {
    fn default() -> Self {
        JointTrainConfig {
            epochs: 50,
            lr: 1e-5,
            batch_per_class: 32,
            lambda: 0.7,
            lambda_convention: LambdaConvention::Eq15,
            two_term_ce: true,
            freeze_tlm: false,
            seed: 42,
        }
    }
}

pub struct JointModel {
    pub tlm: TlmModel,
    pub sim_gcn: Option<SimilarityGcn>,
    pub fuse_w: Parameter,
    pub man: Man,
    pub acc_gcn: AccountGcn,
    pub cfg: FusionConfig,
}

impl JointModel {
    pub fn new(
        tlm: TlmModel,
        cfg: FusionConfig,
        vocab_nodes: Option<usize>,
        seed: u64,
    ) -> Result<JointModel> {
        cfg.validate()?;
        let mut rng = stream_rng(seed, 0xf05e, 0);
        let dist = Normal::new(0.0, 0.02).unwrap();
        let sim_gcn = vocab_nodes.map(|n| {
            SimilarityGcn::new(n, cfg.sim_hidden, cfg.sim_dim, || dist.sample(&mut rng))
        });
        let fuse_in = tlm.cfg.d_model + if sim_gcn.is_some() { cfg.sim_dim } else { 0 };
        let fuse_w = Parameter::new(
            "fusion.w",
            &[fuse_in, cfg.man_dim],
            (0..fuse_in * cfg.man_dim).map(|_| dist.sample(&mut rng)).collect(),
        );
        let man = Man::new(cfg.man_dim, cfg.man_blocks, cfg.man_heads, &mut rng);
        let acc_gcn = AccountGcn::new(cfg.man_dim, cfg.acc_hidden, 2, || dist.sample(&mut rng));
        Ok(JointModel {
            tlm,
            sim_gcn,
            fuse_w,
            man,
            acc_gcn,
            cfg,
        })
    }

    /// All parameters; the language-model block is excluded when frozen.
    pub fn parameters(&self, freeze_tlm: bool) -> Vec<Parameter> {
        let mut out = Vec::new();
        if !freeze_tlm {
            // the MLM head bias is not part of the joint objective
            out.extend(
                self.tlm
                    .parameters()
                    .into_iter()
                    .filter(|p| p.name != "tlm.mlm_bias"),
            );
        }
        if let Some(g) = &self.sim_gcn {
            out.extend(g.parameters());
        }
        out.push(self.fuse_w.clone());
        out.extend(self.man.parameters());
        out.extend(self.acc_gcn.parameters());
        out
    }

    pub fn all_parameters(&self) -> Vec<Parameter> {
        self.parameters(false)
    }

    pub fn load_parameters(&self, ckpt: &crate::checkpoint::Checkpoint) -> Result<()> {
        for p in self.all_parameters() {
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

    /// Similarity rows for every word node, or None when the branch is off.
    pub fn similarity_table(&self, vocab_adj: Option<&NormAdj>) -> Result<Option<Tensor>> {
        match (&self.sim_gcn, vocab_adj) {
            (Some(g), Some(adj)) => Ok(Some(g.forward(adj)?)),
            (None, _) => Ok(None),
            (Some(_), None) => Err(Error::BadConfig(
                "similarity branch is enabled but no vocabulary graph was given".into(),
            )),
        }
    }

    /// (pooled account embedding 1 x man_dim, classifier logits 1 x 2).
    ///
    /// Reserved tokens and words with no incident vocabulary-graph edge get
    /// an all-zero similarity row.
    pub fn account_forward(
        &self,
        seq: &[u32],
        sim_table: Option<&Tensor>,
        connected: Option<&[bool]>,
        train: bool,
        rng: Option<&mut ChaCha8Rng>,
    ) -> Result<(Tensor, Tensor)> {
        let es = self.tlm.encode(seq, train, rng)?;
        let fused_in = match sim_table {
            Some(table) => {
                let connected = connected.expect("similarity table requires connectivity mask");
                let idx: Vec<Option<usize>> = seq
                    .iter()
                    .map(|&t| {
                        let t = t as usize;
                        if t < crate::corpus::RESERVED.len() || !connected[t] {
                            None
                        } else {
                            Some(t)
                        }
                    })
                    .collect();
                let eg = gather_rows_or_zero(table, &idx)?;
                concat_cols(&es, &eg)?
            }
            None => es,
        };
        let fused = matmul(&fused_in, &self.fuse_w.tensor)?;
        self.man.forward(&fused)
    }
}

fn connectivity_mask(graph: &VocabGraph) -> Vec<bool> {
    let mut mask = vec![false; graph.n_words];
    for e in &graph.edges {
        if (e.u as usize) < graph.n_words {
            mask[e.u as usize] = true;
        }
        if (e.v as usize) < graph.n_words {
            mask[e.v as usize] = true;
        }
    }
    mask
}

struct JointContext {
    sequences: Vec<Vec<u32>>,
    vocab_adj: Option<NormAdj>,
    connected: Option<Vec<bool>>,
    acc_adj: NormAdj,
}

impl JointContext {
    fn new(model: &JointModel, data: &JointDataset) -> JointContext {
        JointContext {
            sequences: data
                .corpora
                .iter()
                .map(|c| flatten_account(c, model.tlm.cfg.max_len))
                .collect(),
            vocab_adj: data.vocab_graph.as_ref().map(|g| g.normalized_adjacency()),
            connected: data.vocab_graph.as_ref().map(connectivity_mask),
            acc_adj: data.account_graph.normalized_adjacency(data.weighted_aig),
        }
    }
}

/// Fill the registry with eval-mode pooled embeddings for every account.
fn refresh_registry(
    model: &JointModel,
    ctx: &JointContext,
    data: &JointDataset,
    registry: &mut EmbeddingRegistry,
) -> Result<()> {
    let table = model.similarity_table(ctx.vocab_adj.as_ref())?;
    for (i, seq) in ctx.sequences.iter().enumerate() {
        let (pooled, _) = model.account_forward(
            seq,
            table.as_ref(),
            ctx.connected.as_deref(),
            false,
            None,
        )?;
        registry.update(&[data.node_idx[i]], &pooled);
    }
    Ok(())
}

/// Interpolated class probabilities for the given corpus indices, using the
/// registry for all other accounts' graph features.
fn predict_rows(
    model: &JointModel,
    ctx: &JointContext,
    data: &JointDataset,
    registry: &EmbeddingRegistry,
    indices: &[usize],
    lambda: f64,
    convention: LambdaConvention,
    train: bool,
    rng_seed: Option<(u64, u64)>,
) -> Result<Tensor> {
    let table = model.similarity_table(ctx.vocab_adj.as_ref())?;
    let mut pooled_rows = Vec::with_capacity(indices.len());
    let mut logit_rows = Vec::with_capacity(indices.len());
    for (k, &i) in indices.iter().enumerate() {
        let mut rng = rng_seed.map(|(seed, salt)| stream_rng(seed, salt, k as u64));
        let (pooled, logits) = model.account_forward(
            &ctx.sequences[i],
            table.as_ref(),
            ctx.connected.as_deref(),
            train,
            rng.as_mut(),
        )?;
        pooled_rows.push(pooled);
        logit_rows.push(logits);
    }
    let live = stack_rows(&pooled_rows)?;
    let z_man = softmax(&stack_rows(&logit_rows)?, 1)?;

    let node_idx: Vec<usize> = indices.iter().map(|&i| data.node_idx[i]).collect();
    let features = registry.features(&node_idx, &live)?;
    let gcn_logits = model.acc_gcn.forward(&ctx.acc_adj, &features)?;
    let z_gcn = softmax(&gather_rows(&gcn_logits, &node_idx)?, 1)?;

    joint_predict(&z_gcn, &z_man, lambda, convention)
}

/// End-to-end joint training. Returns the trained model, the final registry,
/// and per-epoch train/validation loss logs.
pub fn joint_train(
    tlm: TlmModel,
    data: &JointDataset,
    fcfg: FusionConfig,
    tcfg: &JointTrainConfig,
    splits: &Splits,
) -> Result<(JointModel, EmbeddingRegistry, Vec<EpochLog>)> {
    if !(0.0..=1.0).contains(&tcfg.lambda) {
        return Err(Error::InvalidLambda(tcfg.lambda));
    }
    let vocab_nodes = data.vocab_graph.as_ref().map(|g| g.node_count());
    let model = JointModel::new(tlm, fcfg, vocab_nodes, tcfg.seed)?;
    let ctx = JointContext::new(&model, data);
    let mut registry =
        EmbeddingRegistry::new(data.account_graph.node_count(), model.cfg.man_dim);
    refresh_registry(&model, &ctx, data, &mut registry)?;

    let params = model.parameters(tcfg.freeze_tlm);
    let mut opt = Adam::new(tcfg.lr);
    let mut logs = Vec::new();

    let train_pos: Vec<usize> = splits.train.iter().copied().filter(|&i| data.labels[i] == 1).collect();
    let train_neg: Vec<usize> = splits.train.iter().copied().filter(|&i| data.labels[i] == 0).collect();
    if train_pos.is_empty() || train_neg.is_empty() {
        return Err(Error::BadConfig(
            "training split needs at least one account of each class".into(),
        ));
    }
    let steps = splits.train.len().div_ceil(2 * tcfg.batch_per_class).max(1);

    for epoch in 0..tcfg.epochs {
        let start = std::time::Instant::now();
        let mut epoch_loss = 0.0;
        for step in 0..steps {
            let mut rng = stream_rng(tcfg.seed, 3000 + epoch as u64, step as u64);
            let mut batch: Vec<usize> = Vec::with_capacity(2 * tcfg.batch_per_class);
            for _ in 0..tcfg.batch_per_class {
                batch.push(train_pos[rng.random_range(0..train_pos.len())]);
            }
            for _ in 0..tcfg.batch_per_class {
                batch.push(train_neg[rng.random_range(0..train_neg.len())]);
            }
            let pred = predict_rows(
                &model,
                &ctx,
                data,
                &registry,
                &batch,
                tcfg.lambda,
                tcfg.lambda_convention,
                true,
                Some((tcfg.seed, 4000 + (epoch * steps + step) as u64)),
            )?;
            let labels: Vec<usize> = batch.iter().map(|&i| data.labels[i]).collect();
            let loss = binary_cross_entropy(&pred, &labels, tcfg.two_term_ce, 1e-12)?;
            let value = loss.item();
            if !value.is_finite() {
                return Err(Error::NonFinite(
                    "joint training loss; try a lower learning rate".into(),
                ));
            }
            epoch_loss += value;
            loss.backward()?;
            opt.step(&params)?;

            // memory-bank update: store the batch's fresh embeddings
            let table = model.similarity_table(ctx.vocab_adj.as_ref())?;
            for &i in &batch {
                let (pooled, _) = model.account_forward(
                    &ctx.sequences[i],
                    table.as_ref(),
                    ctx.connected.as_deref(),
                    false,
                    None,
                )?;
                registry.update(&[data.node_idx[i]], &pooled);
            }
        }
        logs.push(EpochLog {
            epoch,
            split: "train".into(),
            loss: epoch_loss / steps as f64,
            elapsed_ms: start.elapsed().as_millis() as u64,
        });

        if !splits.val.is_empty() {
            let start = std::time::Instant::now();
            let pred = predict_rows(
                &model,
                &ctx,
                data,
                &registry,
                &splits.val,
                tcfg.lambda,
                tcfg.lambda_convention,
                false,
                None,
            )?;
            let labels: Vec<usize> = splits.val.iter().map(|&i| data.labels[i]).collect();
            let loss = binary_cross_entropy(&pred, &labels, tcfg.two_term_ce, 1e-12)?.item();
            logs.push(EpochLog {
                epoch,
                split: "val".into(),
                loss,
                elapsed_ms: start.elapsed().as_millis() as u64,
            });
        }
    }

    refresh_registry(&model, &ctx, data, &mut registry)?;
    Ok((model, registry, logs))
}

/// Hard predictions and confusion counts over the given corpus indices,
/// after refreshing every account's registry row.
pub fn evaluate(
    model: &JointModel,
    data: &JointDataset,
    indices: &[usize],
    lambda: f64,
    convention: LambdaConvention,
) -> Result<(Vec<bool>, Confusion)> {
    let ctx = JointContext::new(model, data);
    let mut registry =
        EmbeddingRegistry::new(data.account_graph.node_count(), model.cfg.man_dim);
    refresh_registry(model, &ctx, data, &mut registry)?;
    let pred = predict_rows(
        model, &ctx, data, &registry, indices, lambda, convention, false, None,
    )?;
    let hard: Vec<bool> = pred.with_data(|pv| {
        (0..indices.len()).map(|r| pv[r * 2 + 1] > pv[r * 2]).collect()
    });
    let truth: Vec<bool> = indices.iter().map(|&i| data.labels[i] == 1).collect();
    Ok((hard.clone(), Confusion::from_predictions(&hard, &truth)))
}
