//! Transaction attribute similarity graph over the vocabulary.
//!
//! Co-occurrence windows are single transaction sentences. Word-word edges
//! carry NPMI scores; sentence-word edges carry per-sentence-normalized
//! TF-IDF scores. Edges survive only above the threshold theta. A 2-layer
//! GCN over the graph yields per-word similarity embeddings.

use std::collections::{BTreeMap, HashMap};
use std::rc::Rc;

use serde::{Deserialize, Serialize};

use crate::corpus::AccountCorpus;
use crate::error::{Error, Result};
use crate::tensor::ops::{matmul, relu, spmm};
use crate::tensor::{Parameter, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GraphMode {
    Npmi,
    Tfidf,
    NpmiTfidf,
}

#[derive(Debug, Clone)]
pub struct CooccurrenceStats {
    /// Number of windows (= transaction sentences).
    pub windows: u64,
    /// Windows containing each word at least once.
    pub word_windows: HashMap<u32, u64>,
    /// Windows containing both words; keys ordered (min, max).
    pub pair_windows: HashMap<(u32, u32), u64>,
}

/// Count presence-per-window statistics over raw windows.
pub fn count_windows(windows: &[Vec<u32>]) -> Result<CooccurrenceStats> {
    if windows.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let mut word_windows: HashMap<u32, u64> = HashMap::new();
    let mut pair_windows: HashMap<(u32, u32), u64> = HashMap::new();
    for w in windows {
        let mut distinct: Vec<u32> = w.clone();
        distinct.sort_unstable();
        distinct.dedup();
        for (i, &a) in distinct.iter().enumerate() {
            *word_windows.entry(a).or_insert(0) += 1;
            for &b in &distinct[i + 1..] {
                *pair_windows.entry((a, b)).or_insert(0) += 1;
            }
        }
    }
    Ok(CooccurrenceStats {
        windows: windows.len() as u64,
        word_windows,
        pair_windows,
    })
}

/// Flatten every account's sentences into windows.
pub fn sentence_windows(corpora: &[AccountCorpus]) -> Vec<Vec<u32>> {
    corpora
        .iter()
        .flat_map(|c| c.sentences.iter().map(|s| s.words.clone()))
        .collect()
}

pub fn count_cooccurrence(corpora: &[AccountCorpus]) -> Result<CooccurrenceStats> {
    count_windows(&sentence_windows(corpora))
}

impl CooccurrenceStats {
    pub fn word_count(&self, w: u32) -> u64 {
        self.word_windows.get(&w).copied().unwrap_or(0)
    }

    pub fn pair_count(&self, a: u32, b: u32) -> u64 {
        let key = (a.min(b), a.max(b));
        self.pair_windows.get(&key).copied().unwrap_or(0)
    }
}

/// NPMI from raw window counts. `None` when the pair never co-occurs.
/// Shared with the brute-force oracle so both sides evaluate the identical
/// floating-point expression on identical integer counts.
pub fn npmi_from_counts(joint: u64, ci: u64, cj: u64, windows: u64) -> Option<f64> {
    if joint == 0 {
        return None;
    }
    if joint == ci && joint == cj {
        // perfect association: PMI = -log p exactly, so NPMI = 1; also covers
        // the joint = 1 case where the normalizer vanishes
        return Some(1.0);
    }
    let n = windows as f64;
    let p_ij = joint as f64 / n;
    let p_i = ci as f64 / n;
    let p_j = cj as f64 / n;
    let pmi = (p_ij / (p_i * p_j)).ln();
    Some(pmi / -p_ij.ln())
}

/// NPMI between two words that both occur in the corpus.
pub fn npmi(stats: &CooccurrenceStats, wi: u32, wj: u32) -> Result<Option<f64>> {
    let ci = stats.word_count(wi);
    let cj = stats.word_count(wj);
    if ci == 0 {
        return Err(Error::UnknownWord(wi));
    }
    if cj == 0 {
        return Err(Error::UnknownWord(wj));
    }
    Ok(npmi_from_counts(
        stats.pair_count(wi, wj),
        ci,
        cj,
        stats.windows,
    ))
}

/// Document statistics where a document is one transaction sentence.
#[derive(Debug, Clone)]
pub struct TfidfStats {
    pub sentences: Vec<Vec<u32>>,
    /// Sentences containing each word.
    pub doc_freq: HashMap<u32, u64>,
}

pub fn tfidf_stats(windows: &[Vec<u32>]) -> Result<TfidfStats> {
    if windows.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let mut doc_freq: HashMap<u32, u64> = HashMap::new();
    for s in windows {
        let mut distinct: Vec<u32> = s.clone();
        distinct.sort_unstable();
        distinct.dedup();
        for w in distinct {
            *doc_freq.entry(w).or_insert(0) += 1;
        }
    }
    Ok(TfidfStats {
        sentences: windows.to_vec(),
        doc_freq,
    })
}

impl TfidfStats {
    /// Raw TF x ln(N / df) for a word in one sentence.
    pub fn tfidf(&self, word: u32, sentence: usize) -> Result<f64> {
        let df = *self.doc_freq.get(&word).ok_or(Error::UnknownWord(word))?;
        let tf = self.sentences[sentence]
            .iter()
            .filter(|&&w| w == word)
            .count() as f64;
        let idf = (self.sentences.len() as f64 / df as f64).ln();
        Ok(tf * idf)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EdgeKind {
    /// word-word (NPMI)
    Ww,
    /// sentence-word (TF-IDF)
    Sw,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VocabEdge {
    pub u: u32,
    pub v: u32,
    pub weight: f64,
    pub kind: EdgeKind,
}

/// Sparse weighted graph over vocabulary words, with sentence nodes appended
/// after the word block in TF-IDF modes.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VocabGraph {
    pub mode: GraphMode,
    pub theta: f64,
    /// Word node count (= vocabulary size); word node index = token id.
    pub n_words: usize,
    /// Sentence node count; sentence s has node index n_words + s.
    pub n_sentences: usize,
    pub edges: Vec<VocabEdge>,
}

/// Build the similarity graph from tokenized corpora.
pub fn build_graph(
    corpora: &[AccountCorpus],
    vocab_size: usize,
    mode: GraphMode,
    theta: f64,
) -> Result<VocabGraph> {
    if !(0.0..1.0).contains(&theta) {
        return Err(Error::InvalidThreshold(theta));
    }
    let windows = sentence_windows(corpora);
    let mut edges = Vec::new();
    let mut n_sentences = 0;

    if matches!(mode, GraphMode::Npmi | GraphMode::NpmiTfidf) {
        let stats = count_windows(&windows)?;
        let mut pairs: Vec<(&(u32, u32), &u64)> = stats.pair_windows.iter().collect();
        pairs.sort_by_key(|(k, _)| **k);
        for (&(a, b), &joint) in pairs {
            let score = npmi_from_counts(joint, stats.word_count(a), stats.word_count(b), stats.windows)
                .expect("joint > 0");
            if score > theta {
                edges.push(VocabEdge {
                    u: a,
                    v: b,
                    weight: score,
                    kind: EdgeKind::Ww,
                });
            }
        }
    }

    if matches!(mode, GraphMode::Tfidf | GraphMode::NpmiTfidf) {
        let stats = tfidf_stats(&windows)?;
        n_sentences = stats.sentences.len();
        for (s, sentence) in stats.sentences.iter().enumerate() {
            let mut distinct: Vec<u32> = sentence.clone();
            distinct.sort_unstable();
            distinct.dedup();
            let scores: Vec<(u32, f64)> = distinct
                .iter()
                .map(|&w| (w, stats.tfidf(w, s).expect("word present")))
                .collect();
            let max = scores.iter().map(|(_, v)| *v).fold(0.0f64, f64::max);
            if max <= 0.0 {
                continue;
            }
            for (w, raw) in scores {
                // normalize per sentence so theta shares the NPMI scale
                let weight = raw / max;
                if weight > theta {
                    edges.push(VocabEdge {
                        u: (vocab_size + s) as u32,
                        v: w,
                        weight,
                        kind: EdgeKind::Sw,
                    });
                }
            }
        }
    }

    Ok(VocabGraph {
        mode,
        theta,
        n_words: vocab_size,
        n_sentences,
        edges,
    })
}

/// Normalized adjacency with self-loops, stored as a directed edge list that
/// includes both orientations of every undirected edge.
#[derive(Debug, Clone)]
pub struct NormAdj {
    pub n: usize,
    pub edges: Rc<Vec<(u32, u32, f64)>>,
}

impl NormAdj {
    /// D^{-1/2} (A + I) D^{-1/2} from an undirected weighted edge list.
    pub fn from_undirected(n: usize, undirected: &[(u32, u32, f64)]) -> NormAdj {
        let mut degree = vec![1.0f64; n]; // self-loop contributes 1
        for &(u, v, w) in undirected {
            degree[u as usize] += w;
            degree[v as usize] += w;
        }
        let inv_sqrt: Vec<f64> = degree.iter().map(|d| 1.0 / d.sqrt()).collect();
        let mut edges = Vec::with_capacity(undirected.len() * 2 + n);
        for i in 0..n {
            edges.push((i as u32, i as u32, inv_sqrt[i] * inv_sqrt[i]));
        }
        for &(u, v, w) in undirected {
            let norm = w * inv_sqrt[u as usize] * inv_sqrt[v as usize];
            edges.push((u, v, norm));
            edges.push((v, u, norm));
        }
        NormAdj {
            n,
            edges: Rc::new(edges),
        }
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.n * self.n];
        for &(u, v, w) in self.edges.iter() {
            out[u as usize * self.n + v as usize] += w;
        }
        out
    }
}

impl VocabGraph {
    pub fn node_count(&self) -> usize {
        self.n_words + self.n_sentences
    }

    pub fn normalized_adjacency(&self) -> NormAdj {
        let undirected: Vec<(u32, u32, f64)> = self
            .edges
            .iter()
            .map(|e| (e.u, e.v, e.weight))
            .collect();
        NormAdj::from_undirected(self.node_count(), &undirected)
    }

    /// True when the word has at least one incident edge.
    pub fn word_connected(&self, word: u32) -> bool {
        self.edges.iter().any(|e| e.u == word || e.v == word)
    }
}

/// 2-layer GCN over the vocabulary graph with one-hot identity input
/// features, trained end-to-end through the downstream classifier.
pub struct SimilarityGcn {
    pub w1: Parameter,
    pub w2: Parameter,
    pub hidden: usize,
    pub out_dim: usize,
}

impl SimilarityGcn {
    pub fn new(n_nodes: usize, hidden: usize, out_dim: usize, init: impl FnMut() -> f64) -> SimilarityGcn {
        let mut init = init;
        let w1: Vec<f64> = (0..n_nodes * hidden).map(|_| init()).collect();
        let w2: Vec<f64> = (0..hidden * out_dim).map(|_| init()).collect();
        SimilarityGcn {
            w1: Parameter::new("tasg.w1", &[n_nodes, hidden], w1),
            w2: Parameter::new("tasg.w2", &[hidden, out_dim], w2),
            hidden,
            out_dim,
        }
    }

    /// Per-node embeddings: rows aligned with graph node indices.
    pub fn forward(&self, adj: &NormAdj) -> Result<Tensor> {
        let h1 = relu(&spmm(&adj.edges, adj.n, &self.w1.tensor));
        let h2 = relu(&spmm(&adj.edges, adj.n, &matmul(&h1, &self.w2.tensor)?));
        Ok(h2)
    }

    pub fn parameters(&self) -> Vec<Parameter> {
        vec![self.w1.clone(), self.w2.clone()]
    }
}

/// JSON-lines export: one edge per line plus a node table.
pub fn export_edges(graph: &VocabGraph) -> String {
    let mut out = String::new();
    for e in &graph.edges {
        out.push_str(&serde_json::to_string(e).unwrap());
        out.push('\n');
    }
    out
}

/// Node index -> token string (word nodes) or sentence coordinate.
pub fn node_table(graph: &VocabGraph, vocab: &crate::corpus::Vocabulary) -> BTreeMap<u32, String> {
    let mut table = BTreeMap::new();
    for w in 0..graph.n_words as u32 {
        if let Some(tok) = vocab.token(w) {
            table.insert(w, tok.to_string());
        }
    }
    for s in 0..graph.n_sentences {
        table.insert((graph.n_words + s) as u32, format!("sentence:{s}"));
    }
    table
}
