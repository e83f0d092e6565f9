//! Weighted account interaction graph and its GCN propagation.
//!
//! Edge weight is the transaction count between a pair of accounts,
//! regardless of direction. The GCNe variant keeps the counts when
//! normalizing; the plain variant binarizes first.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::corpus::Transaction;
use crate::error::Result;
use crate::tasg::NormAdj;
use crate::tensor::ops::{matmul, relu, spmm};
use crate::tensor::{Parameter, Tensor};

#[derive(Debug, Clone)]
pub struct AccountGraph {
    /// Sorted account ids; node index = position.
    pub accounts: Vec<String>,
    index: BTreeMap<String, usize>,
    /// Undirected edges (u < v) with transaction counts.
    pub edges: Vec<(u32, u32, u64)>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct AccountEdgeLine {
    pub account_u: String,
    pub account_v: String,
    pub count: u64,
}

/// Count transactions per unordered account pair. Every account appearing as
/// sender or receiver becomes a node; ordering is deterministic by account id.
pub fn build_account_graph(transactions: &[Transaction]) -> AccountGraph {
    let mut index: BTreeMap<String, usize> = BTreeMap::new();
    for t in transactions {
        index.entry(t.account.clone()).or_default();
        index.entry(t.counterparty.clone()).or_default();
    }
    for (i, (_, slot)) in index.iter_mut().enumerate() {
        *slot = i;
    }
    let mut counts: BTreeMap<(u32, u32), u64> = BTreeMap::new();
    for t in transactions {
        let a = index[&t.account] as u32;
        let b = index[&t.counterparty] as u32;
        if a == b {
            continue;
        }
        *counts.entry((a.min(b), a.max(b))).or_insert(0) += 1;
    }
    AccountGraph {
        accounts: index.keys().cloned().collect(),
        edges: counts.into_iter().map(|((u, v), c)| (u, v, c)).collect(),
        index,
    }
}

impl AccountGraph {
    pub fn node_count(&self) -> usize {
        self.accounts.len()
    }

    pub fn node_index(&self, account: &str) -> Option<usize> {
        self.index.get(account).copied()
    }

    /// Normalized adjacency with self-loops. `weighted` keeps transaction
    /// counts as edge weights (GCNe); otherwise the adjacency is binarized.
    pub fn normalized_adjacency(&self, weighted: bool) -> NormAdj {
        let undirected: Vec<(u32, u32, f64)> = self
            .edges
            .iter()
            .map(|&(u, v, c)| (u, v, if weighted { c as f64 } else { 1.0 }))
            .collect();
        NormAdj::from_undirected(self.node_count(), &undirected)
    }

    pub fn export_edges(&self) -> String {
        let mut out = String::new();
        for &(u, v, c) in &self.edges {
            let line = AccountEdgeLine {
                account_u: self.accounts[u as usize].clone(),
                account_v: self.accounts[v as usize].clone(),
                count: c,
            };
            out.push_str(&serde_json::to_string(&line).unwrap());
            out.push('\n');
        }
        out
    }
}

/// 2-layer GCN without bias terms: `H2 = A_hat relu(A_hat H0 W1) W2`, identity
/// activation on the output layer so the result feeds a softmax directly.
pub struct AccountGcn {
    pub w1: Parameter,
    pub w2: Parameter,
}

impl AccountGcn {
    pub fn new(in_dim: usize, hidden: usize, out_dim: usize, init: impl FnMut() -> f64) -> AccountGcn {
        let mut init = init;
        let w1: Vec<f64> = (0..in_dim * hidden).map(|_| init()).collect();
        let w2: Vec<f64> = (0..hidden * out_dim).map(|_| init()).collect();
        AccountGcn {
            w1: Parameter::new("aig.w1", &[in_dim, hidden], w1),
            w2: Parameter::new("aig.w2", &[hidden, out_dim], w2),
        }
    }

    pub fn forward(&self, adj: &NormAdj, features: &Tensor) -> Result<Tensor> {
        let h1 = relu(&spmm(&adj.edges, adj.n, &matmul(features, &self.w1.tensor)?));
        let logits = spmm(&adj.edges, adj.n, &matmul(&h1, &self.w2.tensor)?);
        Ok(logits)
    }

    pub fn parameters(&self) -> Vec<Parameter> {
        vec![self.w1.clone(), self.w2.clone()]
    }
}
