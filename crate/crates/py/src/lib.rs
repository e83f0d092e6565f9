//! Python bindings for the tlmg4eth pipeline: synthetic transfer generation,
//! ingestion into per-transaction sentences, vocabulary and account graph
//! construction, masked-language-model pretraining, and classification
//! metrics.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use tlmg4eth::aig::build_account_graph;
use tlmg4eth::corpus::{build_sentences, ingest, AccountCorpus, AccountRecords, Label, Vocabulary};
use tlmg4eth::metrics::{Confusion, EvalReport};
use tlmg4eth::synth::{generate, SynthConfig};
use tlmg4eth::tasg::{build_graph, npmi_from_counts, EdgeKind, GraphMode};
use tlmg4eth::tlm::{pretrain, EncoderConfig, PretrainConfig};

fn to_py_err(e: tlmg4eth::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn label_str(label: Label) -> &'static str {
    match label {
        Label::Phisher => "phisher",
        Label::Normal => "normal",
        Label::Unlabeled => "unlabeled",
    }
}

/// Generate a deterministic synthetic transfer log.
///
/// Returns `(transactions_csv, labels_csv, n_phishers)`.
#[pyfunction]
#[pyo3(signature = (n_accounts=200, phisher_fraction=0.3, min_tx=5, max_tx=20, pair_repeat=false, seed=42))]
fn generate_synth(
    n_accounts: usize,
    phisher_fraction: f64,
    min_tx: usize,
    max_tx: usize,
    pair_repeat: bool,
    seed: u64,
) -> PyResult<(String, String, usize)> {
    let out = generate(&SynthConfig {
        n_accounts,
        phisher_fraction,
        min_tx,
        max_tx,
        pair_repeat,
        seed,
    })
    .map_err(to_py_err)?;
    Ok((out.transactions_csv, out.labels_csv, out.n_phishers))
}

/// Normalized pointwise mutual information from sliding-window counts.
///
/// Returns `None` when the pair never co-occurs.
#[pyfunction]
fn npmi(joint: u64, count_i: u64, count_j: u64, windows: u64) -> Option<f64> {
    npmi_from_counts(joint, count_i, count_j, windows)
}

/// An ingested transfer corpus: per-account records, tokenized transaction
/// sentences, and the shared vocabulary.
#[pyclass(name = "Corpus")]
struct PyCorpus {
    records: Vec<AccountRecords>,
    corpora: Vec<AccountCorpus>,
    vocab: Vocabulary,
}

#[pymethods]
impl PyCorpus {
    /// Ingest `transactions` (from,to,value_wei,timestamp CSV) against
    /// `labels` (address,label CSV), keeping the `max_transactions` most
    /// recent transfers per account.
    #[staticmethod]
    #[pyo3(signature = (transactions, labels, max_transactions=100))]
    fn ingest(transactions: &str, labels: &str, max_transactions: usize) -> PyResult<PyCorpus> {
        let records = ingest(
            std::path::Path::new(transactions),
            std::path::Path::new(labels),
            max_transactions,
        )
        .map_err(to_py_err)?;
        let (corpora, vocab) = build_sentences(&records).map_err(to_py_err)?;
        Ok(PyCorpus {
            records,
            corpora,
            vocab,
        })
    }

    #[getter]
    fn accounts(&self) -> Vec<String> {
        self.records.iter().map(|r| r.account.clone()).collect()
    }

    #[getter]
    fn labels(&self) -> Vec<&'static str> {
        self.records.iter().map(|r| label_str(r.label)).collect()
    }

    #[getter]
    fn vocab_size(&self) -> usize {
        self.vocab.len()
    }

    /// Token -> id mapping, reserved tokens included.
    fn vocab(&self) -> std::collections::BTreeMap<String, u32> {
        self.vocab.to_map()
    }

    /// Tokenized sentences for one account, as token strings.
    fn sentences(&self, account: &str) -> PyResult<Vec<Vec<String>>> {
        let corpus = self
            .corpora
            .iter()
            .find(|c| c.account == account)
            .ok_or_else(|| PyValueError::new_err(format!("unknown account {account}")))?;
        Ok(corpus
            .sentences
            .iter()
            .map(|s| {
                s.words
                    .iter()
                    .map(|&w| self.vocab.token(w).unwrap_or("?").to_string())
                    .collect()
            })
            .collect())
    }

    /// Build the vocabulary similarity graph.
    ///
    /// `mode` is one of `npmi`, `tfidf`, `npmi-tfidf`. Returns
    /// `(u, v, weight, kind)` edges where `kind` is `ww` (word-word) or `sw`
    /// (sentence-word); sentence `s` has node index `vocab_size + s`.
    #[pyo3(signature = (mode="npmi", theta=0.2))]
    fn vocab_graph(&self, mode: &str, theta: f64) -> PyResult<Vec<(u32, u32, f64, &'static str)>> {
        let mode = match mode {
            "npmi" => GraphMode::Npmi,
            "tfidf" => GraphMode::Tfidf,
            "npmi-tfidf" => GraphMode::NpmiTfidf,
            other => {
                return Err(PyValueError::new_err(format!(
                    "unknown graph mode {other}; expected npmi, tfidf, or npmi-tfidf"
                )))
            }
        };
        let graph = build_graph(&self.corpora, self.vocab.len(), mode, theta).map_err(to_py_err)?;
        Ok(graph
            .edges
            .iter()
            .map(|e| {
                let kind = match e.kind {
                    EdgeKind::Ww => "ww",
                    EdgeKind::Sw => "sw",
                };
                (e.u, e.v, e.weight, kind)
            })
            .collect())
    }

    /// Undirected account interaction edges as `(account_u, account_v, count)`.
    fn account_edges(&self) -> Vec<(String, String, u64)> {
        let transactions: Vec<_> = self
            .records
            .iter()
            .flat_map(|r| r.transactions.iter().cloned())
            .collect();
        let g = build_account_graph(&transactions);
        g.edges
            .iter()
            .map(|&(u, v, c)| {
                (
                    g.accounts[u as usize].clone(),
                    g.accounts[v as usize].clone(),
                    c,
                )
            })
            .collect()
    }

    /// Run masked-language-model pretraining on this corpus and return the
    /// per-epoch mean losses. Deterministic per seed.
    #[pyo3(signature = (epochs=2, lr=1e-3, batch_size=16, d_model=16, layers=1, heads=2, max_len=38, seed=42))]
    #[allow(clippy::too_many_arguments)]
    fn pretrain_losses(
        &self,
        epochs: usize,
        lr: f64,
        batch_size: usize,
        d_model: usize,
        layers: usize,
        heads: usize,
        max_len: usize,
        seed: u64,
    ) -> PyResult<Vec<f64>> {
        let enc = EncoderConfig {
            layers,
            heads,
            d_model,
            d_ff: 2 * d_model,
            max_len,
            dropout: 0.0,
        };
        let cfg = PretrainConfig {
            epochs,
            lr,
            batch_size,
            mask_rate: 0.15,
            seed,
        };
        let (_model, logs) = pretrain(&self.corpora, &self.vocab, enc, &cfg).map_err(to_py_err)?;
        Ok(logs
            .iter()
            .filter(|l| l.split == "train")
            .map(|l| l.loss)
            .collect())
    }

    fn __len__(&self) -> usize {
        self.records.len()
    }
}

/// Binary confusion matrix with the phisher class as positive.
#[pyclass(name = "Confusion", skip_from_py_object)]
#[derive(Clone)]
struct PyConfusion {
    inner: Confusion,
}

#[pymethods]
impl PyConfusion {
    /// Count outcomes from boolean predictions and labels (true = phisher).
    #[staticmethod]
    fn from_predictions(predictions: Vec<bool>, labels: Vec<bool>) -> PyResult<PyConfusion> {
        if predictions.len() != labels.len() {
            return Err(PyValueError::new_err(format!(
                "length mismatch: {} predictions vs {} labels",
                predictions.len(),
                labels.len()
            )));
        }
        Ok(PyConfusion {
            inner: Confusion::from_predictions(&predictions, &labels),
        })
    }

    #[getter]
    fn tp(&self) -> usize {
        self.inner.tp
    }

    #[getter]
    fn fp(&self) -> usize {
        self.inner.fp
    }

    #[getter]
    fn tn(&self) -> usize {
        self.inner.tn
    }

    #[getter]
    fn fn_(&self) -> usize {
        self.inner.fn_
    }

    /// `(value, degenerate)`; degenerate means an empty denominator.
    fn precision(&self) -> (f64, bool) {
        self.inner.precision()
    }

    fn recall(&self) -> (f64, bool) {
        self.inner.recall()
    }

    fn f1(&self) -> (f64, bool) {
        self.inner.f1()
    }

    fn balanced_accuracy(&self) -> (f64, bool) {
        self.inner.balanced_accuracy()
    }

    /// Full evaluation report as a JSON string.
    #[pyo3(signature = (dataset, seed=42, lambda_=0.7, theta=0.2, mode="npmi"))]
    fn report_json(
        &self,
        dataset: &str,
        seed: u64,
        lambda_: f64,
        theta: f64,
        mode: &str,
    ) -> PyResult<String> {
        let report = EvalReport::new(dataset, seed, lambda_, theta, mode, self.inner);
        serde_json::to_string_pretty(&report).map_err(|e| PyValueError::new_err(e.to_string()))
    }

    fn __repr__(&self) -> String {
        format!(
            "Confusion(tp={}, fp={}, tn={}, fn={})",
            self.inner.tp, self.inner.fp, self.inner.tn, self.inner.fn_
        )
    }
}

#[pymodule]
fn tlmg4eth_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(generate_synth, m)?)?;
    m.add_function(wrap_pyfunction!(npmi, m)?)?;
    m.add_class::<PyCorpus>()?;
    m.add_class::<PyConfusion>()?;
    Ok(())
}
