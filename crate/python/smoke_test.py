#!/usr/bin/env python3
"""Smoke test for the tlmg4eth_py extension module.

Builds the cdylib if needed, then exercises the bindings end to end:
synthetic generation -> ingestion -> vocabulary/account graphs -> MLM
pretraining -> metrics, cross-checking NPMI and the confusion metrics
against pure-Python oracles.
"""

import json
import math
import pathlib
import shutil
import subprocess
import sys
import tempfile

HERE = pathlib.Path(__file__).resolve().parent
ROOT = HERE.parent


def build_module():
    target = ROOT / "target" / "debug" / "libtlmg4eth_py.so"
    dest = HERE / "tlmg4eth_py.so"
    if not target.exists() or (
        dest.exists() and dest.stat().st_mtime < target.stat().st_mtime
    ):
        subprocess.run(
            ["cargo", "build", "-p", "tlmg4eth-py"], cwd=ROOT, check=True
        )
    shutil.copy2(target, dest)


build_module()
sys.path.insert(0, str(HERE))
import tlmg4eth_py as m  # noqa: E402


def check(cond, msg):
    if not cond:
        raise AssertionError(msg)


# --- synthetic generation is deterministic per seed ---
tx_csv, labels_csv, n_phishers = m.generate_synth(
    n_accounts=40, phisher_fraction=0.25, min_tx=3, max_tx=6, seed=7
)
tx_csv2, labels_csv2, _ = m.generate_synth(
    n_accounts=40, phisher_fraction=0.25, min_tx=3, max_tx=6, seed=7
)
check(tx_csv == tx_csv2 and labels_csv == labels_csv2, "synth not deterministic")
check(n_phishers == 10, f"expected 10 phishers, got {n_phishers}")
tx_other = m.generate_synth(
    n_accounts=40, phisher_fraction=0.25, min_tx=3, max_tx=6, seed=8
)[0]
check(tx_other != tx_csv, "different seeds produced identical transfers")
print("synth: deterministic, 10/40 phishers")

# --- ingestion ---
with tempfile.TemporaryDirectory() as d:
    tx_path = pathlib.Path(d) / "tx.csv"
    labels_path = pathlib.Path(d) / "labels.csv"
    tx_path.write_text(tx_csv)
    labels_path.write_text(labels_csv)
    corpus = m.Corpus.ingest(str(tx_path), str(labels_path), 100)

check(len(corpus) == 40, f"expected 40 accounts, got {len(corpus)}")
check(corpus.labels.count("phisher") == 10, "phisher label count mismatch")
vocab = corpus.vocab()
check(corpus.vocab_size == len(vocab), "vocab size mismatch")
for reserved in ("[PAD]", "[CLS]", "[MASK]"):
    check(reserved in vocab, f"missing reserved token {reserved}")

account = corpus.accounts[0]
sentences = corpus.sentences(account)
check(len(sentences) >= 3, "too few sentences")
check(all(len(s) == 6 for s in sentences), "sentences must have 6 words")
print(f"ingest: 40 accounts, vocab size {corpus.vocab_size}")

# --- NPMI scalar vs a pure-Python oracle ---
def npmi_oracle(joint, ci, cj, windows):
    if joint == 0:
        return None
    if joint == ci == cj:
        return 1.0  # perfect association
    p = joint / windows
    pmi = math.log(p / ((ci / windows) * (cj / windows)))
    return pmi / (-math.log(p))


for args in [(2, 3, 3, 4), (1, 1, 1, 10), (5, 5, 5, 5), (0, 3, 2, 9)]:
    got = m.npmi(*args)
    want = npmi_oracle(*args)
    if want is None:
        check(got is None, f"npmi{args} should be None")
    else:
        check(abs(got - want) < 1e-12, f"npmi{args}: {got} vs {want}")
print("npmi: matches pure-Python oracle")

# --- vocabulary graphs: theta filtration shrinks the edge set ---
loose = corpus.vocab_graph(mode="npmi-tfidf", theta=0.1)
tight = corpus.vocab_graph(mode="npmi-tfidf", theta=0.6)
check(len(loose) > 0, "no vocabulary edges at theta=0.1")
check(len(tight) < len(loose), "higher theta did not prune edges")
check(
    {e[:3] for e in tight} <= {e[:3] for e in loose},
    "tight edge set is not a subset of the loose one",
)
kinds = {e[3] for e in loose}
check(kinds == {"ww", "sw"}, f"combined mode should emit both kinds, got {kinds}")
print(f"vocab graph: {len(loose)} edges at theta=0.1, {len(tight)} at theta=0.6")

# --- account interaction graph ---
edges = corpus.account_edges()
check(len(edges) > 0, "no account edges")
check(all(c >= 1 for (_, _, c) in edges), "edge counts must be positive")
total = sum(c for (_, _, c) in edges)
rows = tx_csv.strip().splitlines()[1:]
self_transfers = sum(1 for r in rows if r.split(",")[0] == r.split(",")[1])
# each transfer is seen twice: as the sender's outflow and the receiver's inflow
check(
    total == 2 * (len(rows) - self_transfers),
    f"edge counts {total} vs transfer rows {len(rows) - self_transfers}",
)
print(f"account graph: {len(edges)} edges, {total} transfers")

# --- MLM pretraining decreases the loss and is deterministic ---
losses = corpus.pretrain_losses(epochs=2, lr=1e-3, seed=11)
losses2 = corpus.pretrain_losses(epochs=2, lr=1e-3, seed=11)
check(losses == losses2, "pretraining not deterministic")
check(len(losses) == 2, f"expected 2 epoch losses, got {len(losses)}")
check(losses[-1] < losses[0], f"loss did not decrease: {losses}")
print(f"pretrain: loss {losses[0]:.4f} -> {losses[-1]:.4f}, bit-identical rerun")

# --- metrics vs hand-counted oracle ---
preds = [True, True, True, True, False, False, False, False, False, False]
labels = [True, True, True, False, True, True, False, False, False, False]
c = m.Confusion.from_predictions(preds, labels)
check((c.tp, c.fp, c.tn, c.fn_) == (3, 1, 4, 2), repr(c))
p, _ = c.precision()
r, _ = c.recall()
f1, _ = c.f1()
check(abs(p - 0.75) < 1e-12, f"precision {p}")
check(abs(r - 0.6) < 1e-12, f"recall {r}")
check(abs(f1 - 2 * p * r / (p + r)) < 1e-12, f"f1 {f1}")
report = json.loads(c.report_json("smoke", seed=1, lambda_=0.5))
check(report["confusion"]["fn"] == 2, "report fn key mismatch")
check(abs(report["f1"] - f1) < 1e-12, "report f1 mismatch")
print(f"metrics: precision {p:.3f}, recall {r:.3f}, f1 {f1:.3f}")

print("smoke test passed")
