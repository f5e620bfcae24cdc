"""Acceptance suite: one test per criterion, each printing a single PASS/FAIL line.

Tolerances and sizes are fixed here; a failing criterion fails its test.
"""

import dataclasses
import time
from pathlib import Path

import numpy as np
import pytest

from semsearch.cli import main
from semsearch.data import (
    Batch,
    Vocabulary,
    build_word_targets,
    encode_pairs,
    make_batches,
    make_examples,
    make_synthetic_corpus,
    write_corpus,
)
from semsearch.eval import (
    EmbeddingTable,
    LatencyTable,
    average_score,
    coverage_at_k,
    extrema_score,
    greedy_score,
    r_precision,
    recall_at_k,
    reference_words,
)
from semsearch.index import AnnConfig, dumps_index, index_from_vectors, loads_index
from semsearch.model import (
    DECODER_ONLY_PREFIX,
    Checkpoint,
    ModelConfig,
    ModelParams,
    SemanticSearchModel,
    Trainer,
    dumps,
    joint_loss,
    loads,
)
from semsearch.numerics import Tape, Tensor, gradient_check, ops, parameter, precision

from conftest import TINY, tiny_examples
from test_eval import oracle_average, oracle_cov, oracle_extrema, oracle_greedy, oracle_recall, oracle_rprec


@pytest.fixture
def verdict(capsys):
    """Print ``ACCEPT <n> PASS|FAIL: <detail>`` uncaptured, then assert."""
    def report(n: int, ok: bool, detail: str):
        with capsys.disabled():
            print(f"\nACCEPT {n:>2} {'PASS' if ok else 'FAIL'}: {detail}")
        assert ok, detail
    return report


# --- 1. gradient suite -------------------------------------------------------------------------------

def _op_cases(rng):
    """(name, loss thunk, inputs) for every differentiable op."""
    r = lambda *s, scale=1.0: parameter(rng.standard_normal(s) * scale)
    w = lambda *s: Tensor(rng.standard_normal(s))
    a, b, c = r(3, 4), r(3, 4), r(4, 2)
    pos = parameter(rng.uniform(0.5, 2.0, (3, 4)))
    x3 = r(2, 3, 4)
    mask = np.arange(3)[None, :] < rng.integers(1, 4, size=2)[:, None]
    table, ids = r(6, 3), rng.integers(0, 6, size=(2, 3))
    kinkfree = parameter(np.where(np.abs(z := rng.standard_normal(8)) < 0.05, 0.1, z))
    g = {"w_x": r(3, 12, scale=0.5), "w_hrz": r(4, 8, scale=0.5), "w_hn": r(4, 4, scale=0.5), "b": r(12, scale=0.5)}
    gx, gh = r(2, 3), r(2, 4)
    logits = r(2, 3, 6)
    W = [w(3, 4), w(3, 2), w(2, 4, 3), w(2, 4), w(3, 2), w(8), w(2, 4), w(3, 4), w(2, 3, 2), w(2, 8)]
    return [
        ("add/sub/mul/div", lambda: (a + b) * W[0] - a / pos, [a, b, pos]),
        ("tanh/sigmoid/exp/log", lambda: ops.tanh(a) * ops.sigmoid(b) + ops.exp(a * 0.3) + ops.log(pos), [a, b, pos]),
        ("matmul", lambda: ops.matmul(a, c) * W[1], [a, c]),
        ("batched matmul", lambda: ops.matmul(x3, c) * W[8], [x3, c]),
        ("softmax", lambda: ops.softmax(a) * W[0], [a]),
        ("log_softmax", lambda: ops.log_softmax(a) * W[0], [a]),
        ("maxout", lambda: ops.maxout(a, 2) * W[4], [a]),
        ("sum/mean/reshape/transpose",
         lambda: ops.reshape(ops.transpose(a), (12,))[2:10] * ops.sum(b) + ops.mean(a), [a, b]),
        ("concat/stack/index", lambda: ops.stack([ops.concat([a, b], axis=-1)[0], ops.concat([b, a], axis=-1)[1]]) * W[9], [a, b]),
        ("embedding_lookup", lambda: ops.embedding_lookup(table, ids) * W[2][:, :3], [table]),
        ("pick", lambda: ops.pick(ops.log_softmax(logits), ids), [logits]),
        ("masked_mean", lambda: ops.masked_mean(x3, mask) * W[3], [x3]),
        ("where", lambda: ops.where(np.arange(4)[None, :] < 2, a, b) * a, [a, b]),
        ("l2_normalize", lambda: ops.l2_normalize(a) * W[7], [a]),
        ("relu/clamp_min", lambda: ops.relu(kinkfree) * W[5] + ops.clamp_min(kinkfree, 0.0) * kinkfree, [kinkfree]),
        ("gru_cell", lambda: ops.gru_cell(gx, gh, g) * W[6], list(g.values()) + [gx, gh]),
    ]


def test_c1_gradient_suite(verdict):
    start = time.perf_counter()
    worst: dict[str, float] = {}
    for seed in range(5):
        for name, f, inputs in _op_cases(np.random.default_rng(seed)):
            worst[name] = max(worst.get(name, 0.0), max(gradient_check(f, inputs)))
    op_max = max(worst.values())

    cfg = ModelConfig(seed=0, **TINY)
    P = ModelParams.initialize(dataclasses.replace(cfg, seed=1))
    for t in P.tensors():
        t.data *= 0.5 / 0.08  # away from the near-constant regime of the small default init
    batch = Batch.from_examples(tiny_examples(np.random.default_rng(0)))
    e2e = max(gradient_check(lambda: joint_loss(P, cfg, batch)[0], P.tensors()))
    elapsed = time.perf_counter() - start
    ok = op_max < 1e-4 and e2e < 1e-3 and elapsed < 60
    verdict(1, ok, f"per-op max rel err {op_max:.2e} (< 1e-4, worst {max(worst, key=worst.get)}), "
                   f"end-to-end {e2e:.2e} (< 1e-3), {elapsed:.1f}s (< 60s)")


# --- 2 and 6. memorization run -----------------------------------------------------------------------

MEMO = dict(n_pairs=32, d=32, emb_size=32, hidden_size=64, lr=0.003, batch_size=8, epochs=500, seed=0)


@pytest.fixture(scope="module")
def memorized():
    raw = make_synthetic_corpus(MEMO["n_pairs"], seed=0)
    vocab = Vocabulary.from_pairs(raw, 30000)
    pairs, _ = encode_pairs(raw, vocab)
    targets, _ = build_word_targets(pairs)
    cfg = ModelConfig(d=MEMO["d"], emb_size=MEMO["emb_size"], hidden_size=MEMO["hidden_size"],
                      vocab_size=len(vocab), lr=MEMO["lr"], seed=MEMO["seed"])
    start = time.perf_counter()
    trainer = Trainer(cfg, pairs, targets, batch_size=MEMO["batch_size"])
    logs = trainer.train(MEMO["epochs"])
    model = SemanticSearchModel(cfg, trainer.params)
    elapsed = time.perf_counter() - start
    return dict(vocab=vocab, pairs=pairs, logs=logs, model=model, elapsed=elapsed)


def test_c2_memorization_retrieval(memorized, verdict):
    m = memorized
    logs, model, pairs = m["logs"], m["model"], m["pairs"]
    ratio = logs[-1].losses.total / logs[0].losses.total
    responses = [list(p.response) for p in pairs]
    index = index_from_vectors([str(i) for i in range(len(pairs))], model.project_responses(responses),
                               AnnConfig(n_trees=1))
    q_vecs = model.project_queries([list(p.query) for p in pairs])
    ranks = [index.search_exact(v, 1).ids.tolist() for v in q_vecs]
    r1 = recall_at_k(ranks, [{i} for i in range(len(pairs))], 1)
    ok = ratio < 0.25 and r1 == 1.0 and m["elapsed"] < 300
    verdict(2, ok, f"final/first loss {ratio:.3f} (< 0.25), exact R@1 {r1:.4f} (= 1.0) over {len(pairs)} queries, "
                   f"{len(logs)} epochs in {m['elapsed']:.1f}s (< 300s)")


def test_c6_word_coverage(memorized, verdict):
    m = memorized
    model, pairs = m["model"], m["pairs"]
    k = len(m["vocab"]) // 2
    queries = [list(p.query) for p in pairs]
    refs = [reference_words(p.response) for p in pairs]
    cov_word = coverage_at_k(np.asarray(model.predict_topk(queries, k)).tolist(), refs).value
    cov_first = coverage_at_k(np.asarray(model.first_step_topk(queries, k)).tolist(), refs).value
    ok = cov_word >= 0.90 and cov_first >= 0.85
    verdict(6, ok, f"top-{k} of |V|={len(m['vocab'])}: predict_words coverage {cov_word:.4f} (>= 0.90), "
                   f"first-step coverage {cov_first:.4f} (>= 0.85)")


# --- 3. parameter count ------------------------------------------------------------------------------

def test_c3_parameter_count(verdict):
    cfg = ModelConfig(d=512, emb_size=512, hidden_size=1024, vocab_size=30000)
    with precision("float32"):
        n = SemanticSearchModel(cfg).num_parameters()
    rel = abs(n - 74e6) / 74e6
    verdict(3, rel <= 0.10, f"{n:,} parameters, {rel:.1%} from 74M (<= 10%)")


# --- 4. ANN fidelity ---------------------------------------------------------------------------------

def test_c4_ann_fidelity(verdict):
    start = time.perf_counter()
    rng = np.random.default_rng(0)
    vecs = rng.standard_normal((2000, 64))
    vecs /= np.linalg.norm(vecs, axis=1, keepdims=True)
    index = index_from_vectors([str(i) for i in range(2000)], vecs, AnnConfig(n_trees=50, leaf_size=16, seed=0))
    queries = rng.standard_normal((100, 64))
    queries /= np.linalg.norm(queries, axis=1, keepdims=True)
    recalls, identical = [], True
    for q in queries:
        exact = index.search_exact(q, 10)
        ann = index.search_ann(q, 10, budget=200)
        recalls.append(len(set(exact.ids.tolist()) & set(ann.ids.tolist())) / 10)
        full = index.search_ann(q, 10, budget=2000)
        identical &= np.array_equal(full.ids, exact.ids) and np.array_equal(full.scores, exact.scores)
    elapsed = time.perf_counter() - start
    recall = float(np.mean(recalls))
    ok = recall >= 0.95 and identical and elapsed < 30
    verdict(4, ok, f"mean recall@10 at budget 200: {recall:.3f} (>= 0.95); budget=pool identical to exact: "
                   f"{identical}; {elapsed:.1f}s (< 30s)")


# --- 5. metric oracles -------------------------------------------------------------------------------

def test_c5_metric_oracles(verdict):
    rng = np.random.default_rng(0)
    n = 1000
    worst = {"R@k": 0.0, "R-precision": 0.0, "COV@k": 0.0, "Greedy": 0.0, "Average": 0.0, "Extrema": 0.0}
    for _ in range(n):
        nq = int(rng.integers(1, 6))
        rankings = [rng.permutation(200)[: rng.integers(1, 200)].tolist() for _ in range(nq)]
        truth = [set(rng.choice(200, size=rng.integers(1, 5), replace=False).tolist()) for _ in range(nq)]
        k = int(rng.integers(1, 60))
        worst["R@k"] = max(worst["R@k"], abs(recall_at_k(rankings, truth, k) - oracle_recall(rankings, truth, k)))
        true_ids = rng.integers(0, 200, size=nq).tolist()
        worst["R-precision"] = max(worst["R-precision"],
                                   abs(r_precision(rankings, true_ids) - oracle_rprec(rankings, true_ids)))
        refs = [set(rng.integers(4, 200, size=rng.integers(1, 10)).tolist()) for _ in range(nq)]
        worst["COV@k"] = max(worst["COV@k"], abs(coverage_at_k(rankings, refs, k).value - oracle_cov(rankings, refs, k)))
        d = int(rng.integers(1, 8))
        ref, hyp = rng.standard_normal((rng.integers(1, 6), d)), rng.standard_normal((rng.integers(1, 6), d))
        for name, fn, oracle in (("Greedy", greedy_score, oracle_greedy), ("Average", average_score, oracle_average),
                                 ("Extrema", extrema_score, oracle_extrema)):
            worst[name] = max(worst[name], abs(fn(ref, hyp) - oracle(ref.tolist(), hyp.tolist())))
    hand = r_precision([[3, 2, 1, 0]], [0]) == 0.25 and r_precision([[0], [1]], [0, 1]) == 1.0
    table = EmbeddingTable.from_dict({"a": [1.0, 0.0], "b": [0.0, 1.0]})
    hand &= average_score(table.lookup(["a"]), table.lookup(["b"])) == 0.0
    ok = (hand and all(worst[m] <= 1e-9 for m in ("R@k", "R-precision", "COV@k"))
          and all(worst[m] <= 1e-6 for m in ("Greedy", "Average", "Extrema")))
    detail = ", ".join(f"{m} {v:.1e}" for m, v in worst.items())
    verdict(5, ok, f"{n} instances each, max abs diff: {detail}; rank-4 hand case 0.25: {hand}")


# --- 7. loss weights ---------------------------------------------------------------------------------

def test_c7_loss_weight_semantics(verdict):
    raw = make_synthetic_corpus(16, seed=1)
    vocab = Vocabulary.from_pairs(raw, 1000)
    pairs, _ = encode_pairs(raw, vocab)
    targets, _ = build_word_targets(pairs)
    base = ModelConfig(d=8, emb_size=8, hidden_size=12, vocab_size=len(vocab), seed=0)
    examples = make_examples(pairs, targets, np.random.default_rng(0))
    batches = list(make_batches(examples, 4, np.random.default_rng(1)))

    only_r = dataclasses.replace(base, alpha=0, beta=0, gamma=1)
    P = ModelParams.initialize(only_r)
    decoder_zero = True
    for batch in batches:
        for t in P.tensors():
            t.grad = None
        with Tape() as tape:
            total, _ = joint_loss(P, only_r, batch)
        tape.backward(total, params=P.tensors())
        decoder_zero &= all(t.grad is None or not np.any(t.grad) for n, t in P.items()
                            if n.startswith(DECODER_ONLY_PREFIX))

    worst = 0.0
    P = ModelParams.initialize(base)
    for batch in batches:
        total, parts = joint_loss(P, base, batch)
        worst = max(worst, abs(parts.total - (parts.nll + parts.kl + parts.ranking)),
                    abs(float(total.data) - (parts.nll + parts.kl + parts.ranking)))
    ok = decoder_zero and worst <= 1e-6
    verdict(7, ok, f"(0,0,1): decoder-only grads exactly zero on {len(batches)} batches: {decoder_zero}; "
                   f"(1,1,1): max |total - sum| {worst:.1e} (<= 1e-6)")


# --- 8. persistence ----------------------------------------------------------------------------------

def test_c8_persistence(verdict):
    raw = make_synthetic_corpus(12, seed=2)
    vocab = Vocabulary.from_pairs(raw, 1000)
    pairs, _ = encode_pairs(raw, vocab)
    targets, _ = build_word_targets(pairs)
    cfg = ModelConfig(d=8, emb_size=8, hidden_size=12, vocab_size=len(vocab), lr=0.01, seed=3)
    with precision("float32"):
        straight = Trainer(cfg, pairs, targets, batch_size=4)
        straight.train(3)
        blob_straight = dumps(Checkpoint(cfg, straight.params, straight.epoch, straight.adam_state))

        first = Trainer(cfg, pairs, targets, batch_size=4)
        first.train(2)
        ckpt = loads(dumps(Checkpoint(cfg, first.params, first.epoch, first.adam_state)))
        resumed = Trainer(cfg, pairs, targets, batch_size=4, params=ckpt.params, adam_state=ckpt.adam,
                          epoch=ckpt.epoch)
        resumed.train(3)
        blob_resumed = dumps(Checkpoint(cfg, resumed.params, resumed.epoch, resumed.adam_state))
        ckpt_rt = dumps(loads(blob_straight)) == blob_straight

        model = SemanticSearchModel(cfg, straight.params)
        index = index_from_vectors([str(i) for i in range(len(pairs))],
                                   model.project_responses([list(p.response) for p in pairs]),
                                   AnnConfig(n_trees=8, seed=3))
    blob = dumps_index(index)
    back = loads_index(blob)
    idx_rt = dumps_index(back) == blob and np.array_equal(back.vectors, index.vectors)
    q = index.vectors[0].astype(np.float64)
    idx_rt &= np.array_equal(back.search_exact(q, 5).scores, index.search_exact(q, 5).scores)
    resume_eq = blob_resumed == blob_straight
    ok = ckpt_rt and idx_rt and resume_eq
    verdict(8, ok, f"checkpoint round trip bit-exact: {ckpt_rt}; index round trip bit-exact: {idx_rt}; "
                   f"resume after epoch 2 equals uninterrupted epoch 3: {resume_eq}")


# --- 9 and 10. CLI pipeline --------------------------------------------------------------------------

PIPELINE_INI = """\
[model]
d = 16
emb_size = 16
hidden_size = 24
lr = 0.005
[train]
epochs = 3
batch_size = 8
[ann]
n_trees = 50
[eval]
skipgram_epochs = 2
[bench]
pool_size = 10000
[paths]
corpus = {corpus}
work_dir = work
"""


def _pipeline(root: Path, corpus: Path, steps, monkeypatch) -> Path:
    root.mkdir(parents=True, exist_ok=True)
    monkeypatch.chdir(root)
    (root / "run.ini").write_text(PIPELINE_INI.format(corpus=corpus))
    for step in steps:
        code = main(["--config", "run.ini", "--quiet", *step])
        assert code == 0, (step, code)
    return root / "work"


@pytest.fixture(scope="module")
def corpus_file(tmp_path_factory):
    path = tmp_path_factory.mktemp("corpus") / "corpus.tsv"
    path.write_text(write_corpus(make_synthetic_corpus(40, seed=5)))
    return path


def test_c9_latency_harness(tmp_path, corpus_file, monkeypatch, verdict):
    start = time.perf_counter()
    work = _pipeline(tmp_path, corpus_file, [["prepare"], ["train", "--epochs", "1"], ["bench"]], monkeypatch)
    elapsed = time.perf_counter() - start
    table = LatencyTable.parse((work / "latency.tsv").read_text())
    ks = list(range(10, 200, 20))
    shape_ok = table.ks == ks and table.engines == ["exact", "ann", "keyword"]
    positive = all(v > 0 for cell in table.cells.values() for v in cell)
    figure = (work / "latency.png").exists()
    order = {k: sorted(table.engines, key=lambda e: table.cells[(k, e)][0]) for k in (10, 50, 190)}
    ok = shape_ok and positive and figure and elapsed < 600
    verdict(9, ok, f"K {ks[0]}..{ks[-1]} x {table.engines} over a 10000-item pool, all values > 0: {positive}; "
                   f"{elapsed:.1f}s (< 600s); fastest-first mean order (reported only): {order}")


def test_c10_pipeline_determinism(tmp_path, corpus_file, monkeypatch, verdict):
    steps = [["prepare"], ["train"], ["index"], ["eval"]]
    snaps = []
    for name in ("a", "b"):
        work = _pipeline(tmp_path / name, corpus_file, steps, monkeypatch)
        snaps.append({p.relative_to(work).as_posix(): p.read_bytes() for p in sorted(work.rglob("*")) if p.is_file()})
    same_names = snaps[0].keys() == snaps[1].keys()
    differing = sorted(n for n in snaps[0] if snaps[1].get(n) != snaps[0][n])
    ok = same_names and not differing and len(snaps[0]) >= 10
    verdict(10, ok, f"{len(snaps[0])} artifacts compared across two runs, differing: {differing or 'none'}")
