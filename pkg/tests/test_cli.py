import json
import time
from pathlib import Path

import pytest

from semsearch.cli import EXIT_DATA, EXIT_OK, EXIT_USAGE, main, parse_ground_truth
from semsearch.data import make_synthetic_corpus, parse_targets, write_corpus
from semsearch.errors import DataError
from semsearch.eval import EvalReport, LatencyTable
from semsearch.index import load_index
from semsearch.model import EpochLog, load_checkpoint

TOY_INI = """\
[model]
d = 16
emb_size = 16
hidden_size = 24
lr = 0.01
[train]
epochs = 1
batch_size = 8
[ann]
n_trees = 5
[eval]
cov_ks = 10
skipgram_epochs = 1
[bench]
ks = 10, 30
runs = 5
warmup = 1
n_queries = 3
pool_size = 300
[paths]
corpus = corpus.tsv
"""


@pytest.fixture
def ws(tmp_path, monkeypatch):
    """Work directory with an 8-pair corpus and a toy-dimension config."""
    monkeypatch.chdir(tmp_path)
    (tmp_path / "corpus.tsv").write_text(write_corpus(make_synthetic_corpus(8, seed=0)))
    (tmp_path / "toy.ini").write_text(TOY_INI)
    return tmp_path


def cli(*args):
    return main(["--config", "toy.ini", "--quiet", *args])


def snapshot(root: Path):
    return {p.relative_to(root).as_posix(): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


# --- prepare -----------------------------------------------------------------------------------------

def test_prepare_outputs(ws):
    assert cli("prepare") == EXIT_OK
    work = ws / "work"
    vocab = (work / "vocab.txt").read_text().splitlines()
    assert vocab[:4] == ["<pad>", "<unk>", "<bos>", "<eos>"]
    train = [ln.split("\t") for ln in (work / "train.tsv").read_text().splitlines()]
    observed = {t for q, r in train for t in (q + " " + r).split()}
    assert set(vocab[4:]) == observed
    manifest = json.loads((work / "manifest.json").read_text())
    assert manifest["pairs"] == 8 and manifest["malformed"] == 0
    assert manifest["train_pairs"] + manifest["test_pairs"] == 8
    targets = parse_targets((work / "targets.tsv").read_text())
    assert targets and all(abs(sum(t.probs) - 1) <= 1e-9 for t in targets.values())


def test_prepare_deterministic(ws):
    cli("prepare")
    first = snapshot(ws / "work")
    cli("prepare")
    assert snapshot(ws / "work") == first
    assert cli("--seed", "1", "--work-dir", "other", "prepare") == EXIT_OK
    assert (ws / "other" / "train.tsv").read_bytes() != first["train.tsv"] or \
        (ws / "other" / "test.tsv").read_bytes() != first["test.tsv"]


def test_prepare_counts_malformed(ws):
    text = (ws / "corpus.tsv").read_text() + "no tab here\n"
    (ws / "corpus.tsv").write_text(text)
    assert cli("prepare") == EXIT_OK
    manifest = json.loads((ws / "work" / "manifest.json").read_text())
    assert manifest["malformed"] == 1 and manifest["pairs"] == 8


def test_prepare_empty_corpus_leaves_nothing(ws):
    (ws / "corpus.tsv").write_text("")
    assert cli("prepare") == EXIT_DATA
    assert not (ws / "work").exists()


def test_prepare_missing_corpus(ws):
    assert cli("prepare", "nope.tsv") == EXIT_DATA


# --- train -------------------------------------------------------------------------------------------

def test_train_one_epoch_smoke(ws):
    cli("prepare")
    start = time.perf_counter()
    assert cli("train") == EXIT_OK
    assert time.perf_counter() - start < 30
    assert [p.name for p in (ws / "work" / "checkpoints").iterdir()] == ["epoch_001.ckpt"]
    assert load_checkpoint(ws / "work" / "checkpoint.ckpt").epoch == 1


def test_train_log_invariant(ws):
    cli("prepare")
    cli("train", "--epochs", "3")
    logs = [EpochLog.parse(ln) for ln in (ws / "work" / "train.log").read_text().splitlines()]
    assert [l.epoch for l in logs] == [1, 2, 3]
    for l in logs:
        b = l.losses
        assert abs(b.total - (b.nll + b.kl + b.ranking)) <= 1e-6


def test_resume_matches_uninterrupted(ws):
    cli("prepare")
    assert cli("--work-dir", "work", "train", "--epochs", "3") == EXIT_OK
    straight = snapshot(ws / "work")
    # same prepared data, interrupted after epoch 2
    assert cli("--work-dir", "split", "prepare") == EXIT_OK
    assert cli("--work-dir", "split", "train", "--epochs", "2") == EXIT_OK
    assert cli("--work-dir", "split", "train", "--epochs", "3", "--resume") == EXIT_OK
    resumed = snapshot(ws / "split")
    for name in ("checkpoint.ckpt", "checkpoints/epoch_003.ckpt", "train.log"):
        assert resumed[name] == straight[name], name


def test_resume_refuses_mismatch(ws, capsys):
    cli("prepare")
    cli("train")
    (ws / "big.ini").write_text(TOY_INI.replace("d = 16", "d = 20"))
    code = main(["--config", "big.ini", "--quiet", "train", "--resume"])
    assert code == EXIT_DATA
    assert "d: checkpoint 16 vs config 20" in capsys.readouterr().err


def test_train_without_prepare(ws):
    assert cli("train") == EXIT_DATA


# --- index and query ---------------------------------------------------------------------------------

@pytest.fixture
def trained(ws):
    cli("prepare")
    cli("train", "--epochs", "150")
    return ws


def test_index_count_and_query_first(trained, capsys):
    work = trained / "work"
    lines = (work / "responses.txt").read_text().splitlines()
    resp = trained / "extra.txt"
    resp.write_text("\n".join(lines) + "\n\n   \n")
    assert cli("index", str(resp)) == EXIT_OK
    assert len(load_index(work / "index.bin")) == len(lines)

    capsys.readouterr()
    for q, r in (ln.split("\t") for ln in (work / "train.tsv").read_text().splitlines()):
        assert cli("query", q, "-k", "3") == EXIT_OK
        out = capsys.readouterr().out.splitlines()
        assert out[0].split("\t")[2] == r
        scores = [float(ln.split("\t")[1]) for ln in out]
        assert scores == sorted(scores, reverse=True)


def test_index_deterministic(trained):
    cli("index")
    first = (trained / "work" / "index.bin").read_bytes()
    cli("index")
    assert (trained / "work" / "index.bin").read_bytes() == first


def test_query_ann_full_budget_equals_exact(trained, capsys):
    cli("index")
    n = len(load_index(trained / "work" / "index.bin"))
    capsys.readouterr()
    cli("query", "q0x1 q0x2", "-k", str(n))
    exact = capsys.readouterr().out
    cli("query", "q0x1 q0x2", "-k", str(n), "--mode", "ann", "--budget", str(n))
    assert capsys.readouterr().out == exact


def test_query_single_response_and_oov(ws, capsys):
    cli("prepare")
    cli("train")
    (ws / "one.txt").write_text("r0y1 r0y2\n")
    cli("index", "one.txt")
    capsys.readouterr()
    assert cli("query", "zzz unseen words", "-k", "1") == EXIT_OK
    out = capsys.readouterr().out.splitlines()
    assert len(out) == 1 and out[0].startswith("1\t") and out[0].endswith("\tr0y1 r0y2")


def test_query_missing_index(ws):
    cli("prepare")
    cli("train")
    assert cli("query", "hello") != EXIT_OK


def test_index_empty_response_file(ws):
    cli("prepare")
    cli("train")
    (ws / "empty.txt").write_text("\n\n")
    assert cli("index", "empty.txt") == EXIT_DATA


# --- eval and bench ----------------------------------------------------------------------------------

def test_eval_memorized_recall(trained):
    cli("index")
    assert cli("eval", "--split", "train") == EXIT_OK
    work = trained / "work"
    text = (work / "report.tsv").read_text()
    rep = EvalReport.parse(text)
    assert rep.get("recall_exact", 1) == 1.0
    assert rep.format() == text
    assert (work / "report_recall.png").exists() and (work / "report_coverage.png").exists()


def test_eval_ground_truth_id_missing(trained, capsys):
    cli("index")
    gt = trained / "work" / "groundtruth_test.tsv"
    gt.write_text(gt.read_text() + "some query\t998,999\n")
    assert cli("eval") == EXIT_DATA
    assert "[998, 999]" in capsys.readouterr().err


def test_parse_ground_truth():
    assert parse_ground_truth("a b\t1,3\nc\t0\n") == (["a b", "c"], [frozenset({1, 3}), frozenset({0})])
    with pytest.raises(DataError):
        parse_ground_truth("no tab\n")
    with pytest.raises(DataError):
        parse_ground_truth("q\tx,1\n")


def test_bench_rows(ws):
    cli("prepare")
    cli("train")
    cli("index")
    assert cli("bench") == EXIT_OK
    table = LatencyTable.parse((ws / "work" / "latency.tsv").read_text())
    assert table.ks == [10, 30]
    assert table.engines == ["exact", "ann", "keyword"]
    assert all(v > 0 for cell in table.cells.values() for v in cell)
    assert (ws / "work" / "latency.png").exists()


# --- usage -------------------------------------------------------------------------------------------

@pytest.mark.parametrize("argv", [[], ["frobnicate"], ["query"], ["query", "x", "-k", "two"],
                                  ["--seed", "x", "prepare"]])
def test_usage_errors(ws, argv):
    assert main(argv) == EXIT_USAGE


def test_unknown_config_key_is_usage_error(ws):
    (ws / "bad.ini").write_text("[model]\ndepth = 3\n")
    assert main(["--config", "bad.ini", "prepare"]) == EXIT_USAGE


def test_flags_after_subcommand(ws):
    assert main(["prepare", "--config", "toy.ini", "--quiet", "--work-dir", "w2"]) == EXIT_OK
    assert (ws / "w2" / "vocab.txt").exists()
