import dataclasses

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from semsearch.config import RunConfig, load_config, parse_config, render_config
from semsearch.errors import ContractError


def test_defaults_carry_published_hyperparameters():
    cfg = RunConfig()
    m = cfg.model
    assert (m.d, m.emb_size, m.hidden_size, m.vocab_size) == (512, 512, 1024, 30000)
    assert (m.alpha, m.beta, m.gamma, m.lr) == (1.0, 1.0, 1.0, 0.0002)
    assert cfg.ann.n_trees == 400
    assert cfg.bench.ks == tuple(range(10, 200, 20))


def test_render_parse_identity_default():
    cfg = RunConfig()
    assert parse_config(render_config(cfg)) == cfg
    assert render_config(parse_config(render_config(cfg))) == render_config(cfg)


@settings(max_examples=100, deadline=None)
@given(
    seed=st.integers(0, 2**31),
    d=st.integers(1, 2048),
    lr=st.floats(1e-8, 1.0, allow_nan=False),
    beta=st.floats(0, 10, allow_nan=False),
    ks=st.lists(st.integers(1, 500), min_size=1, max_size=6).map(tuple),
    generated=st.booleans(),
    corpus=st.text(alphabet="abc/._-0123456789", max_size=20),
)
def test_render_parse_identity_random(seed, d, lr, beta, ks, generated, corpus):
    cfg = (RunConfig().with_seed(seed)
           .replace("model", d=d, lr=lr, beta=beta)
           .replace("eval", recall_ks=ks, generated=generated)
           .replace("paths", corpus=corpus))
    assert parse_config(render_config(cfg)) == cfg


def test_partial_file_keeps_defaults():
    cfg = parse_config("[model]\nd = 8\n")
    assert cfg.model.d == 8 and cfg.model.hidden_size == 1024 and cfg.train == RunConfig().train


@pytest.mark.parametrize("text,match", [
    ("[model]\ndepth = 3\n", "unknown key"),
    ("[modle]\nd = 3\n", "unknown config sections"),
    ("[model]\nD = 3\n", "unknown key"),
    ("[model]\nd = three\n", "cannot read"),
    ("[eval]\ngenerated = maybe\n", "cannot read"),
    ("d = 3\n", "malformed"),
])
def test_rejects_bad_config(text, match):
    with pytest.raises(ContractError, match=match):
        parse_config(text)


def test_paths_fall_back_to_work_dir():
    cfg = RunConfig().replace("paths", work_dir="out", index="elsewhere/i.bin")
    assert str(cfg.path("vocab")) == "out/vocab.txt"
    assert str(cfg.path("index")) == "elsewhere/i.bin"
    with pytest.raises(ContractError):
        cfg.path("corpus")


def test_model_config_uses_built_vocab_size():
    mc = RunConfig().with_seed(5).model_config(vocab_size=77)
    assert mc.vocab_size == 77 and mc.seed == 5 and mc.d == 512


def test_load_config_file(tmp_path):
    cfg = RunConfig().replace("train", epochs=3)
    path = tmp_path / "c.ini"
    path.write_text(render_config(cfg))
    assert load_config(path) == cfg


def test_sections_are_frozen():
    with pytest.raises(dataclasses.FrozenInstanceError):
        RunConfig().model.d = 3
