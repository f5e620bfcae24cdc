"""
Forward structures of the four-part network and its three losses.

All functions work on padded id matrices plus true lengths. Inputs are first
trimmed to the longest true length, and every padded position is masked with
``where`` so pad contents and extra trailing padding cannot change a loss.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from ..data import BOS, EOS, Batch, mask_from_lengths
from ..errors import ContractError, NumericWarning
from ..numerics import Tensor, get_dtype, no_tape, ops
from .params import ModelConfig, ModelParams

KL_FLOOR = 1e-12


def _trim(ids: np.ndarray, lengths: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    ids = np.asarray(ids, dtype=np.int64)
    lengths = np.asarray(lengths, dtype=np.int64)
    if ids.ndim != 2 or lengths.shape != (ids.shape[0],):
        raise ContractError(f"expected ids[b, t] and lengths[b]; got {ids.shape} and {lengths.shape}")
    if lengths.size and lengths.min() < 1:
        raise ContractError("empty sequence")
    width = int(lengths.max())
    ids = ids[:, :width]
    return ids, lengths, mask_from_lengths(lengths, width)


def _run_gru(x_proj: Tensor, mask: np.ndarray, p: dict[str, Tensor], reverse: bool = False) -> list[Tensor]:
    """Masked GRU over axis 1 of the projected inputs; returns the state at every step.

    Padded steps carry the previous state forward unchanged.
    """
    b, T = mask.shape
    h = ops.zeros((b, p["w_hn"].shape[0]))
    states: list[Tensor | None] = [None] * T
    steps = range(T - 1, -1, -1) if reverse else range(T)
    for t in steps:
        new = ops.gru_step(x_proj[:, t], h, p["w_hrz"], p["w_hn"])
        h = ops.where(mask[:, t:t + 1], new, h)
        states[t] = h
    return states


def _project(x: Tensor, p: dict[str, Tensor]) -> Tensor:
    return ops.add(ops.matmul(x, p["w_x"]), p["b"])


def encode_query(P: ModelParams, q_ids, q_len) -> tuple[Tensor, Tensor, np.ndarray]:
    """Embed and encode queries; returns (embeddings[b,n,E], states[b,n,H], mask[b,n])."""
    q_ids, _, mask = _trim(q_ids, q_len)
    emb = ops.embedding_lookup(P["embedding"], q_ids)
    fwd = _run_gru(_project(emb, P.gru("encoder.fwd")), mask, P.gru("encoder.fwd"))
    bwd = _run_gru(_project(emb, P.gru("encoder.bwd")), mask, P.gru("encoder.bwd"), reverse=True)
    s0 = ops.concat([ops.stack(fwd, axis=1), ops.stack(bwd, axis=1)], axis=-1)
    top = _run_gru(_project(s0, P.gru("encoder.top")), mask, P.gru("encoder.top"))
    return emb, ops.stack(top, axis=1), mask


@dataclass
class DecoderState:
    h1: Tensor
    h2: Tensor


def _attention_keys(P: ModelParams, states: Tensor) -> Tensor:
    return ops.matmul(states, P["decoder.attn.w_key"])


def decoder_step(P: ModelParams, cfg: ModelConfig, keys: Tensor, states: Tensor, q_mask: np.ndarray,
                 prev_emb: Tensor, x1: Tensor, state: DecoderState) -> tuple[Tensor, DecoderState, Tensor]:
    """One decoding step; returns (maxout output t_i[b,E], new state, attention weights[b,n]).

    ``x1`` is the first GRU's projected input for ``prev_emb``.
    """
    b, n = q_mask.shape
    g1, g2 = P.gru("decoder.gru1"), P.gru("decoder.gru2")
    h1 = ops.gru_step(x1, state.h1, g1["w_hrz"], g1["w_hn"])
    query = ops.reshape(ops.matmul(h1, P["decoder.attn.w_query"]), (b, 1, -1))
    energy = ops.tanh(ops.add(keys, query))
    scores = ops.reshape(ops.matmul(energy, P["decoder.attn.v"]), (b, n))
    alpha = ops.softmax(ops.where(q_mask, scores, -np.inf))
    context = ops.reshape(ops.matmul(ops.reshape(alpha, (b, 1, n)), states), (b, -1))
    h2 = ops.gru_step(_project(ops.concat([h1, context], axis=-1), g2), state.h2, g2["w_hrz"], g2["w_hn"])
    pre = ops.add(ops.matmul(ops.concat([h2, prev_emb, context], axis=-1), P["decoder.maxout.w"]),
                  P["decoder.maxout.b"])
    return ops.maxout(pre, cfg.maxout_pieces), DecoderState(h1, h2), alpha


def _initial_state(P: ModelParams, b: int) -> DecoderState:
    H = P["decoder.gru1.w_hn"].shape[0]
    return DecoderState(ops.zeros((b, H)), ops.zeros((b, H)))


def output_logits(P: ModelParams, t: Tensor) -> Tensor:
    return ops.add(ops.matmul(t, ops.transpose(P["embedding"])), P["decoder.out_bias"])


def decode_teacher_forced(P: ModelParams, cfg: ModelConfig, states: Tensor, q_mask: np.ndarray,
                          dec_in, dec_len, return_attention: bool = False):
    """Per-step logits[b, m, V] for BOS-prefixed decoder inputs."""
    dec_in, _, _ = _trim(dec_in, dec_len)
    b, m = dec_in.shape
    keys = _attention_keys(P, states)
    emb = ops.embedding_lookup(P["embedding"], dec_in)
    x1_all = _project(emb, P.gru("decoder.gru1"))
    state = _initial_state(P, b)
    outs, alphas = [], []
    for i in range(m):
        t, state, alpha = decoder_step(P, cfg, keys, states, q_mask, emb[:, i], x1_all[:, i], state)
        outs.append(t)
        alphas.append(alpha.data)
    logits = output_logits(P, ops.stack(outs, axis=1))
    if return_attention:
        return logits, np.stack(alphas, axis=1)
    return logits


def nll_loss(logits: Tensor, targets, mask) -> Tensor:
    """Mean negative log-likelihood over unmasked positions."""
    targets = np.asarray(targets, dtype=np.int64)
    mask = np.asarray(mask, dtype=bool)
    width = logits.shape[1]
    targets, mask = targets[:, :width], mask[:, :width]
    count = int(mask.sum())
    if count == 0:
        raise ContractError("nll_loss with no unmasked positions")
    picked = ops.pick(ops.log_softmax(logits), np.where(mask, targets, 0))
    return ops.mul(ops.sum(ops.where(mask, picked, 0.0)), -1.0 / count)


def predict_words(P: ModelParams, cfg: ModelConfig, emb: Tensor, states: Tensor,
                  q_mask: np.ndarray) -> tuple[Tensor, Tensor]:
    """Query vector u[b, d] and predicted word distribution[b, V]."""
    x = ops.concat([ops.masked_mean(emb, q_mask), ops.masked_mean(states, q_mask)], axis=-1)
    pre = ops.add(ops.matmul(x, ops.transpose(P["predictor.U"])), P["predictor.b"])
    u = ops.maxout(pre, cfg.maxout_pieces)
    w_tilde = ops.softmax(ops.matmul(u, ops.transpose(P["predictor.W"])))
    return u, w_tilde


def kl_loss(w_tilde: Tensor, targets: np.ndarray) -> Tensor:
    """Batch mean of KL(targets || w_tilde), summed over the targets' support.

    Predicted probabilities below 1e-12 on the support are clamped and
    reported with a :class:`NumericWarning`.
    """
    targets = np.asarray(targets, dtype=get_dtype())
    if targets.shape != w_tilde.shape:
        raise ContractError(f"targets {targets.shape} do not match prediction {w_tilde.shape}")
    support = targets > 0
    clamped = int(np.count_nonzero(support & (w_tilde.data < KL_FLOOR)))
    if clamped:
        warnings.warn(f"kl_loss: {clamped} support probabilities clamped at {KL_FLOOR}", NumericWarning)
    entropy_term = float(np.sum(np.where(support, targets * np.log(np.where(support, targets, 1.0)), 0.0)))
    cross = ops.sum(ops.mul(Tensor(targets), ops.log(ops.clamp_min(w_tilde, KL_FLOOR))))
    b = targets.shape[0]
    return ops.mul(ops.sub(entropy_term, cross), 1.0 / b)


def embed_response(P: ModelParams, r_ids, r_len) -> Tensor:
    """Final matcher GRU state[b, d] over rows of the shared word matrix W."""
    r_ids, _, mask = _trim(r_ids, r_len)
    emb = ops.embedding_lookup(P.word_embedding, r_ids)
    states = _run_gru(_project(emb, P.gru("matcher")), mask, P.gru("matcher"))
    return states[-1]


def cosine(a: Tensor, b: Tensor) -> Tensor:
    return ops.sum(ops.mul(ops.l2_normalize(a), ops.l2_normalize(b)), axis=-1)


def ranking_loss(v_q: Tensor, v_pos: Tensor, v_neg: Tensor) -> Tensor:
    """Batch mean of max(0, 1 - cos(q, r+) + cos(q, r-))."""
    hinge = ops.relu(ops.add(ops.sub(1.0, cosine(v_q, v_pos)), cosine(v_q, v_neg)))
    return ops.mean(hinge)


@dataclass
class LossBreakdown:
    nll: float
    kl: float
    ranking: float
    total: float

    def as_tuple(self) -> tuple[float, float, float, float]:
        return self.nll, self.kl, self.ranking, self.total


def weighted_total(cfg: ModelConfig, nll: float, kl: float, ranking: float) -> float:
    return cfg.alpha * nll + cfg.beta * kl + cfg.gamma * ranking


def joint_loss(P: ModelParams, cfg: ModelConfig, batch: Batch) -> tuple[Tensor, LossBreakdown]:
    """Weighted sum of the three task losses on one batch, sharing the encoder pass.

    A task whose weight is zero is still evaluated and reported, but outside
    the tape, so it contributes no gradient.
    """
    emb, states, q_mask = encode_query(P, batch.query, batch.query_len)

    def seq2seq():
        logits = decode_teacher_forced(P, cfg, states, q_mask, batch.decoder_in, batch.decoder_len)
        return nll_loss(logits, batch.decoder_out, batch.decoder_mask)

    u, w_tilde = predict_words(P, cfg, emb, states, q_mask)

    def word():
        return kl_loss(w_tilde, batch.dense_targets(cfg.vocab_size, get_dtype()))

    def match():
        v_pos = embed_response(P, batch.positive, batch.positive_len)
        v_neg = embed_response(P, batch.negative, batch.negative_len)
        return ranking_loss(u, v_pos, v_neg)

    parts = []
    for weight, fn in ((cfg.alpha, seq2seq), (cfg.beta, word), (cfg.gamma, match)):
        if weight == 0:
            with no_tape():
                parts.append((weight, fn()))
        else:
            parts.append((weight, fn()))

    total: Tensor | None = None
    for weight, loss in parts:
        if weight == 0:
            continue
        term = ops.mul(loss, float(weight))
        total = term if total is None else ops.add(total, term)
    if total is None:
        total = ops.zeros(())
    values = [float(loss.data) for _, loss in parts]
    breakdown = LossBreakdown(*values, total=weighted_total(cfg, *values))
    return total, breakdown


# -- inference ---------------------------------------------------------------

def project_query(P: ModelParams, cfg: ModelConfig, q_ids, q_len) -> np.ndarray:
    """Unit query vectors phi(q) [b, d]."""
    with no_tape():
        emb, states, mask = encode_query(P, q_ids, q_len)
        u, _ = predict_words(P, cfg, emb, states, mask)
        return ops.l2_normalize(u).data


def project_response(P: ModelParams, r_ids, r_len) -> np.ndarray:
    """Unit response vectors psi(r) [b, d]."""
    with no_tape():
        return ops.l2_normalize(embed_response(P, r_ids, r_len)).data


def predict_distribution(P: ModelParams, cfg: ModelConfig, q_ids, q_len) -> np.ndarray:
    with no_tape():
        emb, states, mask = encode_query(P, q_ids, q_len)
        return predict_words(P, cfg, emb, states, mask)[1].data


def first_step_distribution(P: ModelParams, cfg: ModelConfig, q_ids, q_len) -> np.ndarray:
    """Decoder output distribution[b, V] at the first step (BOS input, zero states)."""
    with no_tape():
        _, states, mask = encode_query(P, q_ids, q_len)
        b = mask.shape[0]
        prev = ops.embedding_lookup(P["embedding"], np.full(b, BOS))
        t, _, _ = decoder_step(P, cfg, _attention_keys(P, states), states, mask, prev,
                               _project(prev, P.gru("decoder.gru1")), _initial_state(P, b))
        return ops.softmax(output_logits(P, t)).data


def top_k_ids(scores: np.ndarray, k: int) -> np.ndarray:
    """Row-wise indices of the k largest values, descending, ties to the lower index."""
    scores = np.atleast_2d(scores)
    n = scores.shape[-1]
    if k > n:
        raise ContractError(f"k={k} exceeds the {n} available entries")
    ids = np.broadcast_to(np.arange(n), scores.shape)
    order = np.lexsort((ids, -scores), axis=-1)
    return order[:, :k]


def first_step_topk(P: ModelParams, cfg: ModelConfig, q_ids, q_len, k: int) -> np.ndarray:
    if k > cfg.vocab_size:
        raise ContractError(f"k={k} exceeds vocabulary size {cfg.vocab_size}")
    return top_k_ids(first_step_distribution(P, cfg, q_ids, q_len), k)


def predict_topk(P: ModelParams, cfg: ModelConfig, q_ids, q_len, k: int) -> np.ndarray:
    if k > cfg.vocab_size:
        raise ContractError(f"k={k} exceeds vocabulary size {cfg.vocab_size}")
    return top_k_ids(predict_distribution(P, cfg, q_ids, q_len), k)


def greedy_decode(P: ModelParams, cfg: ModelConfig, q_ids, q_len, max_len: int = 50) -> list[list[int]]:
    """Argmax decoding until EOS or ``max_len`` tokens; EOS is not included."""
    with no_tape():
        _, states, mask = encode_query(P, q_ids, q_len)
        b = mask.shape[0]
        keys = _attention_keys(P, states)
        state = _initial_state(P, b)
        prev_ids = np.full(b, BOS)
        out: list[list[int]] = [[] for _ in range(b)]
        done = np.zeros(b, dtype=bool)
        for _ in range(max_len):
            prev = ops.embedding_lookup(P["embedding"], prev_ids)
            t, state, _ = decoder_step(P, cfg, keys, states, mask, prev,
                                       _project(prev, P.gru("decoder.gru1")), state)
            logits = output_logits(P, t).data
            prev_ids = top_k_ids(logits, 1)[:, 0]
            for i, tok in enumerate(prev_ids):
                if not done[i]:
                    if tok == EOS:
                        done[i] = True
                    else:
                        out[i].append(int(tok))
            if done.all():
                break
        return out
