"""The multi-task network: Seq2Seq encoder/decoder, Word Predictor, Matching head, trainer."""

from .api import SemanticSearchModel
from .checkpoint import Checkpoint, dumps, load_checkpoint, loads, save_checkpoint
from .network import (
    LossBreakdown,
    cosine,
    decode_teacher_forced,
    embed_response,
    encode_query,
    first_step_distribution,
    first_step_topk,
    greedy_decode,
    joint_loss,
    kl_loss,
    nll_loss,
    predict_distribution,
    predict_topk,
    predict_words,
    project_query,
    project_response,
    ranking_loss,
    top_k_ids,
)
from .params import DECODER_ONLY_PREFIX, ModelConfig, ModelParams, count_parameters, parameter_shapes
from .trainer import EpochLog, Trainer, train

__all__ = [
    "Checkpoint", "DECODER_ONLY_PREFIX", "EpochLog", "LossBreakdown", "ModelConfig", "ModelParams",
    "SemanticSearchModel", "Trainer", "cosine", "count_parameters", "decode_teacher_forced", "dumps",
    "embed_response", "encode_query", "first_step_distribution", "first_step_topk", "greedy_decode",
    "joint_loss", "kl_loss", "load_checkpoint", "loads", "nll_loss", "parameter_shapes",
    "predict_distribution", "predict_topk", "predict_words", "project_query", "project_response",
    "ranking_loss", "save_checkpoint", "top_k_ids", "train",
]
