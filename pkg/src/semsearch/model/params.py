"""Model configuration and the named parameter store."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import Iterator

import numpy as np

from ..errors import ContractError
from ..numerics import Tensor, get_dtype, parameter
from ..rng import substream

INIT_SCALE = 0.08


@dataclass(frozen=True)
class ModelConfig:
    d: int = 512
    emb_size: int = 512
    hidden_size: int = 1024
    vocab_size: int = 30000
    maxout_pieces: int = 2
    alpha: float = 1.0
    beta: float = 1.0
    gamma: float = 1.0
    lr: float = 0.0002
    seed: int = 0

    def __post_init__(self):
        for name in ("d", "emb_size", "hidden_size", "vocab_size", "maxout_pieces"):
            if getattr(self, name) < 1:
                raise ContractError(f"{name} must be positive")
        if self.vocab_size < 5:
            raise ContractError("vocab_size must exceed the 4 reserved tokens")
        if min(self.alpha, self.beta, self.gamma) < 0:
            raise ContractError("loss weights must be non-negative")

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, values: dict) -> "ModelConfig":
        fields = {f.name: f.type for f in dataclasses.fields(cls)}
        unknown = set(values) - set(fields)
        if unknown:
            raise ContractError(f"unknown model config keys: {sorted(unknown)}")
        return cls(**values)

    def architecture_diff(self, other: "ModelConfig") -> dict[str, tuple]:
        """Fields that change parameter shapes and differ between the two configs."""
        keys = ("d", "emb_size", "hidden_size", "vocab_size", "maxout_pieces")
        return {k: (getattr(self, k), getattr(other, k)) for k in keys if getattr(self, k) != getattr(other, k)}


def _gru_shapes(prefix: str, n_in: int, n_h: int) -> list[tuple[str, tuple[int, ...]]]:
    return [
        (f"{prefix}.w_x", (n_in, 3 * n_h)),
        (f"{prefix}.w_hrz", (n_h, 2 * n_h)),
        (f"{prefix}.w_hn", (n_h, n_h)),
        (f"{prefix}.b", (3 * n_h,)),
    ]


def parameter_shapes(cfg: ModelConfig) -> list[tuple[str, tuple[int, ...]]]:
    """Ordered (name, shape) layout of every learnable tensor.

    One embedding table feeds the encoder, the decoder input and (transposed)
    the decoder output layer. ``predictor.W`` doubles as the matcher's
    response-word embedding table.
    """
    V, E, H, d, k = cfg.vocab_size, cfg.emb_size, cfg.hidden_size, cfg.d, cfg.maxout_pieces
    shapes = [("embedding", (V, E))]
    shapes += _gru_shapes("encoder.fwd", E, H)
    shapes += _gru_shapes("encoder.bwd", E, H)
    shapes += _gru_shapes("encoder.top", 2 * H, H)
    shapes += _gru_shapes("decoder.gru1", E, H)
    shapes += [
        ("decoder.attn.w_query", (H, H)),
        ("decoder.attn.w_key", (H, H)),
        ("decoder.attn.v", (H, 1)),
    ]
    shapes += _gru_shapes("decoder.gru2", 2 * H, H)
    shapes += [
        ("decoder.maxout.w", (2 * H + E, k * E)),
        ("decoder.maxout.b", (k * E,)),
        ("decoder.out_bias", (V,)),
        ("predictor.U", (k * d, E + H)),
        ("predictor.b", (k * d,)),
        ("predictor.W", (V, d)),
    ]
    shapes += _gru_shapes("matcher", d, d)
    return shapes


# Used only by the Seq2Seq task; receive no gradient when alpha == 0.
DECODER_ONLY_PREFIX = "decoder."


class ModelParams:
    """Ordered mapping from parameter name to :class:`Tensor`."""

    def __init__(self, tensors: dict[str, Tensor]):
        self._tensors = dict(tensors)

    @classmethod
    def initialize(cls, cfg: ModelConfig) -> "ModelParams":
        rng = substream(cfg.seed, "init")
        dtype = get_dtype()
        tensors = {}
        for name, shape in parameter_shapes(cfg):
            values = rng.uniform(-INIT_SCALE, INIT_SCALE, size=shape).astype(dtype)
            tensors[name] = parameter(values, name=name)
        return cls(tensors)

    def __getitem__(self, name: str) -> Tensor:
        return self._tensors[name]

    def __contains__(self, name: str) -> bool:
        return name in self._tensors

    def __iter__(self) -> Iterator[str]:
        return iter(self._tensors)

    def __len__(self) -> int:
        return len(self._tensors)

    def items(self):
        return self._tensors.items()

    def tensors(self) -> list[Tensor]:
        return list(self._tensors.values())

    def as_dict(self) -> dict[str, Tensor]:
        return dict(self._tensors)

    def gru(self, prefix: str) -> dict[str, Tensor]:
        return {k: self._tensors[f"{prefix}.{k}"] for k in ("w_x", "w_hrz", "w_hn", "b")}

    @property
    def word_embedding(self) -> Tensor:
        return self._tensors["predictor.W"]

    def num_parameters(self) -> int:
        return int(sum(t.size for t in self._tensors.values()))

    def copy(self) -> "ModelParams":
        return ModelParams({n: parameter(t.data.copy(), name=n) for n, t in self._tensors.items()})


def count_parameters(cfg: ModelConfig) -> int:
    return int(sum(np.prod(shape) for _, shape in parameter_shapes(cfg)))
