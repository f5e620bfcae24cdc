from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from ..data import QRPair, WordTargets, make_batches, make_examples
from ..errors import ContractError, NumericError
from ..numerics import Adam, AdamState, Tape
from ..rng import substream
from .network import LossBreakdown, joint_loss, weighted_total
from .params import ModelConfig, ModelParams

logger = logging.getLogger(__name__)


@dataclass
class EpochLog:
    epoch: int
    losses: LossBreakdown

    def line(self) -> str:
        l = self.losses
        return f"{self.epoch}\t{l.nll:.10f}\t{l.kl:.10f}\t{l.ranking:.10f}\t{l.total:.10f}\n"

    @classmethod
    def parse(cls, line: str) -> "EpochLog":
        e, nll, kl, r, total = line.rstrip("\n").split("\t")
        return cls(int(e), LossBreakdown(float(nll), float(kl), float(r), float(total)))


@dataclass
class Trainer:
    """Joint optimisation of the three tasks with one Adam step per batch.

    Shuffling and negative sampling for epoch ``e`` come from substreams
    keyed by ``(seed, e)``, so a run resumed from a checkpoint taken after
    epoch ``e`` repeats exactly what an uninterrupted run would do next.
    """

    cfg: ModelConfig
    pairs: Sequence[QRPair]
    targets: dict[tuple[int, ...], WordTargets]
    batch_size: int = 32
    params: ModelParams | None = None
    adam_state: AdamState | None = None
    epoch: int = 0
    history: list[EpochLog] = field(default_factory=list)

    def __post_init__(self):
        if not self.pairs:
            raise ContractError("cannot train on an empty corpus")
        if self.params is None:
            self.params = ModelParams.initialize(self.cfg)
        self.optimizer = Adam(self.params.as_dict(), lr=self.cfg.lr, state=self.adam_state)
        self.adam_state = self.optimizer.state

    def run_epoch(self) -> EpochLog:
        e = self.epoch + 1
        examples = make_examples(self.pairs, self.targets, substream(self.cfg.seed, "negatives", e))
        if not examples:
            raise ContractError("no training example has word targets")
        batches = make_batches(examples, self.batch_size, substream(self.cfg.seed, "batches", e))
        sums = np.zeros(3)
        n_batches = 0
        params = self.params.tensors()
        for idx, batch in enumerate(batches):
            try:
                with Tape() as tape:
                    total, parts = joint_loss(self.params, self.cfg, batch)
            except NumericError as exc:
                raise NumericError(f"epoch {e}, batch {idx}: {exc}") from exc
            if not all(math.isfinite(v) for v in parts.as_tuple()):
                raise NumericError(f"non-finite loss at epoch {e}, batch {idx}: {parts}")
            tape.backward(total, params=params)
            self.optimizer.step()
            sums += (parts.nll, parts.kl, parts.ranking)
            n_batches += 1
        nll, kl, r = (sums / n_batches).tolist()
        log = EpochLog(e, LossBreakdown(nll, kl, r, weighted_total(self.cfg, nll, kl, r)))
        self.epoch = e
        self.history.append(log)
        logger.info("epoch %d nll=%.4f kl=%.4f rank=%.4f total=%.4f", e, nll, kl, r, log.losses.total)
        return log

    def train(self, epochs: int, on_epoch: Callable[["Trainer", EpochLog], None] | None = None) -> list[EpochLog]:
        """Run until ``self.epoch == epochs``."""
        logs = []
        while self.epoch < epochs:
            log = self.run_epoch()
            logs.append(log)
            if on_epoch is not None:
                on_epoch(self, log)
        return logs


def train(pairs: Sequence[QRPair], targets: dict, cfg: ModelConfig, epochs: int,
          batch_size: int = 32) -> tuple[ModelParams, list[EpochLog]]:
    trainer = Trainer(cfg, pairs, targets, batch_size=batch_size)
    logs = trainer.train(epochs)
    return trainer.params, logs
