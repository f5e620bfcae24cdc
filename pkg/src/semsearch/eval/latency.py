"""Single-threaded wall-clock latency measurement of retrieval engines."""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from ..errors import ContractError, FormatError

STATS = ("mean", "p50", "p95")
DEFAULT_KS = tuple(range(10, 200, 20))

# engine(query_index, k) runs one retrieval
Engine = Callable[[int, int], object]


@dataclass
class LatencyTable:
    """Per (K, engine): mean, median and 95th percentile in microseconds."""

    ks: list[int]
    engines: list[str]
    cells: dict[tuple[int, str], tuple[float, float, float]] = field(default_factory=dict)

    def header(self) -> list[str]:
        return ["K"] + [f"{e}_{s}" for e in self.engines for s in STATS]

    def format(self) -> str:
        lines = ["\t".join(self.header())]
        for k in self.ks:
            vals = [f"{v:.3f}" for e in self.engines for v in self.cells[(k, e)]]
            lines.append("\t".join([str(k)] + vals))
        return "\n".join(lines) + "\n"

    @classmethod
    def parse(cls, text: str) -> "LatencyTable":
        rows = [ln.split("\t") for ln in text.splitlines() if ln]
        if not rows or rows[0][0] != "K" or (len(rows[0]) - 1) % len(STATS):
            raise FormatError("not a latency table")
        engines = []
        for col in rows[0][1::len(STATS)]:
            name, _, stat = col.rpartition("_")
            if stat != STATS[0]:
                raise FormatError(f"unexpected column {col!r}")
            engines.append(name)
        table = cls([], engines)
        if table.header() != rows[0]:
            raise FormatError("latency header columns out of order")
        for row in rows[1:]:
            if len(row) != len(rows[0]):
                raise FormatError(f"row {row[0]!r} has {len(row)} fields")
            k = int(row[0])
            table.ks.append(k)
            vals = [float(x) for x in row[1:]]
            for i, e in enumerate(engines):
                table.cells[(k, e)] = tuple(vals[3 * i:3 * i + 3])
        return table


def summarize(samples_us: Sequence[float]) -> tuple[float, float, float]:
    a = np.asarray(samples_us, dtype=np.float64)
    return float(a.mean()), float(np.percentile(a, 50)), float(np.percentile(a, 95))


def time_engine(engine: Engine, n_queries: int, k: int, runs: int = 100, warmup: int = 10) -> list[float]:
    """Per-call latencies in microseconds, cycling through the fixed query set."""
    if n_queries < 1 or runs < 1:
        raise ContractError("need at least one query and one run")
    for i in range(warmup):
        engine(i % n_queries, k)
    out = []
    for i in range(runs):
        t0 = time.perf_counter_ns()
        engine(i % n_queries, k)
        # clamp: a sub-resolution call must still report a positive latency
        out.append(max(time.perf_counter_ns() - t0, 1) / 1000.0)
    return out


def latency_bench(engines: Mapping[str, Engine], n_queries: int, ks: Sequence[int] = DEFAULT_KS,
                  runs: int = 100, warmup: int = 10) -> LatencyTable:
    table = LatencyTable(list(ks), list(engines))
    for k in ks:
        for name, engine in engines.items():
            table.cells[(k, name)] = summarize(time_engine(engine, n_queries, k, runs, warmup))
    return table
