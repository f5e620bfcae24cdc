"""Evaluation report: one metric per line as ``name<TAB>k<TAB>value``."""

from __future__ import annotations

from dataclasses import dataclass, field

from ..errors import FormatError

NO_K = "-"


@dataclass
class EvalReport:
    rows: list[tuple[str, int | None, float]] = field(default_factory=list)

    def add(self, name: str, k: int | None, value: float) -> None:
        self.rows.append((name, k, float(value)))

    def get(self, name: str, k: int | None = None) -> float:
        for n, kk, v in self.rows:
            if n == name and kk == k:
                return v
        raise KeyError((name, k))

    def series(self, name: str) -> list[tuple[int, float]]:
        return [(k, v) for n, k, v in self.rows if n == name and k is not None]

    def format(self) -> str:
        return "".join(f"{n}\t{NO_K if k is None else k}\t{v:.4f}\n" for n, k, v in self.rows)

    @classmethod
    def parse(cls, text: str) -> "EvalReport":
        report = cls()
        for n, line in enumerate(text.splitlines(), start=1):
            parts = line.split("\t")
            if len(parts) != 3:
                raise FormatError(f"report line {n}: expected 3 fields")
            name, k, value = parts
            try:
                report.add(name, None if k == NO_K else int(k), float(value))
            except ValueError:
                raise FormatError(f"report line {n}: bad number") from None
        return report

    def rounded(self) -> "EvalReport":
        """Values at the precision the text format keeps."""
        return EvalReport([(n, k, round(v, 4)) for n, k, v in self.rows])
