"""Corpus files, tokenization and the vocabulary."""

from __future__ import annotations

import logging
import re
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from ..errors import ContractError, FormatError

logger = logging.getLogger(__name__)

PAD, UNK, BOS, EOS = 0, 1, 2, 3
RESERVED = ("<pad>", "<unk>", "<bos>", "<eos>")

_TRAILING_PUNCT = re.compile(r"^(.*?)([.,!?;:]+)$")


def tokenize(text: str) -> list[str]:
    """Lowercase, split on whitespace, and split trailing punctuation into its own tokens."""
    tokens: list[str] = []
    for raw in text.lower().split():
        m = _TRAILING_PUNCT.match(raw)
        if m is None:
            tokens.append(raw)
            continue
        head, punct = m.groups()
        if head:
            tokens.append(head)
        tokens.extend(punct)
    return tokens


@dataclass
class LoadedCorpus:
    pairs: list[tuple[str, str]] = field(default_factory=list)
    malformed: int = 0
    lines: int = 0

    def __len__(self) -> int:
        return len(self.pairs)

    def __iter__(self):
        return iter(self.pairs)


def parse_pair_line(line: str) -> tuple[str, str] | None:
    parts = line.rstrip("\r\n").split("\t")
    if len(parts) != 2 or not parts[0].strip() or not parts[1].strip():
        return None
    return parts[0], parts[1]


def load_corpus(path: str | Path, format: str = "tsv") -> LoadedCorpus:
    """Read one ``query<TAB>response`` pair per line, in file order.

    Malformed lines are skipped and counted; more than half malformed is
    treated as the wrong file format.
    """
    if format != "tsv":
        raise ContractError(f"unsupported corpus format {format!r}")
    corpus = LoadedCorpus()
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            corpus.lines += 1
            pair = parse_pair_line(line)
            if pair is None:
                corpus.malformed += 1
            else:
                corpus.pairs.append(pair)
    if corpus.lines and corpus.malformed * 2 > corpus.lines:
        raise FormatError(f"{path}: {corpus.malformed} of {corpus.lines} lines are malformed")
    if corpus.malformed:
        logger.warning("%s: skipped %d malformed lines", path, corpus.malformed)
    return corpus


def write_corpus(pairs: Iterable[tuple[str, str]]) -> str:
    return "".join(f"{q}\t{r}\n" for q, r in pairs)


class Vocabulary:
    """Token/id mapping with fixed reserved ids PAD=0, UNK=1, BOS=2, EOS=3."""

    def __init__(self, tokens: Sequence[str]):
        if tuple(tokens[:4]) != RESERVED:
            raise FormatError(f"vocabulary must start with reserved tokens {RESERVED}")
        self.itos = list(tokens)
        self.stoi = {t: i for i, t in enumerate(self.itos)}
        if len(self.stoi) != len(self.itos):
            raise FormatError("duplicate token in vocabulary")

    def __len__(self) -> int:
        return len(self.itos)

    def __contains__(self, token: str) -> bool:
        return token in self.stoi

    def __eq__(self, other) -> bool:
        return isinstance(other, Vocabulary) and self.itos == other.itos

    @classmethod
    def build(cls, texts: Iterable[str], max_size: int) -> "Vocabulary":
        """Keep the ``max_size - 4`` most frequent tokens; ties go to the lexicographically smaller."""
        if max_size < 5:
            raise ContractError("max_size must leave room for at least one word after the 4 reserved tokens")
        counts = Counter()
        for text in texts:
            counts.update(tokenize(text))
        for tok in RESERVED:
            counts.pop(tok, None)
        ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
        return cls(list(RESERVED) + [t for t, _ in ranked[: max_size - len(RESERVED)]])

    @classmethod
    def from_pairs(cls, pairs: Iterable[tuple[str, str]], max_size: int) -> "Vocabulary":
        return cls.build((text for pair in pairs for text in pair), max_size)

    def encode(self, tokens: Iterable[str]) -> list[int]:
        return [self.stoi.get(t, UNK) for t in tokens]

    def encode_text(self, text: str, max_len: int | None = None) -> list[int]:
        ids = self.encode(tokenize(text))
        return ids if max_len is None else ids[:max_len]

    def decode(self, ids: Iterable[int]) -> list[str]:
        return [self.itos[i] for i in ids]

    def dumps(self) -> str:
        return "".join(t + "\n" for t in self.itos)

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.dumps(), encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "Vocabulary":
        text = Path(path).read_text(encoding="utf-8")
        return cls(text.split("\n")[:-1] if text.endswith("\n") else text.split("\n"))
