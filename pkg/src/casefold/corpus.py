"""Column-format corpus parsing, vocabularies, and OOV masking schemes."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Literal

import numpy as np

PAD_TOKEN = "<PAD>"
OOV_TOKEN = "<OOV>"


class MalformedLine(ValueError):
    """A non-blank corpus line lacks the requested columns."""

    def __init__(self, line_no: int, line: str = ""):
        self.line_no = line_no
        super().__init__(f"line {line_no}: not enough columns: {line!r}")


class EmptyCorpus(ValueError):
    """No sentences could be parsed from the input."""


class MissingRng(ValueError):
    """Stochastic OOV masking was requested without a PRNG."""


class EmptySplit(ValueError):
    """A required corpus split has no sentences."""


@dataclass(frozen=True)
class Token:
    surface: str
    label: str

    def __post_init__(self):
        if not self.surface or any(c.isspace() for c in self.surface):
            raise ValueError(f"bad token surface: {self.surface!r}")


@dataclass(frozen=True)
class Sentence:
    tokens: tuple[Token, ...]

    def __post_init__(self):
        if not self.tokens:
            raise ValueError("empty sentence")

    def surfaces(self) -> list[str]:
        return [t.surface for t in self.tokens]

    def labels(self) -> list[str]:
        return [t.label for t in self.tokens]

    def __len__(self) -> int:
        return len(self.tokens)


@dataclass
class LabeledCorpus:
    train: list[Sentence]
    dev: list[Sentence]
    test: list[Sentence]
    label_set: set[str] = field(default_factory=set)

    def __post_init__(self):
        if not self.label_set:
            self.label_set = {
                t.label for split in (self.train, self.dev, self.test) for s in split for t in s.tokens
            }


@dataclass(frozen=True)
class OovPolicy:
    kind: Literal["stochastic_at_read", "frequency_cutoff"]
    rate: float

    def __post_init__(self):
        if not 0.0 <= self.rate <= 1.0:
            raise ValueError(f"rate must be in [0,1], got {self.rate}")
        if self.kind not in ("stochastic_at_read", "frequency_cutoff"):
            raise ValueError(f"unknown OOV policy kind: {self.kind}")


@dataclass
class Vocabulary:
    """Dense unit->id map with reserved PAD and OOV ids.

    ids are 0..N-1 with pad_id=0 and oov_id=1; real units start at 2.
    """

    unit_kind: Literal["character", "word"]
    id_of: dict[str, int]
    oov_id: int
    pad_id: int
    policy: OovPolicy

    def __len__(self) -> int:
        return len(self.id_of) + 2  # + PAD + OOV

    def lookup(self, unit: str) -> int:
        return self.id_of.get(unit, self.oov_id)


def parse_column_corpus(text: str, token_col: int, label_col: int) -> list[Sentence]:
    """Parse whitespace-separated column format; blank lines separate sentences.

    Raises MalformedLine if a non-blank line lacks either requested column,
    EmptyCorpus if nothing was parsed.
    """
    sentences: list[Sentence] = []
    current: list[Token] = []
    max_col = max(token_col, label_col)
    for line_no, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            if current:
                sentences.append(Sentence(tuple(current)))
                current = []
            continue
        cols = line.split()
        if len(cols) <= max_col:
            raise MalformedLine(line_no, line)
        current.append(Token(cols[token_col], cols[label_col]))
    if current:
        sentences.append(Sentence(tuple(current)))
    if not sentences:
        raise EmptyCorpus("no sentences parsed")
    return sentences


def serialize_column_corpus(sentences: Iterable[Sentence]) -> str:
    """Write sentences back to two-column `token label` format."""
    blocks = []
    for s in sentences:
        blocks.append("\n".join(f"{t.surface} {t.label}" for t in s.tokens))
    return "\n\n".join(blocks) + "\n"


def sentence_units(sentence: Sentence, unit_kind: str) -> list[str]:
    """Units of one sentence: word surfaces, or the characters of the
    space-joined surface stream (the same stream the truecaser consumes)."""
    if unit_kind == "word":
        return sentence.surfaces()
    if unit_kind == "character":
        return list(" ".join(sentence.surfaces()))
    raise ValueError(f"unknown unit kind: {unit_kind}")


def build_vocabulary(
    sentences: list[Sentence], unit_kind: str, policy: OovPolicy
) -> Vocabulary:
    """Build a vocabulary over the given sentences.

    frequency_cutoff: units sorted by increasing count (ties lexicographic);
    the smallest prefix whose cumulative count reaches >= rate * total is
    excluded and maps to OOV. stochastic_at_read: everything enters the
    vocabulary, masking happens at encode time.
    """
    if not sentences:
        raise ValueError("sentences must be non-empty")
    counts: Counter[str] = Counter()
    for s in sentences:
        counts.update(sentence_units(s, unit_kind))

    excluded: set[str] = set()
    if policy.kind == "frequency_cutoff" and policy.rate > 0.0:
        total = sum(counts.values())
        threshold = policy.rate * total
        cumulative = 0
        for unit, count in sorted(counts.items(), key=lambda kv: (kv[1], kv[0])):
            if cumulative >= threshold:
                break
            excluded.add(unit)
            cumulative += count

    kept = [u for u in counts if u not in excluded]
    # most frequent first; deterministic ties
    kept.sort(key=lambda u: (-counts[u], u))
    id_of = {u: i + 2 for i, u in enumerate(kept)}
    return Vocabulary(unit_kind=unit_kind, id_of=id_of, oov_id=1, pad_id=0, policy=policy)


def encode(
    sentence: Sentence,
    vocab: Vocabulary,
    rng: np.random.Generator | None = None,
    train_mode: bool = False,
) -> list[int]:
    """Encode a sentence to unit ids. Unknown units map to oov_id.

    In train mode under the stochastic_at_read policy, each known unit is
    additionally replaced by oov_id with probability rate (one uniform draw
    per known unit, in sequence order). Evaluation mode never masks.
    """
    units = sentence_units(sentence, vocab.unit_kind)
    ids = [vocab.lookup(u) for u in units]
    stochastic = (
        train_mode and vocab.policy.kind == "stochastic_at_read" and vocab.policy.rate > 0.0
    )
    if stochastic:
        if rng is None:
            raise MissingRng("stochastic OOV masking needs a seeded PRNG")
        rate = vocab.policy.rate
        ids = [
            vocab.oov_id if i != vocab.oov_id and rng.random() < rate else i
            for i in ids
        ]
    return ids


def encode_units(
    units: list[str],
    vocab: Vocabulary,
    rng: np.random.Generator | None = None,
    train_mode: bool = False,
) -> list[int]:
    """encode() for a raw unit list (e.g. characters of arbitrary text)."""
    ids = [vocab.lookup(u) for u in units]
    stochastic = (
        train_mode and vocab.policy.kind == "stochastic_at_read" and vocab.policy.rate > 0.0
    )
    if stochastic:
        if rng is None:
            raise MissingRng("stochastic OOV masking needs a seeded PRNG")
        rate = vocab.policy.rate
        ids = [
            vocab.oov_id if i != vocab.oov_id and rng.random() < rate else i
            for i in ids
        ]
    return ids


def save_vocabulary(vocab: Vocabulary, path: str | Path) -> None:
    """Write the versioned vocabulary file.

    Header: `casefold-vocab v1 <unit_kind> <policy> <rate>`, then one
    `unit<TAB>id` line per entry. PAD and OOV are written under the reserved
    names <PAD> and <OOV>.
    """
    lines = [f"casefold-vocab v1 {vocab.unit_kind} {vocab.policy.kind} {vocab.policy.rate!r}"]
    entries = [(PAD_TOKEN, vocab.pad_id), (OOV_TOKEN, vocab.oov_id)]
    entries += sorted(vocab.id_of.items(), key=lambda kv: kv[1])
    for unit, idx in entries:
        lines.append(f"{unit}\t{idx}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_vocabulary(path: str | Path) -> Vocabulary:
    text = Path(path).read_text(encoding="utf-8")
    lines = text.splitlines()
    header = lines[0].split(" ")
    if len(header) != 5 or header[0] != "casefold-vocab" or header[1] != "v1":
        raise ValueError(f"{path}: not a casefold-vocab v1 file")
    unit_kind, kind, rate = header[2], header[3], float(header[4])
    pad_id = oov_id = None
    id_of: dict[str, int] = {}
    for line in lines[1:]:
        if not line:
            continue
        unit, idx_s = line.rsplit("\t", 1)
        idx = int(idx_s)
        if unit == PAD_TOKEN and pad_id is None:
            pad_id = idx
        elif unit == OOV_TOKEN and oov_id is None:
            oov_id = idx
        else:
            id_of[unit] = idx
    if pad_id is None or oov_id is None:
        raise ValueError(f"{path}: missing reserved PAD/OOV entries")
    return Vocabulary(
        unit_kind=unit_kind, id_of=id_of, oov_id=oov_id, pad_id=pad_id,
        policy=OovPolicy(kind=kind, rate=rate),
    )
