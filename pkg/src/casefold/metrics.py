"""Token accuracy, CoNLL-style span F1, character casing F1, and reports."""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from decimal import ROUND_HALF_UP, Decimal
from typing import Iterable, Sequence

from casefold.flavors import Flavor


class LengthMismatch(ValueError):
    """Gold and prediction sequences differ in length."""


class MalformedTag(ValueError):
    """A tag is neither O nor {B,I}-TYPE."""


Span = tuple[int, int, str]  # start, exclusive end, type


def round2(x: float) -> float:
    """Round half-up to 2 decimals (table convention)."""
    return float(Decimal(repr(float(x))).quantize(Decimal("0.01"), rounding=ROUND_HALF_UP))


def format2(x: float) -> str:
    return f"{Decimal(repr(float(x))).quantize(Decimal('0.01'), rounding=ROUND_HALF_UP):.2f}"


def token_accuracy(gold: Sequence, pred: Sequence, mask: Sequence[bool] | None = None) -> float:
    """100 * correct / total over unmasked positions."""
    if len(gold) != len(pred):
        raise LengthMismatch(f"gold {len(gold)} vs pred {len(pred)}")
    if mask is None:
        mask = [True] * len(gold)
    elif len(mask) != len(gold):
        raise LengthMismatch(f"mask {len(mask)} vs gold {len(gold)}")
    total = sum(1 for m in mask if m)
    if total == 0:
        warnings.warn("token_accuracy over zero tokens; defined as 0", RuntimeWarning, stacklevel=2)
        return 0.0
    correct = sum(1 for g, p, m in zip(gold, pred, mask) if m and g == p)
    return 100.0 * correct / total


def bio_decode(labels: Sequence[str]) -> set[Span]:
    """Maximal BIO spans, conlleval-lenient: a bare or type-switching I- tag
    opens a new span."""
    spans: set[Span] = set()
    start: int | None = None
    current: str | None = None

    def close(end: int) -> None:
        nonlocal start, current
        if start is not None:
            spans.add((start, end, current))
        start, current = None, None

    for i, tag in enumerate(labels):
        if tag == "O":
            close(i)
            continue
        if len(tag) < 3 or tag[0] not in "BI" or tag[1] != "-":
            raise MalformedTag(f"bad BIO tag: {tag!r}")
        kind, typ = tag[0], tag[2:]
        if kind == "B" or current != typ:
            close(i)
            start, current = i, typ
    close(len(labels))
    return spans


def bio_encode(spans: set[Span], length: int) -> list[str]:
    """Inverse of bio_decode for well-formed, non-overlapping span sets."""
    tags = ["O"] * length
    for s, e, typ in sorted(spans):
        tags[s] = f"B-{typ}"
        for i in range(s + 1, e):
            tags[i] = f"I-{typ}"
    return tags


def _prf(tp: int, fp: int, fn: int) -> tuple[float, float, float]:
    p = tp / (tp + fp) if tp + fp else 0.0
    r = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * p * r / (p + r) if p + r else 0.0
    return p, r, f1


def span_f1(gold: Sequence[set[Span]], pred: Sequence[set[Span]]) -> float:
    """Micro-averaged exact-match span F1 x 100 over aligned sentences."""
    if len(gold) != len(pred):
        raise LengthMismatch(f"gold {len(gold)} vs pred {len(pred)} sentences")
    tp = fp = fn = 0
    for g, p in zip(gold, pred):
        tp += len(g & p)
        fp += len(p - g)
        fn += len(g - p)
    if tp + fp + fn == 0:
        warnings.warn("span_f1 with no gold or predicted spans; defined as 0",
                      RuntimeWarning, stacklevel=2)
        return 0.0
    _, _, f1 = _prf(tp, fp, fn)
    return 100.0 * f1


def char_f1(gold: Sequence[int], pred: Sequence[int]) -> float:
    """F1 x 100 over the positive (uppercase) class."""
    if len(gold) != len(pred):
        raise LengthMismatch(f"gold {len(gold)} vs pred {len(pred)}")
    tp = sum(1 for g, p in zip(gold, pred) if g and p)
    fp = sum(1 for g, p in zip(gold, pred) if not g and p)
    fn = sum(1 for g, p in zip(gold, pred) if g and not p)
    if tp + fp + fn == 0:
        warnings.warn("char_f1 with no positives anywhere; defined as 0",
                      RuntimeWarning, stacklevel=2)
        return 0.0
    _, _, f1 = _prf(tp, fp, fn)
    return 100.0 * f1


@dataclass
class EvalReport:
    """Per-flavor scores in the cased/uncased/average table shape."""

    metric_kind: str
    rows: dict[Flavor, tuple[float, float, float]] = field(default_factory=dict)

    def add(self, flavor: Flavor, test_cased: float, test_uncased: float) -> None:
        self.rows[flavor] = (test_cased, test_uncased, (test_cased + test_uncased) / 2.0)

    def to_tsv(self) -> str:
        lines = ["flavor\ttest_c\ttest_u\tavg"]
        for flavor, (c, u, avg) in self.rows.items():
            lines.append(f"{flavor.value}\t{format2(c)}\t{format2(u)}\t{format2(avg)}")
        return "\n".join(lines) + "\n"

    def to_json(self) -> str:
        obj = {
            "metric": self.metric_kind,
            "rows": [
                {
                    "flavor": flavor.value,
                    "test_c": round2(c),
                    "test_u": round2(u),
                    "avg": round2(avg),
                }
                for flavor, (c, u, avg) in self.rows.items()
            ],
        }
        return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def write_report(report: EvalReport, path, as_json: bool = False) -> None:
    from pathlib import Path

    text = report.to_json() if as_json else report.to_tsv()
    Path(path).write_text(text, encoding="utf-8")


def merge_reports(reports: Iterable[EvalReport]) -> EvalReport:
    """Pure fold of single-flavor reports into one table."""
    merged: EvalReport | None = None
    for r in reports:
        if merged is None:
            merged = EvalReport(metric_kind=r.metric_kind)
        for flavor, (c, u, _) in r.rows.items():
            merged.add(flavor, c, u)
    if merged is None:
        raise ValueError("no reports to merge")
    return merged
