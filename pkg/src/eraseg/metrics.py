"""Word-level segmentation scoring and era classification accuracy.

A predicted word counts as correct only when its exact character span
(start and end offsets inside the sentence) appears in the gold
segmentation.  Scores are micro-averaged: counts are summed over all
sentences before any ratio is taken.  OOV recall restricts the gold side
to word tokens whose type never occurred in training and is undefined
(None, printed NA) when a corpus has no such tokens.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

from .errors import DataError


@dataclass(frozen=True)
class SegScore:
    precision: float
    recall: float
    f1: float
    n_gold: int
    n_pred: int
    n_correct: int

    @classmethod
    def from_counts(cls, n_gold: int, n_pred: int, n_correct: int) -> "SegScore":
        if n_correct > min(n_gold, n_pred):
            raise ValueError(f"correct={n_correct} exceeds gold={n_gold} or pred={n_pred}")
        p = n_correct / n_pred if n_pred else 0.0
        r = n_correct / n_gold if n_gold else 0.0
        f1 = 2 * p * r / (p + r) if p + r > 0 else 0.0
        return cls(p, r, f1, n_gold, n_pred, n_correct)


def _spans(words: Sequence[str]) -> set[tuple[int, int]]:
    spans = set()
    pos = 0
    for w in words:
        spans.add((pos, pos + len(w)))
        pos += len(w)
    return spans


def _check_alignment(gold: Sequence[Sequence[str]], pred: Sequence[Sequence[str]]) -> None:
    if len(gold) != len(pred):
        raise DataError(f"sentence count mismatch: {len(gold)} gold vs {len(pred)} predicted")
    for i, (g, p) in enumerate(zip(gold, pred)):
        if "".join(g) != "".join(p):
            raise DataError(f"sentence {i}: characters differ between gold and prediction")


def score_segmentation(
    gold: Sequence[Sequence[str]], pred: Sequence[Sequence[str]]
) -> SegScore:
    """Micro-averaged precision/recall/F1 over exact word spans."""
    _check_alignment(gold, pred)
    n_gold = n_pred = n_correct = 0
    for g, p in zip(gold, pred):
        gold_spans = _spans(g)
        pred_spans = _spans(p)
        n_gold += len(gold_spans)
        n_pred += len(pred_spans)
        n_correct += len(gold_spans & pred_spans)
    return SegScore.from_counts(n_gold, n_pred, n_correct)


def oov_recall(
    gold: Sequence[Sequence[str]],
    pred: Sequence[Sequence[str]],
    training_words: Iterable[str],
) -> float | None:
    """Recall over gold word tokens unseen in training; None when there are none."""
    _check_alignment(gold, pred)
    known = set(training_words)
    n_oov = n_hit = 0
    for g, p in zip(gold, pred):
        pred_spans = _spans(p)
        pos = 0
        for w in g:
            span = (pos, pos + len(w))
            pos = span[1]
            if w in known:
                continue
            n_oov += 1
            if span in pred_spans:
                n_hit += 1
    if n_oov == 0:
        return None
    return n_hit / n_oov


def era_accuracy(gold_eras: Sequence[int], pred_eras: Sequence[int]) -> float:
    if len(gold_eras) != len(pred_eras):
        raise DataError(f"era list mismatch: {len(gold_eras)} gold vs {len(pred_eras)} predicted")
    if not gold_eras:
        raise DataError("no sentences to score")
    return sum(g == p for g, p in zip(gold_eras, pred_eras)) / len(gold_eras)


def _fmt_ratio(x: float | None) -> str:
    return "NA" if x is None else f"{x:.4f}"


def machine_line(era: int | str, f1: float, roov: float | None) -> str:
    return f"era={era} f1={f1:.4f} roov={_fmt_ratio(roov)}"


def format_report(
    rows: Sequence[tuple[int | str, SegScore, float | None]],
    era_acc: float | None = None,
) -> str:
    """Aligned table of per-era scores followed by machine-readable lines."""
    header = f"{'era':>6} {'P':>8} {'R':>8} {'F1':>8} {'R_oov':>8} {'gold':>7} {'pred':>7}"
    lines = [header]
    for era, score, roov in rows:
        lines.append(
            f"{era!s:>6} {score.precision:>8.4f} {score.recall:>8.4f} "
            f"{score.f1:>8.4f} {_fmt_ratio(roov):>8} {score.n_gold:>7} {score.n_pred:>7}"
        )
    if era_acc is not None:
        lines.append(f"era accuracy: {era_acc:.4f}")
    for era, score, roov in rows:
        lines.append(machine_line(era, score.f1, roov))
    return "\n".join(lines)
