"""BLEU, ROUGE-N, ROUGE-L and correctness rate over HNote token streams.

Inputs are plain sequences of token codes; measure bars and line breaks are
not part of the stream.  One reference per candidate, no smoothing.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from .core import ErrorCategory, ValidationReport
from .errors import EmptySequence, ReferenceTooShort

BLEU_MODES = ("individual", "cumulative")


def ngrams(seq: Sequence, n: int) -> Counter:
    return Counter(tuple(seq[i : i + n]) for i in range(len(seq) - n + 1))


def _require(candidate, reference):
    if not candidate or not reference:
        raise EmptySequence("candidate and reference must be non-empty")


def clipped_matches(candidate: Sequence, reference: Sequence, n: int) -> int:
    cand, ref = ngrams(candidate, n), ngrams(reference, n)
    return sum(min(c, ref[g]) for g, c in cand.items())


def brevity_penalty(cand_len: int, ref_len: int) -> float:
    if cand_len >= ref_len:
        return 1.0
    return math.exp(1.0 - ref_len / cand_len)


def modified_precision(candidate: Sequence, reference: Sequence, n: int) -> float:
    total = len(candidate) - n + 1
    if total <= 0:
        return 0.0
    return clipped_matches(candidate, reference, n) / total


@dataclass(frozen=True, slots=True)
class BleuResult:
    scores: tuple[float, ...]
    brevity_penalty: float
    precisions: tuple[float, ...]


def bleu(
    candidate: Sequence,
    reference: Sequence,
    max_n: int = 4,
    mode: str = "individual",
) -> BleuResult:
    """BLEU-1..max_n.

    ``individual`` gives ``p_n * BP`` per order; ``cumulative`` gives
    ``BP * exp(mean(log p_1..p_n))`` per order (0 once any ``p_k`` is 0).
    """
    _require(candidate, reference)
    if not 1 <= max_n <= 4:
        raise ValueError(f"max_n must be in 1..4, got {max_n}")
    if mode not in BLEU_MODES:
        raise ValueError(f"mode must be one of {BLEU_MODES}, got {mode!r}")
    bp = brevity_penalty(len(candidate), len(reference))
    precisions = tuple(modified_precision(candidate, reference, n) for n in range(1, max_n + 1))
    if mode == "individual":
        scores = tuple(p * bp for p in precisions)
    else:
        scores = []
        log_sum = 0.0
        for n, p in enumerate(precisions, 1):
            if p == 0.0:
                scores.extend([0.0] * (max_n - n + 1))
                break
            log_sum += math.log(p)
            scores.append(bp * math.exp(log_sum / n))
        scores = tuple(scores)
    return BleuResult(scores, bp, precisions)


def rouge_n(candidate: Sequence, reference: Sequence, n: int) -> float:
    """Recall of reference n-grams, clipped by candidate counts."""
    _require(candidate, reference)
    if len(reference) < n:
        raise ReferenceTooShort(f"reference has {len(reference)} tokens, need >= {n}")
    return clipped_matches(candidate, reference, n) / (len(reference) - n + 1)


def lcs_length(a: Sequence, b: Sequence) -> int:
    if len(a) < len(b):
        a, b = b, a
    prev = [0] * (len(b) + 1)
    for x in a:
        cur = [0]
        for j, y in enumerate(b):
            cur.append(prev[j] + 1 if x == y else max(prev[j + 1], cur[j]))
        prev = cur
    return prev[-1]


@dataclass(frozen=True, slots=True)
class RougeL:
    precision: float
    recall: float
    f1: float


def rouge_l(candidate: Sequence, reference: Sequence) -> RougeL:
    _require(candidate, reference)
    lcs = lcs_length(candidate, reference)
    if lcs == 0:
        return RougeL(0.0, 0.0, 0.0)
    p, r = lcs / len(candidate), lcs / len(reference)
    return RougeL(p, r, 2 * p * r / (p + r))


@dataclass(frozen=True, slots=True)
class MetricScores:
    bleu: tuple[float, float, float, float]
    brevity_penalty: float
    rouge_n: tuple[float, float]
    rouge_l: RougeL

    def as_row(self) -> dict[str, float]:
        row = {f"bleu{n}": v for n, v in enumerate(self.bleu, 1)}
        row["brevity_penalty"] = self.brevity_penalty
        row["rouge1"], row["rouge2"] = self.rouge_n
        row["rougeL_p"] = self.rouge_l.precision
        row["rougeL_r"] = self.rouge_l.recall
        row["rougeL_f1"] = self.rouge_l.f1
        return row


def score_pair(candidate: Sequence, reference: Sequence, mode: str = "individual") -> MetricScores:
    result = bleu(candidate, reference, 4, mode)
    r2 = rouge_n(candidate, reference, 2) if len(reference) >= 2 else 0.0
    return MetricScores(
        result.scores,
        result.brevity_penalty,
        (rouge_n(candidate, reference, 1), r2),
        rouge_l(candidate, reference),
    )


@dataclass(frozen=True)
class CorrectnessReport:
    total: int
    valid: int
    error_histogram: Mapping[ErrorCategory, int] = field(default_factory=dict)

    @property
    def defined(self) -> bool:
        return self.total > 0

    @property
    def rate(self) -> float:
        return self.valid / self.total if self.total else 0.0

    @property
    def percent(self) -> str:
        return f"{100 * self.rate:.1f}%" if self.defined else "n/a"

    def summary(self) -> str:
        return f"{self.valid}/{self.total} valid ({self.percent})"


def correctness_rate(reports: Iterable[ValidationReport]) -> CorrectnessReport:
    """Count valid pieces; the histogram counts pieces showing each error category."""
    total = valid = 0
    hist: Counter = Counter()
    for report in reports:
        total += 1
        if report.valid:
            valid += 1
        else:
            hist.update(report.categories())
    ordered = {c: hist[c] for c in ErrorCategory if hist[c]}
    return CorrectnessReport(total, valid, ordered)
