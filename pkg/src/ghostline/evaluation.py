"""Prefix-match metrics, typing-effort simulation, sweeps, and latency stats.

Everything here operates on recorded per-position predictions so that
threshold and truncation sweeps re-score without calling the model again.
Counters are kept as integers and exact fractions wherever a downstream
consumer might need exact arithmetic; percentages are derived views.
"""

from __future__ import annotations

import logging
import time
from collections import defaultdict
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .corpus import BUCKET_LABELS, PrefixSample, bucket_of
from .trie import word_starts
from .types import Suggestion

logger = logging.getLogger(__name__)


def lcp_len(a: str, b: str) -> int:
    n = min(len(a), len(b))
    for i in range(n):
        if a[i] != b[i]:
            return i
    return n


@dataclass
class SampleResult:
    """Outcome of one suggestion at one cursor position."""

    shown: bool
    exact: bool
    lcp_len: int
    pred_len: int
    truth_len: int
    confidence: float
    bucket: str | None = None
    seen: bool | None = None


def score_sample(
    suggestion: Suggestion,
    truth: str,
    bucket: str | None = None,
    seen: bool | None = None,
) -> SampleResult:
    """Compare a suggestion to the ground-truth remainder.

    An empty suggestion is an abstention: not shown, excluded later from the
    shown-conditioned metrics but still counted in the position total.
    """
    text = suggestion.text
    if not text:
        return SampleResult(False, False, 0, 0, len(truth), suggestion.score, bucket, seen)
    overlap = lcp_len(text, truth)
    return SampleResult(
        shown=True,
        exact=text == truth,
        lcp_len=overlap,
        pred_len=len(text),
        truth_len=len(truth),
        confidence=suggestion.score,
        bucket=bucket,
        seen=seen,
    )


@dataclass
class MetricRow:
    """Aggregated counts for one report cell; rates are derived views.

    ``None`` marks metrics that are undefined because nothing was shown;
    they serialize as null, never as zero.
    """

    n_positions: int = 0
    shown: int = 0
    exact: int = 0
    sum_lcp: int = 0
    sum_pred: int = 0
    sum_prec_ratio: Fraction = Fraction(0)
    sum_rec_ratio: Fraction = Fraction(0)
    tes: Fraction | None = None

    def add(self, r: SampleResult) -> None:
        self.n_positions += 1
        if not r.shown:
            return
        self.shown += 1
        self.exact += int(r.exact)
        self.sum_lcp += r.lcp_len
        self.sum_pred += r.pred_len
        # Exact fractions keep the aggregate independent of result order.
        self.sum_prec_ratio += Fraction(r.lcp_len, r.pred_len)
        if r.truth_len:
            self.sum_rec_ratio += Fraction(r.lcp_len, r.truth_len)

    @property
    def mr(self) -> float | None:
        return self.exact / self.shown if self.shown else None

    @property
    def p_prec(self) -> float | None:
        return float(self.sum_prec_ratio / self.shown) if self.shown else None

    @property
    def p_rec(self) -> float | None:
        return float(self.sum_rec_ratio / self.shown) if self.shown else None

    @property
    def tr(self) -> float | None:
        return self.shown / self.n_positions if self.n_positions else None

    @property
    def mean_pred_len(self) -> float | None:
        return self.sum_pred / self.shown if self.shown else None

    @property
    def mean_matched_len(self) -> float | None:
        return self.sum_lcp / self.shown if self.shown else None

    def as_dict(self) -> dict:
        def pct(v: float | None) -> float | None:
            return None if v is None else 100.0 * v

        return {
            "positions": self.n_positions,
            "shown": self.shown,
            "mr": pct(self.mr),
            "p_rec": pct(self.p_rec),
            "p_prec": pct(self.p_prec),
            "tes": None if self.tes is None else 100.0 * float(self.tes),
            "tr": pct(self.tr),
            "pred_len": self.mean_pred_len,
            "matched_len": self.mean_matched_len,
        }


def aggregate(results: list[SampleResult], total_positions: int | None = None) -> MetricRow:
    """Micro-average a result list; ``total_positions`` may exceed the list
    length when abstaining positions were recorded elsewhere."""
    row = MetricRow()
    for r in results:
        row.add(r)
    if total_positions is not None:
        if total_positions < row.n_positions:
            raise ValueError("total_positions below the number of recorded results")
        row.n_positions = total_positions
    return row


def simulate_tes(suggest_fn, utterance: str, context: tuple[str, ...] = ()) -> Fraction:
    """Greedy accept-if-exact user simulation; exact rational result.

    The first character is always typed.  At each later position the model
    is asked once; a non-empty suggestion is accepted only when it matches
    the upcoming characters in full, otherwise one character is typed.  A
    raising suggest function counts as an abstention at that position.
    """
    n = len(utterance)
    if n < 1:
        raise ValueError("utterance must be non-empty")
    typed = 1
    pos = 1
    while pos < n:
        try:
            suggestion = suggest_fn(utterance[:pos], context)
        except Exception:
            suggestion = None
        text = suggestion.text if isinstance(suggestion, Suggestion) else (suggestion or "")
        if text and utterance[pos : pos + len(text)] == text:
            pos += len(text)
        else:
            typed += 1
            pos += 1
    return Fraction(n - typed, n)


def truncate_words(text: str, t: int) -> str:
    """Keep through the ``t``-th whitespace-delimited word.

    A suggestion starting mid-word contributes that fragment as word one; a
    leading space belongs to the word it precedes.
    """
    starts = word_starts(text)
    if len(starts) <= t:
        return text
    end = starts[t]
    while end > 0 and text[end - 1].isspace():
        end -= 1
    return text[:end]


@dataclass
class PositionRecord:
    """What the model said at one prefix length of one utterance."""

    position: int
    text: str
    confidence: float


@dataclass
class UtterancePrediction:
    """All recorded positions for one test utterance."""

    utterance_id: str
    utterance: str
    seen: bool | None
    context: tuple[str, ...] = ()
    records: list[PositionRecord] = field(default_factory=list)


def collect_predictions(suggest_fn, samples: list[PrefixSample]) -> list[UtterancePrediction]:
    """Run the model once per position and keep everything for re-scoring."""
    grouped: dict[str, UtterancePrediction] = {}
    order: list[str] = []
    for sample in samples:
        pred = grouped.get(sample.utterance_id)
        if pred is None:
            pred = UtterancePrediction(
                sample.utterance_id, sample.utterance, sample.seen, sample.context
            )
            grouped[sample.utterance_id] = pred
            order.append(sample.utterance_id)
        suggestion = suggest_fn(sample.prefix, sample.context)
        pred.records.append(
            PositionRecord(len(sample.prefix), suggestion.text, suggestion.score)
        )
    return [grouped[uid] for uid in order]


def _visible_text(record: PositionRecord, threshold: float | None, truncate: int | None) -> str:
    """Suggestion text after confidence gating and word truncation."""
    if not record.text:
        return ""
    if threshold is not None and record.confidence < threshold:
        return ""
    if truncate is not None:
        return truncate_words(record.text, truncate)
    return record.text


def _micro_tes(
    preds: list[UtterancePrediction],
    threshold: float | None,
    truncate: int | None,
    bucket: str | None = None,
) -> Fraction | None:
    """Micro-averaged typing effort saved under the given gating.

    With ``bucket`` set, suggestions are visible only at positions inside
    that prefix-length bucket, attributing savings to the bucket.
    """
    total_saved = 0
    total_len = 0
    for pred in preds:
        lookup = {rec.position: rec for rec in pred.records}

        def gated(prefix: str, _context) -> str:
            rec = lookup.get(len(prefix))
            if rec is None:
                return ""
            if bucket is not None and bucket_of(rec.position) != bucket:
                return ""
            return _visible_text(rec, threshold, truncate)

        tes = simulate_tes(gated, pred.utterance, pred.context)
        total_saved += int(tes * len(pred.utterance))
        total_len += len(pred.utterance)
    if total_len == 0:
        return None
    return Fraction(total_saved, total_len)


def score_predictions(
    preds: list[UtterancePrediction],
    threshold: float | None = None,
    truncate: int | None = None,
    with_buckets: bool = True,
    with_tes: bool = True,
) -> dict:
    """Build the split × bucket metric grid from recorded predictions.

    Splits: full plus seen/unseen when flags are available.  Bucket rows
    cover prefix lengths 1-50; longer positions still count in the split
    totals.  Bucket TES gates suggestions to that bucket's positions, so it
    reads as "effort saved by suggestions shown there".
    """
    splits: dict[str, list[UtterancePrediction]] = {"full": preds}
    flagged = [p for p in preds if p.seen is not None]
    if flagged:
        splits["seen"] = [p for p in preds if p.seen]
        splits["unseen"] = [p for p in preds if p.seen is False]

    report: dict = {}
    for split_name, split_preds in splits.items():
        overall = MetricRow()
        buckets = {label: MetricRow() for label in BUCKET_LABELS} if with_buckets else {}
        for pred in split_preds:
            for rec in pred.records:
                text = _visible_text(rec, threshold, truncate)
                truth = pred.utterance[rec.position :]
                result = score_sample(
                    Suggestion(text, rec.confidence, "RECORDED"),
                    truth,
                    bucket=bucket_of(rec.position),
                    seen=pred.seen,
                )
                overall.add(result)
                if with_buckets and result.bucket is not None:
                    buckets[result.bucket].add(result)
        if with_tes:
            overall.tes = _micro_tes(split_preds, threshold, truncate)
            for label, row in buckets.items():
                row.tes = _micro_tes(split_preds, threshold, truncate, bucket=label)
        cell = {"overall": overall.as_dict()}
        if with_buckets:
            cell["buckets"] = {label: row.as_dict() for label, row in buckets.items()}
        report[split_name] = cell
    return report


def threshold_grid(preds: list[UtterancePrediction], limit: int = 100) -> list[float]:
    """Distinct confidences of non-empty suggestions, decimated to ``limit``."""
    values = sorted({rec.confidence for pred in preds for rec in pred.records if rec.text})
    if len(values) <= limit:
        return values
    idx = np.linspace(0, len(values) - 1, limit).round().astype(int)
    return [values[i] for i in sorted(set(idx.tolist()))]


def sweep_thresholds(
    preds: list[UtterancePrediction], thresholds: list[float] | None = None, limit: int = 100
) -> list[dict]:
    """Metric-vs-TR curve: one row per confidence threshold.

    The first row uses no threshold at all and therefore reproduces the
    max-TR numbers exactly.
    """
    if thresholds is None:
        thresholds = threshold_grid(preds, limit)
    curve = []
    for tau in [None] + list(thresholds):
        scored = score_predictions(preds, threshold=tau, with_buckets=False)
        row = dict(scored["full"]["overall"])
        row["threshold"] = tau
        curve.append(row)
    return curve


def sweep_truncation(preds: list[UtterancePrediction], t_range: range = range(1, 11)) -> list[dict]:
    """Fixed-prediction truncation sweep, one full metric row per ``t``."""
    rows = []
    for t in t_range:
        scored = score_predictions(preds, truncate=t, with_buckets=False)
        row = dict(scored["full"]["overall"])
        row["t"] = t
        rows.append(row)
    return rows


@dataclass
class LatencyStats:
    p50: float
    p95: float
    p99: float
    mean: float
    n: int

    def as_dict(self) -> dict:
        return {"p50_ms": self.p50, "p95_ms": self.p95, "p99_ms": self.p99, "mean_ms": self.mean, "n": self.n}


def bench_latency(suggest_fn, prefixes: list[str], warmup: int = 20) -> LatencyStats:
    """Wall-clock per single call, batch size one, after warmup calls."""
    if not prefixes:
        raise ValueError("need at least one prefix to benchmark")
    for prefix in prefixes[:warmup]:
        suggest_fn(prefix, ())
    times = np.empty(len(prefixes))
    for i, prefix in enumerate(prefixes):
        start = time.perf_counter()
        suggest_fn(prefix, ())
        times[i] = time.perf_counter() - start
    ms = times * 1e3
    return LatencyStats(
        p50=float(np.percentile(ms, 50)),
        p95=float(np.percentile(ms, 95)),
        p99=float(np.percentile(ms, 99)),
        mean=float(ms.mean()),
        n=len(prefixes),
    )
