from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Iterable, List, Optional, Sequence

import click
import numpy as np
from numpy.typing import NDArray

from .data import check_labels
from .errors import UsageError
from .linalg import DenseMatrix


LOGGER = logging.getLogger("mlrhash.evaluation")

METRIC_HEADER = ("metric", "bits", "method", "seed", "value")


@dataclass(frozen=True)
class RelevanceOracle:
    """A query and a database item are relevant when they share at least one +1 label."""

    query_labels: DenseMatrix
    db_labels: DenseMatrix

    def __post_init__(self) -> None:
        if self.query_labels.shape[0] != self.db_labels.shape[0]:
            raise UsageError(
                f"query labels have {self.query_labels.shape[0]} classes, database labels {self.db_labels.shape[0]}"
            )
        check_labels(self.query_labels)
        check_labels(self.db_labels)

    @property
    def num_queries(self) -> int:
        return int(self.query_labels.shape[1])

    @property
    def db_size(self) -> int:
        return int(self.db_labels.shape[1])

    def relevance(self, q: int) -> NDArray[np.bool_]:
        """Relevance of every database item to query q."""
        positive = self.query_labels[:, q] > 0
        return np.any(self.db_labels[positive] > 0, axis=0)


@dataclass(frozen=True)
class MetricRow:
    metric: str
    bits: int
    method: str
    seed: int
    value: float

    def as_row(self) -> List[object]:
        return [self.metric, self.bits, self.method, self.seed, repr(float(self.value))]


def average_precision(ranked_relevance: Sequence[int]) -> float:
    """Mean of precision@k over the relevant positions k; 0 when nothing is relevant."""
    rel = np.asarray(ranked_relevance, dtype=bool)
    if rel.size == 0:
        raise UsageError("average precision needs a non-empty ranking")
    hits = int(rel.sum())
    if hits == 0:
        return 0.0
    positions = np.flatnonzero(rel) + 1
    return float(np.mean(np.arange(1, hits + 1) / positions))


def mean_ap(rankings: NDArray[np.int64], oracle: RelevanceOracle, cutoff: Optional[int] = None) -> float:
    """mAP over the full ranking, or over the first *cutoff* items when given."""
    _check_rankings(rankings, oracle)
    if cutoff is not None and cutoff < 1:
        raise UsageError(f"cutoff must be at least 1, got {cutoff}")
    scores = []
    for q in range(oracle.num_queries):
        ranked = oracle.relevance(q)[rankings[q]]
        if cutoff is not None:
            ranked = ranked[:cutoff]
        scores.append(average_precision(ranked))
    return float(np.mean(scores))


def precision_at_k(rankings: NDArray[np.int64], oracle: RelevanceOracle, k: int) -> float:
    _check_rankings(rankings, oracle)
    if not 1 <= k <= rankings.shape[1]:
        raise UsageError(f"k must lie in [1, {rankings.shape[1]}], got {k}")
    hits = [np.count_nonzero(oracle.relevance(q)[rankings[q, :k]]) for q in range(oracle.num_queries)]
    return float(np.mean(hits) / k)


def format_summary(rows: Iterable[MetricRow]) -> str:
    """Fixed-width table of metric rows for terminal output."""
    rows = list(rows)
    header = METRIC_HEADER
    body = [(row.metric, str(row.bits), row.method, str(row.seed), f"{row.value:.4f}") for row in rows]
    widths = [max(len(item) for item in column) for column in zip(header, *body)]
    lines = ["  ".join(item.ljust(width) for item, width in zip(line, widths)) for line in [header, *body]]
    return "\n".join(lines)


def echo_summary(rows: Iterable[MetricRow]) -> None:
    click.echo(format_summary(rows))


def _check_rankings(rankings: NDArray[np.int64], oracle: RelevanceOracle) -> None:
    if rankings.ndim != 2 or rankings.shape[0] != oracle.num_queries:
        raise UsageError(f"rankings of shape {rankings.shape} do not cover {oracle.num_queries} queries")
    if rankings.shape[1] > oracle.db_size:
        raise UsageError(f"rankings list {rankings.shape[1]} items but the database has {oracle.db_size}")
