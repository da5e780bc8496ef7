"""
Hash boosting: train T models, keep the L most balanced bit rows of the stacked
T*L candidate rows, and gather the matching projection columns into P_F.

Row l of a run's code matrix is produced by column l of that run's projection,
since out-of-sample codes are sgn(P^T X).
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .config import NumericsConfig
from .errors import MlrhError, UsageError
from .features import RbfMap
from .linalg import DEFAULT_NUMERICS, DenseMatrix
from .persistence.atomic import atomic_write_text
from .trainer import Hyperparams, TrainedModel, TrainReport, train


LOGGER = logging.getLogger("mlrhash.boost")

DEFAULT_RUNS = 3


@dataclass
class BoostRun:
    h: DenseMatrix
    p: DenseMatrix
    seed: int
    report: TrainReport


@dataclass
class BoostEnsemble:
    runs: List[BoostRun] = field(default_factory=list)

    def __post_init__(self) -> None:
        if not self.runs:
            raise UsageError("an ensemble needs at least one run")
        shapes = {(run.h.shape, run.p.shape) for run in self.runs}
        if len(shapes) != 1:
            raise UsageError(f"ensemble runs disagree on shapes: {sorted(shapes)}")
        seeds = [run.seed for run in self.runs]
        if len(set(seeds)) != len(seeds):
            raise UsageError(f"ensemble seeds must be distinct, got {seeds}")

    @property
    def bits(self) -> int:
        return int(self.runs[0].h.shape[0])


@dataclass
class BoostResult:
    h_f: DenseMatrix
    p_f: DenseMatrix
    provenance: List[Tuple[int, int]]
    balance_degrees: List[int]


def balance_degree(row: Sequence[float]) -> int:
    """|sum of the row|; zero for a perfectly balanced bit."""
    values = np.asarray(row)
    if not np.all((values == 1) | (values == -1)):
        raise UsageError("balance degree needs a row of -1/+1 entries")
    return int(abs(values.sum()))


def select_rows(ensemble: BoostEnsemble, bits: int) -> List[Tuple[int, int]]:
    """
    The `bits` stacked rows with the smallest balance degree, as (run index, row index).

    Ties are broken by run seed and then row index, so the choice depends only on
    run contents and not on the order in which runs are listed.
    """
    candidates = len(ensemble.runs) * ensemble.bits
    if not 1 <= bits <= candidates:
        raise UsageError(f"cannot select {bits} rows from {candidates} candidates")
    keys = []
    for t, run in enumerate(ensemble.runs):
        degrees = np.abs(run.h.sum(axis=1)).astype(np.int64)
        for l, degree in enumerate(degrees):
            keys.append((int(degree), run.seed, l, t))
    keys.sort()
    return [(t, l) for _, _, l, t in keys[:bits]]


def assemble(ensemble: BoostEnsemble, bits: int) -> BoostResult:
    """Build H_F and P_F from the selected rows and their projection columns."""
    provenance = select_rows(ensemble, bits)
    h_f = np.stack([ensemble.runs[t].h[l] for t, l in provenance])
    p_f = np.stack([ensemble.runs[t].p[:, l] for t, l in provenance], axis=1)
    degrees = [balance_degree(row) for row in h_f]
    return BoostResult(h_f=h_f, p_f=p_f, provenance=provenance, balance_degrees=degrees)


def boost_train(
    v: DenseMatrix,
    y: DenseMatrix,
    hp: Hyperparams,
    t: int = DEFAULT_RUNS,
    numerics: NumericsConfig = DEFAULT_NUMERICS,
    threads: int = 1,
) -> Tuple[BoostResult, BoostEnsemble]:
    """Train with seeds seed, seed+1, ..., seed+t-1 and assemble the boosted code space."""
    if t < 1:
        raise UsageError(f"run count must be at least 1, got {t}")
    seeds = [hp.seed + offset for offset in range(t)]
    if seeds[-1] >= 2**64:
        raise UsageError(f"seed {hp.seed} leaves no room for {t} runs")

    def _run(index: int) -> BoostRun:
        LOGGER.info("Boost run %d/%d with seed %d", index + 1, t, seeds[index])
        try:
            _, state, report = train(v, y, hp.with_seed(seeds[index]), numerics)
        except MlrhError as exc:
            raise type(exc)(f"boost run {index}: {exc}") from exc
        return BoostRun(h=state.h, p=state.p, seed=seeds[index], report=report)

    workers = max(1, min(threads, t))
    if workers == 1:
        runs = [_run(index) for index in range(t)]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            runs = list(pool.map(_run, range(t)))

    ensemble = BoostEnsemble(runs=runs)
    result = assemble(ensemble, hp.bits)
    LOGGER.info(
        "Assembled %d boosted bits from %d candidates (max balance degree %d)",
        hp.bits,
        t * hp.bits,
        max(result.balance_degrees),
    )
    return result, ensemble


def finalize_model(result: BoostResult, rbf: Optional[RbfMap], hp: Hyperparams) -> TrainedModel:
    """Model carrying P_F; queries and database are both encoded through it."""
    return TrainedModel(p=result.p_f.copy(), bits=result.p_f.shape[1], hyperparams=hp, rbf=rbf)


def bit_correlation(h: DenseMatrix) -> float:
    """Largest absolute Pearson correlation between two distinct bit rows (0 for constant rows)."""
    if h.shape[0] < 2:
        return 0.0
    centered = h - h.mean(axis=1, keepdims=True)
    norms = np.linalg.norm(centered, axis=1)
    live = norms > 0
    if np.count_nonzero(live) < 2:
        return 0.0
    unit = centered[live] / norms[live, None]
    corr = unit @ unit.T
    np.fill_diagonal(corr, 0.0)
    return float(np.abs(corr).max())


def write_provenance(result: BoostResult, path: Path) -> Path:
    """Sidecar lines `k,t,l,balance_degree`, one per boosted bit."""
    lines = [
        f"{k},{t},{l},{degree}"
        for k, ((t, l), degree) in enumerate(zip(result.provenance, result.balance_degrees))
    ]
    return atomic_write_text(Path(path), "\n".join(lines) + "\n")


def read_provenance(path: Path) -> List[Tuple[int, int, int, int]]:
    rows = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if line.strip():
            k, t, l, degree = (int(part) for part in line.split(","))
            rows.append((k, t, l, degree))
    return rows
