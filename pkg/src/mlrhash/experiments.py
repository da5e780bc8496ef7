"""
Desk-scale experiments: retrieval benchmark on synthetic clusters, hyperparameter
and code-length sweeps, and the training-time scaling bench.
"""

from __future__ import annotations

import dataclasses
import logging
import time
from dataclasses import dataclass
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .boost import bit_correlation, boost_train, finalize_model
from .config import NumericsConfig
from .data import Dataset, SyntheticSpec, gen_synthetic, split
from .errors import UsageError
from .evaluation import MetricRow, RelevanceOracle, mean_ap, precision_at_k
from .features import RbfMap, apply_rbf, fit_rbf
from .index import PackedCodes, pack, rank_all
from .linalg import DEFAULT_NUMERICS, DenseMatrix, SeededRng
from .trainer import Hyperparams, mutual_inequality_witness, solve_ph, solve_py, train


LOGGER = logging.getLogger("mlrhash.experiments")

SINGLE = "s2dhmlr"
BOOSTED = "s2dhmlr-boost"


@dataclass(frozen=True)
class BenchmarkSetup:
    """Synthetic retrieval benchmark: the training split doubles as the database."""

    num_classes: int = 10
    dim: int = 50
    per_class: int = 240
    cluster_spread: float = 0.3
    center_scale: float = 3.0
    query_fraction: float = 1.0 / 6.0
    rbf_m: int = 0
    precision_k: Tuple[int, ...] = (100,)
    map_cutoff: Optional[int] = None
    db_codes: str = "reencode"


@dataclass
class ScalingCell:
    n: int
    bits: int
    seconds: float
    iterations: int

    @property
    def seconds_per_iteration(self) -> float:
        return self.seconds / max(self.iterations, 1)


@dataclass
class BenchRow:
    metric: str
    n: int
    bits: int
    value: float

    def as_row(self) -> List[object]:
        return [self.metric, self.n, self.bits, repr(float(self.value))]


BENCH_HEADER = ("metric", "n", "bits", "value")


def prepare_split(setup: BenchmarkSetup, seed: int) -> Tuple[Dataset, Dataset]:
    spec = SyntheticSpec(
        num_classes=setup.num_classes,
        dim=setup.dim,
        per_class=setup.per_class,
        cluster_spread=setup.cluster_spread,
        center_scale=setup.center_scale,
        seed=seed,
    )
    return split(gen_synthetic(spec), setup.query_fraction, seed)


def score_codes(
    db: PackedCodes,
    queries: PackedCodes,
    oracle: RelevanceOracle,
    method: str,
    seed: int,
    precision_k: Sequence[int] = (),
    map_cutoff: Optional[int] = None,
) -> List[MetricRow]:
    """Hamming-rank the database for every query and compute mAP and precision@K rows."""
    order, _ = rank_all(db, queries)
    bits = db.bits
    metric = "map" if map_cutoff is None else f"map@{map_cutoff}"
    rows = [MetricRow(metric, bits, method, seed, mean_ap(order, oracle, map_cutoff))]
    for k in precision_k:
        if k > order.shape[1]:
            LOGGER.warning("Skipping precision@%d: database holds only %d items", k, order.shape[1])
            continue
        rows.append(MetricRow(f"precision@{k}", bits, method, seed, precision_at_k(order, oracle, k)))
    return rows


def retrieval_benchmark(
    setup: BenchmarkSetup,
    hp: Hyperparams,
    runs: int = 3,
    numerics: NumericsConfig = DEFAULT_NUMERICS,
    threads: int = 1,
    include_single: bool = True,
    include_boost: bool = True,
) -> List[MetricRow]:
    """Train single-run and boosted models on one seeded split and score both."""
    seed = hp.seed
    train_set, query_set = prepare_split(setup, seed)
    rbf = fit_rbf(train_set.features, setup.rbf_m, seed, numerics) if setup.rbf_m > 0 else None
    v = _transform(rbf, train_set.features)
    oracle = RelevanceOracle(query_labels=query_set.labels, db_labels=train_set.labels)

    rows: List[MetricRow] = []
    if include_single:
        model, state, _ = train(v, train_set.labels, hp, numerics)
        model.rbf = rbf
        db = state.h if setup.db_codes == "hf" else model.encode(train_set.features)
        rows.extend(
            score_codes(pack(db), pack(model.encode(query_set.features)), oracle, SINGLE, seed, setup.precision_k, setup.map_cutoff)
        )
    if include_boost:
        result, _ = boost_train(v, train_set.labels, hp, runs, numerics, threads)
        model = finalize_model(result, rbf, hp)
        db = result.h_f if setup.db_codes == "hf" else model.encode(train_set.features)
        rows.extend(
            score_codes(pack(db), pack(model.encode(query_set.features)), oracle, BOOSTED, seed, setup.precision_k, setup.map_cutoff)
        )
    return rows


def parameter_sweep(
    setup: BenchmarkSetup,
    hp: Hyperparams,
    alphas: Sequence[float],
    betas: Sequence[float],
    bits_list: Sequence[int],
    numerics: NumericsConfig = DEFAULT_NUMERICS,
) -> List[MetricRow]:
    """Single-run retrieval quality over an (alpha, beta, bits) grid on one split."""
    train_set, query_set = prepare_split(setup, hp.seed)
    rbf = fit_rbf(train_set.features, setup.rbf_m, hp.seed, numerics) if setup.rbf_m > 0 else None
    v = _transform(rbf, train_set.features)
    oracle = RelevanceOracle(query_labels=query_set.labels, db_labels=train_set.labels)

    rows: List[MetricRow] = []
    for bits in bits_list:
        for alpha in alphas:
            for beta in betas:
                cell = dataclasses.replace(hp, alpha=alpha, beta=beta, bits=bits)
                model, _, _ = train(v, train_set.labels, cell, numerics)
                model.rbf = rbf
                method = f"{SINGLE}[alpha={alpha:g};beta={beta:g}]"
                LOGGER.info("Sweep cell bits=%d alpha=%g beta=%g", bits, alpha, beta)
                rows.extend(
                    score_codes(
                        pack(model.encode(train_set.features)),
                        pack(model.encode(query_set.features)),
                        oracle,
                        method,
                        hp.seed,
                        setup.precision_k,
                        setup.map_cutoff,
                    )
                )
    return rows


def baseline_diagnostics(h: DenseMatrix, y: DenseMatrix, lam: float) -> Dict[str, float]:
    """How far the codes are from the labels and how far the two one-way regressions disagree."""
    gap = float(np.linalg.norm(solve_ph(h, y, lam) - solve_py(h, y, lam))) if h.shape[0] == y.shape[0] else float("nan")
    return {"witness": mutual_inequality_witness(h, y), "ph_py_gap": gap}


def scaling_bench(
    ns: Sequence[int],
    bits_list: Sequence[int],
    hp: Hyperparams,
    num_classes: int = 10,
    dim: int = 50,
    numerics: NumericsConfig = DEFAULT_NUMERICS,
    repeats: int = 3,
) -> List[ScalingCell]:
    """
    Median wall-clock training time over `repeats` runs for every (n, bits) cell.

    One untimed training on the first cell runs before any timing starts. Training
    is deterministic, so every repeat of a cell runs the same iterations.
    """
    if repeats < 1:
        raise UsageError(f"repeats must be at least 1, got {repeats}")
    datasets = [
        gen_synthetic(SyntheticSpec(num_classes=num_classes, dim=dim, per_class=max(1, n // num_classes), seed=hp.seed))
        for n in ns
    ]
    if datasets and bits_list:
        train(datasets[0].features, datasets[0].labels, dataclasses.replace(hp, bits=bits_list[0]), numerics)

    cells = []
    for dataset in datasets:
        for bits in bits_list:
            cell_hp = dataclasses.replace(hp, bits=bits)
            timings = []
            for _ in range(repeats):
                started = time.perf_counter()
                _, _, report = train(dataset.features, dataset.labels, cell_hp, numerics)
                timings.append(time.perf_counter() - started)
            elapsed = float(np.median(timings))
            cells.append(ScalingCell(n=dataset.n, bits=bits, seconds=elapsed, iterations=report.iterations_run))
            LOGGER.info(
                "Bench cell n=%d bits=%d: median %.3fs of %d runs over %d iterations",
                dataset.n,
                bits,
                elapsed,
                repeats,
                report.iterations_run,
            )
    return cells


def scaling_summary(cells: Iterable[ScalingCell]) -> List[BenchRow]:
    """Per-cell timings plus, per bit length, the least-squares slope vs n and doubling ratios."""
    cells = list(cells)
    rows: List[BenchRow] = []
    for cell in cells:
        rows.append(BenchRow("seconds", cell.n, cell.bits, cell.seconds))
        rows.append(BenchRow("iterations", cell.n, cell.bits, cell.iterations))
        rows.append(BenchRow("seconds_per_iteration", cell.n, cell.bits, cell.seconds_per_iteration))

    for bits in sorted({cell.bits for cell in cells}):
        series = sorted((cell for cell in cells if cell.bits == bits), key=lambda cell: cell.n)
        if len(series) >= 2:
            ns = np.array([cell.n for cell in series], dtype=np.float64)
            per_iter = np.array([cell.seconds_per_iteration for cell in series])
            totals = np.array([cell.seconds for cell in series])
            rows.append(BenchRow("slope_seconds_per_sample", 0, bits, float(np.polyfit(ns, totals, 1)[0])))
            rows.append(BenchRow("slope_iteration_seconds_per_sample", 0, bits, float(np.polyfit(ns, per_iter, 1)[0])))
        for small, large in zip(series, series[1:]):
            if large.n == 2 * small.n and small.seconds_per_iteration > 0:
                ratio = large.seconds_per_iteration / small.seconds_per_iteration
                rows.append(BenchRow("doubling_ratio", large.n, bits, ratio))
    return rows


def scan_throughput(n: int, bits: int, queries: int, seed: int) -> float:
    """Database codes compared per second by the exact linear scan."""
    rng = SeededRng(seed)
    db = pack(np.where(rng.standard_normal((bits, n)) >= 0, 1.0, -1.0))
    queries_packed = pack(np.where(rng.standard_normal((bits, queries)) >= 0, 1.0, -1.0))
    started = time.perf_counter()
    rank_all(db, queries_packed)
    elapsed = max(time.perf_counter() - started, 1e-9)
    return n * queries / elapsed


def boosted_bit_correlation(
    n: int,
    hp: Hyperparams,
    runs: int,
    num_classes: int = 10,
    dim: int = 50,
    numerics: NumericsConfig = DEFAULT_NUMERICS,
    threads: int = 1,
) -> float:
    spec = SyntheticSpec(num_classes=num_classes, dim=dim, per_class=max(1, n // num_classes), seed=hp.seed)
    dataset = gen_synthetic(spec)
    result, _ = boost_train(dataset.features, dataset.labels, hp, runs, numerics, threads)
    return bit_correlation(result.h_f)


def _transform(rbf: Optional[RbfMap], x: DenseMatrix) -> DenseMatrix:
    return x if rbf is None else apply_rbf(rbf, x)
