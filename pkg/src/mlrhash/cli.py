from __future__ import annotations

import dataclasses
import functools
import logging
import sys
import uuid
from contextlib import contextmanager
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Callable, Dict, Iterable, Iterator, List, Optional, Sequence, Tuple

import click

from .boost import boost_train, finalize_model, write_provenance
from .config import DB_CODE_MODES, SYLVESTER_FORMS, RunConfig, apply_overrides, load_config
from .data import Dataset, MatrixDtype, SyntheticSpec, gen_synthetic, load_csv, load_feature_csv, load_matrix, save_matrix, split
from .errors import DataError, MlrhError, UsageError
from .evaluation import METRIC_HEADER, MetricRow, RelevanceOracle, echo_summary
from .experiments import (
    BENCH_HEADER,
    SINGLE,
    BenchmarkSetup,
    BenchRow,
    baseline_diagnostics,
    boosted_bit_correlation,
    parameter_sweep,
    retrieval_benchmark,
    scaling_bench,
    scaling_summary,
    scan_throughput,
    score_codes,
)
from .features import RbfMap, apply_rbf, fit_rbf
from .index import PackedCodes, knn, pack
from .linalg import DenseMatrix
from .logging_config import configure_logging
from .persistence import SQLiteRunStore
from .persistence.atomic import write_config_sidecar, write_csv
from .persistence.formats import load_codes, load_model, save_codes, save_model
from .trainer import Hyperparams, TrainedModel, train


LOGGER = logging.getLogger("mlrhash.cli")

REPORT_HEADER = ("quantity", "run", "iteration", "value")
SEARCH_HEADER = ("query", "rank", "db_index", "distance")
SETUP_KEYS = ("classes", "dim", "per_class", "spread", "center_scale", "query_fraction", "precision_k")


def _compose(*decorators: Callable) -> Callable:
    def apply(func: Callable) -> Callable:
        for decorator in reversed(decorators):
            func = decorator(func)
        return func

    return apply


_common_options = _compose(
    click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False, path_type=Path), default=None),
    click.option("--ledger", type=click.Path(dir_okay=False, path_type=Path), default=None, help="Record the run in a SQLite ledger."),
    click.option("--verbose", is_flag=True, default=False, help="Increase logging verbosity."),
)

_training_options = _compose(
    click.option("--alpha", type=float, default=None, help="Weight of the label-to-code regression."),
    click.option("--beta", type=float, default=None, help="Weight of the out-of-sample projection fit."),
    click.option("--lambda", "lam", type=float, default=None, help="Ridge regulariser."),
    click.option("--bits", type=int, default=None, help="Code length L."),
    click.option("--runs", type=int, default=None, help="Boosting runs T."),
    click.option("--max-outer", type=int, default=None),
    click.option("--dcc-sweeps", type=int, default=None),
    click.option("--rel-tol", type=float, default=None),
    click.option("--seed", type=int, default=None),
    click.option("--sylvester-form", type=click.Choice(SYLVESTER_FORMS), default=None),
    click.option("--rbf-m", type=int, default=None, help="RBF anchors; 0 keeps raw features."),
    click.option("--db-codes", type=click.Choice(DB_CODE_MODES), default=None),
    click.option("--map-cutoff", type=int, default=None, help="Truncate mAP to the top K items."),
    click.option("--threads", type=int, default=None, help="Worker threads; 0 means one per CPU."),
)

_input_options = _compose(
    click.option("--features", type=click.Path(exists=True, dir_okay=False, path_type=Path), default=None),
    click.option("--labels", type=click.Path(exists=True, dir_okay=False, path_type=Path), default=None),
    click.option("--csv", "csv_path", type=click.Path(exists=True, dir_okay=False, path_type=Path), default=None),
    click.option("--ids", "ids_path", type=click.Path(exists=True, dir_okay=False, path_type=Path), default=None),
    click.option("--classes", "num_classes", type=int, default=None, help="Class count for --ids input."),
)

_setup_options = _compose(
    click.option("--classes", type=int, default=10, show_default=True),
    click.option("--dim", type=int, default=50, show_default=True),
    click.option("--per-class", type=int, default=240, show_default=True),
    click.option("--spread", type=float, default=0.3, show_default=True),
    click.option("--center-scale", type=float, default=3.0, show_default=True),
    click.option("--query-fraction", type=float, default=1.0 / 6.0, show_default=True),
    click.option("--precision-k", type=int, multiple=True, default=(100,), show_default=True),
)


def _exit_codes(func: Callable) -> Callable:
    """Translate toolkit errors into the documented exit codes."""

    @functools.wraps(func)
    def wrapper(*args: Any, **kwargs: Any) -> Any:
        try:
            return func(*args, **kwargs)
        except MlrhError as exc:
            LOGGER.error("%s", exc)
            click.echo(f"Error: {exc}", err=True)
            sys.exit(exc.exit_code)
        except OSError as exc:
            LOGGER.error("%s", exc)
            click.echo(f"Error: {exc}", err=True)
            sys.exit(DataError.exit_code)

    return wrapper


@click.group(context_settings={"help_option_names": ["-h", "--help"]})
@click.version_option(message="mlrh %(version)s")
def main() -> None:
    """Supervised discrete hashing with mutual linear regression and hash boosting."""


@main.command("gen")
@click.option("--classes", type=int, default=10, show_default=True)
@click.option("--dim", type=int, default=50, show_default=True)
@click.option("--per-class", type=int, default=200, show_default=True)
@click.option("--spread", type=float, default=0.3, show_default=True)
@click.option("--center-scale", type=float, default=3.0, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--query-fraction", type=float, default=None, help="Also write a stratified train/query split.")
@click.option("--out-dir", type=click.Path(file_okay=False, path_type=Path), required=True)
@click.option("--verbose", is_flag=True, default=False, help="Increase logging verbosity.")
@_exit_codes
def gen_command(
    classes: int,
    dim: int,
    per_class: int,
    spread: float,
    center_scale: float,
    seed: int,
    query_fraction: Optional[float],
    out_dir: Path,
    verbose: bool,
) -> None:
    """Generate a seeded Gaussian-cluster dataset as MatrixFile features and labels."""
    logger = configure_logging(verbose=verbose, logger_name="mlrhash.cli")
    if seed < 0:
        raise UsageError(f"seed must be non-negative, got {seed}")
    spec = SyntheticSpec(
        num_classes=classes,
        dim=dim,
        per_class=per_class,
        cluster_spread=spread,
        center_scale=center_scale,
        seed=seed,
    )
    dataset = gen_synthetic(spec)
    outputs: List[Tuple[str, Dataset]] = [("", dataset)]
    if query_fraction is not None:
        train_set, query_set = split(dataset, query_fraction, seed)
        outputs += [("train.", train_set), ("query.", query_set)]

    echo = "".join(f"{field.name} = {getattr(spec, field.name)}\n" for field in dataclasses.fields(spec))
    if query_fraction is not None:
        echo += f"query_fraction = {query_fraction}\n"
    for prefix, part in outputs:
        features_path = save_matrix(part.features, MatrixDtype.F32, out_dir / f"{prefix}features.mlrh")
        labels_path = save_matrix(part.labels, MatrixDtype.I8, out_dir / f"{prefix}labels.mlrh")
        for path in (features_path, labels_path):
            write_config_sidecar(path, echo)
        logger.info("Wrote %d samples to %s and %s", part.n, features_path, labels_path)
    click.echo(f"Generated {dataset.n} samples ({classes} classes, {dim} dimensions) in {out_dir}")


@main.command("train")
@_input_options
@click.option("--model", "model_path", type=click.Path(dir_okay=False, path_type=Path), required=True)
@click.option("--report", "report_path", type=click.Path(dir_okay=False, path_type=Path), default=None, help="Objective trace and diagnostics CSV.")
@click.option("--codes", "codes_path", type=click.Path(dir_okay=False, path_type=Path), default=None, help="Database codes of the training set.")
@_training_options
@_common_options
@_exit_codes
def train_command(
    features: Optional[Path],
    labels: Optional[Path],
    csv_path: Optional[Path],
    ids_path: Optional[Path],
    num_classes: Optional[int],
    model_path: Path,
    report_path: Optional[Path],
    codes_path: Optional[Path],
    config_path: Optional[Path],
    ledger: Optional[Path],
    verbose: bool,
    **overrides: Any,
) -> None:
    """Train a single model and write it as a model file."""
    logger = configure_logging(verbose=verbose, logger_name="mlrhash.cli")
    config = _prepare_config(config_path, ledger, overrides)
    dataset = _load_dataset(features, labels, csv_path, ids_path, num_classes)
    hp = Hyperparams.from_config(config)
    logger.info("Training %d-bit model on %d samples (d=%d, c=%d)", hp.bits, dataset.n, dataset.features.shape[0], dataset.labels.shape[0])

    with _ledger_run(config, "train") as run:
        rbf, v = _feature_map(dataset, config)
        model, state, report = train(v, dataset.labels, hp, config.numerics)
        model.rbf = rbf
        diagnostics = baseline_diagnostics(state.h, dataset.labels, hp.lam)

        _save_model(model, model_path, config)
        if report_path is not None:
            rows = _trace_rows(0, report.objective_trace)
            rows += _diagnostic_rows(0, report.iterations_run, diagnostics)
            write_csv(report_path, REPORT_HEADER, rows, config.to_text())
        if codes_path is not None:
            db = state.h if config.db_codes == "hf" else model.encode(dataset.features)
            _save_codes(db, codes_path, config)
        run.event("trace", "objective trace", {"objective": report.objective_trace, **diagnostics})

    click.echo(
        f"Trained {hp.bits}-bit model in {report.iterations_run} iterations "
        f"(objective {report.objective_trace[-1]:.6f}, converged={report.converged}) -> {model_path}"
    )


@main.command("boost")
@_input_options
@click.option("--model", "model_path", type=click.Path(dir_okay=False, path_type=Path), required=True)
@click.option("--provenance", "provenance_path", type=click.Path(dir_okay=False, path_type=Path), default=None, help="Defaults to <model>.prov.")
@click.option("--report", "report_path", type=click.Path(dir_okay=False, path_type=Path), default=None)
@click.option("--codes", "codes_path", type=click.Path(dir_okay=False, path_type=Path), default=None)
@_training_options
@_common_options
@_exit_codes
def boost_command(
    features: Optional[Path],
    labels: Optional[Path],
    csv_path: Optional[Path],
    ids_path: Optional[Path],
    num_classes: Optional[int],
    model_path: Path,
    provenance_path: Optional[Path],
    report_path: Optional[Path],
    codes_path: Optional[Path],
    config_path: Optional[Path],
    ledger: Optional[Path],
    verbose: bool,
    **overrides: Any,
) -> None:
    """Train T models and assemble the most balanced bits into one boosted model."""
    logger = configure_logging(verbose=verbose, logger_name="mlrhash.cli")
    config = _prepare_config(config_path, ledger, overrides)
    dataset = _load_dataset(features, labels, csv_path, ids_path, num_classes)
    hp = Hyperparams.from_config(config)
    logger.info("Boosting %d runs of %d bits on %d samples", config.runs, hp.bits, dataset.n)

    with _ledger_run(config, "boost") as run:
        rbf, v = _feature_map(dataset, config)
        result, ensemble = boost_train(v, dataset.labels, hp, config.runs, config.numerics, config.effective_threads())
        model = finalize_model(result, rbf, hp)
        diagnostics = baseline_diagnostics(result.h_f, dataset.labels, hp.lam)

        _save_model(model, model_path, config)
        provenance_path = provenance_path or model_path.with_name(model_path.name + ".prov")
        write_provenance(result, provenance_path)
        if report_path is not None:
            rows: List[List[object]] = []
            for index, boost_run in enumerate(ensemble.runs):
                rows += _trace_rows(index, boost_run.report.objective_trace)
            rows += _diagnostic_rows(len(ensemble.runs), 0, diagnostics)
            write_csv(report_path, REPORT_HEADER, rows, config.to_text())
        if codes_path is not None:
            db = result.h_f if config.db_codes == "hf" else model.encode(dataset.features)
            _save_codes(db, codes_path, config)
        run.event("boost", "assembled boosted code space", {"provenance": result.provenance, **diagnostics})

    click.echo(f"Boosted {hp.bits} bits from {config.runs} runs -> {model_path} (provenance {provenance_path})")


@main.command("encode")
@click.option("--model", "model_path", type=click.Path(exists=True, dir_okay=False, path_type=Path), required=True)
@click.option("--features", type=click.Path(exists=True, dir_okay=False, path_type=Path), default=None)
@click.option("--csv", "csv_path", type=click.Path(exists=True, dir_okay=False, path_type=Path), default=None)
@click.option("--out", "out_path", type=click.Path(dir_okay=False, path_type=Path), required=True)
@_common_options
@_exit_codes
def encode_command(
    model_path: Path,
    features: Optional[Path],
    csv_path: Optional[Path],
    out_path: Path,
    config_path: Optional[Path],
    ledger: Optional[Path],
    verbose: bool,
) -> None:
    """Encode samples with a trained model: sgn(P^T x)."""
    logger = configure_logging(verbose=verbose, logger_name="mlrhash.cli")
    config = _prepare_config(config_path, ledger, {})
    if (features is None) == (csv_path is None):
        raise UsageError("provide exactly one of --features or --csv")
    x = load_matrix(features) if features is not None else load_feature_csv(csv_path)
    model = load_model(model_path)
    with _ledger_run(config, "encode"):
        codes = _save_codes(model.encode(x), out_path, config)
    logger.info("Encoded %d samples with %s", codes.n, model_path)
    click.echo(f"Encoded {codes.n} samples into {codes.bits}-bit codes -> {out_path}")


@main.command("search")
@click.option("--db", "db_path", type=click.Path(exists=True, dir_okay=False, path_type=Path), required=True)
@click.option("--queries", "queries_path", type=click.Path(exists=True, dir_okay=False, path_type=Path), required=True)
@click.option("-k", "--top-k", "k", type=int, default=10, show_default=True)
@click.option("--out", "out_path", type=click.Path(dir_okay=False, path_type=Path), default=None, help="CSV destination; stdout when omitted.")
@_common_options
@_exit_codes
def search_command(
    db_path: Path,
    queries_path: Path,
    k: int,
    out_path: Optional[Path],
    config_path: Optional[Path],
    ledger: Optional[Path],
    verbose: bool,
) -> None:
    """Exact k-nearest-neighbour search by Hamming distance."""
    configure_logging(verbose=verbose, logger_name="mlrhash.cli")
    config = _prepare_config(config_path, ledger, {})
    db = load_codes(db_path)
    queries = load_codes(queries_path)
    with _ledger_run(config, "search"):
        rows = [
            [q, rank, index, distance]
            for q in range(queries.n)
            for rank, (index, distance) in enumerate(knn(db, queries.code(q), k))
        ]
        if out_path is not None:
            write_csv(out_path, SEARCH_HEADER, rows, config.to_text())
    if out_path is None:
        click.echo(",".join(SEARCH_HEADER))
        for row in rows:
            click.echo(",".join(str(item) for item in row))
    else:
        click.echo(f"Wrote {len(rows)} neighbours for {queries.n} queries -> {out_path}")


@main.command("eval")
@click.option("--db-codes", "db_path", type=click.Path(exists=True, dir_okay=False, path_type=Path), required=True)
@click.option("--query-codes", "queries_path", type=click.Path(exists=True, dir_okay=False, path_type=Path), required=True)
@click.option("--db-labels", type=click.Path(exists=True, dir_okay=False, path_type=Path), required=True)
@click.option("--query-labels", type=click.Path(exists=True, dir_okay=False, path_type=Path), required=True)
@click.option("--precision-k", type=int, multiple=True, default=(), help="Repeat for several K.")
@click.option("--map-cutoff", type=int, default=None, help="Truncate mAP to the top K items.")
@click.option("--method", type=str, default=SINGLE, show_default=True, help="Method name written to the CSV.")
@click.option("--out", "out_path", type=click.Path(dir_okay=False, path_type=Path), default=None)
@_common_options
@_exit_codes
def eval_command(
    db_path: Path,
    queries_path: Path,
    db_labels: Path,
    query_labels: Path,
    precision_k: Sequence[int],
    map_cutoff: Optional[int],
    method: str,
    out_path: Optional[Path],
    config_path: Optional[Path],
    ledger: Optional[Path],
    verbose: bool,
) -> None:
    """Hamming-rank the database for every query and report mAP and precision@K."""
    configure_logging(verbose=verbose, logger_name="mlrhash.cli")
    config = _prepare_config(config_path, ledger, {"map_cutoff": map_cutoff})
    db = load_codes(db_path)
    queries = load_codes(queries_path)
    oracle = RelevanceOracle(
        query_labels=load_matrix(query_labels, as_labels=True),
        db_labels=load_matrix(db_labels, as_labels=True),
    )
    if oracle.db_size != db.n or oracle.num_queries != queries.n:
        raise DataError(
            f"labels cover {oracle.db_size} database / {oracle.num_queries} query items, "
            f"codes hold {db.n} / {queries.n}"
        )
    with _ledger_run(config, "eval") as run:
        rows = score_codes(db, queries, oracle, method, config.seed, precision_k, config.map_cutoff)
        _emit_metrics(rows, out_path, config, run)


@main.command("retrieval")
@_setup_options
@click.option("--skip-single", is_flag=True, default=False)
@click.option("--skip-boost", is_flag=True, default=False)
@click.option("--out", "out_path", type=click.Path(dir_okay=False, path_type=Path), default=None)
@_training_options
@_common_options
@_exit_codes
def retrieval_command(
    skip_single: bool,
    skip_boost: bool,
    out_path: Optional[Path],
    config_path: Optional[Path],
    ledger: Optional[Path],
    verbose: bool,
    **options: Any,
) -> None:
    """Synthetic retrieval benchmark: single-run and boosted models on one seeded split."""
    configure_logging(verbose=verbose, logger_name="mlrhash.cli")
    setup_args = {key: options.pop(key) for key in SETUP_KEYS}
    config = _prepare_config(config_path, ledger, options)
    setup = _benchmark_setup(config, setup_args)
    with _ledger_run(config, "retrieval") as run:
        rows = retrieval_benchmark(
            setup,
            Hyperparams.from_config(config),
            config.runs,
            config.numerics,
            config.effective_threads(),
            include_single=not skip_single,
            include_boost=not skip_boost,
        )
        _emit_metrics(rows, out_path, config, run)


@main.command("sweep")
@_setup_options
@click.option("--alpha-grid", type=float, multiple=True, default=(0.1, 0.5, 1.0, 2.0, 5.0), show_default=True)
@click.option("--beta-grid", type=float, multiple=True, default=(1e-6, 1e-4, 1e-2, 1.0), show_default=True)
@click.option("--bits-list", type=int, multiple=True, default=(32,), show_default=True)
@click.option("--out", "out_path", type=click.Path(dir_okay=False, path_type=Path), default=None)
@_training_options
@_common_options
@_exit_codes
def sweep_command(
    alpha_grid: Sequence[float],
    beta_grid: Sequence[float],
    bits_list: Sequence[int],
    out_path: Optional[Path],
    config_path: Optional[Path],
    ledger: Optional[Path],
    verbose: bool,
    **options: Any,
) -> None:
    """Parameter sensitivity: retrieval quality over alpha, beta and code-length grids."""
    configure_logging(verbose=verbose, logger_name="mlrhash.cli")
    setup_args = {key: options.pop(key) for key in SETUP_KEYS}
    config = _prepare_config(config_path, ledger, options)
    setup = _benchmark_setup(config, setup_args)
    with _ledger_run(config, "sweep") as run:
        rows = parameter_sweep(setup, Hyperparams.from_config(config), alpha_grid, beta_grid, bits_list, config.numerics)
        _emit_metrics(rows, out_path, config, run)


@main.command("bench")
@click.option("--n", "ns", type=int, multiple=True, default=(8000, 16000, 32000), show_default=True)
@click.option("--bits-list", type=int, multiple=True, default=(16,), show_default=True)
@click.option("--iterations", type=int, default=5, show_default=True, help="Outer iterations per timed training.")
@click.option("--repeats", type=int, default=3, show_default=True, help="Timed trainings per cell; the median is reported.")
@click.option("--classes", type=int, default=10, show_default=True)
@click.option("--dim", type=int, default=50, show_default=True)
@click.option("--scan-queries", type=int, default=100, show_default=True, help="Queries for the scan throughput measurement; 0 skips it.")
@click.option("--correlation-runs", type=int, default=0, show_default=True, help="Boosting runs for the bit-correlation measurement; 0 skips it.")
@click.option("--out", "out_path", type=click.Path(dir_okay=False, path_type=Path), default=None)
@_training_options
@_common_options
@_exit_codes
def bench_command(
    ns: Sequence[int],
    bits_list: Sequence[int],
    iterations: int,
    repeats: int,
    classes: int,
    dim: int,
    scan_queries: int,
    correlation_runs: int,
    out_path: Optional[Path],
    config_path: Optional[Path],
    ledger: Optional[Path],
    verbose: bool,
    **overrides: Any,
) -> None:
    """Training-time scaling in n and L, scan throughput and boosted bit correlation."""
    configure_logging(verbose=verbose, logger_name="mlrhash.cli")
    config = _prepare_config(config_path, ledger, overrides)
    if not ns or min(ns) < 1 or not bits_list or min(bits_list) < 1:
        raise UsageError("--n and --bits-list need positive values")
    if scan_queries < 0 or correlation_runs < 0:
        raise UsageError("--scan-queries and --correlation-runs must be non-negative")
    if iterations < 1 or repeats < 1:
        raise UsageError("--iterations and --repeats must be at least 1")
    hp = Hyperparams.from_config(config)

    with _ledger_run(config, "bench") as run:
        timed_hp = dataclasses.replace(hp, max_outer=iterations)
        cells = scaling_bench(ns, bits_list, timed_hp, classes, dim, config.numerics, repeats)
        rows = scaling_summary(cells)
        largest = max(cell.n for cell in cells)
        for bits in bits_list:
            if scan_queries:
                rate = scan_throughput(largest, bits, scan_queries, hp.seed)
                rows.append(BenchRow("scan_codes_per_second", largest, bits, rate))
            if correlation_runs:
                corr = boosted_bit_correlation(
                    largest,
                    dataclasses.replace(hp, bits=bits),
                    correlation_runs,
                    classes,
                    dim,
                    config.numerics,
                    config.effective_threads(),
                )
                rows.append(BenchRow("max_bit_correlation", largest, bits, corr))
        if out_path is not None:
            write_csv(out_path, BENCH_HEADER, [row.as_row() for row in rows], config.to_text())
        run.event("bench", "scaling summary", {"rows": [row.as_row() for row in rows]})

    for row in rows:
        click.echo(f"{row.metric:<36} n={row.n:<7} bits={row.bits:<4} {row.value:.6g}")


class _Ledger:
    """Facade over the optional run ledger; every method is a no-op without a store."""

    def __init__(self, store: Optional[SQLiteRunStore], run_id: str) -> None:
        self.store = store
        self.run_id = run_id

    def metrics(self, rows: Iterable[MetricRow]) -> None:
        if self.store is not None:
            self.store.record_metrics(self.run_id, [dataclasses.astuple(row) for row in rows])

    def event(self, event_type: str, message: str, payload: Optional[Dict[str, Any]] = None) -> None:
        if self.store is not None:
            self.store.record_event(self.run_id, event_type, message, payload)


@contextmanager
def _ledger_run(config: RunConfig, command: str) -> Iterator[_Ledger]:
    if config.paths.ledger is None:
        yield _Ledger(None, "")
        return
    store = SQLiteRunStore(config.paths.ledger)
    run_id = _generate_run_id()
    store.record_run_start(run_id, command, config.to_dict())
    LOGGER.info("Run ID: %s", run_id)
    try:
        yield _Ledger(store, run_id)
    except Exception as exc:
        store.record_run_complete(run_id, "failed", str(exc))
        raise
    store.record_run_complete(run_id, "succeeded")


def _prepare_config(config_path: Optional[Path], ledger: Optional[Path], overrides: Dict[str, Any]) -> RunConfig:
    config = load_config(config_path)
    if ledger is not None:
        config.paths.ledger = ledger
    return apply_overrides(config, overrides)


def _generate_run_id() -> str:
    timestamp = datetime.now(timezone.utc).strftime("%Y%m%d%H%M%S")
    suffix = uuid.uuid4().hex[:6]
    return f"run-{timestamp}-{suffix}"


def _load_dataset(
    features: Optional[Path],
    labels: Optional[Path],
    csv_path: Optional[Path],
    ids_path: Optional[Path],
    num_classes: Optional[int],
) -> Dataset:
    if csv_path is not None:
        if ids_path is None:
            raise UsageError("--csv needs --ids")
        return load_csv(csv_path, ids_path, num_classes)
    if features is None or labels is None:
        raise UsageError("provide --features and --labels, or --csv and --ids")
    return Dataset(features=load_matrix(features), labels=load_matrix(labels, as_labels=True))


def _feature_map(dataset: Dataset, config: RunConfig) -> Tuple[Optional[RbfMap], DenseMatrix]:
    if config.rbf_m == 0:
        return None, dataset.features
    rbf = fit_rbf(dataset.features, config.rbf_m, config.seed, config.numerics)
    return rbf, apply_rbf(rbf, dataset.features)


def _benchmark_setup(config: RunConfig, setup_args: Dict[str, Any]) -> BenchmarkSetup:
    return BenchmarkSetup(
        num_classes=setup_args["classes"],
        dim=setup_args["dim"],
        per_class=setup_args["per_class"],
        cluster_spread=setup_args["spread"],
        center_scale=setup_args["center_scale"],
        query_fraction=setup_args["query_fraction"],
        rbf_m=config.rbf_m,
        precision_k=tuple(setup_args["precision_k"]),
        map_cutoff=config.map_cutoff,
        db_codes=config.db_codes,
    )


def _save_model(model: TrainedModel, path: Path, config: RunConfig) -> None:
    save_model(model, path)
    write_config_sidecar(path, config.to_text())
    LOGGER.info("Wrote model to %s", path)


def _save_codes(h: DenseMatrix, path: Path, config: RunConfig) -> PackedCodes:
    codes = pack(h)
    save_codes(codes, path)
    write_config_sidecar(path, config.to_text())
    LOGGER.info("Wrote %d codes to %s", codes.n, path)
    return codes


def _trace_rows(run_index: int, trace: Sequence[float]) -> List[List[object]]:
    return [["objective", run_index, iteration, repr(float(value))] for iteration, value in enumerate(trace)]


def _diagnostic_rows(run_index: int, iteration: int, diagnostics: Dict[str, float]) -> List[List[object]]:
    return [[name, run_index, iteration, repr(float(value))] for name, value in diagnostics.items()]


def _emit_metrics(rows: List[MetricRow], out_path: Optional[Path], config: RunConfig, run: _Ledger) -> None:
    if out_path is not None:
        write_csv(out_path, METRIC_HEADER, [row.as_row() for row in rows], config.to_text())
    run.metrics(rows)
    echo_summary(rows)
