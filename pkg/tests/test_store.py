import json
import sqlite3

from mlrhash.persistence import SQLiteRunStore


def test_store_records_runs_metrics_and_events(tmp_path):
    store = SQLiteRunStore(tmp_path / "ledger" / "runs.db")
    store.record_run_start("run-1", "train", {"alpha": 1.0, "bits": 32})
    store.record_metrics("run-1", [("map", 32, "s2dhmlr", 0, 0.75)])
    store.record_event("run-1", "trace", "objective trace", {"objective": [3.0, 2.0]})
    store.record_run_complete("run-1", "succeeded")

    runs = store.fetch_runs()
    assert runs == [
        {
            "run_id": "run-1",
            "command": "train",
            "status": "succeeded",
            "config_json": json.dumps({"alpha": 1.0, "bits": 32}),
            "error": None,
        }
    ]
    with sqlite3.connect(tmp_path / "ledger" / "runs.db") as conn:
        metrics = conn.execute("SELECT metric, bits, method, seed, value FROM metrics").fetchall()
        events = conn.execute("SELECT event_type, payload_json FROM run_events").fetchall()
    assert metrics == [("map", 32, "s2dhmlr", 0, 0.75)]
    assert events == [("trace", json.dumps({"objective": [3.0, 2.0]}))]


def test_failed_runs_keep_their_error(tmp_path):
    store = SQLiteRunStore(tmp_path / "runs.db")
    store.record_run_start("run-2", "boost", {})
    store.record_run_complete("run-2", "failed", "boost run 1: Cholesky factorization failed")
    assert store.fetch_runs()[0]["error"].startswith("boost run 1")
