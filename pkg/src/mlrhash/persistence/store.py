from __future__ import annotations

import json
import sqlite3
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Tuple


class SQLiteRunStore:
    """
    SQLite ledger of command invocations.

    The schema follows a runs/metrics/events model: one row per command, the
    metric rows it emitted, and free-form events such as objective traces.
    """

    def __init__(self, db_path: Path) -> None:
        self._db_path = Path(db_path)
        self._db_path.parent.mkdir(parents=True, exist_ok=True)

    def initialize(self) -> None:
        with self._connect() as conn:
            conn.executescript(
                """
                CREATE TABLE IF NOT EXISTS runs (
                    id INTEGER PRIMARY KEY AUTOINCREMENT,
                    run_id TEXT NOT NULL UNIQUE,
                    command TEXT NOT NULL,
                    started_at TEXT NOT NULL,
                    completed_at TEXT,
                    status TEXT,
                    config_json TEXT,
                    error TEXT
                );

                CREATE TABLE IF NOT EXISTS metrics (
                    id INTEGER PRIMARY KEY AUTOINCREMENT,
                    run_id TEXT NOT NULL,
                    metric TEXT NOT NULL,
                    bits INTEGER,
                    method TEXT,
                    seed INTEGER,
                    value REAL
                );

                CREATE TABLE IF NOT EXISTS run_events (
                    id INTEGER PRIMARY KEY AUTOINCREMENT,
                    run_id TEXT NOT NULL,
                    event_type TEXT NOT NULL,
                    message TEXT,
                    payload_json TEXT,
                    created_at TEXT NOT NULL
                );
                """
            )

    def record_run_start(self, run_id: str, command: str, config: Dict[str, Any]) -> None:
        self.initialize()
        with self._connect() as conn:
            conn.execute(
                """
                INSERT INTO runs (run_id, command, started_at, status, config_json)
                VALUES (?, ?, ?, ?, ?)
                """,
                (run_id, command, self._timestamp(), "running", json.dumps(config)),
            )

    def record_run_complete(self, run_id: str, status: str, error: Optional[str] = None) -> None:
        with self._connect() as conn:
            conn.execute(
                """
                UPDATE runs
                SET completed_at = ?, status = ?, error = ?
                WHERE run_id = ?
                """,
                (self._timestamp(), status, error, run_id),
            )

    def record_metrics(self, run_id: str, rows: Iterable[Tuple[str, int, str, int, float]]) -> None:
        with self._connect() as conn:
            conn.executemany(
                """
                INSERT INTO metrics (run_id, metric, bits, method, seed, value)
                VALUES (?, ?, ?, ?, ?, ?)
                """,
                [(run_id, metric, bits, method, seed, float(value)) for metric, bits, method, seed, value in rows],
            )

    def record_event(
        self,
        run_id: str,
        event_type: str,
        message: str,
        payload: Optional[Dict[str, Any]] = None,
    ) -> None:
        with self._connect() as conn:
            conn.execute(
                """
                INSERT INTO run_events (run_id, event_type, message, payload_json, created_at)
                VALUES (?, ?, ?, ?, ?)
                """,
                (run_id, event_type, message, json.dumps(payload or {}), self._timestamp()),
            )

    def fetch_runs(self) -> List[Dict[str, Any]]:
        with self._connect() as conn:
            conn.row_factory = sqlite3.Row
            rows = conn.execute("SELECT run_id, command, status, config_json, error FROM runs ORDER BY id").fetchall()
        return [dict(row) for row in rows]

    def _connect(self) -> sqlite3.Connection:
        return sqlite3.connect(self._db_path)

    @staticmethod
    def _timestamp() -> str:
        return datetime.now(timezone.utc).isoformat()
