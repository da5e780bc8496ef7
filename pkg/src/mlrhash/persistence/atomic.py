from __future__ import annotations

import csv
import io
import os
import tempfile
from pathlib import Path
from typing import Iterable, Optional, Sequence


def atomic_write_bytes(path: Path, data: bytes) -> Path:
    """
    Write *data* to *path* through a temporary sibling file and an atomic rename.

    Readers never observe a partially written artifact; on failure the temporary
    file is removed and the destination is left untouched.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    handle, tmp_name = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=path.parent)
    try:
        with os.fdopen(handle, "wb") as tmp:
            tmp.write(data)
            tmp.flush()
            os.fsync(tmp.fileno())
        os.replace(tmp_name, path)
    except BaseException:
        Path(tmp_name).unlink(missing_ok=True)
        raise
    return path


def atomic_write_text(path: Path, text: str) -> Path:
    return atomic_write_bytes(path, text.encode("utf-8"))


def write_csv(
    path: Path,
    header: Sequence[str],
    rows: Iterable[Sequence[object]],
    config_text: Optional[str] = None,
) -> Path:
    """Write a CSV file whose leading `#` lines echo the effective config."""
    buffer = io.StringIO()
    if config_text:
        for line in config_text.splitlines():
            buffer.write(f"# {line}\n")
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow(row)
    return atomic_write_text(path, buffer.getvalue())


def write_config_sidecar(artifact: Path, config_text: str) -> Path:
    """Echo the effective config next to a binary artifact as `<artifact>.config`."""
    artifact = Path(artifact)
    return atomic_write_text(artifact.with_name(artifact.name + ".config"), config_text)
