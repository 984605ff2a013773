"""Text matrix files, atomic writes and JSON manifests."""

from __future__ import annotations

import csv
import io
import json
import logging
import os
import tempfile
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .errors import ValidationError

log = logging.getLogger(__name__)

SIZE_GUARD = 10**8
FLOAT_FMT = "%.17g"


def load_matrix(path) -> np.ndarray:
    """Read a comma-separated real matrix; lines starting with ``#`` are skipped."""
    path = Path(path)
    if not path.is_file():
        raise ValidationError(f"{path}: no such file")
    rows, width = [], None
    with path.open() as fh:
        for lineno, line in enumerate(fh, 1):
            s = line.strip()
            if not s or s.startswith("#"):
                continue
            tokens = s.split(",")
            if width is None:
                width = len(tokens)
            elif len(tokens) != width:
                raise ValidationError(f"{path}:{lineno}: expected {width} values, found {len(tokens)}")
            try:
                rows.append([float(tok) for tok in tokens])
            except ValueError:
                col = next(i for i, tok in enumerate(tokens, 1) if not _is_float(tok))
                raise ValidationError(
                    f"{path}:{lineno}: non-numeric token {tokens[col - 1].strip()!r} in column {col}"
                ) from None
    if not rows:
        raise ValidationError(f"{path}: no data rows")
    out = np.array(rows, dtype=np.float64)
    if out.size > SIZE_GUARD:
        log.warning("%s holds %d values; text format is slow at this size", path, out.size)
    return out


def _is_float(tok):
    try:
        float(tok)
    except ValueError:
        return False
    return True


def atomic_write(path, data: str | bytes) -> Path:
    """Write via a temporary file in the target directory, then rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data.encode() if isinstance(data, str) else data)
        os.replace(tmp, path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise
    return path


def format_matrix(a, header: str | None = None) -> str:
    a = np.atleast_2d(np.asarray(a, dtype=np.float64))
    if a.size > SIZE_GUARD:
        log.warning("writing %d values as text", a.size)
    buf = io.StringIO()
    np.savetxt(buf, a, fmt=FLOAT_FMT, delimiter=",", header=header or "", comments="# ")
    return buf.getvalue()


def save_matrix(a, path, header: str | None = None) -> Path:
    """Write with 17 significant digits so reading back is exact."""
    return atomic_write(path, format_matrix(a, header))


def to_jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        f = float(obj)
        return f if np.isfinite(f) else str(f)
    if isinstance(obj, Path):
        return str(obj)
    return obj


def dump_json(obj) -> str:
    return json.dumps(to_jsonable(obj), indent=2, sort_keys=True) + "\n"


def write_manifest(path, payload: dict, files=(), timestamp=True) -> dict:
    """Write a JSON manifest listing ``files`` (names relative to its directory).

    The wall-clock time goes in a top-level ``timestamp`` field so manifests
    can be compared with that single key removed.
    """
    path = Path(path)
    manifest = dict(payload)
    manifest["files"] = sorted(Path(f).name for f in files)
    if timestamp:
        manifest["timestamp"] = datetime.now(timezone.utc).isoformat()
    atomic_write(path, dump_json(manifest))
    return manifest


def read_json(path) -> dict:
    path = Path(path)
    if not path.is_file():
        raise ValidationError(f"{path}: no such file")
    try:
        return json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: invalid JSON ({exc})") from None


def without_timestamp(manifest: dict) -> dict:
    return {k: v for k, v in manifest.items() if k != "timestamp"}


def write_table(path, rows, columns) -> Path:
    """CSV with a fixed column order; floats keep full precision."""
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=list(columns), lineterminator="\n", extrasaction="ignore")
    w.writeheader()
    for row in rows:
        w.writerow({k: (repr(float(v)) if isinstance(v, (float, np.floating)) else v) for k, v in row.items()})
    return atomic_write(path, buf.getvalue())
