"""File formats, run manifests and number formatting."""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import os
import re
from datetime import datetime, timezone
from importlib import resources
from pathlib import Path
from typing import Iterable

import numpy as np

from . import __version__
from .calibration import CouplerMeasurement, MeasurementTable
from .errors import InvalidArgument, ParseError, ValidationError
from .semiclassical import SweepRecord
from .states import MubLabel, PhotonState, basis_state, mub_state
from .unitary import CircuitLayout

TABLE_COLUMNS = ("d_m_um", "l_c_mm", "P4", "P3")
SWEEP_COLUMNS = ("dx_um", "epsilon_rad", "P1", "P2")
BUNDLED_TABLE = "table1.csv"


def fmt(x) -> str:
    """12 significant digits; magnitudes below 1e-15 print as 0."""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if abs(x) < 1e-15:
            return "0"
        return f"{x:.12g}"
    return str(x)


def rounded(obj):
    """Copy of a JSON-ready object with floats cut to 12 significant digits."""
    if isinstance(obj, dict):
        return {k: rounded(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [rounded(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        if not math.isfinite(v):
            return None
        return 0.0 if abs(v) < 1e-15 else float(f"{v:.12g}")
    return obj


def dumps(obj) -> str:
    return json.dumps(rounded(obj), indent=2) + "\n"


def file_digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 16), b""):
            h.update(chunk)
    return "sha256:" + h.hexdigest()


def timestamp() -> str:
    """UTC time of the run; pinned by ``SOURCE_DATE_EPOCH`` when set."""
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    t = datetime.fromtimestamp(int(epoch), timezone.utc) if epoch else datetime.now(timezone.utc)
    return t.replace(microsecond=0).isoformat()


def manifest(command: str, inputs: dict | None = None, seed: int | None = None, **extra) -> dict:
    m = {
        "command": command,
        "inputs": dict(inputs or {}),
        "seed": seed,
        "version": __version__,
        "timestamp": timestamp(),
    }
    m.update(extra)
    return m


def manifest_comment(m: dict) -> str:
    """Manifest as ``#`` comment lines for CSV outputs."""
    lines = []
    for k, v in m.items():
        if isinstance(v, dict):
            v = json.dumps(v, sort_keys=True)
        lines.append(f"# {k}: {v if v is not None else ''}")
    return "\n".join(lines) + "\n"


def write_csv(header: Iterable[str], rows: Iterable[Iterable], m: dict | None = None) -> str:
    buf = io.StringIO()
    if m is not None:
        buf.write(manifest_comment(m))
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) for v in row])
    return buf.getvalue()


def _read_text(source) -> tuple[str, str | None]:
    if hasattr(source, "read"):
        return source.read(), None
    path = Path(source)
    try:
        return path.read_text(encoding="utf-8"), file_digest(path)
    except (OSError, UnicodeDecodeError) as exc:
        raise ParseError(f"cannot read {path}: {exc}") from None


def _csv_lines(text: str):
    """Yield ``(line_number, fields)`` for non-blank, non-comment lines."""
    for n, line in enumerate(text.splitlines(), start=1):
        s = line.strip()
        if not s or s.startswith("#"):
            continue
        try:
            fields = next(csv.reader([s]))
        except csv.Error as exc:
            raise ParseError(f"unreadable CSV line: {exc}", n) from None
        yield n, [f.strip() for f in fields]


def _comments(text: str) -> dict:
    meta = {}
    for line in text.splitlines():
        m = re.match(r"\s*#\s*([^:]+?)\s*:\s*(.*?)\s*$", line)
        if m:
            meta[m.group(1)] = m.group(2)
    return meta


def _floats(fields, n, width):
    if len(fields) != width:
        raise ParseError(f"expected {width} fields, got {len(fields)}", n)
    try:
        vals = [float(f) for f in fields]
    except ValueError:
        raise ParseError(f"non-numeric field in {fields}", n) from None
    if not all(math.isfinite(v) for v in vals):
        raise ParseError(f"non-finite value in {fields}", n)
    return vals


def parse_measurement_table(source) -> MeasurementTable:
    """Read ``d_m_um,l_c_mm,P4,P3`` rows.

    Each P4/P3 pair may be fractions or percent; the scale is picked per row
    from whether the pair sums near 1 or near 100, then renormalized to 1.
    ``# key: value`` comment lines become table metadata.
    """
    text, digest = _read_text(source)
    lines = _csv_lines(text)
    first = next(lines, None)
    if first is None:
        raise ParseError("empty measurement table", 1)
    n, header = first
    if tuple(header) != TABLE_COLUMNS:
        raise ParseError(f"header must be {','.join(TABLE_COLUMNS)}, got {','.join(header)}", n)
    records, bad = [], []
    for n, fields in lines:
        d, lc, p4, p3 = _floats(fields, n, 4)
        total = p4 + p3
        scale = 100.0 if abs(total - 100) <= 100 * 0.02 else 1.0
        if abs(total / scale - 1) > 0.02 or p4 < 0 or p3 < 0 or d <= 0 or lc <= 0:
            bad.append(n)
            continue
        records.append((n, CouplerMeasurement.normalized(d, lc, p4, p3)))
    if bad:
        raise ValidationError("P4 + P3 must be 1 (or 100) within 2%, with positive d_m and l_c", bad)
    if not records:
        raise ParseError("measurement table has a header but no records", n)
    seen = {}
    for n, r in records:
        if r.key in seen:
            raise ValidationError(f"duplicate (d_m, l_c) = {r.key}", [seen[r.key], n])
        seen[r.key] = n
    meta = _comments(text)
    if digest:
        meta.setdefault("digest", digest)
    return MeasurementTable(tuple(r for _, r in records), meta)


def serialize_measurement_table(table: MeasurementTable) -> str:
    buf = io.StringIO()
    for k, v in table.metadata.items():
        buf.write(f"# {k}: {v}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(TABLE_COLUMNS)
    for r in table.records:
        w.writerow([repr(r.d_m), repr(r.l_c), repr(r.P4), repr(r.P3)])
    return buf.getvalue()


def bundled_table_path() -> Path:
    return Path(str(resources.files("iqop.data").joinpath(BUNDLED_TABLE)))


def load_bundled_table() -> MeasurementTable:
    return parse_measurement_table(bundled_table_path())


def parse_sweep(source) -> list[SweepRecord]:
    text, _ = _read_text(source)
    lines = _csv_lines(text)
    first = next(lines, None)
    if first is None:
        raise ParseError("empty sweep file", 1)
    n, header = first
    if tuple(header) != SWEEP_COLUMNS:
        raise ParseError(f"header must be {','.join(SWEEP_COLUMNS)}, got {','.join(header)}", n)
    return [SweepRecord(*_floats(fields, n, 4)) for n, fields in lines]


def load_json(source):
    text, digest = _read_text(source)
    try:
        return json.loads(text), digest
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc.msg}", exc.lineno) from None


def load_circuit(source) -> CircuitLayout:
    data, _ = load_json(source)
    try:
        return CircuitLayout.from_dict(data)
    except InvalidArgument as exc:
        raise ParseError(f"invalid circuit: {exc}") from None


_MUB_SPEC = re.compile(r"^\s*([XY])\s*:\s*([DALR])\s*@\s*\(\s*(\d+)\s*,\s*(\d+)\s*\)\s*$")
_MODE_SPEC = re.compile(r"^\s*mode\s*:\s*(\d+)\s*$")


def parse_state(spec: str, n: int) -> PhotonState:
    """``mode:<j>``, ``<X|Y>:<D|A|L|R>@(j,j')`` or a path to a state JSON file."""
    m = _MODE_SPEC.match(spec)
    if m:
        return basis_state(int(m.group(1)), n)
    m = _MUB_SPEC.match(spec)
    if m:
        label = MubLabel(m.group(1), m.group(2))
        return mub_state(label, (int(m.group(3)), int(m.group(4))), n)
    if Path(spec).is_file():
        data, _ = load_json(spec)
        state = PhotonState.from_dict(data)
        if state.dim != n:
            raise InvalidArgument(f"state has {state.dim} modes, circuit has {n}")
        return state
    raise InvalidArgument(f"cannot read state spec {spec!r}")


_ANGLE_LITERALS = {"pi/4": math.pi / 4, "pi/2": math.pi / 2, "pi": math.pi, "3pi/2": 3 * math.pi / 2}


def parse_angle(text: str) -> float:
    """Decimal radians, or one of ``pi/4``, ``pi/2``, ``pi``, ``3pi/2``."""
    key = text.strip().lower().replace(" ", "")
    if key in _ANGLE_LITERALS:
        return _ANGLE_LITERALS[key]
    try:
        v = float(key)
    except ValueError:
        raise InvalidArgument(f"not an angle: {text!r}") from None
    if not math.isfinite(v):
        raise InvalidArgument(f"angle must be finite: {text!r}")
    return v
