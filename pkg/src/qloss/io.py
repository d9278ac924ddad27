"""File ingestion and emission: trace CSV, Touchstone s2p, JSON/CSV writers.

All writers are atomic (write to a temp file in the target directory, then
rename), so concurrent runs into distinct output directories never observe
half-written files.
"""

from __future__ import annotations

import csv
import json
import math
import os
import tempfile
from pathlib import Path
from typing import Iterable, List, Optional, Sequence, Union

import numpy as np

from .types import ComplexTrace, ValidationError

PathLike = Union[str, Path]


def read_trace_csv(path: PathLike, applied_power: float = -100.0,
                   line_attenuation: float = 0.0,
                   temperature: float = 0.01) -> ComplexTrace:
    """Read a trace CSV with columns frequency_hz, re_s21, im_s21.

    Power metadata may be embedded as '# key = value' header comments
    (applied_power_dbm, line_attenuation_db, temperature_k) or passed in.
    """
    freqs: List[float] = []
    re: List[float] = []
    im: List[float] = []
    meta = {}
    with open(path, newline="") as fh:
        header: Optional[dict] = None
        for raw in fh:
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                if "=" in line:
                    key, _, value = line.lstrip("#").partition("=")
                    try:
                        meta[key.strip()] = float(value.strip())
                    except ValueError:
                        pass
                continue
            parts = [p.strip() for p in line.split(",")]
            if header is None and not _is_number(parts[0]):
                cols = {name: i for i, name in enumerate(parts)}
                for want in ("frequency_hz", "re_s21", "im_s21"):
                    if want not in cols:
                        raise ValidationError(f"{path}: missing column {want!r}")
                header = cols
                continue
            idx = header or {"frequency_hz": 0, "re_s21": 1, "im_s21": 2}
            try:
                freqs.append(float(parts[idx["frequency_hz"]]))
                re.append(float(parts[idx["re_s21"]]))
                im.append(float(parts[idx["im_s21"]]))
            except (ValueError, IndexError) as exc:
                raise ValidationError(f"{path}: bad data row {line!r}") from exc
    if not freqs:
        raise ValidationError(f"{path}: no data rows")
    return ComplexTrace(
        np.array(freqs),
        np.array(re) + 1j * np.array(im),
        applied_power=meta.get("applied_power_dbm", applied_power),
        line_attenuation=meta.get("line_attenuation_db", line_attenuation),
        temperature=meta.get("temperature_k", temperature),
    )


def _is_number(token: str) -> bool:
    try:
        float(token)
        return True
    except ValueError:
        return False


_S2P_UNIT = {"hz": 1.0, "khz": 1e3, "mhz": 1e6, "ghz": 1e9}


def read_touchstone_s21(path: PathLike, applied_power: float = -100.0,
                        line_attenuation: float = 0.0,
                        temperature: float = 0.01) -> ComplexTrace:
    """Extract S21 from a two-port Touchstone (.s2p) file.

    Supports RI, MA and DB formats; the option line sets the frequency unit.
    """
    unit = 1e9
    fmt = "ma"
    rows: List[List[float]] = []
    with open(path) as fh:
        for raw in fh:
            line = raw.split("!", 1)[0].strip()
            if not line:
                continue
            if line.startswith("#"):
                tokens = line[1:].lower().split()
                for tok in tokens:
                    if tok in _S2P_UNIT:
                        unit = _S2P_UNIT[tok]
                    if tok in ("ri", "ma", "db"):
                        fmt = tok
                continue
            values = [float(t) for t in line.split()]
            rows.append(values)
    data = [r for r in rows if len(r) >= 9]
    if not data:
        raise ValidationError(f"{path}: no two-port data rows found")
    arr = np.array([r[:9] for r in data])
    f = arr[:, 0] * unit
    a, b = arr[:, 3], arr[:, 4]  # S21 pair
    if fmt == "ri":
        s21 = a + 1j * b
    elif fmt == "ma":
        s21 = a * np.exp(1j * np.deg2rad(b))
    else:  # db
        s21 = 10.0 ** (a / 20.0) * np.exp(1j * np.deg2rad(b))
    order = np.argsort(f)
    return ComplexTrace(f[order], s21[order], applied_power=applied_power,
                        line_attenuation=line_attenuation, temperature=temperature)


def read_trace(path: PathLike, **kwargs) -> ComplexTrace:
    """Dispatch on extension: .s2p Touchstone, anything else trace CSV."""
    if str(path).lower().endswith(".s2p"):
        return read_touchstone_s21(path, **kwargs)
    return read_trace_csv(path, **kwargs)


def write_trace_csv(path: PathLike, trace: ComplexTrace) -> None:
    lines = ["# applied_power_dbm = %.10g" % trace.applied_power,
             "# line_attenuation_db = %.10g" % trace.line_attenuation,
             "# temperature_k = %.10g" % trace.temperature,
             "frequency_hz,re_s21,im_s21"]
    for f, z in zip(trace.frequencies, trace.s21):
        lines.append("%.10e,%.10e,%.10e" % (f, z.real, z.imag))
    atomic_write_text(path, "\n".join(lines) + "\n")


def read_decay_csv(path: PathLike):
    """Read a decay trace CSV with columns delay_s, population."""
    delays: List[float] = []
    pops: List[float] = []
    with open(path, newline="") as fh:
        for i, row in enumerate(csv.reader(fh)):
            if not row or row[0].strip().startswith("#"):
                continue
            if i == 0 and not _is_number(row[0]):
                continue
            delays.append(float(row[0]))
            pops.append(float(row[1]))
    return np.array(delays), np.array(pops)


def atomic_write_text(path: PathLike, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_json(path: PathLike, payload) -> None:
    atomic_write_text(path, json.dumps(payload, indent=2, sort_keys=True,
                                       allow_nan=True, default=_jsonify) + "\n")


def _jsonify(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if hasattr(obj, "as_dict"):
        return obj.as_dict()
    raise TypeError(f"cannot serialize {type(obj)!r}")


def write_csv(path: PathLike, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_fmt_cell(v) for v in row))
    atomic_write_text(path, "\n".join(lines) + "\n")


def _fmt_cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        if math.isnan(v):
            return ""
        return "%.10g" % v
    return str(v)
