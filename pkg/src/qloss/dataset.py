"""Loading of qubit measurement tables (bundled reference set and user CSVs)."""

from __future__ import annotations

import csv
from importlib import resources
from pathlib import Path
from typing import Iterable, List, Optional, Union

from .types import QubitRecord, ValidationError

BUNDLED_QUBITS = "qubits_table2.csv"

_COLUMNS = [
    "label",
    "film_thickness",
    "f_q",
    "f_r",
    "detuning",
    "t1_mean",
    "t1_std",
    "t2echo_mean",
    "t2echo_std",
    "t_purcell",
    "q_factor",
    "included",
]


def _opt_float(text: str) -> Optional[float]:
    text = text.strip()
    return float(text) if text else None


def _parse_row(row: dict, line: int) -> QubitRecord:
    try:
        return QubitRecord(
            label=row["label"].strip(),
            film_thickness=float(row["film_thickness"]),
            f_q=float(row["f_q"]),
            f_r=float(row["f_r"]),
            detuning=float(row["detuning"]),
            t1_mean=float(row["t1_mean"]),
            t1_std=float(row["t1_std"]),
            t2echo_mean=_opt_float(row.get("t2echo_mean") or ""),
            t2echo_std=_opt_float(row.get("t2echo_std") or ""),
            t_purcell=float(row["t_purcell"]),
            q_factor=float(row["q_factor"]),
            included=row.get("included", "true").strip().lower() in ("true", "1", "yes"),
        )
    except (KeyError, ValueError, ValidationError) as exc:
        raise ValidationError(f"line {line}: {exc}") from exc


def read_qubit_csv(lines: Iterable[str]) -> List[QubitRecord]:
    reader = csv.DictReader(lines)
    missing = [c for c in _COLUMNS if c not in (reader.fieldnames or [])]
    if missing:
        raise ValidationError(f"missing columns: {', '.join(missing)}")
    records = [_parse_row(row, i) for i, row in enumerate(reader, start=2)]
    if not records:
        raise ValidationError("no qubit rows found")
    return records


def load_qubits(path: Union[str, Path, None] = None) -> List[QubitRecord]:
    """Load a qubit dataset CSV; with no path, load the bundled reference set."""
    if path is None:
        text = resources.files("qloss").joinpath("data", BUNDLED_QUBITS).read_text()
        return read_qubit_csv(text.splitlines())
    with open(path, newline="") as fh:
        return read_qubit_csv(fh)
