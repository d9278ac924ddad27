"""Project configuration: shipped defaults, config files, env overrides.

Precedence (lowest to highest): shipped defaults, config file (TOML or
JSON), environment variables, CLI flags. Environment overrides use the
prefix QLOSS_ with double underscores between nesting levels, e.g.

    QLOSS_CALIBRATION__TOTAL_ATTENUATION_DB=71

Geometry and material keys mirror the simulation parameter table; lengths
carry explicit unit suffixes and are converted to SI on access.
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Optional, Union

from .fem.geometry import CpwGeometry, Material, MaterialTable
from .tls import CalibrationContext
from .types import ValidationError

ENV_PREFIX = "QLOSS_"

DEFAULTS: Dict[str, Any] = {
    "seed": 0,
    "photon_qc_convention": "magnitude",  # or "diameter_corrected"
    "calibration": {
        "z0_ohm": 50.0,
        "zr_ohm": 50.0,
        "total_attenuation_db": 0.0,
        "temperature_k": 0.01,
    },
    "geometry": {
        "w_um": 20.0,
        "gap_um": 10.0,
        "t_metal_nm": 150.0,
        "t_substrate_um": 280.0,
        "air_height_mm": 2.0,
        "t_sm_nm": 0.5,
        "t_ma_nm": 5.0,
        "t_sa_nm": 2.0,
        "corner_extent_nm": 20.0,
        "domain_width_um": 400.0,
    },
    "materials": {
        "substrate": {"eps_r": 11.7, "tan_delta": 1e-7},
        "air": {"eps_r": 1.0, "tan_delta": 0.0},
        "ma": {"eps_r": 7.0, "tan_delta": 1e-3},
        "sa": {"eps_r": 4.0, "tan_delta": 1e-3},
        "sm": {"eps_r": 4.0, "tan_delta": 1e-3},
        "corner": {"eps_r": 4.0, "tan_delta": 1e-3},
    },
    "solver": {
        "tolerance": 0.02,
        "max_level": 4,
    },
}


def _deep_merge(base: Dict[str, Any], extra: Dict[str, Any]) -> Dict[str, Any]:
    out = dict(base)
    for key, value in extra.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _deep_merge(out[key], value)
        else:
            out[key] = value
    return out


def _load_file(path: Union[str, Path]) -> Dict[str, Any]:
    path = Path(path)
    text = path.read_text()
    if path.suffix.lower() == ".json":
        return json.loads(text)
    if path.suffix.lower() == ".toml":
        try:
            import tomllib  # py311+
        except ModuleNotFoundError:
            import tomli as tomllib
        return tomllib.loads(text)
    raise ValidationError(f"unsupported config format: {path.suffix!r} (use .toml or .json)")


def _coerce(text: str) -> Any:
    low = text.strip().lower()
    if low in ("true", "false"):
        return low == "true"
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        return text


def _env_overrides(environ=None) -> Dict[str, Any]:
    environ = os.environ if environ is None else environ
    out: Dict[str, Any] = {}
    for key, value in environ.items():
        if not key.startswith(ENV_PREFIX):
            continue
        node = out
        parts = key[len(ENV_PREFIX):].lower().split("__")
        for part in parts[:-1]:
            node = node.setdefault(part, {})
        node[parts[-1]] = _coerce(value)
    return out


@dataclass(frozen=True)
class ProjectConfig:
    """Resolved configuration tree plus typed accessors."""

    data: Dict[str, Any] = field(default_factory=lambda: dict(DEFAULTS))

    @classmethod
    def load(cls, path: Optional[Union[str, Path]] = None,
             overrides: Optional[Dict[str, Any]] = None,
             environ=None) -> "ProjectConfig":
        data = DEFAULTS
        if path is not None:
            data = _deep_merge(data, _load_file(path))
        data = _deep_merge(data, _env_overrides(environ))
        if overrides:
            data = _deep_merge(data, overrides)
        return cls(data)

    @property
    def seed(self) -> int:
        return int(self.data["seed"])

    @property
    def photon_qc_convention(self) -> str:
        value = self.data["photon_qc_convention"]
        if value not in ("magnitude", "diameter_corrected"):
            raise ValidationError(f"photon_qc_convention must be 'magnitude' or "
                                  f"'diameter_corrected', got {value!r}")
        return value

    def calibration(self) -> CalibrationContext:
        c = self.data["calibration"]
        return CalibrationContext(
            z0=float(c["z0_ohm"]),
            zr=float(c["zr_ohm"]),
            total_attenuation=float(c["total_attenuation_db"]),
            temperature=float(c["temperature_k"]),
        )

    def geometry(self) -> CpwGeometry:
        g = self.data["geometry"]
        return CpwGeometry(
            w=float(g["w_um"]) * 1e-6,
            gap=float(g["gap_um"]) * 1e-6,
            t_metal=float(g["t_metal_nm"]) * 1e-9,
            t_substrate=float(g["t_substrate_um"]) * 1e-6,
            air_height=float(g["air_height_mm"]) * 1e-3,
            t_sm=float(g["t_sm_nm"]) * 1e-9,
            t_ma=float(g["t_ma_nm"]) * 1e-9,
            t_sa=float(g["t_sa_nm"]) * 1e-9,
            corner_extent=float(g["corner_extent_nm"]) * 1e-9,
            domain_width=float(g["domain_width_um"]) * 1e-6,
        )

    def materials(self) -> MaterialTable:
        m = self.data["materials"]

        def mat(name: str) -> Material:
            entry = m[name]
            return Material(float(entry["eps_r"]), float(entry["tan_delta"]))

        return MaterialTable(substrate=mat("substrate"), air=mat("air"),
                             ma=mat("ma"), sa=mat("sa"), sm=mat("sm"),
                             corner=mat("corner"))

    @property
    def solver_tolerance(self) -> float:
        return float(self.data["solver"]["tolerance"])

    @property
    def solver_max_level(self) -> int:
        return int(self.data["solver"]["max_level"])

    def hash(self) -> str:
        """Configuration digest, stable under key reordering."""
        canonical = json.dumps(self.data, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode()).hexdigest()
