"""Unit conversions between boundary formats and the internal SI system.

All physics in this package is evaluated in SI (Hz, s, W, K, m). Data files
and reports use the conventional lab units (GHz, us, dBm, nm); these helpers
convert exactly once, at the boundary.
"""

from __future__ import annotations

import math

GHZ = 1e9
MHZ = 1e6
US = 1e-6
NS = 1e-9
NM = 1e-9
UM = 1e-6
MM = 1e-3


def dbm_to_watts(p_dbm: float) -> float:
    """Convert a power level in dBm to watts."""
    return 10.0 ** ((p_dbm - 30.0) / 10.0)


def watts_to_dbm(p_watts: float) -> float:
    """Convert a power in watts to dBm. Requires p_watts > 0."""
    if p_watts <= 0.0:
        raise ValueError(f"power must be positive to express in dBm, got {p_watts}")
    return 10.0 * math.log10(p_watts) + 30.0


def ghz_to_hz(f: float) -> float:
    return f * GHZ


def hz_to_ghz(f: float) -> float:
    return f / GHZ


def us_to_s(t: float) -> float:
    return t * US


def s_to_us(t: float) -> float:
    return t / US


def nm_to_m(x: float) -> float:
    return x * NM


def m_to_nm(x: float) -> float:
    return x / NM
