"""Thin-layer perturbation theory and the two cross-section parameter sweeps.

A dielectric sheet of thickness t much thinner than every field scale stores

    U_layer = (t/2) * integral_surface eps0 * [ eps_l |E_par|^2
              + (eps_adj^2 / eps_l) |E_perp|^2 ] dl

evaluated with the unperturbed fields on the adjacent-medium side of the
surface (tangential E and normal D are continuous across the sheet). The
resulting participation is exactly linear in t, which is also the behavior
the direct-meshed solve must reproduce for thin layers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence

import numpy as np
from scipy.constants import epsilon_0

from ..types import ValidationError
from .geometry import CpwGeometry, MaterialTable
from .solver import FieldSolution, ParticipationResult, SolverError, solve_cross_section


def _line_index(lines: np.ndarray, value: float, what: str) -> int:
    i = int(np.searchsorted(lines, value))
    for j in (i - 1, i, i + 1):
        if 0 <= j < lines.size and math.isclose(lines[j], value, rel_tol=0.0,
                                                abs_tol=1e-15 + 1e-12 * abs(value)):
            return j
    raise SolverError(f"{what} = {value:g} is not a mesh line")


def _horizontal_integral(sol: FieldSolution, y0: float, x_ranges,
                         side: str, eps_layer: float, eps_adjacent: float) -> float:
    """Surface integral of eps_l*E_par^2 + (eps_adj^2/eps_l)*E_perp^2 at y=y0."""
    m = sol.mesh
    j = _line_index(m.y, y0, "surface y")
    row = j - 1 if side == "below" else j
    if row < 0 or row >= m.y.size - 1:
        raise SolverError("surface adjacent row outside mesh")
    ex, ey = sol.cell_gradient()
    xm = 0.5 * (m.x[:-1] + m.x[1:])
    dx = np.diff(m.x)
    mask = np.zeros(xm.size, dtype=bool)
    for xa, xb in x_ranges:
        mask |= (xm > xa) & (xm < xb)
    e_par = ex[mask, row]
    e_perp = ey[mask, row]
    return float(np.sum((eps_layer * e_par**2
                         + (eps_adjacent**2 / eps_layer) * e_perp**2) * dx[mask]))


def _vertical_integral(sol: FieldSolution, x0: float, y_range,
                       side: str, eps_layer: float, eps_adjacent: float) -> float:
    m = sol.mesh
    i = _line_index(m.x, x0, "surface x")
    col = i - 1 if side == "left" else i
    if col < 0 or col >= m.x.size - 1:
        raise SolverError("surface adjacent column outside mesh")
    ex, ey = sol.cell_gradient()
    ym = 0.5 * (m.y[:-1] + m.y[1:])
    dy = np.diff(m.y)
    ya, yb = y_range
    mask = (ym > ya) & (ym < yb)
    e_par = ey[col, mask]
    e_perp = ex[col, mask]
    return float(np.sum((eps_layer * e_par**2
                         + (eps_adjacent**2 / eps_layer) * e_perp**2) * dy[mask]))


def thin_layer_participation(sol: FieldSolution, layer: str, t: float,
                             eps_layer: float, eps_adjacent: float) -> float:
    """Perturbative participation of a thin sheet, from an unperturbed solve.

    sol must come from a geometry without the sheet meshed (see
    CpwGeometry.without_layers). eps_adjacent is the permittivity of the
    medium whose fields are integrated: the substrate for "sm" and "sa", air
    for "ma". Linear in t by construction.
    """
    geom = sol.geom
    if t < 0:
        raise ValidationError("layer thickness must be >= 0")
    if t == 0.0:
        return 0.0
    if t > geom.w / 100.0:
        raise ValidationError(f"t = {t:g} m is not thin relative to w = {geom.w:g} m")
    e1, e2 = geom.x_edge_inner, geom.x_edge_outer
    half_w = geom.domain_width / 2.0
    y_top = geom.y_metal_top

    half_c = geom.corner_extent / 2.0
    if layer == "sm":
        # the corner zones straddling each foot are excluded, as in the mesh
        ranges = [(-(e1 - half_c), e1 - half_c), (e2 + half_c, half_w),
                  (-half_w, -(e2 + half_c))]
        integral = _horizontal_integral(sol, 0.0, ranges, "below", eps_layer, eps_adjacent)
    elif layer == "sa":
        ranges = [(e1 + half_c, e2 - half_c), (-(e2 - half_c), -(e1 + half_c))]
        integral = _horizontal_integral(sol, 0.0, ranges, "below", eps_layer, eps_adjacent)
    elif layer == "ma":
        ranges = [(-e1, e1), (e2, half_w), (-half_w, -e2)]
        integral = _horizontal_integral(sol, y_top, ranges, "above", eps_layer, eps_adjacent)
        y_wall = (geom.t_sm, y_top)
        integral += _vertical_integral(sol, e1, y_wall, "right", eps_layer, eps_adjacent)
        integral += _vertical_integral(sol, -e1, y_wall, "left", eps_layer, eps_adjacent)
        integral += _vertical_integral(sol, e2, y_wall, "left", eps_layer, eps_adjacent)
        integral += _vertical_integral(sol, -e2, y_wall, "right", eps_layer, eps_adjacent)
    else:
        raise ValidationError(f"no thin-layer surface defined for region {layer!r}")
    return t * 0.5 * epsilon_0 * integral / sol.energy_total


@dataclass(frozen=True)
class LinearFit:
    slope: float
    intercept: float
    r_squared: float

    def __call__(self, t: float) -> float:
        return self.slope * t + self.intercept

    def as_dict(self) -> dict:
        return {"slope": self.slope, "intercept": self.intercept,
                "r_squared": self.r_squared}


def _linear_fit(t: np.ndarray, p: np.ndarray) -> LinearFit:
    slope, intercept = np.polyfit(t, p, 1)
    pred = slope * t + intercept
    ss_res = float(np.sum((p - pred) ** 2))
    ss_tot = float(np.sum((p - p.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return LinearFit(float(slope), float(intercept), r2)


@dataclass(frozen=True)
class SmThicknessSweep:
    """Participations vs SM-layer thickness, with the linear-extrapolation fit."""

    t_values: np.ndarray
    results: List[ParticipationResult]
    sm_fit: LinearFit
    corner_coeffs: tuple          # (linear, quadratic) through the origin
    crossover_t_ma: Optional[float]
    crossover_t_sa: Optional[float]

    def p_series(self, region: str) -> np.ndarray:
        return np.array([r.p[region] for r in self.results])


def sweep_sm_thickness(geom: CpwGeometry, mats: MaterialTable,
                       t_values: Sequence[float], tol: float = 0.02,
                       max_level: int = 4) -> SmThicknessSweep:
    """Sweep the SM dielectric thickness at fixed metal thickness.

    The refinement level is converged once, at the thickest layer (the
    best-conditioned member of the family), and reused across the sweep so
    the series is smooth in t. The linear fit of p_sm vs t uses the points
    with t >= 0.4 nm; the fitted line extrapolates below that.
    """
    t_values = np.asarray(sorted(t_values), dtype=float)
    if np.any(t_values <= 0):
        raise ValidationError("SM thickness values must be positive")
    ref = solve_cross_section(geom.with_t_sm(float(t_values[-1])), mats,
                              tol=tol, max_level=max_level)
    level = ref.mesh_stats.refinement_level
    results = []
    for t in t_values:
        if t == t_values[-1]:
            results.append(ref)
        else:
            results.append(solve_cross_section(geom.with_t_sm(float(t)), mats, level=level))

    fit_mask = t_values >= 0.4e-9 - 1e-15
    p_sm = np.array([r.p["sm"] for r in results])
    sm_fit = _linear_fit(t_values[fit_mask], p_sm[fit_mask])

    p_cor = np.array([r.p["corner"] for r in results])
    design = np.column_stack([t_values, t_values**2])
    coeffs, *_ = np.linalg.lstsq(design, p_cor, rcond=None)

    def crossover(region: str) -> Optional[float]:
        tan_sm = mats.material("sm").tan_delta
        tan_other = mats.material(region).tan_delta
        if tan_sm <= 0 or sm_fit.slope <= 0:
            return None
        p_other = float(np.mean([r.p[region] for r in results]))
        t_cross = (p_other * tan_other / tan_sm - sm_fit.intercept) / sm_fit.slope
        return t_cross if t_cross > 0 else None

    return SmThicknessSweep(
        t_values=t_values,
        results=results,
        sm_fit=sm_fit,
        corner_coeffs=(float(coeffs[0]), float(coeffs[1])),
        crossover_t_ma=crossover("ma"),
        crossover_t_sa=crossover("sa"),
    )


@dataclass(frozen=True)
class MetalThicknessSweep:
    t_values: np.ndarray
    results: List[ParticipationResult]

    def p_series(self, region: str) -> np.ndarray:
        return np.array([r.p[region] for r in self.results])

    def q_series(self) -> np.ndarray:
        return np.array([r.q_tls if r.q_tls is not None else np.nan
                         for r in self.results])


def sweep_metal_thickness(geom: CpwGeometry, mats: MaterialTable,
                          t_values: Sequence[float], tol: float = 0.02,
                          max_level: int = 4) -> MetalThicknessSweep:
    """Sweep the metal film thickness at fixed SM-layer thickness."""
    t_values = np.asarray(sorted(t_values), dtype=float)
    if np.any(t_values <= 0):
        raise ValidationError("metal thickness values must be positive")
    mid = float(t_values[t_values.size // 2])
    ref = solve_cross_section(geom.with_t_metal(mid), mats, tol=tol, max_level=max_level)
    level = ref.mesh_stats.refinement_level
    results = []
    for t in t_values:
        if t == mid:
            results.append(ref)
        else:
            results.append(solve_cross_section(geom.with_t_metal(float(t)), mats, level=level))
    return MetalThicknessSweep(t_values=t_values, results=results)
