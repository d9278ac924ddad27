"""First-order FEM solve of div(eps grad phi) = 0 and energy participation.

The center conductor is held at 1 V; grounds and the outer domain boundary
at 0 V (perfect conductors of finite thickness, so sidewalls are real
equipotential surfaces). Per-region electric energies

    U_i = 1/2 * eps0 * eps_i * integral_i |grad phi|^2 dA

give participation ratios p_i = U_i / sum U_i over the dielectric regions,
and the TLS-limited quality factor 1/Q = sum_i p_i * tan(delta_i).

A solve is accepted only when the sparse system's relative residual is below
1e-10 (iterative refinement tops up the direct factorization) and, for the
convergence-checked entry point, when every participation changed by less
than the tolerance between the two finest refinement levels.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, Optional

import numpy as np
from scipy import sparse
from scipy.constants import epsilon_0
from scipy.sparse.linalg import splu

from ..types import ValidationError
from .geometry import (
    CODE_NAMES,
    CpwGeometry,
    MaterialTable,
    METAL_CODE,
    REGIONS,
    REGION_CODES,
)
from .mesh import TensorMesh, build_mesh

RESIDUAL_TOL = 1e-10


class SolverError(RuntimeError):
    """Mesh, linear-solve, or refinement-convergence failure."""


@dataclass(frozen=True)
class MeshStats:
    n_elements: int
    refinement_level: int
    max_rel_change: float

    def as_dict(self) -> dict:
        return {
            "n_elements": self.n_elements,
            "refinement_level": self.refinement_level,
            "max_rel_change": self.max_rel_change,
        }


@dataclass(frozen=True)
class ParticipationResult:
    """Per-region energy fractions and the derived TLS-limited Q."""

    p: Dict[str, float]
    q_tls: Optional[float]
    mesh_stats: MeshStats
    energy_total: float

    def __post_init__(self):
        if any(v < 0 for v in self.p.values()):
            raise ValidationError("participation ratios must be non-negative")
        total = sum(self.p.values())
        if abs(total - 1.0) > 1e-6:
            raise ValidationError(f"participations sum to {total!r}, not 1 within 1e-6")

    def as_dict(self) -> dict:
        return {
            "p": dict(self.p),
            "q_tls": self.q_tls,
            "mesh_stats": self.mesh_stats.as_dict(),
            "energy_total": self.energy_total,
        }


def q_tls_from_participation(p: Dict[str, float], mats: MaterialTable) -> Optional[float]:
    """1 / sum(p_i tan_delta_i); None when every weighted loss vanishes."""
    loss = sum(p.get(r, 0.0) * mats.material(r).tan_delta for r in REGIONS)
    if loss <= 0.0:
        return None
    return 1.0 / loss


@dataclass(frozen=True)
class FieldSolution:
    """A solved cross-section: mesh, nodal potential, per-region energies."""

    geom: CpwGeometry
    mesh: TensorMesh
    phi: np.ndarray
    region_energy: Dict[str, float]   # J per unit length at 1 V
    residual: float

    @property
    def energy_total(self) -> float:
        return sum(self.region_energy.values())

    def participations(self) -> Dict[str, float]:
        total = self.energy_total
        return {r: self.region_energy.get(r, 0.0) / total for r in REGIONS}

    def cell_gradient(self) -> tuple:
        """Per-cell average field components on the tensor grid.

        Returns (ex, ey) with shape (nx-1, ny-1): the area-weighted mean of
        -grad phi over each cell's two triangles (piecewise constant per
        triangle in P1).
        """
        m = self.mesh
        nx, ny = m.x.size, m.y.size
        gx, gy, area = _tri_gradients(m, self.phi)
        n_cells = (nx - 1) * (ny - 1)
        ax = area[:n_cells] + area[n_cells:]
        ex = (gx[:n_cells] * area[:n_cells] + gx[n_cells:] * area[n_cells:]) / ax
        ey = (gy[:n_cells] * area[:n_cells] + gy[n_cells:] * area[n_cells:]) / ax
        return -ex.reshape(nx - 1, ny - 1), -ey.reshape(nx - 1, ny - 1)


def _tri_gradients(mesh: TensorMesh, phi: np.ndarray):
    """Gradient components of phi and areas, per triangle."""
    t = mesh.triangles
    x = mesh.nodes_x[t]
    y = mesh.nodes_y[t]
    v = phi[t]
    b = np.stack([y[:, 1] - y[:, 2], y[:, 2] - y[:, 0], y[:, 0] - y[:, 1]], axis=1)
    c = np.stack([x[:, 2] - x[:, 1], x[:, 0] - x[:, 2], x[:, 1] - x[:, 0]], axis=1)
    det = x[:, 0] * b[:, 0] + x[:, 1] * b[:, 1] + x[:, 2] * b[:, 2]
    area = 0.5 * np.abs(det)
    gx = np.einsum("ij,ij->i", b, v) / det
    gy = np.einsum("ij,ij->i", c, v) / det
    return gx, gy, area


def _assemble(mesh: TensorMesh, eps_tri: np.ndarray) -> sparse.csr_matrix:
    t = mesh.triangles
    x = mesh.nodes_x[t]
    y = mesh.nodes_y[t]
    b = np.stack([y[:, 1] - y[:, 2], y[:, 2] - y[:, 0], y[:, 0] - y[:, 1]], axis=1)
    c = np.stack([x[:, 2] - x[:, 1], x[:, 0] - x[:, 2], x[:, 1] - x[:, 0]], axis=1)
    det = x[:, 0] * b[:, 0] + x[:, 1] * b[:, 1] + x[:, 2] * b[:, 2]
    area4 = 2.0 * np.abs(det)  # 4 * area
    ke = (b[:, :, None] * b[:, None, :] + c[:, :, None] * c[:, None, :]) \
        * (eps_tri / area4)[:, None, None]
    rows = np.repeat(t, 3, axis=1).ravel()
    cols = np.tile(t, (1, 3)).ravel()
    n = mesh.n_nodes
    return sparse.coo_matrix((ke.ravel(), (rows, cols)), shape=(n, n)).tocsr()


def _dirichlet_values(geom: CpwGeometry, mesh: TensorMesh) -> tuple:
    """(mask, values): fixed nodes on conductors and the outer boundary."""
    x, y = mesh.nodes_x, mesh.nodes_y
    ax = np.abs(x)
    e1, e2 = geom.x_edge_inner, geom.x_edge_outer
    y_lo, y_hi = geom.t_sm, geom.y_metal_top
    in_metal_y = (y >= y_lo) & (y <= y_hi)
    center = (ax <= e1) & in_metal_y
    grounds = (ax >= e2) & in_metal_y
    outer = (x <= mesh.x[0]) | (x >= mesh.x[-1]) | (y <= mesh.y[0]) | (y >= mesh.y[-1])
    mask = center | grounds | outer
    values = np.zeros(mesh.n_nodes)
    values[center] = 1.0
    return mask, values


def solve_field(geom: CpwGeometry, mats: MaterialTable, level: int) -> FieldSolution:
    """Solve one refinement level; raises SolverError on a bad linear solve."""
    mesh = build_mesh(geom, level)
    eps_by_code = np.ones(len(CODE_NAMES))
    for r in REGIONS:
        eps_by_code[REGION_CODES[r]] = mats.material(r).eps_r
    eps_tri = eps_by_code[mesh.tri_region]

    k = _assemble(mesh, eps_tri)
    mask, values = _dirichlet_values(geom, mesh)
    free = ~mask
    k_ff = k[free][:, free].tocsc()
    rhs = -(k[free][:, mask] @ values[mask])

    try:
        lu = splu(k_ff)
    except RuntimeError as exc:
        raise SolverError(f"sparse factorization failed: {exc}") from exc
    u = lu.solve(rhs)
    # iterative refinement to push the relative residual below tolerance
    norm_rhs = float(np.linalg.norm(rhs)) or 1.0
    for _ in range(5):
        r = rhs - k_ff @ u
        residual = float(np.linalg.norm(r)) / norm_rhs
        if residual <= RESIDUAL_TOL:
            break
        u = u + lu.solve(r)
    else:
        raise SolverError(f"linear solve stalled at relative residual {residual:.3e}")

    phi = values.copy()
    phi[free] = u

    gx, gy, area = _tri_gradients(mesh, phi)
    dens = 0.5 * epsilon_0 * eps_by_code[mesh.tri_region] * (gx * gx + gy * gy) * area
    dens[mesh.tri_region == METAL_CODE] = 0.0
    sums = np.bincount(mesh.tri_region, weights=dens, minlength=len(CODE_NAMES))
    region_energy = {r: float(sums[REGION_CODES[r]]) for r in REGIONS}
    return FieldSolution(geom=geom, mesh=mesh, phi=phi,
                         region_energy=region_energy, residual=residual)


def _result_from(sol: FieldSolution, mats: MaterialTable,
                 max_rel_change: float) -> ParticipationResult:
    p = sol.participations()
    return ParticipationResult(
        p=p,
        q_tls=q_tls_from_participation(p, mats),
        mesh_stats=MeshStats(
            n_elements=sol.mesh.n_triangles,
            refinement_level=sol.mesh.level,
            max_rel_change=max_rel_change,
        ),
        energy_total=sol.energy_total,
    )


def _max_rel_change(p_old: Dict[str, float], p_new: Dict[str, float]) -> float:
    worst = 0.0
    for r in REGIONS:
        a, b = p_old.get(r, 0.0), p_new.get(r, 0.0)
        if max(a, b) <= 1e-12:
            continue
        worst = max(worst, abs(b - a) / max(a, b))
    return worst


def solve_cross_section(
    geom: CpwGeometry,
    mats: MaterialTable,
    tol: float = 0.02,
    max_level: int = 4,
    start_level: int = 0,
    level: Optional[int] = None,
) -> ParticipationResult:
    """Participation ratios of the cross-section with refinement control.

    Refinement levels are solved in sequence until every region's
    participation changes by less than tol between the last two levels; the
    reported mesh_stats carry the final change. Passing level pins a single
    refinement level (used inside parameter sweeps, where the convergence
    level has been established once).
    """
    if level is not None:
        sol = solve_field(geom, mats, level)
        return _result_from(sol, mats, float("nan"))
    p_prev = None
    for lv in range(start_level, max_level + 1):
        sol = solve_field(geom, mats, lv)
        p_now = sol.participations()
        if p_prev is not None:
            change = _max_rel_change(p_prev, p_now)
            if change < tol:
                return _result_from(sol, mats, change)
        p_prev = p_now
    raise SolverError(
        f"participations did not converge to {tol:.1%} by refinement level {max_level}"
    )
