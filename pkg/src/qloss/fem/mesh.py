"""Graded tensor-product triangular meshes for rectilinear cross-sections.

Mesh lines are placed on every material boundary, so each cell lies inside
exactly one region; cell sizes grow geometrically away from the conductor
edges and the thin-layer stack. Levels form a deterministic refinement
family: level l halves the finest sizes and tightens the growth ratio.

The nanometer layers inside a millimeter domain force strongly anisotropic
cells; that is intentional and harmless here because the potential varies
slowly along the long cell axis everywhere the anisotropy is large.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import CpwGeometry, x_breakpoints, y_breakpoints


@dataclass(frozen=True)
class MeshLevel:
    """Grading parameters of one refinement level."""

    h_edge: float
    n_sub: int
    ratio: float
    h_max: float

    @classmethod
    def for_geometry(cls, geom: CpwGeometry, level: int) -> "MeshLevel":
        # resolve the conductor-edge singularity down to the thinnest layer
        layers = [t for t in (geom.t_sm, geom.t_sa, geom.t_ma) if t > 0]
        t_ref = min(layers) if layers else geom.w / 1000.0
        return cls(
            h_edge=min(max(t_ref, 0.2e-9), 5e-9) / 2**level,
            n_sub=2 ** (level + 1),
            ratio=1.0 + 0.30 * 0.8**level,
            h_max=max(geom.domain_width, geom.air_height + geom.t_substrate) / 6.0,
        )


def fill_interval(a: float, b: float, ha: float, hb: float, ratio: float,
                  h_max: float) -> np.ndarray:
    """Nodes in [a, b] with sizes growing geometrically from both ends."""
    length = b - a
    ha = min(ha, h_max)
    hb = min(hb, h_max)
    h_min = min(ha, hb)
    if length <= 2.0 * h_min:
        n = max(1, round(length / h_min))
        return np.linspace(a, b, n + 1)
    mid = length / 2.0

    def march(h0):
        pos, h = [0.0], h0
        while pos[-1] + h < mid:
            pos.append(pos[-1] + h)
            h = min(h * ratio, h_max)
        return pos

    left = [a + p for p in march(ha)]
    right = [b - p for p in reversed(march(hb))]
    if right[0] - left[-1] < 0.25 * (left[-1] - left[-2] if len(left) > 1 else ha):
        left = left[:-1]
    return np.array(left + right)


def graded_axis(breakpoints, fine_sizes, ratio: float, h_max: float) -> np.ndarray:
    """Concatenate graded fills between consecutive breakpoints."""
    nodes = [np.array([breakpoints[0]])]
    for i in range(len(breakpoints) - 1):
        seg = fill_interval(breakpoints[i], breakpoints[i + 1],
                            fine_sizes[i], fine_sizes[i + 1], ratio, h_max)
        nodes.append(seg[1:])
    return np.concatenate(nodes)


def build_x_lines(geom: CpwGeometry, lv: MeshLevel) -> np.ndarray:
    """Mirror-symmetric x lines, graded into the conductor edges."""
    bps = x_breakpoints(geom)
    edges = (geom.x_edge_inner, geom.x_edge_outer)
    fine = []
    for bp in bps:
        d = min(abs(bp - e) for e in edges)
        fine.append(min(max(lv.h_edge + 0.30 * d, lv.h_edge), lv.h_max))
    half = graded_axis(bps, fine, lv.ratio, lv.h_max)
    full = np.concatenate([-half[::-1], half[1:]])
    return full


def build_y_lines(geom: CpwGeometry, lv: MeshLevel) -> np.ndarray:
    """y lines: n_sub cells through each thin band, graded fills elsewhere.

    Interior breakpoints are stack surfaces carrying corner singularities of
    the field, so their fine scale never exceeds a small multiple of the
    x grading's edge scale; the domain extremes stay coarse.
    """
    bps = y_breakpoints(geom)
    spans = np.diff(bps)
    fine = []
    for i in range(len(bps)):
        adj = []
        if i > 0:
            adj.append(spans[i - 1])
        if i < len(spans):
            adj.append(spans[i])
        h = max(min(adj) / lv.n_sub, 1e-12)
        if 0 < i < len(bps) - 1:
            h = min(h, 2.0 * lv.h_edge)
        fine.append(h)
    return graded_axis(bps, fine, lv.ratio, lv.h_max)


@dataclass(frozen=True)
class TensorMesh:
    """Triangulated tensor-product mesh with per-triangle region labels."""

    x: np.ndarray           # (nx,) mesh lines
    y: np.ndarray           # (ny,)
    nodes_x: np.ndarray     # (n_nodes,)
    nodes_y: np.ndarray
    triangles: np.ndarray   # (n_tri, 3) node indices, CCW
    tri_region: np.ndarray  # (n_tri,) region code per triangle (geometry.REGION_CODES)
    level: int

    @property
    def n_nodes(self) -> int:
        return self.nodes_x.size

    @property
    def n_triangles(self) -> int:
        return self.triangles.shape[0]


def build_mesh(geom: CpwGeometry, level: int) -> TensorMesh:
    """Build the graded mesh for one refinement level."""
    lv = MeshLevel.for_geometry(geom, level)
    x = build_x_lines(geom, lv)
    y = build_y_lines(geom, lv)
    nx, ny = x.size, y.size

    xx, yy = np.meshgrid(x, y, indexing="ij")
    nodes_x = xx.ravel()
    nodes_y = yy.ravel()

    def nid(i, j):
        return i * ny + j

    ii, jj = np.meshgrid(np.arange(nx - 1), np.arange(ny - 1), indexing="ij")
    ii = ii.ravel()
    jj = jj.ravel()
    n00 = nid(ii, jj)
    n10 = nid(ii + 1, jj)
    n01 = nid(ii, jj + 1)
    n11 = nid(ii + 1, jj + 1)

    # mirror-symmetric triangulation: diagonal direction flips with the sign
    # of the cell-center x, so the mesh is exactly symmetric about x = 0
    xc = 0.5 * (x[ii] + x[ii + 1])
    pos = xc >= 0
    t1 = np.where(pos[:, None], np.column_stack([n00, n10, n11]),
                  np.column_stack([n00, n10, n01]))
    t2 = np.where(pos[:, None], np.column_stack([n00, n11, n01]),
                  np.column_stack([n10, n11, n01]))
    triangles = np.vstack([t1, t2])

    yc = 0.5 * (y[jj] + y[jj + 1])
    regions_cell = geom.classify_grid(xc, yc)
    tri_region = np.concatenate([regions_cell, regions_cell])

    return TensorMesh(x=x, y=y, nodes_x=nodes_x, nodes_y=nodes_y,
                      triangles=triangles, tri_region=tri_region, level=level)
