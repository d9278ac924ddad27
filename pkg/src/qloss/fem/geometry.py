"""CPW cross-section geometry and material tables.

The cross-section is rectilinear: a silicon substrate below y = 0, a thin
substrate-metal (SM) oxide layer under every conductor, the metal film on
top of it, a metal-air (MA) layer wrapping the metal's exposed surfaces, and
a substrate-air (SA) layer on the exposed substrate in the gaps. The
"corner" regions are the surface-layer zones inside a square of side
corner_extent centered on each conductor bottom edge: strips of SM-like
material of thickness t_sm straddling each metal foot (half under the
conductor, half in the gap), where oxide wraps around the film edge.
Everything else above the substrate is air (vacuum).

All lengths are SI meters. Region labels used throughout the solver:
"substrate", "air", "sm", "ma", "sa", "corner" (dielectrics) and "metal"
(perfect conductor, excluded from energy accounting).
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from ..types import ValidationError

REGIONS = ("substrate", "air", "sm", "ma", "sa", "corner")
METAL = "metal"

#: Integer codes used on mesh arrays; REGIONS indices first, metal last.
REGION_CODES = {name: i for i, name in enumerate(REGIONS + (METAL,))}
CODE_NAMES = tuple(REGIONS + (METAL,))
METAL_CODE = REGION_CODES[METAL]


@dataclass(frozen=True)
class CpwGeometry:
    """Cross-section dimensions (m). Zero layer thickness means layer absent."""

    w: float = 20e-6
    gap: float = 10e-6
    t_metal: float = 150e-9
    t_substrate: float = 280e-6
    air_height: float = 2e-3
    t_sm: float = 0.5e-9
    t_ma: float = 5e-9
    t_sa: float = 2e-9
    corner_extent: float = 20e-9
    domain_width: float = 400e-6

    def __post_init__(self):
        for name in ("w", "gap", "t_metal", "t_substrate", "air_height",
                     "corner_extent", "domain_width"):
            if not getattr(self, name) > 0:
                raise ValidationError(f"{name} must be positive")
        for name in ("t_sm", "t_ma", "t_sa"):
            t = getattr(self, name)
            if t < 0:
                raise ValidationError(f"{name} must be >= 0")
            if t > 0 and t > self.w / 100.0:
                raise ValidationError(f"{name} = {t:g} m is not thin relative to w = {self.w:g} m")
        if self.domain_width < 10.0 * (self.w + 2.0 * self.gap):
            raise ValidationError("domain_width must be at least 10x the CPW aperture")
        if self.corner_extent >= min(self.gap, self.w):
            raise ValidationError("corner_extent must be smaller than the gap and the trace width")

    # derived levels of the layer stack
    @property
    def y_metal_top(self) -> float:
        return self.t_sm + self.t_metal

    @property
    def y_stack_top(self) -> float:
        return self.y_metal_top + self.t_ma

    @property
    def x_edge_inner(self) -> float:
        """Center conductor edge."""
        return self.w / 2.0

    @property
    def x_edge_outer(self) -> float:
        """Ground plane inner edge."""
        return self.w / 2.0 + self.gap

    def with_t_sm(self, t_sm: float) -> "CpwGeometry":
        return replace(self, t_sm=t_sm)

    def with_t_metal(self, t_metal: float) -> "CpwGeometry":
        return replace(self, t_metal=t_metal)

    def without_layers(self) -> "CpwGeometry":
        """Bare conductor-on-substrate variant, used by the perturbative path."""
        return replace(self, t_sm=0.0, t_ma=0.0, t_sa=0.0)

    def classify_grid(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        """Region codes for points (x, y); boundary points bind to metal."""
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        ax = np.abs(x)
        e1, e2 = self.x_edge_inner, self.x_edge_outer
        y_top = self.y_metal_top
        half_c = self.corner_extent / 2.0
        on_metal_x = (ax <= e1) | ((ax >= e2) & (ax <= self.domain_width / 2.0))
        in_gap = ~on_metal_x & (ax < e2)
        above = y >= 0.0
        near_wall = in_gap & ((ax <= e1 + self.t_ma) | (ax >= e2 - self.t_ma))
        near_edge = (np.abs(ax - e1) <= half_c) | (np.abs(ax - e2) <= half_c)
        conditions = [
            y < 0.0,
            (self.t_ma > 0) & near_wall & (y >= self.t_sm) & (y <= self.y_stack_top),
            near_edge & above & (y < self.t_sm),
            on_metal_x & above & (y < self.t_sm),
            on_metal_x & (y >= self.t_sm) & (y <= y_top),
            on_metal_x & (y > y_top) & (y <= y_top + self.t_ma),
            in_gap & ~near_edge & above & (y < self.t_sa),
        ]
        choices = [
            REGION_CODES["substrate"],
            REGION_CODES["ma"],
            REGION_CODES["corner"],
            REGION_CODES["sm"],
            METAL_CODE,
            REGION_CODES["ma"],
            REGION_CODES["sa"],
        ]
        return np.select(conditions, choices, default=REGION_CODES["air"]).astype(np.int8)

    def classify(self, x: float, y: float) -> str:
        """Region name containing a single point."""
        code = int(self.classify_grid(np.array([x]), np.array([y]))[0])
        return CODE_NAMES[code]


@dataclass(frozen=True)
class Material:
    eps_r: float
    tan_delta: float

    def __post_init__(self):
        if self.eps_r < 1.0:
            raise ValidationError(f"eps_r must be >= 1, got {self.eps_r}")
        if self.tan_delta < 0.0:
            raise ValidationError(f"tan_delta must be >= 0, got {self.tan_delta}")


@dataclass(frozen=True)
class MaterialTable:
    """Relative permittivity and loss tangent per region."""

    substrate: Material = Material(11.7, 1e-7)
    air: Material = Material(1.0, 0.0)
    ma: Material = Material(7.0, 1e-3)
    sa: Material = Material(4.0, 1e-3)
    sm: Material = Material(4.0, 1e-3)
    corner: Material = Material(4.0, 1e-3)

    def material(self, region: str) -> Material:
        if region not in REGIONS:
            raise ValidationError(f"unknown region {region!r}")
        return getattr(self, region if region != "substrate" else "substrate")

    def eps_map(self) -> dict:
        return {r: self.material(r).eps_r for r in REGIONS}

    def tan_delta_map(self) -> dict:
        return {r: self.material(r).tan_delta for r in REGIONS}

    def as_dict(self) -> dict:
        return {
            r: {"eps_r": self.material(r).eps_r, "tan_delta": self.material(r).tan_delta}
            for r in REGIONS
        }


def x_breakpoints(geom: CpwGeometry) -> list:
    """Material-boundary x coordinates (non-negative half; mesh is mirrored)."""
    e1, e2 = geom.x_edge_inner, geom.x_edge_outer
    half_c = geom.corner_extent / 2.0
    pts = {0.0, e1, e2, geom.domain_width / 2.0}
    if geom.t_ma > 0:
        pts.add(e1 + geom.t_ma)
        pts.add(e2 - geom.t_ma)
    for e in (e1, e2):
        pts.add(e - half_c)
        pts.add(e + half_c)
    return sorted(pts)


def y_breakpoints(geom: CpwGeometry) -> list:
    """Material-boundary y coordinates from substrate bottom to air top."""
    pts = {-geom.t_substrate, 0.0, geom.y_metal_top, geom.air_height}
    if geom.t_sm > 0:
        pts.add(geom.t_sm)
    if geom.t_sa > 0:
        pts.add(geom.t_sa)
    if geom.t_ma > 0:
        pts.add(geom.y_stack_top)
    return sorted(pts)
