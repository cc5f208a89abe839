"""Piecewise-constant meshes on prefractal screens.

A :class:`Mesh` stores its geometry at the level of primitive *parts*
(segments, squares or triangles); each element owns one or more parts.
Grouped (pre-convex) meshes own several disjoint parts per element.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy.spatial import ConvexHull, cKDTree

from .geometry import (
    LatticeCells,
    Prefractal,
    _ifs_cells,
    enumerate_cells,
    polygon_conforms,
)
from .quadrature import (
    cell_diameters,
    cell_measures,
    gauss_legendre,
    map_rule,
    square_rule,
    triangle_collapsed_gauss,
)


@dataclass(frozen=True)
class Element:
    kind: str
    part_kind: str
    parts: np.ndarray
    center: np.ndarray
    diameter: float
    measure: float


@dataclass(frozen=True)
class Mesh:
    """Mesh of ``N`` elements built from ``P`` primitive parts.

    Attributes
    ----------
    parts : (P, V, d) part vertices (counterclockwise for polygons).
    part_kind : 'segment', 'square' or 'triangle'.
    owner : (P,) element index of each part; non-decreasing.
    centers : (N, d) collocation nodes.
    hulls : list of (V_l, d) convex-hull vertices per element.
    """

    parts: np.ndarray
    part_kind: str
    owner: np.ndarray
    centers: np.ndarray
    diameters: np.ndarray
    measures: np.ndarray
    element_kind: str
    hulls: list
    screen: Prefractal | None = None
    lattice: LatticeCells | None = None
    info: dict = field(default_factory=dict)

    @property
    def N(self) -> int:
        return len(self.centers)

    @property
    def h(self) -> float:
        return float(self.diameters.max())

    @property
    def screen_dimension(self) -> int:
        return self.parts.shape[2]

    @property
    def ambient_dimension(self) -> int:
        return self.screen_dimension + 1

    @property
    def uniform(self) -> bool:
        """One part per element and all parts congruent up to translation."""
        if len(self.parts) != self.N:
            return False
        rel = self.parts - self.parts[:, :1, :]
        return bool(np.allclose(rel, rel[0], atol=1e-12 * self.h))

    def element(self, index: int) -> Element:
        mask = self.owner == index
        return Element(self.element_kind, self.part_kind, self.parts[mask],
                       self.centers[index], float(self.diameters[index]),
                       float(self.measures[index]))

    @property
    def elements(self) -> list:
        return [self.element(i) for i in range(self.N)]

    def to_json_dict(self) -> dict:
        return {
            "element_kind": self.element_kind,
            "part_kind": self.part_kind,
            "N": self.N,
            "h": self.h,
            "centers": self.centers.tolist(),
            "measures": self.measures.tolist(),
            "diameters": self.diameters.tolist(),
            "owner": self.owner.tolist(),
            "parts": self.parts.tolist(),
            "info": self.info,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict())


def _hull_vertices(points: np.ndarray) -> np.ndarray:
    if points.shape[1] == 1:
        return np.array([[points.min()], [points.max()]])
    if len(points) <= 4:
        return _ccw(points)
    hull = ConvexHull(points)
    return points[hull.vertices]


def _ccw(points):
    c = points.mean(axis=0)
    ang = np.arctan2(points[:, 1] - c[1], points[:, 0] - c[0])
    return points[np.argsort(ang)]


def _diameter(points: np.ndarray) -> float:
    d = points[:, None, :] - points[None, :, :]
    return float(np.sqrt((d ** 2).sum(-1)).max())


def mesh_from_parts(parts, part_kind, owner=None, centers=None, *, screen=None,
                    lattice=None, element_kind=None, info=None) -> Mesh:
    """Assemble a :class:`Mesh`; by default one element per part."""
    parts = np.asarray(parts, dtype=float)
    n_parts = len(parts)
    if owner is None:
        owner = np.arange(n_parts)
    owner = np.asarray(owner, dtype=np.int64)
    if np.any(np.diff(owner) < 0):
        raise ValueError("parts must be grouped by element (owner non-decreasing)")
    n_el = int(owner.max()) + 1 if n_parts else 0
    part_measure = cell_measures(parts, part_kind)
    measures = np.bincount(owner, weights=part_measure, minlength=n_el)
    if n_parts == n_el:
        diameters = cell_diameters(parts)
        hulls = [np.sort(p, axis=0) if part_kind == "segment" else p for p in parts]
        if centers is None:
            centers = parts.mean(axis=1)
    else:
        hulls, diameters = [], np.empty(n_el)
        bounds = np.searchsorted(owner, np.arange(n_el + 1))
        for e in range(n_el):
            pts = parts[bounds[e]:bounds[e + 1]].reshape(-1, parts.shape[2])
            hv = _hull_vertices(pts)
            hulls.append(hv)
            diameters[e] = _diameter(hv)
        if centers is None:
            raise ValueError("grouped meshes need explicit collocation nodes")
    kind = element_kind or (part_kind if n_parts == n_el else "cell_group")
    return Mesh(parts, part_kind, owner, np.asarray(centers, dtype=float), diameters,
                measures, kind, hulls, screen, lattice, dict(info or {}))


# ---------------------------------------------------------------------------
# subdivision
# ---------------------------------------------------------------------------

def subdivide_parts(parts: np.ndarray, kind: str, m: int) -> np.ndarray:
    """Split each part into ``m`` (segments) or ``m^2`` congruent pieces."""
    parts = np.asarray(parts, dtype=float)
    if m == 1:
        return parts.copy()
    t = np.arange(m + 1) / m
    if kind == "segment":
        a, b = parts[:, 0, 0], parts[:, 1, 0]
        x = a[:, None] + (b - a)[:, None] * t[None, :]
        return np.stack([x[:, :-1], x[:, 1:]], axis=2)[..., None].reshape(-1, 2, 1)
    v0 = parts[:, 0]
    if kind == "square":
        e1, e2 = parts[:, 1] - v0, parts[:, 3] - v0
        pieces = []
        for j in range(m):
            for i in range(m):
                corners = [(i, j), (i + 1, j), (i + 1, j + 1), (i, j + 1)]
                pieces.append(np.stack([v0 + t[a] * e1 + t[b] * e2
                                        for a, b in corners], axis=1))
        return np.stack(pieces, axis=1).reshape(-1, 4, 2)
    if kind == "triangle":
        e1, e2 = parts[:, 1] - v0, parts[:, 2] - v0
        pieces = []
        for j in range(m):
            for i in range(m - j):
                tri = [(i, j), (i + 1, j), (i, j + 1)]
                pieces.append(np.stack([v0 + t[a] * e1 + t[b] * e2 for a, b in tri], axis=1))
                if i + j < m - 1:
                    tri = [(i + 1, j), (i + 1, j + 1), (i, j + 1)]
                    pieces.append(np.stack([v0 + t[a] * e1 + t[b] * e2 for a, b in tri], axis=1))
        return np.stack(pieces, axis=1).reshape(-1, 3, 2)
    raise ValueError(f"unknown part kind {kind!r}")


def _root(n0: int, kind: str) -> int:
    if kind == "segment":
        return n0
    m = int(round(math.sqrt(n0)))
    if m * m != n0:
        raise ValueError("n0 must be a perfect square for 2D cells")
    return m


# ---------------------------------------------------------------------------
# public constructors
# ---------------------------------------------------------------------------

def mesh_per_component(p: Prefractal, n0: int = 1) -> Mesh:
    """Every prefractal component split into ``n0`` congruent convex elements."""
    if not p.is_ifs:
        raise ValueError("per-component meshes need an IFS prefractal; use uniform_lattice_mesh")
    if n0 < 1:
        raise ValueError("n0 must be positive")
    parts = subdivide_parts(p.cells, p.cell_kind, _root(n0, p.cell_kind))
    return mesh_from_parts(parts, p.cell_kind, screen=p,
                           info={"policy": "per_component", "n0": n0})


def mesh_grouped(p: Prefractal, i: int) -> Mesh:
    """Pre-convex mesh with one element per level-``i`` ancestor cell."""
    if not p.is_ifs:
        raise ValueError("grouped meshes need an IFS prefractal")
    if not 0 <= i <= p.level:
        raise ValueError("ancestor level must satisfy 0 <= i <= j")
    if i == p.level:
        return mesh_per_component(p, 1)
    nu = p.ifs.nu
    per = nu ** (p.level - i)
    owner = np.repeat(np.arange(nu ** i), per)
    ancestors = _ifs_cells(p.ifs, i)
    return mesh_from_parts(p.cells, p.cell_kind, owner, ancestors.mean(axis=1), screen=p,
                           info={"policy": "grouped", "ancestor_level": i})


def _as_fraction(h) -> Fraction:
    if isinstance(h, Fraction):
        return h
    if isinstance(h, str):
        return Fraction(h)
    return Fraction(float(h)).limit_denominator(10 ** 12)


def _integer_ratio(value: float, what: str) -> int:
    m = int(round(value))
    if m < 1 or abs(value - m) > 1e-9 * max(1.0, value):
        raise ValueError(f"mesh size does not conform to the {what} lattice (ratio {value!r})")
    return m


def uniform_lattice_mesh(p: Prefractal, h) -> Mesh:
    """Uniform mesh of lattice triangles or squares of side ``h``.

    Supported screens: beta = pi/6 Koch snowflakes (inner: triangles aligned
    with the x-axis; outer: rotated sqrt(3)-larger triangles), the square
    snowflake, and standard Sierpinski prefractals.  ``h`` may be a number,
    a :class:`Fraction` or a string such as ``"1/81"``.
    """
    h_value = float(_as_fraction(h)) if isinstance(h, str) else float(h)
    if p.family == "sierpinski":
        if p.params.get("delta", 0.0) != 0.0:
            raise ValueError("lattice meshes need the standard Sierpinski prefractal")
        m = _integer_ratio(2.0 ** -p.level / h_value, "Sierpinski")
        parts = subdivide_parts(p.cells, "triangle", m)
        return mesh_from_parts(parts, "triangle", screen=p,
                               info={"policy": "lattice", "h": h_value})
    if p.polygon is None:
        raise ValueError("uniform lattice meshes need a lattice polygon screen")
    poly = p.polygon
    if p.family == "square_snowflake":
        kind = "square"
        factor = poly.unit / _as_fraction(h)
        if factor.denominator != 1 or factor < 1:
            raise ValueError("mesh size must divide the square-snowflake lattice spacing")
        m = int(factor)
    elif p.params.get("side") == "inner":
        kind = "tri"
        factor = poly.unit / _as_fraction(h)
        if factor.denominator != 1 or factor < 1:
            raise ValueError("mesh size must divide the snowflake lattice spacing")
        m = int(factor)
    else:
        kind = "tri_outer"
        m = _integer_ratio(math.sqrt(3.0) * float(poly.unit) / h_value, "outer snowflake")
    fine = poly.refined(m)
    if not polygon_conforms(fine, kind):
        raise ValueError("polygon edges do not follow the mesh lattice")
    cells = enumerate_cells(fine, kind)
    part_kind = "square" if kind == "square" else "triangle"
    return mesh_from_parts(cells.to_float(), part_kind, screen=p, lattice=cells,
                           info={"policy": "lattice", "h": h_value, "refinement": m})


def mesh_from_lattice(cells: LatticeCells, screen=None, info=None) -> Mesh:
    part_kind = "square" if cells.kind == "square" else "triangle"
    return mesh_from_parts(cells.to_float(), part_kind, screen=screen, lattice=cells,
                           info=info)


# ---------------------------------------------------------------------------
# validation
# ---------------------------------------------------------------------------

@dataclass
class PreconvexReport:
    hulls_disjoint: bool
    measure_identity: bool
    overlapping_pairs: list
    mesh_measure: float
    screen_measure: float | None
    method: str

    @property
    def passes(self) -> bool:
        return self.hulls_disjoint and self.measure_identity


def _screen_measure(m: Mesh):
    p = m.screen
    if p is None:
        return None
    if p.is_ifs:
        return float(len(p.cells) * cell_measures(p.cells[:1], p.cell_kind)[0])
    if p.polygon is not None:
        area = p.polygon.area()
        if isinstance(area, tuple):
            return float(area[0]) * math.sqrt(3.0)
        return float(area)
    return None


def _pad_hulls(hulls):
    vmax = max(len(h) for h in hulls)
    out = np.empty((len(hulls), vmax, hulls[0].shape[1]))
    for i, h in enumerate(hulls):
        out[i, :len(h)] = h
        out[i, len(h):] = h[-1]
    return out


def _sat_separated(p, q, tol):
    """Vectorised separating-axis test for padded convex polygons (K, V, 2)."""
    def axes(poly):
        e = np.roll(poly, -1, axis=1) - poly
        return np.stack([-e[..., 1], e[..., 0]], axis=-1)

    ax = np.concatenate([axes(p), axes(q)], axis=1)
    norm = np.linalg.norm(ax, axis=-1)
    valid = norm > 0
    ax = ax / np.where(valid, norm, 1.0)[..., None]
    pp = np.einsum("kvd,kad->kav", p, ax)
    qq = np.einsum("kvd,kad->kav", q, ax)
    sep = (pp.max(-1) <= qq.min(-1) + tol) | (qq.max(-1) <= pp.min(-1) + tol)
    return np.any(sep & valid, axis=1)


def validate_preconvex(m: Mesh) -> PreconvexReport:
    """Check pairwise disjointness of element hulls and the measure identity."""
    tol = 1e-9 * m.h
    overlaps = []
    if m.lattice is not None:
        cells = m.lattice.cells
        _, counts = np.unique(cells, axis=0, return_counts=True)
        disjoint = bool(np.all(counts == 1))
        method = "exact-lattice"
    elif m.screen_dimension == 1:
        lo = np.array([h[0, 0] for h in m.hulls])
        hi = np.array([h[-1, 0] for h in m.hulls])
        order = np.argsort(lo)
        bad = np.nonzero(hi[order][:-1] > lo[order][1:] + tol)[0]
        overlaps = [(int(order[b]), int(order[b + 1])) for b in bad]
        disjoint = not overlaps
        method = "intervals"
    else:
        centres = np.array([h.mean(axis=0) for h in m.hulls])
        radius = max(float(np.max(np.linalg.norm(h - c, axis=1))) for h, c in zip(m.hulls, centres))
        pairs = cKDTree(centres).query_pairs(2.0 * radius + tol, output_type="ndarray")
        if len(pairs):
            padded = _pad_hulls(m.hulls)
            sep = _sat_separated(padded[pairs[:, 0]], padded[pairs[:, 1]], tol)
            overlaps = [tuple(map(int, pr)) for pr in pairs[~sep]]
        disjoint = not overlaps
        method = "separating-axis"
    total = float(m.measures.sum())
    part_total = float(cell_measures(m.parts, m.part_kind).sum())
    screen = _screen_measure(m)
    ok = abs(total - part_total) <= 1e-12 * max(total, 1e-300)
    if screen is not None:
        ok = ok and abs(total - screen) <= 1e-10 * max(screen, 1e-300)
    return PreconvexReport(disjoint, bool(ok), overlaps, total, screen, method)


# ---------------------------------------------------------------------------
# L2 projection
# ---------------------------------------------------------------------------

def _fine_rule(kind: str, order: int):
    if kind == "segment":
        return gauss_legendre(order)
    if kind == "square":
        return square_rule(order)
    return triangle_collapsed_gauss(order)


def element_averages(m: Mesh, f, order: int = 10) -> np.ndarray:
    """Coefficients ``(1/|T|) int_T f`` of the orthogonal projection onto constants."""
    pts, w = map_rule(m.parts, m.part_kind, _fine_rule(m.part_kind, order))
    vals = np.asarray(f(pts.reshape(-1, m.screen_dimension))).reshape(w.shape)
    part_int = (vals * w).sum(axis=1)
    dtype = np.result_type(part_int.dtype, float)
    integ = np.zeros(m.N, dtype=dtype)
    np.add.at(integ, m.owner, part_int)
    return integ / m.measures


l2_project = element_averages


def projection_error(m: Mesh, f, coeffs, order: int = 12, refine: int = 4) -> float:
    """``||f - sum_l c_l 1_{T_l}||_{L2}`` by composite quadrature on each part."""
    sub = subdivide_parts(m.parts, m.part_kind, refine)
    per = len(sub) // len(m.parts)
    owner = np.repeat(m.owner, per)
    pts, w = map_rule(sub, m.part_kind, _fine_rule(m.part_kind, order))
    vals = np.asarray(f(pts.reshape(-1, m.screen_dimension))).reshape(w.shape)
    diff = vals - np.asarray(coeffs)[owner][:, None]
    return float(np.sqrt(np.sum(np.abs(diff) ** 2 * w)))


def l2_norm(m: Mesh, f, order: int = 12, refine: int = 4) -> float:
    """``||f||_{L2}`` over the mesh (vector-valued ``f`` uses the Euclidean norm)."""
    sub = subdivide_parts(m.parts, m.part_kind, refine)
    pts, w = map_rule(sub, m.part_kind, _fine_rule(m.part_kind, order))
    vals = np.asarray(f(pts.reshape(-1, m.screen_dimension)))
    sq = np.abs(vals) ** 2
    if sq.ndim > 1:
        sq = sq.sum(axis=1)
    return float(np.sqrt(np.sum(sq.reshape(w.shape) * w)))
