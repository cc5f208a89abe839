"""Prefractal screens: IFS families and snowflake polygons.

IFS prefractals (Cantor set, Cantor dust, Sierpinski triangle) are lists of
congruent cells produced by applying the similarities to the initial open set,
enumerated in lexicographic word order.

The Koch snowflake with ``beta = pi/6`` and the square snowflake are stored on
integer lattices so that containment, areas and cell counts are exact:

* triangular lattice: integer pair ``(a, b)`` means ``unit * (a*e1 + b*e2)``
  with ``e1 = (1, 0)`` and ``e2 = (1/2, sqrt(3)/2)``;
* square lattice: ``(a, b)`` means ``unit * (a, b)``.

Other snowflake angles are produced as floating-point polygons only.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

SQRT3 = math.sqrt(3.0)
TRI_BASIS = np.array([[1.0, 0.0], [0.5, SQRT3 / 2.0]])  # rows e1, e2

# outer-lattice generators in inner triangular coordinates (length sqrt(3))
OUTER_F1 = np.array([2, -1], dtype=np.int64)
OUTER_F2 = np.array([1, 1], dtype=np.int64)


@dataclass(frozen=True)
class Similarity:
    """``s(x) = ratio * linear @ x + translation`` with ``linear`` orthogonal."""

    ratio: float
    translation: tuple
    linear: tuple | None = None

    def __post_init__(self):
        if not 0.0 < self.ratio < 1.0:
            raise ValueError("similarity ratio must lie in (0, 1)")
        dim = len(self.translation)
        if self.linear is not None:
            q = np.asarray(self.linear, dtype=float)
            if q.shape != (dim, dim) or not np.allclose(q @ q.T, np.eye(dim), atol=1e-14):
                raise ValueError("linear part must be orthogonal")

    @property
    def dimension(self) -> int:
        return len(self.translation)

    def matrix(self) -> np.ndarray:
        q = np.eye(self.dimension) if self.linear is None else np.asarray(self.linear, float)
        return self.ratio * q

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return x @ self.matrix().T + np.asarray(self.translation, dtype=float)


@dataclass(frozen=True)
class IteratedFunctionSystem:
    """Similarities plus the convex open set ``O`` used to build prefractals.

    ``open_set`` holds the vertices of ``O`` (an interval as two 1-vectors, or
    a convex polygon listed counterclockwise).
    """

    maps: tuple
    open_set: np.ndarray
    open_set_kind: str
    osc: bool = True

    def __post_init__(self):
        if len(self.maps) < 2:
            raise ValueError("an IFS needs at least two maps")

    @property
    def nu(self) -> int:
        return len(self.maps)

    def common_ratio(self) -> float:
        ratios = {m.ratio for m in self.maps}
        if len(ratios) != 1:
            raise NotImplementedError("unequal contraction ratios are not supported")
        return ratios.pop()

    def check_open_set_condition(self, tol: float = 1e-12) -> bool:
        """``s_m(O)`` inside ``O`` and pairwise disjoint (convex O only)."""
        images = [m(self.open_set) for m in self.maps]
        for img in images:
            if not _convex_contains(self.open_set, img, tol):
                return False
        for i in range(len(images)):
            for j in range(i + 1, len(images)):
                if not convex_interiors_disjoint(images[i], images[j], tol):
                    return False
        return True


def attractor_dimension(ifs: IteratedFunctionSystem) -> float:
    """Similarity dimension ``log(nu) / log(1/r)`` for equal ratios."""
    r = ifs.common_ratio()
    return math.log(ifs.nu) / math.log(1.0 / r)


# ---------------------------------------------------------------------------
# convex-set helpers
# ---------------------------------------------------------------------------

def _convex_contains(outer, inner, tol):
    outer = np.asarray(outer, float)
    inner = np.asarray(inner, float)
    if outer.shape[1] == 1:
        return inner.min() >= outer.min() - tol and inner.max() <= outer.max() + tol
    n = len(outer)
    for i in range(n):
        a, b = outer[i], outer[(i + 1) % n]
        cross = (b[0] - a[0]) * (inner[:, 1] - a[1]) - (b[1] - a[1]) * (inner[:, 0] - a[0])
        if np.any(cross < -tol):
            return False
    return True


def _axes(poly):
    e = np.roll(poly, -1, axis=0) - poly
    return np.stack([-e[:, 1], e[:, 0]], axis=1)


def convex_interiors_disjoint(p, q, tol=1e-12) -> bool:
    """Separating-axis test: True when the open convex hulls do not meet."""
    p = np.asarray(p, float)
    q = np.asarray(q, float)
    if p.shape[1] == 1:
        return p.max() <= q.min() + tol or q.max() <= p.min() + tol
    for axis in np.concatenate([_axes(p), _axes(q)]):
        norm = np.hypot(*axis)
        if norm == 0:
            continue
        pp, qq = p @ axis / norm, q @ axis / norm
        if pp.max() <= qq.min() + tol or qq.max() <= pp.min() + tol:
            return True
    return False


# ---------------------------------------------------------------------------
# IFS families
# ---------------------------------------------------------------------------

def cantor_set_ifs(alpha: float, delta: float = 0.0) -> IteratedFunctionSystem:
    _check_cantor(alpha, delta)
    maps = (Similarity(alpha, (0.0,)), Similarity(alpha, (1.0 - alpha,)))
    o = np.array([[-delta], [1.0 + delta]])
    return IteratedFunctionSystem(maps, o, "segment")


def cantor_dust_ifs(alpha: float, delta: float = 0.0) -> IteratedFunctionSystem:
    _check_cantor(alpha, delta)
    c = 1.0 - alpha
    maps = tuple(Similarity(alpha, t) for t in ((0.0, 0.0), (c, 0.0), (0.0, c), (c, c)))
    lo, hi = -delta, 1.0 + delta
    o = np.array([[lo, lo], [hi, lo], [hi, hi], [lo, hi]])
    return IteratedFunctionSystem(maps, o, "square")


def sierpinski_ifs(delta: float = 0.0) -> IteratedFunctionSystem:
    if delta < 0:
        raise ValueError("delta must be non-negative")
    maps = tuple(Similarity(0.5, t) for t in ((0.0, 0.0), (0.5, 0.0), (0.25, SQRT3 / 4.0)))
    unit = np.array([[0.0, 0.0], [1.0, 0.0], [0.5, SQRT3 / 2.0]])
    centre = unit.mean(axis=0)
    o = centre + (1.0 + 2.0 * delta) * (unit - centre)
    # enlarged triangles overlap, so the open-set condition fails for delta > 0
    return IteratedFunctionSystem(maps, o, "triangle", osc=(delta == 0.0))


def _check_cantor(alpha, delta):
    if not 0.0 < alpha < 0.5:
        raise ValueError("alpha must lie in (0, 1/2)")
    if not 0.0 <= delta < 1.0 / (2.0 * alpha) - 1.0:
        raise ValueError("delta must satisfy 0 <= delta < 1/(2 alpha) - 1")


# ---------------------------------------------------------------------------
# exact lattice polygons
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LatticePolygon:
    """Simple polygon with integer vertices on a triangular or square lattice.

    ``unit`` is the lattice spacing as an exact :class:`Fraction`.  Vertices
    are listed counterclockwise.
    """

    lattice: str
    unit: Fraction
    vertices: np.ndarray

    def __post_init__(self):
        if self.lattice not in ("triangular", "square"):
            raise ValueError("lattice must be 'triangular' or 'square'")

    def to_float(self) -> np.ndarray:
        return lattice_to_float(self.vertices, self.lattice, float(self.unit))

    def edge_count(self) -> int:
        return len(self.vertices)

    def twice_lattice_area(self) -> int:
        """Twice the shoelace area in lattice coordinates (an integer)."""
        v = self.vertices
        x, y = v[:, 0], v[:, 1]
        return int(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))

    def area(self):
        """Exact area: a Fraction for square lattices; ``(Fraction, 'sqrt3')``
        for triangular ones, meaning ``value * sqrt(3)``."""
        twice = Fraction(self.twice_lattice_area()) * self.unit ** 2
        if self.lattice == "square":
            return twice / 2
        # det(e1, e2) = sqrt(3)/2
        return (twice / 4, "sqrt3")

    def refined(self, factor: int) -> "LatticePolygon":
        """Same polygon expressed on a lattice ``factor`` times finer."""
        return LatticePolygon(self.lattice, self.unit / factor, self.vertices * factor)

    def contains(self, points_scaled: np.ndarray, scale: int) -> np.ndarray:
        """Exact crossing-number test for integer points given at ``scale``.

        Points are in lattice coordinates multiplied by ``scale``; they must
        not lie on the boundary (lattice-cell centres never do).
        """
        return points_in_polygon_int(points_scaled, self.vertices * scale)


def lattice_to_float(points, lattice: str, unit: float) -> np.ndarray:
    pts = np.asarray(points, dtype=float)
    if lattice == "square":
        return unit * pts
    return unit * (pts @ TRI_BASIS)


def points_in_polygon_int(points: np.ndarray, poly: np.ndarray) -> np.ndarray:
    """Even-odd rule for integer points via per-row edge crossings.

    Row crossings use the half-open rule ``min(y1, y2) <= y < max(y1, y2)``.
    Points must not lie on the boundary; crossings then differ from point
    abscissae by at least ``1/|y2 - y1|``, far above rounding error for the
    short lattice edges used here.
    """
    pts = np.asarray(points, dtype=np.int64)
    v1 = np.asarray(poly, dtype=np.int64)
    v2 = np.roll(v1, -1, axis=0)
    if len(pts) == 0:
        return np.zeros(0, dtype=bool)
    rows, row_of_pt = np.unique(pts[:, 1], return_inverse=True)
    y1, y2 = v1[:, 1], v2[:, 1]
    ok = y1 != y2
    x1, y1, x2, y2 = v1[ok, 0], y1[ok], v2[ok, 0], y2[ok]
    lo = np.searchsorted(rows, np.minimum(y1, y2), side="left")
    hi = np.searchsorted(rows, np.maximum(y1, y2), side="left")
    counts = hi - lo
    edge = np.repeat(np.arange(len(x1)), counts)
    offs = np.arange(counts.sum()) - np.repeat(np.cumsum(counts) - counts, counts)
    ridx = np.repeat(lo, counts) + offs
    py = rows[ridx]
    xc = x1[edge] + (py - y1[edge]) * (x2[edge] - x1[edge]) / (y2[edge] - y1[edge])
    xmin = min(pts[:, 0].min(), v1[:, 0].min()) - 1
    width = float(max(pts[:, 0].max(), v1[:, 0].max()) - xmin + 2)
    keys = np.sort(ridx * width + (xc - xmin))
    qk = row_of_pt.ravel() * width + (pts[:, 0] - xmin)
    below = np.searchsorted(keys, qk) - np.searchsorted(keys, row_of_pt.ravel() * width)
    return (below % 2) == 1


def _rot_minus60(v):
    return np.stack([v[..., 0] + v[..., 1], -v[..., 0]], axis=-1)


def _rot_plus60(v):
    return np.stack([-v[..., 1], v[..., 0] + v[..., 1]], axis=-1)


def _koch_refine(vertices: np.ndarray, outward: bool) -> np.ndarray:
    """One Koch step on a CCW triangular-lattice polygon (coordinates x3)."""
    p = 3 * vertices
    q = np.roll(p, -1, axis=0)
    w = (q - p) // 3
    bump = _rot_minus60(w) if outward else _rot_plus60(w)
    new = np.stack([p, p + w, p + w + bump, p + 2 * w], axis=1)
    return new.reshape(-1, 2)


def koch_lattice_polygon(side: str, j: int) -> LatticePolygon:
    """Exact ``beta = pi/6`` snowflake polygon.

    Inner level j lives on the lattice of unit ``3^-j``; outer level j on the
    lattice of unit ``3^-(j+1)``.
    """
    if j < 0:
        raise ValueError("level must be non-negative")
    tri = np.array([[0, 0], [1, 0], [0, 1]], dtype=np.int64)
    if side == "inner":
        v, unit = tri, Fraction(1)
        for _ in range(j):
            v, unit = _koch_refine(v, outward=True), unit / 3
        return LatticePolygon("triangular", unit, v)
    if side == "outer":
        # hexagon = triangle plus outward bumps on the middle thirds
        p = 3 * tri
        q = np.roll(p, -1, axis=0)
        w = (q - p) // 3
        apex = p + w + _rot_minus60(w)
        v = np.stack([p, apex], axis=1).reshape(-1, 2)
        unit = Fraction(1, 3)
        for _ in range(j):
            v, unit = _koch_refine(v, outward=False), unit / 3
        return LatticePolygon("triangular", unit, v)
    raise ValueError("side must be 'inner' or 'outer'")


def square_snowflake_polygon(j: int) -> LatticePolygon:
    """Square snowflake polygon of level j on the lattice of unit ``4^-j``."""
    if j < 0:
        raise ValueError("level must be non-negative")
    v = np.array([[0, 0], [1, 0], [1, 1], [0, 1]], dtype=np.int64)
    unit = Fraction(1)
    for _ in range(j):
        p = 4 * v
        q = np.roll(p, -1, axis=0)
        d = (q - p) // 4
        n = np.stack([-d[:, 1], d[:, 0]], axis=1)
        pts = np.stack([p, p + d, p + d + n, p + 2 * d + n, p + 2 * d,
                        p + 2 * d - n, p + 3 * d - n, p + 3 * d], axis=1)
        v = pts.reshape(-1, 2)
        unit /= 4
    return LatticePolygon("square", unit, v)


# ---------------------------------------------------------------------------
# lattice cells
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LatticeCells:
    """Integer lattice cells covering a polygon.

    ``kind`` is ``'tri'`` (inner lattice triangles ``(a, b, down)``),
    ``'tri_outer'`` (sqrt(3)-larger triangles ``(u, v, down)`` of the rotated
    sub-lattice) or ``'square'`` (``(a, b)``).  ``unit`` is the spacing of the
    underlying integer lattice.
    """

    kind: str
    unit: Fraction
    cells: np.ndarray

    def __len__(self):
        return len(self.cells)

    def vertices_int(self) -> np.ndarray:
        """(P, V, 2) integer vertices (in the underlying lattice, CCW)."""
        c = self.cells
        if self.kind == "square":
            a, b = c[:, 0], c[:, 1]
            return np.stack([np.stack([a, b], -1), np.stack([a + 1, b], -1),
                             np.stack([a + 1, b + 1], -1), np.stack([a, b + 1], -1)], axis=1)
        if self.kind == "tri":
            base = c[:, :2]
            e1, e2 = np.array([1, 0]), np.array([0, 1])
            f1, f2 = e1, e2
        else:
            base = c[:, 0:1] * OUTER_F1 + c[:, 1:2] * OUTER_F2
            f1, f2 = OUTER_F1, OUTER_F2
        down = c[:, 2:3].astype(bool)
        up = np.stack([base, base + f1, base + f2], axis=1)
        dn = np.stack([base + f1, base + f1 + f2, base + f2], axis=1)
        return np.where(down[:, :, None], dn, up)

    def centroids_x3(self) -> np.ndarray:
        return self.vertices_int().sum(axis=1)

    def to_float(self) -> np.ndarray:
        lattice = "square" if self.kind == "square" else "triangular"
        return lattice_to_float(self.vertices_int(), lattice, float(self.unit))


def enumerate_cells(poly: LatticePolygon, kind: str) -> LatticeCells:
    """All lattice cells of ``kind`` lying in the closed polygon.

    Cells are ordered by row then column for determinism.  A cell is kept when
    its centre lies inside the polygon; this is exact when every polygon edge
    runs along lines of the chosen lattice (checked separately by
    :func:`polygon_conforms`).
    """
    v = poly.vertices
    lo, hi = v.min(axis=0), v.max(axis=0)
    if kind == "square":
        a, b = np.meshgrid(np.arange(lo[0], hi[0]), np.arange(lo[1], hi[1]), indexing="xy")
        cells = np.stack([a.ravel(), b.ravel()], axis=1)
        centres2 = 2 * cells + 1
        keep = poly.contains(centres2, 2)
        return LatticeCells("square", poly.unit, cells[keep])
    if kind == "tri":
        a, b = np.meshgrid(np.arange(lo[0] - hi[1], hi[0] - lo[1] + 1),
                           np.arange(lo[1], hi[1]), indexing="xy")
        base = np.stack([a.ravel(), b.ravel()], axis=1)
    elif kind == "tri_outer":
        # invert base = u*F1 + v*F2: u = (a - b)/3, v = (a + 2b)/3
        span = int(np.max(np.abs(np.concatenate([lo, hi])))) + 2
        rng = np.arange(-span, span + 1)
        u, w = np.meshgrid(rng, rng, indexing="xy")
        uv = np.stack([u.ravel(), w.ravel()], axis=1)
        base = uv[:, 0:1] * OUTER_F1 + uv[:, 1:2] * OUTER_F2
        ok = np.all((base >= lo - 3) & (base <= hi + 3), axis=1)
        uv, base = uv[ok], base[ok]
    else:
        raise ValueError(f"unknown cell kind {kind!r}")
    out = []
    for down in (0, 1):
        idx = base if kind == "tri" else uv
        cells = np.concatenate([idx, np.full((len(idx), 1), down, dtype=np.int64)], axis=1)
        lc = LatticeCells(kind, poly.unit, cells)
        keep = poly.contains(lc.centroids_x3(), 3)
        out.append(cells[keep])
    cells = np.concatenate(out)
    lc = LatticeCells(kind, poly.unit, cells)
    cen = lc.centroids_x3()
    order = np.lexsort((cen[:, 0], cen[:, 1]))
    return LatticeCells(kind, poly.unit, cells[order])


def polygon_conforms(poly: LatticePolygon, kind: str) -> bool:
    """Do all vertices and edges of ``poly`` lie on the cell lattice ``kind``?"""
    v = poly.vertices
    e = np.roll(v, -1, axis=0) - v
    if kind == "square":
        return bool(np.all((e[:, 0] == 0) | (e[:, 1] == 0)))
    if kind == "tri":
        return bool(np.all((e[:, 0] == 0) | (e[:, 1] == 0) | (e[:, 0] == -e[:, 1])))
    if kind == "tri_outer":
        on = np.all((v[:, 0] - v[:, 1]) % 3 == 0)
        # directions F1 = (2,-1), F2 = (1,1), F2 - F1 = (-1,2)
        dirs = ((e[:, 0] == -2 * e[:, 1]) | (e[:, 0] == e[:, 1]) | (e[:, 1] == -2 * e[:, 0]))
        return bool(on and np.all(dirs))
    raise ValueError(f"unknown cell kind {kind!r}")


# ---------------------------------------------------------------------------
# prefractals
# ---------------------------------------------------------------------------

FAMILIES = ("cantor_set", "cantor_dust", "sierpinski", "koch_snowflake", "square_snowflake")


@dataclass(frozen=True)
class Prefractal:
    """A level-j screen.

    IFS families fill ``cells`` (float ``(P, V, d)`` array, ``cell_kind``).
    Lattice families fill ``polygon`` and, at native resolution,
    ``lattice_cells``.  General-angle snowflakes only have ``float_polygon``.
    """

    family: str
    level: int
    params: dict = field(default_factory=dict)
    cells: np.ndarray | None = None
    cell_kind: str | None = None
    ifs: IteratedFunctionSystem | None = None
    polygon: LatticePolygon | None = None
    lattice_cells: LatticeCells | None = None
    float_polygon: np.ndarray | None = None

    @property
    def screen_dimension(self) -> int:
        return 1 if self.family == "cantor_set" else 2

    @property
    def ambient_dimension(self) -> int:
        return self.screen_dimension + 1

    @property
    def is_ifs(self) -> bool:
        return self.family in ("cantor_set", "cantor_dust", "sierpinski")

    def cell_count(self) -> int:
        if self.cells is not None:
            return len(self.cells)
        if self.lattice_cells is not None:
            return len(self.lattice_cells)
        raise ValueError("this prefractal has no cell decomposition")

    def edge_count(self) -> int:
        if self.polygon is not None:
            return self.polygon.edge_count()
        if self.float_polygon is not None:
            return len(self.float_polygon)
        raise ValueError("IFS prefractals have no single boundary polygon")

    def vertices(self) -> np.ndarray:
        """Float polygon vertices (snowflake families)."""
        if self.polygon is not None:
            return self.polygon.to_float()
        if self.float_polygon is not None:
            return self.float_polygon
        raise ValueError("IFS prefractals have no single boundary polygon")

    def to_json_dict(self) -> dict:
        out = {"family": self.family, "level": self.level,
               "params": {k: _jsonable(v) for k, v in self.params.items()}}
        if self.cells is not None:
            out["cell_kind"] = self.cell_kind
            out["cells"] = self.cells.tolist()
        if self.polygon is not None:
            unit = self.polygon.unit
            out["lattice"] = self.polygon.lattice
            out["unit"] = f"{unit.numerator}/{unit.denominator}"
            out["vertices_lattice"] = self.polygon.vertices.tolist()
            out["vertices"] = [[_exact_coord(p, self.polygon.lattice, unit, i) for i in range(2)]
                               for p in self.polygon.vertices]
        elif self.float_polygon is not None:
            out["vertices"] = self.float_polygon.tolist()
        return out


def _jsonable(v):
    if isinstance(v, Fraction):
        return f"{v.numerator}/{v.denominator}"
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    return v


def _exact_coord(p, lattice, unit, axis):
    """Exact coordinate string; triangular y-values carry a sqrt(3) factor."""
    a, b = int(p[0]), int(p[1])
    if lattice == "square":
        val = unit * (a if axis == 0 else b)
        return f"{val.numerator}/{val.denominator}"
    if axis == 0:
        val = unit * Fraction(2 * a + b, 2)
        return f"{val.numerator}/{val.denominator}"
    val = unit * Fraction(b, 2)
    return f"{val.numerator}/{val.denominator}*sqrt(3)"


def _ifs_cells(ifs: IteratedFunctionSystem, j: int) -> np.ndarray:
    cells = ifs.open_set[None, :, :].astype(float)
    for _ in range(j):
        cells = np.concatenate([m(cells) for m in ifs.maps], axis=0)
    return cells


def generate_prefractal(family: str, params: dict | None = None, j: int = 0) -> Prefractal:
    """Level-j prefractal of an IFS family.

    ``params``: ``alpha`` and optional ``delta`` for the Cantor families,
    optional ``delta`` for Sierpinski.  The snowflake families are routed to
    :func:`generate_snowflake` / :func:`generate_square_snowflake`.
    """
    params = dict(params or {})
    if not isinstance(j, (int, np.integer)) or j < 0:
        raise ValueError("level must be a non-negative integer")
    if family == "koch_snowflake":
        return generate_snowflake(params.get("beta", math.pi / 6), params.get("side", "inner"), j)
    if family == "square_snowflake":
        return generate_square_snowflake(j)
    delta = float(params.get("delta", 0.0))
    if family == "cantor_set":
        ifs = cantor_set_ifs(float(params["alpha"]), delta)
    elif family == "cantor_dust":
        ifs = cantor_dust_ifs(float(params["alpha"]), delta)
    elif family == "sierpinski":
        ifs = sierpinski_ifs(delta)
    else:
        raise ValueError(f"unknown family {family!r}")
    clean = {"delta": delta}
    if "alpha" in params:
        clean = {"alpha": float(params["alpha"]), "delta": delta}
    return Prefractal(family, int(j), clean, cells=_ifs_cells(ifs, j),
                      cell_kind=ifs.open_set_kind, ifs=ifs)


def koch_xi(beta: float) -> float:
    return 1.0 / (2.0 * (1.0 + math.sin(beta)))


def _float_koch(beta: float, side: str, j: int) -> np.ndarray:
    xi = koch_xi(beta)
    v = np.array([[0.0, 0.0], [1.0, 0.0], [0.5, SQRT3 / 2.0]])

    def bumps(poly, rel_height, outward, frac):
        p = poly
        q = np.roll(p, -1, axis=0)
        e = q - p
        right = np.stack([e[:, 1], -e[:, 0]], axis=1)
        normal = right if outward else -right
        mid = 0.5 * (p + q)
        apex = mid + rel_height * normal
        if frac is None:
            return np.stack([p, apex], axis=1).reshape(-1, 2)
        return np.stack([p, p + frac * e, apex, q - frac * e], axis=1).reshape(-1, 2)

    h = math.sqrt(xi - 0.25)
    if side == "outer":
        v = bumps(v, h, True, None)
    for _ in range(j):
        v = bumps(v, h, side == "inner", xi)
    return v


def generate_snowflake(beta: float, side: str, j: int) -> Prefractal:
    """Inner (open, growing) or outer (closed, shrinking) snowflake of level j."""
    if not 0.0 < beta < math.pi / 2:
        raise ValueError("beta must lie in (0, pi/2)")
    if side not in ("inner", "outer"):
        raise ValueError("side must be 'inner' or 'outer'")
    if not isinstance(j, (int, np.integer)) or j < 0:
        raise ValueError("level must be a non-negative integer")
    params = {"beta": beta, "side": side, "xi": koch_xi(beta)}
    if abs(beta - math.pi / 6) < 1e-15:
        poly = koch_lattice_polygon(side, j)
        kind = "tri" if side == "inner" else "tri_outer"
        cells = enumerate_cells(poly, kind)
        return Prefractal("koch_snowflake", int(j), params, polygon=poly, lattice_cells=cells)
    return Prefractal("koch_snowflake", int(j), params, float_polygon=_float_koch(beta, side, j))


def generate_square_snowflake(j: int) -> Prefractal:
    if not isinstance(j, (int, np.integer)) or j < 0:
        raise ValueError("level must be a non-negative integer")
    poly = square_snowflake_polygon(j)
    return Prefractal("square_snowflake", int(j), {}, polygon=poly,
                      lattice_cells=enumerate_cells(poly, "square"))


def distance_bounds(family: str, params: dict, j: int) -> tuple[float, float]:
    """``(eps_j, eta_j)`` with ``Gamma(eps_j) in Gamma_j in Gamma(eta_j)`` for thickened prefractals."""
    delta = float(params.get("delta", 0.0))
    if family == "sierpinski":
        return 2.0 ** -j * delta / SQRT3, 2.0 ** (1 - j) / SQRT3 * max(delta, 0.25)
    alpha = float(params["alpha"])
    c = max(delta, 0.5 - alpha)
    if family == "cantor_dust":
        c *= math.sqrt(2.0)
    return alpha ** j * delta, alpha ** j * c
