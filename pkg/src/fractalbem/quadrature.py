"""Quadrature rules and single-layer element integrals.

Well-separated (target, cell) pairs use a mapped product rule whose size
follows the wavelength policy ``q = ceil(max(20 h / lambda, 3))`` per axis
(triangles always use the 7-point rule).  Pairs where the target sits close
to, or inside, a cell are integrated semi-analytically:

* segments: the logarithmic singularity ``-ln(r)/(2 pi)`` is integrated in
  closed form and the smooth remainder by composite Gauss-Legendre;
* planar polygons: polar coordinates about the target's foot point, with the
  radial integral done analytically and the angular one by Gauss-Legendre
  after a ``sinh`` change of variable along each edge.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import integrate
from scipy.spatial import cKDTree

from .kernels import KernelSpec, _kernel_values, eval_kernel_smooth_2d

VERTEX_COUNT = {"segment": 2, "square": 4, "triangle": 3}


@dataclass(frozen=True)
class QuadratureRule:
    """Nodes and weights on a reference element."""

    nodes: np.ndarray
    weights: np.ndarray
    exact_degree: int

    def __len__(self):
        return len(self.weights)


@lru_cache(maxsize=None)
def gauss_legendre(n: int) -> QuadratureRule:
    """n-point Gauss-Legendre rule on [-1, 1] (Newton iteration on P_n)."""
    if not 1 <= n <= 512:
        raise ValueError("gauss_legendre supports 1 <= n <= 512")
    i = np.arange(1, n + 1)
    x = np.cos(np.pi * (i - 0.25) / (n + 0.5))
    for _ in range(100):
        p0, p1 = np.ones_like(x), x.copy()
        for m in range(2, n + 1):
            p0, p1 = p1, ((2 * m - 1) * x * p1 - (m - 1) * p0) / m
        if n == 1:
            p1, p0 = x.copy(), np.ones_like(x)
        dp = n * (x * p1 - p0) / (x * x - 1.0)
        dx = p1 / dp
        x = x - dx
        if np.max(np.abs(dx)) < 1e-16:
            break
    p0, p1 = np.ones_like(x), x.copy()
    for m in range(2, n + 1):
        p0, p1 = p1, ((2 * m - 1) * x * p1 - (m - 1) * p0) / m
    if n == 1:
        p1, p0 = x.copy(), np.ones_like(x)
    dp = n * (x * p1 - p0) / (x * x - 1.0)
    w = 2.0 / ((1.0 - x * x) * dp * dp)
    order = np.argsort(x)
    x, w = x[order], w[order]
    # enforce exact symmetry
    x = 0.5 * (x - x[::-1])
    w = 0.5 * (w + w[::-1])
    return QuadratureRule(x, w, 2 * n - 1)


def gauss_interval(n: int, a: float = 0.0, b: float = 1.0):
    rule = gauss_legendre(n)
    return 0.5 * (a + b) + 0.5 * (b - a) * rule.nodes, 0.5 * (b - a) * rule.weights


@lru_cache(maxsize=None)
def square_rule(n: int) -> QuadratureRule:
    """Tensor Gauss rule on the unit square [0,1]^2 (weights sum to 1)."""
    x, w = gauss_interval(n)
    xx, yy = np.meshgrid(x, x, indexing="ij")
    nodes = np.stack([xx.ravel(), yy.ravel()], axis=1)
    return QuadratureRule(nodes, np.outer(w, w).ravel(), 2 * n - 1)


@lru_cache(maxsize=None)
def triangle_rule_7pt() -> QuadratureRule:
    """Symmetric 7-point rule on the triangle (0,0),(1,0),(0,1), degree 3."""
    nodes = np.array([
        [0.0, 0.0], [1.0, 0.0], [0.0, 1.0],
        [0.5, 0.0], [0.5, 0.5], [0.0, 0.5],
        [1.0 / 3.0, 1.0 / 3.0],
    ])
    weights = np.array([3, 3, 3, 8, 8, 8, 27], dtype=float) / 60.0 * 0.5
    return QuadratureRule(nodes, weights, 3)


@lru_cache(maxsize=None)
def triangle_collapsed_gauss(n: int) -> QuadratureRule:
    """Conical-product Gauss rule on the reference triangle; interior nodes only."""
    u, wu = gauss_interval(n)
    uu, vv = np.meshgrid(u, u, indexing="ij")
    x = uu.ravel()
    y = (vv * (1.0 - uu)).ravel()
    w = (np.outer(wu, wu) * (1.0 - uu)).ravel()
    return QuadratureRule(np.stack([x, y], axis=1), w, 2 * n - 2)


def _graded_interval(n: int):
    """Gauss nodes on [0, 1] pulled towards both ends by ``s^2 (3 - 2 s)``."""
    x, w = gauss_interval(n)
    return x * x * (3.0 - 2.0 * x), w * 6.0 * x * (1.0 - x)


@lru_cache(maxsize=None)
def graded_square_rule(n: int) -> QuadratureRule:
    """Tensor rule on [0,1]^2 with nodes clustered at the edges.

    Suited to integrands with logarithmic derivative singularities along the
    boundary, such as a single-layer potential restricted to its own cell.
    """
    x, w = _graded_interval(n)
    xx, yy = np.meshgrid(x, x, indexing="ij")
    return QuadratureRule(np.stack([xx.ravel(), yy.ravel()], axis=1), np.outer(w, w).ravel(), 1)


@lru_cache(maxsize=None)
def graded_triangle_rule(n: int) -> QuadratureRule:
    """Collapsed rule on the reference triangle with edge-clustered nodes."""
    u, wu = _graded_interval(n)
    uu, vv = np.meshgrid(u, u, indexing="ij")
    x = uu.ravel()
    y = (vv * (1.0 - uu)).ravel()
    w = (np.outer(wu, wu) * (1.0 - uu)).ravel()
    return QuadratureRule(np.stack([x, y], axis=1), w, 1)


def points_per_element(h: float, wavelength: float, n: int) -> int:
    """Total number of quadrature points per element for the wavelength policy."""
    if not (h > 0 and wavelength > 0):
        raise ValueError("h and wavelength must be positive")
    return policy_order(h, wavelength) ** (n - 1)


def policy_order(h: float, wavelength: float) -> int:
    """Per-axis node count ``ceil(max(20 h / lambda, 3))``."""
    ratio = 20.0 * h / wavelength
    return max(3, int(math.ceil(ratio - 1e-9)))


def wavelength_of(spec: KernelSpec) -> float:
    return 2.0 * np.pi / spec.scale


# ---------------------------------------------------------------------------
# mapping rules onto cells
# ---------------------------------------------------------------------------

def map_rule(parts: np.ndarray, kind: str, rule: QuadratureRule):
    """Map a reference rule onto every cell.

    Returns points ``(P, Q, d)`` and weights ``(P, Q)`` (Jacobians included).
    """
    parts = np.asarray(parts, dtype=float)
    if kind == "segment":
        a, b = parts[:, 0, 0], parts[:, 1, 0]
        t = 0.5 * (rule.nodes + 1.0)
        pts = a[:, None] + (b - a)[:, None] * t[None, :]
        w = 0.5 * np.abs(b - a)[:, None] * rule.weights[None, :]
        return pts[..., None], w
    v0 = parts[:, 0]
    if kind == "square":
        e1 = parts[:, 1] - v0
        e2 = parts[:, 3] - v0
    elif kind == "triangle":
        e1 = parts[:, 1] - v0
        e2 = parts[:, 2] - v0
    else:
        raise ValueError(f"unknown cell kind {kind!r}")
    jac = np.abs(e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])
    s, t = rule.nodes[:, 0], rule.nodes[:, 1]
    pts = v0[:, None, :] + s[None, :, None] * e1[:, None, :] + t[None, :, None] * e2[:, None, :]
    return pts, jac[:, None] * rule.weights[None, :]


def far_rule(kind: str, q: int) -> QuadratureRule:
    if kind == "segment":
        return gauss_legendre(q)
    if kind == "square":
        return square_rule(q)
    return triangle_rule_7pt()


def cell_measures(parts: np.ndarray, kind: str) -> np.ndarray:
    parts = np.asarray(parts, dtype=float)
    if kind == "segment":
        return np.abs(parts[:, 1, 0] - parts[:, 0, 0])
    x, y = parts[..., 0], parts[..., 1]
    return 0.5 * np.abs(np.sum(x * np.roll(y, -1, axis=1) - np.roll(x, -1, axis=1) * y, axis=1))


def cell_diameters(parts: np.ndarray) -> np.ndarray:
    parts = np.asarray(parts, dtype=float)
    diff = parts[:, :, None, :] - parts[:, None, :, :]
    return np.sqrt((diff ** 2).sum(-1)).max(axis=(1, 2))


# ---------------------------------------------------------------------------
# semi-analytic near-singular integrals
# ---------------------------------------------------------------------------

def _log_antiderivative(u, z):
    """Antiderivative of ``ln sqrt(u^2 + z^2)`` in u."""
    az = np.abs(z)
    u2 = u * u + az * az
    with np.errstate(divide="ignore", invalid="ignore"):
        lg = np.where(u2 > 0, u * 0.5 * np.log(np.where(u2 > 0, u2, 1.0)), 0.0)
        at = np.where(az > 0, az * np.arctan(u / np.where(az > 0, az, 1.0)), 0.0)
    return lg - u + at


def log_integral(a, b, t, z=0.0):
    """``int_a^b ln sqrt((y - t)^2 + z^2) dy`` in closed form."""
    a, b, t, z = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (a, b, t, z)))
    return _log_antiderivative(b - t, z) - _log_antiderivative(a - t, z)


def double_log_integral(a, b, c, d):
    """``int_a^b int_c^d ln|x - y| dy dx`` in closed form."""
    def g(u):
        au = np.abs(u)
        with np.errstate(divide="ignore", invalid="ignore"):
            lg = np.where(au > 0, 0.5 * u * u * np.log(np.where(au > 0, au, 1.0)), 0.0)
        return lg - 0.75 * u * u

    return g(b - c) - g(a - c) - g(b - d) + g(a - d)


def _composite_nodes(lo, hi, pieces: int, order: int):
    """Composite Gauss nodes on [lo, hi] for arrays of intervals: (K, pieces*order)."""
    x, w = gauss_interval(order)
    edges = np.linspace(0.0, 1.0, pieces + 1)
    rel = (edges[:-1, None] + (edges[1:] - edges[:-1])[:, None] * x[None, :]).ravel()
    relw = ((edges[1:] - edges[:-1])[:, None] * w[None, :]).ravel()
    span = (hi - lo)[:, None]
    return lo[:, None] + span * rel[None, :], span * relw[None, :]


def segment_near_integrals(spec: KernelSpec, a, b, t, z, order: int = 20):
    """``int_a^b Phi(sqrt((y-t)^2 + z^2)) dy`` for arrays of (segment, target).

    The integral is split at the foot point ``t`` when it lies inside the
    segment; the log part is exact and the remainder uses composite Gauss.
    """
    a, b, t, z = (np.atleast_1d(np.asarray(v, dtype=float)) for v in (a, b, t, z))
    a, b, t, z = np.broadcast_arrays(a, b, t, z)
    lo, hi = np.minimum(a, b), np.maximum(a, b)
    split = np.clip(t, lo, hi)
    result = -log_integral(lo, hi, t, z) / (2.0 * np.pi)
    result = result.astype(spec.dtype)
    span = float(np.max(hi - lo)) if hi.size else 0.0
    pieces = max(1, int(math.ceil(spec.scale * span / 4.0)))
    for left, right in ((lo, split), (split, hi)):
        y, w = _composite_nodes(left, right, pieces, order)
        r = np.sqrt((y - t[:, None]) ** 2 + z[:, None] ** 2)
        result = result + np.sum(w * eval_kernel_smooth_2d(spec, r), axis=1)
    return result


def _radial_antiderivative(spec: KernelSpec, rho, z):
    """``int_0^rho Phi(sqrt(s^2 + z^2)) s ds`` for the 3D kernels."""
    az = np.abs(z)
    big_r = np.sqrt(rho * rho + az * az)
    excess = rho * rho / (big_r + az + 1e-300)
    if spec.mode == "helmholtz":
        k = spec.k
        half = 0.5 * k * excess
        # exp(i k R) - exp(i k |z|) without cancellation
        diff = np.exp(1j * k * az) * 2j * np.sin(half) * np.exp(1j * half)
        return diff / (4j * np.pi * k)
    kappa = spec.kappa
    with np.errstate(under="ignore"):
        return np.exp(-kappa * az) * (-np.expm1(-kappa * excess)) / (4.0 * np.pi * kappa)


def polygon_near_integrals(spec: KernelSpec, polys, tx, z, order: int | None = None):
    """``int_P Phi(|(x, z) - (y, 0)|) dy`` over planar convex polygons.

    Parameters
    ----------
    polys : (K, V, 2) array of polygon vertices (either orientation).
    tx : (K, 2) in-plane target coordinates.
    z : (K,) signed normal offsets of the targets.
    """
    polys = np.asarray(polys, dtype=float)
    tx = np.asarray(tx, dtype=float)
    z = np.broadcast_to(np.asarray(z, dtype=float), (polys.shape[0],))
    nv = polys.shape[1]
    if order is None:
        diam = float(np.max(cell_diameters(polys))) if len(polys) else 0.0
        reach = diam + float(np.max(np.abs(z))) if len(polys) else 0.0
        order = min(64, 16 + int(math.ceil(2.0 * spec.scale * reach)))
    x, w = gauss_interval(order, 0.0, 1.0)
    total = np.zeros(polys.shape[0], dtype=spec.dtype)
    for i in range(nv):
        p = polys[:, i] - tx
        q = polys[:, (i + 1) % nv] - tx
        e = q - p
        length = np.sqrt((e ** 2).sum(-1))
        cross = p[:, 0] * q[:, 1] - p[:, 1] * q[:, 0]
        d = np.abs(cross) / length
        ok = d > 1e-14 * np.maximum(length, 1e-300)
        if not np.any(ok):
            continue
        dd = d[ok]
        sp = (p[ok] * e[ok]).sum(-1) / length[ok]
        sq = (q[ok] * e[ok]).sum(-1) / length[ok]
        wp, wq = np.arcsinh(sp / dd), np.arcsinh(sq / dd)
        ww = wp[:, None] + (wq - wp)[:, None] * x[None, :]
        ch = np.cosh(ww)
        vals = _radial_antiderivative(spec, dd[:, None] * ch, z[ok][:, None]) / ch
        contrib = (vals @ w) * (wq - wp) * np.sign(cross[ok])
        total[ok] += contrib
    return total


# ---------------------------------------------------------------------------
# diagonal entries
# ---------------------------------------------------------------------------

def _quad_complex(f, a, b):
    re = integrate.quad(lambda t: f(t).real, a, b, epsabs=1e-14, epsrel=1e-12, limit=500)[0]
    im = integrate.quad(lambda t: f(t).imag, a, b, epsabs=1e-14, epsrel=1e-12, limit=500)[0]
    return complex(re, im)


@lru_cache(maxsize=256)
def diagonal_entry(spec: KernelSpec, kind: str, L: float):
    """Single-layer integral of a cell over itself, collocated at its centre.

    ``kind`` is ``'segment'`` (2D kernels; ``L`` the length), ``'square'`` or
    ``'triangle'`` (3D kernels; ``L`` the side length of the square or
    equilateral triangle).
    """
    if not L > 0:
        raise ValueError("L must be positive")
    if kind == "cell_group":
        raise ValueError("cell groups have no closed form; integrate parts individually")
    if kind == "segment":
        if spec.ambient_dimension != 2:
            raise ValueError("segment cells need a 2D kernel")
        half = 0.5 * L
        pieces = max(1, int(math.ceil(spec.scale * half / 4.0)))
        y, w = _composite_nodes(np.array([0.0]), np.array([half]), pieces, 40)
        smooth = 2.0 * np.sum(w * eval_kernel_smooth_2d(spec, y))
        value = smooth - L * (math.log(half) - 1.0) / (2.0 * np.pi)
        return float(value.real) if spec.is_real else complex(value)
    if spec.ambient_dimension != 3:
        raise ValueError(f"{kind} cells need a 3D kernel")
    if kind == "square":
        pre, lim, reach = 1.0 / np.pi, np.pi / 4.0, L / 2.0
    elif kind == "triangle":
        pre, lim, reach = 3.0 / (4.0 * np.pi), np.pi / 3.0, L / (2.0 * np.sqrt(3.0))
    else:
        raise ValueError(f"unknown cell kind {kind!r}")
    if spec.mode == "helmholtz":
        k = spec.k
        # (e^{ikR} - 1)/(ik) written stably as 2 sin(kR/2) e^{ikR/2} / k
        def f(theta):
            half = 0.5 * k * reach / np.cos(theta)
            return 2.0 * np.sin(half) * np.exp(1j * half) / k

        return pre * _quad_complex(f, -lim, lim)
    kappa = spec.kappa
    val = integrate.quad(
        lambda th: -np.expm1(-kappa * reach / np.cos(th)) / kappa,
        -lim, lim, epsabs=1e-15, epsrel=1e-13, limit=500,
    )[0]
    return pre * val


# ---------------------------------------------------------------------------
# batched single-layer integrals
# ---------------------------------------------------------------------------

NEAR_FACTOR = 2.0
_CHUNK = 1_500_000


def _near_pairs(centers, radius, targets_flat):
    """(target index, cell index) pairs with |target - centre| < radius."""
    tree = cKDTree(centers)
    hits = tree.query_ball_point(targets_flat, r=radius)
    rows = np.repeat(np.arange(len(hits)), [len(h) for h in hits])
    cols = np.fromiter((c for h in hits for c in h), dtype=np.int64, count=len(rows))
    return rows, cols


def _unique_geometry(rel_parts, z, scale):
    """Group identical (cell - target) configurations."""
    key = np.concatenate([rel_parts.reshape(len(rel_parts), -1), z[:, None]], axis=1)
    key = np.round(key / scale, 9)
    _, first, inverse = np.unique(key, axis=0, return_index=True, return_inverse=True)
    return first, inverse.ravel()


def near_integrals(spec: KernelSpec, parts, kind, targets):
    """Exact-ish single-layer integrals for paired (cell, target) arrays.

    ``parts`` is ``(K, V, d)``; ``targets`` is ``(K, d+1)``.
    """
    parts = np.asarray(parts, dtype=float)
    targets = np.asarray(targets, dtype=float)
    d = parts.shape[2]
    if len(parts) == 0:
        return np.zeros(0, dtype=spec.dtype)
    rel = parts - targets[:, None, :d]
    z = targets[:, d]
    scale = float(np.max(cell_diameters(parts[:1])))
    first, inverse = _unique_geometry(rel, z, scale)
    urel, uz = rel[first], z[first]
    zero = np.zeros((len(first), d))
    if kind == "segment":
        vals = segment_near_integrals(spec, urel[:, 0, 0], urel[:, 1, 0], zero[:, 0], uz)
    else:
        vals = polygon_near_integrals(spec, urel, zero, uz)
    return vals[inverse]


def single_layer_matrix(spec: KernelSpec, parts, kind: str, targets, *,
                        q: int | None = None, near_factor: float = NEAR_FACTOR):
    """Matrix ``M[i, p] = int_{cell p} Phi(target_i, y) ds(y)``.

    Parameters
    ----------
    parts : (P, V, d) cell vertices in screen coordinates (d = n - 1).
    targets : (M, n) points in the ambient space; the last coordinate is the
        offset normal to the screen.
    q : per-axis quadrature order for separated pairs; defaults to the
        wavelength policy for the cell diameter.
    """
    parts = np.asarray(parts, dtype=float)
    targets = np.atleast_2d(np.asarray(targets, dtype=float))
    d = parts.shape[2]
    if spec.ambient_dimension != d + 1:
        raise ValueError(
            f"cells of dimension {d} need a kernel in dimension {d + 1}, "
            f"got {spec.ambient_dimension}")
    if targets.shape[1] != d + 1:
        raise ValueError("targets must live in the ambient space")
    diam = cell_diameters(parts)
    hmax = float(diam.max())
    if q is None:
        q = policy_order(hmax, wavelength_of(spec))
    pts, w = map_rule(parts, kind, far_rule(kind, q))
    n_parts, n_q = w.shape
    out = np.empty((len(targets), n_parts), dtype=spec.dtype)
    block = max(1, _CHUNK // max(1, n_parts * n_q))
    flat_pts = pts.reshape(-1, d)
    for s in range(0, len(targets), block):
        t = targets[s:s + block]
        r2 = ((t[:, None, :d] - flat_pts[None, :, :]) ** 2).sum(-1) + t[:, None, d] ** 2
        # coincident nodes give inf here; those pairs are near and overwritten below
        with np.errstate(divide="ignore", invalid="ignore"):
            vals = _kernel_values(spec, np.sqrt(r2)).reshape(len(t), n_parts, n_q)
        out[s:s + block] = np.einsum("tpq,pq->tp", vals, w)
    centers = parts.mean(axis=1)
    amb_centers = np.concatenate([centers, np.zeros((n_parts, 1))], axis=1)
    rows, cols = _near_pairs(amb_centers, near_factor * hmax, targets)
    if len(rows):
        out[rows, cols] = near_integrals(spec, parts[cols], kind, targets[rows])
    return out


def element_integral(spec: KernelSpec, element, target):
    """Single-layer integral of one element at a target outside its closure."""
    target = np.asarray(target, dtype=float)
    parts = np.asarray(element.parts, dtype=float)
    d = parts.shape[2]
    if spec.ambient_dimension != d + 1:
        raise ValueError("kernel dimension does not match element dimension")
    if target.shape != (d + 1,):
        raise ValueError("target must be a point of the ambient space")
    kind = element.part_kind
    if np.any(cell_measures(parts, kind) <= 0):
        raise ValueError("degenerate element with zero measure")
    if target[d] == 0.0 and np.any(points_in_cells(parts, kind, target[None, :d])):
        raise ValueError("target lies on the element; use diagonal_entry")
    return single_layer_matrix(spec, parts, kind, target[None, :])[0].sum()


def points_in_cells(parts, kind, points, tol=1e-12):
    """Boolean (P,) mask: is the single point ``points[0]`` in each closed cell."""
    parts = np.asarray(parts, dtype=float)
    p = np.asarray(points, dtype=float)[0]
    if kind == "segment":
        lo = np.minimum(parts[:, 0, 0], parts[:, 1, 0])
        hi = np.maximum(parts[:, 0, 0], parts[:, 1, 0])
        return (p[0] >= lo - tol) & (p[0] <= hi + tol)
    nv = parts.shape[1]
    signs = []
    for i in range(nv):
        a, b = parts[:, i], parts[:, (i + 1) % nv]
        signs.append((b[:, 0] - a[:, 0]) * (p[1] - a[:, 1]) - (b[:, 1] - a[:, 1]) * (p[0] - a[:, 0]))
    s = np.stack(signs, axis=1)
    return np.all(s >= -tol, axis=1) | np.all(s <= tol, axis=1)
