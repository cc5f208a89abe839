"""Scattered near fields and far-field patterns of a solved density.

With ``phi`` the single-layer density, the scattered field is ``u = -S phi``
and the total field ``u + u_inc``.  Far-field patterns use the prefactor
``-i k^((n-3)/2) / (2 (2 pi i)^((n-1)/2))``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .bem import Density, IncidentWave
from .kernels import KernelSpec
from .quadrature import (
    cell_diameters,
    far_rule,
    gauss_legendre,
    map_rule,
    points_in_cells,
    policy_order,
    single_layer_matrix,
    wavelength_of,
)

_BLOCK = 4_000_000

BOX_2D = ((-1.0, 2.0), (-1.5, 1.5))
# faces of the cuboid (-1,2) x (-1,2) x (-1,1): (fixed axis, value, ranges of the other two)
FACES_3D = (
    (0, 2.0, ((-1.0, 2.0), (-1.0, 1.0))),
    (1, 2.0, ((-1.0, 2.0), (-1.0, 1.0))),
    (2, -1.0, ((-1.0, 2.0), (-1.0, 2.0))),
)


@dataclass
class FieldGrid:
    """Midpoint samples on a box (2D) or on cuboid faces (3D).

    ``points`` are (M, n) cell midpoints and ``weights`` the cell areas; a
    face/box with ``r`` cells per axis contributes ``r * r`` samples.
    """

    points: np.ndarray
    weights: np.ndarray
    shapes: list
    samples: np.ndarray | None = None

    @property
    def size(self) -> int:
        return len(self.points)


@dataclass
class FarFieldPattern:
    """Far-field samples on the unit circle or sphere with quadrature weights."""

    directions: np.ndarray
    weights: np.ndarray
    angles: np.ndarray
    values: np.ndarray | None = None


def box_grid(n: int, resolution: int = 300) -> FieldGrid:
    """Evaluation grid: the 2D box or the three 3D cuboid faces."""
    if resolution < 1:
        raise ValueError("resolution must be positive")

    def plane(ranges):
        (a0, a1), (b0, b1) = ranges
        da, db = (a1 - a0) / resolution, (b1 - b0) / resolution
        u = a0 + da * (np.arange(resolution) + 0.5)
        v = b0 + db * (np.arange(resolution) + 0.5)
        uu, vv = np.meshgrid(u, v, indexing="xy")
        return uu.ravel(), vv.ravel(), da * db

    if n == 2:
        x, y, w = plane(BOX_2D)
        pts = np.stack([x, y], axis=1)
        return FieldGrid(pts, np.full(len(pts), w), [(resolution, resolution)])
    if n != 3:
        raise ValueError("dimension must be 2 or 3")
    pts, wts, shapes = [], [], []
    for axis, value, ranges in FACES_3D:
        u, v, w = plane(ranges)
        p = np.empty((len(u), 3))
        others = [a for a in range(3) if a != axis]
        p[:, axis] = value
        p[:, others[0]] = u
        p[:, others[1]] = v
        pts.append(p)
        wts.append(np.full(len(u), w))
        shapes.append((resolution, resolution))
    return FieldGrid(np.concatenate(pts), np.concatenate(wts), shapes)


def _check_off_screen(d: Density, points: np.ndarray) -> None:
    mesh = d.mesh
    z = points[:, -1]
    scale = max(1.0, float(np.max(np.abs(mesh.parts))))
    on_plane = np.nonzero(np.abs(z) <= 1e-14 * scale)[0]
    if len(on_plane) == 0:
        return
    from scipy.spatial import cKDTree

    centres = mesh.parts.mean(axis=1)
    tree = cKDTree(centres)
    hits = tree.query_ball_point(points[on_plane, :-1], r=mesh.h)
    for idx, cand in zip(on_plane, hits):
        if cand and np.any(points_in_cells(mesh.parts[cand], mesh.part_kind,
                                           points[idx:idx + 1, :-1], tol=0.0)):
            raise ValueError(f"evaluation point {points[idx].tolist()} lies on the screen")


def single_layer_potential(spec: KernelSpec, d: Density, points, q: int | None = None):
    """``(S phi)(x)`` at points of the ambient space."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    mesh = d.mesh
    if pts.shape[1] != mesh.ambient_dimension:
        raise ValueError("points must live in the ambient space")
    _check_off_screen(d, pts)
    coeff = np.asarray(d.coefficients, dtype=complex)[mesh.owner]
    out = np.empty(len(pts), dtype=complex)
    block = max(1, _BLOCK // max(1, len(mesh.parts)))
    for s in range(0, len(pts), block):
        mat = single_layer_matrix(spec, mesh.parts, mesh.part_kind, pts[s:s + block], q=q)
        out[s:s + block] = mat @ coeff
    return out


def eval_scattered(d: Density, points, q: int | None = None) -> np.ndarray:
    spec = KernelSpec.helmholtz(d.mesh.ambient_dimension, d.k)
    return -single_layer_potential(spec, d, points, q)


def eval_total(d: Density, wave: IncidentWave, points) -> np.ndarray:
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    return eval_scattered(d, pts) + wave(pts)


def near_field(d: Density, grid: FieldGrid) -> FieldGrid:
    return FieldGrid(grid.points, grid.weights, grid.shapes, eval_scattered(d, grid.points))


# ---------------------------------------------------------------------------
# far field
# ---------------------------------------------------------------------------

def far_field_grid(n: int, n_theta: int = 64, n_phi: int = 128, n_circle: int = 256) -> FarFieldPattern:
    """Uniform angles on the circle, or Gauss colatitudes x uniform longitudes."""
    if n == 2:
        theta = 2.0 * np.pi * np.arange(n_circle) / n_circle
        dirs = np.stack([np.cos(theta), np.sin(theta)], axis=1)
        return FarFieldPattern(dirs, np.full(n_circle, 2.0 * np.pi / n_circle), theta[:, None])
    if n != 3:
        raise ValueError("dimension must be 2 or 3")
    rule = gauss_legendre(n_theta)
    cos_t, w_t = rule.nodes, rule.weights
    theta = np.arccos(cos_t)
    phi = 2.0 * np.pi * np.arange(n_phi) / n_phi
    tt, pp = np.meshgrid(theta, phi, indexing="ij")
    st = np.sin(tt)
    dirs = np.stack([st * np.cos(pp), st * np.sin(pp), np.cos(tt)], axis=-1).reshape(-1, 3)
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    weights = np.repeat(w_t, n_phi) * (2.0 * np.pi / n_phi)
    return FarFieldPattern(dirs, weights, np.stack([tt.ravel(), pp.ravel()], axis=1))


def far_field_prefactor(n: int, k: float) -> complex:
    return -1j * k ** ((n - 3) / 2.0) / (2.0 * (2j * np.pi) ** ((n - 1) / 2.0))


def far_field(d: Density, pattern: FarFieldPattern | None = None, q: int | None = None) -> FarFieldPattern:
    mesh = d.mesh
    n = mesh.ambient_dimension
    if pattern is None:
        pattern = far_field_grid(n)
    spec = KernelSpec.helmholtz(n, d.k)
    if q is None:
        q = policy_order(float(cell_diameters(mesh.parts).max()), wavelength_of(spec))
    pts, w = map_rule(mesh.parts, mesh.part_kind, far_rule(mesh.part_kind, q))
    coeff = np.asarray(d.coefficients, dtype=complex)[mesh.owner]
    y = pts.reshape(-1, n - 1)
    wc = (w * coeff[:, None]).ravel()
    dirs = pattern.directions[:, : n - 1]
    vals = np.empty(len(dirs), dtype=complex)
    block = max(1, _BLOCK // max(1, len(y)))
    for s in range(0, len(dirs), block):
        phase = dirs[s:s + block] @ y.T
        vals[s:s + block] = np.exp(-1j * d.k * phase) @ wc
    vals *= far_field_prefactor(n, d.k)
    return FarFieldPattern(pattern.directions, pattern.weights, pattern.angles, vals)


# ---------------------------------------------------------------------------
# exports
# ---------------------------------------------------------------------------

def write_field_csv(grid: FieldGrid, path) -> None:
    pts = grid.points
    if pts.shape[1] == 2:
        pts = np.concatenate([pts, np.zeros((len(pts), 1))], axis=1)
    with open(path, "w") as fh:
        fh.write("x,y,z,re,im\n")
        for p, v in zip(pts, grid.samples):
            fh.write(f"{p[0]:.17g},{p[1]:.17g},{p[2]:.17g},{v.real:.17g},{v.imag:.17g}\n")


def write_field_pgm(grid: FieldGrid, path, face: int = 0) -> None:
    """8-bit grayscale image of ``|u|`` on one face.

    Pixel value ``round(255 * |u| / max|u|)`` (0 if the field vanishes); rows
    run from the top (largest second coordinate) down.
    """
    rows, cols = grid.shapes[face]
    start = sum(r * c for r, c in grid.shapes[:face])
    mag = np.abs(grid.samples[start:start + rows * cols]).reshape(rows, cols)
    peak = mag.max()
    img = np.zeros_like(mag) if peak == 0 else np.rint(255.0 * mag / peak)
    img = img[::-1].astype(np.uint8)
    with open(path, "wb") as fh:
        fh.write(f"P5\n{cols} {rows}\n255\n".encode())
        fh.write(img.tobytes())


def write_far_field_csv(pattern: FarFieldPattern, path) -> None:
    names = ["theta"] if pattern.angles.shape[1] == 1 else ["colatitude", "longitude"]
    with open(path, "w") as fh:
        fh.write(",".join(names + ["re", "im", "abs"]) + "\n")
        for ang, v in zip(pattern.angles, pattern.values):
            cols = [f"{a:.17g}" for a in ang] + [f"{v.real:.17g}", f"{v.imag:.17g}", f"{abs(v):.17g}"]
            fh.write(",".join(cols) + "\n")
