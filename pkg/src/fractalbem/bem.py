"""Collocation and Galerkin discretisations of the single-layer equation.

The unknown is piecewise constant on the mesh elements.  Collocation imposes
``(S phi)(x_l) = exp(i k d . x_l)`` at the element centres; the Galerkin
variant tests against the element indicators.  Both share the part-level
integrators in :mod:`fractalbem.quadrature`.
"""

from __future__ import annotations

import logging
import math
import struct
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .kernels import KernelSpec, _kernel_values, eval_kernel_smooth_2d
from .meshing import Mesh
from .quadrature import (
    _composite_nodes,
    cell_diameters,
    diagonal_entry,
    double_log_integral,
    gauss_legendre,
    graded_square_rule,
    graded_triangle_rule,
    map_rule,
    policy_order,
    polygon_near_integrals,
    single_layer_matrix,
    square_rule,
    triangle_rule_7pt,
    wavelength_of,
)

log = logging.getLogger(__name__)

DENSE_LIMIT = 12000


class AssemblyError(RuntimeError):
    pass


class SolverError(RuntimeError):
    pass


@dataclass(frozen=True)
class IncidentWave:
    """Plane wave ``exp(i k d . x)``."""

    k: float
    direction: tuple

    def __post_init__(self):
        if not self.k > 0:
            raise ValueError("wavenumber must be positive")
        d = np.asarray(self.direction, dtype=float)
        if d.ndim != 1 or len(d) not in (2, 3):
            raise ValueError("direction must be a 2- or 3-vector")
        if abs(np.linalg.norm(d) - 1.0) > 1e-14:
            raise ValueError("direction must be a unit vector")

    @property
    def dimension(self) -> int:
        return len(self.direction)

    def __call__(self, points):
        x = np.atleast_2d(np.asarray(points, dtype=float))
        d = np.asarray(self.direction, dtype=float)
        return np.exp(1j * self.k * (x @ d[: x.shape[1]]))


@dataclass(frozen=True)
class LinearSystem:
    matrix: np.ndarray
    rhs: np.ndarray

    def __post_init__(self):
        n = len(self.rhs)
        if self.matrix.shape != (n, n):
            raise ValueError("matrix and right-hand side sizes disagree")

    @property
    def N(self) -> int:
        return len(self.rhs)


@dataclass(frozen=True)
class Density:
    """Piecewise-constant density: one coefficient per mesh element."""

    mesh: Mesh
    coefficients: np.ndarray
    k: float

    def __post_init__(self):
        c = np.asarray(self.coefficients)
        if c.shape != (self.mesh.N,):
            raise ValueError("one coefficient per element is required")
        if not np.all(np.isfinite(c)):
            raise ValueError("coefficients must be finite")


def _element_bounds(mesh: Mesh) -> np.ndarray:
    return np.searchsorted(mesh.owner, np.arange(mesh.N))


def reduce_columns(mesh: Mesh, mat: np.ndarray) -> np.ndarray:
    """Sum part columns into element columns."""
    if len(mesh.parts) == mesh.N:
        return mat
    return np.add.reduceat(mat, _element_bounds(mesh), axis=1)


def reduce_rows(mesh: Mesh, mat: np.ndarray) -> np.ndarray:
    if len(mesh.parts) == mesh.N:
        return mat
    return np.add.reduceat(mat, _element_bounds(mesh), axis=0)


def _regular_side(part: np.ndarray, kind: str) -> float | None:
    """Side length if the part is a square or equilateral triangle."""
    if kind == "segment":
        return float(abs(part[1, 0] - part[0, 0]))
    sides = np.linalg.norm(np.roll(part, -1, axis=0) - part, axis=1)
    if not np.allclose(sides, sides[0], rtol=1e-12):
        return None
    if kind == "square":
        diag = np.linalg.norm(part[2] - part[0])
        if not math.isclose(diag, sides[0] * math.sqrt(2.0), rel_tol=1e-12):
            return None
    return float(sides[0])


def kernel_for(mesh: Mesh, k: float) -> KernelSpec:
    return KernelSpec.helmholtz(mesh.ambient_dimension, k)


def collocation_matrix(spec: KernelSpec, mesh: Mesh, q: int | None = None) -> np.ndarray:
    """``A[l, m] = int_{T_m} Phi(x_l, y) ds(y)`` with ``x_l`` the element centres.

    Separated pairs use the mapped policy rule; pairs closer than twice the
    part diameter, including the self-pairs, use the semi-analytic routines.
    """
    if spec.ambient_dimension != mesh.ambient_dimension:
        raise AssemblyError("kernel dimension does not match the mesh")
    targets = np.concatenate([mesh.centers, np.zeros((mesh.N, 1))], axis=1)
    if q is None:
        q = policy_order(float(np.max(_part_diameters(mesh))), wavelength_of(spec))
    mat = reduce_columns(mesh, single_layer_matrix(spec, mesh.parts, mesh.part_kind, targets, q=q))
    if len(mesh.parts) == mesh.N:
        # closed-form self entries for regular cells
        side = _regular_side(mesh.parts[0], mesh.part_kind)
        if side is not None and mesh.uniform:
            np.fill_diagonal(mat, diagonal_entry(spec, mesh.part_kind, side))
    if not np.all(np.isfinite(mat)):
        raise AssemblyError("non-finite matrix entries; collocation node on another element?")
    return mat


def _part_diameters(mesh: Mesh) -> np.ndarray:
    return cell_diameters(mesh.parts)


def assemble_collocation(mesh: Mesh, wave: IncidentWave, q: int | None = None) -> LinearSystem:
    if wave.dimension != mesh.ambient_dimension:
        raise AssemblyError("incident direction does not match the ambient dimension")
    spec = kernel_for(mesh, wave.k)
    mat = collocation_matrix(spec, mesh, q)
    rhs = wave(mesh.centers)
    return LinearSystem(mat, rhs)


# ---------------------------------------------------------------------------
# Galerkin
# ---------------------------------------------------------------------------

NEAR_2D = 3.0
NEAR_3D = 4.0
_CHUNK = 2_000_000


def _galerkin_2d_parts(spec: KernelSpec, parts: np.ndarray, q: int) -> np.ndarray:
    a = np.minimum(parts[:, 0, 0], parts[:, 1, 0])
    b = np.maximum(parts[:, 0, 0], parts[:, 1, 0])
    n = len(a)
    pts, w = map_rule(parts, "segment", gauss_legendre(q))
    x = pts[..., 0]
    out = np.empty((n, n), dtype=spec.dtype)
    block = max(1, _CHUNK // max(1, n * q * q))
    for s in range(0, n, block):
        r = np.abs(x[s:s + block, :, None, None] - x[None, None, :, :])
        with np.errstate(divide="ignore", invalid="ignore"):
            vals = _kernel_values(spec, np.where(r > 0, r, 1.0))
        out[s:s + block] = np.einsum("aibj,ai,bj->ab", vals, w[s:s + block], w)
    h = float(np.max(b - a))
    centres = 0.5 * (a + b)
    i, j = np.nonzero(np.abs(centres[:, None] - centres[None, :]) < NEAR_2D * h)
    # exact logarithmic part plus composite Gauss for the smooth remainder
    log_part = -double_log_integral(a[i], b[i], a[j], b[j]) / (2.0 * np.pi)
    pieces = max(8, int(math.ceil(4.0 * spec.scale * h)))
    xs, wx = _composite_nodes(a[i], b[i], pieces, 10)
    ys, wy = _composite_nodes(a[j], b[j], pieces, 10)
    rem = eval_kernel_smooth_2d(spec, np.abs(xs[:, :, None] - ys[:, None, :]))
    out[i, j] = log_part + np.einsum("kab,ka,kb->k", rem, wx, wy)
    return out


def _second_moments(parts: np.ndarray, kind: str) -> np.ndarray:
    """Per-part ``(1/|T|) int_T (x - c)(x - c)^T``; exact for these rules."""
    rule = square_rule(2) if kind == "square" else triangle_rule_7pt()
    pts, w = map_rule(parts, kind, rule)
    c = parts.mean(axis=1)
    d = pts - c[:, None, :]
    return np.einsum("pq,pqa,pqb->pab", w, d, d) / w.sum(axis=1)[:, None, None]


def _kernel_derivatives(spec: KernelSpec, r):
    """``Phi, Phi', Phi''`` for the 3D kernels (``s = ik`` or ``-kappa``)."""
    s = 1j * spec.k if spec.mode == "helmholtz" else -spec.kappa
    phi = _kernel_values(spec, r)
    g = s - 1.0 / r
    return phi, phi * g, phi * (g * g + 1.0 / (r * r))


def _galerkin_3d_parts(spec: KernelSpec, parts: np.ndarray, kind: str,
                       outer_order: int = 10) -> np.ndarray:
    n = len(parts)
    centres = parts.mean(axis=1)
    area = 0.5 * np.abs(np.sum(parts[..., 0] * np.roll(parts[..., 1], -1, axis=1)
                               - np.roll(parts[..., 0], -1, axis=1) * parts[..., 1], axis=1))
    moments = _second_moments(parts, kind)
    h = float(np.max(np.linalg.norm(parts[:, :, None] - parts[:, None], axis=-1)))
    out = np.empty((n, n), dtype=spec.dtype)
    block = max(1, _CHUNK // max(1, n))
    for s in range(0, n, block):
        rel = centres[s:s + block, None, :] - centres[None, :, :]
        r = np.linalg.norm(rel, axis=-1)
        near = r < NEAR_3D * h
        r_safe = np.where(near, 1.0, r)
        phi, d1, d2 = _kernel_derivatives(spec, r_safe)
        u = rel / r_safe[..., None]
        msum = moments[s:s + block, None] + moments[None, :]
        radial = np.einsum("abi,abij,abj->ab", u, msum, u)
        trace = np.trace(msum, axis1=-2, axis2=-1)
        corr = 0.5 * (d2 * radial + d1 / r_safe * (trace - radial))
        val = (phi + corr) * area[s:s + block, None] * area[None, :]
        out[s:s + block] = np.where(near, 0.0, val)
    # near pairs: outer Gauss rule times exact inner polygon integral
    i, j = np.nonzero(np.linalg.norm(centres[:, None] - centres[None], axis=-1) < NEAR_3D * h)
    ref = parts[i, :1, :]
    key = np.concatenate([(parts[i] - ref).reshape(len(i), -1),
                          (parts[j] - ref).reshape(len(i), -1)], axis=1)
    _, first, inverse = np.unique(np.round(key / h, 9), axis=0,
                                  return_index=True, return_inverse=True)
    rule = graded_square_rule(outer_order) if kind == "square" else graded_triangle_rule(outer_order)
    outer = parts[i[first]]
    inner = parts[j[first]]
    xs, wx = map_rule(outer, kind, rule)
    nq = xs.shape[1]
    polys = np.repeat(inner, nq, axis=0)
    vals = polygon_near_integrals(spec, polys, xs.reshape(-1, 2), np.zeros(len(polys)))
    uniq = (vals.reshape(len(first), nq) * wx).sum(axis=1)
    out[i, j] = uniq[inverse.ravel()]
    return out


def galerkin_matrix(spec: KernelSpec, mesh: Mesh) -> np.ndarray:
    """``B[l, m] = int_{T_l} int_{T_m} Phi(x, y) ds(y) ds(x)``."""
    if spec.ambient_dimension != mesh.ambient_dimension:
        raise AssemblyError("kernel dimension does not match the mesh")
    if mesh.part_kind == "segment":
        q = max(4, policy_order(float(np.max(_part_diameters(mesh))), wavelength_of(spec)))
        part_mat = _galerkin_2d_parts(spec, mesh.parts, q)
    else:
        part_mat = _galerkin_3d_parts(spec, mesh.parts, mesh.part_kind)
    mat = reduce_rows(mesh, reduce_columns(mesh, part_mat))
    # the exact matrix is symmetric; near pairs are integrated asymmetrically
    return 0.5 * (mat + mat.T)


def assemble_galerkin_2d(mesh: Mesh, wave: IncidentWave) -> LinearSystem:
    if mesh.part_kind != "segment":
        raise AssemblyError("the Galerkin validation path supports 2D segment meshes only")
    spec = kernel_for(mesh, wave.k)
    mat = galerkin_matrix(spec, mesh)
    a, b = mesh.parts[:, 0, 0], mesh.parts[:, 1, 0]
    kd = wave.k * float(wave.direction[0])
    if abs(kd) > 1e-14:
        part_rhs = (np.exp(1j * kd * b) - np.exp(1j * kd * a)) / (1j * kd)
    else:
        part_rhs = (b - a).astype(complex)
    rhs = np.bincount(mesh.owner, weights=part_rhs.real, minlength=mesh.N) \
        + 1j * np.bincount(mesh.owner, weights=part_rhs.imag, minlength=mesh.N)
    return LinearSystem(mat, rhs)


# ---------------------------------------------------------------------------
# solve and dump
# ---------------------------------------------------------------------------

def residual(sys: LinearSystem, u: np.ndarray) -> float:
    return float(np.linalg.norm(sys.matrix @ u - sys.rhs) / max(np.linalg.norm(sys.rhs), 1e-300))


def solve(sys: LinearSystem, dense_limit: int = DENSE_LIMIT) -> np.ndarray:
    """Dense LU solve with partial pivoting."""
    if sys.N > dense_limit:
        raise SolverError(f"N = {sys.N} exceeds the dense limit {dense_limit}")
    try:
        # singular factors are reported below with a condition estimate
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
            lu, piv = scipy.linalg.lu_factor(sys.matrix, check_finite=True)
    except (ValueError, np.linalg.LinAlgError) as exc:
        raise SolverError(str(exc)) from exc
    diag = np.abs(np.diag(lu))
    if diag.min() <= np.finfo(float).eps * diag.max() * sys.N:
        anorm = np.linalg.norm(sys.matrix, 1)
        rcond = scipy.linalg.lapack.zgecon(lu.astype(complex), anorm)[0] if sys.N else 0.0
        raise SolverError(f"matrix is numerically singular (condition estimate {1 / max(rcond, 1e-300):.3e})")
    u = scipy.linalg.lu_solve((lu, piv), sys.rhs)
    res = residual(sys, u)
    log.info("solved N=%d, relative residual %.2e", sys.N, res)
    if res > 1e-10:
        log.warning("relative residual %.2e exceeds 1e-10", res)
    return u


def dump_system(sys: LinearSystem, path) -> None:
    """Little-endian: uint64 N, N*N complex128 row-major matrix, N complex128 rhs."""
    with open(path, "wb") as fh:
        fh.write(struct.pack("<Q", sys.N))
        fh.write(np.ascontiguousarray(sys.matrix, dtype="<c16").tobytes())
        fh.write(np.ascontiguousarray(sys.rhs, dtype="<c16").tobytes())


def load_system(path) -> LinearSystem:
    with open(path, "rb") as fh:
        (n,) = struct.unpack("<Q", fh.read(8))
        mat = np.frombuffer(fh.read(16 * n * n), dtype="<c16").reshape(n, n)
        rhs = np.frombuffer(fh.read(16 * n), dtype="<c16")
    return LinearSystem(mat.astype(complex), rhs.astype(complex))
