"""Solution norms: energy (H^-1/2) norm, near-field and far-field L2 norms,
and differences of densities living on different meshes.

For a piecewise-constant density with coefficient vector ``c`` the energy
norm is ``sqrt(2 c^H B c)``, with ``B`` the Galerkin matrix of the modified
(reaction-diffusion) single-layer operator with decay ``kappa``.  Its symbol on
the flat screen is ``1 / (2 sqrt(kappa^2 + |xi|^2))``, which makes this the
``(kappa^2 + |xi|^2)^(-1/2)``-weighted Fourier norm.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .bem import Density, galerkin_matrix
from .fields import FarFieldPattern, FieldGrid
from .geometry import LatticeCells
from .kernels import KernelSpec
from .meshing import Mesh, mesh_from_lattice, mesh_from_parts

log = logging.getLogger(__name__)


class NormAccuracyError(RuntimeError):
    pass


@dataclass
class EnergyForm:
    """Gram matrix of the modified single layer on a mesh, checked to be HPD."""

    mesh: Mesh
    kappa: float = 1.0
    gram: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if not self.kappa > 0:
            raise ValueError("kappa must be positive")
        spec = KernelSpec.modified(self.mesh.ambient_dimension, self.kappa)
        b = galerkin_matrix(spec, self.mesh)
        asym = float(np.max(np.abs(b - b.T))) if b.size else 0.0
        if asym > 1e-10 * max(float(np.max(np.abs(b))), 1e-300):
            raise NormAccuracyError(f"Gram matrix not symmetric (defect {asym:.2e})")
        b = 0.5 * (b + b.T)
        try:
            scipy.linalg.cholesky(b, lower=True)
        except np.linalg.LinAlgError as exc:
            raise NormAccuracyError("Gram matrix is not positive definite; "
                                    "quadrature too coarse") from exc
        self.gram = b

    def norm(self, coefficients) -> float:
        c = np.asarray(coefficients)
        val = 2.0 * np.real(np.conj(c) @ (self.gram @ c))
        return float(math.sqrt(max(val, 0.0)))


def energy_norm(d: Density, kappa: float = 1.0) -> float:
    """``H^-1/2`` norm (``kappa = 1``) or its ``k``-weighted variant (``kappa = k``)."""
    c = np.asarray(d.coefficients)
    if not np.any(c):
        return 0.0
    return EnergyForm(d.mesh, kappa).norm(c)


@dataclass
class EquivalenceReport:
    k: float
    norm_unit: float
    norm_k: float
    lower: float
    upper: float
    holds: bool


def norm_equivalence_check(d: Density, k: float | None = None, slack: float = 1e-6,
                           forms: tuple | None = None) -> EquivalenceReport:
    """Check ``min(1, k^-1/2) |psi|_1 <= |psi|_k <= max(1, k^-1/2) |psi|_1``."""
    k = d.k if k is None else k
    if forms is None:
        forms = (EnergyForm(d.mesh, 1.0), EnergyForm(d.mesh, k))
    n1 = forms[0].norm(d.coefficients)
    nk = forms[1].norm(d.coefficients)
    lo = min(1.0, k ** -0.5) * n1
    hi = max(1.0, k ** -0.5) * n1
    tol = slack * max(n1, 1e-300)
    return EquivalenceReport(k, n1, nk, lo, hi, bool(lo - tol <= nk <= hi + tol))


def near_field_norm(grid: FieldGrid) -> float:
    if grid.samples is None:
        raise ValueError("field grid has no samples")
    return float(math.sqrt(np.sum(np.abs(grid.samples) ** 2 * grid.weights)))


def farfield_norm(pattern: FarFieldPattern) -> float:
    if pattern.values is None:
        raise ValueError("pattern has no values")
    return float(math.sqrt(np.sum(np.abs(pattern.values) ** 2 * pattern.weights)))


# ---------------------------------------------------------------------------
# differences of densities on different meshes
# ---------------------------------------------------------------------------

@dataclass
class DifferenceResult:
    absolute: float
    reference: float
    mesh: Mesh
    psi_first: np.ndarray
    psi_second: np.ndarray

    @property
    def relative(self) -> float:
        return self.absolute / self.reference if self.reference > 0 else math.inf


def _cell_keys(cells: np.ndarray) -> list:
    return [tuple(int(v) for v in row) for row in cells]


def _tri_cell_at(x3: np.ndarray):
    """Inner triangle ``(a, b, down)`` whose centroid (times 3) is ``x3``."""
    x, y = int(x3[0]), int(x3[1])
    if (x - 1) % 3 == 0 and (y - 1) % 3 == 0:
        return ((x - 1) // 3, (y - 1) // 3, 0)
    if (x - 2) % 3 == 0 and (y - 2) % 3 == 0:
        return ((x - 2) // 3, (y - 2) // 3, 1)
    raise ValueError("point is not an inner-lattice centroid")


def merge_inner_outer(inner: Density, outer: Density):
    """Represent an inner and an outer snowflake density on one inner-lattice mesh.

    The merged mesh extends the inner mesh by the inner-lattice triangles
    whose centroids lie on edges of outer-mesh triangles.  The outer density
    is transferred by averaging over the two outer triangles that meet each
    merged triangle (zero outside the outer mesh).
    """
    li, lo = inner.mesh.lattice, outer.mesh.lattice
    if li is None or lo is None or li.kind != "tri" or lo.kind != "tri_outer":
        raise ValueError("need an inner ('tri') and an outer ('tri_outer') lattice mesh")
    if li.unit != lo.unit:
        raise ValueError("inner and outer meshes use incompatible lattices")
    acc: dict = {}
    verts = lo.vertices_int()
    vals = np.asarray(outer.coefficients, dtype=complex)
    for tri, value in zip(verts, vals):
        for e in range(3):
            a, b = tri[e], tri[(e + 1) % 3]
            for frac in (1, 2):
                key = _tri_cell_at(3 * a + frac * (b - a))
                acc[key] = acc.get(key, 0.0) + 0.5 * value
    inner_keys = _cell_keys(li.cells)
    index = {key: i for i, key in enumerate(inner_keys)}
    extra = sorted(k for k in acc if k not in index)
    cells = np.array(inner_keys + extra, dtype=np.int64).reshape(-1, 3)
    merged = LatticeCells("tri", li.unit, cells)
    order_keys = inner_keys + extra
    psi_in = np.zeros(len(cells), dtype=complex)
    psi_in[: len(inner_keys)] = inner.coefficients
    psi_out = np.array([acc.get(key, 0.0) for key in order_keys], dtype=complex)
    return mesh_from_lattice(merged, info={"policy": "merged"}), psi_in, psi_out


def merge_common_lattice(d1: Density, d2: Density):
    """Zero-extend two densities on meshes sharing one uniform lattice."""
    l1, l2 = d1.mesh.lattice, d2.mesh.lattice
    if l1 is None or l2 is None or l1.kind != l2.kind or l1.unit != l2.unit:
        raise ValueError("meshes do not share a common lattice")
    keys1, keys2 = _cell_keys(l1.cells), _cell_keys(l2.cells)
    union = sorted(set(keys1) | set(keys2))
    index = {k: i for i, k in enumerate(union)}
    psi1 = np.zeros(len(union), dtype=complex)
    psi2 = np.zeros(len(union), dtype=complex)
    psi1[[index[k] for k in keys1]] = d1.coefficients
    psi2[[index[k] for k in keys2]] = d2.coefficients
    width = len(union[0]) if union else 2
    cells = LatticeCells(l1.kind, l1.unit, np.array(union, dtype=np.int64).reshape(-1, width))
    return mesh_from_lattice(cells, info={"policy": "merged"}), psi1, psi2


def merge_segments(d1: Density, d2: Density):
    """Common refinement of two 1D meshes (densities are zero off their mesh)."""
    if d1.mesh.part_kind != "segment" or d2.mesh.part_kind != "segment":
        raise ValueError("segment overlay needs two 1D meshes")

    def intervals(d):
        p = d.mesh.parts[:, :, 0]
        lo, hi = p.min(axis=1), p.max(axis=1)
        return lo, hi, np.asarray(d.coefficients, dtype=complex)[d.mesh.owner]

    lo1, hi1, c1 = intervals(d1)
    lo2, hi2, c2 = intervals(d2)
    h = max(d1.mesh.h, d2.mesh.h)
    # snap nearly equal breakpoints so rounding does not create slivers
    br = np.unique(np.round(np.concatenate([lo1, hi1, lo2, hi2]) / h, 10)) * h
    mids = 0.5 * (br[:-1] + br[1:])

    def lookup(lo, hi, c):
        idx = np.searchsorted(lo, mids, side="right") - 1
        ok = (idx >= 0) & (mids < hi[np.clip(idx, 0, None)])
        return np.where(ok, c[np.clip(idx, 0, None)], 0.0), ok

    o1, o2 = np.argsort(lo1), np.argsort(lo2)
    v1, in1 = lookup(lo1[o1], hi1[o1], c1[o1])
    v2, in2 = lookup(lo2[o2], hi2[o2], c2[o2])
    keep = in1 | in2
    parts = np.stack([br[:-1][keep], br[1:][keep]], axis=1)[..., None]
    return mesh_from_parts(parts, "segment", info={"policy": "merged"}), v1[keep], v2[keep]


def density_difference(d1: Density, d2: Density, kappa: float = 1.0) -> DifferenceResult:
    """Energy norm of ``d1 - d2`` on a merged mesh; reference is the norm of ``d1``."""
    l1, l2 = d1.mesh.lattice, d2.mesh.lattice
    if l1 is not None and l2 is not None and l1.kind == "tri" and l2.kind == "tri_outer":
        mesh, a, b = merge_inner_outer(d1, d2)
    elif l1 is not None and l2 is not None and l1.kind == "tri_outer" and l2.kind == "tri":
        mesh, b, a = merge_inner_outer(d2, d1)
    elif l1 is not None and l2 is not None:
        mesh, a, b = merge_common_lattice(d1, d2)
    elif d1.mesh.part_kind == "segment" and d2.mesh.part_kind == "segment":
        mesh, a, b = merge_segments(d1, d2)
    else:
        raise ValueError("densities live on incompatible meshes")
    form = EnergyForm(mesh, kappa)
    return DifferenceResult(form.norm(a - b), form.norm(a), mesh, a, b)


def density_difference_norm(d1: Density, d2: Density, kappa: float = 1.0) -> float:
    return density_difference(d1, d2, kappa).absolute
