"""Fast self-checks against exact counts and independent oracles."""

from __future__ import annotations

import math
from fractions import Fraction

import numpy as np

from .bem import galerkin_matrix
from .geometry import generate_prefractal, generate_snowflake, generate_square_snowflake
from .kernels import KernelSpec
from .meshing import mesh_from_parts
from .oracles import (
    polar_diagonal,
    segment_energy_oracle,
    square_energy_oracle,
    square_static_limit,
    triangle_static_limit,
)
from .quadrature import diagonal_entry

KOCH_INNER_COUNTS = (1, 12, 120, 1128, 10344)


def _item(name, passed, value, tolerance):
    return {"name": name, "passed": bool(passed), "value": value, "tolerance": tolerance}


def check_geometry() -> list:
    out = []
    counts = [generate_snowflake(math.pi / 6, "inner", j).cell_count() for j in range(5)]
    out.append(_item("koch inner triangle counts", tuple(counts) == KOCH_INNER_COUNTS, counts, 0))
    ok, edges = True, []
    for j in range(5):
        p = generate_square_snowflake(j)
        edges.append(p.edge_count())
        ok &= p.polygon.area() == Fraction(1) and p.edge_count() == 4 * 8 ** j
    out.append(_item("square snowflake area and edges", ok, edges, 0))
    dust = [generate_prefractal("cantor_dust", {"alpha": 1 / 3}, j).cell_count() for j in range(6)]
    out.append(_item("cantor dust component counts", dust == [4 ** j for j in range(6)], dust, 0))
    return out


def check_singular_integrals() -> list:
    out = []
    worst = 0.0
    for kl in (0.1, 1.0, 5.0):
        spec = KernelSpec.helmholtz(3, kl)
        for kind in ("square", "triangle"):
            ref = polar_diagonal(spec, kind, 1.0)
            worst = max(worst, abs(diagonal_entry(spec, kind, 1.0) - ref) / abs(ref))
    out.append(_item("diagonal entries vs polar quadrature", worst < 1e-6, worst, 1e-6))
    spec = KernelSpec.helmholtz(3, 1e-3)
    sq = abs(diagonal_entry(spec, "square", 1.0) - square_static_limit(1.0)) / square_static_limit(1.0)
    tr = abs(diagonal_entry(spec, "triangle", 1.0) - triangle_static_limit(1.0)) / triangle_static_limit(1.0)
    out.append(_item("static limits at kL = 1e-3", max(sq, tr) < 1e-3, max(sq, tr), 1e-3))
    return out


def check_energy_oracles() -> list:
    out = []
    seg = mesh_from_parts(np.array([[[0.0], [0.1]]]), "segment")
    val = math.sqrt(2.0 * galerkin_matrix(KernelSpec.modified(2, 1.0), seg)[0, 0])
    ref = segment_energy_oracle(0.1)
    out.append(_item("segment energy norm", abs(val - ref) / ref < 1e-3, abs(val - ref) / ref, 1e-3))
    sq = mesh_from_parts(np.array([[[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]]), "square")
    val = math.sqrt(2.0 * galerkin_matrix(KernelSpec.modified(3, 1.0), sq)[0, 0])
    ref = square_energy_oracle()
    out.append(_item("unit square energy norm", abs(val - ref) / ref < 1e-3, abs(val - ref) / ref, 1e-3))
    return out


def run_validation() -> list:
    return check_geometry() + check_singular_integrals() + check_energy_oracles()
