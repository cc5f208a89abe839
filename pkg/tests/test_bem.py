import math
import os

import mpmath as mp
import numpy as np
import pytest

from fractalbem.bem import (
    AssemblyError,
    Density,
    IncidentWave,
    LinearSystem,
    SolverError,
    assemble_collocation,
    assemble_galerkin_2d,
    collocation_matrix,
    dump_system,
    galerkin_matrix,
    load_system,
    residual,
    solve,
)
from fractalbem.fields import far_field
from fractalbem.geometry import generate_prefractal, generate_snowflake
from fractalbem.kernels import KernelSpec
from fractalbem.meshing import (
    mesh_from_parts,
    mesh_grouped,
    mesh_per_component,
    subdivide_parts,
    uniform_lattice_mesh,
)
from fractalbem.norms import farfield_norm
from fractalbem.quadrature import diagonal_entry, map_rule, square_rule

CANTOR_DIR = (0.5, -math.sqrt(3) / 2)


def cantor_mesh(j, n0=1, alpha=1 / 3):
    return mesh_per_component(generate_prefractal("cantor_set", {"alpha": alpha}, j), n0)


def test_incident_wave_validation():
    with pytest.raises(ValueError):
        IncidentWave(1.0, (1.0, 1.0))
    with pytest.raises(ValueError):
        IncidentWave(0.0, (1.0, 0.0))
    with pytest.raises(ValueError):
        IncidentWave(1.0, (1.0,))
    wave = IncidentWave(2.0, (0.0, 0.6, -0.8))
    assert np.allclose(np.abs(wave(np.random.default_rng(1).normal(size=(10, 3)))), 1.0)


def test_density_validation():
    m = cantor_mesh(1)
    with pytest.raises(ValueError):
        Density(m, np.zeros(3), 1.0)
    with pytest.raises(ValueError):
        Density(m, np.array([1.0, np.nan]), 1.0)


def test_single_element_system():
    m = mesh_per_component(generate_prefractal("cantor_dust", {"alpha": 1 / 3}, 0), 1)
    sys = assemble_collocation(m, IncidentWave(3.0, (0.0, 0.0, -1.0)))
    assert sys.matrix.shape == (1, 1)
    assert sys.matrix[0, 0] == pytest.approx(diagonal_entry(KernelSpec.helmholtz(3, 3.0), "square", 1.0),
                                             rel=1e-14)
    seg = cantor_mesh(0)
    sys = assemble_collocation(seg, IncidentWave(3.0, CANTOR_DIR))
    assert sys.matrix[0, 0] == pytest.approx(diagonal_entry(KernelSpec.helmholtz(2, 3.0), "segment", 1.0),
                                             rel=1e-14)


def test_translation_invariance_and_rhs():
    m = cantor_mesh(4)
    sys = assemble_collocation(m, IncidentWave(30.0, CANTOR_DIR))
    assert np.allclose(np.abs(sys.rhs), 1.0, atol=1e-14)
    diff = np.round((m.centers[:, None, 0] - m.centers[None, :, 0]) * 3 ** 6).astype(int)
    seen = {}
    worst = 0.0
    for l in range(m.N):
        for mm in range(m.N):
            key = diff[l, mm]
            if key in seen:
                worst = max(worst, abs(sys.matrix[l, mm] - seen[key]) / abs(seen[key]))
            else:
                seen[key] = sys.matrix[l, mm]
    assert worst < 1e-10
    # reciprocity on congruent elements
    assert np.allclose(sys.matrix, sys.matrix.T, rtol=1e-10, atol=0)


def test_grouped_element_diagonal():
    p = generate_prefractal("cantor_dust", {"alpha": 1 / 3}, 1)
    m = mesh_grouped(p, 0)
    spec = KernelSpec.helmholtz(3, 5.0)
    val = collocation_matrix(spec, m)[0, 0]
    pts, w = map_rule(subdivide_parts(p.cells, "square", 32), "square", square_rule(6))
    r = np.sqrt(((pts - 0.5) ** 2).sum(-1))
    brute = np.sum(w * np.exp(5j * r) / (4 * np.pi * r))
    assert abs(val - brute) <= 1e-8 * abs(brute)


def test_galerkin_symmetric_and_rhs():
    m = cantor_mesh(3)
    sys = assemble_galerkin_2d(m, IncidentWave(30.0, CANTOR_DIR))
    assert np.max(np.abs(sys.matrix - sys.matrix.T)) <= 1e-10 * np.max(np.abs(sys.matrix))
    a, b = m.parts[:, 0, 0], m.parts[:, 1, 0]
    ref = [complex(mp.quad(lambda x: mp.expj(15.0 * x), [lo, hi])) for lo, hi in zip(a, b)]
    assert np.allclose(sys.rhs, ref, rtol=1e-12)


@pytest.mark.parametrize("k,L", [(1.0, 0.1), (30.0, 0.05), (5.0, 1.0)])
def test_galerkin_self_entry(k, L):
    mp.mp.dps = 20
    m = mesh_from_parts(np.array([[[0.0], [L]]]), "segment")
    val = galerkin_matrix(KernelSpec.helmholtz(2, k), m)[0, 0]
    # int int Phi(|x - y|) = 2 int_0^L (L - s) Phi(s) ds
    re = mp.quad(lambda s: (L - s) * (-mp.bessely(0, k * s) / 4), [0, L])
    im = mp.quad(lambda s: (L - s) * (mp.besselj(0, k * s) / 4), [0, L])
    ref = 2 * complex(re, im)
    assert abs(val - ref) <= 1e-6 * abs(ref)
    if k * L <= 0.1:
        gamma = float(mp.euler)
        small = L * L / (2 * math.pi) * (1.5 - math.log(k * L / 2) - gamma)
        assert val.real == pytest.approx(small, rel=1e-2)


def test_galerkin_errors():
    m = mesh_per_component(generate_prefractal("cantor_dust", {"alpha": 1 / 3}, 1), 1)
    with pytest.raises(AssemblyError):
        assemble_galerkin_2d(m, IncidentWave(1.0, (0.0, 0.0, -1.0)))
    with pytest.raises(AssemblyError):
        assemble_collocation(m, IncidentWave(1.0, CANTOR_DIR))
    with pytest.raises(AssemblyError):
        galerkin_matrix(KernelSpec.helmholtz(2, 1.0), m)


def test_solve_identity_and_scalar():
    b = np.array([1 + 2j, -3j, 0.5])
    assert np.allclose(solve(LinearSystem(np.eye(3, dtype=complex), b)), b)
    u = solve(LinearSystem(np.array([[2 - 1j]]), np.array([4 + 0j])))
    assert u[0] == pytest.approx(4 / (2 - 1j), rel=1e-15)


def test_solve_diagonally_dominant():
    rng = np.random.default_rng(7)
    a = rng.normal(size=(100, 100)) + 1j * rng.normal(size=(100, 100))
    a += np.diag(np.abs(a).sum(axis=1) + 1)
    sys = LinearSystem(a, rng.normal(size=100) + 1j * rng.normal(size=100))
    assert residual(sys, solve(sys)) <= 1e-12


def test_solve_singular_and_limit():
    a = np.ones((3, 3), dtype=complex)
    with pytest.raises(SolverError, match="condition"):
        solve(LinearSystem(a, np.ones(3, dtype=complex)))
    with pytest.raises(SolverError):
        solve(LinearSystem(np.eye(5, dtype=complex), np.ones(5, dtype=complex)), dense_limit=4)


def test_linear_system_shape():
    with pytest.raises(ValueError):
        LinearSystem(np.eye(3), np.ones(2))


def test_dump_and_load(tmp_path):
    m = cantor_mesh(3)
    sys = assemble_collocation(m, IncidentWave(10.0, CANTOR_DIR))
    path = tmp_path / "system.bin"
    dump_system(sys, path)
    assert os.path.getsize(path) == 8 + 16 * 64 + 16 * 8
    raw = path.read_bytes()
    assert int.from_bytes(raw[:8], "little") == 8
    back = load_system(path)
    assert np.array_equal(back.matrix, sys.matrix) and np.array_equal(back.rhs, sys.rhs)


def test_refinement_stability():
    wave = IncidentWave(30.0, CANTOR_DIR)
    norms = []
    for n0 in (1, 2):
        m = cantor_mesh(6, n0)
        d = Density(m, solve(assemble_collocation(m, wave)), 30.0)
        norms.append(farfield_norm(far_field(d)))
    assert abs(norms[1] - norms[0]) < 0.02 * norms[1]


@pytest.mark.parametrize("build", [
    lambda: cantor_mesh(3, 2),
    lambda: mesh_per_component(generate_prefractal("cantor_dust", {"alpha": 1 / 3}, 2), 1),
    lambda: mesh_grouped(generate_prefractal("sierpinski", {}, 3), 2),
    lambda: uniform_lattice_mesh(generate_snowflake(math.pi / 6, "inner", 1), "1/9"),
    lambda: uniform_lattice_mesh(generate_snowflake(math.pi / 6, "outer", 0), math.sqrt(3) / 9),
])
def test_modified_gram_positive_definite(build):
    m = build()
    b = galerkin_matrix(KernelSpec.modified(m.ambient_dimension, 1.0), m)
    herm = 0.5 * (b + b.conj().T)
    assert np.min(np.linalg.eigvalsh(herm)) > 0
    assert np.allclose(b.imag, 0)
