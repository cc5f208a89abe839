import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fractalbem.bem import Density, IncidentWave, assemble_collocation, solve
from fractalbem.fields import FarFieldPattern, FieldGrid, box_grid, far_field, far_field_grid
from fractalbem.geometry import generate_prefractal
from fractalbem.meshing import mesh_from_parts, mesh_per_component
from fractalbem.norms import (
    EnergyForm,
    NormAccuracyError,
    density_difference,
    energy_norm,
    farfield_norm,
    merge_segments,
    near_field_norm,
    norm_equivalence_check,
)
from fractalbem.oracles import segment_energy_oracle, square_energy_oracle

CANTOR_DIR = (0.5, -math.sqrt(3) / 2)


def cantor_solution(j, k=10.0, n0=1):
    m = mesh_per_component(generate_prefractal("cantor_set", {"alpha": 1 / 3}, j), n0)
    return Density(m, solve(assemble_collocation(m, IncidentWave(k, CANTOR_DIR))), k)


def test_constant_field_norms():
    g2 = box_grid(2, 40)
    assert near_field_norm(FieldGrid(g2.points, g2.weights, g2.shapes, np.ones(g2.size))) == \
        pytest.approx(3.0, rel=1e-12)
    g3 = box_grid(3, 20)
    assert near_field_norm(FieldGrid(g3.points, g3.weights, g3.shapes, np.ones(g3.size))) == \
        pytest.approx(math.sqrt(21.0), rel=1e-12)
    for n, total in ((2, 2 * math.pi), (3, 4 * math.pi)):
        pat = far_field_grid(n)
        ones = FarFieldPattern(pat.directions, pat.weights, pat.angles, np.ones(len(pat.weights)))
        assert farfield_norm(ones) == pytest.approx(math.sqrt(total), rel=1e-13)


def test_norms_require_samples():
    with pytest.raises(ValueError):
        near_field_norm(box_grid(2, 4))
    with pytest.raises(ValueError):
        farfield_norm(far_field_grid(2, n_circle=8))


@pytest.mark.parametrize("h", [0.1, 0.5])
def test_segment_energy_against_fourier_oracle(h):
    m = mesh_from_parts(np.array([[[0.0], [h]]]), "segment")
    val = energy_norm(Density(m, np.ones(1), 1.0))
    ref = segment_energy_oracle(h)
    assert abs(val - ref) <= 1e-3 * ref


def test_square_energy_against_fourier_oracle():
    m = mesh_from_parts(np.array([[[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]]), "square")
    val = energy_norm(Density(m, np.ones(1), 1.0))
    ref = square_energy_oracle()
    assert abs(val - ref) <= 1e-3 * ref


def test_split_element_gives_same_norm():
    # the indicator of [0, 0.4] measured on one element or on four
    one = mesh_from_parts(np.array([[[0.0], [0.4]]]), "segment")
    four = mesh_from_parts(np.array([[[0.1 * i], [0.1 * (i + 1)]] for i in range(4)]), "segment")
    a = energy_norm(Density(one, np.ones(1), 1.0))
    b = energy_norm(Density(four, np.ones(4), 1.0))
    assert a == pytest.approx(b, rel=1e-6)


def test_zero_density_norm():
    d = cantor_solution(2)
    assert energy_norm(Density(d.mesh, np.zeros(d.mesh.N, dtype=complex), 1.0)) == 0.0


def test_equivalence_equality_at_unit_wavenumber():
    d = cantor_solution(3, k=1.0)
    rep = norm_equivalence_check(d, 1.0)
    assert rep.holds
    assert abs(rep.norm_k - rep.norm_unit) <= 1e-8 * rep.norm_unit


@pytest.mark.parametrize("k", [30.0, 100.0])
def test_equivalence_inequality(k):
    d = cantor_solution(4, k=k, n0=2)
    rep = norm_equivalence_check(d, k)
    assert rep.holds
    assert rep.lower <= rep.norm_k <= rep.upper
    assert rep.norm_k < rep.norm_unit


def test_equivalence_for_random_vectors():
    m = mesh_per_component(generate_prefractal("cantor_dust", {"alpha": 1 / 3}, 2), 1)
    rng = np.random.default_rng(11)
    forms = {k: EnergyForm(m, k) for k in (0.25, 1.0, 4.0, 40.0)}
    for _ in range(5):
        c = rng.normal(size=m.N) + 1j * rng.normal(size=m.N)
        d = Density(m, c, 1.0)
        for k, form in forms.items():
            assert norm_equivalence_check(d, k, forms=(forms[1.0], form)).holds


@settings(max_examples=25, deadline=None)
@given(st.lists(st.complex_numbers(max_magnitude=10, allow_nan=False, allow_infinity=False),
                min_size=8, max_size=8),
       st.lists(st.complex_numbers(max_magnitude=10, allow_nan=False, allow_infinity=False),
                min_size=8, max_size=8),
       st.complex_numbers(max_magnitude=5, allow_nan=False, allow_infinity=False))
def test_energy_norm_is_a_norm(c1, c2, scale):
    form = _CANTOR3_FORM
    a, b = np.array(c1), np.array(c2)
    na, nb = form.norm(a), form.norm(b)
    assert form.norm(scale * a) == pytest.approx(abs(scale) * na, rel=1e-9, abs=1e-12)
    assert form.norm(a + b) <= na + nb + 1e-9 * (na + nb) + 1e-12


_CANTOR3_FORM = EnergyForm(mesh_per_component(generate_prefractal("cantor_set", {"alpha": 1 / 3}, 3), 1))


def test_energy_form_rejects_bad_kappa():
    with pytest.raises(ValueError):
        EnergyForm(_CANTOR3_FORM.mesh, 0.0)


def test_energy_form_detects_indefinite_gram(monkeypatch):
    import fractalbem.norms as norms

    monkeypatch.setattr(norms, "galerkin_matrix", lambda spec, mesh: -np.eye(mesh.N))
    with pytest.raises(NormAccuracyError):
        EnergyForm(_CANTOR3_FORM.mesh, 1.0)


def test_difference_of_equal_densities_is_zero():
    d = cantor_solution(3)
    res = density_difference(d, d)
    assert res.absolute == 0.0 and res.relative == 0.0


def test_difference_is_symmetric():
    a, b = cantor_solution(3), cantor_solution(4)
    ab = density_difference(a, b).absolute
    ba = density_difference(b, a).absolute
    assert ab == pytest.approx(ba, rel=1e-12)


def test_segment_overlay():
    one = mesh_from_parts(np.array([[[0.0], [0.5]]]), "segment")
    two = mesh_from_parts(np.array([[[0.25], [0.5]], [[0.75], [1.0]]]), "segment")
    merged, a, b = merge_segments(Density(one, np.array([2.0]), 1.0),
                                  Density(two, np.array([3.0, 5.0]), 1.0))
    assert np.allclose(merged.parts[:, :, 0], [[0.0, 0.25], [0.25, 0.5], [0.75, 1.0]])
    assert np.allclose(a, [2, 2, 0]) and np.allclose(b, [0, 3, 5])


def test_nested_cantor_differences_decay():
    ds = [cantor_solution(j, k=10.0, n0=2) for j in (2, 3, 4, 5)]
    ref = ds[-1]
    diffs = [density_difference(ref, d).relative for d in ds[:-1]]
    assert all(b < a for a, b in zip(diffs, diffs[1:]))


def test_far_field_grid_doubling():
    d = cantor_solution(4)
    coarse = farfield_norm(far_field(d, far_field_grid(2, n_circle=256)))
    fine = farfield_norm(far_field(d, far_field_grid(2, n_circle=512)))
    assert abs(fine - coarse) <= 1e-8 * fine
    m = mesh_per_component(generate_prefractal("cantor_dust", {"alpha": 1 / 3}, 2), 1)
    d3 = Density(m, solve(assemble_collocation(m, IncidentWave(8.0, (0.0, 0.6, -0.8)))), 8.0)
    coarse = farfield_norm(far_field(d3, far_field_grid(3, n_theta=64, n_phi=128)))
    fine = farfield_norm(far_field(d3, far_field_grid(3, n_theta=128, n_phi=256)))
    assert abs(fine - coarse) <= 1e-8 * fine
