import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fractalbem.kernels import KernelSpec, eval_kernel
from fractalbem.meshing import mesh_from_parts, subdivide_parts
from fractalbem.oracles import polar_diagonal, square_static_limit, triangle_static_limit
from fractalbem.quadrature import (
    diagonal_entry,
    element_integral,
    gauss_legendre,
    graded_square_rule,
    map_rule,
    points_per_element,
    policy_order,
    single_layer_matrix,
    square_rule,
    triangle_collapsed_gauss,
    triangle_rule_7pt,
)

SQUARE = np.array([[[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]])
TRIANGLE = np.array([[[0.0, 0.0], [1.0, 0.0], [0.5, math.sqrt(3) / 2]]])


def test_gauss_closed_forms():
    r1 = gauss_legendre(1)
    assert r1.nodes.tolist() == [0.0] and r1.weights.tolist() == [2.0]
    r2 = gauss_legendre(2)
    assert np.allclose(r2.nodes, [-1 / math.sqrt(3), 1 / math.sqrt(3)], atol=1e-15)
    assert np.allclose(r2.weights, [1, 1], atol=1e-15)
    r3 = gauss_legendre(3)
    assert np.allclose(r3.nodes, [-math.sqrt(0.6), 0, math.sqrt(0.6)], atol=1e-15)
    assert np.allclose(r3.weights, [5 / 9, 8 / 9, 5 / 9], atol=1e-15)
    assert r3.exact_degree == 5


@pytest.mark.parametrize("n", [4, 17, 64, 100, 512])
def test_gauss_against_golub_welsch(n):
    x, w = np.polynomial.legendre.leggauss(n)
    rule = gauss_legendre(n)
    assert np.max(np.abs(rule.nodes - x)) < 1e-13
    assert np.max(np.abs(rule.weights - w)) < 1e-13
    assert rule.weights.sum() == pytest.approx(2.0, abs=1e-13)


@given(st.integers(1, 40))
def test_gauss_exact_degree(n):
    rule = gauss_legendre(n)
    for p in range(0, 2 * n, max(1, n // 3)):
        exact = 0.0 if p % 2 else 2.0 / (p + 1)
        assert np.sum(rule.weights * rule.nodes ** p) == pytest.approx(exact, abs=1e-13)


@pytest.mark.parametrize("n", [0, 513, -2])
def test_gauss_range(n):
    with pytest.raises(ValueError):
        gauss_legendre(n)


def test_reference_measures():
    assert square_rule(5).weights.sum() == pytest.approx(1.0, abs=1e-14)
    assert triangle_collapsed_gauss(6).weights.sum() == pytest.approx(0.5, abs=1e-14)
    assert triangle_rule_7pt().weights.sum() == pytest.approx(0.5, abs=1e-15)
    assert graded_square_rule(8).weights.sum() == pytest.approx(1.0, abs=1e-12)


def _tri(rule, f):
    x, y = rule.nodes[:, 0], rule.nodes[:, 1]
    return float(np.sum(rule.weights * f(x, y)))


def test_seven_point_rule():
    rule = triangle_rule_7pt()
    assert rule.exact_degree == 3
    assert _tri(rule, lambda x, y: x * x * y) == pytest.approx(1 / 60, abs=1e-15)
    for a in range(4):
        for b in range(4 - a):
            exact = math.factorial(a) * math.factorial(b) / math.factorial(a + b + 2)
            assert _tri(rule, lambda x, y: x ** a * y ** b) == pytest.approx(exact, abs=1e-15)
    # degree 4 is beyond the rule; the monomial integral of x^4 is 4!/6! = 1/30
    assert abs(_tri(rule, lambda x, y: x ** 4) - 1 / 30) > 1e-3


def test_policy_examples():
    # wavelength chosen so that 20 h / lambda hits the listed ratios
    assert points_per_element(0.05, 1.0, 2) == 3
    assert points_per_element(0.25, 1.0, 3) == 25
    assert policy_order(0.21, 1.0) == 5
    assert points_per_element(0.21, 1.0, 3) == 25
    assert policy_order(1e-6, 1.0) == 3
    with pytest.raises(ValueError):
        points_per_element(0.0, 1.0, 2)


def _element(parts, kind):
    return mesh_from_parts(np.asarray(parts, float), kind).element(0)


@pytest.mark.parametrize("k,slant", [(1.0, 0.6), (10.0, 0.0)])
def test_element_integral_far_target(k, slant):
    # an oblique view needs k h small: the phase varies by k h slant across the element
    seg = _element([[[0.0], [0.1]]], "segment")
    target = np.array([0.05 + 10.0 * slant, 10.0 * math.sqrt(1 - slant ** 2)])
    val = element_integral(KernelSpec.helmholtz(2, k), seg, target)
    approx = eval_kernel(KernelSpec.helmholtz(2, k), 10.0) * 0.1
    assert abs(val - approx) <= 0.01 * abs(approx)
    sq = _element(SQUARE * 0.1, "square")
    diam = 0.1 * math.sqrt(2)
    target = np.array([0.05, 0.05, 100 * diam])
    val = element_integral(KernelSpec.helmholtz(3, k), sq, target)
    approx = eval_kernel(KernelSpec.helmholtz(3, k), 100 * diam) * 0.01
    assert abs(val - approx) <= 0.01 * abs(approx)


def test_element_integral_errors():
    seg = _element([[[0.0], [1.0]]], "segment")
    with pytest.raises(ValueError):
        element_integral(KernelSpec.helmholtz(3, 1.0), seg, np.array([0.5, 1.0, 1.0]))
    with pytest.raises(ValueError):
        element_integral(KernelSpec.helmholtz(2, 1.0), seg, np.array([0.5, 0.0]))
    flat = _element([[[0.0], [0.0]]], "segment")
    with pytest.raises(ValueError):
        element_integral(KernelSpec.helmholtz(2, 1.0), flat, np.array([0.5, 1.0]))


def test_element_integral_gauss_rate():
    spec = KernelSpec.helmholtz(3, 4.0)
    target = np.array([[0.5, 0.5, 1.5]])
    ref = single_layer_matrix(spec, SQUARE, "square", target, q=40, near_factor=0.0)[0, 0]
    e3 = abs(single_layer_matrix(spec, SQUARE, "square", target, q=3, near_factor=0.0)[0, 0] - ref)
    e6 = abs(single_layer_matrix(spec, SQUARE, "square", target, q=6, near_factor=0.0)[0, 0] - ref)
    assert e6 <= e3 / 10


@pytest.mark.parametrize("kind,parts", [("square", SQUARE), ("triangle", TRIANGLE)])
@pytest.mark.parametrize("offset", [(0.3, 0.2, 0.05), (1.2, 0.4, 0.0), (0.5, 0.3, 0.4)])
def test_near_rule_matches_refined_product_rule(kind, parts, offset):
    spec = KernelSpec.helmholtz(3, 2.0)
    target = np.array([offset])
    near = single_layer_matrix(spec, parts, kind, target)[0, 0]
    # refine the cell heavily so the product rule is accurate away from the target
    fine = subdivide_parts(parts, kind, 64)
    rule = square_rule(8) if kind == "square" else triangle_collapsed_gauss(8)
    pts, w = map_rule(fine, kind, rule)
    r = np.sqrt(((pts - target[0, :2]) ** 2).sum(-1) + target[0, 2] ** 2)
    brute = np.sum(w * np.exp(1j * 2.0 * r) / (4 * np.pi * r))
    assert abs(near - brute) <= 2e-4 * abs(brute)


@pytest.mark.parametrize("kl", [0.1, 1.0, 5.0])
@pytest.mark.parametrize("kind", ["square", "triangle"])
def test_diagonal_against_polar_quadrature(kl, kind):
    spec = KernelSpec.helmholtz(3, kl)
    ref = polar_diagonal(spec, kind, 1.0)
    assert abs(diagonal_entry(spec, kind, 1.0) - ref) <= 1e-6 * abs(ref)


def test_static_limits():
    assert square_static_limit(1.0) == pytest.approx(0.280549, abs=1e-6)
    assert triangle_static_limit(1.0) == pytest.approx(0.1815192, abs=1e-7)
    spec = KernelSpec.helmholtz(3, 1e-3)
    sq = diagonal_entry(spec, "square", 1.0)
    tr = diagonal_entry(spec, "triangle", 1.0)
    assert abs(sq - square_static_limit(1.0)) <= 1e-3 * square_static_limit(1.0)
    assert abs(tr - triangle_static_limit(1.0)) <= 1e-3 * triangle_static_limit(1.0)


def test_static_limit_scales_with_side():
    spec = KernelSpec.helmholtz(3, 1e-4)
    assert diagonal_entry(spec, "square", 0.5) == pytest.approx(0.5 * diagonal_entry(spec, "square", 1.0),
                                                                rel=1e-4)


@given(st.sampled_from(["square", "triangle"]), st.floats(0.01, 30.0))
def test_modified_diagonal_real_positive(kind, kappa_l):
    v = diagonal_entry(KernelSpec.modified(3, kappa_l), kind, 1.0)
    assert isinstance(v, float) and v > 0


@pytest.mark.parametrize("kind", ["square", "triangle"])
def test_helmholtz_diagonal_positive_real_part(kind):
    for kl in (1e-3, 0.1, 0.5):
        assert diagonal_entry(KernelSpec.helmholtz(3, kl), kind, 1.0).real > 0


def test_segment_diagonal_oracle():
    k, L = 30.0, 0.01
    mp.mp.dps = 25
    half = mp.mpf(L) / 2
    re = mp.quad(lambda t: -mp.bessely(0, k * t) / 4, [0, half])
    im = mp.quad(lambda t: mp.besselj(0, k * t) / 4, [0, half])
    ref = 2 * complex(re, im)
    val = diagonal_entry(KernelSpec.helmholtz(2, k), "segment", L)
    assert abs(val - ref) <= 1e-8 * abs(ref)


def test_modified_segment_diagonal_oracle():
    kappa, L = 2.0, 0.3
    ref = 2 * float(mp.quad(lambda t: mp.besselk(0, kappa * t) / (2 * mp.pi), [0, L / 2]))
    val = diagonal_entry(KernelSpec.modified(2, kappa), "segment", L)
    assert isinstance(val, float)
    assert abs(val - ref) <= 1e-10 * ref


def test_diagonal_errors():
    with pytest.raises(ValueError):
        diagonal_entry(KernelSpec.helmholtz(3, 1.0), "square", 0.0)
    with pytest.raises(ValueError):
        diagonal_entry(KernelSpec.helmholtz(3, 1.0), "cell_group", 1.0)
    with pytest.raises(ValueError):
        diagonal_entry(KernelSpec.helmholtz(2, 1.0), "square", 1.0)
    with pytest.raises(ValueError):
        diagonal_entry(KernelSpec.helmholtz(3, 1.0), "segment", 1.0)


def test_dimension_mismatch_in_matrix():
    with pytest.raises(ValueError):
        single_layer_matrix(KernelSpec.helmholtz(2, 1.0), SQUARE, "square", np.zeros((1, 3)))
