"""Independent reference values used by the validation suite and the tests.

Energy-norm oracles integrate the Fourier form of the norm directly.
Diagonal oracles integrate the kernel over an element with a brute-force
tensor Gauss rule in polar coordinates centred at the collocation point,
where the Jacobian ``r`` cancels the ``1/r`` singularity.
"""

from __future__ import annotations

import math

import numpy as np
from scipy import integrate, special

from .kernels import KernelSpec, _kernel_values
from .quadrature import gauss_legendre

_TAIL = 50.0


def segment_energy_oracle(h: float, kappa: float = 1.0) -> float:
    """Norm of the indicator of an interval of length ``h``:
    ``sqrt(2 int_0^inf (kappa^2 + x^2)^(-1/2) (1 - cos(h x)) / (pi x^2) dx)``.
    """
    def weight(x):
        return 1.0 / (math.sqrt(kappa * kappa + x * x) * math.pi * x * x)

    def full(x):
        if x < 1e-6:
            return 0.5 * h * h / (math.pi * math.sqrt(kappa * kappa + x * x))
        return (1.0 - math.cos(h * x)) * weight(x)

    cut = _TAIL / h
    head = integrate.quad(full, 0.0, cut, limit=1000, epsabs=1e-15, epsrel=1e-13)[0]
    plain = integrate.quad(weight, cut, np.inf, epsabs=1e-15, epsrel=1e-13)[0]
    osc = integrate.quad(weight, cut, np.inf, weight="cos", wvar=h, limlst=200)[0]
    return math.sqrt(2.0 * (head + plain - osc))


def _square_profile(a: float) -> float:
    """``int_R exp(-a x^2) (1 - cos x) / x^2 dx`` in closed form."""
    return (math.pi * special.erf(1.0 / (2.0 * math.sqrt(a)))
            - 2.0 * math.sqrt(math.pi * a) * (1.0 - math.exp(-1.0 / (4.0 * a))))


def square_energy_oracle(kappa: float = 1.0) -> float:
    """Norm of the indicator of the unit square.

    Uses ``(kappa^2 + |x|^2)^(-1/2) = (2/sqrt(pi)) int_0^inf exp(-t^2 (kappa^2 + |x|^2)) dt``
    so the 2D Fourier integral separates into squares of a 1D profile.
    """
    def g(t):
        return _square_profile(t * t) / math.pi if t > 0 else 1.0

    val = integrate.quad(lambda t: math.exp(-(kappa * t) ** 2) * g(t) ** 2, 0.0, np.inf,
                         epsabs=1e-15, epsrel=1e-13, limit=500)[0]
    return math.sqrt(2.0 / math.sqrt(math.pi) * val)


def polar_diagonal(spec: KernelSpec, kind: str, side: float, order: int = 48) -> complex:
    """Self-integral over a square or equilateral triangle about its centroid.

    Each edge subtends a sector; ``theta`` and ``r`` use Gauss rules of
    ``order`` points and the integrand ``Phi(r) r`` is smooth.
    """
    if spec.ambient_dimension != 3:
        raise ValueError("polar diagonal oracle is for 2D elements")
    if kind == "square":
        sectors, apothem = 4, side / 2.0
    elif kind == "triangle":
        sectors, apothem = 3, side / (2.0 * math.sqrt(3.0))
    else:
        raise ValueError("kind must be 'square' or 'triangle'")
    half = math.pi / sectors
    rule = gauss_legendre(order)
    theta = half * rule.nodes
    w_theta = half * rule.weights
    total = 0.0
    for th, wt in zip(theta, w_theta):
        reach = apothem / math.cos(th)
        r = 0.5 * reach * (rule.nodes + 1.0)
        wr = 0.5 * reach * rule.weights
        total = total + wt * np.sum(wr * r * _kernel_values(spec, r))
    return complex(sectors * total)


def square_static_limit(side: float) -> float:
    """Laplace self-integral of a square: ``(L / pi) ln(1 + sqrt 2)``."""
    return side / math.pi * math.log(1.0 + math.sqrt(2.0))


def triangle_static_limit(side: float) -> float:
    """Laplace self-integral of an equilateral triangle about its centroid."""
    return 3.0 * side / (8.0 * math.sqrt(3.0) * math.pi) * 2.0 * math.log(2.0 + math.sqrt(3.0))
