"""Fundamental solutions of the Helmholtz and modified Helmholtz equations.

The zeroth-order Bessel functions J0, Y0 and K0 are computed in-house:

* J0 / Y0: ascending power series for ``x <= 13`` and the Hankel asymptotic
  expansion (optimally truncated) above.  The crossover keeps both branches
  below ~1e-11 absolute error.
* K0: ascending series for ``x <= 2``; above, the trapezoidal rule applied to
  ``K0(x) = int_0^inf exp(-x cosh t) dt``, which converges geometrically.

All functions are vectorised over numpy arrays and pure.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

EULER_GAMMA = 0.57721566490153286061

_SERIES_MAX = 13.0
_SERIES_TERMS = 40
_ASYMP_TERMS = 26
_K0_SERIES_MAX = 2.0
_K0_SERIES_TERMS = 20
_K0_TRAP_STEP = 0.1
_K0_TRAP_NODES = 70

# Harmonic numbers H_k, k = 0.._SERIES_TERMS
_HARMONIC = np.concatenate([[0.0], np.cumsum(1.0 / np.arange(1, _SERIES_TERMS + 1))])


def _series_parts(x: np.ndarray):
    """Return (J0, S) with Y0 = (2/pi) * ((ln(x/2) + gamma) * J0 + S)."""
    q = -0.25 * x * x
    term = np.ones_like(x)
    j0 = np.ones_like(x)
    s = np.zeros_like(x)
    for k in range(1, _SERIES_TERMS + 1):
        term = term * q / (k * k)
        j0 = j0 + term
        s = s - _HARMONIC[k] * term
    return j0, s


def _modified_series_parts(x: np.ndarray):
    """Return (I0, T) with K0 = -(ln(x/2) + gamma) * I0 + T."""
    q = 0.25 * x * x
    term = np.ones_like(x)
    i0 = np.ones_like(x)
    t = np.zeros_like(x)
    for k in range(1, _K0_SERIES_TERMS + 1):
        term = term * q / (k * k)
        i0 = i0 + term
        t = t + _HARMONIC[k] * term
    return i0, t


def _hankel_asymptotic(x: np.ndarray):
    inv8x = 1.0 / (8.0 * x)
    b = np.ones_like(x)
    p = np.ones_like(x)
    q = np.zeros_like(x)
    for m in range(1, _ASYMP_TERMS):
        b = b * (2 * m - 1) ** 2 / m * inv8x
        if m % 2 == 0:
            p = p + (-1) ** (m // 2) * b
        else:
            q = q + (-1) ** ((m + 1) // 2) * b
    chi = x - 0.25 * np.pi
    amp = np.sqrt(2.0 / (np.pi * x))
    c, s = np.cos(chi), np.sin(chi)
    return amp * (p * c - q * s), amp * (p * s + q * c)


def bessel_j0_y0(x):
    """Bessel functions of the first and second kind of order zero.

    Parameters
    ----------
    x : float or array_like
        Non-negative arguments.  ``Y0`` requires ``x > 0``.

    Returns
    -------
    (J0(x), Y0(x)) : tuple of ndarray (or floats for scalar input)
        ``Y0(0)`` is ``-inf``.
    """
    xa = np.asarray(x, dtype=float)
    if np.any(xa < 0) or np.any(np.isnan(xa)):
        raise ValueError("bessel_j0_y0 requires non-negative arguments")
    flat = np.atleast_1d(xa).ravel()
    j0 = np.empty_like(flat)
    y0 = np.empty_like(flat)
    small = flat <= _SERIES_MAX
    if np.any(small):
        xs = flat[small]
        js, s = _series_parts(xs)
        with np.errstate(divide="ignore"):
            ys = (2.0 / np.pi) * ((np.log(0.5 * xs) + EULER_GAMMA) * js + s)
        j0[small], y0[small] = js, ys
    if np.any(~small):
        j0[~small], y0[~small] = _hankel_asymptotic(flat[~small])
    j0 = j0.reshape(xa.shape)
    y0 = y0.reshape(xa.shape)
    if xa.ndim == 0:
        return float(j0), float(y0)
    return j0, y0


def bessel_k0(x):
    """Modified Bessel function of the second kind ``K0(x)`` for ``x > 0``."""
    xa = np.asarray(x, dtype=float)
    if np.any(~(xa > 0)):
        raise ValueError("bessel_k0 requires strictly positive arguments")
    flat = np.atleast_1d(xa).ravel()
    out = np.empty_like(flat)
    small = flat <= _K0_SERIES_MAX
    if np.any(small):
        xs = flat[small]
        i0, t = _modified_series_parts(xs)
        out[small] = -(np.log(0.5 * xs) + EULER_GAMMA) * i0 + t
    if np.any(~small):
        xl = flat[~small][:, None]
        nodes = _K0_TRAP_STEP * np.arange(_K0_TRAP_NODES)
        w = np.full(_K0_TRAP_NODES, _K0_TRAP_STEP)
        w[0] *= 0.5
        with np.errstate(under="ignore"):
            out[~small] = np.exp(-xl * np.cosh(nodes)[None, :]) @ w
    out = out.reshape(xa.shape)
    return float(out) if xa.ndim == 0 else out


@dataclass(frozen=True)
class KernelSpec:
    """Which fundamental solution to use.

    ``mode='helmholtz'`` uses wavenumber ``k`` (``exp(ikr)`` radiating
    solutions); ``mode='modified'`` uses decay ``kappa`` for
    ``Delta u - kappa^2 u = 0``.
    """

    ambient_dimension: int
    mode: str = "helmholtz"
    k: float | None = None
    kappa: float | None = None

    def __post_init__(self):
        if self.ambient_dimension not in (2, 3):
            raise ValueError("ambient_dimension must be 2 or 3")
        if self.mode == "helmholtz":
            if self.k is None or not self.k > 0:
                raise ValueError("helmholtz kernel needs k > 0")
        elif self.mode == "modified":
            if self.kappa is None or not self.kappa > 0:
                raise ValueError("modified kernel needs kappa > 0")
        else:
            raise ValueError(f"unknown kernel mode {self.mode!r}")

    @property
    def scale(self) -> float:
        return self.k if self.mode == "helmholtz" else self.kappa

    @property
    def is_real(self) -> bool:
        return self.mode == "modified"

    @property
    def dtype(self):
        return np.float64 if self.is_real else np.complex128

    @classmethod
    def helmholtz(cls, n: int, k: float) -> "KernelSpec":
        return cls(n, "helmholtz", k=k)

    @classmethod
    def modified(cls, n: int, kappa: float) -> "KernelSpec":
        return cls(n, "modified", kappa=kappa)


def _kernel_values(spec: KernelSpec, r: np.ndarray) -> np.ndarray:
    if spec.ambient_dimension == 3:
        if spec.mode == "helmholtz":
            return np.exp(1j * spec.k * r) / (4.0 * np.pi * r)
        with np.errstate(under="ignore"):
            return np.exp(-spec.kappa * r) / (4.0 * np.pi * r)
    if spec.mode == "helmholtz":
        j0, y0 = bessel_j0_y0(spec.k * r)
        return 0.25j * (j0 + 1j * y0)
    return bessel_k0(spec.kappa * r) / (2.0 * np.pi)


def eval_kernel(spec: KernelSpec, r):
    """Fundamental solution ``Phi(r)`` at distance ``r > 0``.

    helmholtz, n=3: ``exp(ikr)/(4 pi r)``; n=2: ``(i/4) H0^(1)(kr)``.
    modified, n=3: ``exp(-kappa r)/(4 pi r)``; n=2: ``K0(kappa r)/(2 pi)``.
    """
    ra = np.asarray(r, dtype=float)
    if np.any(~(ra > 0)):
        raise ValueError("kernel is singular at r <= 0")
    out = _kernel_values(spec, ra)
    return np.asarray(out).item() if ra.ndim == 0 else out


def eval_kernel_smooth_2d(spec: KernelSpec, r):
    """``Phi(r) + ln(r)/(2 pi)`` for a 2D kernel, continuous up to ``r = 0``.

    This is the part of the 2D fundamental solution left after removing its
    logarithmic singularity; it behaves like ``r^2 ln r`` near the origin.
    """
    if spec.ambient_dimension != 2:
        raise ValueError("smooth remainder is defined for 2D kernels only")
    ra = np.asarray(r, dtype=float)
    if np.any(ra < 0):
        raise ValueError("negative distance")
    flat = np.atleast_1d(ra).ravel()
    x = spec.scale * flat
    out = np.empty(flat.shape, dtype=spec.dtype)
    limit = _SERIES_MAX if spec.mode == "helmholtz" else _K0_SERIES_MAX
    small = x <= limit
    if np.any(small):
        xs, rs = x[small], flat[small]
        with np.errstate(divide="ignore", invalid="ignore"):
            logr = np.where(rs > 0, np.log(rs), 0.0)
        c = np.log(0.5 * spec.scale) + EULER_GAMMA
        if spec.mode == "helmholtz":
            j0, s = _series_parts(xs)
            out[small] = 0.25j * j0 - (c * j0 + logr * (j0 - 1.0) + s) / (2.0 * np.pi)
        else:
            i0, t = _modified_series_parts(xs)
            out[small] = (-c * i0 - logr * (i0 - 1.0) + t) / (2.0 * np.pi)
    if np.any(~small):
        rl = flat[~small]
        out[~small] = _kernel_values(spec, rl) + np.log(rl) / (2.0 * np.pi)
    out = out.reshape(ra.shape)
    return out.item() if ra.ndim == 0 else out
