"""Nearest-neighbour random walks on Z^d.

The Green function is evaluated through the Laplace-transform form of the
exponential generating function: G(z) = int_0^inf e^-s prod_j I0(c_j z s) ds
with c_j = 2 beta_j sqrt(p_j (1-p_j)), where I0 is the modified Bessel
function.  Written with scaled Bessel factors the integrand decays like
exp(-(1 - z/rho) s) away from the convergence radius rho and algebraically
like s^(-d/2) at it, so a finite panel plus an inverse-substitution tail
integrates it accurately everywhere on [0, rho].  Derivatives in z go through
the integral sign; they stay convergent at z = rho as long as d - 2*deriv >= 3.

The exact return-probability series comes from a separate per-axis dynamic
programme in probability space (no factorials, no cancellation), which doubles
as an independent oracle for the integral representation.
"""

from __future__ import annotations

import math

import numpy as np
from scipy import integrate, special

from .errors import OutOfDomain
from .series import PowerSeries

_PANEL_END = 60.0
_QUAD_OPTS = dict(limit=300, epsabs=1e-13, epsrel=1e-12)


def axis_coupling(beta, p) -> np.ndarray:
    """Per-axis constants c_j = 2 beta_j sqrt(p_j (1-p_j))."""
    beta = np.asarray(beta, dtype=float)
    p = np.asarray(p, dtype=float)
    return 2.0 * beta * np.sqrt(p * (1.0 - p))


def spectral_radius(beta, p) -> float:
    """Spectral radius sum_j beta_j sqrt(4 p_j (1-p_j)) of the walk."""
    return float(np.sum(axis_coupling(beta, p)))


def convergence_radius(beta, p) -> float:
    """Radius of convergence of the return series (reciprocal spectral radius)."""
    return 1.0 / spectral_radius(beta, p)


_IVE_ASYM = 1e8  # scipy.special.ive returns NaN beyond ~2e9; switch earlier


def _ive(nu: int, x):
    """Scaled Bessel I_nu(x) e^-x, patched with asymptotics at huge arguments."""
    x = np.asarray(x, dtype=float)
    small = special.ive(nu, np.minimum(x, _IVE_ASYM))
    with np.errstate(divide="ignore"):
        inv = 1.0 / np.maximum(x, _IVE_ASYM)
    if nu == 0:
        series = 1.0 + inv * (0.125 + inv * (9.0 / 128.0))
    else:
        series = 1.0 - inv * (0.375 + inv * (15.0 / 128.0))
    big = series / np.sqrt(2.0 * math.pi * np.maximum(x, _IVE_ASYM))
    return np.where(x > _IVE_ASYM, big, small)


def _integrand(c, z, u, deriv):
    """Scalar integrand s -> e^{-s} d^deriv/dz^deriv prod_j I0(c_j z s), scaled."""

    def f(s):
        if not s < math.inf:
            return 0.0
        damp = math.exp(-s * (1.0 - u))
        if damp == 0.0:
            return 0.0
        x = c * z * s
        iv0 = _ive(0, x)
        if deriv == 0:
            return damp * np.prod(iv0)
        iv1 = _ive(1, x)
        ratio = iv1 / iv0
        prod0 = np.prod(iv0)
        if deriv == 1:
            return damp * s * prod0 * float(np.dot(c, ratio))
        # second derivative: I1'(x) = I0(x) - I1(x)/x, with the x -> 0 limit 1/2
        with np.errstate(invalid="ignore", divide="ignore"):
            i1p = np.where(x < 1e-8, 0.5, iv0 - iv1 / np.where(x == 0.0, 1.0, x))
        a = c * ratio
        diag = float(np.dot(c * c, i1p / iv0))
        cross = float(np.sum(a)) ** 2 - float(np.dot(a, a))
        return damp * s * s * prod0 * (diag + cross)

    return f


def green(beta, p, z: float, deriv: int = 0) -> float:
    """G^(deriv)(z) for the lattice walk; math.inf where the integral diverges.

    Valid for 0 <= z <= radius and deriv in {0, 1, 2}.
    """
    if deriv not in (0, 1, 2):
        raise OutOfDomain(f"deriv must be 0, 1 or 2, got {deriv}")
    c = axis_coupling(beta, p)
    rho = 1.0 / float(np.sum(c))
    if z < 0.0 or z > rho * (1.0 + 1e-12):
        raise OutOfDomain(f"z={z} outside [0, {rho}]")
    z = min(z, rho)
    d = len(c)
    at_radius = z >= rho * (1.0 - 1e-13)
    if at_radius and d - 2 * deriv <= 2:
        return math.inf
    if z == 0.0:
        return (1.0, 0.0, float(np.dot(c, c)))[deriv]
    u = z * float(np.sum(c))
    f = _integrand(c, z, u, deriv)
    head, _ = integrate.quad(f, 0.0, _PANEL_END, **_QUAD_OPTS)
    s0 = _PANEL_END

    def tail_f(v):
        return f(s0 / v) * s0 / (v * v) if v > 0.0 else 0.0

    tail, _ = integrate.quad(tail_f, 0.0, 1.0, **_QUAD_OPTS)
    return head + tail


def _axis_return_probs(p: float, order: int) -> np.ndarray:
    """Return probabilities of the +-1 walk with up-probability p, n = 0..order."""
    out = np.zeros(order + 1)
    out[0] = 1.0
    q = 4.0 * p * (1.0 - p)
    val = 1.0  # C(2m, m) 4^-m (4 p (1-p))^m, built multiplicatively
    for m in range(1, order // 2 + 1):
        val *= q * (2 * m - 1) / (2 * m)
        out[2 * m] = val
    return out


def return_series(beta, p, order: int) -> PowerSeries:
    """Exact return-probability series of the d-dimensional walk.

    Axes are merged one at a time: conditioning on how many of the n steps
    fall on the new axis gives a binomial mixture of the two return laws.
    Everything stays a probability, so there is no cancellation or overflow.
    """
    beta = np.asarray(beta, dtype=float)
    p = np.asarray(p, dtype=float)
    acc = _axis_return_probs(float(p[0]), order)
    wsum = float(beta[0])
    for j in range(1, len(beta)):
        axis = _axis_return_probs(float(p[j]), order)
        b = float(beta[j]) / (wsum + float(beta[j]))
        nxt = np.zeros(order + 1)
        nxt[0] = 1.0
        log_b, log_nb = math.log(b), math.log1p(-b)
        for n in range(2, order + 1, 2):
            k = np.arange(0, n + 1, 2)
            logpmf = (
                special.gammaln(n + 1)
                - special.gammaln(k + 1)
                - special.gammaln(n - k + 1)
                + k * log_b
                + (n - k) * log_nb
            )
            nxt[n] = float(np.dot(np.exp(logpmf) * axis[k], acc[n - k]))
        acc = nxt
        wsum += float(beta[j])
    return PowerSeries(acc)
