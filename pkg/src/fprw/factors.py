"""Per-factor walk analytics: Green values and derivatives, radius, theta,
first-visit transforms, period, and the leading singularity descriptor.

Four factor kinds are supported: nearest-neighbour lattice walks on Z^d,
group-invariant walks on a finite group, the uniform walk on the free product
of q copies of Z/2Z (whose Cayley graph is the q-regular tree), and a
user-supplied explicit return series with asserted radius metadata.

All evaluations are pure; a GreenAnalytics object is immutable after
construction and safe to share across threads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Optional, Union

import numpy as np
from scipy.optimize import brentq

from . import lattice
from .errors import ConfigError, NeedsDerivative, OutOfDomain, RootNotBracketed
from .series import PowerSeries, series_reciprocal

DEFAULT_ORDER = 512

# relative tolerances: root solves, at-the-radius snapping for Psi (the
# continuous limit replaces near-divergent quadrature inside the band)
_ROOT_RTOL = 1e-13
_EDGE_RTOL = 1e-8


# ---------------------------------------------------------------------------
# factor descriptions


@dataclass(frozen=True)
class LatticeNN:
    """Nearest-neighbour walk on Z^d: axis weights beta_j, up-probabilities p_j."""

    beta: tuple
    p: tuple

    def __post_init__(self):
        beta = tuple(float(b) for b in self.beta)
        p = tuple(float(x) for x in self.p)
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "p", p)
        if len(beta) != len(p) or not beta:
            raise ConfigError("beta and p must be equal-length, nonempty")
        if any(b <= 0 for b in beta) or abs(sum(beta) - 1.0) > 1e-12:
            raise ConfigError("axis weights must be positive and sum to 1")
        if any(not 0.0 < x < 1.0 for x in p):
            raise ConfigError("axis up-probabilities must lie strictly in (0,1)")

    @classmethod
    def simple(cls, d: int) -> "LatticeNN":
        return cls(beta=(1.0 / d,) * d, p=(0.5,) * d)

    @property
    def dim(self) -> int:
        return len(self.beta)

    # word-algebra hooks (elements are integer coordinate tuples)
    def identity_elem(self):
        return (0,) * self.dim

    def step_support(self):
        out = []
        for j, (b, pj) in enumerate(zip(self.beta, self.p)):
            up = tuple(1 if i == j else 0 for i in range(self.dim))
            dn = tuple(-1 if i == j else 0 for i in range(self.dim))
            out.append((up, b * pj))
            out.append((dn, b * (1.0 - pj)))
        return out

    def combine(self, a, b):
        return tuple(x + y for x, y in zip(a, b))

    def dist_to_identity(self, e) -> int:
        return sum(abs(x) for x in e)


@dataclass(frozen=True)
class FiniteGroup:
    """Group-invariant walk on a finite group given by its Cayley table.

    P[x][y] must equal mu(x^-1 y) where mu = P[id]; the table, identity and
    invariance are all validated on construction.
    """

    P: tuple
    id: int
    table: tuple

    def __post_init__(self):
        P = tuple(tuple(float(v) for v in row) for row in self.P)
        table = tuple(tuple(int(v) for v in row) for row in self.table)
        object.__setattr__(self, "P", P)
        object.__setattr__(self, "table", table)
        n = len(P)
        if n < 1 or any(len(r) != n for r in P):
            raise ConfigError("P must be square")
        if len(table) != n or any(len(r) != n for r in table):
            raise ConfigError("Cayley table must match the order of P")
        if not 0 <= self.id < n:
            raise ConfigError("identity index out of range")
        for row in P:
            if any(v < 0 for v in row) or abs(sum(row) - 1.0) > 1e-12:
                raise ConfigError("P must be row-stochastic")
        self._validate_group(n)
        self._validate_invariance(n)
        if len(self._reachable(n)) != n:
            raise ConfigError("support of the walk must generate the group")

    def _validate_group(self, n):
        t = self.table
        e = self.id
        if any(t[e][x] != x or t[x][e] != x for x in range(n)):
            raise ConfigError("identity row/column malformed in Cayley table")
        for x in range(n):
            if sorted(t[x]) != list(range(n)) or sorted(r[x] for r in t) != list(range(n)):
                raise ConfigError("Cayley table rows/columns must be permutations")
            if e not in t[x]:
                raise ConfigError("element without inverse")
        for a in range(n):
            for b in range(n):
                for c in range(n):
                    if t[t[a][b]][c] != t[a][t[b][c]]:
                        raise ConfigError("Cayley table is not associative")

    def _validate_invariance(self, n):
        inv = [0] * n
        for x in range(n):
            inv[x] = self.table[x].index(self.id)
        mu = self.P[self.id]
        for x in range(n):
            for y in range(n):
                if abs(self.P[x][y] - mu[self.table[inv[x]][y]]) > 1e-12:
                    raise ConfigError("P is not group-invariant for the given table")

    def _reachable(self, n):
        seen = {self.id}
        frontier = [self.id]
        supp = [g for g in range(n) if self.P[self.id][g] > 0.0]
        while frontier:
            x = frontier.pop()
            for s in supp:
                y = self.table[x][s]
                if y not in seen:
                    seen.add(y)
                    frontier.append(y)
        return seen

    @property
    def order(self) -> int:
        return len(self.P)

    def matrix(self) -> np.ndarray:
        return np.array(self.P, dtype=float)

    def identity_elem(self):
        return self.id

    def step_support(self):
        mu = self.P[self.id]
        return [(g, mu[g]) for g in range(self.order) if mu[g] > 0.0]

    def combine(self, a, b):
        return self.table[a][b]

    def dist_to_identity(self, e) -> int:
        return self._dists()[e]

    def _dists(self):
        # graph distance to the identity under right-multiplication steps
        n = self.order
        supp = [g for g, _ in self.step_support()]
        dist = {self.id: 0}
        frontier = [self.id]
        # backward BFS: x at distance k+1 if x*s is at distance k for some s
        while frontier:
            nxt = []
            for y in frontier:
                for x in range(n):
                    if x not in dist and any(self.table[x][s] == y for s in supp):
                        dist[x] = dist[y] + 1
                        nxt.append(x)
            frontier = nxt
        return [dist[x] for x in range(n)]


def cyclic_group(n: int, mu) -> FiniteGroup:
    """Z/nZ with step distribution mu over residues 0..n-1."""
    mu = tuple(float(v) for v in mu)
    if len(mu) != n:
        raise ConfigError("mu must list a probability per residue")
    P = tuple(tuple(mu[(y - x) % n] for y in range(n)) for x in range(n))
    table = tuple(tuple((x + y) % n for y in range(n)) for x in range(n))
    return FiniteGroup(P=P, id=0, table=table)


def flip_group() -> FiniteGroup:
    """Z/2Z with the deterministic flip step."""
    return cyclic_group(2, (0.0, 1.0))


@dataclass(frozen=True)
class HomTree:
    """Uniform walk on the free product of q copies of Z/2Z (q-regular tree)."""

    q: int

    def __post_init__(self):
        if self.q < 2:
            raise ConfigError("tree degree must be at least 2")

    def identity_elem(self):
        return ()

    def step_support(self):
        return [((g,), 1.0 / self.q) for g in range(self.q)]

    def combine(self, a, b):
        out = list(a)
        for g in b:
            if out and out[-1] == g:
                out.pop()
            else:
                out.append(g)
        return tuple(out)

    def dist_to_identity(self, e) -> int:
        return len(e)


@dataclass(frozen=True)
class ExplicitSeries:
    """Explicit return-probability series with asserted radius metadata."""

    coeffs: tuple
    radius: float
    g_at_r: float
    gprime_at_r: float
    sing: Optional[tuple]  # (q, k) of the leading singular term, if known
    period: int

    def __post_init__(self):
        coeffs = tuple(float(c) for c in self.coeffs)
        object.__setattr__(self, "coeffs", coeffs)
        if not coeffs or coeffs[0] != 1.0:
            raise ConfigError("explicit series must start with coefficient 1")
        if any(not 0.0 <= c <= 1.0 for c in coeffs):
            raise ConfigError("explicit series coefficients must be probabilities")
        if not self.radius > 0.0:
            raise ConfigError("radius must be positive")
        if math.isfinite(self.gprime_at_r) and not math.isfinite(self.g_at_r):
            raise ConfigError("finite G' at the radius needs finite G")
        if self.g_at_r < 1.0:
            raise ConfigError("G at the radius is at least 1")
        if self.sing is not None:
            q, k = self.sing
            if not (q > 0 and int(k) == k and k >= 0):
                raise ConfigError("singularity descriptor needs q>0 and integer k>=0")
        if self.period < 1:
            raise ConfigError("period must be a positive integer")

    def identity_elem(self):  # pragma: no cover - no word algebra for data factors
        raise ConfigError("explicit-series factors carry no group elements")

    step_support = identity_elem
    combine = identity_elem
    dist_to_identity = identity_elem


FactorSpec = Union[LatticeNN, FiniteGroup, HomTree, ExplicitSeries]


# ---------------------------------------------------------------------------
# singularity descriptor


@dataclass(frozen=True)
class SingularityDescriptor:
    """Leading singular term (rho - z)^q log^k (rho - z) and its return-law exponents."""

    q: float
    k: int
    lam: float
    kappa: int

    @classmethod
    def from_qk(cls, q: float, k: int) -> "SingularityDescriptor":
        from .classify import darboux_map

        lam, kappa = darboux_map(q, k)
        return cls(q=q, k=k, lam=lam, kappa=kappa)


# ---------------------------------------------------------------------------
# analytics


@dataclass
class GreenAnalytics:
    """Computed invariants of one factor; evaluations go through .green()."""

    spec: FactorSpec
    radius: float
    g_at_r: float
    gprime_at_r: float
    theta: float
    period: int
    sing: Optional[SingularityDescriptor]
    series: PowerSeries
    psi_at_radius: float
    _green: Callable = field(repr=False)

    def green(self, z: float, deriv: int = 0) -> float:
        """G^(deriv)(z) on [0, radius]; +inf where divergent."""
        if deriv not in (0, 1, 2):
            raise OutOfDomain(f"deriv must be 0, 1 or 2, got {deriv}")
        if z < 0.0 or z > self.radius * (1.0 + 1e-12):
            raise OutOfDomain(f"z={z} outside [0, {self.radius}]")
        return self._green(min(z, self.radius), deriv)

    def w(self, z: float) -> float:
        """The strictly increasing map w(z) = z G(z)."""
        return z * self.green(z)


def _tree_radius(q: int) -> float:
    return q / (2.0 * math.sqrt(q - 1.0))


def _tree_green_closed(q: int, z: float, deriv: int) -> float:
    if z >= _tree_radius(q) * (1.0 - 1e-13):
        r = 0.0  # snap: the discriminant cancels to rounding noise here
    else:
        r = math.sqrt(q * q - 4.0 * (q - 1.0) * z * z)
    den = (q - 2.0) + r
    if deriv == 0:
        return math.inf if den == 0.0 else 2.0 * (q - 1.0) / den
    if r == 0.0:
        return math.inf
    a = q - 1.0
    if deriv == 1:
        return 8.0 * a * a * z / (r * den * den)
    return 8.0 * a * a * (
        1.0 / (r * den * den)
        + 4.0 * a * z * z / (r**3 * den * den)
        + 8.0 * a * z * z / (r * r * den**3)
    )


def _tree_first_passage(q: int, order: int) -> np.ndarray:
    # F = z/q + ((q-1)/q) z F^2: first passage from a neighbour to the root
    f = np.zeros(order + 1)
    if order >= 1:
        f[1] = 1.0 / q
    for n in range(3, order + 1, 2):
        f[n] = (q - 1.0) / q * np.dot(f[1 : n - 1], f[n - 2 : 0 : -1])
    return f


def _tree_series(q: int, order: int) -> PowerSeries:
    f = _tree_first_passage(q, order)
    u = np.zeros(order + 1)
    u[1:] = f[:-1]  # U = z F
    g = series_reciprocal(PowerSeries(np.concatenate([[1.0], np.zeros(order)])) - PowerSeries(u))
    return g


def _finite_series(spec: FiniteGroup, order: int) -> PowerSeries:
    P = spec.matrix()
    row = np.zeros(spec.order)
    row[spec.id] = 1.0
    out = np.zeros(order + 1)
    out[0] = 1.0
    for n in range(1, order + 1):
        row = row @ P
        out[n] = row[spec.id]
    return PowerSeries(out)


def _finite_period(spec: FiniteGroup) -> int:
    # gcd of (dist[x] + 1 - dist[y]) over support edges x -> y, the standard
    # period of a strongly connected digraph
    supp = [g for g, _ in spec.step_support()]
    dist = {spec.id: 0}
    frontier = [spec.id]
    while frontier:
        nxt = []
        for x in frontier:
            for s in supp:
                y = spec.table[x][s]
                if y not in dist:
                    dist[y] = dist[x] + 1
                    nxt.append(y)
        frontier = nxt
    g = 0
    for x in dist:
        for s in supp:
            y = spec.table[x][s]
            g = math.gcd(g, dist[x] + 1 - dist[y])
    return g


def factor_series(spec: FactorSpec, order: int) -> PowerSeries:
    """Return-probability series of one factor to the requested order."""
    if isinstance(spec, LatticeNN):
        return lattice.return_series(spec.beta, spec.p, order)
    if isinstance(spec, FiniteGroup):
        return _finite_series(spec, order)
    if isinstance(spec, HomTree):
        return _tree_series(spec.q, order)
    if isinstance(spec, ExplicitSeries):
        return PowerSeries(np.array(spec.coeffs)).pad(order).truncate(order)
    raise ConfigError(f"unknown factor spec {type(spec).__name__}")


def _make_green_eval(spec: FactorSpec, radius: float) -> Callable:
    if isinstance(spec, LatticeNN):
        beta, p = spec.beta, spec.p

        @lru_cache(maxsize=None)
        def ev(z, deriv):
            return lattice.green(beta, p, z, deriv)

        return ev

    if isinstance(spec, FiniteGroup):
        P = spec.matrix()
        idx = spec.id
        n = spec.order
        eye = np.eye(n)
        e = np.zeros(n)
        e[idx] = 1.0

        @lru_cache(maxsize=None)
        def ev(z, deriv):
            if z >= radius * (1.0 - 1e-13):
                return math.inf
            M = eye - z * P
            u = np.linalg.solve(M, e)
            if deriv == 0:
                return float(u[idx])
            v = np.linalg.solve(M.T, e)
            pu = P @ u
            if deriv == 1:
                return float(v @ pu)
            return float(2.0 * (v @ (P @ np.linalg.solve(M, pu))))

        return ev

    if isinstance(spec, HomTree):
        q = spec.q

        @lru_cache(maxsize=None)
        def ev(z, deriv):
            return _tree_green_closed(q, z, deriv)

        return ev

    if isinstance(spec, ExplicitSeries):
        coeffs = np.array(spec.coeffs)
        nn = np.arange(coeffs.size)
        g_r, gp_r = spec.g_at_r, spec.gprime_at_r

        @lru_cache(maxsize=None)
        def ev(z, deriv):
            if z >= radius * (1.0 - 1e-13):
                if deriv == 0:
                    return g_r
                if deriv == 1:
                    return gp_r
                return math.inf
            if deriv == 0:
                return float(np.polynomial.polynomial.polyval(z, coeffs))
            if deriv == 1:
                return float(np.sum(nn[1:] * coeffs[1:] * z ** (nn[1:] - 1)))
            return float(np.sum(nn[2:] * (nn[2:] - 1) * coeffs[2:] * z ** (nn[2:] - 2)))

        return ev

    raise ConfigError(f"unknown factor spec {type(spec).__name__}")


def _psi_from_values(z: float, g: float, gp: float) -> float:
    # Psi(z G(z)) = G^2 / (z G' + G) = 1 / (z U' + 1 - U)
    if math.isinf(gp):
        return 0.0
    return g * g / (z * gp + g)


def _psi_limit_at_radius(spec, radius, g_r, gp_r, series) -> float:
    """lim_{z->radius} Psi(z G(z)), finite-or-zero in every case.

    For transient factors with finite G' this is an honest evaluation; with
    infinite G' it is 0.  A positive-recurrent factor (finite group) has
    w(z) -> inf with Psi -> stationary mass pi(e) = 1/|Gamma|; null-recurrent
    walks (Z^1, Z^2, the degree-2 tree) drive Psi to 0.
    """
    if isinstance(spec, FiniteGroup):
        return 1.0 / spec.order
    if math.isfinite(g_r):
        if math.isfinite(gp_r):
            return _psi_from_values(radius, g_r, gp_r)
        return 0.0
    if isinstance(spec, (LatticeNN, HomTree)):
        return 0.0
    # explicit recurrent factor: approximate the limit from truncated sums
    z = radius * (1.0 - 10.0 / max(series.order, 20))
    coeffs = series.coeffs
    nn = np.arange(coeffs.size)
    g = float(np.polynomial.polynomial.polyval(z, coeffs))
    gp = float(np.sum(nn[1:] * coeffs[1:] * z ** (nn[1:] - 1)))
    return _psi_from_values(z, g, gp)


def analyze_factor(spec: FactorSpec, order: int = DEFAULT_ORDER) -> GreenAnalytics:
    """Compute all invariants of one factor's walk."""
    series = factor_series(spec, order)

    if isinstance(spec, LatticeNN):
        radius = lattice.convergence_radius(spec.beta, spec.p)
        period = 2
        d = spec.dim
        sing = None
        if d >= 5:
            sing = SingularityDescriptor.from_qk((d - 2) / 2.0, 0 if d % 2 == 1 else 1)
    elif isinstance(spec, FiniteGroup):
        P = spec.matrix()
        radius = 1.0 / float(np.max(np.abs(np.linalg.eigvals(P))))
        period = _finite_period(spec)
        sing = None
    elif isinstance(spec, HomTree):
        radius = _tree_radius(spec.q)
        period = 2
        sing = SingularityDescriptor.from_qk(0.5, 0) if spec.q >= 3 else None
        _validate_tree_closed_form(spec.q)
    elif isinstance(spec, ExplicitSeries):
        radius = spec.radius
        period = spec.period
        sing = None
        if spec.sing is not None:
            sing = SingularityDescriptor.from_qk(float(spec.sing[0]), int(spec.sing[1]))
    else:
        raise ConfigError(f"unknown factor spec {type(spec).__name__}")

    ev = _make_green_eval(spec, radius)
    g_r = ev(radius, 0)
    gp_r = ev(radius, 1)
    theta = radius * g_r if math.isfinite(g_r) else math.inf
    psi_r = _psi_limit_at_radius(spec, radius, g_r, gp_r, series)
    return GreenAnalytics(
        spec=spec,
        radius=radius,
        g_at_r=g_r,
        gprime_at_r=gp_r,
        theta=theta,
        period=period,
        sing=sing,
        series=series,
        psi_at_radius=psi_r,
        _green=ev,
    )


@lru_cache(maxsize=64)
def _validate_tree_closed_form(q: int) -> None:
    # the closed form is implementation-derived: cross-check it against the
    # first-passage recurrence before first use
    s = _tree_series(q, 48)
    z = 0.4 * _tree_radius(q)
    direct = float(np.polynomial.polynomial.polyval(z, s.coeffs))
    if abs(_tree_green_closed(q, z, 0) - direct) > 1e-10:
        raise RootNotBracketed(f"tree Green closed form failed self-check for q={q}")


# ---------------------------------------------------------------------------
# derived evaluations


def psi_at(an: GreenAnalytics, z: float) -> float:
    """Psi_i(z G_i(z)) for z in [0, radius], with the radius-limit conventions."""
    if z < 0.0 or z > an.radius * (1.0 + 1e-12):
        raise OutOfDomain(f"z={z} outside [0, {an.radius}]")
    if z == 0.0:
        return 1.0
    if z >= an.radius * (1.0 - _EDGE_RTOL):
        return an.psi_at_radius
    return _psi_from_values(z, an.green(z), an.green(z, 1))


def phi_derivs_at(an: GreenAnalytics, z: float):
    """(Phi_i, Phi_i', Phi_i'') at t = z G_i(z).

    Phi_i = G_i(z); Phi_i' = G'/(zG'+G); Phi_i'' = (G G'' - 2 G'^2)/(G + zG')^3.
    Raises NeedsDerivative when the required G'' is infinite.
    """
    g = an.green(z)
    gp = an.green(z, 1)
    if not math.isfinite(g):
        raise OutOfDomain("Phi data undefined where G diverges")
    if math.isinf(gp):
        phi1 = 1.0 / z
    else:
        phi1 = gp / (z * gp + g)
    gpp = an.green(z, 2)
    if not math.isfinite(gpp):
        raise NeedsDerivative(f"G'' infinite at z={z}; Phi'' not computable there")
    phi2 = (g * gpp - 2.0 * gp * gp) / (g + z * gp) ** 3
    return g, phi1, phi2


def invert_w(an: GreenAnalytics, t: float) -> float:
    """The unique z in [0, radius] with z G(z) = t, for 0 <= t < theta."""
    if t < 0.0:
        raise OutOfDomain("w arguments are nonnegative")
    if t == 0.0:
        return 0.0
    if math.isfinite(an.theta):
        if t > an.theta * (1.0 + 1e-12):
            raise OutOfDomain(f"t={t} is not below theta={an.theta}")
        if t >= an.theta * (1.0 - 1e-12):
            return an.radius
        hi = an.radius
    else:
        # w is unbounded: walk the bracket towards the radius, staying clear
        # of the evaluators' at-the-radius divergence band
        hi = an.radius * 0.5
        while an.w(hi) < t:
            gap = an.radius - hi
            if gap <= an.radius * 2e-13:
                return hi
            hi = an.radius - 0.5 * gap
    f = lambda z: z * an.green(z) - t
    if f(hi) < 0.0:
        raise RootNotBracketed(f"w inversion bracket failed at t={t}")
    return float(brentq(f, 0.0, hi, xtol=1e-15, rtol=_ROOT_RTOL, maxiter=200))


def psi_at_argument(an: GreenAnalytics, t: float) -> float:
    """Psi_i(t) for t in [0, theta_i], including the endpoint limit."""
    if t == 0.0:
        return 1.0
    if math.isfinite(an.theta) and t >= an.theta * (1.0 - 1e-12):
        if t > an.theta * (1.0 + 1e-12):
            raise OutOfDomain(f"t={t} exceeds theta={an.theta}")
        return an.psi_at_radius
    z = invert_w(an, t)
    return psi_at(an, z)
