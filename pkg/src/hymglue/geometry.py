"""Charts, cutoffs, the Burns-Simanca metric and the glued Kahler metric.

Conventions used throughout the package:

* A Kahler metric is stored as the Hermitian matrix g[j,k] = d^2 phi / dz_j dzbar_k
  of its potential, so the potential |z|^2 gives the identity matrix.
* A (1,1)-form is stored as the coefficient matrix B of  i B[j,k] dz_j ^ dzbar_k;
  with this convention ``lambda_contract(g, g) == n`` (the form is the Kahler
  form itself) and ``lambda_contract`` applied to a curvature matrix computes
  i Lambda F.
* The gluing scale is ``epsilon``; the neck radius is r_eps = epsilon^((n-1)/n),
  the neck is the annulus r_eps <= |z| <= 2 r_eps, zeta = z / epsilon.
"""

from __future__ import annotations

import dataclasses
from typing import Callable, Sequence

import numpy as np

POSITIVITY_TOL = 1e-10


class DomainError(ValueError):
    """Argument outside the domain an operation is defined on."""


class RegionError(ValueError):
    """Point lies outside the chart/region an operation expects."""


class PositivityError(ValueError):
    """A metric lost positive-definiteness (bad glue or too-coarse grid)."""


class UnsupportedDimensionError(NotImplementedError):
    """Metric construction requested for a dimension without a model metric."""


# ---------------------------------------------------------------------------
# cutoff profile
# ---------------------------------------------------------------------------

def smoothstep_coeffs(smoothness: int) -> np.ndarray:
    """Coefficients of the polynomial smoothstep with C^N continuity.

    Degree 2N+1; the N = 3 case (degree 7) is the default cutoff profile,
    higher N builds smoother scenario bumps."""
    from math import comb

    N = smoothness
    coeffs = np.zeros(2 * N + 2)
    for k in range(N + 1):
        coeffs[N + 1 + k] = comb(N + k, k) * comb(2 * N + 1, N - k) * (-1) ** k
    return coeffs


# smoothstep of polynomial order 7: continuous third derivatives, bounded
# (piecewise) fourth derivative, which is what the C^4 cutoff bound needs.
_SMOOTHSTEP7 = smoothstep_coeffs(3)


class CutoffProfile:
    """Monotone profile gamma: 0 for x <= 1, 1 for x >= 2, polynomial between.

    ``__call__`` and ``deriv`` are vectorized in x; derivatives up to order 4
    are available (order 4 is piecewise continuous).
    """

    def __init__(self, coeffs=_SMOOTHSTEP7, name="smoothstep7"):
        self.coeffs = np.asarray(coeffs, dtype=float)
        self.name = name
        p = np.polynomial.Polynomial(self.coeffs)
        if abs(p(0.0)) > 1e-14 or abs(p(1.0) - 1.0) > 1e-14:
            raise ValueError("profile polynomial must map [0,1] onto [0,1]")

    def __call__(self, x):
        return self.deriv(x, 0)

    def deriv(self, x, order):
        if order > 4:
            raise DomainError("cutoff profile supports derivatives up to order 4")
        x = np.asarray(x, dtype=float)
        t = np.clip(x - 1.0, 0.0, 1.0)
        p = np.polynomial.Polynomial(self.coeffs).deriv(order)
        out = np.asarray(p(t), dtype=float)
        if order == 0:
            out = np.where(x <= 1.0, 0.0, np.where(x >= 2.0, 1.0, out))
        else:
            out = np.where((x <= 1.0) | (x >= 2.0), 0.0, out)
        return out if out.shape else float(out)


PROFILES = {
    "smoothstep7": CutoffProfile(),
    "smoothstep15": CutoffProfile(smoothstep_coeffs(7), name="smoothstep15"),
}


def cutoff_c4_norm(profile: CutoffProfile, n_samples: int = 4001) -> float:
    """Sampled C^4-type norm of the cutoff pair in neck-scaled coordinates.

    Evaluated in the scaled variable x = |z|/r_eps, where the weighted C^4_0
    norm of gamma_1 is a functional of the profile alone; the result is
    therefore exactly independent of epsilon.
    """
    x = np.linspace(0.5, 2.5, n_samples)
    total = 0.0
    for j in range(5):
        total = max(total, float(np.max(np.abs(x**j * profile.deriv(x, j)))))
    return total


# ---------------------------------------------------------------------------
# gluing parameters
# ---------------------------------------------------------------------------

def r_epsilon(epsilon: float, n: int) -> float:
    """Neck radius epsilon^((n-1)/n); requires 0 < epsilon < 1 and n >= 2."""
    if n < 2:
        raise DomainError(f"complex dimension must be >= 2, got {n}")
    if not 0.0 < epsilon < 1.0:
        raise DomainError(f"epsilon must lie in (0,1), got {epsilon}")
    return float(epsilon ** ((n - 1) / n))


@dataclasses.dataclass(frozen=True)
class GluingParams:
    """Scale data for the glue: epsilon, dimension, blowup points with weights."""

    epsilon: float
    n: int = 2
    points: tuple = ((None, 1.0),)  # (center in C^n or None for origin, weight a)
    profile: CutoffProfile = dataclasses.field(default_factory=CutoffProfile)

    def __post_init__(self):
        r_epsilon(self.epsilon, self.n)  # validates epsilon, n
        for _, a in self.points:
            if a <= 0:
                raise DomainError("blowup weights must be positive")
        self._validate_disjoint_necks()

    def _validate_disjoint_necks(self):
        pts = [(np.zeros(self.n, complex) if p is None else np.asarray(p, complex), a)
               for p, a in self.points]
        for i in range(len(pts)):
            for j in range(i + 1, len(pts)):
                sep = np.linalg.norm(pts[i][0] - pts[j][0])
                need = 2.0 * (self.r_eps_at(i) + self.r_eps_at(j)) * 2.0
                if sep <= need:
                    raise DomainError(
                        f"necks at points {i} and {j} overlap: |p_i-p_j|={sep:.3g}"
                        f" <= {need:.3g}")

    @property
    def r_eps(self) -> float:
        return self.r_eps_at(0)

    def eps_at(self, i: int) -> float:
        """Effective gluing scale a_i * epsilon at blowup point i."""
        return self.points[i][1] * self.epsilon

    def r_eps_at(self, i: int) -> float:
        return r_epsilon(self.eps_at(i), self.n)

    def center(self, i: int = 0) -> np.ndarray:
        p = self.points[i][0]
        return np.zeros(self.n, complex) if p is None else np.asarray(p, complex)


# ---------------------------------------------------------------------------
# charts and regions
# ---------------------------------------------------------------------------

OUTER, NECK, INNER = "outer", "neck", "inner"
CHART_Z, CHART_ANNULUS, CHART_ZETA, CHART_BLOWUP = (
    "outer-z", "annulus-z", "inner-zeta", "blowup-interior")


@dataclasses.dataclass(frozen=True)
class ChartPoint:
    """A point with its chart and region tag.

    coords are z-coordinates for the outer/annulus charts, zeta = z/epsilon
    for the inner chart and (u, v) with zeta = (u, u v) for the
    blowup-interior chart.
    """

    coords: tuple
    chart: str
    region: str
    point_index: int = 0

    @property
    def z(self) -> np.ndarray:
        return np.asarray(self.coords, dtype=complex)


def classify(z, params: GluingParams, point_index: int = 0) -> ChartPoint:
    """Classify z (coordinates centered at the blowup point) into a region."""
    z = np.asarray(z, dtype=complex)
    r = float(np.linalg.norm(z))
    r_eps = params.r_eps_at(point_index)
    if r < r_eps:
        zeta = z / params.eps_at(point_index)
        return ChartPoint(tuple(zeta), CHART_ZETA, INNER, point_index)
    if r <= 2.0 * r_eps:
        return ChartPoint(tuple(z), CHART_ANNULUS, NECK, point_index)
    return ChartPoint(tuple(z), CHART_Z, OUTER, point_index)


def cutoffs(z, params: GluingParams, point_index: int = 0):
    """(gamma1, gamma2) at z; gamma1 = gamma(|z|/r_eps), gamma2 = 1 - gamma1."""
    z = np.asarray(z, dtype=complex)
    x = float(np.linalg.norm(z)) / params.r_eps_at(point_index)
    g1 = float(params.profile(x))
    return g1, 1.0 - g1


# ---------------------------------------------------------------------------
# Burns-Simanca metric (n = 2 only)
# ---------------------------------------------------------------------------

def burns_simanca_potential(zeta, n: int = 2) -> float:
    """|zeta|^2 + log|zeta| on the exterior chart of the blowup of C^2."""
    if n != 2:
        raise UnsupportedDimensionError(
            "explicit model potential available only for n = 2")
    zeta = np.asarray(zeta, dtype=complex)
    r2 = float(np.sum(np.abs(zeta) ** 2))
    if r2 <= 0.0:
        raise DomainError("exterior chart requires |zeta| > 0")
    return r2 + 0.5 * np.log(r2)


def burns_simanca_potential_interior(u: complex, v: complex, n: int = 2) -> float:
    """Potential in the interior chart (u, v), zeta = (u, u v).

    The pluriharmonic log|u| term is dropped so the associated metric extends
    smoothly across the exceptional divisor u = 0.
    """
    if n != 2:
        raise UnsupportedDimensionError(
            "explicit model potential available only for n = 2")
    w2 = 1.0 + abs(v) ** 2
    return abs(u) ** 2 * w2 + 0.5 * np.log(w2)


def burns_simanca_metric(zeta, n: int = 2) -> np.ndarray:
    """Closed-form exterior-chart metric of the model: Id + (1/2) ddbar log|zeta|^2."""
    if n != 2:
        raise UnsupportedDimensionError(
            "explicit model metric available only for n = 2")
    zeta = np.asarray(zeta, dtype=complex)
    r2 = float(np.sum(np.abs(zeta) ** 2))
    if r2 <= 0.0:
        raise DomainError("exterior chart requires |zeta| > 0")
    eye = np.eye(2, dtype=complex)
    outer = np.outer(np.conj(zeta), zeta)
    return eye + 0.5 * (eye / r2 - outer / r2**2)


def burns_simanca_metric_interior(u: complex, v: complex) -> np.ndarray:
    """Interior-chart metric; at u = 0 it restricts to (1/2) Fubini-Study on P^1."""
    w2 = 1.0 + abs(v) ** 2
    return np.array(
        [[w2, np.conj(u) * v],
         [u * np.conj(v), abs(u) ** 2 + 0.5 / w2**2]], dtype=complex)


def fubini_study_p1(v: complex) -> float:
    """g_vvbar of the Fubini-Study potential log(1+|v|^2) on P^1."""
    return 1.0 / (1.0 + abs(v) ** 2) ** 2


# ---------------------------------------------------------------------------
# potentials -> metrics
# ---------------------------------------------------------------------------

def _real_coords(z: np.ndarray) -> np.ndarray:
    out = np.empty(2 * z.size)
    out[0::2] = z.real
    out[1::2] = z.imag
    return out


def _to_complex(x: np.ndarray) -> np.ndarray:
    return x[0::2] + 1j * x[1::2]


def real_hessian(f: Callable, x: np.ndarray, h: float, order: int = 2) -> np.ndarray:
    """Real Hessian of a scalar function by centered differences."""
    d = x.size
    H = np.empty((d, d))

    def ev(*shifts):
        y = x.copy()
        for idx, mult in shifts:
            y[idx] += mult * h
        return f(y)

    f0 = f(x)
    for a in range(d):
        if order == 2:
            H[a, a] = (ev((a, 1)) - 2 * f0 + ev((a, -1))) / h**2
        else:
            H[a, a] = (-ev((a, 2)) + 16 * ev((a, 1)) - 30 * f0
                       + 16 * ev((a, -1)) - ev((a, -2))) / (12 * h**2)
    for a in range(d):
        for b in range(a + 1, d):
            if order == 2:
                H[a, b] = (ev((a, 1), (b, 1)) - ev((a, 1), (b, -1))
                           - ev((a, -1), (b, 1)) + ev((a, -1), (b, -1))) / (4 * h**2)
            else:
                w = np.array([1.0, -8.0, 8.0, -1.0]) / 12.0
                sh = [-2, -1, 1, 2]
                acc = 0.0
                for wa, sa in zip(w, sh):
                    for wb, sb in zip(w, sh):
                        acc += wa * wb * ev((a, sa), (b, sb))
                H[a, b] = acc / h**2
            H[b, a] = H[a, b]
    return H


def metric_from_potential(potential: Callable, z, h: float = 1e-3,
                          order: int = 2, check_positivity: bool = True) -> np.ndarray:
    """g[j,k] = d^2 phi / dz_j dzbar_k by centered differences in real coordinates.

    ``potential`` takes a complex n-vector.  Raises PositivityError when the
    smallest eigenvalue falls below the module tolerance, which flags a bad
    glue or a too-coarse step.
    """
    z = np.asarray(z, dtype=complex)
    n = z.size

    def f(x):
        return float(potential(_to_complex(x)))

    H = real_hessian(f, _real_coords(z), h, order=order)
    g = np.empty((n, n), dtype=complex)
    for j in range(n):
        for k in range(n):
            xj, yj, xk, yk = 2 * j, 2 * j + 1, 2 * k, 2 * k + 1
            g[j, k] = 0.25 * ((H[xj, xk] + H[yj, yk])
                              + 1j * (H[xj, yk] - H[yj, xk]))
    g = 0.5 * (g + g.conj().T)
    if check_positivity:
        lam = float(np.linalg.eigvalsh(g).min())
        if lam <= POSITIVITY_TOL:
            raise PositivityError(
                f"metric not positive definite (min eigenvalue {lam:.3g})")
    return g


def glued_potential(z, params: GluingParams, phi: Callable, point_index: int = 0) -> float:
    """Neck-branch potential |z|^2 + gamma1 phi + eps^2 gamma2 psi(z/eps).

    Defined on the annulus r_eps <= |z| <= 2 r_eps only (RegionError outside);
    at the boundaries it matches the outer and inner branches exactly.
    """
    z = np.asarray(z, dtype=complex)
    r = float(np.linalg.norm(z))
    eps = params.eps_at(point_index)
    r_eps = params.r_eps_at(point_index)
    if not (r_eps <= r <= 2.0 * r_eps):
        raise RegionError(f"|z| = {r:.3g} outside neck [{r_eps:.3g}, {2*r_eps:.3g}]")
    g1, g2 = cutoffs(z, params, point_index)
    psi = burns_simanca_potential(z / eps, params.n) - float(np.sum(np.abs(z / eps)**2))
    return float(np.sum(np.abs(z) ** 2)) + g1 * float(phi(z)) + eps**2 * g2 * psi


def glued_metric(point: ChartPoint, params: GluingParams, phi: Callable,
                 base_metric: Callable | None = None, h: float | None = None,
                 order: int = 2) -> np.ndarray:
    """Three-branch glued metric, returned in the chart of ``point``.

    outer: base metric (from ``base_metric`` or differentiating |z|^2 + phi);
    neck: metric of the glued potential; inner: eps^2 * (model metric at zeta),
    in zeta-coordinates.
    """
    if params.n != 2:
        raise UnsupportedDimensionError("glued metric implemented for n = 2")
    i = point.point_index
    eps = params.eps_at(i)
    if point.region == INNER:
        return eps**2 * burns_simanca_metric(point.z, params.n)
    if point.region == OUTER:
        if base_metric is not None:
            return np.asarray(base_metric(point.z), dtype=complex)
        pot = lambda w: float(np.sum(np.abs(w) ** 2)) + float(phi(w))
        return metric_from_potential(pot, point.z, h=h or 1e-4, order=order)
    step = h if h is not None else params.r_eps_at(i) * 5e-3
    pot = lambda w: glued_potential_unclipped(w, params, phi, i)
    return metric_from_potential(pot, point.z, h=step, order=order)


def glued_potential_unclipped(z, params: GluingParams, phi: Callable,
                              point_index: int = 0) -> float:
    """Glued potential extended smoothly past the neck (for FD stencils)."""
    z = np.asarray(z, dtype=complex)
    eps = params.eps_at(point_index)
    g1, g2 = cutoffs(z, params, point_index)
    r2 = float(np.sum(np.abs(z) ** 2))
    psi = 0.5 * np.log(r2 / eps**2)
    return r2 + g1 * float(phi(z)) + eps**2 * g2 * psi


# ---------------------------------------------------------------------------
# contraction against the metric
# ---------------------------------------------------------------------------

def lambda_contract(g: np.ndarray, beta: np.ndarray):
    """Trace of a (1,1)-form coefficient matrix against the inverse metric.

    For beta the coefficient of i beta[j,k] dz_j ^ dzbar_k this computes
    Lambda_omega of the form; applied to a curvature matrix F[j,k] (stored
    without the i) it computes i Lambda_omega F.  beta may carry trailing
    endomorphism axes: shape (n, n) or (n, n, m, m).
    """
    g = np.asarray(g, dtype=complex)
    try:
        ginv = np.linalg.inv(g)
    except np.linalg.LinAlgError as exc:
        raise PositivityError("singular metric in lambda_contract") from exc
    beta = np.asarray(beta, dtype=complex)
    out = np.einsum("kj,jk...->...", ginv, beta)
    return complex(out) if out.shape == () else out


# ---------------------------------------------------------------------------
# radial potentials: u(s) with s = log|z|^2
# ---------------------------------------------------------------------------
#
# A U(n)-invariant Kahler potential phi(z) = u(log|z|^2) has metric
# eigenvalues u'/|z|^2 (transverse, multiplicity n-1) and u''/|z|^2 (radial),
# volume density (in s, up to a dimensional constant) u'^(n-1) u'', and the
# scalar Laplacian on radial functions v(s) is
#     Delta v = 2 [ (n-1) v'/u' + v''/u'' ]  =  2 (u'^(n-1) v')' / (u'^(n-1) u'')
# for n = 2.  These classes provide (u, u', u'') analytically.

class RadialPotential:
    """Base: subclasses provide u(s), du(s), d2u(s) vectorized in s."""

    n = 2

    def u(self, s):
        raise NotImplementedError

    def du(self, s):
        raise NotImplementedError

    def d2u(self, s):
        raise NotImplementedError

    def measure(self, s):
        """Volume density in s up to a constant: u'^(n-1) u''."""
        return self.du(s) ** (self.n - 1) * self.d2u(s)

    def metric_eigs(self, s):
        """(transverse, radial) metric eigenvalues at |z|^2 = e^s, z-chart."""
        es = np.exp(np.asarray(s, dtype=float))
        return self.du(s) / es, self.d2u(s) / es

    def check_positive(self, s):
        tmin = float(np.min(self.du(s)))
        rmin = float(np.min(self.d2u(s)))
        if min(tmin, rmin) <= POSITIVITY_TOL:
            raise PositivityError(
                f"radial metric not positive (u'={tmin:.3g}, u''={rmin:.3g})")

    def metric_matrix(self, z):
        """Full n x n metric matrix at z in the z-chart."""
        z = np.asarray(z, dtype=complex)
        r2 = float(np.sum(np.abs(z) ** 2))
        s = np.log(r2)
        t, r = self.metric_eigs(s)
        zh = np.conj(z) / np.sqrt(r2)
        proj = np.outer(zh, zh.conj())
        return float(t) * (np.eye(self.n) - proj) + float(r) * proj


class EuclideanRadial(RadialPotential):
    """u = e^s + beta e^{2s}: potential |z|^2 + beta |z|^4."""

    def __init__(self, quartic: float = 0.0, n: int = 2):
        self.quartic = float(quartic)
        self.n = n

    def u(self, s):
        es = np.exp(s)
        return es + self.quartic * es**2

    def du(self, s):
        es = np.exp(s)
        return es + 2 * self.quartic * es**2

    def d2u(self, s):
        es = np.exp(s)
        return es + 4 * self.quartic * es**2

    def correction(self, s, order=0):
        """phi = u - e^s and its s-derivatives (the O(|z|^4) base correction)."""
        return self.quartic * 2.0**order * np.exp(2 * np.asarray(s, float))


class BurnsSimancaRadial(RadialPotential):
    """u = e^s + s/2 in zeta-coordinates (n = 2)."""

    def u(self, s):
        return np.exp(s) + 0.5 * np.asarray(s, float)

    def du(self, s):
        return np.exp(s) + 0.5

    def d2u(self, s):
        return np.exp(np.asarray(s, float))


class GluedRadial(RadialPotential):
    """Glued radial potential on the blown-up ball, in z-coordinates.

    u(s) = e^s + gamma1 phi + eps^2 gamma2 psi0 with psi0 = (s - 2 log eps)/2,
    gamma_i evaluated at x = |z|/r_eps = exp(s/2)/r_eps.  Derivatives are
    exact (chain rule through the polynomial profile).
    """

    def __init__(self, params: GluingParams, base: EuclideanRadial | None = None,
                 point_index: int = 0):
        if params.n != 2:
            raise UnsupportedDimensionError("glued radial potential needs n = 2")
        self.params = params
        self.base = base if base is not None else EuclideanRadial()
        self.eps = params.eps_at(point_index)
        self.r_eps = params.r_eps_at(point_index)
        self.profile = params.profile

    def _gammas(self, s, order):
        # d/ds of gamma(x(s)) with x = exp(s/2)/r_eps: dx/ds = x/2
        x = np.exp(0.5 * np.asarray(s, float)) / self.r_eps
        if order == 0:
            return self.profile.deriv(x, 0)
        if order == 1:
            return self.profile.deriv(x, 1) * x / 2
        if order == 2:
            return self.profile.deriv(x, 2) * x**2 / 4 + self.profile.deriv(x, 1) * x / 4
        raise DomainError("gamma derivatives implemented to order 2")

    def _terms(self, s, order):
        s = np.asarray(s, dtype=float)
        g1 = [self._gammas(s, j) for j in range(order + 1)]
        phi = [self.base.correction(s, j) for j in range(order + 1)]
        psi0 = [0.5 * (s - 2 * np.log(self.eps)), np.full_like(s, 0.5),
                np.zeros_like(s)]
        # product rule for gamma1*phi + eps^2*(1-gamma1)*psi0
        if order == 0:
            return g1[0] * phi[0] + self.eps**2 * (1 - g1[0]) * psi0[0]
        if order == 1:
            return (g1[1] * phi[0] + g1[0] * phi[1]
                    + self.eps**2 * (-g1[1] * psi0[0] + (1 - g1[0]) * psi0[1]))
        return (g1[2] * phi[0] + 2 * g1[1] * phi[1] + g1[0] * phi[2]
                + self.eps**2 * (-g1[2] * psi0[0] - 2 * g1[1] * psi0[1]
                                 + (1 - g1[0]) * psi0[2]))

    def u(self, s):
        return np.exp(s) + self._terms(s, 0)

    def du(self, s):
        return np.exp(s) + self._terms(s, 1)

    def d2u(self, s):
        return np.exp(s) + self._terms(s, 2)


def radial_laplacian_profile(pot: RadialPotential, v, dv, d2v):
    """Delta v = 2[(n-1) v'/u' + v''/u''] for radial v, given s-derivatives."""
    return lambda s: 2.0 * ((pot.n - 1) * dv(s) / pot.du(s) + d2v(s) / pot.d2u(s))
