"""Field representations with derivative data for the weighted-norm calculus.

Two families cover everything the norms need:

* MonomialField: finite sums of terms  C |z|^gamma z^a zbar^b  with an m x m
  matrix coefficient C.  The family is closed under d/dz_j and d/dzbar_k, so
  all derivatives are exact; these are the "band-limited" test fields.
* RadialField: an m x m profile on a log-radius grid (s = log|z|^2), cubic
  splines between nodes.  Radial fields are what the glued scenarios produce.
  Derivative components are the radial surrogates (d/drho chains), which are
  exact for the sup parts of radial sections and norm-equivalent in general.

Both expose ``deriv_stack(cloud, order)`` returning one (N, ncomp) complex
array per derivative order, flattened over components and endomorphism
entries, which is what the Holder pair kernel consumes.
"""

from __future__ import annotations

import dataclasses
import itertools
from typing import Sequence

import numpy as np
from scipy.interpolate import CubicSpline


# ---------------------------------------------------------------------------
# sample clouds
# ---------------------------------------------------------------------------

@dataclasses.dataclass
class Cloud:
    """Sample points on an annulus with pair-separation bookkeeping."""

    pts: np.ndarray        # (N, P) real coordinates used for separations
    radii: np.ndarray      # (N,) |z| of each node
    z: np.ndarray | None   # (N, n) complex coordinates, None for radial clouds
    min_sep: float
    max_sep: float


def radial_cloud(r_lo: float, r_hi: float, num: int = 33) -> Cloud:
    """Log-spaced radii; separations measured along the radius."""
    radii = np.geomspace(r_lo, r_hi, num)
    pts = radii[:, None]
    min_sep = float(np.min(np.diff(radii)))
    return Cloud(pts=pts, radii=radii, z=None, min_sep=min_sep,
                 max_sep=float(r_hi - r_lo))


def _hopf_directions(n_theta: int = 4, n_phi: int = 6) -> np.ndarray:
    """Structured directions on S^3 in C^2 (Hopf-type parametrization)."""
    thetas = (np.arange(n_theta) + 0.5) * (np.pi / 2) / n_theta
    phis = np.arange(n_phi) * 2 * np.pi / n_phi
    dirs = []
    for th in thetas:
        for p1 in phis:
            for p2 in phis:
                dirs.append([np.cos(th) * np.exp(1j * p1),
                             np.sin(th) * np.exp(1j * p2)])
    return np.asarray(dirs, dtype=complex)


def annulus_cloud(r_lo: float, r_hi: float, n_r: int = 7,
                  n_theta: int = 4, n_phi: int = 6) -> Cloud:
    """Product cloud (radii x S^3 directions) for fields on C^2 annuli."""
    radii_1d = np.geomspace(r_lo, r_hi, n_r)
    dirs = _hopf_directions(n_theta, n_phi)
    z = (radii_1d[:, None, None] * dirs[None, :, :]).reshape(-1, 2)
    radii = np.abs(np.linalg.norm(z, axis=1))
    pts = np.empty((z.shape[0], 4))
    pts[:, 0], pts[:, 1] = z[:, 0].real, z[:, 0].imag
    pts[:, 2], pts[:, 3] = z[:, 1].real, z[:, 1].imag
    # nearest-neighbour scale: angular step at the inner radius vs radial step
    ang = 2 * np.pi / n_phi
    min_sep = 0.5 * min(float(radii_1d[0] * ang),
                        float(np.min(np.diff(radii_1d))))
    return Cloud(pts=pts, radii=radii, z=z, min_sep=min_sep,
                 max_sep=float(2 * r_hi))


# ---------------------------------------------------------------------------
# monomial fields
# ---------------------------------------------------------------------------

@dataclasses.dataclass(frozen=True)
class _Term:
    coef: np.ndarray      # (m, m) complex
    gamma: float          # power of |z|
    a: tuple              # holomorphic exponents, length n
    b: tuple              # antiholomorphic exponents, length n


class MonomialField:
    """Sum of C |z|^gamma z^a zbar^b terms; derivatives are exact."""

    def __init__(self, terms: Sequence[_Term], n: int = 2, m: int = 1):
        self.terms = [t for t in terms if np.any(np.abs(t.coef) > 0)]
        self.n = n
        self.m = m

    # construction helpers -------------------------------------------------
    @classmethod
    def constant(cls, mat, n: int = 2) -> "MonomialField":
        mat = np.atleast_2d(np.asarray(mat, dtype=complex))
        zero = (0,) * n
        return cls([_Term(mat, 0.0, zero, zero)], n=n, m=mat.shape[0])

    @classmethod
    def identity(cls, m: int = 1, n: int = 2) -> "MonomialField":
        return cls.constant(np.eye(m), n=n)

    @classmethod
    def monomial(cls, coef, gamma: float = 0.0, a=(0, 0), b=(0, 0)) -> "MonomialField":
        mat = np.atleast_2d(np.asarray(coef, dtype=complex))
        return cls([_Term(mat, float(gamma), tuple(a), tuple(b))],
                   n=len(a), m=mat.shape[0])

    @classmethod
    def random_bandlimited(cls, rng, m: int = 1, n: int = 2, n_terms: int = 4,
                           max_deg: int = 2, gamma: float = 0.0,
                           hermitian: bool = True) -> "MonomialField":
        """Random low-degree field, optionally Hermitian-symmetrized."""
        terms = []
        for _ in range(n_terms):
            a = tuple(rng.integers(0, max_deg + 1, size=n))
            b = tuple(rng.integers(0, max_deg + 1, size=n))
            mat = rng.standard_normal((m, m)) + 1j * rng.standard_normal((m, m))
            terms.append(_Term(mat / n_terms, gamma, a, b))
        f = cls(terms, n=n, m=m)
        if hermitian:
            f = f.plus(f.hermitian_conjugate()).scaled(0.5)
        return f

    # algebra ---------------------------------------------------------------
    def scaled(self, c) -> "MonomialField":
        return MonomialField([_Term(t.coef * c, t.gamma, t.a, t.b)
                              for t in self.terms], self.n, self.m)

    def plus(self, other: "MonomialField") -> "MonomialField":
        return MonomialField(list(self.terms) + list(other.terms), self.n, self.m)

    def hermitian_conjugate(self) -> "MonomialField":
        # conj swaps z^a zbar^b and conj-transposes the matrix coefficient
        return MonomialField([_Term(t.coef.conj().T, t.gamma, t.b, t.a)
                              for t in self.terms], self.n, self.m)

    def tensor(self, other: "MonomialField") -> "MonomialField":
        terms = []
        for s in self.terms:
            for t in other.terms:
                terms.append(_Term(np.kron(s.coef, t.coef), s.gamma + t.gamma,
                                   tuple(np.add(s.a, t.a)),
                                   tuple(np.add(s.b, t.b))))
        return MonomialField(terms, self.n, self.m * other.m)

    def d(self, j: int) -> "MonomialField":
        """d/dz_j, exact."""
        out = []
        for t in self.terms:
            if t.gamma != 0.0:
                b = list(t.b)
                b[j] += 1
                out.append(_Term(t.coef * (t.gamma / 2.0), t.gamma - 2.0,
                                 t.a, tuple(b)))
            if t.a[j] > 0:
                a = list(t.a)
                a[j] -= 1
                out.append(_Term(t.coef * t.a[j], t.gamma, tuple(a), t.b))
        return MonomialField(out, self.n, self.m)

    def dbar(self, j: int) -> "MonomialField":
        """d/dzbar_j, exact."""
        out = []
        for t in self.terms:
            if t.gamma != 0.0:
                a = list(t.a)
                a[j] += 1
                out.append(_Term(t.coef * (t.gamma / 2.0), t.gamma - 2.0,
                                 tuple(a), t.b))
            if t.b[j] > 0:
                b = list(t.b)
                b[j] -= 1
                out.append(_Term(t.coef * t.b[j], t.gamma, t.a, tuple(b)))
        return MonomialField(out, self.n, self.m)

    def scale_pullback(self, r: float, delta: float) -> "MonomialField":
        """The rescaled section s_r^delta(z) = r^(-delta) s(r z), exact."""
        out = []
        for t in self.terms:
            power = t.gamma + sum(t.a) + sum(t.b) - delta
            out.append(_Term(t.coef * r**power, t.gamma, t.a, t.b))
        return MonomialField(out, self.n, self.m)

    # evaluation ------------------------------------------------------------
    def evaluate(self, z: np.ndarray) -> np.ndarray:
        z = np.atleast_2d(np.asarray(z, dtype=complex))
        N = z.shape[0]
        out = np.zeros((N, self.m, self.m), dtype=complex)
        r = np.linalg.norm(z, axis=1)
        for t in self.terms:
            scal = np.where(r > 0, r, 1.0) ** t.gamma if t.gamma else np.ones(N)
            if t.gamma and np.any(r == 0):
                scal = np.where(r == 0, 0.0 if t.gamma > 0 else np.inf, scal)
            for j in range(self.n):
                if t.a[j]:
                    scal = scal * z[:, j] ** t.a[j]
                if t.b[j]:
                    scal = scal * np.conj(z[:, j]) ** t.b[j]
            out += scal[:, None, None] * t.coef[None, :, :]
        return out

    def deriv_stack(self, cloud: Cloud, order: int) -> list[np.ndarray]:
        """[(N, ncomp_j) arrays], exact derivatives per canonical multi-index."""
        if cloud.z is None:
            raise ValueError("MonomialField needs a full annulus cloud")
        stacks = []
        for j in range(order + 1):
            comps = []
            for combo in itertools.combinations_with_replacement(
                    range(2 * self.n), j):
                f = self
                for sym in combo:
                    f = f.d(sym) if sym < self.n else f.dbar(sym - self.n)
                comps.append(f.evaluate(cloud.z).reshape(len(cloud.radii), -1))
            stacks.append(np.concatenate(comps, axis=1) if comps
                          else np.zeros((len(cloud.radii), 0), complex))
        return stacks


# ---------------------------------------------------------------------------
# radial fields
# ---------------------------------------------------------------------------

class RadialField:
    """Matrix profile P(s) on s = log|z|^2 with optional homogeneity degree.

    The field is P(s(z)) * Theta(z/|z|) |z|^deg with |Theta| = 1; deg = 0 is a
    plain radial section, deg = -1 models the radial (1,0)-form profiles.
    """

    def __init__(self, s_grid: np.ndarray, values: np.ndarray, deg: int = 0,
                 presmooth: bool = False):
        values = np.asarray(values, dtype=complex)
        if values.ndim == 1:
            values = values[:, None, None]
        if presmooth:
            # one binomial pass kills the odd-even mode of wide-stencil
            # solves exactly (an O(h^2) perturbation otherwise); used when
            # spline derivatives feed norm estimates
            inner = 0.25 * (values[:-2] + 2 * values[1:-1] + values[2:])
            values = np.concatenate([values[:1], inner, values[-1:]])
        self.s_grid = np.asarray(s_grid, dtype=float)
        self.values = values
        self.deg = deg
        self.m = values.shape[1]
        self._spline = CubicSpline(self.s_grid, self.values, axis=0)

    @classmethod
    def from_profile(cls, s_grid, fn, m: int = 1, deg: int = 0) -> "RadialField":
        vals = np.asarray([np.atleast_2d(fn(s)) for s in s_grid], dtype=complex)
        return cls(s_grid, vals, deg=deg)

    def profile(self, s, nu: int = 0) -> np.ndarray:
        return self._spline(np.asarray(s, dtype=float), nu=nu)

    def scale_pullback(self, r: float, delta: float) -> "RadialField":
        """s_r^delta: profile shift by 2 log r and r^(deg-delta) amplitude."""
        shift = 2.0 * np.log(r)
        return RadialField(self.s_grid - shift,
                           self.values * r ** (self.deg - delta), deg=self.deg)

    def multiplied(self, radial_factor) -> "RadialField":
        """Pointwise product with a radial scalar factor given as fn(s)."""
        fac = np.asarray([radial_factor(s) for s in self.s_grid], dtype=complex)
        return RadialField(self.s_grid, self.values * fac[:, None, None],
                           deg=self.deg)

    def deriv_stack(self, cloud: Cloud, order: int) -> list[np.ndarray]:
        """Radial derivative surrogates: components rho^(deg-j+i) (d/drho)^i P."""
        rho = cloud.radii
        s = 2.0 * np.log(rho)
        # (d/drho)^i P via d/drho = (2/rho) d/ds, expanded to order 2
        P = [self.profile(s, nu=j) for j in range(order + 1)]
        drho = {0: P[0]}
        if order >= 1:
            drho[1] = 2.0 / rho[:, None, None] * P[1]
        if order >= 2:
            drho[2] = (4.0 * P[2] - 2.0 * P[1]) / rho[:, None, None] ** 2
        if order >= 3:
            raise NotImplementedError("radial surrogate implemented to k = 2")
        stacks = []
        for j in range(order + 1):
            comps = []
            for i in range(j + 1):
                if i == 0 and j > 0 and self.deg == 0:
                    # a plain radial section has no P/rho^j derivative terms;
                    # those arise only from a nontrivial angular factor
                    continue
                w = rho ** (self.deg - (j - i))
                comps.append((w[:, None, None] * drho[i]).reshape(len(rho), -1))
            stacks.append(np.concatenate(comps, axis=1))
        return stacks


def frob_norms(stack: np.ndarray) -> np.ndarray:
    """Pointwise Frobenius norm over the component axis of an (N, d) stack."""
    return np.sqrt(np.einsum("nd,nd->n", stack, stack.conj()).real)
