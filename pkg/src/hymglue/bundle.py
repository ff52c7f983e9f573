"""Hermitian bundle metrics, Chern connections, gauge action and residuals.

Sign/factor conventions fixed module-wide (documented once, used everywhere):

* Chern connection in a holomorphic frame: A_j = conj(h)^-1 d_j conj(h),
  where h is the Gram matrix h_ab = h(e_a, e_b).
* Curvature coefficient matrix: F[j,k] = -dbar_k A_j (+ gauge terms for a
  transformed connection); the (1,1)-form is F[j,k] dz_j ^ dzbar_k.
* The residual is  i Lambda_omega F - c Id  with i Lambda F = tr(g^-1 F)
  computed by geometry.lambda_contract; for h = e^{-phi} rank one this makes
  i Lambda_euc F = tr(ddbar phi), which is +2 for phi = |z|^2 in n = 2.
* Gauge action of Hermitian f on a Chern connection (f* = f):
      B10 = f A f^-1 - (df) f^-1,     B01 = f^-1 dbar f.
  The transformed curvature is conjugate by f to the Chern curvature of the
  metric with Gram matrix (f^T)^-1 h conj(f)^-1.
"""

from __future__ import annotations

import dataclasses
from typing import Callable, Sequence

import numpy as np

from .geometry import (DomainError, PositivityError, POSITIVITY_TOL,
                       GluingParams, ChartPoint, INNER, NECK, OUTER,
                       cutoffs, lambda_contract)


# ---------------------------------------------------------------------------
# pointwise derivative helpers for matrix-valued functions of z in C^n
# ---------------------------------------------------------------------------

def _shifted(z, axis_real, step):
    z = np.array(z, dtype=complex)
    j, im = divmod(axis_real, 2)
    z[j] += step * (1j if im else 1.0)
    return z


def d_z(fn: Callable, z, j: int, h: float = 1e-5, order: int = 2):
    """d/dz_j of a matrix-valued fn by centered differences, = (d_x - i d_y)/2."""
    def d_real(axis):
        if order == 2:
            return (np.asarray(fn(_shifted(z, axis, h)), complex)
                    - np.asarray(fn(_shifted(z, axis, -h)), complex)) / (2 * h)
        return (-np.asarray(fn(_shifted(z, axis, 2 * h)), complex)
                + 8 * np.asarray(fn(_shifted(z, axis, h)), complex)
                - 8 * np.asarray(fn(_shifted(z, axis, -h)), complex)
                + np.asarray(fn(_shifted(z, axis, -2 * h)), complex)) / (12 * h)
    return 0.5 * (d_real(2 * j) - 1j * d_real(2 * j + 1))


def d_zbar(fn: Callable, z, j: int, h: float = 1e-5, order: int = 2):
    def d_real(axis):
        if order == 2:
            return (np.asarray(fn(_shifted(z, axis, h)), complex)
                    - np.asarray(fn(_shifted(z, axis, -h)), complex)) / (2 * h)
        return (-np.asarray(fn(_shifted(z, axis, 2 * h)), complex)
                + 8 * np.asarray(fn(_shifted(z, axis, h)), complex)
                - 8 * np.asarray(fn(_shifted(z, axis, -h)), complex)
                + np.asarray(fn(_shifted(z, axis, -2 * h)), complex)) / (12 * h)
    return 0.5 * (d_real(2 * j) + 1j * d_real(2 * j + 1))


def check_positive(mat: np.ndarray, what: str = "metric"):
    lam = float(np.linalg.eigvalsh(mat).min())
    if lam <= POSITIVITY_TOL:
        raise PositivityError(f"{what} not positive definite (min eig {lam:.3g})")
    return lam


# ---------------------------------------------------------------------------
# Chern connection and curvature of a metric given as h(z) -> (m, m)
# ---------------------------------------------------------------------------

def chern_connection(h_fn: Callable, z, n: int = 2, h_step: float = 1e-5,
                     order: int = 2) -> np.ndarray:
    """A_j = conj(h)^-1 d_j conj(h); shape (n, m, m)."""
    hbar = lambda w: np.conj(np.asarray(h_fn(w), complex))
    h0 = hbar(z)
    check_positive(np.conj(h0), "bundle metric")
    hinv = np.linalg.inv(h0)
    return np.stack([hinv @ d_z(hbar, z, j, h_step, order) for j in range(n)])


def chern_curvature(h_fn: Callable, z, n: int = 2, h_step: float = 1e-5,
                    order: int = 2) -> np.ndarray:
    """F[j,k] = -dbar_k A_j for the Chern connection of h; shape (n, n, m, m)."""
    m = np.asarray(h_fn(z)).shape[0]
    F = np.empty((n, n, m, m), dtype=complex)
    for j in range(n):
        Aj = lambda w, j=j: chern_connection(h_fn, w, n, h_step, order)[j]
        for k in range(n):
            F[j, k] = -d_zbar(Aj, z, k, h_step, order)
    return F


@dataclasses.dataclass
class ConnectionField:
    """A connection by its (1,0) and (0,1) matrix-valued form components."""

    b10: Callable   # z -> (n, m, m)
    b01: Callable   # z -> (n, m, m)
    n: int = 2
    provenance: str = "chern-of-h"

    @classmethod
    def chern(cls, h_fn: Callable, n: int = 2, h_step: float = 1e-5,
              order: int = 2) -> "ConnectionField":
        def b01(z):
            m = np.asarray(h_fn(z)).shape[0]
            return np.zeros((n, m, m), dtype=complex)
        return cls(b10=lambda z: chern_connection(h_fn, z, n, h_step, order),
                   b01=b01, n=n, provenance="chern-of-h")

    def curvature(self, z, h_step: float = 1e-5, order: int = 2) -> np.ndarray:
        """F[j,k] = -dbar_k B10_j + d_j B01_k + [B10_j, B01_k]."""
        b10_0 = np.asarray(self.b10(z), complex)
        n, m = b10_0.shape[0], b10_0.shape[1]
        F = np.empty((n, n, m, m), dtype=complex)
        for j in range(n):
            B10j = lambda w, j=j: np.asarray(self.b10(w), complex)[j]
            for k in range(n):
                B01k = lambda w, k=k: np.asarray(self.b01(w), complex)[k]
                b01_k = np.asarray(self.b01(z), complex)[k]
                F[j, k] = (-d_zbar(B10j, z, k, h_step, order)
                           + d_z(B01k, z, j, h_step, order)
                           + b10_0[j] @ b01_k - b01_k @ b10_0[j])
        return F


def gauge_act(f_fn: Callable, conn: ConnectionField, h_fn: Callable | None = None,
              h_step: float = 1e-5, order: int = 2) -> ConnectionField:
    """Action of a Hermitian gauge element f on a connection.

    f must be invertible (and Hermitian with respect to the background
    metric, which is the caller's responsibility; the formulas use f* = f).
    """
    def b10(z):
        f = np.asarray(f_fn(z), complex)
        if abs(np.linalg.det(f)) < 1e-300:
            raise DomainError("gauge element not invertible")
        finv = np.linalg.inv(f)
        base = np.asarray(conn.b10(z), complex)
        out = np.empty_like(base)
        for j in range(base.shape[0]):
            df = d_z(f_fn, z, j, h_step, order)
            out[j] = f @ base[j] @ finv - df @ finv
        return out

    def b01(z):
        f = np.asarray(f_fn(z), complex)
        finv = np.linalg.inv(f)
        base = np.asarray(conn.b01(z), complex)
        out = np.empty_like(base)
        for j in range(base.shape[0]):
            dbf = d_zbar(f_fn, z, j, h_step, order)
            out[j] = finv @ base[j] @ f + finv @ dbf
        return out

    return ConnectionField(b10=b10, b01=b01, n=conn.n,
                           provenance="gauge-transformed")


def gauge_metric(h_fn: Callable, f_fn: Callable) -> Callable:
    """Gram matrix (f^T)^-1 h conj(f)^-1 whose Chern curvature is conjugate
    by f to the curvature of the gauge-transformed connection."""
    def h_new(z):
        f = np.asarray(f_fn(z), complex)
        finv = np.linalg.inv(f)
        return finv.T @ np.asarray(h_fn(z), complex) @ np.conj(finv)
    return h_new


def hym_residual(curvature: np.ndarray, g: np.ndarray, c: float) -> np.ndarray:
    """i Lambda_omega F - c Id, Hermitian for Hermitian input data."""
    ilf = lambda_contract(g, curvature)
    ilf = np.atleast_2d(ilf)
    return ilf - c * np.eye(ilf.shape[0])


# ---------------------------------------------------------------------------
# glued bundle metric and normal frames
# ---------------------------------------------------------------------------

def glued_bundle_metric(point: ChartPoint, params: GluingParams,
                        h_fn: Callable, m: int | None = None) -> np.ndarray:
    """Three-branch bundle metric: h outside, cutoff blend on the neck,
    the flat metric inside.  h must be in a normal frame at the blowup point
    (h = Id + O(|z|^2)), which keeps the blend positive definite."""
    if point.region == OUTER:
        h = np.asarray(h_fn(point.z), complex)
        check_positive(h, "bundle metric")
        return h
    if m is None:
        m = np.asarray(h_fn(np.zeros(params.n, complex))).shape[0]
    if point.region == INNER:
        return np.eye(m, dtype=complex)
    g1, g2 = cutoffs(point.z, params, point.point_index)
    h = g1 * np.asarray(h_fn(point.z), complex) + g2 * np.eye(m)
    check_positive(h, "glued bundle metric (neck)")
    return h


def normal_frame(h_fn: Callable, n: int = 2, h_step: float = 1e-5,
                 order: int = 4) -> Callable:
    """Return h in a frame with h(0) = Id and dh(0) = 0.

    First a constant change normalizes h(0) to the identity, then the
    holomorphic linear change g(z) = Id - sum_j (d_j h(0))^T z_j removes the
    first-order part; the frame change acts by h -> g^T h conj(g)."""
    h0 = np.asarray(h_fn(np.zeros(n, complex)), complex)
    check_positive(h0, "bundle metric at p")
    w, V = np.linalg.eigh(h0)
    C = V @ np.diag(w ** -0.5) @ V.conj().T   # C* h0 C = Id for C = h0^(-1/2)

    def h_const(z):
        return C.conj().T @ np.asarray(h_fn(z), complex) @ C

    A = [d_z(h_const, np.zeros(n, complex), j, h_step, order) for j in range(n)]

    def h_normal(z):
        z = np.asarray(z, complex)
        g = np.eye(h0.shape[0], dtype=complex)
        for j in range(n):
            g = g - A[j].T * z[j]
        return g.T @ h_const(z) @ np.conj(g)

    return h_normal


# ---------------------------------------------------------------------------
# topological data
# ---------------------------------------------------------------------------

@dataclasses.dataclass(frozen=True)
class TopologicalData:
    """Degree/volume pairings and per-point exceptional corrections."""

    degree: float            # int_X c_1(E) . [omega]^(n-1)
    volume: float            # int_X [omega]^n
    rank: int
    n: int = 2
    weights: tuple = ()      # exceptional weights a_i


def topological_constant(td: TopologicalData, epsilon: float = 0.0) -> float:
    """c = n deg / (m vol), with the epsilon-corrected blowup volume.

    For n = 2 each exceptional divisor subtracts (a_i eps)^2 from the volume
    pairing (self-intersection -1); the degree pairing is unchanged by
    pullback."""
    vol = td.volume
    if epsilon > 0.0:
        if td.n != 2:
            raise DomainError("volume correction implemented for n = 2")
        vol = vol - sum((a * epsilon) ** 2 for a in td.weights)
    if abs(vol) < 1e-300:
        raise DomainError("zero volume pairing")
    return td.n * td.degree / (td.rank * vol)


# ---------------------------------------------------------------------------
# radial profile reductions (drive the glued 1D backend)
# ---------------------------------------------------------------------------
#
# For U(n)-invariant data every (1,0)-form is  p(s) zbar_j / |z|^2,  every
# (0,1)-form is  q(s) z_k / |z|^2  and every (1,1)-form has the two profiles
# (transverse, radial) in the frame spanned by zhat:
#     X[j,k] = xT (delta_jk - zhatbar_j zhat_k)/|z|^2 + xR zhatbar_j zhat_k/|z|^2.
# i Lambda_g X = (n-1) xT / u' + xR / u''  for the radial metric potential u.

def radial_connection_profile(H, dH):
    """a0(s) = conj(H)^-1 conj(H') for a radial Gram profile H(s)."""
    Hb = np.conj(H)
    return np.linalg.solve(Hb, np.conj(dH))


def radial_gauge_profiles(a0, f, df):
    """(b10, b01) profiles of the gauge-transformed connection."""
    finv = np.linalg.inv(f)
    b10 = f @ a0 @ finv - df @ finv
    b01 = finv @ df
    return b10, b01


def radial_ilf(b10, db10, b01, db01, du, d2u, n: int = 2):
    """i Lambda F of the connection with radial profiles (b10, b01).

    F has transverse profile (b01 - b10) and radial profile
    (b01' - b10' + [b10, b01])."""
    xT = b01 - b10
    xR = db01 - db10 + b10 @ b01 - b01 @ b10
    return (n - 1) * xT / du + xR / d2u
