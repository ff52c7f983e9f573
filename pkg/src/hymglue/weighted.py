"""Weighted Holder and Sobolev norms, weight functions and indicial roots.

The weighted Holder norm rescales a section onto the reference annulus
B_2 \\ B_1 at every dyadic scale: the sup over continuous scales is
discretized on the ladder r = 2^-j intersected with the admissible range,
augmented by the anchored scales {r_eps, 2 r_eps} whenever a gluing scale is
present (the neck-supported suprema are attained there).  Holder seminorms
are estimated as the sup over all sampled node pairs with separation inside
[local grid step, annulus diameter / 2]; that pair sup is the compiled
kernel.  All ``*_norm`` functions are pure reductions over immutable fields.
"""

from __future__ import annotations

import dataclasses
import math

import numpy as np

from . import fields as F
from .geometry import CutoffProfile, DomainError
from .kernels import holder_pair_sup

VOL_S3 = 2.0 * np.pi**2


# ---------------------------------------------------------------------------
# spec, weights, indicial roots
# ---------------------------------------------------------------------------

SPACES = ("X_p", "Bl0Cn", "BlpX", "annulus")


@dataclasses.dataclass(frozen=True)
class WeightedNormSpec:
    """Which weighted space a norm is measured in."""

    k: int
    alpha: float
    delta: float
    epsilon: float | None = None
    space: str = "X_p"
    n: int = 2

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise DomainError("alpha must lie in (0,1)")
        if self.k < 0 or self.k > 4:
            raise DomainError("derivative count limited to 0 <= k <= 4")
        if self.space not in SPACES:
            raise DomainError(f"unknown space {self.space!r}")
        if self.space == "BlpX" and self.epsilon is None:
            raise DomainError("norms on the blowup need epsilon")


def rho_weight(r, profile: CutoffProfile | None = None):
    """Punctured-manifold weight: equals r on B_1, 2 outside B_2, smooth between."""
    profile = profile or CutoffProfile()
    r = np.asarray(r, dtype=float)
    g = profile(r)
    out = (1.0 - g) * r + g * 2.0
    return out if out.shape else float(out)


def varrho_eps(r, epsilon: float):
    """Blowup weight: 1 outside B_1, |z| on the annulus, epsilon inside B_eps."""
    r = np.asarray(r, dtype=float)
    out = np.clip(r, epsilon, 1.0)
    return out if out.shape else float(out)


def indicial_roots(n: int, window: tuple[int, int]) -> list[int]:
    """All integers in [window] outside the open interval (2-2n, 0)."""
    if n < 2:
        raise DomainError("indicial roots defined for n >= 2")
    lo, hi = int(window[0]), int(window[1])
    gap_lo = 2 - 2 * n
    return [j for j in range(lo, hi + 1) if not (gap_lo < j < 0)]


def inclusion_predicate(delta: float, delta_prime: float, n: int) -> bool:
    """Holder-into-Sobolev inclusion holds iff delta' < 2 delta + 2n."""
    return delta_prime < 2.0 * delta + 2.0 * n


# ---------------------------------------------------------------------------
# scaled sections and per-annulus Holder data
# ---------------------------------------------------------------------------

def scaled_section(field, r: float, delta: float):
    """The rescaled field s_r^delta(z) = r^(-delta) s(r z)."""
    if r <= 0:
        raise DomainError("scaling radius must be positive")
    return field.scale_pullback(r, delta)


def _cloud_for(field, r_lo, r_hi, resolution):
    if isinstance(field, F.RadialField):
        return F.radial_cloud(r_lo, r_hi, num=resolution.get("n_r_radial", 33))
    return F.annulus_cloud(r_lo, r_hi, n_r=resolution.get("n_r", 7),
                           n_theta=resolution.get("n_theta", 4),
                           n_phi=resolution.get("n_phi", 6))


def annulus_scaled_norm(field, r: float, k: int, alpha: float, delta: float,
                        resolution: dict | None = None,
                        r_hi_factor: float = 2.0) -> float:
    """C^{k,alpha} norm of s_r^delta over the reference annulus.

    Evaluated on the physical annulus [r, 2r]; the rescaling is folded into
    the r-power weights (exact, by homogeneity of the scaling map).
    """
    resolution = resolution or {}
    cloud = _cloud_for(field, r, r_hi_factor * r, resolution)
    stacks = field.deriv_stack(cloud, k)
    total = 0.0
    for j in range(k + 1):
        total += r ** (j - delta) * float(F.frob_norms(stacks[j]).max())
    if alpha > 0 and len(cloud.radii) > 1:
        semi = holder_pair_sup(stacks[k], cloud.pts, alpha,
                               cloud.min_sep, cloud.max_sep)
        total += r ** (k + alpha - delta) * semi
    return total


def plain_holder_norm(field, r_lo: float, r_hi: float, k: int, alpha: float,
                      resolution: dict | None = None) -> float:
    """Unweighted C^{k,alpha} norm sampled on the annulus [r_lo, r_hi]."""
    resolution = resolution or {}
    cloud = _cloud_for(field, r_lo, r_hi, resolution)
    stacks = field.deriv_stack(cloud, k)
    total = sum(float(F.frob_norms(stacks[j]).max()) for j in range(k + 1))
    if alpha > 0 and len(cloud.radii) > 1:
        total += holder_pair_sup(stacks[k], cloud.pts, alpha,
                                 cloud.min_sep, cloud.max_sep)
    return total


def dyadic_ladder(r_min: float, r_max: float = 1.0, anchors: tuple = (),
                  exclude: tuple | None = None) -> list[float]:
    """Dyadic scales 2^-j in (r_min, r_max], plus anchors, descending.

    ``anchors`` adds scales tied to the gluing radius so neck-supported
    suprema are sampled at fixed multiples of r_eps for every epsilon;
    ``exclude`` drops plain dyadic rungs inside an interval (the anchored
    rungs cover it), which keeps the discretized sup scale-covariant instead
    of wobbling with how the dyadics straddle the neck.  Both produce
    equivalent norms (bounded rung-gap ratios).
    """
    if r_min >= r_max:
        raise DomainError("empty ladder: r_min >= r_max")
    rungs = set()
    j = max(0, int(math.floor(-math.log2(r_max))))
    while 2.0 ** (-j) > r_max + 1e-15:
        j += 1
    while 2.0 ** (-j) >= r_min:
        r = 2.0 ** (-j)
        if exclude is None or not (exclude[0] < r < exclude[1]):
            rungs.add(r)
        j += 1
    for a in anchors:
        if r_min <= a <= r_max:
            rungs.add(float(a))
    if not rungs:
        raise DomainError("insufficient grid: dyadic ladder has no support")
    return sorted(rungs, reverse=True)


# ---------------------------------------------------------------------------
# the weighted Holder norms
# ---------------------------------------------------------------------------

def weighted_holder_norm(field, spec: WeightedNormSpec,
                         r_min: float | None = None,
                         anchors: tuple = (),
                         exclude: tuple | None = None,
                         resolution: dict | None = None,
                         zeta_floor: float = 0.05,
                         return_breakdown: bool = False):
    """Weighted norm per the three-region definition with a dyadic ladder.

    * X_p:    outer C^{k,alpha} on B_2\\B_1  +  sup over r in (r_min, 1).
    * Bl0Cn:  C^{k,alpha} on the unit ball  +  sup over r in (1, r_max).
    * BlpX:   outer term + sup over r in (eps, 1) + eps-scaled inner term.

    ``r_min``/``anchors`` control the ladder; for BlpX the ladder is clipped
    at epsilon and anchored at the gluing scales passed in ``anchors``.
    """
    k, alpha, delta = spec.k, spec.alpha, spec.delta
    breakdown = {}

    def rung_vals(rungs):
        return {r: annulus_scaled_norm(field, r, k, alpha, delta, resolution)
                for r in rungs}

    if spec.space == "annulus":
        rungs = dyadic_ladder(r_min or 2.0 ** -6, 1.0, anchors, exclude)
        vals = rung_vals(rungs)
        total = max(vals.values())
        breakdown["ladder"] = vals
    elif spec.space == "X_p":
        outer = plain_holder_norm(field, 1.0, 2.0, k, alpha, resolution)
        rungs = dyadic_ladder(r_min or 2.0 ** -8, 1.0, anchors, exclude)
        vals = rung_vals(rungs)
        total = outer + max(vals.values())
        breakdown.update(outer=outer, ladder=vals)
    elif spec.space == "Bl0Cn":
        inner = plain_holder_norm(field, zeta_floor, 1.0, k, alpha, resolution)
        r_max = r_min or 2.0 ** 6   # here r_min doubles as the outer extent
        rungs = sorted({2.0 ** j for j in range(0, int(math.log2(r_max)) + 1)}
                       | {a for a in anchors if a >= 1.0})
        vals = rung_vals(rungs)
        total = inner + max(vals.values())
        breakdown.update(inner=inner, ladder=vals)
    else:  # BlpX
        eps = spec.epsilon
        outer = plain_holder_norm(field, 1.0, 2.0, k, alpha, resolution)
        rungs = dyadic_ladder(eps, 1.0, anchors, exclude)
        vals = rung_vals(rungs)
        inner = eps ** -delta * plain_holder_norm(
            field, zeta_floor * eps, eps, k, alpha, resolution)
        # derivative scaling of the inner rescaled section
        inner_scaled = 0.0
        cloud = _cloud_for(field, zeta_floor * eps, eps, resolution or {})
        stacks = field.deriv_stack(cloud, k)
        for j in range(k + 1):
            inner_scaled += eps ** (j - delta) * float(F.frob_norms(stacks[j]).max())
        if alpha > 0:
            inner_scaled += eps ** (k + alpha - delta) * holder_pair_sup(
                stacks[k], cloud.pts, alpha, cloud.min_sep, cloud.max_sep)
        inner = inner_scaled
        total = outer + max(vals.values()) + inner
        breakdown.update(outer=outer, ladder=vals, inner=inner)

    if return_breakdown:
        return total, breakdown
    return total


def split_norm_equivalence(field, spec: WeightedNormSpec, params,
                           resolution: dict | None = None):
    """Three-region norm vs the cutoff-split norm and their ratio.

    The split norm is |gamma_1 s|_{X_p} + eps^-delta |gamma_2 s|_{Bl0Cn},
    with the Bl0Cn factor measured in zeta-coordinates.
    """
    if spec.space != "BlpX":
        raise DomainError("split equivalence is a BlpX statement")
    if not isinstance(field, F.RadialField):
        raise DomainError("split comparison implemented for radial fields")
    eps, r_eps = params.epsilon, params.r_eps
    norm_a = weighted_holder_norm(field, spec, anchors=(r_eps, 2 * r_eps),
                                  resolution=resolution)

    prof = params.profile
    g1 = field.multiplied(lambda s: prof(np.exp(0.5 * s) / r_eps))
    g2 = field.multiplied(lambda s: 1.0 - prof(np.exp(0.5 * s) / r_eps))
    spec_xp = dataclasses.replace(spec, space="X_p", epsilon=None)
    # gamma_1 s vanishes below r_eps: ladder down to r_eps is enough
    na = weighted_holder_norm(g1, spec_xp, r_min=r_eps / 2,
                              anchors=(r_eps, 2 * r_eps), resolution=resolution)
    # gamma_2 s lives on |z| <= 2 r_eps; in zeta coordinates that is
    # |zeta| <= 2 r_eps / eps.  s(zeta-chart) = s(eps * zeta).
    g2_zeta = F.RadialField(g2.s_grid - 2.0 * np.log(eps), g2.values, deg=g2.deg)
    spec_bl = dataclasses.replace(spec, space="Bl0Cn", epsilon=None)
    nb = weighted_holder_norm(g2_zeta, spec_bl, r_min=max(2.0, 2 * r_eps / eps),
                              resolution=resolution)
    norm_b = na + eps ** (-spec.delta) * nb
    return norm_a, norm_b, norm_a / norm_b


def weight_comparison_check(field, delta: float, delta_prime: float,
                            epsilon: float, k: int = 0, alpha: float = 0.5,
                            resolution: dict | None = None):
    """Eq-style weight comparison: |s|_d <= |s|_d' <= eps^(d-d') |s|_d."""
    if delta > delta_prime:
        raise DomainError("weight comparison requires delta <= delta_prime")
    spec = WeightedNormSpec(k=k, alpha=alpha, delta=delta, epsilon=epsilon,
                            space="BlpX")
    spec_p = dataclasses.replace(spec, delta=delta_prime)
    lhs = weighted_holder_norm(field, spec, resolution=resolution)
    mid = weighted_holder_norm(field, spec_p, resolution=resolution)
    rhs = epsilon ** (delta - delta_prime) * lhs
    tol = 1e-12 * max(1.0, lhs, mid, rhs)
    ok = (lhs <= mid + tol) and (mid <= rhs + tol)
    return lhs, mid, rhs, bool(ok)


# ---------------------------------------------------------------------------
# weighted Sobolev norms (on X_p)
# ---------------------------------------------------------------------------

def weighted_sobolev_norm(field: F.RadialField, k: int, delta: float,
                          pot, s_lo: float, s_hi: float,
                          num: int = 2000) -> float:
    """W^{2,k}_delta norm of a radial field by quadrature on the log grid.

    Measure: omega^n / (n! 2^n) = det(g) dV_flat, i.e. pi^2 u' u'' ds for a
    radial metric potential u on C^2.  Gradients use the radial metric; the
    derivative count is capped at 2.
    """
    if k > 2:
        raise DomainError("Sobolev derivative count capped at 2")
    s = np.linspace(s_lo, s_hi, num)
    rho = np.exp(0.5 * s)
    measure = pot.du(s) ** (pot.n - 1) * pot.d2u(s)
    total = 0.0
    for j in range(k + 1):
        P = field.profile(s, nu=j)
        mag2 = np.einsum("nij,nij->n", P, P.conj()).real
        if j == 1:
            # |grad S|^2 = 2 |dS|^2_g = 2 S'(s)^2 / u''  for radial S
            mag2 = 2.0 * mag2 / pot.d2u(s)
        elif j == 2:
            # second-derivative surrogate: radial Hessian component
            mag2 = 4.0 * mag2 / pot.d2u(s) ** 2
        integ = mag2 * rho_weight(rho) ** (-(delta - j)) * measure
        total += float(np.trapz(integ, s)) * VOL_S3 / 2.0
    return math.sqrt(total)


def radial_l2_norm(profile_sq, delta: float, pot, s_lo: float, s_hi: float,
                   num: int = 4000) -> float:
    """L^2_delta quadrature of a radial |s|^2 profile given as fn(s)."""
    s = np.linspace(s_lo, s_hi, num)
    rho = np.exp(0.5 * s)
    integ = profile_sq(s) * rho_weight(rho) ** (-delta) \
        * pot.du(s) ** (pot.n - 1) * pot.d2u(s)
    return math.sqrt(float(np.trapz(integ, s)) * VOL_S3 / 2.0)
