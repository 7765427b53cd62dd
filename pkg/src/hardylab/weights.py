"""Admissible weight pairs for the two-weight Hardy inequality.

All weights are radial profiles ``omega(r)``.  Constructors return an
immutable :class:`WeightPair`; the ``check_*`` audits return
:class:`CheckResult` objects that carry the sampled evidence they were
decided on.  A liminf can only be sampled, never certified, so every verdict
here is evidence rather than proof.
"""
from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import integrate as sp_integrate

from .discretization import DomainError

log = logging.getLogger(__name__)

__all__ = [
    "WeightPair",
    "SuperharmonicProfile",
    "CheckResult",
    "EvidenceRow",
    "AdmissibilityReport",
    "make_power_weights",
    "make_confining_weights",
    "make_superharmonic_weights",
    "make_identity_weights",
    "make_exp_singular_weights",
    "derive_weights_from_profile",
    "hardy_constant",
    "check_bp",
    "check_h_alpha",
    "check_h_infinity",
    "check_positivity",
    "estimate_sigma0",
    "radial_p_laplacian",
    "power_profile",
]

FAMILIES = ("power", "confining", "superharmonic", "custom")

# liminf sampling ladder
N_OFFSETS = 12
OFFSET_RATIO = 0.5
RATIO_FLOOR = 1e-8
SLOPE_TOL = 0.05
# B_p Cauchy tolerance across the last three shrink levels
BP_RTOL = 1e-6


@dataclass(frozen=True)
class WeightPair:
    omega1: Callable
    omega2: Callable
    p: float
    dim_N: int
    claimed_K: Optional[float] = None
    validity: tuple = (0.0, math.inf)
    family_tag: str = "custom"
    optimal: bool = False
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.family_tag not in FAMILIES:
            raise DomainError(f"unknown family_tag {self.family_tag!r}")

    @property
    def empty(self) -> bool:
        lo, hi = self.validity
        return not (hi > lo)

    def w1(self, r):
        return np.asarray(self.omega1(np.asarray(r, dtype=float)), dtype=float)

    def w2(self, r):
        return np.asarray(self.omega2(np.asarray(r, dtype=float)), dtype=float)


@dataclass(frozen=True)
class SuperharmonicProfile:
    """A nonnegative radial ``v`` with caller-supplied ``v'`` and ``Delta_p v``."""

    v: Callable
    grad_v: Callable
    p_laplacian_v: Callable
    dim_N: int
    p: float = 2.0

    def consistency_error(self, radii, rel_step: float = 1e-4) -> float:
        """Max mismatch between ``p_laplacian_v`` and a central difference of
        ``r**(N-1) |v'|**(p-2) v'``, relative to the larger of the operator
        and ``|flux| / r**N``."""
        r = np.asarray(radii, dtype=float)
        h = rel_step * r

        def flux(x):
            g = np.asarray(self.grad_v(x), dtype=float)
            return x ** (self.dim_N - 1) * np.abs(g) ** (self.p - 2) * g

        fd = (flux(r + h) - flux(r - h)) / (2 * h) * r ** (1 - self.dim_N)
        given = np.asarray(self.p_laplacian_v(r), dtype=float)
        # flux / r**N keeps the scale meaningful when Delta_p v vanishes
        natural = np.abs(flux(r)) * r ** (-self.dim_N)
        scale = max(np.abs(given).max(), np.abs(fd).max(), natural.max()) or 1.0
        return float(np.max(np.abs(fd - given)) / scale)


def radial_p_laplacian(grad_v: Callable, dgrad_v: Callable, p: float, dim_N: int) -> Callable:
    """``r**(1-N) (r**(N-1) |v'|**(p-2) v')'`` from ``v'`` and ``v''``."""

    def lap(r):
        r = np.asarray(r, dtype=float)
        g = np.asarray(grad_v(r), dtype=float)
        gg = np.asarray(dgrad_v(r), dtype=float)
        ag = np.abs(g)
        return (p - 1) * ag ** (p - 2) * gg + (dim_N - 1) / r * ag ** (p - 2) * g

    return lap


def power_profile(exponent: float, p: float, dim_N: int, scale: float = 1.0) -> SuperharmonicProfile:
    """``v(r) = scale * r**exponent`` with exact derivatives."""
    a, c = exponent, scale
    gv = lambda r: c * a * np.asarray(r, dtype=float) ** (a - 1)
    ggv = lambda r: c * a * (a - 1) * np.asarray(r, dtype=float) ** (a - 2)
    return SuperharmonicProfile(
        v=lambda r: c * np.asarray(r, dtype=float) ** a,
        grad_v=gv,
        p_laplacian_v=radial_p_laplacian(gv, ggv, p, dim_N),
        dim_N=dim_N,
        p=p,
    )


def _check_p(p):
    if not (p >= 2):
        raise DomainError(f"p must be >= 2, got {p}")


def make_power_weights(gamma: float, p: float, dim_N: int) -> WeightPair:
    """``omega1 = r**(gamma-p)``, ``omega2 = r**gamma``, optimal K = ((p-N-gamma)/p)**p."""
    _check_p(p)
    if not dim_N > p:
        raise DomainError(f"power family needs dim_N > p, got N={dim_N}, p={p}")
    if not gamma < p - dim_N:
        raise DomainError(f"power family needs gamma < p - N = {p - dim_N}, got gamma={gamma}")
    K = ((p - dim_N - gamma) / p) ** p
    return WeightPair(
        omega1=lambda r: np.asarray(r, dtype=float) ** (gamma - p),
        omega2=lambda r: np.asarray(r, dtype=float) ** gamma,
        p=p,
        dim_N=dim_N,
        claimed_K=K,
        validity=(0.0, math.inf),
        family_tag="power",
        optimal=True,
        params={"gamma": gamma},
    )


def make_confining_weights(gamma: float, p: float, dim_N: int) -> WeightPair:
    """Weights ``(1 + r**(p/(p-1)))**((p-1)(gamma-1))`` and ``...**((p-1) gamma)``."""
    _check_p(p)
    if not gamma > 1:
        raise DomainError(f"confining family needs gamma > 1, got gamma={gamma}")
    q = p / (p - 1)
    K = dim_N * (p * (gamma - 1) / (p - 1)) ** (p - 1)
    optimal = gamma >= dim_N + 1 - dim_N / p
    return WeightPair(
        omega1=lambda r: (1.0 + np.asarray(r, dtype=float) ** q) ** ((p - 1) * (gamma - 1)),
        omega2=lambda r: (1.0 + np.asarray(r, dtype=float) ** q) ** ((p - 1) * gamma),
        p=p,
        dim_N=dim_N,
        claimed_K=K,
        validity=(0.0, math.inf),
        family_tag="confining",
        optimal=optimal,
        params={"gamma": gamma},
    )


def make_superharmonic_weights(beta: float, dim_N: int, profile: Optional[SuperharmonicProfile] = None) -> WeightPair:
    """p = 2 pair built from a superharmonic ``u``; claimed K = 3(beta - 3).

    Defaults to the Newtonian profile ``u = r**(2-N)``.
    """
    if not beta > 3:
        raise DomainError(f"superharmonic family needs beta > 3, got beta={beta}")
    if profile is None:
        if dim_N < 3:
            raise DomainError("default superharmonic profile r**(2-N) needs dim_N >= 3")
        profile = power_profile(2.0 - dim_N, 2.0, dim_N)
    if profile.p != 2:
        raise DomainError("superharmonic family is defined for p = 2")
    u, gu = profile.v, profile.grad_v
    return WeightPair(
        omega1=lambda r: np.asarray(u(r), dtype=float) ** (-beta - 1) * np.asarray(gu(r), dtype=float) ** 2,
        omega2=lambda r: np.asarray(u(r), dtype=float) ** (1 - beta),
        p=2.0,
        dim_N=dim_N,
        claimed_K=3.0 * (beta - 3.0),
        validity=(0.0, math.inf),
        family_tag="superharmonic",
        optimal=False,
        params={"beta": beta},
    )


def make_identity_weights(p: float, dim_N: int) -> WeightPair:
    """``omega1 = omega2 = 1``; no closed-form constant (it depends on the domain)."""
    _check_p(p)
    one = lambda r: np.ones_like(np.asarray(r, dtype=float))
    return WeightPair(one, one, p, dim_N, None, (0.0, math.inf), "custom", params={"name": "identity"})


def make_exp_singular_weights(gamma: float, p: float, dim_N: int) -> WeightPair:
    """``omega = exp(-1/r) r**gamma`` for both weights: fails B_p at the origin."""
    _check_p(p)
    w = lambda r: np.exp(-1.0 / np.asarray(r, dtype=float)) * np.asarray(r, dtype=float) ** gamma
    return WeightPair(w, w, p, dim_N, None, (0.0, math.inf), "custom", params={"name": "exp-singular", "gamma": gamma})


def hardy_constant(beta: float, sigma: float, p: float) -> float:
    """``((beta - sigma)/(p - 1))**(p - 1)``, defined for beta > min(0, sigma).

    ``beta <= sigma`` is rejected as well: the constant would not be positive.
    """
    if not p > 1:
        raise DomainError(f"p must be > 1, got {p}")
    if not beta > min(0.0, sigma):
        raise DomainError(f"need beta > min(0, sigma); got beta={beta}, sigma={sigma}")
    if not beta > sigma:
        raise DomainError(f"need beta > sigma for a positive constant; got beta={beta}, sigma={sigma}")
    return ((beta - sigma) / (p - 1)) ** (p - 1)


def derive_weights_from_profile(
    prof: SuperharmonicProfile,
    beta: float,
    sigma: float,
    p: float,
    validity: tuple = (0.0, math.inf),
    sample_radii: Optional[Sequence[float]] = None,
    tol: float = 0.0,
) -> WeightPair:
    """Pair generated by ``v``::

        omega1 = (-Delta_p v * v + sigma |v'|**p) * v**(-beta-1)   on {v > 0}
        omega2 = v**(p-beta-1)                                    on {v' != 0}

    ``omega1`` is sampled on ``sample_radii`` (default: 200 log-spaced points in
    ``validity``); a negative sample means ``sigma < sigma_0`` and is an error.
    A profile with ``v' == 0`` at every sample has empty validity and no
    claimed constant.
    """
    if not beta > min(0.0, sigma):
        raise DomainError(f"need beta > min(0, sigma); got beta={beta}, sigma={sigma}")
    if prof.p != p:
        raise DomainError(f"profile was built for p={prof.p}, not p={p}")

    def omega1(r):
        r = np.asarray(r, dtype=float)
        v = np.asarray(prof.v(r), dtype=float) * np.ones_like(r)
        g = np.asarray(prof.grad_v(r), dtype=float) * np.ones_like(r)
        lap = np.asarray(prof.p_laplacian_v(r), dtype=float) * np.ones_like(r)
        out = np.zeros_like(r)
        pos = v > 0
        out[pos] = (-lap[pos] * v[pos] + sigma * np.abs(g[pos]) ** p) * v[pos] ** (-beta - 1)
        return out

    def omega2(r):
        r = np.asarray(r, dtype=float)
        v = np.asarray(prof.v(r), dtype=float) * np.ones_like(r)
        g = np.asarray(prof.grad_v(r), dtype=float) * np.ones_like(r)
        out = np.zeros_like(r)
        nz = (g != 0) & (v > 0)
        out[nz] = v[nz] ** (p - beta - 1)
        return out

    lo, hi = validity
    if sample_radii is None:
        a = lo if lo > 0 else 1e-3
        b = hi if math.isfinite(hi) else max(1e3, 10 * a)
        sample_radii = np.geomspace(a, b, 200)
    r = np.asarray(sample_radii, dtype=float)
    g = np.asarray(prof.grad_v(r), dtype=float) * np.ones_like(r)
    params = {"beta": beta, "sigma": sigma}
    if np.all(g == 0):
        return WeightPair(omega1, omega2, p, prof.dim_N, None, (0.0, 0.0), "superharmonic", params=params)
    w1 = omega1(r)
    if np.any(w1 < -tol):
        i = int(np.argmin(w1))
        raise DomainError(f"omega1 < 0 at r={r[i]!r} (value {w1[i]:.3e}); sigma is below sigma_0")
    K = hardy_constant(beta, sigma, p)
    return WeightPair(omega1, omega2, p, prof.dim_N, K, validity, "superharmonic", params=params)


def estimate_sigma0(prof: SuperharmonicProfile, p: float, grid) -> float:
    """Smallest sigma with ``-Delta_p v * v + sigma |v'|**p >= 0`` on the grid.

    Points with ``v <= 0`` are outside the constraint set.  Where ``v' == 0``
    no sigma helps: such points are skipped when ``Delta_p v * v <= 0`` and
    force ``+inf`` otherwise.
    """
    r = np.asarray(grid, dtype=float)
    v = np.asarray(prof.v(r), dtype=float) * np.ones_like(r)
    g = np.abs(np.asarray(prof.grad_v(r), dtype=float)) * np.ones_like(r)
    lap = np.asarray(prof.p_laplacian_v(r), dtype=float) * np.ones_like(r)
    pos = v > 0
    if not pos.any():
        raise DomainError("grid has no point with v > 0")
    num = lap[pos] * v[pos]
    den = g[pos] ** p
    flat = den == 0
    if np.any(flat & (num > 0)):
        log.warning("v' = 0 with Delta_p v * v > 0 on the grid: sigma_0 = +inf")
        return math.inf
    ok = ~flat
    if not ok.any():
        raise DomainError("no grid point with v > 0 and v' != 0")
    return float(np.max(num[ok] / den[ok]))


@dataclass(frozen=True)
class EvidenceRow:
    check_name: str
    probe: float
    level: float
    value: float
    verdict: str


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: Optional[bool]
    evidence: tuple = ()
    message: str = ""

    @property
    def verdict(self) -> str:
        if self.passed is None:
            return "not-applicable"
        return "pass" if self.passed else "fail"


def _tail_slope(x, y, k: int = 4) -> float:
    lx = np.log(np.asarray(x[-k:], dtype=float))
    ly = np.log(np.asarray(y[-k:], dtype=float))
    return float(np.polyfit(lx, ly, 1)[0])


def _pieces(a: float, b: float, toward: str, n: int = 24):
    """Split ``[a, b]`` geometrically toward one end for singular integrands."""
    if toward == "left":
        t = np.concatenate(([0.0], np.geomspace(1e-14, 1.0, n)))
        return a + (b - a) * t
    t = np.concatenate(([0.0], np.geomspace(1e-14, 1.0, n)))
    return (b - (b - a) * t)[::-1]


def _safe_quad(f, a: float, b: float, toward: str) -> float:
    total = 0.0
    edges = _pieces(a, b, toward)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        with np.errstate(all="ignore"):
            for lo, hi in zip(edges[:-1], edges[1:]):
                if hi <= lo:
                    continue
                val, _ = sp_integrate.quad(lambda x: float(f(x)), lo, hi, limit=200, epsabs=0.0, epsrel=1e-12)
                total += val
                if not math.isfinite(total):
                    return math.inf
    return total


def check_bp(weight: Callable, p: float, probes: Sequence[float], shrink_factors: Sequence[float],
             dim_N: int = 1, measure: str = "radial", validity: tuple = (0.0, math.inf),
             name: str = "bp") -> CheckResult:
    """Local integrability of ``weight**(-1/(p-1))`` near each probe.

    Around probe ``z`` the outer neighborhood is ``(z/2, 3z/2)`` (``(0, 1)`` at
    the origin) intersected with ``validity``.  For each shrink factor ``s``
    a hole of relative size ``s`` around ``z`` is excised and the remaining
    integral is computed; the probe passes when every integral is finite and
    the last three agree to a relative Cauchy tolerance.
    """
    if not p > 1:
        raise DomainError(f"p must be > 1, got {p}")
    s = np.asarray(shrink_factors, dtype=float)
    if s.size < 3 or np.any(s <= 0) or np.any(np.diff(s) >= 0):
        raise DomainError("shrink_factors must be >= 3 strictly decreasing positive numbers")
    lo_v, hi_v = validity
    expo = -1.0 / (p - 1)

    def dens(r):
        return r ** (dim_N - 1) if measure == "radial" else 1.0

    def integrand(r):
        w = float(np.asarray(weight(np.asarray(r, dtype=float))))
        if w <= 0.0:
            return math.inf
        return w**expo * dens(r)

    rows, all_ok = [], True
    for z in probes:
        z = float(z)
        if z == 0.0:
            a_out, b_out = 0.0, min(1.0, hi_v)
        else:
            a_out, b_out = max(0.5 * z, lo_v), min(1.5 * z, hi_v)
        vals = []
        for sk in s:
            if z == 0.0:
                hole = (0.0, sk * b_out)
            else:
                half = sk * 0.5 * z
                hole = (z - half, z + half)
            total = 0.0
            if hole[0] > a_out:
                total += _safe_quad(integrand, a_out, hole[0], "right")
            if b_out > hole[1]:
                total += _safe_quad(integrand, hole[1], b_out, "left")
            vals.append(total)
        finite = all(math.isfinite(v) for v in vals)
        if finite:
            last = np.asarray(vals[-3:])
            ref = max(abs(last[-1]), 1e-300)
            converged = bool(np.max(np.abs(np.diff(last))) <= BP_RTOL * ref)
        else:
            converged = False
        ok = finite and converged
        all_ok &= ok
        for sk, v in zip(s, vals):
            rows.append(EvidenceRow(name, z, float(sk), float(v), "pass" if ok else "fail"))
    return CheckResult(name, all_ok, tuple(rows))


def check_h_alpha(weight: Callable, alpha: float, p: float, probes: Sequence[float],
                  validity: tuple = (0.0, math.inf), first_offset: Optional[float] = None,
                  name: str = "h_alpha") -> CheckResult:
    """Sampled ``liminf_{x->z} weight(x) / |x - z|**alpha`` at each probe.

    Offsets ``d_j = d_0 * 0.5**j`` (12 levels) are taken on every side of
    ``z`` that stays inside ``validity``.  A probe passes when all ratios
    exceed 1e-8 and the log-log slope of the tail does not point to zero.
    ``alpha = 0`` is accepted for weights bounded below on compacts.
    """
    if not (0.0 <= alpha < p):
        raise DomainError(f"need 0 <= alpha < p, got alpha={alpha}, p={p}")
    lo_v, hi_v = validity
    rows, all_ok, msgs = [], True, []
    for z in probes:
        z = float(z)
        d0 = first_offset if first_offset is not None else (0.25 * z if z > 0 else 0.25)
        offsets = d0 * OFFSET_RATIO ** np.arange(N_OFFSETS)
        sides = [1.0] + ([-1.0] if z - offsets[0] > lo_v else [])
        ok_z, samples = True, []
        for sgn in sides:
            x = z + sgn * offsets
            keep = (x > lo_v) & (x < hi_v)
            d = offsets[keep]
            ratios = np.asarray(weight(x[keep]), dtype=float) / d**alpha
            samples.extend(zip(d, ratios))
            if ratios.size < 4 or not np.all(np.isfinite(ratios)):
                ok_z = False
                msgs.append(f"z={z}: non-finite or too few samples")
                continue
            if np.min(ratios) < RATIO_FLOOR:
                ok_z = False
                continue
            slope = _tail_slope(d, ratios)
            tail = np.diff(ratios[-4:])
            if np.any(tail > 0) and np.any(tail < 0):
                msgs.append(f"z={z}: non-monotone tail")
                ok_z = ok_z and slope <= 0.0
            elif slope > SLOPE_TOL:
                ok_z = False
        verdict = "pass" if ok_z else "fail"
        rows.extend(EvidenceRow(name, z, float(dj), float(rj), verdict) for dj, rj in samples)
        all_ok &= ok_z
    if msgs:
        log.warning("%s: %s", name, "; ".join(msgs))
    return CheckResult(name, all_ok, tuple(rows), "; ".join(msgs))


def check_h_infinity(weight: Callable, beta_embed: float, p: float, dim_N: int, sample_radii: Sequence[float],
                     name: str = "h_infinity") -> CheckResult:
    """Sampled ``liminf_{r->inf} weight(r) * r**beta_embed`` on growing radii."""
    threshold = p + dim_N * (p - 2) / 2
    if not beta_embed > threshold:
        raise DomainError(f"need beta_embed > p + N(p-2)/2 = {threshold}, got {beta_embed}")
    r = np.asarray(sample_radii, dtype=float)
    if r.size < 4 or np.any(np.diff(r) <= 0):
        raise DomainError("sample_radii must be >= 4 strictly increasing radii")
    with np.errstate(over="ignore", invalid="ignore"):
        ratios = np.asarray(weight(r), dtype=float) * r**beta_embed
    finite = np.isfinite(ratios)
    if np.any(np.isnan(ratios)) or np.any(ratios < RATIO_FLOOR):
        ok = False
    elif finite.sum() >= 4:
        ok = _tail_slope(r[finite], ratios[finite]) >= -SLOPE_TOL
    else:
        ok = True  # ratios overflow to +inf
    rows = tuple(EvidenceRow(name, math.inf, float(ri), float(v), "pass" if ok else "fail") for ri, v in zip(r, ratios))
    return CheckResult(name, ok, rows)


def check_positivity(pair: WeightPair, r_lo: float, r_hi: float, n: int = 400,
                     name: str = "positivity_on_compacts") -> CheckResult:
    """``omega1 >= 0`` and ``omega2 > 0`` on log-spaced samples of ``[r_lo, r_hi]``."""
    r = np.geomspace(r_lo, r_hi, n)
    w1, w2 = pair.w1(r), pair.w2(r)
    ok = bool(np.all(np.isfinite(w1)) and np.all(np.isfinite(w2)) and np.all(w1 >= 0) and np.all(w2 > 0))
    i = int(np.argmin(w2))
    rows = (
        EvidenceRow(name, float(r[int(np.argmin(w1))]), 1.0, float(np.min(w1)), "pass" if ok else "fail"),
        EvidenceRow(name, float(r[i]), 2.0, float(w2[i]), "pass" if ok else "fail"),
    )
    return CheckResult(name, ok, rows)


@dataclass(frozen=True)
class AdmissibilityReport:
    bp_omega1: CheckResult
    bp_omega2: CheckResult
    h_alpha: CheckResult
    h_infinity: CheckResult
    positivity_on_compacts: CheckResult

    def checks(self):
        return (self.bp_omega1, self.bp_omega2, self.h_alpha, self.h_infinity, self.positivity_on_compacts)

    @property
    def passed(self) -> bool:
        return all(c.passed is not False for c in self.checks())

    def rows(self):
        for c in self.checks():
            if c.passed is None:
                yield EvidenceRow(c.name, math.nan, math.nan, math.nan, "not-applicable")
            else:
                yield from c.evidence
