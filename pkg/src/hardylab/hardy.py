"""Variational checks of the two-weight Hardy inequality.

The best constant for a pair is the infimum of

    R(xi) = int omega2 |xi'|^p dmu / int omega1 |xi|^p dmu

over the discrete space.  For p = 2 this is the smallest eigenvalue of the
pencil (stiffness, weighted mass) and is found by inverse iteration; for
p > 2 an iteratively reweighted fixed-point scheme is used.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np
import scipy.linalg as sl

from .discretization import Basis, DomainError, QuadratureRule, RadialDomain, build_basis, eval_field
from .weights import WeightPair

log = logging.getLogger(__name__)

TOL_VIOLATION = 1e-8


@dataclass(frozen=True)
class DiscConfig:
    r_lo: float
    r_hi: float
    dim_N: int = 3
    measure: str = "radial"
    n_cells: int = 400
    grading: str = "geometric"
    quad_order: int = 4

    def domain(self, r_lo=None, r_hi=None) -> RadialDomain:
        return RadialDomain(self.r_lo if r_lo is None else r_lo, self.r_hi if r_hi is None else r_hi,
                            self.dim_N, self.measure)


@dataclass(frozen=True)
class OptConfig:
    ladder: Optional[tuple] = None  # ((n_cells, r_lo, r_hi), ...); None -> default_ladder
    multistart: int = 5
    tol: float = 1e-9
    max_iter: int = 500
    seed: int = 0


def default_ladder(disc: DiscConfig) -> tuple:
    """Three steps that relax truncation and refine toward ``disc``.

    ``(n/4, 100 r_lo, r_hi) -> (n/2, 10 r_lo, r_hi) -> (n, r_lo, r_hi)``;
    steps whose inner radius would not fit below ``r_hi`` are dropped.
    """
    steps = []
    for div, scale in ((4, 100.0), (2, 10.0), (1, 1.0)):
        r_lo = disc.r_lo * scale
        if r_lo < disc.r_hi:
            steps.append((max(2, disc.n_cells // div), r_lo, disc.r_hi))
    return tuple(steps)


@dataclass(frozen=True)
class LadderPoint:
    n_cells: int
    r_lo: float
    r_hi: float
    best_value: float
    iterations: int = 0


@dataclass
class RayleighReport:
    best_value: float
    minimizer: np.ndarray
    refinement_history: List[LadderPoint]
    claimed_K: Optional[float]
    verdict: str
    extrapolated: float = math.nan
    basis: Optional[Basis] = field(default=None, repr=False)
    quad: Optional[QuadratureRule] = field(default=None, repr=False)

    def rows(self):
        """CSV rows: one per ladder point, then the final comparison row."""
        K = self.claimed_K

        def margin(v):
            return (v - K) / K if K else math.nan

        def step_verdict(v):
            if K is None:
                return "inconclusive"
            return "violation" if v < K * (1 - TOL_VIOLATION) else "consistent"

        for pt in self.refinement_history:
            yield (pt.n_cells, pt.r_lo, pt.r_hi, pt.best_value, K, margin(pt.best_value), step_verdict(pt.best_value))
        last = self.refinement_history[-1]
        yield ("extrapolated", last.r_lo, last.r_hi, self.extrapolated, K, margin(self.extrapolated), "")
        yield ("final", last.r_lo, last.r_hi, self.best_value, K, margin(self.best_value), self.verdict)


class _Quotient:
    """Weighted quadrature arrays for one (pair, p, basis) triple."""

    def __init__(self, pair: WeightPair, p: float, basis: Basis, quad: QuadratureRule):
        x = quad.points
        self.p = p
        self.basis = basis
        self.w1 = pair.w1(x) * quad.weights
        self.w2 = pair.w2(x) * quad.weights
        if not (np.all(np.isfinite(self.w1)) and np.all(np.isfinite(self.w2))):
            raise DomainError("weights are not finite at the quadrature points")

    def parts(self, a):
        u, du = eval_field(a, self.basis)
        num = float(np.dot(self.w2, np.abs(du) ** self.p))
        den = float(np.dot(self.w1, np.abs(u) ** self.p))
        return num, den

    def __call__(self, a) -> float:
        num, den = self.parts(a)
        if not den > 0.0:
            raise DomainError("denominator int omega1 |xi|^p vanishes")
        return num / den

    def matrices(self, a=None):
        """Stiffness and mass with |xi'|^(p-2), |xi|^(p-2) frozen at ``a``."""
        B = self.basis
        w1, w2 = self.w1, self.w2
        if a is not None and self.p != 2:
            u, du = eval_field(a, B)
            w2 = w2 * np.abs(du) ** (self.p - 2)
            w1 = w1 * np.abs(u) ** (self.p - 2)
        S = (B.gradients * w2) @ B.gradients.T
        M = (B.values * w1) @ B.values.T
        return 0.5 * (S + S.T), 0.5 * (M + M.T)


def rayleigh_quotient(coeffs, pair: WeightPair, p: float, basis: Basis, quad: QuadratureRule) -> float:
    """``int omega2 |xi'|^p / int omega1 |xi|^p`` for ``xi = sum coeffs_k e_k``."""
    a = np.asarray(coeffs, dtype=float)
    if not np.any(a):
        raise DomainError("coefficient vector is zero")
    return _Quotient(pair, p, basis, quad)(a)


def inverse_iteration(S, M, x0=None, tol: float = 1e-14, max_iter: int = 2000):
    """Smallest eigenpair of ``S x = mu M x`` (S, M symmetric positive definite)."""
    n = S.shape[0]
    lu = sl.lu_factor(S)
    x = np.ones(n) if x0 is None else np.asarray(x0, dtype=float).copy()
    x /= math.sqrt(x @ M @ x)
    mu = (x @ S @ x)
    it = 0
    for it in range(1, max_iter + 1):
        y = sl.lu_solve(lu, M @ x)
        y /= math.sqrt(y @ M @ y)
        mu_new = y @ S @ y
        res = np.linalg.norm(S @ y - mu_new * (M @ y)) / max(np.linalg.norm(S @ y), 1e-300)
        x, done = y, abs(mu_new - mu) <= tol * abs(mu_new) and res < 1e-9
        mu = mu_new
        if done:
            break
    return float(mu), x, it


def _smallest_pair(S, M):
    n = S.shape[0]
    M = M + 1e-14 * np.trace(M) / n * np.eye(n)
    w, v = sl.eigh(S, M, subset_by_index=[0, 0])
    return float(w[0]), v[:, 0]


def _minimize_p(q: _Quotient, starts, tol: float, max_iter: int):
    """Iteratively reweighted descent for p > 2; damped by 0.5 on non-decrease."""
    best_val, best_a, total_it = math.inf, None, 0
    for a in starts:
        a = a / np.linalg.norm(a)
        val = q(a)
        for _ in range(max_iter):
            total_it += 1
            S, M = q.matrices(a)
            _, cand = _smallest_pair(S, M)
            if cand @ a < 0:
                cand = -cand
            cand /= np.linalg.norm(cand)
            new_val = q(cand)
            damp = 0
            while not new_val < val and damp < 40:
                cand = 0.5 * (a + cand)
                cand /= np.linalg.norm(cand)
                new_val = q(cand)
                damp += 1
            if not new_val < val:
                break
            rel = (val - new_val) / abs(val)
            a, val = cand, new_val
            if rel < tol:
                break
        if val < best_val:
            best_val, best_a = val, a
    return best_val, best_a, total_it


def minimize_quotient(pair: WeightPair, p: float, basis: Basis, quad: QuadratureRule,
                      opt: OptConfig = OptConfig()):
    """Discrete infimum of the Rayleigh quotient on one basis."""
    q = _Quotient(pair, p, basis, quad)
    S, M = q.matrices()
    mu, a, it = inverse_iteration(S, M, tol=min(opt.tol, 1e-14))
    if p == 2:
        return mu, a, it
    rng = np.random.default_rng(opt.seed)
    starts = [a] + [rng.standard_normal(basis.n) for _ in range(max(0, opt.multistart - 1))]
    val, best, it2 = _minimize_p(q, starts, opt.tol, opt.max_iter)
    return val, best, it + it2


def _last_ratio(values: Sequence[float]) -> float:
    v = np.asarray(values, dtype=float)
    if v.size < 3:
        return float(v[-1])
    d1, d2 = v[-2] - v[-3], v[-1] - v[-2]
    if d1 == 0 or not (0 < d2 / d1 < 1):
        return float(v[-1])
    rho = d2 / d1
    return float(v[-1] + d2 * rho / (1 - rho))


def estimate_best_constant(pair: WeightPair, p: float, disc: DiscConfig, opt: OptConfig = OptConfig()) -> RayleighReport:
    """Run the truncation/refinement ladder and report the final discrete infimum."""
    ladder = opt.ladder if opt.ladder is not None else default_ladder(disc)
    if not ladder:
        raise DomainError("empty ladder")
    history, a, basis, quad = [], None, None, None
    stalls, prev = 0, None
    for n_cells, r_lo, r_hi in ladder:
        _, quad, basis = build_basis(disc.domain(r_lo, r_hi), int(n_cells), disc.grading, disc.quad_order)
        val, a, it = minimize_quotient(pair, p, basis, quad, opt)
        history.append(LadderPoint(int(n_cells), float(r_lo), float(r_hi), float(val), it))
        log.info("ladder n=%d r=[%g, %g]: %.12g (%d it)", n_cells, r_lo, r_hi, val, it)
        if prev is not None and not val < prev:
            stalls += 1
        else:
            stalls = 0
        prev = val
    best = history[-1].best_value
    K = pair.claimed_K
    if stalls >= 3:
        verdict = "inconclusive"
    elif K is None:
        verdict = "inconclusive"
    elif best < K * (1 - TOL_VIOLATION):
        verdict = "violation"
    else:
        verdict = "consistent"
    return RayleighReport(
        best_value=best,
        minimizer=a,
        refinement_history=history,
        claimed_K=K,
        verdict=verdict,
        extrapolated=_last_ratio([h.best_value for h in history]),
        basis=basis,
        quad=quad,
    )


@dataclass
class InequalityReport:
    K: float
    margins: np.ndarray
    relative_margins: np.ndarray
    labels: list
    verdict: str

    @property
    def worst(self) -> float:
        return float(np.min(self.relative_margins)) if self.relative_margins.size else math.nan


def default_suite(basis: Basis, quad: QuadratureRule, n_random: int = 8, seed: int = 0, minimizer=None):
    """Single hats, seeded random vectors and (optionally) a minimizer."""
    raw_vals = np.linalg.solve(basis.transform, basis.values) if basis.transform is not None else None
    suite, labels = [], []
    if raw_vals is not None:
        hats = (raw_vals * quad.weights) @ basis.values.T
        for j, h in enumerate(hats):
            suite.append(h)
            labels.append(f"hat{j}")
    rng = np.random.default_rng(seed)
    for j in range(n_random):
        suite.append(rng.standard_normal(basis.n))
        labels.append(f"random{j}")
    if minimizer is not None:
        suite.append(np.asarray(minimizer, dtype=float))
        labels.append("minimizer")
    return suite, labels


def verify_inequality(pair: WeightPair, K: float, p: float, basis: Basis, quad: QuadratureRule,
                      test_suite=None, labels=None, tol: float = TOL_VIOLATION) -> InequalityReport:
    """Check ``K int |xi|^p omega1 <= int |xi'|^p omega2`` on each test vector.

    Margins are ``rhs - K lhs``; relative margins divide by ``rhs``.  An empty
    suite is a vacuous pass reported as inconclusive.
    """
    if not K > 0:
        raise DomainError(f"K must be positive, got {K}")
    if test_suite is None:
        test_suite, labels = default_suite(basis, quad)
    q = _Quotient(pair, p, basis, quad)
    margins, rel = [], []
    for a in test_suite:
        num, den = q.parts(np.asarray(a, dtype=float))
        m = num - K * den
        margins.append(m)
        rel.append(m / num if num > 0 else (0.0 if m == 0 else -math.inf))
    margins, rel = np.asarray(margins), np.asarray(rel)
    if not len(test_suite):
        verdict = "inconclusive"
    elif np.all(rel >= -tol):
        verdict = "pass"
    else:
        verdict = "violation"
    return InequalityReport(K, margins, rel, list(labels or range(len(test_suite))), verdict)
