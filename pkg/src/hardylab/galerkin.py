"""Galerkin approximation of u_t - div(omega2 |u'|^(p-2) u') = lam W |u|^(p-2) u.

With an L2-orthonormal basis the mass matrix is the identity and the
coefficients obey

    a_k' = -<omega2 |u'|^(p-2) u', e_k'> + lam <W |u|^(p-2) u, e_k>,

so that 1/2 d/dt |u|^2 + int omega2 |u'|^p = lam int W |u|^p.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Union

import numpy as np

from .discretization import Basis, DomainError, QuadratureRule, eval_field, integrate
from .weights import WeightPair

log = logging.getLogger(__name__)

BLOWUP_FACTOR = 1e12
SCHEMES = ("rk2", "backward-euler")
INITIAL_PROFILES = ("gaussian-bump", "hardy-minimizer", "random")


class BlowUpError(RuntimeError):
    """Non-finite state; ``last_good`` is the last finite state."""

    def __init__(self, msg, last_good=None):
        super().__init__(msg)
        self.last_good = last_good


class ConvergenceError(RuntimeError):
    pass


@dataclass(frozen=True)
class ProblemSpec:
    pair: WeightPair
    p: float = 2.0
    lam: float = 0.0
    m_cap: float = 1e3
    potential_scale: float = 1.0
    initial: Union[str, Callable, np.ndarray] = "gaussian-bump"
    T: float = 1.0

    def __post_init__(self):
        if not self.p >= 2:
            raise DomainError(f"p must be >= 2, got {self.p}")
        if not self.lam >= 0:
            raise DomainError(f"lambda must be >= 0, got {self.lam}")
        if not self.m_cap > 0:
            raise DomainError(f"m_cap must be > 0, got {self.m_cap}")
        if not 0 < self.potential_scale <= 1:
            raise DomainError(f"potential_scale must lie in (0, 1], got {self.potential_scale}")
        if not self.T >= 0:
            raise DomainError(f"T must be >= 0, got {self.T}")

    def W(self, r):
        return self.potential_scale * np.minimum(self.m_cap, self.pair.w1(r))


@dataclass(frozen=True)
class SolverState:
    t: float
    a: np.ndarray


@dataclass
class EnergyTrace:
    t: List[float] = field(default_factory=list)
    half_l2: List[float] = field(default_factory=list)
    diss: List[float] = field(default_factory=list)
    gain: List[float] = field(default_factory=list)
    cum_diss: List[float] = field(default_factory=list)
    cum_gain: List[float] = field(default_factory=list)
    status: str = "complete"

    COLUMNS = ("t", "half_l2", "diss", "gain", "cum_diss", "cum_gain")

    def append(self, t, half_l2, diss, gain):
        if self.t:
            dt = t - self.t[-1]
            cd = self.cum_diss[-1] + 0.5 * dt * (diss + self.diss[-1])
            cg = self.cum_gain[-1] + 0.5 * dt * (gain + self.gain[-1])
        else:
            cd = cg = 0.0
        self.t.append(t)
        self.half_l2.append(half_l2)
        self.diss.append(diss)
        self.gain.append(gain)
        self.cum_diss.append(cd)
        self.cum_gain.append(cg)

    def rows(self):
        return zip(self.t, self.half_l2, self.diss, self.gain, self.cum_diss, self.cum_gain)

    def __len__(self):
        return len(self.t)


class GalerkinSystem:
    """Quadrature-weighted arrays for one (problem, basis) pair."""

    def __init__(self, prob: ProblemSpec, basis: Basis, quad: QuadratureRule):
        x = quad.points
        self.prob, self.basis, self.quad = prob, basis, quad
        self.p = prob.p
        self.lam = prob.lam
        self.w2 = prob.pair.w2(x) * quad.weights
        W = prob.W(x)
        cap = np.minimum(prob.m_cap, prob.pair.w1(x))
        assert np.all(W <= cap), "W exceeds min(m, omega1)"
        self.Wq = W * quad.weights
        if not (np.all(np.isfinite(self.w2)) and np.all(np.isfinite(self.Wq))):
            raise DomainError("weights are not finite at the quadrature points")

    def diffusion(self, a):
        """``A(a)_k = int omega2 |u'|^(p-2) u' e_k' dmu``."""
        du = a @ self.basis.gradients
        with np.errstate(over="raise", invalid="raise"):
            try:
                flux = self.w2 * np.abs(du) ** (self.p - 2) * du
            except FloatingPointError as exc:
                raise BlowUpError("overflow in |u'|^(p-2): blow-up suspected") from exc
        return self.basis.gradients @ flux

    def reaction(self, a):
        u = a @ self.basis.values
        with np.errstate(over="raise", invalid="raise"):
            try:
                src = self.Wq * np.abs(u) ** (self.p - 2) * u
            except FloatingPointError as exc:
                raise BlowUpError("overflow in |u|^(p-2): blow-up suspected") from exc
        return self.lam * (self.basis.values @ src)

    def rhs(self, a):
        out = -self.diffusion(a)
        if self.lam:
            out += self.reaction(a)
        if not np.all(np.isfinite(out)):
            raise BlowUpError("non-finite right-hand side")
        return out

    def energies(self, a):
        u, du = eval_field(a, self.basis)
        diss = float(np.dot(self.w2, np.abs(du) ** self.p))
        gain = self.lam * float(np.dot(self.Wq, np.abs(u) ** self.p))
        return 0.5 * float(a @ a), diss, gain

    def jacobian_norm(self, a, n_iter: int = 30, seed: int = 0) -> float:
        """Power-iteration estimate of |dF/da| from finite-difference products."""
        rng = np.random.default_rng(seed)
        v = rng.standard_normal(self.basis.n)
        v /= np.linalg.norm(v)
        f0 = self.rhs(a)
        eps = 1e-7 * max(1.0, np.linalg.norm(a))
        est = 0.0
        for _ in range(n_iter):
            w = (self.rhs(a + eps * v) - f0) / eps
            est = np.linalg.norm(w)
            if est == 0:
                return 0.0
            v = w / est
        return float(est)


def _initial_samples(f, quad: QuadratureRule, seed: int = 0):
    x = quad.points
    if callable(f):
        return np.asarray(f(x), dtype=float) * np.ones_like(x)
    if f == "gaussian-bump":
        lo, hi = quad.mesh.nodes[0], quad.mesh.nodes[-1]
        c, w = 0.5 * (lo + hi), 0.1 * (hi - lo)
        return np.exp(-(((x - c) / w) ** 2))
    raise DomainError(f"unknown initial profile {f!r}")


@dataclass(frozen=True)
class Projection:
    coeffs: np.ndarray
    residual: float


def project_initial(f, basis: Basis, quad: QuadratureRule) -> Projection:
    """``a_k = <f, e_k>`` and the L2 residual ``|f - f_n|``."""
    fx = _initial_samples(f, quad)
    bad = ~np.isfinite(fx)
    if bad.any():
        i = int(np.argmax(bad))
        raise DomainError(f"non-finite initial data at r={quad.points[i]!r}")
    a = basis.values @ (fx * quad.weights)
    diff = fx - a @ basis.values
    return Projection(a, math.sqrt(max(integrate(diff * diff, quad), 0.0)))


def initial_coefficients(prob: ProblemSpec, basis: Basis, quad: QuadratureRule, seed: int = 0):
    """Resolve a named initial profile to coefficients."""
    f = prob.initial
    if isinstance(f, np.ndarray):
        if f.shape != (basis.n,):
            raise DomainError(f"initial coefficients must have length {basis.n}")
        return f.astype(float)
    if f == "random":
        return np.random.default_rng(seed).standard_normal(basis.n) / math.sqrt(basis.n)
    if f == "hardy-minimizer":
        from .hardy import minimize_quotient

        _, a, _ = minimize_quotient(prob.pair, prob.p, basis, quad)
        if a.sum() < 0:
            a = -a
        return a / np.linalg.norm(a)
    return project_initial(f, basis, quad).coeffs


def rhs(a, prob: ProblemSpec, basis: Basis, quad: QuadratureRule):
    return GalerkinSystem(prob, basis, quad).rhs(np.asarray(a, dtype=float))


def _step(sys: GalerkinSystem, state: SolverState, dt: float, scheme: str,
          damping: float = 0.5, tol: float = 1e-10, max_iter: int = 200) -> SolverState:
    a = state.a
    if scheme == "rk2":
        k1 = sys.rhs(a)
        k2 = sys.rhs(a + dt * k1)
        new = a + 0.5 * dt * (k1 + k2)
    elif scheme == "backward-euler":
        x = a + dt * sys.rhs(a)
        for _ in range(max_iter):
            target = a + dt * sys.rhs(x)
            nxt = (1 - damping) * x + damping * target
            if not np.all(np.isfinite(nxt)):
                raise BlowUpError("non-finite fixed-point iterate", state)
            if np.linalg.norm(nxt - x) <= tol * max(1.0, np.linalg.norm(nxt)):
                x = nxt
                break
            x = nxt
        else:
            raise ConvergenceError(f"backward-Euler fixed point did not converge in {max_iter} iterations; "
                                   f"try a smaller dt than {dt:g}")
        new = x
    else:
        raise DomainError(f"unknown scheme {scheme!r}; expected one of {SCHEMES}")
    if not np.all(np.isfinite(new)):
        raise BlowUpError("non-finite state", state)
    return SolverState(state.t + dt, new)


def step(state: SolverState, dt: float, prob: ProblemSpec, basis: Basis, quad: QuadratureRule,
         scheme: str = "rk2") -> SolverState:
    if not dt > 0:
        raise DomainError(f"dt must be > 0, got {dt}")
    try:
        return _step(GalerkinSystem(prob, basis, quad), state, dt, scheme)
    except BlowUpError as exc:
        if exc.last_good is None:
            exc.last_good = state
        raise


@dataclass(frozen=True)
class TimeConfig:
    dt: Optional[float] = None
    scheme: str = "rk2"
    safety: float = 0.5

    def __post_init__(self):
        if self.dt is not None and not self.dt > 0:
            raise DomainError(f"dt must be > 0, got {self.dt}")
        if self.scheme not in SCHEMES:
            raise DomainError(f"unknown scheme {self.scheme!r}; expected one of {SCHEMES}")
        if not self.safety > 0:
            raise DomainError(f"safety must be > 0, got {self.safety}")


@dataclass
class SolveResult:
    states: List[SolverState]
    trace: EnergyTrace
    dt: float

    @property
    def blown_up(self) -> bool:
        return self.trace.status == "blow-up"


def solve(prob: ProblemSpec, basis: Basis, quad: QuadratureRule, time_config: TimeConfig = TimeConfig(),
          a0=None, seed: int = 0, keep_states: bool = True) -> SolveResult:
    """Integrate the coefficient system on ``[0, T]`` and record the energy ledger.

    Without a fixed ``dt`` the step is ``safety / |J|`` with ``|J|`` a
    finite-difference estimate of the rhs Jacobian norm at the initial state.
    Stops early, marking the trace ``blow-up``, once ``half_l2`` exceeds
    1e12 times its initial value or the state stops being finite.
    """
    sys = GalerkinSystem(prob, basis, quad)
    a = initial_coefficients(prob, basis, quad, seed) if a0 is None else np.asarray(a0, dtype=float)
    state = SolverState(0.0, a)
    trace = EnergyTrace()
    trace.append(0.0, *sys.energies(a))
    states = [state]
    if prob.T == 0:
        return SolveResult(states, trace, 0.0)
    cap = time_config.safety / max(sys.jacobian_norm(a), 1e-300)
    dt = time_config.dt if time_config.dt is not None else cap
    if time_config.scheme == "rk2" and dt > 2 * cap / time_config.safety:
        log.warning("dt=%g exceeds the explicit stability estimate %g", dt, 2 * cap / time_config.safety)
    n_steps = max(1, int(math.ceil(prob.T / dt - 1e-9)))
    dt = prob.T / n_steps
    h0 = trace.half_l2[0]
    for k in range(1, n_steps + 1):
        try:
            new = _step(sys, state, dt, time_config.scheme)
        except BlowUpError:
            trace.status = "blow-up"
            break
        new = SolverState(k * dt, new.a)
        h, d, g = sys.energies(new.a)
        trace.append(new.t, h, d, g)
        state = new
        if keep_states:
            states.append(state)
        if h0 > 0 and h > BLOWUP_FACTOR * h0:
            trace.status = "blow-up"
            break
    if not keep_states:
        states = [states[0], state]
    return SolveResult(states, trace, dt)


@dataclass(frozen=True)
class AprioriReport:
    margin: float
    tol: float
    status: str  # pass | fail | out of hypothesis
    ratio: float


def apriori_check(trace: EnergyTrace, K: float, lam: float, tol_energy: Optional[float] = None) -> AprioriReport:
    """``M = h(0) - h(T) - (1 - lam/K) cum_diss(T)``; passes when ``M >= -tol``.

    ``tol`` defaults to 1e-3 of the initial energy.  ``lam > K`` lies outside
    the estimate's hypothesis and is reported as such.
    """
    if not K > 0:
        raise DomainError(f"K must be positive, got {K}")
    if trace.status != "complete" or len(trace) == 0:
        raise DomainError("apriori_check needs a complete trace")
    h0, hT = trace.half_l2[0], trace.half_l2[-1]
    tol = 1e-3 * h0 if tol_energy is None else tol_energy
    margin = h0 - hT - (1 - lam / K) * trace.cum_diss[-1]
    if lam > K:
        return AprioriReport(margin, tol, "out of hypothesis", lam / K)
    return AprioriReport(margin, tol, "pass" if margin >= -tol else "fail", lam / K)


def energy_residual(trace: EnergyTrace, states: List[SolverState], prob: ProblemSpec, basis: Basis,
                    quad: QuadratureRule):
    """Per step ``|(h_{n+1} - h_n)/dt + diss - gain|`` with diss, gain at the midpoint state."""
    if len(states) != len(trace):
        raise DomainError("trace and states are not aligned")
    sys = GalerkinSystem(prob, basis, quad)
    res = []
    for s0, s1 in zip(states[:-1], states[1:]):
        dt = s1.t - s0.t
        h0, h1 = 0.5 * float(s0.a @ s0.a), 0.5 * float(s1.a @ s1.a)
        _, d, g = sys.energies(0.5 * (s0.a + s1.a))
        res.append(abs((h1 - h0) / dt + d - g))
    return res, (max(res) if res else 0.0)


def monotonicity_probe(basis: Basis, pair: WeightPair, p: float, quad: QuadratureRule,
                       n_samples: int = 1000, seed: int = 0) -> float:
    """Minimum of ``<A(a) - A(b), a - b>`` over seeded random pairs."""
    if n_samples < 1:
        raise DomainError("n_samples must be >= 1")
    sys = GalerkinSystem(ProblemSpec(pair, p=p, lam=0.0), basis, quad)
    rng = np.random.default_rng(seed)
    lo = math.inf
    for _ in range(n_samples):
        a, b = rng.standard_normal((2, basis.n))
        lo = min(lo, float((sys.diffusion(a) - sys.diffusion(b)) @ (a - b)))
    return lo


@dataclass(frozen=True)
class HemicontinuityReport:
    t_grid: np.ndarray
    values: np.ndarray
    modulus: float  # max |f(t_{i+1}) - f(t_i)| / |t_{i+1} - t_i|


def hemicontinuity_probe(basis: Basis, pair: WeightPair, p: float, quad: QuadratureRule, u, v, w, t_grid):
    """Samples of ``t -> <A(u + t v), w>``."""
    sys = GalerkinSystem(ProblemSpec(pair, p=p, lam=0.0), basis, quad)
    t = np.asarray(t_grid, dtype=float)
    u, v, w = (np.asarray(x, dtype=float) for x in (u, v, w))
    vals = np.array([sys.diffusion(u + ti * v) @ w for ti in t])
    if t.size > 1:
        modulus = float(np.max(np.abs(np.diff(vals)) / np.diff(t)))
    else:
        modulus = 0.0
    return HemicontinuityReport(t, vals, modulus)
