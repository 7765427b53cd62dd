"""Run configuration: TOML sections validated against operation preconditions."""
from __future__ import annotations

import math
from pathlib import Path
from typing import List, Literal, Optional, Tuple, Union

import tomli
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from . import weights as W
from .discretization import RadialDomain
from .hardy import DiscConfig, OptConfig
from .galerkin import INITIAL_PROFILES, TimeConfig

__all__ = ["ConfigError", "RunConfig", "load_config", "parse_config"]


class ConfigError(ValueError):
    pass


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class DomainSection(_Section):
    r_lo: float = Field(1e-3, gt=0)
    r_hi: float = 10.0
    dim_n: int = Field(3, ge=1)
    measure: Literal["radial", "flat"] = "radial"

    @model_validator(mode="after")
    def _order(self):
        if not (math.isfinite(self.r_hi) and self.r_hi > self.r_lo):
            raise ValueError(f"need r_lo < r_hi < inf, got r_lo={self.r_lo}, r_hi={self.r_hi}")
        if self.measure == "radial" and self.dim_n < 2:
            raise ValueError("radial measure needs dim_n >= 2")
        return self


class DiscretizationSection(_Section):
    n_cells: int = Field(400, ge=2)
    grading: Literal["uniform", "geometric"] = "geometric"
    quad_order: int = Field(4, ge=1, le=20)


FAMILY_KEYS = {
    "power": {"gamma", "p"},
    "confining": {"gamma", "p"},
    "superharmonic": {"beta", "p"},
    "derived": {"beta", "sigma", "p"},
    "identity": {"p"},
    "exp-singular": {"gamma", "p"},
}


class WeightsSection(_Section):
    family: Literal["power", "confining", "superharmonic", "derived", "identity", "exp-singular"] = "power"
    gamma: Optional[float] = None
    beta: Optional[float] = None
    sigma: Optional[float] = None
    p: float = 2.0

    @model_validator(mode="after")
    def _keys(self):
        allowed = FAMILY_KEYS[self.family]
        for key in ("gamma", "beta", "sigma"):
            if getattr(self, key) is not None and key not in allowed:
                raise ValueError(f"key '{key}' is not used by family '{self.family}'")
        for key in allowed - {"p"}:
            if getattr(self, key) is None:
                raise ValueError(f"family '{self.family}' needs key '{key}'")
        return self


class ProblemSection(_Section):
    lambda_: Union[float, List[float]] = Field(0.0, alias="lambda")
    m_cap: float = Field(1e3, gt=0)
    potential_scale: float = Field(1.0, gt=0, le=1)
    initial: str = "gaussian-bump"
    T: float = Field(1.0, ge=0)

    @field_validator("lambda_")
    @classmethod
    def _lam(cls, v):
        vals = v if isinstance(v, list) else [v]
        if not vals:
            raise ValueError("lambda grid is empty")
        if any(not (x >= 0 and math.isfinite(x)) for x in vals):
            raise ValueError("lambda must be finite and >= 0")
        return v

    @field_validator("initial")
    @classmethod
    def _initial(cls, v):
        if v not in INITIAL_PROFILES:
            raise ValueError(f"initial must be one of {INITIAL_PROFILES}")
        return v


class TimeSection(_Section):
    scheme: Literal["rk2", "backward-euler"] = "rk2"
    dt: Optional[float] = Field(None, gt=0)
    safety: float = Field(0.5, gt=0)


class HardySection(_Section):
    ladder: Union[Literal["default"], List[Tuple[int, float, float]]] = "default"
    multistart: int = Field(5, ge=1)
    tol: float = Field(1e-9, gt=0, lt=1)

    @field_validator("ladder")
    @classmethod
    def _ladder(cls, v):
        if v == "default":
            return v
        if not v:
            raise ValueError("ladder must have at least one step")
        for n, lo, hi in v:
            if n < 2 or not (0 < lo < hi < math.inf):
                raise ValueError(f"bad ladder step {(n, lo, hi)}: need n_cells >= 2 and 0 < r_lo < r_hi")
        return v


class RunConfig(_Section):
    domain: DomainSection = DomainSection()
    discretization: DiscretizationSection = DiscretizationSection()
    weights: WeightsSection = WeightsSection(gamma=-2.0)
    problem: ProblemSection = ProblemSection()
    time: TimeSection = TimeSection()
    hardy: HardySection = HardySection()

    @model_validator(mode="after")
    def _cross(self):
        p, n = self.weights.p, self.domain.dim_n
        if not (2 <= p < n):
            raise ValueError(f"weights.p must satisfy 2 <= p < dim_n (= {n}), got p={p}")
        self.make_pair()  # family preconditions
        return self

    def make_pair(self) -> W.WeightPair:
        w, n = self.weights, self.domain.dim_n
        try:
            if w.family == "power":
                return W.make_power_weights(w.gamma, w.p, n)
            if w.family == "confining":
                return W.make_confining_weights(w.gamma, w.p, n)
            if w.family == "superharmonic":
                if w.p != 2:
                    raise ValueError("family 'superharmonic' needs p = 2")
                return W.make_superharmonic_weights(w.beta, n)
            if w.family == "derived":
                prof = W.power_profile((w.p - n) / (w.p - 1), w.p, n)
                return W.derive_weights_from_profile(prof, w.beta, w.sigma, w.p)
            if w.family == "identity":
                return W.make_identity_weights(w.p, n)
            return W.make_exp_singular_weights(w.gamma, w.p, n)
        except W.DomainError as exc:
            raise ValueError(f"weights: {exc}") from exc

    def radial_domain(self) -> RadialDomain:
        d = self.domain
        return RadialDomain(d.r_lo, d.r_hi, d.dim_n, d.measure)

    def disc_config(self) -> DiscConfig:
        d, z = self.domain, self.discretization
        return DiscConfig(d.r_lo, d.r_hi, d.dim_n, d.measure, z.n_cells, z.grading, z.quad_order)

    def opt_config(self, seed: int = 0) -> OptConfig:
        h = self.hardy
        ladder = None if h.ladder == "default" else tuple(tuple(s) for s in h.ladder)
        return OptConfig(ladder=ladder, multistart=h.multistart, tol=h.tol, seed=seed)

    def time_config(self) -> TimeConfig:
        t = self.time
        return TimeConfig(t.dt, t.scheme, t.safety)

    def lambdas(self) -> List[float]:
        lam = self.problem.lambda_
        return list(lam) if isinstance(lam, list) else [lam]


def _format_errors(exc: ValidationError) -> str:
    lines = []
    for err in exc.errors():
        loc = ".".join(str(x) for x in err["loc"]) or "<root>"
        if err["type"] == "extra_forbidden":
            lines.append(f"unknown key '{loc}'")
        else:
            lines.append(f"{loc}: {err['msg']}")
    return "\n".join(lines)


def parse_config(text: str) -> RunConfig:
    try:
        data = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"malformed TOML: {exc}") from exc
    try:
        return RunConfig.model_validate(data)
    except ValidationError as exc:
        raise ConfigError(_format_errors(exc)) from None


def load_config(path: Optional[Union[str, Path]]) -> RunConfig:
    if path is None:
        return RunConfig()
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text)
