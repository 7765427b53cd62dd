"""Experiment runner: ``hardylab {check-weights,hardy,solve,sweep-lambda}``.

Exit status: 0 when the run completes (negative scientific results are
data), 1 when ``check-weights`` finds a failing check, 2 for configuration
errors and 3 for numerical faults.
"""
from __future__ import annotations

import argparse
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import records
from .config import ConfigError, RunConfig, load_config
from .discretization import build_basis
from .galerkin import (BlowUpError, ConvergenceError, EnergyTrace, ProblemSpec, apriori_check,
                       initial_coefficients, solve)
from .hardy import estimate_best_constant
from .weights import (AdmissibilityReport, CheckResult, DomainError, check_bp, check_h_alpha,
                      check_h_infinity, check_positivity)

log = logging.getLogger("hardylab")

EXIT_OK, EXIT_CHECK_FAILED, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3

BP_SHRINK = tuple(np.geomspace(1e-1, 1e-9, 9))


def admissibility(cfg: RunConfig) -> AdmissibilityReport:
    pair = cfg.make_pair()
    d = cfg.domain
    p = pair.p
    n, measure = d.dim_n, d.measure
    interior = list(np.geomspace(d.r_lo, d.r_hi, 5)[1:-1])
    probes = [0.0] + interior
    bp1 = check_bp(pair.omega1, p, probes, BP_SHRINK, n, measure, pair.validity, name="bp_omega1")
    bp2 = check_bp(pair.omega2, p, probes, BP_SHRINK, n, measure, pair.validity, name="bp_omega2")
    h_a = check_h_alpha(pair.omega2, p / 2, p, probes, pair.validity)
    if math.isinf(pair.validity[1]):
        beta_embed = p + n * (p - 2) / 2 + 1
        radii = d.r_hi * 2.0 ** np.arange(12)
        h_inf = check_h_infinity(pair.omega2, beta_embed, p, n, radii)
    else:
        h_inf = CheckResult("h_infinity", None, message="bounded domain")
    pos = check_positivity(pair, d.r_lo, d.r_hi)
    return AdmissibilityReport(bp1, bp2, h_a, h_inf, pos)


def cmd_check_weights(cfg: RunConfig, out: Path, seed: int = 0) -> int:
    report = admissibility(cfg)
    path = records.write_csv(out / "admissibility.csv", records.ADMISSIBILITY_HEADER,
                             ((r.check_name, r.probe, r.level, r.value, r.verdict) for r in report.rows()))
    for c in report.checks():
        print(f"{c.name}: {c.verdict}")
    print(f"wrote {path}")
    return EXIT_OK if report.passed else EXIT_CHECK_FAILED


def cmd_hardy(cfg: RunConfig, out: Path, seed: int = 0) -> int:
    pair = cfg.make_pair()
    report = estimate_best_constant(pair, pair.p, cfg.disc_config(), cfg.opt_config(seed))
    path = records.write_csv(out / "rayleigh.csv", records.RAYLEIGH_HEADER, report.rows())
    print(f"best_value={records.fmt(report.best_value)} claimed_K={records.fmt(report.claimed_K)} "
          f"verdict={report.verdict}")
    print(f"wrote {path}")
    return EXIT_OK


def _solve_one(cfg: RunConfig, pair, lam, basis, quad, a0, keep_states=False):
    prob = ProblemSpec(pair, p=pair.p, lam=lam, m_cap=cfg.problem.m_cap,
                       potential_scale=cfg.problem.potential_scale, initial=cfg.problem.initial, T=cfg.problem.T)
    return prob, solve(prob, basis, quad, cfg.time_config(), a0=a0, keep_states=keep_states)


def _ratio(trace: EnergyTrace) -> float:
    h0 = trace.half_l2[0]
    return trace.half_l2[-1] / h0 if h0 > 0 else math.nan


def cmd_solve(cfg: RunConfig, out: Path, seed: int = 0, dump_coeffs: bool = False) -> int:
    pair = cfg.make_pair()
    lams = cfg.lambdas()
    if len(lams) != 1:
        raise ConfigError("solve needs a single problem.lambda")
    lam = lams[0]
    z = cfg.discretization
    _, quad, basis = build_basis(cfg.radial_domain(), z.n_cells, z.grading, z.quad_order)
    prob = ProblemSpec(pair, p=pair.p, lam=lam, m_cap=cfg.problem.m_cap,
                       potential_scale=cfg.problem.potential_scale, initial=cfg.problem.initial, T=cfg.problem.T)
    a0 = initial_coefficients(prob, basis, quad, seed)
    _, res = _solve_one(cfg, pair, lam, basis, quad, a0, keep_states=dump_coeffs)
    tr = res.trace
    path = records.write_csv(out / "energy.csv", EnergyTrace.COLUMNS, tr.rows())
    if dump_coeffs:
        header = ["t"] + [f"a_{k + 1}" for k in range(basis.n)]
        records.write_csv(out / "coefficients.csv", header, ([s.t, *s.a] for s in res.states))
    K = pair.claimed_K
    print(f"lambda/K={records.fmt(lam / K) if K else 'n/a'}")
    print(f"final/initial half_l2={records.fmt(_ratio(tr))}")
    if tr.status == "blow-up":
        print("status=blow-up")
    elif K:
        ap = apriori_check(tr, K, lam)
        print(f"apriori_margin={records.fmt(ap.margin)} ({ap.status})")
    print(f"wrote {path}")
    return EXIT_OK


def default_lambda_grid(K: float) -> list:
    return list(np.geomspace(0.1 * K, 4.0 * K, 13))


def sweep_rows(cfg: RunConfig, seed: int = 0):
    """Summary rows in lambda order, then the threshold row."""
    pair = cfg.make_pair()
    K = pair.claimed_K
    lams = cfg.lambdas() if isinstance(cfg.problem.lambda_, list) else None
    if lams is None:
        if not K:
            raise ConfigError("sweep-lambda needs a problem.lambda list when the family has no claimed_K")
        lams = default_lambda_grid(K)
    z = cfg.discretization
    _, quad, basis = build_basis(cfg.radial_domain(), z.n_cells, z.grading, z.quad_order)
    prob = ProblemSpec(pair, p=pair.p, lam=0.0, m_cap=cfg.problem.m_cap,
                       potential_scale=cfg.problem.potential_scale, initial=cfg.problem.initial, T=cfg.problem.T)
    a0 = initial_coefficients(prob, basis, quad, seed)
    rows, decaying = [], []
    for lam in sorted(lams):
        try:
            _, res = _solve_one(cfg, pair, lam, basis, quad, a0)
        except (BlowUpError, ConvergenceError, DomainError, FloatingPointError) as exc:
            rows.append((lam, lam / K if K else None, None, None, None, None, f"error: {exc}"))
            decaying.append(False)
            continue
        tr = res.trace
        ratio = _ratio(tr)
        blown = tr.status == "blow-up"
        if blown or not K:
            margin, ap_status = None, ("blow-up" if blown else "n/a")
        else:
            ap = apriori_check(tr, K, lam)
            margin = None if ap.status == "out of hypothesis" else ap.margin
            ap_status = ap.status
        rows.append((lam, lam / K if K else None, ratio, margin, ap_status, blown, "ok"))
        decaying.append((not blown) and ratio <= 1.0)
    threshold = None
    for lam, ok in zip(sorted(lams), decaying):
        if not ok:
            break
        threshold = lam
    rows.append((threshold, threshold / K if (K and threshold is not None) else None,
                 None, None, None, None, "threshold" if threshold is not None else "threshold: none decaying"))
    return rows, threshold


def cmd_sweep_lambda(cfg: RunConfig, out: Path, seed: int = 0) -> int:
    rows, threshold = sweep_rows(cfg, seed)
    path = records.write_csv(out / "sweep.csv", records.SWEEP_HEADER, rows)
    print(f"threshold={records.fmt(threshold)}")
    print(f"wrote {path}")
    return EXIT_OK


COMMANDS = {
    "check-weights": cmd_check_weights,
    "hardy": cmd_hardy,
    "solve": cmd_solve,
    "sweep-lambda": cmd_sweep_lambda,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hardylab", description=__doc__.splitlines()[0])
    parser.add_argument("--config", type=Path, default=None, help="TOML run configuration")
    parser.add_argument("--out", type=Path, default=Path("."), help="output directory for CSV files")
    parser.add_argument("--seed", type=int, default=0, help="seed for random suites and initial data")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        if name == "solve":
            sp.add_argument("--dump-coeffs", action="store_true", help="also write coefficients.csv")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.seed < 0 or args.seed >= 2**64:
        print("error: --seed must be an unsigned 64-bit integer", file=sys.stderr)
        return EXIT_CONFIG
    try:
        cfg = load_config(args.config)
        kwargs = {"dump_coeffs": args.dump_coeffs} if args.command == "solve" else {}
        return COMMANDS[args.command](cfg, args.out, args.seed, **kwargs)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DomainError, BlowUpError, ConvergenceError, FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
