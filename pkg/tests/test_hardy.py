import math

import numpy as np
import pytest
import scipy.linalg as sl
from hypothesis import given, settings
from hypothesis import strategies as st

from hardylab.discretization import DomainError, RadialDomain, build_basis, refine, gauss_rule, hat_basis, orthonormalize
from hardylab.hardy import (
    DiscConfig,
    OptConfig,
    _Quotient,
    _last_ratio,
    default_ladder,
    default_suite,
    estimate_best_constant,
    inverse_iteration,
    minimize_quotient,
    rayleigh_quotient,
    verify_inequality,
)
from hardylab.weights import make_identity_weights, make_power_weights


@pytest.fixture(scope="module")
def flat_pi():
    return build_basis(RadialDomain(1e-9, math.pi, 1, "flat"), 80, "uniform")


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**31), st.floats(1e-3, 1e3), st.sampled_from([2.0, 2.5, 3.0]))
def test_quotient_homogeneous(seed, c, p):
    _, quad, basis = build_basis(RadialDomain(1.0, 5.0, 3), 12, "uniform")
    pair = make_power_weights(-2.0, 2.0, 3)
    a = np.random.default_rng(seed).standard_normal(basis.n)
    r1 = rayleigh_quotient(a, pair, p, basis, quad)
    r2 = rayleigh_quotient(c * a, pair, p, basis, quad)
    r3 = rayleigh_quotient(-a, pair, p, basis, quad)
    assert r2 == pytest.approx(r1, rel=1e-12) and r3 == pytest.approx(r1, rel=1e-12)


def test_quotient_rejects_zero(small_disc, power_pair):
    _, quad, basis = small_disc
    with pytest.raises(DomainError):
        rayleigh_quotient(np.zeros(basis.n), power_pair, 2.0, basis, quad)


def test_flat_dirichlet_eigenvalue(flat_pi):
    _, quad, basis = flat_pi
    val, a, _ = minimize_quotient(make_identity_weights(2.0, 1), 2.0, basis, quad)
    assert val == pytest.approx(1.0, rel=1e-3)
    assert val >= 1.0 - 1e-12  # conforming discretization bounds from above


def test_inverse_iteration_matches_dense(small_disc, power_pair):
    _, quad, basis = small_disc
    S, M = _Quotient(power_pair, 2.0, basis, quad).matrices()
    mu, x, _ = inverse_iteration(S, M)
    ref = sl.eigh(S, M, eigvals_only=True)[0]
    assert mu == pytest.approx(ref, rel=1e-8)
    assert np.linalg.norm(S @ x - mu * M @ x) < 1e-8 * np.linalg.norm(S @ x)


@pytest.mark.parametrize("n", [10, 50, 100])
def test_inverse_iteration_random_spd(n):
    rng = np.random.default_rng(n)
    A = rng.standard_normal((n, n))
    S = A @ A.T + n * np.eye(n)
    B = rng.standard_normal((n, n))
    M = B @ B.T + np.eye(n)
    mu, _, _ = inverse_iteration(S, M)
    assert mu == pytest.approx(sl.eigh(S, M, eigvals_only=True)[0], rel=1e-8)


def test_refinement_does_not_increase_infimum(power_pair):
    mesh, quad, basis = build_basis(RadialDomain(0.1, 10.0, 3), 16, "geometric")
    vals = []
    for _ in range(3):
        vals.append(minimize_quotient(power_pair, 2.0, basis, quad)[0])
        mesh = refine(mesh)
        quad = gauss_rule(mesh)
        basis = orthonormalize(hat_basis(mesh, quad), quad)
    assert vals[0] >= vals[1] >= vals[2]


def test_larger_domain_does_not_increase_infimum(power_pair):
    vals = []
    for lo in (1.0, 0.1, 0.01):
        _, quad, basis = build_basis(RadialDomain(lo, 10.0, 3), 120, "geometric")
        vals.append(minimize_quotient(power_pair, 2.0, basis, quad)[0])
    assert vals[0] > vals[1] > vals[2] > 0.25


def test_report_minimizer_reproduces_value(power_pair):
    disc = DiscConfig(0.01, 10.0, 3, n_cells=80)
    rep = estimate_best_constant(power_pair, 2.0, disc)
    again = rayleigh_quotient(rep.minimizer, power_pair, 2.0, rep.basis, rep.quad)
    assert again == pytest.approx(rep.best_value, rel=1e-12)
    assert len(rep.refinement_history) == 3
    assert rep.verdict == "consistent"
    rows = list(rep.rows())
    assert rows[-1][0] == "final" and rows[-2][0] == "extrapolated"


def test_default_ladder_shape():
    lad = default_ladder(DiscConfig(1e-3, 10.0, n_cells=400))
    assert lad == ((100, 0.1, 10.0), (200, 0.01, 10.0), (400, 1e-3, 10.0))
    assert len(default_ladder(DiscConfig(0.5, 10.0, n_cells=40))) == 2


def test_identity_pair_is_inconclusive():
    disc = DiscConfig(1e-9, math.pi, 1, "flat", 40, "uniform")
    rep = estimate_best_constant(make_identity_weights(2.0, 1), 2.0, disc, OptConfig(ladder=((40, 1e-9, math.pi),)))
    assert rep.claimed_K is None and rep.verdict == "inconclusive"


def test_last_ratio():
    assert _last_ratio([1.0, 0.5, 0.25]) == pytest.approx(0.0)
    assert _last_ratio([3.0, 2.0]) == 2.0
    assert _last_ratio([1.0, 2.0, 2.5]) == pytest.approx(3.0)
    assert _last_ratio([1.0, 2.0, 4.0]) == 4.0  # growing differences: no extrapolation


def test_verify_passes_at_discrete_infimum(small_disc, power_pair):
    _, quad, basis = small_disc
    best, a, _ = minimize_quotient(power_pair, 2.0, basis, quad)
    suite, labels = default_suite(basis, quad, minimizer=a)
    rep = verify_inequality(power_pair, best, 2.0, basis, quad, suite, labels)
    assert rep.verdict == "pass"
    assert rep.relative_margins[labels.index("minimizer")] == pytest.approx(0.0, abs=1e-10)


def test_verify_detects_violation(small_disc, power_pair):
    _, quad, basis = small_disc
    best, a, _ = minimize_quotient(power_pair, 2.0, basis, quad)
    suite, labels = default_suite(basis, quad, minimizer=a)
    rep = verify_inequality(power_pair, 2 * best, 2.0, basis, quad, suite, labels)
    assert rep.verdict == "violation"
    assert rep.relative_margins[labels.index("minimizer")] == pytest.approx(-1.0, rel=1e-8)


def test_verify_empty_suite(small_disc, power_pair):
    _, quad, basis = small_disc
    rep = verify_inequality(power_pair, 1.0, 2.0, basis, quad, [], [])
    assert rep.verdict == "inconclusive" and math.isnan(rep.worst)


def test_default_suite_hats_are_single_hats(small_disc):
    mesh, quad, basis = small_disc
    suite, labels = default_suite(basis, quad, n_random=0)
    assert len(suite) == basis.n
    raw = hat_basis(mesh, quad)
    np.testing.assert_allclose(suite[3] @ basis.values, raw.values[3], atol=1e-12)


def test_p3_minimizer_beats_random_starts():
    pair = make_power_weights(-3.0, 3.0, 4)
    _, quad, basis = build_basis(RadialDomain(0.1, 10.0, 4), 30, "geometric")
    val, a, _ = minimize_quotient(pair, 3.0, basis, quad, OptConfig(multistart=3))
    rng = np.random.default_rng(0)
    for _ in range(20):
        assert val <= rayleigh_quotient(rng.standard_normal(basis.n), pair, 3.0, basis, quad)
    assert val > pair.claimed_K
    assert rayleigh_quotient(a, pair, 3.0, basis, quad) == pytest.approx(val, rel=1e-12)
