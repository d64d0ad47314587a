import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from jcmac.channel_model import (
    Dimensions,
    InputCovarianceSet,
    deterministic_model,
    eta_q,
    eta_q_tilde,
    from_kronecker,
    from_variance_profile,
    random_jointly_correlated,
    zero_model,
)
from jcmac.de_core import (
    SolverConfig,
    expand_reduced,
    random_init,
    solve_fixed_point,
    solve_l1_inversion_free,
    solve_reduced_common_u,
    solve_structured_rician_l1,
    solve_variance_profile_diag,
)
from jcmac.errors import NoConvergence, PreconditionViolated, SingularIteration
from jcmac.linalg import block_diag, random_unitary
from jcmac.mc_oracle import MCConfig, ergodic_resolvent_trace

from .models import structured_rician_model
from .oracles import deterministic_cauchy, kronecker_de, mp_cauchy_quadratic

TIGHT = SolverConfig(tol=1e-13)


def _psd(rng, n, cond=None):
    u = random_unitary(n, rng)
    ev = rng.uniform(0.2, 2.0, n) if cond is None else np.geomspace(1.0, 1.0 / cond, n)
    return (u * ev) @ u.conj().T


def _random_q(rng, d):
    out = []
    for m in d.m_k:
        a = rng.standard_normal((m, m)) + 1j * rng.standard_normal((m, m))
        q = a @ a.conj().T
        out.append(q * m / np.trace(q).real)
    return InputCovarianceSet(tuple(out))


def _fixed_point_gap(model, q, s):
    """Largest mismatch of the defining equations, evaluated with the
    public eta maps rather than the solver's kernel."""
    d = model.dims
    x = s.x
    phi_t = np.eye(d.N) - sum(eta_q_tilde(model, k, q[k], s.g_k[k]) for k in range(d.K))
    phi = [np.eye(d.m_k[k]) - eta_q(model, k, q[k], s.g_b) for k in range(d.K)]
    a = model.sbar() @ block_diag(list(q.sqrt()))
    g_b = np.linalg.inv(-x * phi_t - a @ np.linalg.inv(block_diag(phi)) @ a.conj().T)
    g_m = np.linalg.inv(-x * block_diag(phi) - a.conj().T @ np.linalg.inv(phi_t) @ a)
    gaps = [np.max(np.abs(phi_t - s.phi_tilde)), np.max(np.abs(g_b - s.g_b))]
    gaps += [np.max(np.abs(p - sp)) for p, sp in zip(phi, s.phi)]
    gaps += [np.max(np.abs(g_m[d.cols(k), d.cols(k)] - s.g_k[k])) for k in range(d.K)]
    return max(gaps)


# --- degenerate channels ----------------------------------------------------


@pytest.mark.parametrize("x", [1e-3, 0.1, 1.0, 10.0])
def test_zero_channel(x):
    s = solve_fixed_point(zero_model(Dimensions((3, 2), (2, 1))), None, x)
    np.testing.assert_allclose(s.g_b, -np.eye(5) / x, atol=0)
    assert s.cauchy == pytest.approx(-1 / x)
    assert s.iters <= 2


@pytest.mark.parametrize("x", [1e-3, 0.1, 1.0, 10.0])
def test_deterministic_channel(rng, x):
    d = Dimensions((3, 2), (2, 2))
    h = rng.standard_normal((d.N, d.M)) + 1j * rng.standard_normal((d.N, d.M))
    s = solve_fixed_point(deterministic_model(d, h), None, x)
    assert s.iters <= 2
    assert abs(s.cauchy - deterministic_cauchy(h, x)) <= 1e-12 * abs(s.cauchy)


# --- structure of the solution ----------------------------------------------


@given(st.integers(0, 2**32 - 1), st.booleans(), st.floats(1e-2, 10.0))
@settings(max_examples=15)
def test_solution_satisfies_fixed_point(seed, rician, x):
    d = Dimensions((3, 2), (2, 3))
    model = random_jointly_correlated(d, seed, rician_hbar=rician)
    q = _random_q(np.random.default_rng(seed), d)
    s = solve_fixed_point(model, q, x, TIGHT)
    assert _fixed_point_gap(model, q, s) <= 1e-9 / x
    for g in [s.g_b] + s.g_k:
        np.testing.assert_array_equal(g, g.conj().T)
        assert np.linalg.eigvalsh(g).max() < 0
    for p in [s.phi_tilde] + s.phi:
        assert np.linalg.eigvalsh(p).min() > 0
    # Cauchy transform at -x of a positive measure lies in [-1/x, 0)
    assert -1 / x - 1e-12 <= s.cauchy.real < 0
    assert s.cauchy.imag == pytest.approx(0, abs=1e-14)


def test_rayleigh_g_b_is_block_diagonal():
    model = random_jointly_correlated(Dimensions((3, 2), (2, 2)), 4)
    s = solve_fixed_point(model, None, 0.5)
    assert not np.any(s.g_b[:3, 3:])
    assert not np.any(s.g_b[3:, :3])


def test_damping_and_warm_start_reach_same_point():
    model = random_jointly_correlated(Dimensions((4, 3), (2, 2)), 9, rician_hbar=True)
    base = solve_fixed_point(model, None, 0.2, TIGHT)
    damped = solve_fixed_point(model, None, 0.2, SolverConfig(tol=1e-13, damping=0.5))
    warm = solve_fixed_point(model, None, 0.2, TIGHT, init=base)
    np.testing.assert_allclose(damped.g_b, base.g_b, atol=1e-10)
    np.testing.assert_allclose(warm.g_b, base.g_b, atol=1e-12)
    assert warm.iters <= 2
    assert damped.iters > base.iters


# --- Monte-Carlo oracle -----------------------------------------------------


def test_cauchy_matches_mc_resolvent():
    d = Dimensions((8, 8), (2, 2, 2))
    model = random_jointly_correlated(d, 20160607, rician_hbar=True)
    for i, x in enumerate([0.05, 0.5, 2.0]):
        s = solve_fixed_point(model, None, x)
        mc = ergodic_resolvent_trace(model, None, x, MCConfig(10_000, seed=5, stream=i))
        assert abs(s.cauchy.real - mc.mean) <= 3 * mc.stderr + 0.01 * abs(mc.mean)


def test_iid_cauchy_matches_marchenko_pastur():
    n, m, x = 40, 20, 0.3
    model = from_variance_profile(np.ones((n, m)) * n / m)
    s = solve_fixed_point(model, None, x, TIGHT)
    assert s.cauchy.real == pytest.approx(mp_cauchy_quadratic(n, m, x), rel=1e-11)


# --- reduced solvers against the general one -------------------------------


@pytest.mark.parametrize("seed", range(3))
def test_common_u_reduction(seed):
    d = Dimensions((4, 3), (2, 3))
    model = random_jointly_correlated(d, seed, common_u=True)
    q = _random_q(np.random.default_rng(seed), d)
    for x in (0.01, 1.0):
        gen = solve_fixed_point(model, q, x, TIGHT)
        red = expand_reduced(model, q, solve_reduced_common_u(model, q, x, TIGHT))
        np.testing.assert_allclose(red.g_b, gen.g_b, atol=1e-8)
        for a, b in zip(red.g_k, gen.g_k):
            np.testing.assert_allclose(a, b, atol=1e-8)
        assert abs(red.cauchy - gen.cauchy) <= 1e-8


@pytest.mark.parametrize("seed", range(3))
def test_l1_inversion_free(seed):
    model = random_jointly_correlated(Dimensions((6,), (2, 3, 1)), seed, common_u=True)
    for x in (0.01, 1.0):
        gen = solve_fixed_point(model, None, x, TIGHT)
        rs = solve_l1_inversion_free(model, x, TIGHT)
        assert abs(rs.cauchy - gen.cauchy) <= 1e-8
        for a, b in zip(rs.g_k, gen.g_k):
            np.testing.assert_allclose(a, b, atol=1e-8)


@pytest.mark.parametrize("seed", range(3))
def test_structured_rician_l1(seed):
    model = structured_rician_model(seed)
    assert not model.is_rayleigh
    for x in (0.01, 1.0):
        gen = solve_fixed_point(model, None, x, TIGHT)
        st_ = solve_structured_rician_l1(model, x, TIGHT)
        assert st_.form == "structured_rician_l1"
        np.testing.assert_allclose(st_.g_b, gen.g_b, atol=1e-8)
        for a, b in zip(st_.g_k, gen.g_k):
            np.testing.assert_allclose(a, b, atol=1e-8)


@pytest.mark.parametrize("rician", [False, True])
def test_variance_profile_diagonal(rng, rician):
    n, m = 7, 5
    sigma2 = rng.uniform(0, 2, (n, m))
    hb = rng.standard_normal((n, m)) + 1j * rng.standard_normal((n, m)) if rician else None
    model = from_variance_profile(sigma2, hbar=hb)
    for x in (0.01, 1.0):
        gen = solve_fixed_point(model, None, x, TIGHT)
        ds = solve_variance_profile_diag(sigma2, hb, x, TIGHT)
        np.testing.assert_allclose(ds.psi_b, np.diag(gen.g_b).real, atol=1e-8)
        np.testing.assert_allclose(ds.psi_m, np.diag(gen.g_k[0]).real, atol=1e-8)
        assert abs(ds.cauchy - gen.cauchy) <= 1e-8


@pytest.mark.parametrize("seed", range(3))
def test_kronecker_closed_form(seed):
    rng = np.random.default_rng(seed)
    r = [[_psd(rng, 4), _psd(rng, 4)], [_psd(rng, 3), _psd(rng, 3)]]
    t = [[_psd(rng, 2), _psd(rng, 3)], [_psd(rng, 2), _psd(rng, 3)]]
    model = from_kronecker(r, t)
    for x in (0.01, 1.0):
        gen = solve_fixed_point(model, None, x, TIGHT)
        _, cauchy, _, _ = kronecker_de(r, t, x)
        assert abs(gen.cauchy - cauchy) <= 1e-8


# --- uniqueness ------------------------------------------------------------


@pytest.mark.parametrize("seed", range(2))
def test_random_initializations_agree(seed):
    model = random_jointly_correlated(Dimensions((4, 3), (2, 2)), seed, rician_hbar=bool(seed))
    rng = np.random.default_rng(seed)
    x = 0.1
    ref = solve_fixed_point(model, None, x, TIGHT).cauchy
    for _ in range(5):
        s = solve_fixed_point(model, None, x, TIGHT, init=random_init(model, x, rng, spread=10.0))
        assert abs(s.cauchy - ref) <= 1e-9


# --- failures ----------------------------------------------------------------


def test_no_convergence_carries_partial_state():
    model = random_jointly_correlated(Dimensions((4,), (2, 2)), 1, rician_hbar=True)
    with pytest.raises(NoConvergence) as info:
        solve_fixed_point(model, None, 1e-3, SolverConfig(max_iters=2))
    err = info.value
    assert err.max_iters == 2 and err.residual > 1e-10
    assert err.partial is not None and err.partial.iters == 2


def test_indefinite_start_is_singular():
    model = random_jointly_correlated(Dimensions((3,), (2,)), 2)
    with pytest.raises(SingularIteration):
        solve_fixed_point(model, None, 1.0, init=(1e6 * np.eye(3), [1e6 * np.eye(2)]))


def test_preconditions():
    rician = random_jointly_correlated(Dimensions((4,), (2,)), 1, rician_hbar=True, common_u=True)
    two_sets = random_jointly_correlated(Dimensions((2, 2), (2,)), 1, common_u=True)
    own_u = random_jointly_correlated(Dimensions((4,), (2, 2)), 1)
    with pytest.raises(PreconditionViolated):
        solve_reduced_common_u(rician, None, 1.0)
    with pytest.raises(PreconditionViolated):
        solve_reduced_common_u(own_u, None, 1.0)
    with pytest.raises(PreconditionViolated):
        solve_l1_inversion_free(two_sets, 1.0)
    with pytest.raises(PreconditionViolated):
        solve_structured_rician_l1(two_sets, 1.0)
    dense_mean = random_jointly_correlated(Dimensions((4,), (3,)), 3, rician_hbar=True, common_u=True)
    with pytest.raises(PreconditionViolated):
        solve_structured_rician_l1(dense_mean, 1.0)


def test_bad_arguments():
    model = zero_model(Dimensions((2,), (2,)))
    for x in (0.0, -1.0, np.inf, np.nan):
        with pytest.raises(ValueError):
            solve_fixed_point(model, None, x)
    with pytest.raises(ValueError):
        SolverConfig(tol=0)
    with pytest.raises(ValueError):
        SolverConfig(damping=1.0)
    with pytest.raises(ValueError):
        solve_fixed_point(model, [2 * np.eye(2)], 1.0)
