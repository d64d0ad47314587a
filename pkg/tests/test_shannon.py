import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from jcmac.channel_model import (
    Dimensions,
    InputCovarianceSet,
    deterministic_model,
    from_kronecker,
    from_variance_profile,
    random_jointly_correlated,
    with_bases,
    zero_model,
)
from jcmac.de_core import SolverConfig
from jcmac.errors import PreconditionViolated
from jcmac.linalg import random_unitary
from jcmac.shannon import (
    derivative_check,
    evaluate,
    select_form,
    shannon_transform,
    shannon_transform_reduced,
)

from .oracles import deterministic_mi, kronecker_de, mp_quadrature, verdu_mi

TIGHT = SolverConfig(tol=1e-13)
XS = [0.01, 0.1, 1.0, 10.0]


def test_zero_channel_has_zero_information():
    r = shannon_transform(zero_model(Dimensions((2, 2), (1, 3))), None, 0.3)
    assert r.I == 0.0 and r.V == 0.0


@pytest.mark.parametrize("x", XS)
def test_deterministic_channel(rng, x):
    d = Dimensions((4, 3), (2, 3))
    h = rng.standard_normal((d.N, d.M)) + 1j * rng.standard_normal((d.N, d.M))
    r = shannon_transform(deterministic_model(d, h), None, x)
    assert abs(r.I - deterministic_mi(h, x)) <= 1e-8
    assert r.iters <= 2


@given(st.integers(0, 2**32 - 1), st.booleans())
@settings(max_examples=20)
def test_two_log_det_forms_agree(seed, rician):
    d = Dimensions((3, 4), (2, 3, 2))
    model = random_jointly_correlated(d, seed, rician_hbar=rician)
    for x in (0.05, 2.0):
        r = shannon_transform(model, None, x, TIGHT)
        assert r.discrepancy <= 1e-8


@given(st.integers(0, 2**32 - 1))
@settings(max_examples=10)
def test_derivative_identity(seed):
    model = random_jointly_correlated(Dimensions((4, 3), (2, 2)), seed, rician_hbar=seed % 2 == 0)
    chk = derivative_check(model, None, 0.3, cfg=TIGHT)
    assert chk.rel_err <= 1e-5


@pytest.mark.parametrize("rician", [False, True])
def test_monotone_decreasing_in_x(rician):
    model = random_jointly_correlated(Dimensions((6, 6), (2, 2, 2)), 3, rician_hbar=rician)
    vals = [shannon_transform(model, None, x).I for x in np.geomspace(1e-3, 1e2, 12)]
    assert all(v > 0 for v in vals)
    assert all(a > b for a, b in zip(vals, vals[1:]))


def test_kronecker_closed_form(rng):
    def psd(n):
        u = random_unitary(n, rng)
        return (u * rng.uniform(0.1, 2.0, n)) @ u.conj().T

    r = [[psd(4), psd(4), psd(4)], [psd(3), psd(3), psd(3)]]
    t = [[psd(2), psd(1), psd(3)], [psd(2), psd(1), psd(3)]]
    model = from_kronecker(r, t)
    for x in XS:
        want, _, _, _ = kronecker_de(r, t, x)
        assert shannon_transform(model, None, x, TIGHT).I == pytest.approx(want, abs=1e-8)


@pytest.mark.parametrize("n,m", [(20, 20), (30, 10), (10, 30)])
def test_iid_matches_marchenko_pastur(n, m):
    model = from_variance_profile(np.full((n, m), n / m))
    for x in (0.05, 1.0):
        _, v = mp_quadrature(n, m, x)
        r = evaluate(model, None, x, TIGHT)
        assert r.V == pytest.approx(v, rel=1e-8)
        assert r.I == pytest.approx(verdu_mi(n, m, x), rel=1e-8)


@pytest.mark.parametrize("seed", range(3))
def test_unitary_invariance_single_set(seed):
    rng = np.random.default_rng(100 + seed)
    d = Dimensions((5,), (2, 3))
    model = random_jointly_correlated(d, seed, common_u=True)
    u1 = random_unitary(5, rng)
    u = [[u1] * d.K]
    v = [[random_unitary(m, rng) for m in d.m_k]]
    rotated = with_bases(model, u=u, v=v)
    for x in (0.01, 1.0):
        a = shannon_transform(model, None, x, TIGHT).V
        b = shannon_transform(rotated, None, x, TIGHT).V
        assert abs(a - b) <= 1e-8


@pytest.mark.parametrize("seed", range(3))
def test_reduced_forms_match_general(seed):
    rng = np.random.default_rng(seed)
    l1 = random_jointly_correlated(Dimensions((6,), (2, 3)), seed, common_u=True)
    multi = random_jointly_correlated(Dimensions((4, 3), (2, 2)), seed, common_u=True)
    qs = []
    for m in multi.dims.m_k:
        a = rng.standard_normal((m, m)) + 1j * rng.standard_normal((m, m))
        qs.append(a @ a.conj().T * m / np.trace(a @ a.conj().T).real)
    q = InputCovarianceSet(tuple(qs))
    for x in (0.01, 1.0):
        gen = shannon_transform(l1, None, x, TIGHT).I
        assert abs(shannon_transform_reduced(l1, None, x, TIGHT, form="reduced_l1").I - gen) <= 1e-8
        assert abs(shannon_transform_reduced(l1, None, x, TIGHT, form="reduced_common_u").I - gen) <= 1e-8
        gen = shannon_transform(multi, q, x, TIGHT).I
        assert abs(shannon_transform_reduced(multi, q, x, TIGHT).I - gen) <= 1e-8


def test_form_selection_and_dispatch():
    l1 = random_jointly_correlated(Dimensions((4,), (2,)), 1, common_u=True)
    multi = random_jointly_correlated(Dimensions((2, 2), (2,)), 1, common_u=True)
    general = random_jointly_correlated(Dimensions((2, 2), (2, 1)), 1)
    rician = random_jointly_correlated(Dimensions((4,), (2,)), 1, common_u=True, rician_hbar=True)
    q = InputCovarianceSet((np.diag([1.5, 0.5]),))
    assert select_form(l1) == "reduced_l1"
    assert select_form(l1, q) == "reduced_common_u"
    assert select_form(multi) == "reduced_common_u"
    assert select_form(general) == "general"
    assert select_form(rician) == "general"
    assert evaluate(l1, None, 1.0).form_used == "reduced_l1"
    assert evaluate(l1, None, 1.0, form="general").form_used == "general"
    assert evaluate(l1, q, 1.0, form="general").form_used == "general_Q"
    with pytest.raises(PreconditionViolated):
        shannon_transform_reduced(l1, q, 1.0, form="reduced_l1")
    with pytest.raises(PreconditionViolated):
        evaluate(rician, None, 1.0, form="reduced")
    with pytest.raises(ValueError):
        shannon_transform_reduced(l1, None, 1.0, form="bogus")


def test_report_units():
    model = random_jointly_correlated(Dimensions((3,), (2,)), 0)
    r = evaluate(model, None, 0.5)
    assert r.V == pytest.approx(r.I / 3)
    assert r.I_bits == pytest.approx(r.I / np.log(2))


def test_derivative_check_argument_range():
    with pytest.raises(ValueError):
        derivative_check(zero_model(Dimensions((1,), (1,))), None, 1.0, h=2.0)


def test_derivative_check_degenerate_channels(rng):
    zero = derivative_check(zero_model(Dimensions((2,), (2,))), None, 0.5)
    assert abs(zero.lhs) <= 1e-12 and abs(zero.rhs) <= 1e-12
    d = Dimensions((3, 2), (2, 2))
    h = rng.standard_normal((d.N, d.M)) + 1j * rng.standard_normal((d.N, d.M))
    for x in (0.05, 1.0):
        assert derivative_check(deterministic_model(d, h), None, x).rel_err <= 1e-6
