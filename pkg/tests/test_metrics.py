import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bifinn.metrics import SampleErrors, aggregate, batch_errors, sample_errors, verify_bound


def random_case(rng, n=12, r=3):
    V, _ = np.linalg.qr(rng.standard_normal((n, r)))
    u = rng.standard_normal(n)
    c = V.T @ u
    c_pred = c + rng.standard_normal(r) * rng.uniform(0, 1)
    return u, V @ c_pred, c, c_pred, V


def test_exact_prediction_in_span_is_error_free():
    V = np.eye(3)[:, :2]
    u = np.array([1.0, 2.0, 0.0])
    e = sample_errors(u, u, V.T @ u, V.T @ u, V)
    assert (e.e_a, e.e_p, e.e_c) == (0.0, 0.0, 0.0)


def test_exact_coefficients_give_projection_error():
    V = np.eye(3)[:, :1]
    u = np.array([3.0, 4.0, 0.0])
    c = V.T @ u
    e = sample_errors(u, V @ c, c, c, V)
    assert e.e_a == e.e_p == pytest.approx(0.8, abs=1e-15)
    assert e.e_c == 0.0


def test_hand_computed_example():
    # u = (3, 4), V = e1, c~ = -1: residual (4, 4), e_p = 4/5, e_c = 4/5
    V = np.array([[1.0], [0.0]])
    u = np.array([3.0, 4.0])
    e = sample_errors(u, np.array([-1.0, 0.0]), [3.0], [-1.0], V)
    assert e.e_p == pytest.approx(4 / 5, abs=1e-15)
    assert e.e_c == pytest.approx(4 / 5, abs=1e-15)
    assert e.e_a == pytest.approx(math.sqrt(32) / 5, abs=1e-15)
    assert verify_bound([e]).holds


def test_pythagoras_example():
    # the error splits into orthogonal parts: e_a^2 = e_p^2 + e_c^2
    V = np.array([[1.0], [0.0]])
    u = np.array([3.0, 4.0])
    e = sample_errors(u, np.array([8.0, 0.0]), [3.0], [8.0], V)
    assert (e.e_p, e.e_c) == pytest.approx((4 / 5, 1.0), abs=1e-15)
    assert e.e_a == pytest.approx(math.sqrt(41) / 5, abs=1e-15)


def test_injected_fault_is_reported():
    bad = SampleErrors(e_a=0.1, e_p=0.2, e_c=0.05, sample_id=7)
    rep = verify_bound([bad])
    assert not rep.holds
    assert rep.violations[0][0] == 7
    assert "VIOLATION" in rep.format() and "7:" in rep.format()


def test_ok_report_format():
    rng = np.random.default_rng(0)
    rep = verify_bound([sample_errors(*random_case(rng))])
    assert rep.holds and rep.format().startswith("OK bound")


def test_input_validation():
    V = np.eye(3)[:, :2]
    with pytest.raises(ValueError, match="zero"):
        sample_errors(np.zeros(3), np.zeros(3), np.zeros(2), np.zeros(2), V)
    with pytest.raises(ValueError):
        sample_errors(np.ones(3), np.ones(3), np.zeros(2), np.zeros(3), V)
    with pytest.raises(ValueError):
        aggregate([])


def test_aggregate_is_the_mean():
    errs = [SampleErrors(0.3, 0.1, 0.25), SampleErrors(0.5, 0.2, 0.4)]
    agg = aggregate(errs, r=4, variant="mpodnn", N_train=10)
    assert (agg.eps_a, agg.eps_p, agg.eps_c) == pytest.approx((0.4, 0.15, 0.325), abs=1e-15)
    assert agg.M == 2 and agg.r == 4


def test_batch_matches_single():
    rng = np.random.default_rng(3)
    V = random_case(rng)[4]
    U = np.column_stack([rng.standard_normal(12) for _ in range(4)])
    C = V.T @ U
    Cp = C + 0.1 * rng.standard_normal(C.shape)
    errs = batch_errors(U, V @ Cp, C, Cp, V, ids=list("abcd"))
    assert [e.sample_id for e in errs] == list("abcd")
    e1 = sample_errors(U[:, 1], V @ Cp[:, 1], C[:, 1], Cp[:, 1], V)
    np.testing.assert_allclose([errs[1].e_a, errs[1].e_p, errs[1].e_c], [e1.e_a, e1.e_p, e1.e_c], rtol=1e-14)


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 2**31), st.integers(2, 30), st.integers(1, 6))
def test_bound_holds_for_random_predictions(seed, n, r):
    rng = np.random.default_rng(seed)
    r = min(r, n)
    errs = [sample_errors(*random_case(rng, n, r), sample_id=i) for i in range(5)]
    rep = verify_bound(errs)
    assert rep.holds, rep.format()


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**31), st.floats(1e-6, 1e6))
def test_errors_are_scale_invariant(seed, scale):
    rng = np.random.default_rng(seed)
    u, up, c, cp, V = random_case(rng)
    a = sample_errors(u, up, c, cp, V)
    b = sample_errors(scale * u, scale * up, scale * c, scale * cp, V)
    np.testing.assert_allclose([b.e_a, b.e_p, b.e_c], [a.e_a, a.e_p, a.e_c], rtol=1e-10)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(st.floats(0, 1), st.floats(0, 1), st.floats(0, 1)), min_size=1, max_size=20),
       st.lists(st.tuples(st.floats(0, 1), st.floats(0, 1), st.floats(0, 1)), min_size=1, max_size=20))
def test_aggregate_is_weighted_linear(xs, ys):
    a, b = [SampleErrors(*t) for t in xs], [SampleErrors(*t) for t in ys]
    whole = aggregate(a + b)
    pa, pb = aggregate(a), aggregate(b)
    w = len(a) / (len(a) + len(b))
    for f in ("eps_a", "eps_p", "eps_c"):
        assert getattr(whole, f) == pytest.approx(w * getattr(pa, f) + (1 - w) * getattr(pb, f), abs=1e-14)
