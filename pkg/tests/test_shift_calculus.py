import numpy as np
import pytest
from hypothesis import given, strategies as st

from quadbraid.shift_calculus import (
    DifferenceOperator,
    DynamicalMatrix,
    diffop_add,
    diffop_inverse,
    diffop_mul,
    diffop_residual,
    diffop_trace,
    exp_shift,
    is_pure_function,
    pointwise_inverse,
    sc_shift,
    weight_shift_embed,
)

seeds = st.integers(0, 2**31 - 1)
GAMMA = 0.3 - 0.1j
LAMS = [np.array([0.2 + 0.1j, -0.4]), np.array([0.7, 0.1 - 0.2j])]


def smooth(seed, legs, n=2):
    """A random λ-dependent matrix function on ``legs``."""
    r = np.random.default_rng(seed)
    d = n ** len(legs)
    A, B = r.normal(size=(2, d, d)) + 1j * r.normal(size=(2, d, d))
    c = r.normal(size=n)
    return DynamicalMatrix(tuple(legs), n, 0, lambda lam: A + np.cos(c @ lam) * B, GAMMA)


def test_exp_shift_inverse_pair():
    I = diffop_mul(exp_shift(1, 1, 2, GAMMA), exp_shift(1, -1, 2, GAMMA))
    assert diffop_residual(I, DifferenceOperator.identity((1,), 2, GAMMA), LAMS) < 1e-15


def test_exp_shift_rejects_bad_sign():
    with pytest.raises(ValueError):
        exp_shift(1, 2, 2, GAMMA)


@given(seeds)
def test_shift_moves_through_function(seed):
    F = smooth(seed, (2,))
    left = diffop_mul(exp_shift(1, 1, 2, GAMMA), DifferenceOperator.from_function(F))
    right = diffop_mul(DifferenceOperator.from_function(weight_shift_embed(F, [1])), exp_shift(1, 1, 2, GAMMA))
    assert diffop_residual(left, right.embed(left.legs), LAMS) < 1e-12


@given(seeds)
def test_product_acts_as_composition(seed):
    X = diffop_mul(DifferenceOperator.from_function(smooth(seed, (1,))), exp_shift(1, 1, 2, GAMMA))
    Y = diffop_mul(exp_shift(1, -1, 2, GAMMA), DifferenceOperator.from_function(smooth(seed + 1, (1,))))
    f = lambda lam: np.array([np.sin(lam[0]), lam[0] * lam[1]])
    lam = LAMS[0]
    lhs = diffop_mul(X, Y).act(f, lam)
    rhs = X.act(lambda l: Y.act(f, l), lam)
    assert np.allclose(lhs, rhs)


@given(seeds)
def test_sc_shift_round_trip(seed):
    M = smooth(seed, (1, 2))
    for mode in ("SC", "SL"):
        back = sc_shift(sc_shift(M, mode, 1), mode, -1)
        assert np.allclose(back.fn(LAMS[0]), M.fn(LAMS[0]))


def test_sc_shift_reads_column_index():
    M = DynamicalMatrix((1,), 2, 0, lambda lam: np.diag(lam) @ np.ones((2, 2)), GAMMA)
    lam = LAMS[1]
    got = sc_shift(M, "SC", 1).fn(lam)
    want = np.array([[lam[0] - GAMMA, lam[0]], [lam[1], lam[1] - GAMMA]])
    assert np.allclose(got, want)


@given(seeds)
def test_diffop_inverse_of_monomial(seed):
    X = diffop_mul(DifferenceOperator.from_function(smooth(seed, (1, 2))), exp_shift(2, 1, 2, GAMMA))
    inv = diffop_inverse(X, LAMS)
    one = DifferenceOperator.identity((1, 2), 2, GAMMA)
    assert diffop_residual(diffop_mul(inv, X), one, LAMS) < 1e-9
    assert diffop_residual(diffop_mul(X, inv), one, LAMS) < 1e-9


def test_diffop_inverse_refuses_sums():
    X = diffop_add(exp_shift(1, 1, 2, GAMMA), exp_shift(1, -1, 2, GAMMA))
    with pytest.raises(ValueError):
        diffop_inverse(X, LAMS)


def test_pointwise_inverse_refuses_shifts():
    with pytest.raises(ValueError):
        pointwise_inverse(exp_shift(1, 1, 2, GAMMA)).fn(LAMS[0])


def test_trace_of_exp_shift_is_sum_of_shifts():
    t = diffop_trace(exp_shift(0, 1, 2, GAMMA), 0)
    assert set(t.raw_terms(LAMS[0])) == {(1, 0), (0, 1)}
    assert not is_pure_function(t, LAMS)


@given(seeds)
def test_restriction_is_multiplicative_for_constants(seed):
    r = np.random.default_rng(seed)
    A, B = r.normal(size=(2, 2, 2))
    X = diffop_mul(DifferenceOperator.from_function(lambda lam: A, legs=(1,), n=2, gamma=GAMMA),
                   diffop_add(exp_shift(1, 1, 2, GAMMA), exp_shift(1, -1, 2, GAMMA)))
    Y = diffop_mul(DifferenceOperator.from_function(lambda lam: B, legs=(1,), n=2, gamma=GAMMA),
                   exp_shift(1, 1, 2, GAMMA))
    lam = LAMS[0]
    lhs = diffop_mul(X, Y).restricted_to_constants(lam).mat
    assert np.allclose(lhs, X.restricted_to_constants(lam).mat @ Y.restricted_to_constants(lam).mat)
