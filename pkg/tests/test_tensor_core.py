import numpy as np
import pytest
from hypothesis import given, strategies as st

from quadbraid.tensor_core import (
    DenseOperator,
    LegError,
    SingularMatrixError,
    commutator_norm,
    embed,
    inverse,
    kron_legs,
    leg_swap,
    partial_trace,
    partial_transpose,
    permutation,
)

seeds = st.integers(0, 2**31 - 1)


def rand_op(seed, legs, n=2):
    r = np.random.default_rng(seed)
    d = n ** len(legs)
    return DenseOperator.from_matrix(r.normal(size=(d, d)) + 1j * r.normal(size=(d, d)), legs, n)


def test_permutation_squares_to_identity():
    P = permutation(1, 2, (1, 2), 2)
    assert np.allclose((P @ P).mat, np.eye(4))


def test_permutation_swaps_product_states():
    a, b = np.array([1, 2j]), np.array([3, -1])
    P = permutation(1, 2, (1, 2), 2).mat
    assert np.allclose(P @ np.kron(a, b), np.kron(b, a))


@given(seeds)
def test_leg_swap_is_conjugation_by_P(seed):
    M = rand_op(seed, (1, 2))
    P = permutation(1, 2, (1, 2), 2)
    assert np.allclose(leg_swap(M, 1, 2).mat, (P @ M @ P).mat)


@given(seeds)
def test_from_matrix_reorders_factors(seed):
    r = np.random.default_rng(seed)
    a, b = r.normal(size=(2, 2)), r.normal(size=(2, 2))
    M = DenseOperator.from_matrix(np.kron(a, b), (5, 3), 2)
    assert np.allclose(M.mat, np.kron(b, a))
    assert np.allclose(M.matrix_in((5, 3)), np.kron(a, b))


@given(seeds)
def test_partial_trace_of_product(seed):
    r = np.random.default_rng(seed)
    a, b = r.normal(size=(2, 2)), r.normal(size=(2, 2))
    M = kron_legs([a, b], (1, 2), 2)
    assert np.allclose(partial_trace(M, 1).mat, np.trace(a) * b)
    assert np.allclose(partial_trace(M, 2).mat, np.trace(b) * a)


@given(seeds)
def test_partial_transpose_twice_is_identity(seed):
    M = rand_op(seed, (1, 2, 3))
    assert np.allclose(partial_transpose(partial_transpose(M, [1, 3]), [1, 3]).mat, M.mat)


def test_full_partial_transpose_is_transpose(rng):
    M = rand_op(3, (1, 2))
    assert np.allclose(partial_transpose(M, [1, 2]).mat, M.mat.T)


@given(seeds)
def test_embed_commutes_with_disjoint_operators(seed):
    A = rand_op(seed, (1,))
    B = rand_op(seed + 1, (2,))
    assert commutator_norm(embed(A, (1, 2)), embed(B, (1, 2))) < 1e-12


def test_embed_rejects_foreign_legs():
    with pytest.raises(LegError):
        embed(DenseOperator.identity((4,), 2), (1, 2))


def test_duplicate_legs_rejected():
    with pytest.raises(LegError):
        DenseOperator.from_matrix(np.eye(4), (1, 1), 2)


def test_singular_inverse_refused():
    with pytest.raises(SingularMatrixError):
        inverse(DenseOperator((1,), 2, np.array([[1, 1], [1, 1]], dtype=complex)))


@given(seeds)
def test_inverse_roundtrip(seed):
    M = rand_op(seed, (1, 2))
    assert np.allclose((M @ M.inverse()).mat, np.eye(4), atol=1e-8)
