import numpy as np
import pytest
from hypothesis import given, strategies as st

from quadbraid.chains import (
    ChainSpec,
    boundary_X,
    commutation_scan,
    covariance_residual,
    fulldyn_trace_rewrite,
    sample_grid,
    semidyn_trace_rewrite,
    t0_closed_sp,
    t0_display_snp,
    transfer,
    chi_conjugate,
)
from quadbraid.models import control_sixvertex, gl2_model, with_T
from quadbraid.sampling import Sampler
from quadbraid.shift_calculus import DifferenceOperator, DynamicalMatrix, diffop_residual

LAMS = Sampler(3, 2).lams(3)


def partial_zero_weight_B(eps, seed=0):
    """B = Σ_i E_ii ⊗ M_i(λ): commutes with h on its first leg."""
    r = np.random.default_rng(seed)
    M = r.normal(size=(2, 2, 2)) + 1j * r.normal(size=(2, 2, 2))

    def fn(u1, u2, lam):
        out = np.zeros((4, 4), dtype=complex)
        for i in range(2):
            e = np.zeros((2, 2))
            e[i, i] = 1
            out += np.kron(e, M[i] * np.cosh(lam[0] - 2 * lam[1] + u1))
        return out

    return DynamicalMatrix((1, 2), 2, 2, fn, eps, "Bpzw")


@pytest.mark.parametrize("model,N", [
    (control_sixvertex(), 2),
    (control_sixvertex(boundary="SNP"), 1),
    (gl2_model(), 2),
])
def test_transfer_matrices_commute(model, N):
    chain = ChainSpec(model, N)
    us, vs, lams = sample_grid(chain, seed=1, k=2)
    assert commutation_scan(chain, us, vs, lams).max_residual < 1e-8


def test_semidynamical_commutes_on_constant_functions():
    chain = ChainSpec(control_sixvertex(flavor="semidynamical", boundary="SNP"), 1)
    us, vs, lams = sample_grid(chain, seed=1, k=2)
    assert commutation_scan(chain, us, vs, lams).restricted_max < 1e-8


def test_perturbed_model_breaks_commutation():
    from quadbraid.models import perturb

    chain = ChainSpec(perturb(gl2_model(chi_mode="identity"), 1e-3, "A"), 2)
    us, vs, lams = sample_grid(chain, seed=1, k=2)
    assert commutation_scan(chain, us, vs, lams).max_residual > 1e-6


@pytest.mark.parametrize("N", [1, 2, 3])
def test_fulldyn_sp_t0_is_n_T1(N):
    for T in (np.eye(2), np.array([[0, 1], [1, 0]])):
        chain = ChainSpec(with_T(gl2_model(chi_mode="identity"), T), N)
        assert diffop_residual(transfer(chain, 0.0).value, t0_closed_sp(chain), LAMS) < 1e-12


def test_fulldyn_sp_t0_with_chi():
    chain = ChainSpec(gl2_model(), 2)
    assert diffop_residual(transfer(chain, 0.0).value, t0_closed_sp(chain), LAMS) < 1e-12


@pytest.mark.parametrize("model", [
    chi_conjugate(control_sixvertex(boundary="SNP", chi_mode="diagonal")),
    chi_conjugate(gl2_model(boundary="SNP")),
    gl2_model(boundary="SNP"),
])
@pytest.mark.parametrize("N", [1, 2])
def test_snp_t0_display(model, N):
    chain = ChainSpec(model, N)
    assert diffop_residual(transfer(chain, 0.0).value, t0_display_snp(chain), LAMS) < 1e-12


@pytest.mark.parametrize("model", [
    control_sixvertex(chi_mode="diagonal"),
    control_sixvertex(boundary="SNP", chi_mode="diagonal"),
    gl2_model(),
    gl2_model(boundary="SNP"),
])
def test_chi_conjugation_covariance(model):
    assert covariance_residual(ChainSpec(model, 2 if model.boundary == "SP" else 1), 0.31 + 0.05j, LAMS) < 1e-10


def test_semidynamical_covariance():
    model = control_sixvertex(flavor="semidynamical", boundary="SNP", chi_mode="diagonal")
    assert covariance_residual(ChainSpec(model, 1), 0.31 + 0.05j, LAMS) < 1e-10


@given(st.integers(0, 10**6))
def test_semidyn_rewrite_with_partial_zero_weight(seed):
    chain = ChainSpec(control_sixvertex(flavor="semidynamical", boundary="SNP"), 1)
    lhs, rhs = semidyn_trace_rewrite(chain, 1, partial_zero_weight_B(chain.eps, seed))
    assert diffop_residual(lhs, rhs, LAMS) < 1e-10


def test_semidyn_rewrite_fails_without_partial_zero_weight():
    chain = ChainSpec(gl2_model(boundary="SNP"), 1)
    lhs, rhs = semidyn_trace_rewrite(chain, 1, chain.model.B)
    assert diffop_residual(lhs, rhs, LAMS) > 1e-3


def test_fulldyn_rewrite_and_diagonal_X():
    chain = ChainSpec(gl2_model(boundary="SNP"), 1)
    lhs, rhs = fulldyn_trace_rewrite(chain, 1)
    assert diffop_residual(lhs, rhs, LAMS) < 1e-10
    for row_shift in (False, True):
        X = boundary_X(chain, 1, row_shift).as_matrix(LAMS[0]).mat
        assert np.abs(X - np.diag(np.diag(X))).max() < 1e-12


def test_X_entries_are_B_sums():
    chain = ChainSpec(gl2_model(boundary="SNP"), 1)
    lam = LAMS[1]
    X = boundary_X(chain, 1).as_matrix(lam).mat
    B = chain.model.B.with_gamma(chain.eps).on(0, 1).at(0.0, 0.0).fn(lam).reshape(2, 2, 2, 2)
    want = [sum(B[i, k, k, i] for k in range(2)) for i in range(2)]
    assert np.allclose(np.diag(X), want)


def test_chain_rejects_bad_arguments():
    with pytest.raises(ValueError):
        ChainSpec(gl2_model(), 0)
    with pytest.raises(ValueError):
        ChainSpec(gl2_model(), 2, u_quantum=(0.0,))
