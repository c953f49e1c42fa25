import json

import numpy as np
import pytest

from quadbraid.models import (
    ConfigError,
    control_sixvertex,
    gl2_model,
    gl2_R,
    gl2_tr_chi_sc_inverse,
    load_model,
    model_from_config,
    perturb,
    with_T,
)
from quadbraid.chains import ChainSpec, tr_chi_sc
from quadbraid.shift_calculus import constant_matrix
from quadbraid.verifier import (
    check_dual_exchange,
    check_exchange,
    check_gnf,
    check_literal_dual,
    check_unitarity,
    check_zero_weight,
    identity_suite,
    zero_weight_defect,
)
from quadbraid.tensor_core import DenseOperator

S = 5


@pytest.fixture(scope="module")
def gl2():
    return gl2_model()


def test_gl2_suite_passes(gl2):
    reps = identity_suite(gl2, samples=S)
    assert len(reps) == 8
    assert all(r.passed for r in reps), [(r.name, r.max_residual) for r in reps]


def test_sixvertex_suite_passes():
    reps = identity_suite(control_sixvertex(chi_mode="diagonal"), samples=S)
    assert all(r.passed for r in reps), [(r.name, r.max_residual) for r in reps]


@pytest.mark.parametrize("which", ["A", "B", "D"])
def test_perturbed_structure_matrix_fails(gl2, which):
    bad = perturb(gl2, 1e-3, which)
    reps = identity_suite(bad, samples=S)
    assert not all(r.passed for r in reps)


def test_gnf_with_wrong_step_fails(gl2):
    assert check_gnf(gl2, gl2.A, step=-gl2.step, samples=S).passed
    assert not check_gnf(gl2, gl2.A, step=gl2.step, samples=S).passed


def test_sigma_x_is_a_symmetry_but_generic_T_is_not(gl2):
    sx = np.array([[0, 1], [1, 0]])
    assert check_exchange(gl2, with_T(gl2, sx).T, samples=S).passed
    assert not check_exchange(gl2, with_T(gl2, np.array([[1, 2], [3, 4]])).T, samples=S).passed


def test_dual_exchange_rejects_identity_K(gl2):
    one = constant_matrix(np.eye(2), (1,), 2, arity=1, gamma=gl2.step)
    assert not check_dual_exchange(gl2, one, samples=S).passed


def test_literal_dual_relation_is_recorded_not_satisfied(gl2):
    assert not check_literal_dual(gl2, samples=S).passed


def test_zero_weight_total_and_partial(gl2):
    assert check_zero_weight(gl2, [gl2.B, gl2.C], "total", samples=S).passed
    R = DenseOperator((1, 2), 2, gl2_R(np.array([0.3, -0.1]), 0.4, 0.2))
    assert zero_weight_defect(R, "total") < 1e-12
    assert zero_weight_defect(R, "partial", leg=1) > 1e-3


def test_unitarity_gl2(gl2):
    assert check_unitarity(gl2, samples=S).passed


def test_tr_chi_sc_matches_closed_inverse(gl2):
    chain = ChainSpec(gl2, 2)
    for lam in ([0.3 + 0.1j, -0.5], [0.1, 0.6 - 0.2j]):
        lam = np.array(lam)
        val = tr_chi_sc(chain).as_matrix(lam).mat[0, 0]
        assert abs(1 / val - gl2_tr_chi_sc_inverse(lam, gl2.gamma, gl2.xi)) < 1e-12


def test_config_round_trip(tmp_path):
    p = tmp_path / "m.json"
    p.write_text(json.dumps({"schema": 1, "name": "gl2", "gamma": 0.25, "xi": 1.3}))
    m = load_model(p)
    assert m.name == "gl2" and abs(m.gamma - 0.25) < 1e-15


@pytest.mark.parametrize("cfg", [
    {"name": "gl2", "colour": 3},
    {"name": "nope"},
    {"gamma": 0.2},
    {"name": "gl2", "flavor": "nondynamical"},
    {"name": "sixvertex", "flavor": "fully_dynamical"},
])
def test_bad_configs_rejected(cfg):
    with pytest.raises(ConfigError):
        model_from_config(cfg)


def test_missing_model_file(tmp_path):
    with pytest.raises(ConfigError):
        load_model(tmp_path / "missing.json")
