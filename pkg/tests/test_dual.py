import json

import numpy as np
import pytest

from dualsdp import LoadInstance, Prediction, complete
from dualsdp.dual import DualSolution, dual_objective, verify_dual

from .conftest import random_prediction_vector


def _completed(net, seed=0):
    rng = np.random.default_rng(seed)
    inst = LoadInstance.reference(net)
    sol, _ = complete(net, Prediction.from_vector(net, random_prediction_vector(net, rng)), inst)
    return inst, sol


def test_zero_dual_objective_is_zero(net3):
    assert dual_objective(net3, LoadInstance.reference(net3), DualSolution.zeros(net3)) == 0.0


def test_hand_built_two_bus_objective(net2):
    inst = LoadInstance([0.0, 0.5], [0.0, 0.1])
    d = DualSolution.zeros(net2)
    d.lam_p[:] = [10.0, 12.0]
    d.lam_q[:] = [1.0, -2.0]
    d.mu_w_lo[:] = [0.5, 0.0]
    d.mu_w_hi[:] = [0.0, 0.25]
    d.mu_pg_lo[:] = [3.0, 0.0]
    d.mu_pg_hi[:] = [0.0, 4.0]
    d.mu_qg_lo[:] = [0.0, 1.5]
    d.mu_qg_hi[:] = [2.0, 0.0]
    d.nu_fwd[0] = [0.7, 0.0, 0.0]
    d.nu_rev[0] = [0.3, 0.0, 0.0]
    # load terms: 0.5*12 + 0.1*(-2) = 5.8
    # voltage:  0.95^2*0.5 - 1.05^2*0.25 = 0.45125 - 0.275625 = 0.175625
    # p bounds: 0*3 - p_max[1]*4 = 0 (dummy at bus 2)
    # q bounds: q_min[1]*1.5 - q_max[0]*2 = 0 - 1*2 = -2
    # thermal:  -2.0 * (0.7 + 0.3) = -2.0
    expect = 5.8 + 0.175625 + 0.0 - 2.0 - 2.0
    assert dual_objective(net2, inst, d) == pytest.approx(expect, abs=1e-12)


def test_completed_solution_passes(fixture_net):
    for seed in range(20):
        inst, sol = _completed(fixture_net, seed)
        rep = verify_dual(fixture_net, inst, sol)
        assert rep.passed, rep.violated
        assert rep.violated == []


def test_psd_tamper_detected(net3):
    inst, sol = _completed(net3, 1)
    rep0 = verify_dual(net3, inst, sol)
    assert rep0.min_eig_S == pytest.approx(0.0, abs=1e-9)
    # push S below zero along its null vector; keep A + S = 0 out of the picture
    bad = sol.copy()
    bad.S = bad.S - 2e-8 * np.eye(3) - 1e-9 * np.eye(3)
    rep = verify_dual(net3, inst, bad)
    assert rep.min_eig_S < -1e-8
    assert not rep.passed
    assert "psd" in rep.violated


def test_lambda_perturbation_shows_in_equalities(net3):
    inst, sol = _completed(net3, 2)
    bad = sol.copy()
    bad.lam_p[0] += 1e-3
    rep = verify_dual(net3, inst, bad)
    assert not rep.passed
    assert rep.max_eq_residual == pytest.approx(1e-3, rel=1e-6)
    assert "pg" in rep.violated and "flow_p_fwd" in rep.violated


def test_cone_and_sign_tamper(net3):
    inst, sol = _completed(net3, 3)
    bad = sol.copy()
    bad.nu_fwd[0, 0] -= 1e-6
    assert "cone" in verify_dual(net3, inst, bad).violated
    bad = sol.copy()
    bad.mu_qg_lo[0] = -1e-6
    bad.lam_q[0] += 1e-6
    rep = verify_dual(net3, inst, bad)
    assert "sign" in rep.violated


def test_nan_fails(net3):
    inst, sol = _completed(net3, 4)
    bad = sol.copy()
    bad.lam_p[1] = np.nan
    assert not verify_dual(net3, inst, bad).passed


def test_tolerance_overrides_are_echoed(net3):
    inst, sol = _completed(net3, 5)
    rep = verify_dual(net3, inst, sol, tol_eq=1e-6, tol_cone=1e-7, tol_psd=-1e-5)
    assert rep.tolerances == {"eq": 1e-6, "cone": 1e-7, "psd": -1e-5}
    assert rep.to_dict()["pass"] is True


def test_json_round_trip(net14):
    inst, sol = _completed(net14, 6)
    back = DualSolution.from_json(sol.to_json())
    for k, v in sol.__dict__.items():
        if isinstance(v, np.ndarray):
            np.testing.assert_array_equal(getattr(back, k), v)
    assert back.objective == sol.objective
    assert verify_dual(net14, inst, back).passed


def test_json_schema_checked(net2):
    d = json.loads(DualSolution.zeros(net2).to_json())
    d["version"] = 99
    with pytest.raises(ValueError, match="unsupported"):
        DualSolution.from_dict(d)


def test_stored_diagonal_imaginary_part_fails_verification(net2):
    inst, sol = _completed(net2, 7)
    d = json.loads(sol.to_json())
    d["S"][1] = 1e-3  # imaginary part of S[0, 0]
    rep = verify_dual(net2, inst, DualSolution.from_dict(d))
    assert "psd_link" in rep.violated


def test_shape_mismatch(net2, net3):
    with pytest.raises(ValueError):
        verify_dual(net3, LoadInstance.reference(net3), DualSolution.zeros(net2))
