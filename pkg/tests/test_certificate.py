import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tspmp.calculus import GridFunction
from tspmp.certificate import (
    Extremal, PMPReport, adjoint_solve, certify, check_averaged_hamiltonian, check_free_time,
    check_opp_minimization, check_parameter_condition, check_rd_maximization, check_rs_condition,
    check_transversality, derive_multipliers, hamiltonian, terminal_adjoint,
)
from tspmp.dynamics import simulate
from tspmp.errors import DimensionMismatch, NontrivialityViolation, NotApplicable, NotRD, NotRS
from tspmp.registry import get_problem, reference_extremal


def test_hamiltonian_examples():
    p = get_problem("ex00")
    assert hamiltonian(p, [0.3], [0.4], [2.0], -1.0, 0) == pytest.approx(2 * 0.4 - 1)
    assert hamiltonian(p, [0.3], [0.4], [0.0], 0.0, 0) == 0.0
    p = get_problem("ex000")
    q, u, pp, p0 = 0.3, 0.8, 1.7, -0.6
    assert hamiltonian(p, [q], [u], [pp], p0, 1) == pytest.approx(pp * (u - q) + p0 * (u * u - q * q) / 2)
    with pytest.raises(DimensionMismatch):
        hamiltonian(p, [q, q], [u], [pp], p0, 1)


def test_adjoint_examples():
    p = get_problem("ex00")
    tr = simulate(p, GridFunction([0, 1, 2], [0.5, 1, 1]), b=2.0)
    assert adjoint_solve(p, tr, [0.7], -1.0).values[:, 0].tolist() == [0.7] * 3
    for name, expect in (("ex0", [0, 0, 0]), ("ex000", [1, 0, 0])):
        p = get_problem(name)
        tr = reference_extremal(name).trajectory
        assert adjoint_solve(p, tr, [0.0], -1.0).values[:, 0].tolist() == expect


def test_terminal_adjoint_examples():
    p = get_problem("ex00")
    pa, pb = terminal_adjoint(p, ([0.0], [1.5]), [0.3, -0.2])
    assert pa.tolist() == [-0.3] and pb.tolist() == [-0.2]
    pa, pb = terminal_adjoint(get_problem("ex0"), ([0.0], [1.0]), [0.4])
    assert pb.tolist() == [0.0]
    assert all(v.tolist() == [0.0] for v in terminal_adjoint(p, ([0.0], [1.5]), [0.0, 0.0]))


def test_ex0_conditions():
    p = get_problem("ex0")
    ext = reference_extremal("ex0")
    assert ext.p0 == -1 and ext.psi.tolist() == [0.0]
    assert np.all(ext.p.values == 0)
    c = check_rs_condition(p, ext, 0.0)
    assert c.passed and np.all(np.abs(c.residuals) <= 1e-15)
    # u*(1) = 1 is the upper bound and ∂H/∂u = 2 points outward
    c = check_rs_condition(p, ext, 1.0)
    assert c.passed and c.grad_u.tolist() == [2.0] and c.residuals.tolist() == [-2.0]
    for r in (0.0, 1.0):
        assert check_opp_minimization(p, ext, r).difference <= 1e-12
    tv = check_transversality(p, ext)
    assert tv.passed and tv.defect_a == 0 and tv.defect_b == 0
    with pytest.raises(NotRS):
        check_rs_condition(p, ext, 2.0)
    with pytest.raises(NotRD):
        check_rd_maximization(p, ext, 0.0)
    with pytest.raises(NotApplicable):
        check_free_time(p, ext)


def test_ex0_report():
    rep = certify(get_problem("ex0"), reference_extremal("ex0"))
    assert rep.exit_code == 0
    assert rep.verdicts["rs_condition"] == "pass" and rep.verdicts["rd_maximization"] == "not_applicable"
    assert rep.max_h(0) == 1.0 and rep.max_h(1) == 1.0
    assert rep.hamiltonian_table[0]["h_star"] == 0.0
    assert rep.hamiltonian_table[0]["flag"] == "EXPECTED"
    caveats = rep.to_json()["caveats"]
    assert [c["t"] for c in caveats] == [0.0]


def test_ex000_report():
    p = get_problem("ex000")
    ext = reference_extremal("ex000")
    assert ext.p.values[:, 0].tolist() == [1, 0, 0] and ext.p0 == -1
    rep = certify(p, ext)
    assert rep.max_h(0) == 0.5 and rep.max_h(1) == 0.0
    assert rep.exit_code == 0
    # H is concave in u and Ω is convex: the RS pass upgrades to maximization over Ω
    for r in (0.0, 1.0):
        assert check_rs_condition(p, ext, r).passed
        k = ext.trajectory.q.index(r)
        row = rep.hamiltonian_table[k]
        assert row["max_h"] - row["h_star"] <= 1e-12


def test_ex00_free_time_not_applicable():
    p = get_problem("ex00")
    ext = reference_extremal("ex00")
    with pytest.raises(NotApplicable) as info:
        check_free_time(p, ext)
    assert info.value.value == pytest.approx(ext.p0 / ext.nu) and info.value.value != 0
    rep = certify(p, ext)
    assert rep.verdicts["free_time"] == "not_applicable"
    with pytest.raises(NotApplicable):
        check_averaged_hamiltonian(p, ext)


def test_zero_multipliers_rejected():
    ext = reference_extremal("ex0").scaled(0.0)
    with pytest.raises(NontrivialityViolation):
        certify(get_problem("ex0"), ext)


def test_lqr_closed_form_passes():
    p = get_problem("lqr1d")
    ext = reference_extremal("lqr1d", h=1e-3)
    rep = certify(p, ext)
    assert rep.verdicts["rd_maximization"] == "pass"
    assert rep.worst_rd[0] <= 1e-6
    assert rep.verdicts["transversality"] == "pass"


def test_double_integrator_free_time():
    p = get_problem("double_integrator_mintime")
    ext = reference_extremal("double_integrator_mintime", h=1e-3)
    assert abs(check_free_time(p, ext)) <= 1e-6
    assert abs(check_averaged_hamiltonian(p, ext)) <= 1e-5


def test_time_rescaled_parameter_condition():
    p = get_problem("time_rescaled")
    ext = reference_extremal("time_rescaled", h=1e-3)
    defect = check_parameter_condition(p, ext)
    # ∂H/∂λ = H/λ here, so the defect is the averaged Hamiltonian of the unscaled problem
    assert np.linalg.norm(defect) <= 1e-6
    with pytest.raises(NotApplicable):
        check_parameter_condition(get_problem("lqr1d"), reference_extremal("lqr1d", h=1e-2))


def test_derive_multipliers_on_discrete_examples():
    for name in ("ex00", "ex0", "ex000"):
        fit = derive_multipliers(get_problem(name), reference_extremal(name).trajectory)
        assert fit.residual <= 1e-12 and fit.extremal.p0 == pytest.approx(-1.0)


@settings(max_examples=15)
@given(st.floats(0.01, 100))
def test_scaling_leaves_verdicts_unchanged(c):
    for name in ("ex0", "ex000"):
        p = get_problem(name)
        ext = reference_extremal(name)
        a, b = certify(p, ext), certify(p, ext.scaled(c))
        assert a.verdicts == b.verdicts
        for ra, rb in zip(a.hamiltonian_table, b.hamiltonian_table):
            assert rb["max_h"] == pytest.approx(c * ra["max_h"], abs=1e-12)
            assert rb.get("rs_max_gap", 0) == pytest.approx(ra.get("rs_max_gap", 0), abs=1e-12)


def test_report_json_is_plain_data():
    rep = certify(get_problem("ex0"), reference_extremal("ex0"))
    data = rep.to_json()
    assert json.loads(json.dumps(data)) == data
    assert data["overall"] == "pass"
    assert isinstance(rep, PMPReport)


def test_extremal_grid_must_match():
    ext = reference_extremal("ex0")
    with pytest.raises(DimensionMismatch):
        Extremal(ext.trajectory, GridFunction([0, 1], [[0], [0]]), -1, [0])
