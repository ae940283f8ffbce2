import numpy as np
import pytest

from ciprecoding.conic import Affine, ConicProgram, MatAffine, bmat, lift_rank_one
from ciprecoding.solver import SolveOptions, solve, verify_solution

BACKENDS = ["clarabel", "cvxopt"]


def _two_by_two():
    p = ConicProgram()
    x = p.variable("x", 1)
    p.add_psd(bmat([[MatAffine((1, 1), x), np.ones((1, 1))], [np.ones((1, 1)), MatAffine((1, 1), x)]]))
    p.minimize(x)
    return p


def _lift_demo():
    p = ConicProgram()
    w = p.variable("w", 2)
    W = lift_rank_one(p, w, "W")
    p.add_nonneg(w.dot(np.array([1.0, 0.0])) - 2.0, ("ci",))
    p.minimize(W.trace())
    return p


@pytest.mark.parametrize("backend", BACKENDS)
def test_eigenvalue_condition(backend):
    r = solve(_two_by_two(), SolveOptions(backend=backend))
    assert r.ok and r.objective == pytest.approx(1.0, abs=1e-6)


@pytest.mark.parametrize("backend", BACKENDS)
def test_lifted_trace_minimum(backend):
    r = solve(_lift_demo(), SolveOptions(backend=backend))
    assert r.ok and r.objective == pytest.approx(4.0, rel=1e-6)


def test_empty_program():
    r = solve(ConicProgram())
    assert r.ok and r.objective == 0.0


def test_unbounded_and_infeasible():
    p = ConicProgram()
    x = p.variable("x", 1)
    p.minimize(x)
    assert solve(p).status == "unbounded"
    p.add_linear(x, -1.0)
    p.add_linear(-x, -1.0)
    assert solve(p).status == "infeasible"


def test_optimal_reports_meet_tolerance():
    r = solve(_lift_demo())
    assert r.residuals["max_violation"] <= 1e-7
    assert max(r.residuals["primal_feas"], r.residuals["dual_feas"]) <= 1e-7


def test_deterministic():
    a, b = solve(_lift_demo()), solve(_lift_demo())
    assert np.array_equal(a.x, b.x)


def test_unknown_backend():
    with pytest.raises(ValueError):
        solve(_two_by_two(), SolveOptions(backend="nope"))


def test_verify_optimal_point_passes():
    p = _lift_demo()
    r = solve(p)
    v = verify_solution(p, r.x, 1e-7)
    assert v.passed and v.worst <= 1e-7


def test_verify_reports_violation_size():
    p = _lift_demo()
    v = verify_solution(p, np.zeros(p.n_vars))
    ci = [i for i, c in enumerate(p.constraints) if c.tag == ("ci",)][0]
    assert v.violations[ci] == pytest.approx(2.0)
    assert not v.passed


def test_verify_dimension_mismatch():
    with pytest.raises(ValueError):
        verify_solution(_lift_demo(), np.zeros(2))


def test_perturbation_flips_expected_constraints():
    p = ConicProgram()
    x = p.variable("x", 2)
    p.add_linear(x[0], 1.0, ("a",))
    p.add_linear(x[1], 1.0, ("b",))
    p.minimize((x[0] + x[1]) * -1.0)
    r = solve(p)
    eps = 1e-4
    bumped = r.x.copy()
    bumped[0] += eps
    v = verify_solution(p, bumped, tol=1e-6)
    assert v.failing(1e-6) == [0]


def test_fallback_rescues_stalled_backend(monkeypatch):
    from ciprecoding import solver

    def stalled(program, opts):
        return solver.SolveReport("numerical_failure", backend="stalled")

    monkeypatch.setitem(solver.BACKENDS, "stalled", stalled)
    r = solve(_lift_demo(), SolveOptions(backend="stalled", fallback="clarabel"))
    assert r.ok and r.backend == "clarabel"
    r = solve(_lift_demo(), SolveOptions(backend="stalled", fallback=None))
    assert r.status == "numerical_failure"


def test_inaccurate_optimum_is_rejected(monkeypatch):
    from ciprecoding import solver

    def sloppy(program, opts):
        x = np.zeros(program.n_vars)
        return solver.SolveReport("optimal", 0.0, x, 1, {}, "sloppy")

    monkeypatch.setitem(solver.BACKENDS, "sloppy", sloppy)
    r = solve(_lift_demo(), SolveOptions(backend="sloppy", fallback=None))
    assert r.status == "numerical_failure"
