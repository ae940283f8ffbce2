import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ciprecoding import conic
from ciprecoding.conic import (Affine, ChanceConstraintData, ConicProgram, MatAffine,
                               SocConstraint, add_chance_soc, dump_program, lift_rank_one,
                               load_program, s_procedure_lmi, soc_to_lmi)
from ciprecoding.solver import SolveOptions, solve, verify_solution


def _x(p, values):
    x = np.zeros(p.n_vars)
    x[: len(values)] = values
    return x


def test_chance_soc_degenerates_to_linear_for_zero_covariance():
    p = ConicProgram()
    x = p.variable("x", 2)
    add_chance_soc(p, ChanceConstraintData(np.array([1.0, 2.0]), np.zeros(2), 0.9, 3.0), x)
    assert p.constraints[-1].kind == "nonneg"


def test_chance_soc_scalar_bound():
    # 0.8416 |x| <= 1  gives  |x| <= 1.1882
    for sign in (1.0, -1.0):
        p = ConicProgram()
        x = p.variable("x", 1)
        add_chance_soc(p, ChanceConstraintData(np.zeros(1), np.ones(1), 0.8, 1.0), x)
        p.minimize(x * -sign)
        r = solve(p)
        assert r.ok
        assert abs(r.x[0]) == pytest.approx(1.1882, abs=1e-4)


@pytest.mark.parametrize("eta", [0.5, 0.3, 1.0])
def test_chance_soc_rejects_eta_outside_range(eta):
    p = ConicProgram()
    x = p.variable("x", 1)
    with pytest.raises(ValueError):
        add_chance_soc(p, ChanceConstraintData(np.zeros(1), np.ones(1), eta, 1.0), x)


def test_chance_forms_agree():
    objs = []
    for form in ("soc", "lmi"):
        p = ConicProgram()
        x = p.variable("x", 3)
        d = ChanceConstraintData(np.array([-1.0, 0.5, -0.2]), np.array([0.3, 0.1, 0.2]), 0.9, -1.0)
        add_chance_soc(p, d, x, form=form)
        p.add_linear(x, np.full(3, 5.0))
        p.add_linear(-x, np.full(3, 5.0))
        p.minimize(x.sum())
        r = solve(p)
        assert r.ok
        objs.append(r.objective)
    assert objs[0] == pytest.approx(objs[1], rel=1e-6)


def test_soc_to_lmi_zero_vector_block():
    p = ConicProgram()
    t = p.variable("t", 1)
    soc = SocConstraint(conic.vstack([t + 2.0, Affine.zeros(3)]))
    m = soc_to_lmi(soc)
    assert m.shape == (4, 4)
    x = _x(p, [1.0])
    assert np.allclose(m.value(x), 3.0 * np.eye(4))


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2 ** 31))
def test_soc_lmi_equivalence_on_random_points(seed):
    rng = np.random.default_rng(seed)
    p = ConicProgram()
    x = p.variable("x", 3)
    A = rng.standard_normal((4, 3))
    b = rng.standard_normal(4)
    e = rng.standard_normal(3)
    y = A @ x + b
    t = x.dot(e) + float(rng.uniform(0, 3))
    soc = SocConstraint(conic.vstack([t, y]))
    lmi = soc_to_lmi(soc)
    pt = _x(p, rng.standard_normal(3) * 2)
    soc_ok = soc.margin(pt) >= 0
    lmi_ok = np.linalg.eigvalsh(lmi.value(pt))[0] >= -1e-9
    if abs(soc.margin(pt)) > 1e-7:
        assert soc_ok == lmi_ok


def test_psd_blocks_are_exactly_symmetric():
    p = ConicProgram()
    x = p.variable("x", 2)
    lift_rank_one(p, x, "X")
    for c in p.constraints:
        if c.kind == "psd":
            m = c.mat.value(np.random.default_rng(0).standard_normal(p.n_vars))
            assert np.max(np.abs(m - m.T)) == 0.0


def test_add_psd_rejects_asymmetric_block():
    p = ConicProgram()
    with pytest.raises(ValueError):
        p.add_psd(MatAffine.constant(np.array([[1.0, 2.0], [0.0, 1.0]])))


def test_s_procedure_sanity_instance():
    # ||z||^2 <= 1  =>  -t <= 0 holds exactly when t >= lam >= 0
    p = ConicProgram()
    t = p.variable("t", 1)
    cid = s_procedure_lmi(p, np.eye(2), np.zeros(2), -1.0, np.zeros((2, 2)), np.zeros(2),
                          MatAffine((1, 1), -t), "lam")
    assert p.constraints[cid].dim == 3
    assert "lam" in p.variables
    p.minimize(t)
    r = solve(p)
    assert r.ok
    assert r.x[p.slice("t")][0] == pytest.approx(0.0, abs=1e-6)


def test_s_procedure_dimension_mismatch():
    p = ConicProgram()
    with pytest.raises(ValueError):
        s_procedure_lmi(p, np.eye(2), np.zeros(2), -1.0, np.zeros((3, 3)), np.zeros(3), 0.0, "lam")


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 2 ** 31))
def test_s_procedure_certificate_holds_on_samples(seed):
    # certify  ||z||^2 <= r^2  =>  a^T z + c <= 0 and check it by sampling
    rng = np.random.default_rng(seed)
    a = rng.standard_normal(3)
    r2 = 0.5
    p = ConicProgram()
    c = p.variable("c", 1)
    s_procedure_lmi(p, np.eye(3), np.zeros(3), -r2, np.zeros((3, 3)),
                    MatAffine.constant(a.reshape(3, 1) / 2), MatAffine((1, 1), c), "lam")
    p.minimize(-c)
    rep = solve(p)
    assert rep.ok
    cv = rep.x[p.slice("c")][0]
    assert cv == pytest.approx(-np.sqrt(r2) * np.linalg.norm(a), rel=1e-5)
    z = rng.standard_normal((10_000, 3))
    z *= (np.sqrt(r2) * rng.uniform(0, 1, 10_000) ** (1 / 3) / np.linalg.norm(z, axis=1))[:, None]
    assert np.all(z @ a + cv <= 1e-7)


def test_s_procedure_degenerate_region():
    # zero radius: the implication constrains the value at the origin only
    p = ConicProgram()
    rho = p.variable("rho", 1)
    s_procedure_lmi(p, np.eye(2), np.zeros(2), 0.0, np.zeros((2, 2)), np.zeros(2),
                    MatAffine((1, 1), rho), "lam")
    p.minimize(-rho)
    p.add_linear(rho, 10.0)
    r = solve(p)
    assert r.ok
    assert r.x[p.slice("rho")][0] == pytest.approx(0.0, abs=1e-6)


def test_lift_rank_one_minimum_norm():
    p = ConicProgram()
    w = p.variable("w", 3)
    W = lift_rank_one(p, w, "W")
    p.add_nonneg(w.dot(np.array([1.0, 0.0, 0.0])) - 2.0)
    p.minimize(W.trace())
    r = solve(p)
    assert r.ok
    assert r.objective == pytest.approx(4.0, rel=1e-6)
    assert np.allclose(r.x[p.slice("w")], [2, 0, 0], atol=1e-5)
    Wv = p.read("W", r.x)
    wv = r.x[p.slice("w")]
    assert np.trace(Wv) - wv @ wv <= 1e-6 * max(1.0, np.trace(Wv))


def test_lift_rank_one_duplicate_name():
    p = ConicProgram()
    w = p.variable("w", 2)
    lift_rank_one(p, w, "W")
    with pytest.raises(ValueError):
        lift_rank_one(p, w, "W")


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(-5, 5), min_size=2, max_size=2))
def test_rank_one_point_satisfies_coupling(wv):
    p = ConicProgram()
    w = p.variable("w", 2)
    lift_rank_one(p, w, "W")
    x = np.zeros(p.n_vars)
    x[:2] = wv
    W = np.outer(wv, wv)
    x[p.slice("W")] = W[np.tril_indices(2)]
    assert verify_solution(p, x, tol=1e-9).passed


def test_dump_round_trip(tmp_path):
    p = ConicProgram(name="demo")
    x = p.variable("x", 2)
    lift_rank_one(p, x, "X")
    add_chance_soc(p, ChanceConstraintData(np.array([1.0, -1.0]), np.array([0.5, 0.5]), 0.9, 2.0), x)
    p.add_linear(x, np.array([3.0, 3.0]), ("box",))
    p.minimize(x.sum() * -1.0)
    path = tmp_path / "prog.txt"
    text = dump_program(p, path)
    q = load_program(str(path))
    assert dump_program(q) == text
    assert solve(q).objective == pytest.approx(solve(p).objective, rel=1e-9)


def test_hermitian_variable_reads_back():
    p = ConicProgram()
    W = p.hermitian("W", 3)
    rng = np.random.default_rng(1)
    x = rng.standard_normal(p.n_vars)
    val = p.read("W", x)
    assert np.allclose(val, val.conj().T)
    assert np.allclose(W.value(x), val)
