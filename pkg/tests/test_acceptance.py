"""End-to-end acceptance checks, one test per criterion.

Each test records a verdict line printed in the terminal summary. Solves
from criteria 1-7 feed the rank-one tightness check of criterion 8, so the
file must run in order.
"""

import math
import time

import numpy as np
import pytest

from ciprecoding.analysis import (OverheadModel, barrier_parameter, common_support_means,
                                  coordination_overhead, ordering_violations, variable_count)
from ciprecoding.baselines import BASELINES, build_cbf, build_comp_perfect
from ciprecoding.experiments import (ALL_SCHEMES, is_feasible, make_instance, run_grid,
                                     solve_kind, symbol_draw)
from ciprecoding.montecarlo import estimate_outage
from ciprecoding.robust_bounds import BoundParams, empirical_coverage
from ciprecoding.scenario import Scenario
from ciprecoding.schemes import CI_SCHEMES, build_scheme

pytestmark = pytest.mark.slow

# (criterion, scheme, relative gap) of every successful solve in criteria 1-7
GAPS = []


def _track(number, sol):
    if sol.ok:
        tr = sol.lifted_trace if np.isfinite(sol.lifted_trace) else sol.total_power_w
        GAPS.append((number, sol.scheme, sol.relaxation_gap / max(1.0, tr)))
    return sol


def _power(sol, p_max):
    return sol.total_power_w if is_feasible(sol, p_max) else np.inf


def test_criterion_01_single_user_oracle(criterion):
    t0 = time.time()
    s = Scenario(n_bs=1, k_users=1, csi_error_std=0.0)
    worst = 0.0
    for seed in range(20):
        inst = make_instance(s, seed)
        sym = symbol_draw(s, seed, 0)
        h = inst.c_true.h[0, 0]
        oracle = s.noise_power_w * s.gamma_lin[0] / np.vdot(h, h).real
        for kind in ALL_SCHEMES:
            sol = _track(1, solve_kind(kind, inst, sym))
            err = abs(sol.total_power_w - oracle) / oracle if sol.ok else np.inf
            worst = max(worst, err)
    took = time.time() - t0
    ok = worst <= 1e-4 and took < 60
    criterion(1, ok, f"worst relative error {worst:.2e} over 20 channels x 8 schemes, "
                     f"{took:.0f} s")
    assert ok


ORDER = ["full_prob", "full_det", "comp", "partial_prob", "partial_det", "stat", "cbf_det"]


def test_criterion_02_power_ordering(criterion):
    t0 = time.time()
    s = Scenario(csi_error_std=1e-2, sinr_targets_db=20)
    powers = {k: [] for k in ORDER}
    for kind, seed, draw, sol in run_grid(s, ORDER, range(20), n_draws=10):
        if kind not in BASELINES or draw == 0:
            _track(2, sol)
        powers[kind].append(sol.total_power_w if is_feasible(sol, s.p_max) else np.nan)
    means, n_common = common_support_means(powers)
    bad = ordering_violations(means, ORDER)
    took = time.time() - t0
    ok = not bad and n_common > 0 and took < 1800
    chain = " <= ".join(f"{k} {means[k]:.4g}" for k in ORDER)
    criterion(2, ok, f"{chain} W on {n_common}/200 common instances, {took:.0f} s"
                     + (f"; violated {bad}" if bad else ""))
    assert ok


def _satisfaction(kind, s, seeds, number):
    out = []
    for seed in seeds:
        inst = make_instance(s, seed)
        sym = symbol_draw(s, seed, 0)
        sol = _track(number, solve_kind(kind, inst, sym))
        assert sol.ok, f"{kind} seed {seed}: {sol.status}"
        rep = estimate_outage(s, inst.csi, sol, n_trials=2000, seed=seed, symbols=sym)
        out.append(rep.per_user_satisfaction)
    return np.concatenate(out)


def test_criterion_03_chance_calibration(criterion):
    s = Scenario(csi_error_std=1e-2, eta=0.8)
    floor = 0.8 - 3 * math.sqrt(0.8 * 0.2 / 2000)
    lows = {k: float(_satisfaction(k, s, range(3), 3).min())
            for k in ("full_prob", "partial_prob")}
    ok = all(v >= floor for v in lows.values())
    criterion(3, ok, ", ".join(f"{k} min satisfaction {v:.4f}" for k, v in lows.items())
              + f" (floor {floor:.4f}, 3 channels x 9 users x 2000 draws)")
    assert ok


def test_criterion_04_worst_case_calibration(criterion):
    s = Scenario(csi_error_std=1e-2, delta=0.99, nu_mode="exact")
    ceiling = 0.01 + 3 * math.sqrt(0.01 * 0.99 / 2000)
    highs = {k: float(1 - _satisfaction(k, s, range(3), 4).min())
             for k in ("full_det", "partial_det")}
    # the chi-square(M) radius is reported without a threshold
    paper = {k: float(1 - _satisfaction(k, s.with_(nu_mode="paper"), range(3), 4).min())
             for k in ("full_det", "partial_det")}
    ok = all(v <= ceiling for v in highs.values())
    criterion(4, ok, ", ".join(f"{k} max violation {v:.4f}" for k, v in highs.items())
              + f" (ceiling {ceiling:.4f}); chi2_M radius: "
              + ", ".join(f"{k} {v:.4f}" for k, v in paper.items()))
    assert ok


def test_criterion_05_monotonicity(criterion):
    base = Scenario(csi_error_std=1e-2, eta=0.8)
    axes = {"gamma_db": [base.with_(sinr_targets_db=g) for g in (0, 10, 20, 30)],
            "sigma_e": [base.with_(csi_error_std=e) for e in (0.0, 1e-3, 1e-2)]}
    bad = []
    for axis, scenarios in axes.items():
        for seed in range(10):
            insts = [make_instance(s, seed) for s in scenarios]
            syms = [symbol_draw(s, seed, 0) for s in scenarios]
            for kind in ALL_SCHEMES:
                p = [_power(_track(5, solve_kind(kind, i, y)), s.p_max)
                     for s, i, y in zip(scenarios, insts, syms)]
                for a, b in zip(p, p[1:]):
                    if not (b >= a * (1 - 1e-6) or (np.isinf(a) and np.isinf(b))):
                        bad.append((axis, kind, seed, a, b))
    ok = not bad
    criterion(5, ok, f"{len(bad)} violations over 2 axes x 10 channels x 8 schemes"
                     + (f": {bad[:3]}" if bad else ""))
    assert ok


def test_criterion_06_feasibility_ordering(criterion):
    s = Scenario(csi_error_std=1e-2, sinr_targets_db=45, p_max=100)
    kinds = ("full_det", "partial_det", "cbf_det")
    hits = dict.fromkeys(kinds, 0)
    n_seeds = 50
    for seed in range(n_seeds):
        inst = make_instance(s, seed)
        sym = symbol_draw(s, seed, 0)
        for kind in kinds:
            hits[kind] += is_feasible(_track(6, solve_kind(kind, inst, sym)), s.p_max)
    f = {k: hits[k] / n_seeds for k in kinds}
    ok = f["full_det"] >= f["partial_det"] >= f["cbf_det"]
    criterion(6, ok, ", ".join(f"{k} {v:.2f}" for k, v in f.items())
              + f" over {n_seeds} channels at 45 dB")
    assert ok


def test_criterion_07_silent_bs(criterion):
    s = Scenario(k_users=[3, 3, 0], placement="edge", inter_site_m=1250.0,
                 sinr_targets_db=5, csi_error_std=1e-2)
    rows = []
    ok = True
    for seed in range(4):
        inst = make_instance(s, seed)
        sym = symbol_draw(s, seed, 0)
        pw = {}
        for kind in ("partial_det", "stat", "full_det"):
            sol = _track(7, solve_kind(kind, inst, sym))
            ok &= sol.ok
            pw[kind] = sol.per_bs_power_w if sol.ok else np.full(3, np.nan)
        ok &= bool(pw["partial_det"][2] <= 1e-6 and pw["stat"][2] <= 1e-6)
        share = pw["full_det"][2] / np.max(pw["full_det"])
        ok &= bool(share >= 0.1)
        rows.append(f"seed {seed}: |w3|^2 partial {pw['partial_det'][2]:.1e} W, "
                    f"stat {pw['stat'][2]:.1e} W, full share {share:.2f}")
    criterion(7, ok, "; ".join(rows))
    assert ok


def test_criterion_08_rank_one_tightness(criterion):
    assert GAPS, "run criteria 1-7 first"
    over = [g for g in GAPS if g[2] > 1e-5]
    worst = max(GAPS, key=lambda g: g[2])
    ok = not over
    criterion(8, ok, f"{len(GAPS)} solves, worst relative gap {worst[2]:.1e} ({worst[1]}, "
                     f"criterion {worst[0]})" + (f"; exceedances {over[:5]}" if over else ""))
    assert ok


def test_criterion_09_overhead_and_barrier(criterion):
    m = OverheadModel(n=3, k=3, chi_c=10, chi_s=70)
    bits = {k: coordination_overhead(k, m) for k in ("full_prob", "partial_prob", "stat")}
    b1 = barrier_parameter("full_prob", 3, 4, 3)
    b2 = barrier_parameter("full_det", 3, 4, 3)
    ok = (bits == {"full_prob": 1800, "partial_prob": 540, "stat": 0}
          and abs(b1 - math.sqrt(174)) <= 1e-12 * math.sqrt(174)
          and abs(b2 - math.sqrt(96)) <= 1e-12 * math.sqrt(96))
    criterion(9, ok, f"bits {bits}, beta1 {b1:.12g}, beta2 {b2:.12g}")
    assert ok


def test_criterion_10_bound_coverage(criterion):
    exact = empirical_coverage("lemma3", BoundParams(delta=0.99, m_antennas=4, sigma=0.01,
                                                     nu_mode="exact"), 100_000, seed=0)
    lemma2 = empirical_coverage("lemma2", BoundParams(delta=0.99, m_antennas=4, n_bs=3,
                                                      sigma=0.01), 100_000, seed=0)
    ok = abs(exact - 0.99) <= 0.005 and 0.95 <= lemma2 <= 1.0
    criterion(10, ok, f"ball radius coverage {exact:.4f}, tan-weighted sum coverage {lemma2:.4f}")
    assert ok


def test_criterion_11_soc_lmi_equivalence(criterion):
    s = Scenario(csi_error_std=1e-2)
    worst = 0.0
    for seed in range(20):
        inst = make_instance(s, seed)
        sym = symbol_draw(s, seed, 0)
        a = solve_kind("full_prob", inst, sym, chance_form="soc")
        b = solve_kind("full_prob", inst, sym, chance_form="lmi")
        assert a.ok and b.ok
        worst = max(worst, abs(a.objective_w - b.objective_w) / abs(a.objective_w))
    ok = worst <= 1e-6
    criterion(11, ok, f"worst relative objective difference {worst:.1e} over 20 instances")
    assert ok


def test_criterion_12_variable_count(criterion):
    s = Scenario(k_users=4, csi_error_std=1e-2)
    inst = make_instance(s, 0)
    sym = symbol_draw(s, 0, 0)
    ci = {k: build_scheme(k, s, inst.csi, sym, stat=inst.stat).metadata["precoder_vectors"]
          for k in CI_SCHEMES}
    base = {"comp": build_comp_perfect(s, inst.c_true).metadata["precoder_vectors"],
            "cbf_det": build_cbf(s, inst.csi, "det").metadata["precoder_vectors"]}
    ok = (set(ci.values()) == {3} and set(base.values()) == {12}
          and variable_count("full_det", 3, 4) == 3 and variable_count("comp", 3, 4) == 12)
    criterion(12, ok, f"CI schemes {sorted(set(ci.values()))} vectors, baselines "
                      f"{sorted(set(base.values()))} vectors (N=3, K=4)")
    assert ok
