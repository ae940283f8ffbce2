"""Empirical SINR outage, feasibility probabilities and the silent-BS audit."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .baselines import BASELINES, baseline_sinr
from .ci_geometry import SymbolDraw, achieved_sinr
from .experiments import (check_schemes, is_feasible, make_instance, solve_kind,
                          symbol_draw)
from .scenario import CsiEstimate, Scenario, draw_errors
from .schemes import PrecoderSolution
from .solver import SolveOptions


def _to_db(x):
    with np.errstate(divide="ignore"):
        return 10 * np.log10(x)


def binomial_interval(successes: int, n: int, level: float = 0.95):
    """Clopper-Pearson interval of a binomial proportion."""
    ci = stats.binomtest(int(successes), int(n)).proportion_ci(level, method="exact")
    return float(ci.low), float(ci.high)


@dataclass
class MonteCarloReport:
    scheme: str
    n_trials: int
    seed: int
    target_db: np.ndarray               # (U,)
    sinr_samples_db: np.ndarray         # (U, n_trials)
    per_user_satisfaction: np.ndarray   # (U,)
    ci_low: np.ndarray
    ci_high: np.ndarray
    violation_max_db: float
    sinr_rel_tol: float = 1e-5

    @property
    def half_width(self) -> np.ndarray:
        return 0.5 * (self.ci_high - self.ci_low)

    @property
    def violation_fraction(self) -> np.ndarray:
        return 1.0 - self.per_user_satisfaction

    def satisfaction_at(self, target_db) -> np.ndarray:
        """Satisfaction of the same samples against other targets."""
        t = np.broadcast_to(np.asarray(target_db, dtype=float), self.target_db.shape)
        slack = _to_db(1 - self.sinr_rel_tol)
        return np.mean(self.sinr_samples_db >= t[:, None] + slack, axis=1)

    def to_csv(self) -> str:
        """One row per trial, one SINR column per user."""
        out = io.StringIO()
        wr = csv.writer(out, lineterminator="\n")
        n_users = self.sinr_samples_db.shape[0]
        wr.writerow(["scheme", "seed", "trial"] + [f"sinr_db_user_{u + 1}" for u in range(n_users)])
        for t in range(self.n_trials):
            wr.writerow([self.scheme, self.seed, t]
                        + [repr(float(v)) for v in self.sinr_samples_db[:, t]])
        return out.getvalue()

    def histogram(self, bin_db: float = 0.5):
        """Per-user SINR histogram densities on a shared grid of ``bin_db`` bins."""
        finite = self.sinr_samples_db[np.isfinite(self.sinr_samples_db)]
        if finite.size == 0:
            return np.zeros(1), np.zeros((self.sinr_samples_db.shape[0], 0))
        lo = np.floor(finite.min() / bin_db) * bin_db
        hi = np.ceil(finite.max() / bin_db) * bin_db + bin_db
        edges = np.arange(lo, hi + bin_db / 2, bin_db)
        dens = np.array([np.histogram(x[np.isfinite(x)], edges, density=True)[0]
                         for x in self.sinr_samples_db])
        return edges, dens


def _mode_of(scheme: str) -> str:
    if scheme in BASELINES:
        return "baseline"
    return "full" if scheme.startswith("full") else "partial"


def trial_errors(csi: CsiEstimate, s: Scenario, n_trials: int, seed: int) -> np.ndarray:
    """Fresh CSI errors, one generator per trial seeded by ``(seed, trial)``."""
    n, _, m = csi.h_hat.shape
    sig = csi.sigma_links
    out = np.empty((n_trials,) + csi.h_hat.shape, complex)
    for t in range(n_trials):
        rng = np.random.default_rng([s.rng_seed, seed, 3, t])
        out[t] = draw_errors(sig, n, m, rng, csi.per_link)
    return out


def estimate_outage(s: Scenario, csi: CsiEstimate, sol: PrecoderSolution, mode: str | None = None,
                    n_trials: int = 2000, seed: int = 0, symbols: SymbolDraw | None = None,
                    sinr_rel_tol: float = 1e-5) -> MonteCarloReport:
    """Achieved SINR over true channels ``h_hat + e`` with fresh errors ``e``.

    ``mode`` is ``full``, ``partial`` (also for the statistical scheme) or
    ``baseline``; it defaults from the scheme name. CI modes need the symbol
    draw the precoders were designed for. A user counts as satisfied when
    its SINR is at least ``(1 - sinr_rel_tol)`` times the target, which
    absorbs solver tolerance on active constraints.
    """
    if n_trials < 100:
        raise ValueError("n_trials must be at least 100")
    if sol.w is None:
        raise ValueError(f"solution has no precoders (status {sol.status})")
    mode = mode or _mode_of(sol.scheme)
    h = csi.h_hat[None] + trial_errors(csi, s, n_trials, seed)
    if mode == "baseline":
        sinr = baseline_sinr(h, sol.w, s.sigma_n)
    elif mode in ("full", "partial", "stat"):
        if symbols is None:
            raise ValueError("CI precoders need the symbol draw they were designed for")
        sinr = achieved_sinr(h, sol.w, symbols, csi.cell_of_user, s.theta, s.sigma_n, mode)
    else:
        raise ValueError(f"unknown mode {mode!r}")
    sinr_db = _to_db(sinr).T
    target = 10 * np.log10(s.gamma_lin)
    ok = sinr >= s.gamma_lin * (1 - sinr_rel_tol)
    hits = ok.sum(axis=0)
    lo, hi = zip(*(binomial_interval(k, n_trials) for k in hits))
    short = np.maximum(0.0, target[:, None] - sinr_db)
    short = np.where(ok.T, 0.0, short)
    return MonteCarloReport(sol.scheme, n_trials, seed, target, sinr_db, hits / n_trials,
                            np.array(lo), np.array(hi), float(np.max(short, initial=0.0)),
                            sinr_rel_tol)


# ---------------------------------------------------------------------------
# feasibility and silent BS


def feasibility_sweep(template: Scenario, gamma_grid_db, n_seeds: int, schemes,
                      n_draws: int = 1, options: SolveOptions | None = None,
                      seed_offset: int = 0, **kw) -> dict:
    """Fraction of (channel, symbol) draws solved within ``p_max`` per BS.

    Returns ``{scheme: array over the grid}``.
    """
    grid = list(np.atleast_1d(gamma_grid_db))
    if not grid:
        raise ValueError("empty SINR grid")
    schemes = check_schemes(schemes)
    counts = {k: np.zeros(len(grid)) for k in schemes}
    totals = {k: np.zeros(len(grid)) for k in schemes}
    for gi, g in enumerate(grid):
        s = template.with_(sinr_targets_db=float(g))
        for seed in range(seed_offset, seed_offset + n_seeds):
            inst = make_instance(s, seed)
            for kind in schemes:
                draws = 1 if kind in BASELINES else n_draws
                for d in range(draws):
                    sym = symbol_draw(s, seed, d)
                    sol = solve_kind(kind, inst, sym, options=options, **kw)
                    counts[kind][gi] += is_feasible(sol, s.p_max)
                    totals[kind][gi] += 1
    return {k: counts[k] / totals[k] for k in schemes}


def silent_bs_audit(s: Scenario, schemes=("partial_det", "stat", "full_det"), seed: int = 0,
                    draw: int = 0, options: SolveOptions | None = None) -> dict:
    """Per-BS transmit power of each scheme when some cell has no users."""
    if min(s.users_per_cell) > 0:
        raise ValueError("the audit needs at least one empty cell")
    schemes = check_schemes(schemes)
    inst = make_instance(s, seed)
    sym = symbol_draw(s, seed, draw)
    table = {}
    for kind in schemes:
        sol = solve_kind(kind, inst, sym, options=options)
        table[kind] = {"status": sol.status,
                       "per_bs_power_w": None if sol.per_bs_power_w is None
                       else np.asarray(sol.per_bs_power_w, dtype=float)}
    return table
