"""Shared plumbing for running schemes over channel seeds and symbol draws.

Every random quantity is derived from ``(scenario.rng_seed, channel_seed, ...)``
so results do not depend on evaluation order.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

from .baselines import BASELINES, solve_baseline
from .ci_geometry import SymbolDraw, draw_symbols
from .robust_bounds import BoundParams
from .scenario import (ChannelSet, CsiEstimate, Scenario, StatisticalCsi,
                       build_statistical_csi, corrupt_csi, generate_channels)
from .schemes import CI_SCHEMES, PrecoderSolution, solve_scheme
from .solver import SolveOptions

ALL_SCHEMES = CI_SCHEMES + BASELINES


def check_schemes(schemes) -> list:
    schemes = list(schemes)
    bad = [k for k in schemes if k not in ALL_SCHEMES]
    if bad:
        raise ValueError(f"unknown scheme(s) {bad}; choose from {list(ALL_SCHEMES)}")
    return schemes


def config_hash(s: Scenario) -> str:
    return hashlib.sha256(s.to_json().encode()).hexdigest()[:12]


def symbol_draw(s: Scenario, channel_seed: int, draw: int) -> SymbolDraw:
    rng = np.random.default_rng([s.rng_seed, channel_seed, 2, draw])
    return draw_symbols(s.n_users, s.psk_order, rng)


@dataclass
class Instance:
    """True channels, their estimate and the correlation model of one seed."""
    s: Scenario
    seed: int
    c_true: ChannelSet
    csi: CsiEstimate
    stat: StatisticalCsi


def make_instance(s: Scenario, seed: int) -> Instance:
    c = generate_channels(s, seed)
    csi = corrupt_csi(c, s, seed)
    # zero-mean fading: the cross-link correlation is L I
    stat = build_statistical_csi(s, "analytic", c)
    return Instance(s, seed, c, csi, stat)


def solve_kind(kind: str, inst: Instance, symbols: SymbolDraw | None,
               bounds: BoundParams | None = None, options: SolveOptions | None = None,
               **kw) -> PrecoderSolution:
    """Solve one CI scheme or baseline; baselines ignore ``symbols``."""
    if kind in CI_SCHEMES:
        return solve_scheme(kind, inst.s, inst.csi, symbols, stat=inst.stat, bounds=bounds,
                            options=options, **kw)
    if kind in BASELINES:
        return solve_baseline(kind, inst.s, inst.c_true, inst.csi, bounds, options)
    raise ValueError(f"unknown scheme {kind!r}")


def run_grid(s: Scenario, schemes, seeds, n_draws: int = 1,
             options: SolveOptions | None = None, **kw):
    """Yield ``(kind, seed, draw, solution)`` in deterministic order.

    Baselines do not depend on the symbols and are solved once per seed;
    their rows are repeated for each draw.
    """
    schemes = check_schemes(schemes)
    for seed in seeds:
        inst = make_instance(s, seed)
        cached = {}
        for draw in range(n_draws):
            sym = symbol_draw(s, seed, draw)
            for kind in schemes:
                if kind in BASELINES:
                    if kind not in cached:
                        cached[kind] = solve_kind(kind, inst, None, options=options)
                    sol = cached[kind]
                else:
                    sol = solve_kind(kind, inst, sym, options=options, **kw)
                yield kind, seed, draw, sol


def is_feasible(sol: PrecoderSolution, p_max: float, rel_tol: float = 1e-6) -> bool:
    return bool(sol.ok and np.all(sol.per_bs_power_w <= p_max * (1 + rel_tol)))
