"""Coordination overhead, interior-point complexity and result aggregation.

Counts are evaluated in exact integer arithmetic; only the final square root
and logarithm are floating point.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

CI_KINDS = ("full_prob", "full_det", "partial_prob", "partial_det", "stat")
BASELINE_KINDS = ("comp", "cbf_prob", "cbf_det")


@dataclass(frozen=True)
class OverheadModel:
    n: int = 3              # coordinated BSs
    k: int = 3              # users per cell
    m: int = 4              # antennas per BS
    chi_c: int = 10         # bits per CSI report
    chi_s: int = 140        # bits per user's symbol exchange per frame
    epsilon: float = 1e-6   # solver accuracy

    def __post_init__(self):
        for name in ("n", "k", "m", "chi_c", "chi_s"):
            v = getattr(self, name)
            if int(v) != v or v < 0:
                raise ValueError(f"{name} must be a nonnegative integer")
        if not 0 < self.epsilon <= 1:
            raise ValueError("epsilon must lie in (0, 1]")


def coordination_overhead(kind: str, m: OverheadModel) -> int:
    """Backhaul bits exchanged per coordination round.

    Data-sharing schemes pay ``N (N-1) K (N chi_C + chi_S)``, CSI-only
    schemes ``N^2 (N-1) K chi_C``; the statistical scheme is negligible.
    """
    n, k = int(m.n), int(m.k)
    if kind in ("full_prob", "full_det", "comp"):
        return n * (n - 1) * k * (n * int(m.chi_c) + int(m.chi_s))
    if kind in ("partial_prob", "partial_det", "cbf_prob", "cbf_det"):
        return n * n * (n - 1) * k * int(m.chi_c)
    if kind == "stat":
        return 0
    raise ValueError(f"unknown scheme {kind!r}")


def barrier_squared(kind: str, n_bs: int, m_antennas: int, k_users: int) -> int:
    """Squared barrier parameter of each CI scheme's cone constraints."""
    n, m, k = int(n_bs), int(m_antennas), int(k_users)
    if min(n, m, k) < 1:
        raise ValueError("counts must be positive")
    if kind == "full_prob":
        return n * (m * k + 3 * k + 1 + 4 * k * n)
    if kind == "full_det":
        return n * (5 + 4 * n + k * m + k)
    if kind == "partial_prob":
        return n * (1 + 5 * k + 2 * k * (3 * m + 2) + k * ((n - 1) * m * m + 1))
    if kind == "partial_det":
        return n * (2 + m + k * (8 + 5 * m + 2))
    if kind == "stat":
        return n * (2 + 9 * k + 4 * k * m + m)
    raise ValueError(f"unknown CI scheme {kind!r}")


def barrier_parameter(kind: str, n_bs: int, m_antennas: int, k_users: int) -> float:
    return math.sqrt(barrier_squared(kind, n_bs, m_antennas, k_users))


def table_row_sums(kind: str, n_bs: int, m_antennas: int, k_users: int) -> tuple:
    """``(sum k_j^3, sum k_j^2)`` multiplying ``n`` and ``n^2`` in each row."""
    n, m, k = int(n_bs), int(m_antennas), int(k_users)
    nk = n * k
    if kind == "full_prob":
        return (n + 2 * nk * (2 * n + 1) ** 3 + nk * (m + 1) ** 3,
                n + 2 * nk * (2 * n + 1) ** 2 + nk * (m + 1) ** 2)
    if kind == "full_det":
        return (n + 2 * nk * (2 * n + 1) ** 3 + 2 * nk + nk * (m + 1) ** 3,
                n + 2 * nk * (2 * n + 1) ** 2 + 2 * nk + nk * (m + 1) ** 2)
    if kind == "partial_prob":
        big = (n - 1) * m * m + 1
        return (n + 10 * nk + nk * big ** 3 + 2 * nk * (2 * m + 1) ** 3 + nk * (m + 1) ** 3,
                n + 10 * nk + nk * big ** 2 + 2 * nk * (2 * m + 1) ** 2 + nk * (m + 1) ** 2)
    if kind == "partial_det":
        return (n + 31 * nk + 2 * nk * (m + 1) ** 3 + 2 * nk * (2 * m + 1) ** 3,
                n + 13 * nk + 2 * nk * (m + 1) ** 2 + 2 * nk * (2 * m + 1) ** 2)
    if kind == "stat":
        return (n + 31 * nk + 2 * nk * (2 * m + 1) ** 3 + nk * (m + 1) ** 3,
                n + 13 * nk + 2 * nk * (2 * m + 1) ** 2 + nk * (m + 1) ** 2)
    raise ValueError(f"unknown CI scheme {kind!r}")


def complexity_terms(kind: str, model: OverheadModel, n_vars: int) -> dict:
    """Exact integer parts of the interior-point cost before scaling."""
    cube, square = table_row_sums(kind, model.n, model.m, model.k)
    n = int(n_vars)
    return {"c_f": n * cube + n * n * square, "c_g": n ** 3, "c_b": barrier_squared(
        kind, model.n, model.m, model.k)}


def complexity_estimate(kind: str, model: OverheadModel, n_vars: int) -> float:
    """``ln(1/eps) sqrt(c_b) (c_f + c_g)`` with the tabulated per-scheme sums."""
    if n_vars < 0:
        raise ValueError("n_vars must be nonnegative")
    t = complexity_terms(kind, model, n_vars)
    return math.log(1.0 / model.epsilon) * math.sqrt(t["c_b"]) * (t["c_f"] + t["c_g"])


def forming_cost(n: int, lmi_sizes, soc_sizes=()) -> int:
    """Cost of forming the Newton system for given cone sizes.

    ``n sum k^3 + n^2 sum k^2`` over LMI blocks plus ``n sum k^2`` over
    second-order cones.
    """
    lmi = [int(s) for s in lmi_sizes]
    return (n * sum(s ** 3 for s in lmi) + n * n * sum(s ** 2 for s in lmi)
            + n * sum(int(s) ** 2 for s in soc_sizes))


def block_inventory(kind: str, n_bs: int, m_antennas: int, k_users: int) -> list:
    """``(count, size)`` of the LMI blocks (linear constraints as size 1)."""
    n, m, k = int(n_bs), int(m_antennas), int(k_users)
    nk = n * k
    if kind == "full_prob":
        return [(n, 1), (2 * nk, 2 * n + 1), (nk, m + 1)]
    if kind == "full_det":
        return [(n, 1), (2 * nk, 2 * n + 1), (2 * nk, 1), (nk, m + 1)]
    if kind == "partial_prob":
        return [(n, 1), (2 * nk, 2 * m + 1), (nk, 1), (nk, 3),
                (nk, (n - 1) * m * m + 1), (nk, 1), (nk, m + 1)]
    if kind == "partial_det":
        return [(n, 1), (2 * nk, 2 * m + 1), (2 * nk, 1), (nk, 1), (nk, 3),
                (nk, m + 1), (nk, 1), (nk, m + 1)]
    if kind == "stat":
        return [(n, 1), (2 * nk, 2 * m + 1), (2 * nk, 1), (nk, 1), (nk, 3), (nk, 1),
                (n, m + 1)]
    raise ValueError(f"unknown CI scheme {kind!r}")


def inventory_sizes(inventory) -> list:
    return [size for count, size in inventory for _ in range(count)]


def variable_count(kind: str, n_bs: int, k_users: int) -> int:
    """Number of precoding vectors optimised by a scheme."""
    if kind in CI_KINDS:
        return int(n_bs)
    if kind in BASELINE_KINDS:
        return int(n_bs) * int(k_users)
    raise ValueError(f"unknown scheme {kind!r}")


# ---------------------------------------------------------------------------
# aggregation


def common_support_means(powers: dict) -> tuple:
    """Per-scheme mean power over the instances every scheme solved.

    ``powers`` maps scheme to an array over instances with NaN where the
    scheme was infeasible. Returns ``(means, n_common)``.
    """
    kinds = list(powers)
    arr = np.array([np.asarray(powers[k], dtype=float) for k in kinds])
    ok = ~np.isnan(arr).any(axis=0)
    n_ok = int(ok.sum())
    means = {k: float(arr[i, ok].mean()) if n_ok else float("nan")
             for i, k in enumerate(kinds)}
    return means, n_ok


def ordering_violations(means: dict, order) -> list:
    """Adjacent pairs of ``order`` whose means are not non-decreasing."""
    return [(a, b) for a, b in zip(order, order[1:]) if not means[a] <= means[b]]
