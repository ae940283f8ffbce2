"""Quantiles and the radii of the CSI-error uncertainty regions.

``xi_squared`` bounds the tan-weighted sum of error components over all
coordinated links, ``rho_squared`` the same sum over the serving link only,
and ``nu_squared`` the error energy ``e^H e``.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy import stats


@dataclass(frozen=True)
class BoundParams:
    delta: float = 0.99
    m_antennas: int = 4
    n_bs: int = 3
    theta: float = np.pi / 4
    sigma: float = 0.0
    # "paper": chi-square with M dof; "exact": Gamma(M, 1), the true law of
    # sum |e_m|^2 / sigma^2 for circular complex Gaussian entries
    nu_mode: str = "paper"

    def __post_init__(self):
        if not 0.0 < self.delta < 1.0:
            raise ValueError(f"delta={self.delta} must lie in (0, 1)")
        if self.sigma < 0:
            raise ValueError("sigma must be nonnegative")
        if self.nu_mode not in ("paper", "exact"):
            raise ValueError(f"unknown nu_mode {self.nu_mode!r}")

    def with_sigma(self, sigma: float) -> "BoundParams":
        return replace(self, sigma=float(sigma))


def _check_prob(p):
    if not 0.0 < p < 1.0:
        raise ValueError(f"probability {p} outside (0, 1)")


def normal_quantile(p: float) -> float:
    """Inverse of the standard normal cdf."""
    _check_prob(p)
    return float(stats.norm.ppf(p))


def chi_square_quantile(p: float, dof: int) -> float:
    _check_prob(p)
    if dof < 1:
        raise ValueError("dof must be >= 1")
    return float(stats.chi2.ppf(p, dof))


def gamma_quantile(p: float, shape: float) -> float:
    """Quantile of Gamma(shape, 1)."""
    _check_prob(p)
    return float(stats.gamma.ppf(p, shape))


def xi_squared(b: BoundParams) -> float:
    return normal_quantile(b.delta) * np.sqrt(b.m_antennas * b.n_bs * (1 + np.tan(b.theta) ** 2)) * b.sigma


def rho_squared(b: BoundParams) -> float:
    return xi_squared(replace(b, n_bs=1))


def nu_squared(b: BoundParams) -> float:
    if b.nu_mode == "exact":
        q = gamma_quantile(b.delta, b.m_antennas)
    else:
        q = chi_square_quantile(b.delta, b.m_antennas)
    return q * b.sigma ** 2


def empirical_coverage(bound_kind: str, b: BoundParams, n_trials: int = 100_000,
                       seed: int = 0) -> float:
    """Fraction of error draws whose bounded statistic stays within its radius.

    ``lemma2`` draws an independent error vector per link, the model under
    which the normal law for the tan-weighted sum is exact. ``lemma3`` tests
    ``e^H e <= nu^2`` with the quantile selected by ``b.nu_mode``.
    """
    if n_trials < 1000:
        raise ValueError("n_trials must be at least 1000")
    if b.sigma == 0:
        return 1.0
    rng = np.random.default_rng(seed)
    m = b.m_antennas
    if bound_kind == "lemma2":
        t = np.tan(b.theta)
        shape = (n_trials, b.n_bs * m)
        e_re = rng.standard_normal(shape) * b.sigma / np.sqrt(2)
        e_im = rng.standard_normal(shape) * b.sigma / np.sqrt(2)
        stat = ((1 + t) * e_im + (1 - t) * e_re).sum(axis=1)
        return float(np.mean(stat <= xi_squared(b)))
    if bound_kind == "lemma3":
        e = (rng.standard_normal((n_trials, m)) + 1j * rng.standard_normal((n_trials, m))) \
            * b.sigma / np.sqrt(2)
        return float(np.mean(np.sum(np.abs(e) ** 2, axis=1) <= nu_squared(b)))
    raise ValueError(f"unknown bound kind {bound_kind!r}")
