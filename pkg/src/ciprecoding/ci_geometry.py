"""Symbol-phase rotations, the constructive-interference region and SINR metric.

For PSK with half-angle ``theta = pi / Q`` a noiseless received point ``r``
(rotated to the user's own symbol) lies in the constructive region for SINR
``G`` when ``|Im r| <= (Re r - sigma_n sqrt(G)) tan(theta)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class SymbolDraw:
    index: np.ndarray   # PSK point index q per user
    order: int          # Q
    amplitude: float = 1.0

    def __post_init__(self):
        self.index = np.asarray(self.index, dtype=int)
        if np.any(self.index < 0) or np.any(self.index >= self.order):
            raise ValueError("symbol index outside the PSK alphabet")

    @property
    def phases(self) -> np.ndarray:
        return 2 * np.pi * self.index / self.order


def draw_symbols(n_users: int, order: int, rng: np.random.Generator) -> SymbolDraw:
    return SymbolDraw(rng.integers(0, order, n_users), order)


@dataclass
class EffectiveChannels:
    h_tilde: np.ndarray     # same shape as the input channel array
    mode: str               # "full" or "partial"
    ref_phase: np.ndarray   # reference phase applied to each user


def _reference_user(cell_of_user, cell):
    idx = np.flatnonzero(cell_of_user == cell)
    return idx[0] if idx.size else None


def rotate_full(h: np.ndarray, d: SymbolDraw, cell_of_user=None) -> EffectiveChannels:
    """Rotate every link of user u by ``exp(j(phi_ref - phi_u))``.

    The reference is the first user of the first non-empty cell.
    """
    ph = d.phases
    if ph.size != h.shape[-2]:
        raise ValueError("one symbol per user required")
    ref = np.full(ph.size, ph[0] if ph.size else 0.0)
    rot = np.exp(1j * (ref - ph))
    return EffectiveChannels(h * rot[:, None], "full", ref)


def rotate_partial(h: np.ndarray, d: SymbolDraw, cell_of_user) -> EffectiveChannels:
    """Rotate user u's links by ``exp(j(phi_ref(cell) - phi_u))``.

    Each cell uses its first user's phase as the reference. Only the
    serving link enters the CI region in partial mode; cross links only
    contribute through ``|h^T w|``, which any rotation preserves.
    """
    ph = d.phases
    cell_of_user = np.asarray(cell_of_user)
    if ph.size != h.shape[-2] or cell_of_user.size != ph.size:
        raise ValueError("one symbol and one cell index per user required")
    ref = np.empty_like(ph)
    for c in np.unique(cell_of_user):
        ref[cell_of_user == c] = ph[_reference_user(cell_of_user, c)]
    rot = np.exp(1j * (ref - ph))
    return EffectiveChannels(h * rot[:, None], "partial", ref)


def ci_margin(r, theta: float, sigma_n: float):
    """Largest SINR target whose CI condition holds at received point ``r``."""
    if not sigma_n > 0 or not 0 < theta < np.pi / 2:
        raise ValueError("need sigma_n > 0 and 0 < theta < pi/2")
    r = np.asarray(r)
    depth = np.maximum(0.0, r.real - np.abs(r.imag) / np.tan(theta))
    return depth ** 2 / sigma_n ** 2


def received_points(h_tilde: np.ndarray, w: np.ndarray) -> np.ndarray:
    """``h_tilde[..., j, u, :]^T w[j]`` per link, shape ``(..., n_bs, n_users)``."""
    return np.einsum("...jum,jm->...ju", h_tilde, w)


def achieved_sinr(h_true: np.ndarray, w: np.ndarray, d: SymbolDraw, cell_of_user,
                  theta: float, sigma_n: float, mode: str = "full") -> np.ndarray:
    """Per-user achieved SINR for multicast CI precoders ``w`` of shape (N, M).

    ``h_true`` may carry leading batch axes. Full mode counts every BS in the
    constructive sum; partial mode treats other-cell signals as interference.
    """
    w = np.asarray(w)
    if w.ndim != 2 or w.shape[0] != h_true.shape[-3] or w.shape[1] != h_true.shape[-1]:
        raise ValueError("need one length-M precoder per BS")
    cell_of_user = np.asarray(cell_of_user)
    if mode == "full":
        eff = rotate_full(h_true, d, cell_of_user)
        r = received_points(eff.h_tilde, w).sum(axis=-2)
        return ci_margin(r, theta, sigma_n)
    if mode in ("partial", "stat"):
        eff = rotate_partial(h_true, d, cell_of_user)
        pts = received_points(eff.h_tilde, w)
        users = np.arange(cell_of_user.size)
        own = pts[..., cell_of_user, users]
        interf = (np.abs(pts) ** 2).sum(axis=-2) - np.abs(own) ** 2
        depth = np.maximum(0.0, own.real - np.abs(own.imag) / np.tan(theta))
        return depth ** 2 / (sigma_n ** 2 + interf)
    raise ValueError(f"unknown mode {mode!r}")
