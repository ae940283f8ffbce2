"""Experiment configuration, geometry, channels and CSI models.

Users are stored as one flat list ordered cell by cell; ``cell_of_user``
maps each user to its serving BS. Channel arrays have shape
``(n_bs, n_users, M)`` with ``h[j, u]`` the channel from BS ``j`` to user
``u``. Cells may hold different numbers of users (including none).
"""

from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field, fields, replace

import numpy as np

log = logging.getLogger(__name__)


class ConfigError(ValueError):
    """Invalid scenario configuration; ``field`` names the offending entry."""

    def __init__(self, field_name: str, msg: str):
        super().__init__(f"{field_name}: {msg}")
        self.field = field_name


@dataclass
class Scenario:
    n_bs: int = 3
    k_users: int | list = 3
    m_antennas: int = 4
    p_max: float = 100.0
    noise_psd_dbm_hz: float = -174.0
    bandwidth_hz: float = 1e6
    carrier_hz: float = 2e9
    psk_order: int = 4
    sinr_targets_db: float | list = 20.0
    eta: float | list = 0.8
    delta: float = 0.99
    csi_error_std: float | list = 0.0
    # "relative": errors live on the small-scale fading, so link (j, u) has
    # std csi_error_std * sqrt(L_ju); "absolute": csi_error_std on every link
    csi_error_mode: str = "relative"
    per_link_error: bool = False
    cell_radius_m: float = 500.0
    # BS spacing of the default ring layout; None means 4 cell radii
    inter_site_m: float | None = None
    bs_positions: list | None = None
    user_positions: list | None = None
    placement: str = "uniform"
    min_distance_m: float = 10.0
    pathloss_intercept_db: float = 128.1
    pathloss_slope_db: float = 37.6
    nu_mode: str = "paper"
    chi_c: int = 10
    chi_s: int = 140
    rng_seed: int = 0

    def __post_init__(self):
        self.validate()

    # -- validation -----------------------------------------------------
    def validate(self):
        if int(self.n_bs) < 1:
            raise ConfigError("n_bs", "must be >= 1")
        if int(self.m_antennas) < 1:
            raise ConfigError("m_antennas", "must be >= 1")
        k = self.users_per_cell
        if len(k) != self.n_bs or min(k) < 0:
            raise ConfigError("k_users", "need one nonnegative count per cell")
        if not self.p_max > 0:
            raise ConfigError("p_max", "must be positive")
        if not self.psk_order > 2:
            raise ConfigError("psk_order", "need Q > 2 so that 0 < pi/Q < pi/2")
        if not 0 < self.delta < 1:
            raise ConfigError("delta", "must lie in (0, 1)")
        for name in ("sinr_targets_db", "eta", "csi_error_std"):
            v = getattr(self, name)
            if np.ndim(v) and len(v) != self.n_users:
                raise ConfigError(name, f"expected {self.n_users} per-user values")
        if np.any(self.eta_arr <= 0) or np.any(self.eta_arr >= 1):
            raise ConfigError("eta", "must lie in (0, 1)")
        if np.any(self.sigma_arr < 0):
            raise ConfigError("csi_error_std", "must be nonnegative")
        if self.csi_error_mode not in ("relative", "absolute"):
            raise ConfigError("csi_error_mode", "relative or absolute")
        if self.placement not in ("uniform", "edge"):
            raise ConfigError("placement", "uniform or edge")
        if self.nu_mode not in ("paper", "exact"):
            raise ConfigError("nu_mode", "paper or exact")
        if self.bs_positions is not None and np.shape(self.bs_positions) != (self.n_bs, 2):
            raise ConfigError("bs_positions", "need n_bs rows of (x, y)")
        if self.user_positions is not None and np.shape(self.user_positions) != (self.n_users, 2):
            raise ConfigError("user_positions", "need one (x, y) row per user")
        if self.inter_site_m is not None and not self.inter_site_m > 0:
            raise ConfigError("inter_site_m", "must be positive")
        if not self.cell_radius_m > 0:
            raise ConfigError("cell_radius_m", "must be positive")
        if not self.noise_power_w > 0:
            raise ConfigError("noise_psd_dbm_hz", "noise power must be positive")

    # -- derived quantities ---------------------------------------------
    @property
    def users_per_cell(self) -> list:
        if np.ndim(self.k_users):
            return [int(k) for k in self.k_users]
        return [int(self.k_users)] * int(self.n_bs)

    @property
    def n_users(self) -> int:
        return sum(self.users_per_cell)

    @property
    def cell_of_user(self) -> np.ndarray:
        return np.repeat(np.arange(self.n_bs), self.users_per_cell)

    @property
    def noise_power_w(self) -> float:
        return 10 ** ((self.noise_psd_dbm_hz - 30) / 10) * self.bandwidth_hz

    @property
    def sigma_n(self) -> float:
        return float(np.sqrt(self.noise_power_w))

    @property
    def theta(self) -> float:
        return np.pi / self.psk_order

    def _per_user(self, v):
        return np.broadcast_to(np.asarray(v, dtype=float), (self.n_users,)).copy()

    @property
    def gamma_lin(self) -> np.ndarray:
        return 10 ** (self._per_user(self.sinr_targets_db) / 10)

    @property
    def eta_arr(self) -> np.ndarray:
        return self._per_user(self.eta)

    @property
    def sigma_arr(self) -> np.ndarray:
        return self._per_user(self.csi_error_std)

    def with_(self, **kw) -> "Scenario":
        return replace(self, **kw)

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)


def load_scenario(config_text: str) -> Scenario:
    """Parse a JSON scenario; unknown keys and bad values raise ConfigError."""
    try:
        raw = json.loads(config_text)
    except json.JSONDecodeError as exc:
        raise ConfigError("<text>", f"JSON parse failure: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("<text>", "top level must be an object")
    known = {f.name for f in fields(Scenario)}
    for key in raw:
        if key not in known:
            raise ConfigError(key, "unknown field")
    try:
        return Scenario(**raw)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError("<fields>", str(exc)) from exc


# ---------------------------------------------------------------------------
# geometry


def bs_layout(s: Scenario) -> np.ndarray:
    """BS coordinates: explicit, or a ring with spacing ``inter_site_m``."""
    if s.bs_positions is not None:
        return np.asarray(s.bs_positions, dtype=float)
    n = s.n_bs
    if n == 1:
        return np.zeros((1, 2))
    isd = 4.0 * s.cell_radius_m if s.inter_site_m is None else s.inter_site_m
    ring = isd / (2 * np.sin(np.pi / n))
    ang = np.pi / 2 + 2 * np.pi * np.arange(n) / n
    return ring * np.column_stack([np.cos(ang), np.sin(ang)])


def place_users(s: Scenario, rng: np.random.Generator) -> np.ndarray:
    if s.user_positions is not None:
        return np.asarray(s.user_positions, dtype=float)
    bs = bs_layout(s)
    R = s.cell_radius_m
    pos = []
    for i, k in enumerate(s.users_per_cell):
        if s.placement == "edge":
            # towards the point shared by all cells, near the cell border
            toward = -bs[i] if np.linalg.norm(bs[i]) > 0 else np.array([1.0, 0.0])
            base = np.arctan2(toward[1], toward[0])
            ang = base + np.deg2rad(rng.uniform(-20, 20, k))
            r = rng.uniform(0.85, 0.95, k) * R
        else:
            ang = rng.uniform(0, 2 * np.pi, k)
            r0 = s.min_distance_m
            r = np.sqrt(rng.uniform(r0 ** 2, R ** 2, k))
        pos.append(bs[i] + r[:, None] * np.column_stack([np.cos(ang), np.sin(ang)]))
    return np.vstack(pos) if pos else np.zeros((0, 2))


def path_gain(s: Scenario, d_m) -> np.ndarray:
    """Linear path-loss gain, distances clamped to ``min_distance_m``."""
    d = np.asarray(d_m, dtype=float)
    if np.any(d < s.min_distance_m):
        log.warning("user closer than %.1f m to a BS; distance clamped", s.min_distance_m)
    d = np.maximum(d, s.min_distance_m)
    pl_db = s.pathloss_intercept_db + s.pathloss_slope_db * np.log10(d / 1000.0)
    return 10 ** (-pl_db / 10)


# ---------------------------------------------------------------------------
# channels


@dataclass
class ChannelSet:
    h: np.ndarray               # (n_bs, n_users, M) complex
    cell_of_user: np.ndarray    # (n_users,)
    gain: np.ndarray            # (n_bs, n_users) path-loss gains
    user_positions: np.ndarray = field(default=None)

    @property
    def n_bs(self):
        return self.h.shape[0]

    @property
    def n_users(self):
        return self.h.shape[1]

    def as_tensor(self) -> np.ndarray:
        """``(N, N, K, M)`` tensor indexed (j, i, k); needs equal cell sizes."""
        n = self.n_bs
        counts = np.bincount(self.cell_of_user, minlength=n)
        if np.any(counts != counts[0]):
            raise ValueError("cells hold different numbers of users")
        return self.h.reshape(n, n, counts[0], -1)


@dataclass
class CsiEstimate:
    h_hat: np.ndarray
    sigma: np.ndarray           # absolute error std of each serving link
    cell_of_user: np.ndarray
    per_link: bool = False
    link_sigma: np.ndarray | None = None    # (n_bs, n_users); None: sigma on all links

    def __post_init__(self):
        self.sigma = np.asarray(self.sigma, dtype=float)
        self.cell_of_user = np.asarray(self.cell_of_user)

    @property
    def sigma_links(self) -> np.ndarray:
        """Error std of every link, shape ``(n_bs, n_users)``."""
        if self.link_sigma is not None:
            return np.asarray(self.link_sigma, dtype=float)
        return np.broadcast_to(self.sigma, self.h_hat.shape[:2]).copy()


@dataclass
class StatisticalCsi:
    r: np.ndarray               # (n_bs, n_users, M, M) Hermitian PSD
    u: np.ndarray               # (n_bs, n_users, M)
    sigma2_white: np.ndarray    # (n_bs, n_users)


def generate_channels(s: Scenario, seed: int) -> ChannelSet:
    """Path loss times i.i.d. unit-variance Rayleigh fading; pure in (s, seed)."""
    geo_rng, fade_rng = np.random.default_rng([s.rng_seed, seed]).spawn(2)
    users = place_users(s, geo_rng)
    bs = bs_layout(s)
    d = np.linalg.norm(bs[:, None, :] - users[None, :, :], axis=-1)
    gain = path_gain(s, d)
    shape = (s.n_bs, s.n_users, s.m_antennas)
    g = (fade_rng.standard_normal(shape) + 1j * fade_rng.standard_normal(shape)) / np.sqrt(2)
    return ChannelSet(np.sqrt(gain)[..., None] * g, s.cell_of_user, gain, users)


def link_error_std(s: Scenario, c: ChannelSet) -> np.ndarray:
    """Absolute CSI error std of every link, shape ``(n_bs, n_users)``."""
    sig = np.broadcast_to(s.sigma_arr, (c.n_bs, c.n_users))
    if s.csi_error_mode == "relative":
        return sig * np.sqrt(c.gain)
    return sig.copy()


def error_std(s: Scenario, c: ChannelSet) -> np.ndarray:
    """Absolute CSI error std of each user's serving link."""
    return link_error_std(s, c)[c.cell_of_user, np.arange(c.n_users)]


def draw_errors(sigma: np.ndarray, n_bs: int, m: int, rng: np.random.Generator,
                per_link: bool = False, n_draws: int | None = None) -> np.ndarray:
    """Complex Gaussian errors shaped like the channel array.

    ``sigma`` is per user or per link ``(n_bs, n_users)``. Without
    ``per_link`` one unit-variance vector per user is shared by all of its
    links and scaled by each link's std. ``n_draws`` prepends a batch axis.
    """
    sigma = np.asarray(sigma, dtype=float)
    n_users = sigma.shape[-1]
    sigma = np.broadcast_to(sigma, (n_bs, n_users))
    lead = () if n_draws is None else (n_draws,)
    links = n_bs if per_link else 1
    shape = lead + (links, n_users, m)
    e = (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)
    return e * sigma[..., None]


def corrupt_csi(c: ChannelSet, s: Scenario, seed: int) -> CsiEstimate:
    sig = link_error_std(s, c)
    rng = np.random.default_rng([s.rng_seed, seed, 1])
    e = draw_errors(sig, c.n_bs, c.h.shape[2], rng, s.per_link_error)
    own = sig[c.cell_of_user, np.arange(c.n_users)]
    return CsiEstimate(c.h - e, own, c.cell_of_user, s.per_link_error, sig)


def build_statistical_csi(s: Scenario, window, reference: ChannelSet | None = None,
                          min_window: int | None = None) -> StatisticalCsi:
    """Correlation matrices ``R = u u^H + sigma^2 I`` of every link.

    ``window="analytic"`` uses zero-mean fading, R = L I (needs ``reference``
    for the path gains); a list of ChannelSets gives the sample correlation,
    projected onto the PSD cone. Sample windows shorter than ``min_window``
    (default M) are rejected.
    """
    m = s.m_antennas
    if isinstance(window, str):
        if window != "analytic" or reference is None:
            raise ValueError("analytic mode needs a reference ChannelSet")
        gain = reference.gain
        r = gain[..., None, None] * np.eye(m)
        return StatisticalCsi(r, np.zeros(gain.shape + (m,), complex), gain.copy())
    window = list(window)
    need = m if min_window is None else min_window
    if len(window) < max(need, 1):
        raise ValueError(f"sample window needs at least {need} realizations")
    hs = np.stack([c.h for c in window])
    r = np.einsum("tjum,tjun->jumn", hs, hs.conj()) / len(window)
    r = 0.5 * (r + np.conj(np.swapaxes(r, -1, -2)))
    lam, vec = np.linalg.eigh(r)
    r = np.einsum("...mk,...k,...nk->...mn", vec, np.maximum(lam, 0.0), vec.conj())
    mean = hs.mean(axis=0)
    white = np.real(np.trace(r, axis1=-2, axis2=-1)) / m
    return StatisticalCsi(r, mean, white)
