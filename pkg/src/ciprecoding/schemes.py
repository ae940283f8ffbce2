"""Power-minimising constructive-interference precoders for coordinated cells.

Five problem families are built here:

* ``full_prob`` / ``full_det``: every BS contributes constructively to every
  user; chance constraints or worst-case constraints on both edges of the
  CI sector.
* ``partial_prob`` / ``partial_det``: each BS serves its own users
  constructively and treats other cells' signals as interference, bounded by
  an auxiliary amplitude ``phi`` that enlarges the required CI depth.
* ``stat``: as ``partial_det`` but interference is bounded through channel
  correlation matrices only.

Precoders are real-embedded: BS ``j`` owns ``x_j = [Re w_j; Im w_j]``. For a
link channel ``h`` the received point is ``h^T w = p^T x + j q^T x`` with
``p = [Re h; -Im h]`` and ``q = [Im h; Re h]``.

CSI errors: link ``(j, u)`` carries ``s_ju e_u`` with ``e_u ~ CN(0, I)``
shared by the links of user ``u`` (or drawn per link). By default the
worst-case schemes protect every error in the ball ``||e|| <= nu`` holding
with probability ``delta``, and the chance schemes use the exact
distribution of the sector-edge statistics with each edge at ``(1 + eta)/2``
so that both edges hold jointly with probability ``eta``. ``region="paper"``
and ``chance="paper"`` select the diagonal S-procedure blocks and the
per-edge chance constraints with variance ``(1 + tan^2 theta) s^2`` instead.

Programs are built in normalised units: channels are scaled by
``sqrt(P0)/sigma_n`` so that the noise amplitude is one and powers are in
units of ``P0`` (stored in the program metadata).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np

from . import conic
from .ci_geometry import EffectiveChannels, SymbolDraw, rotate_full, rotate_partial
from .conic import Affine, ChanceConstraintData, ConicProgram, MatAffine, bmat
from .robust_bounds import BoundParams, nu_squared, rho_squared, xi_squared
from .scenario import CsiEstimate, Scenario, StatisticalCsi
from .solver import SolveOptions, SolveReport, solve

log = logging.getLogger(__name__)

CI_SCHEMES = ("full_prob", "full_det", "partial_prob", "partial_det", "stat")

# real-embedding maps of a complex error vector eps = [Re e; Im e]
def _d_mat(m):
    return np.diag(np.r_[np.ones(m), -np.ones(m)])


def _p_mat(m):
    z, i = np.zeros((m, m)), np.eye(m)
    return np.block([[z, i], [i, z]])


def link_pq(h: np.ndarray):
    """Real vectors with ``h^T w = p^T x + j q^T x``."""
    return np.r_[h.real, -h.imag], np.r_[h.imag, h.real]


def correlation_embedding(r: np.ndarray) -> np.ndarray:
    """Real matrix Q with ``E|h^T w|^2 = x^T Q x`` for ``R = E[h h^H]``."""
    return np.block([[r.real, r.imag], [-r.imag, r.real]])


def bounds_for(s: Scenario) -> BoundParams:
    return BoundParams(delta=s.delta, m_antennas=s.m_antennas, n_bs=s.n_bs,
                       theta=s.theta, nu_mode=s.nu_mode)


@dataclass
class PrecoderSolution:
    scheme: str
    status: str
    w: np.ndarray | None = None          # (N, M) CI, (U, N, M) baselines
    w_lifted: list | None = None
    total_power_w: float = float("nan")
    per_bs_power_w: np.ndarray | None = None
    objective_w: float = float("nan")
    relaxation_gap: float = float("nan")
    iterations: int = 0
    aux: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return self.status == "optimal"

    @property
    def lifted_trace(self) -> float:
        if not self.w_lifted:
            return float("nan")
        return float(sum(np.real(np.trace(W)) for W in self.w_lifted))


# ---------------------------------------------------------------------------
# shared construction helpers


class _Ctx:
    """Normalised problem data shared by all CI builders."""

    def __init__(self, s: Scenario, csi: CsiEstimate, eff: EffectiveChannels, name: str):
        h_hat = csi.h_hat
        if eff.h_tilde.shape != h_hat.shape:
            raise ValueError("effective channels do not match the CSI estimate")
        self.s = s
        self.n, self.u, self.m = h_hat.shape
        if self.n != s.n_bs or self.m != s.m_antennas or self.u != s.n_users:
            raise ValueError("CSI shape does not match the scenario")
        self.cell = np.asarray(csi.cell_of_user)
        users = np.arange(self.u)
        own = np.sum(np.abs(h_hat[self.cell, users]) ** 2, axis=-1)
        mean_own = float(np.mean(own)) if own.size and np.mean(own) > 0 else 1.0
        g_max = float(np.max(s.gamma_lin)) if self.u else 1.0
        self.p0 = s.noise_power_w * max(g_max, 1.0) / mean_own
        self.a = np.sqrt(self.p0) / s.sigma_n
        self.h = h_hat * self.a                 # unrotated, normalised
        self.ht = eff.h_tilde * self.a          # rotated, normalised
        # error std of every link in normalised units, shape (n_bs, n_users)
        self.sigma = csi.sigma_links * self.a
        self.per_link = bool(csi.per_link)
        # dimension of the complex error vector behind one user's links
        self.err_dim = self.m * (self.n if self.per_link else 1)
        self.sqrt_gamma = np.sqrt(s.gamma_lin)
        self.tan = np.tan(s.theta)
        self.p = ConicProgram(name=name)
        self.p.metadata.update(scheme=name, p0=self.p0, n_bs=self.n, m=self.m,
                               cell_of_user=self.cell, precoder_vectors=self.n,
                               users={k: [] for k in range(self.u)})
        self.x = [self.p.variable(f"w{j + 1}", 2 * self.m) for j in range(self.n)]
        self.x_all = conic.vstack(self.x)

    def tag(self, u, label):
        cid = len(self.p.constraints)
        self.p.metadata["users"][u].append(cid)
        return (label, u)

    def objective_and_caps(self, objective: str = "trace"):
        # caps are scaled to a unit right-hand side; a loose cap far above
        # the optimum otherwise upsets the interior-point scaling
        p, scale = self.p, self.p0 / self.s.p_max
        total = Affine.zeros(1)
        for j, xj in enumerate(self.x):
            if objective == "trace":
                W = conic.lift_rank_one(p, xj, f"W{j + 1}")
                pw = W.trace()
            elif objective == "epigraph":
                # ||x||^2 <= s  <=>  ||[2x; s - 1]|| <= s + 1
                sj = p.variable(f"s{j + 1}", 1)
                p.add_soc(sj + 1.0, conic.vstack([xj * 2.0, sj - 1.0]), ("epigraph", j))
                pw = sj
            else:
                raise ValueError(f"unknown objective form {objective!r}")
            p.add_linear(pw * scale, 1.0, ("power", j))
            total = total + pw
        p.minimize(total)
        p.metadata["objective_form"] = objective

    def full_means(self, u):
        """Mean vectors of the two sector-edge constraints over all BSs."""
        a_bar, b_bar = [], []
        for j in range(self.n):
            pv, qv = link_pq(self.ht[j, u])
            a_bar.append(qv - self.tan * pv)
            b_bar.append(-qv - self.tan * pv)
        return np.concatenate(a_bar), np.concatenate(b_bar)

    def own_means(self, u):
        pv, qv = link_pq(self.ht[self.cell[u], u])
        return qv - self.tan * pv, -qv - self.tan * pv

    def error_response(self, u, links) -> Affine:
        """Real vector ``g(x)`` with ``sum_j s_ju e^T w_j = <e, g(x)>`` over ``links``.

        With a shared error this is the embedding of ``sum_j s_ju w_j``;
        with per-link errors the scaled precoders are stacked.
        """
        parts = [self.x[j] * self.sigma[j, u] for j in links]
        if self.per_link:
            return conic.vstack(parts)
        total = parts[0]
        for p_ in parts[1:]:
            total = total + p_
        return total

    def select(self, j, vec: Affine) -> Affine:
        """Place a link's error-space vector into the stacked error space."""
        if not self.per_link:
            return vec
        d = 2 * self.m
        rows = [Affine.zeros(d) for _ in range(self.n)]
        rows[j] = vec
        return conic.vstack(rows)

    def nu(self, bounds: BoundParams) -> float:
        """Radius of the unit-std error ball of probability ``delta``."""
        return float(np.sqrt(nu_squared(replace(bounds, m_antennas=self.err_dim, sigma=1.0))))


def _check_eta(s: Scenario):
    if np.any(s.eta_arr <= 0.5):
        raise ValueError("chance thresholds must exceed 0.5")


def _diag_block(p: ConicProgram, xvec: Affine, radius: float, margin: Affine,
                name: str, tag) -> int:
    """Worst-case block ``lam [[I,0],[0,-r]] - [[diag(x),0],[0,margin]] >= 0``."""
    lam = p.variable(name, 1)
    p.add_nonneg(lam, tag + ("multiplier",))
    d = xvec.size
    diag = conic.vstack([np.ones((d, 1)) @ lam - xvec, lam * (-radius) - margin])
    return p.add_psd(MatAffine.diag(diag), tag)


def _check_region(region):
    if region not in ("ball", "paper"):
        raise ValueError(f"unknown uncertainty region {region!r}")


def _check_chance(chance):
    if chance not in ("joint", "paper"):
        raise ValueError(f"unknown chance model {chance!r}")


def _worst_case_edge(p: ConicProgram, mean, x: Affine, rhs, response: Affine,
                     radius: float, tag) -> int:
    """``mean^T x + radius ||response|| <= rhs``: exact over an error ball."""
    slack = rhs - x.dot(mean)
    if radius == 0 or response.coef.count_nonzero() == 0:
        return p.add_nonneg(slack, tag)
    return p.add_soc(slack * (1.0 / radius), response, tag)


def _chance_edges(c: "_Ctx", u, means, x: Affine, rhs, links, chance, form):
    """Two sector-edge chance constraints for user ``u``.

    ``joint``: edge statistic error ``Re(c e^T v)`` with ``|c|^2 = 1 + t^2``
    is normal with std ``sqrt((1 + t^2)/2) ||g(x)||``; each edge at
    ``(1 + eta)/2`` gives both with probability at least ``eta``.
    """
    eta = c.s.eta_arr[u]
    for label, mean in zip(("ci_upper", "ci_lower"), means):
        if chance == "joint":
            spread = c.error_response(u, links) * np.sqrt((1 + c.tan ** 2) / 2)
            d = ChanceConstraintData(mean, spread, (1 + eta) / 2, rhs)
        else:
            cov = np.repeat(c.sigma[links, u], 2 * c.m) * np.sqrt(1 + c.tan ** 2)
            d = ChanceConstraintData(mean, cov, eta, rhs)
        conic.add_chance_soc(c.p, d, x, c.tag(u, label), form=form)


# ---------------------------------------------------------------------------
# full coordination


def build_full_ci_prob(s: Scenario, csi: CsiEstimate, eff: EffectiveChannels, *,
                       chance_form: str = "soc", objective: str = "trace",
                       chance: str = "joint") -> ConicProgram:
    if eff.mode != "full":
        raise ValueError("full-coordination schemes need fully rotated channels")
    _check_eta(s)
    _check_chance(chance)
    c = _Ctx(s, csi, eff, "full_prob")
    c.objective_and_caps(objective)
    c.p.metadata["chance"] = chance
    links = list(range(c.n))
    for u in range(c.u):
        rhs = -c.sqrt_gamma[u] * c.tan
        _chance_edges(c, u, c.full_means(u), c.x_all, rhs, links, chance, chance_form)
    return c.p


def build_full_ci_det(s: Scenario, csi: CsiEstimate, eff: EffectiveChannels,
                      bounds: BoundParams | None = None, *,
                      objective: str = "trace", region: str = "ball") -> ConicProgram:
    if eff.mode != "full":
        raise ValueError("full-coordination schemes need fully rotated channels")
    _check_region(region)
    bounds = bounds or bounds_for(s)
    c = _Ctx(s, csi, eff, "full_det")
    c.objective_and_caps(objective)
    c.p.metadata["region"] = region
    if region == "ball":
        radius = c.nu(bounds) * np.sqrt(1 + c.tan ** 2)
        links = list(range(c.n))
        for u in range(c.u):
            rhs = -c.sqrt_gamma[u] * c.tan
            g = c.error_response(u, links)
            for label, mean in zip(("ci_upper", "ci_lower"), c.full_means(u)):
                _worst_case_edge(c.p, mean, c.x_all, rhs, g, radius, c.tag(u, label))
        return c.p
    # radii for unit error std; each link's std scales its block entries
    xi2 = xi_squared(bounds.with_sigma(1.0))
    for u in range(c.u):
        a_bar, b_bar = c.full_means(u)
        off = c.sqrt_gamma[u] * c.tan
        rho = c.x_all.dot(a_bar) + off
        g = c.x_all.dot(b_bar) + off
        xs = c.x_all * np.repeat(c.sigma[:, u], 2 * c.m)
        _diag_block(c.p, xs, xi2, rho, f"lambda{u + 1}", c.tag(u, "ci_upper"))
        _diag_block(c.p, xs, xi2, g, f"omega{u + 1}", c.tag(u, "ci_lower"))
    return c.p


# ---------------------------------------------------------------------------
# partial coordination


def _interference_terms(c: _Ctx, u):
    """Rows of the nominal interference amplitudes and their error gradients."""
    i = c.cell[u]
    D, P = _d_mat(c.m), _p_mat(c.m)
    a_rows, b_rows = [], []
    for j in range(c.n):
        if j == i:
            continue
        pv, qv = link_pq(c.h[j, u])
        a_rows += [c.x[j].dot(pv), c.x[j].dot(qv)]
        sj = c.sigma[j, u]
        b_rows += [MatAffine.column(c.select(j, D @ c.x[j] * sj)).T,
                   MatAffine.column(c.select(j, P @ c.x[j] * sj)).T]
    return a_rows, b_rows


def _robust_amplitude(c: _Ctx, u, phi: Affine, nu: float):
    """``phi >= max_{||e|| <= nu} sqrt(sum_{j != i} |(h_j + s_j e)^T w_j|^2)``.

    ``e`` is the unit-std error shared by the links, ``s_j`` each link's std.

    Exact certificate for a norm-bounded uncertainty in a second-order cone:
    ``[[phi - lam, a^T, 0], [a, phi I, nu B], [0, nu B^T, lam I]] >= 0``.
    """
    a_rows, b_rows = _interference_terms(c, u)
    if not a_rows:
        return c.p.add_nonneg(phi, c.tag(u, "interference"))
    if nu == 0:
        return c.p.add_soc(phi, conic.vstack(a_rows), c.tag(u, "interference"))
    lam = c.p.variable(f"kappa{u + 1}", 1)
    c.p.add_nonneg(lam, ("interference", u, "multiplier"))
    a = MatAffine.column(conic.vstack(a_rows))
    B = bmat([[r] for r in b_rows]) * nu
    n, d = a.shape[0], 2 * c.err_dim
    block = bmat([
        [MatAffine.from_scalar(phi - lam, np.eye(1)), a.T, np.zeros((1, d))],
        [a, MatAffine.from_scalar(phi, np.eye(n)), B],
        [np.zeros((d, 1)), B.T, MatAffine.from_scalar(lam, np.eye(d))],
    ])
    return c.p.add_psd(block, c.tag(u, "interference"))


def _stat_amplitude(c: _Ctx, u, phi: Affine, stat_r):
    """``phi >= sqrt(sum_{j != i} x_j^T Q(R_j) x_j)``."""
    i = c.cell[u]
    rows = []
    for j in range(c.n):
        if j == i:
            continue
        q = correlation_embedding(stat_r[j, u])
        lam, vec = np.linalg.eigh(0.5 * (q + q.T))
        half = (vec * np.sqrt(np.maximum(lam, 0.0))).T
        rows.append(half @ c.x[j])
    if not rows:
        return c.p.add_nonneg(phi, c.tag(u, "interference"))
    return c.p.add_soc(phi, conic.vstack(rows), c.tag(u, "interference"))


def _lifted_coupling(c: _Ctx, u, phi: Affine, uvar: Affine):
    """Relaxed ``phi^2 >= u``: S >= t t^T with S_11 >= u, t = [phi; u]."""
    S = c.p.symmetric(f"S{u + 1}", 2)
    t = MatAffine.column(conic.vstack([phi, uvar]))
    c.p.add_psd(bmat([[S, t], [t.T, np.eye(1)]]), c.tag(u, "coupling"))
    c.p.add_nonneg(S.inner(np.diag([1.0, 0.0])) - uvar, c.tag(u, "coupling"))


def _lifted_interference(c: _Ctx, u, uvar: Affine, nu: float):
    """S-procedure bound of the worst-case interference energy by ``u``."""
    i = c.cell[u]
    D, P = _d_mat(c.m), _p_mat(c.m)
    d = 2 * c.err_dim
    A = MatAffine.constant(np.zeros((d, d)))
    b = MatAffine.constant(np.zeros((d, 1)))
    cst = Affine.zeros(1)
    for j in range(c.n):
        if j == i:
            continue
        W = c.p.metadata["lifted"][j]
        pv, qv = link_pq(c.h[j, u])
        sj = c.sigma[j, u]
        # embed link j's error block into the stacked error space
        E = np.eye(d)[:, 2 * c.m * j:2 * c.m * (j + 1)] if c.per_link else np.eye(d)
        A = A + (W.congruence(E @ D) + W.congruence(E @ P)) * sj ** 2
        b = b + (MatAffine.column(D @ W.matvec(pv)) + MatAffine.column(P @ W.matvec(qv))).lmul(E) * sj
        cst = cst + W.quad(pv) + W.quad(qv)
    psi = c.p.variable(f"psi{u + 1}", 1)
    c.p.add_nonneg(psi, ("interference", u, "multiplier"))
    block = bmat([[MatAffine.from_scalar(psi, np.eye(d)) - A, -b],
                  [-b.T, MatAffine.from_scalar(uvar - cst - psi * nu ** 2, np.eye(1))]])
    return c.p.add_psd(block, c.tag(u, "interference"))


def _partial_common(s, csi, eff, name, objective, coupling, margin):
    if eff.mode != "partial":
        raise ValueError("partial schemes need per-cell rotated channels")
    if coupling not in ("exact", "sdr"):
        raise ValueError(f"unknown coupling {coupling!r}")
    if margin not in ("sum", "norm"):
        raise ValueError(f"unknown margin form {margin!r}")
    c = _Ctx(s, csi, eff, name)
    if coupling == "sdr" and objective != "trace":
        raise ValueError("the lifted interference bound needs the trace objective")
    c.objective_and_caps(objective)
    if coupling == "sdr":
        # reuse the lifted matrices created for the objective
        c.p.metadata["lifted"] = [c.p.metadata["lift_mats"][f"W{j + 1}"] for j in range(c.n)]
    c.p.metadata["coupling"] = coupling
    c.p.metadata["margin"] = margin
    phi = c.p.variable("phi", c.u)
    c.p.add_nonneg(phi, ("phi",))
    uvar = c.p.variable("u", c.u) if coupling == "sdr" else None
    return c, phi, uvar


def _noise_margin(c: _Ctx, u, phi_u: Affine, margin: str) -> Affine:
    """Amplitude that scales ``sqrt(Gamma) tan(theta)`` in the own-cell CI bound.

    ``sum`` is ``sigma_n + phi`` (unit noise after normalisation); ``norm``
    is a variable ``tau >= ||(sigma_n, phi)||``, the exact square root of
    noise plus interference energy.
    """
    if margin == "sum":
        return phi_u + 1.0
    tau = c.p.variable(f"tau{u + 1}", 1)
    c.p.add_soc(tau, conic.vstack([Affine.constant(np.ones(1)), phi_u]), c.tag(u, "noise_margin"))
    return tau


def _interference_bound(c, u, phi_u, u_u, coupling, nu, stat_r=None):
    if coupling == "exact":
        if stat_r is None:
            _robust_amplitude(c, u, phi_u, nu)
        else:
            _stat_amplitude(c, u, phi_u, stat_r)
        return
    _lifted_coupling(c, u, phi_u, u_u)
    if stat_r is None:
        _lifted_interference(c, u, u_u, nu)
    else:
        i = c.cell[u]
        total = Affine.zeros(1)
        for j in range(c.n):
            if j != i:
                total = total + c.p.metadata["lifted"][j].inner(correlation_embedding(stat_r[j, u]))
        c.p.add_linear(total, u_u, c.tag(u, "interference"))


def build_partial_ci_prob(s: Scenario, csi: CsiEstimate, eff: EffectiveChannels,
                          bounds: BoundParams | None = None, *, chance_form: str = "soc",
                          objective: str = "trace", coupling: str = "exact",
                          margin: str = "norm", chance: str = "joint") -> ConicProgram:
    """Own-cell chance constraints; interference bounded over the error ball."""
    _check_eta(s)
    _check_chance(chance)
    bounds = bounds or bounds_for(s)
    c, phi, uvar = _partial_common(s, csi, eff, "partial_prob", objective, coupling, margin)
    c.p.metadata["chance"] = chance
    nu = c.nu(bounds)
    for u in range(c.u):
        i = c.cell[u]
        rhs = _noise_margin(c, u, phi[u], margin) * (-c.sqrt_gamma[u] * c.tan)
        _chance_edges(c, u, c.own_means(u), c.x[i], rhs, [i], chance, chance_form)
        _interference_bound(c, u, phi[u], None if uvar is None else uvar[u], coupling, nu)
    return c.p


def build_partial_ci_det(s: Scenario, csi: CsiEstimate, eff: EffectiveChannels,
                         bounds: BoundParams | None = None, *, objective: str = "trace",
                         coupling: str = "exact", margin: str = "norm", region: str = "ball",
                         stat: StatisticalCsi | None = None,
                         name: str = "partial_det") -> ConicProgram:
    _check_region(region)
    bounds = bounds or bounds_for(s)
    c, phi, uvar = _partial_common(s, csi, eff, name, objective, coupling, margin)
    c.p.metadata["region"] = region
    stat_r = None if stat is None else stat.r * c.a ** 2
    rho2 = rho_squared(bounds.with_sigma(1.0))
    nu = c.nu(bounds)
    radius = nu * np.sqrt(1 + c.tan ** 2)
    for u in range(c.u):
        i = c.cell[u]
        f_bar, d_bar = c.own_means(u)
        off = _noise_margin(c, u, phi[u], margin) * (c.sqrt_gamma[u] * c.tan)
        if region == "ball":
            g = c.error_response(u, [i])
            for label, mean in (("ci_upper", f_bar), ("ci_lower", d_bar)):
                _worst_case_edge(c.p, mean, c.x[i], -off, g, radius, c.tag(u, label))
        else:
            xs = c.x[i] * c.sigma[i, u]
            _diag_block(c.p, xs, rho2, c.x[i].dot(f_bar) + off, f"varsigma{u + 1}",
                        c.tag(u, "ci_upper"))
            _diag_block(c.p, xs, rho2, c.x[i].dot(d_bar) + off, f"vartheta{u + 1}",
                        c.tag(u, "ci_lower"))
        _interference_bound(c, u, phi[u], None if uvar is None else uvar[u], coupling, nu,
                            stat_r)
    return c.p


def build_stat_ci(s: Scenario, csi_local: CsiEstimate, stat: StatisticalCsi,
                  eff: EffectiveChannels, bounds: BoundParams | None = None, *,
                  objective: str = "trace", coupling: str = "exact",
                  margin: str = "norm", region: str = "ball") -> ConicProgram:
    """Own-cell blocks as in ``partial_det``; interference from correlations.

    Only the serving links of ``csi_local`` are read.
    """
    n, nu_, m = csi_local.h_hat.shape
    if stat.r.shape != (n, nu_, m, m):
        raise ValueError("statistical CSI must cover every link")
    return build_partial_ci_det(s, csi_local, eff, bounds, objective=objective,
                                coupling=coupling, margin=margin, region=region, stat=stat,
                                name="stat")


# ---------------------------------------------------------------------------
# extraction and one-call solve


def extract_precoders(program: ConicProgram, report: SolveReport) -> PrecoderSolution:
    meta = program.metadata
    name = meta.get("scheme", program.name)
    if not report.ok:
        return PrecoderSolution(name, report.status, iterations=report.iterations)
    p0, n, m = meta["p0"], meta["n_bs"], meta["m"]
    x = report.x
    w = np.zeros((n, m), complex)
    lifted, gaps = [], []
    for j in range(n):
        xj = program.read(f"w{j + 1}", x)
        w[j] = (xj[:m] + 1j * xj[m:]) * np.sqrt(p0)
        if f"W{j + 1}" in program.variables:
            W = program.read(f"W{j + 1}", x) * p0
            tr = np.trace(W)
        else:
            tr = float(program.read(f"s{j + 1}", x)[0]) * p0
            W = None
        lifted.append(W)
        gaps.append(tr - np.sum(np.abs(w[j]) ** 2))
    per_bs = np.sum(np.abs(w) ** 2, axis=1)
    aux = {}
    if "phi" in program.variables:
        phi = program.read("phi", x)
        aux["phi"] = phi
        if "u" in program.variables:
            uu = program.read("u", x)
            aux["u"] = uu
            aux["coupling_gap"] = float(np.max(uu - phi ** 2, initial=0.0))
        else:
            aux["u"] = phi ** 2
            aux["coupling_gap"] = 0.0
    gap = float(max(gaps, default=0.0))
    status = "optimal"
    tr_total = float(np.sum(per_bs) + np.sum(gaps))
    if gap > 1e-3 * max(1.0, tr_total):
        status = "numerical_failure"
        log.warning("%s: lifted solution is not rank one (gap %.3g)", name, gap)
    return PrecoderSolution(name, status, w, lifted if lifted[0] is not None else None,
                            float(per_bs.sum()), per_bs, report.objective * p0, gap,
                            report.iterations, aux)


def effective_channels(kind: str, h: np.ndarray, symbols: SymbolDraw, cell_of_user):
    if kind.startswith("full"):
        return rotate_full(h, symbols, cell_of_user)
    return rotate_partial(h, symbols, cell_of_user)


def build_scheme(kind: str, s: Scenario, csi: CsiEstimate, symbols: SymbolDraw,
                 stat: StatisticalCsi | None = None, bounds: BoundParams | None = None,
                 **kw) -> ConicProgram:
    eff = effective_channels(kind, csi.h_hat, symbols, csi.cell_of_user)
    if kind == "full_prob":
        return build_full_ci_prob(s, csi, eff, **kw)
    if kind == "full_det":
        return build_full_ci_det(s, csi, eff, bounds, **kw)
    if kind == "partial_prob":
        return build_partial_ci_prob(s, csi, eff, bounds, **kw)
    if kind == "partial_det":
        return build_partial_ci_det(s, csi, eff, bounds, **kw)
    if kind == "stat":
        if stat is None:
            raise ValueError("the statistical scheme needs correlation matrices")
        return build_stat_ci(s, csi, stat, eff, bounds, **kw)
    raise ValueError(f"unknown CI scheme {kind!r}")


def solve_scheme(kind: str, s: Scenario, csi: CsiEstimate, symbols: SymbolDraw,
                 stat: StatisticalCsi | None = None, bounds: BoundParams | None = None,
                 options: SolveOptions | None = None, **kw) -> PrecoderSolution:
    program = build_scheme(kind, s, csi, symbols, stat, bounds, **kw)
    return extract_precoders(program, solve(program, options))
