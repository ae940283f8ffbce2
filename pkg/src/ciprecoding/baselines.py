"""Conventional per-user beamforming benchmarks (CoMP and CBF).

Both are solved by semidefinite relaxation over Hermitian matrices
``W_u ~ w_u w_u^H``. With ``g = conj(h)`` the received amplitude satisfies
``|h^T w|^2 = g^H W g``. The classical SINR of user ``u`` is

    |h_u^T w_u|^2 / (sigma_n^2 + sum_{v != u} |h_u^T w_v|^2)

where for CoMP ``h_u`` and ``w_v`` stack all BSs and for CBF ``w_v`` lives
only at the serving BS of user ``v``.
"""

from __future__ import annotations

import logging
from dataclasses import replace

import numpy as np

from . import conic
from .conic import Affine, ConicProgram, MatAffine
from .robust_bounds import BoundParams, nu_squared
from .scenario import ChannelSet, CsiEstimate, Scenario
from .schemes import PrecoderSolution, bounds_for
from .solver import SolveOptions, SolveReport, solve

log = logging.getLogger(__name__)

BASELINES = ("comp", "cbf_prob", "cbf_det")


def _normalisation(s: Scenario, h: np.ndarray, cell):
    users = np.arange(h.shape[1])
    own = np.sum(np.abs(h[cell, users]) ** 2, axis=-1)
    mean_own = float(np.mean(own)) if own.size and np.mean(own) > 0 else 1.0
    g_max = float(np.max(s.gamma_lin)) if h.shape[1] else 1.0
    p0 = s.noise_power_w * max(g_max, 1.0) / mean_own
    return p0, np.sqrt(p0) / s.sigma_n


def build_comp_perfect(s: Scenario, c_true: ChannelSet) -> ConicProgram:
    """Network-wide beamforming with every BS serving every user."""
    n, nu, m = c_true.h.shape
    cell = np.asarray(c_true.cell_of_user)
    p0, a = _normalisation(s, c_true.h, cell)
    h = c_true.h * a
    p = ConicProgram(name="comp")
    p.metadata.update(scheme="comp", p0=p0, p_max=s.p_max, n_bs=n, m=m, cell_of_user=cell,
                      precoder_vectors=nu, layout="stacked", users={})
    W = [p.hermitian(f"W{u + 1}", n * m) for u in range(nu)]
    for u in range(nu):
        p.add_psd(W[u], ("psd", u))
    for j in range(n):
        sel = np.zeros((m, n * m))
        sel[:, j * m:(j + 1) * m] = np.eye(m)
        bs_power = Affine.zeros(1)
        for u in range(nu):
            bs_power = bs_power + W[u].congruence(sel).trace().real
        p.add_linear(bs_power * (p0 / s.p_max), 1.0, ("power", j))
    gam = s.gamma_lin
    for u in range(nu):
        g = np.conj(h[:, u].ravel())
        expr = W[u].quad(g).real / gam[u]
        for v in range(nu):
            if v != u:
                expr = expr - W[v].quad(g).real
        p.metadata["users"][u] = [len(p.constraints)]
        p.add_nonneg(expr - 1.0, ("sinr", u))
    p.minimize(sum((Wu.trace().real for Wu in W), Affine.zeros(1)))
    return p


def build_cbf(s: Scenario, csi: CsiEstimate, mode: str = "det",
              bounds: BoundParams | None = None) -> ConicProgram:
    """Per-cell beamforming with inter-cell interference kept in the SINR.

    ``det`` protects the SINR for every error with ``||e||^2 <= nu^2`` at
    confidence ``delta``; ``prob`` uses the same ball at confidence ``eta``.
    """
    if mode not in ("prob", "det"):
        raise ValueError(f"unknown CBF mode {mode!r}")
    bounds = bounds or bounds_for(s)
    n, nu, m = csi.h_hat.shape
    cell = np.asarray(csi.cell_of_user)
    p0, a = _normalisation(s, csi.h_hat, cell)
    h = csi.h_hat * a
    sigma = csi.sigma_links * a
    # one error vector per user, or one per link stacked
    d_err = m * (n if csi.per_link else 1)
    nu2_unit = {conf: nu_squared(BoundParams(conf, d_err, n, s.theta, 1.0, bounds.nu_mode))
                for conf in set(s.eta_arr.tolist()) | {bounds.delta}}
    name = f"cbf_{mode}"
    p = ConicProgram(name=name)
    p.metadata.update(scheme=name, p0=p0, n_bs=n, m=m, cell_of_user=cell,
                      precoder_vectors=nu, layout="serving", users={})
    W = [p.hermitian(f"W{u + 1}", m) for u in range(nu)]
    for u in range(nu):
        p.add_psd(W[u], ("psd", u))
    for j in range(n):
        bs_power = Affine.zeros(1)
        for u in np.flatnonzero(cell == j):
            bs_power = bs_power + W[u].trace().real
        p.add_linear(bs_power * (p0 / s.p_max), 1.0, ("power", j))
    gam = s.gamma_lin
    for u in range(nu):
        # Z = W_u / gamma - sum_{v != u} W_v seen through each serving BS;
        # the link to BS j carries the error s_j d with d shared by the links
        A = MatAffine.constant(np.zeros((d_err, d_err), complex))
        b = MatAffine.constant(np.zeros((d_err, 1), complex))
        cst = Affine.constant(np.array([-1.0 + 0j]))
        for v in range(nu):
            g = np.conj(h[cell[v], u])
            sv = sigma[cell[v], u]
            Z = W[v] * (1.0 / gam[u]) if v == u else -W[v]
            j = cell[v]
            E = np.eye(d_err)[:, m * j:m * (j + 1)] if csi.per_link else np.eye(m)
            A = A + Z.congruence(E) * sv ** 2
            b = b + MatAffine.column(Z.matvec(g)).lmul(E) * sv
            cst = cst + Z.quad(g)
        p.metadata["users"][u] = [len(p.constraints)]
        if not np.any(sigma[:, u]):
            p.add_nonneg(cst.real, ("sinr", u))
            continue
        nu2 = nu2_unit[s.eta_arr[u] if mode == "prob" else bounds.delta]
        # for all ||d||^2 <= nu2: d^H A d + 2 Re(b^H d) + cst >= 0
        conic.s_procedure_lmi(p, np.eye(d_err), np.zeros(d_err), -nu2, -A, -b, -cst,
                              f"lambda{u + 1}", ("sinr", u))
    p.minimize(sum((Wu.trace().real for Wu in W), Affine.zeros(1)))
    return p


# ---------------------------------------------------------------------------
# extraction


def baseline_sinr(h: np.ndarray, w: np.ndarray, sigma_n: float) -> np.ndarray:
    """Classical SINR for per-user precoders ``w`` of shape (U, N, M).

    ``h`` has shape ``(..., N, U, M)``.
    """
    amp = np.einsum("...jum,vjm->...uv", h, w)
    power = np.abs(amp) ** 2
    sig = np.diagonal(power, axis1=-2, axis2=-1)
    interf = power.sum(axis=-1) - sig
    return sig / (sigma_n ** 2 + interf)


def _rescale(h: np.ndarray, directions: np.ndarray, gamma: np.ndarray):
    """Powers meeting every SINR target with equality for fixed directions."""
    amp = np.abs(np.einsum("jum,vjm->uv", h, directions)) ** 2
    sig = np.diag(amp)
    mat = np.diag(sig / gamma) - (amp - np.diag(sig))
    try:
        pw = np.linalg.solve(mat, np.ones(len(gamma)))
    except np.linalg.LinAlgError:
        return None
    return pw if np.all(pw > 0) else None


def duality_precoders(h: np.ndarray, gamma: np.ndarray, tol: float = 1e-12,
                      max_iter: int = 500):
    """Minimum-power network beamformers through the dual uplink.

    Alternates MMSE receive filters with the uplink powers that meet every
    target exactly for those filters. ``h`` has shape (N, U, M) and is scaled
    to unit noise. Returns precoders of shape (U, N, M) meeting every SINR
    target with equality, or None when the targets are not reachable.
    """
    n, nu, m = h.shape
    gamma = np.asarray(gamma, dtype=float)
    g = np.conj(h.transpose(1, 0, 2).reshape(nu, n * m))
    ratio = 1.0 + 1.0 / gamma
    lam = np.zeros(nu)
    for _ in range(max_iter):
        filt = np.linalg.solve(np.eye(n * m) + (g.T * lam) @ g.conj(), g.T).T
        # monotone fixed-point step
        new = 1.0 / (ratio * np.real(np.sum(g.conj() * filt, axis=1)))
        filt /= np.linalg.norm(filt, axis=1, keepdims=True)
        gain = np.abs(filt.conj() @ g.T) ** 2        # [k, j] = |u_k^H g_j|^2
        mat = np.diag(np.diag(gain) / gamma) - (gain - np.diag(np.diag(gain)))
        try:
            exact = np.linalg.solve(mat, np.ones(nu))
        except np.linalg.LinAlgError:
            exact = None
        # exact powers for the current filters, once they are reachable
        if exact is not None and np.all(exact > 0):
            new = exact
        if not np.all(np.isfinite(new)) or np.max(new) > 1e15:
            return None
        done = np.max(np.abs(new - lam)) <= tol * np.max(new)
        lam = new
        if done:
            break
    else:
        return None
    filt = np.linalg.solve(np.eye(n * m) + (g.T * lam) @ g.conj(), g.T).T
    filt /= np.linalg.norm(filt, axis=1, keepdims=True)
    # downlink precoders share the uplink filters
    pw = _rescale(h, filt.reshape(nu, n, m), gamma)
    return None if pw is None else filt.reshape(nu, n, m) * np.sqrt(pw)[:, None, None]


def certified_comp(h: np.ndarray, gamma: np.ndarray, p_max: float, sigma_n: float,
                   rel_tol: float = 1e-6):
    """Rank-one CoMP precoders with a dual certificate of optimality.

    The uplink powers ``lam`` make every ``I + sum_{v != u} lam_v g_v g_v^H
    - lam_u / gamma_u g_u g_u^H`` positive semidefinite, so ``sum(lam)`` (in
    noise units) bounds the relaxed optimum from below. Returns ``(w, bound)``
    when the precoders meet the per-BS caps and attain the bound within
    ``rel_tol``, else None.
    """
    a = 1.0 / sigma_n
    w = duality_precoders(h * a, gamma)
    if w is None:
        return None
    n, nu, m = h.shape
    if np.any(np.sum(np.abs(w) ** 2, axis=(0, 2)) > p_max):
        return None
    g = np.conj((h * a).transpose(1, 0, 2).reshape(nu, n * m))
    dirs = w.reshape(nu, -1) / np.linalg.norm(w.reshape(nu, -1), axis=1, keepdims=True)
    # uplink powers giving the same SINRs with the precoders as receive filters
    gain = np.abs(dirs.conj() @ g.T) ** 2          # [k, j] = |u_k^H g_j|^2
    mat = np.diag(np.diag(gain) / gamma) - (gain - np.diag(np.diag(gain)))
    lam = np.linalg.solve(mat, np.ones(nu))
    if not np.all(lam > 0):
        return None
    total = float(np.sum(np.abs(w) ** 2))
    base = np.eye(n * m) + (g.T * lam) @ g.conj()
    worst = 0.0
    for u in range(nu):
        d = base - lam[u] * (1 + 1 / gamma[u]) * np.outer(g[u], g[u].conj())
        worst = min(worst, float(np.linalg.eigvalsh(d)[0]))
    # noise-unit channels leave powers in watts
    bound = float(np.sum(lam)) + worst * total
    if total - bound > rel_tol * total:
        return None
    return w, bound


def extract_baseline(program: ConicProgram, report: SolveReport,
                     h_nominal: np.ndarray | None = None,
                     gamma: np.ndarray | None = None) -> PrecoderSolution:
    """Principal-eigenvector precoders; rescaled when the lift is not rank one."""
    meta = program.metadata
    name = meta["scheme"]
    if not report.ok:
        return PrecoderSolution(name, report.status, iterations=report.iterations)
    p0, n, m, cell = meta["p0"], meta["n_bs"], meta["m"], meta["cell_of_user"]
    nu = len(cell)
    w = np.zeros((nu, n, m), complex)
    lifted, gaps = [], []
    for u in range(nu):
        Wu = program.read(f"W{u + 1}", report.x) * p0
        lam, vec = np.linalg.eigh(Wu)
        vu = vec[:, -1] * np.sqrt(max(lam[-1], 0.0))
        if meta["layout"] == "stacked":
            w[u] = vu.reshape(n, m)
        else:
            w[u, cell[u]] = vu
        lifted.append(Wu)
        gaps.append(float(np.real(np.trace(Wu)) - max(lam[-1], 0.0)))
    gap = max(gaps, default=0.0)
    aux = {"rescaled": False}
    total_tr = float(sum(np.real(np.trace(Wu)) for Wu in lifted))
    if gap > 1e-6 * max(1.0, total_tr) and h_nominal is not None and gamma is not None:
        norms = np.linalg.norm(w.reshape(nu, -1), axis=1)
        dirs = w / np.where(norms > 0, norms, 1.0)[:, None, None]
        a = 1.0 / np.sqrt(program.metadata.get("noise_power_w", 1.0))
        pw = _rescale(h_nominal * a, dirs, gamma)
        if pw is not None:
            w = dirs * np.sqrt(pw)[:, None, None]
            aux["rescaled"] = True
    per_bs = np.sum(np.abs(w) ** 2, axis=(0, 2))
    status = "optimal"
    if gap > 1e-3 * max(1.0, total_tr):
        status = "numerical_failure"
        log.warning("%s: lifted solution is not rank one (gap %.3g)", name, gap)
    return PrecoderSolution(name, status, w, lifted, float(per_bs.sum()), per_bs,
                            report.objective * p0, gap, report.iterations, aux)


def _certified_solution(program: ConicProgram, report: SolveReport, w: np.ndarray,
                        bound: float) -> PrecoderSolution:
    nu = w.shape[0]
    lifted = [np.outer(v, v.conj()) for v in w.reshape(nu, -1)]
    per_bs = np.sum(np.abs(w) ** 2, axis=(0, 2))
    aux = {"rescaled": False, "certified": True, "dual_bound_w": bound,
           "relaxation_status": report.status}
    return PrecoderSolution(program.metadata["scheme"], "optimal", w, lifted,
                            float(per_bs.sum()), per_bs, bound, 0.0, report.iterations, aux)


def solve_baseline(kind: str, s: Scenario, c_true: ChannelSet, csi: CsiEstimate,
                   bounds: BoundParams | None = None,
                   options: SolveOptions | None = None) -> PrecoderSolution:
    if kind == "comp":
        program = build_comp_perfect(s, c_true)
        program.metadata["noise_power_w"] = s.noise_power_w
        options = options or SolveOptions()
        report = solve(program, replace(options, fallback=None))
        cert = certified_comp(c_true.h, s.gamma_lin, s.p_max, s.sigma_n)
        if cert is not None:
            return _certified_solution(program, report, *cert)
        return extract_baseline(program, solve(program, options) if not report.ok else report,
                                c_true.h, s.gamma_lin)
    elif kind in ("cbf_prob", "cbf_det"):
        program = build_cbf(s, csi, kind.split("_")[1], bounds)
        h_nom = csi.h_hat
    else:
        raise ValueError(f"unknown baseline {kind!r}")
    program.metadata["noise_power_w"] = s.noise_power_w
    return extract_baseline(program, solve(program, options), h_nom, s.gamma_lin)
