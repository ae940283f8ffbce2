"""Conic solver adapters and solver-independent solution checks."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .conic import ConicProgram

log = logging.getLogger(__name__)

STATUSES = ("optimal", "infeasible", "unbounded", "max_iterations", "numerical_failure")


@dataclass
class SolveOptions:
    tol: float = 1e-7
    max_iter: int = 200
    backend: str = "clarabel"
    verbose: bool = False
    # retried when the primary backend stalls; skipped if not installed
    fallback: str | None = "cvxopt"
    # optimal points violating a constraint by more than this are rejected
    verify_tol: float = 1e-6


@dataclass
class SolveReport:
    status: str
    objective: float = float("nan")
    x: np.ndarray | None = None
    iterations: int = 0
    residuals: dict = field(default_factory=dict)
    backend: str = ""

    @property
    def ok(self) -> bool:
        return self.status == "optimal"


# ---------------------------------------------------------------------------
# cone-ordered stacking


def _stack(program: ConicProgram, psd_layout: str):
    """Return (coef, const, dims) with rows ordered nonneg, soc, psd.

    ``psd_layout`` is ``"triu_scaled"`` (upper triangle, column-wise, off
    diagonals times sqrt 2) or ``"full"`` (column-major, all entries).
    """
    n = program.n_vars
    lin, soc, psd = [], [], []
    for c in program.constraints:
        if c.kind == "nonneg":
            lin.append((c.expr.coef[:, :n], c.expr.const))
        elif c.kind == "soc":
            soc.append((c.expr.coef[:, :n], c.expr.const))
        else:
            d = c.dim
            coef = c.mat.vec.coef[:, :n]
            const = c.mat.vec.const
            if psd_layout == "triu_scaled":
                ii, jj = _triu_colwise(d)
                rows = ii * d + jj
                scale = np.where(ii == jj, 1.0, np.sqrt(2.0))
                coef = sp.diags(scale) @ coef[rows]
                const = scale * const[rows]
            else:
                rows = (np.arange(d)[None, :] * d + np.arange(d)[:, None]).ravel()
                coef = coef[rows]
                const = const[rows]
            psd.append((coef, const, d))
    parts = lin + soc + [(a, b) for a, b, _ in psd]
    dims = {
        "l": int(sum(b.size for _, b in lin)),
        "q": [int(b.size) for _, b in soc],
        "s": [d for _, _, d in psd],
    }
    if parts:
        coef = sp.vstack([a for a, _ in parts], format="csc")
        const = np.concatenate([b for _, b in parts]).astype(float)
    else:
        coef = sp.csc_matrix((0, n))
        const = np.zeros(0)
    return coef, const, dims


def _triu_colwise(d):
    """Row/column indices of the upper triangle enumerated column by column."""
    cols = np.concatenate([np.full(j + 1, j) for j in range(d)])
    rows = np.concatenate([np.arange(j + 1) for j in range(d)])
    return rows, cols


# ---------------------------------------------------------------------------
# backends


def _solve_clarabel(program: ConicProgram, opts: SolveOptions) -> SolveReport:
    import clarabel

    n = program.n_vars
    q = program.objective_vector()
    coef, const, dims = _stack(program, "triu_scaled")
    cones = []
    if dims["l"]:
        cones.append(clarabel.NonnegativeConeT(dims["l"]))
    cones += [clarabel.SecondOrderConeT(k) for k in dims["q"]]
    cones += [clarabel.PSDTriangleConeT(d) for d in dims["s"]]
    settings = clarabel.DefaultSettings()
    settings.verbose = opts.verbose
    settings.max_iter = opts.max_iter
    # clarabel's stopping test is on scaled residuals; run it tighter so the
    # unscaled cone margins still meet ``tol``
    inner = max(opts.tol * 1e-2, 1e-12)
    settings.tol_feas = inner
    settings.tol_gap_abs = inner
    settings.tol_gap_rel = inner
    settings.max_threads = 1
    P = sp.csc_matrix((n, n))
    sol = clarabel.DefaultSolver(P, q, (-coef).tocsc(), const, cones, settings).solve()
    status_map = {
        "Solved": "optimal",
        "AlmostSolved": "optimal",
        "PrimalInfeasible": "infeasible",
        "AlmostPrimalInfeasible": "infeasible",
        "DualInfeasible": "unbounded",
        "AlmostDualInfeasible": "unbounded",
        "MaxIterations": "max_iterations",
        "MaxTime": "max_iterations",
    }
    status = status_map.get(str(sol.status), "numerical_failure")
    x = np.asarray(sol.x, dtype=float)
    obj = float(q @ x + program.objective.const[0].real) if status == "optimal" else float("nan")
    return SolveReport(status, obj, x, int(sol.iterations),
                       {"primal_feas": float(sol.r_prim), "dual_feas": float(sol.r_dual),
                        "gap": abs(float(sol.obj_val) - float(sol.obj_val_dual))
                        / max(1.0, abs(float(sol.obj_val)))},
                       "clarabel")


def _solve_cvxopt(program: ConicProgram, opts: SolveOptions) -> SolveReport:
    import cvxopt
    from cvxopt import solvers

    n = program.n_vars
    q = program.objective_vector()
    coef, const, dims = _stack(program, "full")
    if coef.shape[0] == 0:
        # cvxopt needs at least one cone; add a trivial 0 <= 1
        coef = sp.csc_matrix((1, n))
        const = np.ones(1)
        dims = {"l": 1, "q": [], "s": []}
    G = (-coef).tocoo()
    Gc = cvxopt.spmatrix(G.data.tolist(), G.row.tolist(), G.col.tolist(), size=G.shape)
    options = {"show_progress": opts.verbose, "maxiters": opts.max_iter,
               "abstol": opts.tol, "reltol": opts.tol, "feastol": opts.tol}
    res = solvers.conelp(cvxopt.matrix(q), Gc, cvxopt.matrix(const), dims, options=options)
    status = {"optimal": "optimal", "primal infeasible": "infeasible",
              "dual infeasible": "unbounded"}.get(res["status"], "numerical_failure")
    if res["status"] == "unknown" and res.get("iterations", 0) >= opts.max_iter:
        status = "max_iterations"
    x = np.array(res["x"]).ravel() if res["x"] is not None else np.zeros(n)
    obj = float(q @ x + program.objective.const[0].real) if status == "optimal" else float("nan")
    return SolveReport(status, obj, x, int(res.get("iterations", 0)),
                       {"primal_feas": float(res.get("primal infeasibility") or 0.0),
                        "dual_feas": float(res.get("dual infeasibility") or 0.0),
                        "gap": float(res.get("relative gap") or 0.0)},
                       "cvxopt")


BACKENDS = {"clarabel": _solve_clarabel, "cvxopt": _solve_cvxopt}


def solve(program: ConicProgram, options: SolveOptions | None = None, **kw) -> SolveReport:
    """Solve ``program``; keyword arguments override ``options`` fields."""
    opts = options or SolveOptions()
    if kw:
        opts = SolveOptions(**{**opts.__dict__, **kw})
    if opts.backend not in BACKENDS:
        raise ValueError(f"unknown backend {opts.backend!r}")
    if not program.constraints:
        c = program.objective_vector()
        if np.any(c):
            return SolveReport("unbounded", -np.inf, np.zeros(program.n_vars), 0, {}, "trivial")
        return SolveReport("optimal", float(program.objective.const[0].real),
                           np.zeros(program.n_vars), 0,
                           {"primal_feas": 0.0, "dual_feas": 0.0, "gap": 0.0}, "trivial")
    report = _run(opts.backend, program, opts)
    if (report.status in ("numerical_failure", "max_iterations") and opts.fallback
            and opts.fallback != opts.backend):
        if opts.fallback not in BACKENDS:
            raise ValueError(f"unknown backend {opts.fallback!r}")
        log.info("%s: %s from %s, retrying with %s", program.name, report.status,
                 opts.backend, opts.fallback)
        try:
            retry = _run(opts.fallback, program, opts)
        except ImportError:
            return report
        if retry.status != "numerical_failure":
            return retry
    return report


def _run(backend: str, program: ConicProgram, opts: SolveOptions) -> SolveReport:
    try:
        report = BACKENDS[backend](program, opts)
    except (ArithmeticError, ValueError) as exc:
        log.warning("backend %s failed on %s: %s", backend, program.name, exc)
        return SolveReport("numerical_failure", backend=backend,
                           residuals={"error": str(exc)})
    if report.ok:
        worst = verify_solution(program, report.x).worst
        report.residuals["max_violation"] = worst
        if worst > opts.verify_tol:
            log.info("%s: %s point violates a constraint by %.3g", program.name, backend, worst)
            report.status = "numerical_failure"
            report.objective = float("nan")
    return report


# ---------------------------------------------------------------------------
# verification


@dataclass
class VerifyReport:
    violations: list
    worst: float
    passed: bool

    def failing(self, tol: float):
        return [i for i, v in enumerate(self.violations) if v > tol]


def verify_solution(program: ConicProgram, x, tol: float = 1e-7) -> VerifyReport:
    """Per-constraint violation recomputed from the program data.

    Violation is ``max(0, -margin)`` where the margin is the linear slack,
    the SOC margin ``t - ||y||`` or the smallest eigenvalue of a PSD block.
    """
    x = np.asarray(x, dtype=float)
    if x.size != program.n_vars:
        raise ValueError(f"x has {x.size} entries, program has {program.n_vars}")
    viol = []
    for c in program.constraints:
        if c.kind == "nonneg":
            v = np.maximum(0.0, -c.expr.value(x)).max(initial=0.0)
        elif c.kind == "soc":
            v = max(0.0, -c.margin(x))
        else:
            v = max(0.0, -c.margin(x))
        viol.append(float(v))
    worst = max(viol, default=0.0)
    return VerifyReport(viol, worst, worst <= tol)
