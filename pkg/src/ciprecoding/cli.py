"""Command-line batch runner producing CSV tables.

Exit codes: 0 success, 2 configuration error, 3 solver numerical failure
(unless ``--tolerate-failures``).
"""

from __future__ import annotations

import argparse
import csv
import datetime
import io
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import analysis
from .experiments import (ALL_SCHEMES, check_schemes, config_hash, make_instance,
                          run_grid, solve_kind, symbol_draw)
from .montecarlo import estimate_outage, silent_bs_audit
from .scenario import ConfigError, Scenario, load_scenario
from .solver import SolveOptions

log = logging.getLogger("ciprecoding")

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER = 0, 2, 3
AXES = {"gamma_db": "sinr_targets_db", "sigma_e": "csi_error_std", "k_users": "k_users"}


class UsageError(Exception):
    pass


# ---------------------------------------------------------------------------
# helpers


def parse_grid(text: str) -> list:
    """``a:b:step`` (inclusive), ``a:b`` (step 1) or a comma list."""
    try:
        if ":" in text:
            parts = [float(p) for p in text.split(":")]
            if len(parts) not in (2, 3):
                raise ValueError
            lo, hi = parts[0], parts[1]
            step = parts[2] if len(parts) == 3 else 1.0
            if step <= 0 or hi < lo:
                raise ValueError
            count = int(np.floor((hi - lo) / step + 1e-9)) + 1
            vals = [lo + i * step for i in range(count)]
        else:
            vals = [float(p) for p in text.split(",") if p.strip()]
    except ValueError:
        raise UsageError(f"bad grid {text!r}; use a:b:step or a comma list") from None
    if not vals:
        raise UsageError("empty grid")
    return [int(v) if float(v).is_integer() else v for v in vals]


def _scalar_text(v) -> str:
    if np.ndim(v):
        return ";".join(repr(float(x)) for x in v)
    return repr(float(v))


def load_config(path: str | None, overrides) -> Scenario:
    raw = {}
    if path:
        try:
            with open(path) as fh:
                text = fh.read()
        except OSError as exc:
            raise ConfigError("--scenario", f"cannot read {path}: {exc.strerror}") from exc
        raw = json.loads(load_scenario(text).to_json())
    for item in overrides or []:
        key, sep, val = item.partition("=")
        if not sep:
            raise ConfigError(item, "overrides take the form key=value")
        try:
            raw[key] = json.loads(val)
        except json.JSONDecodeError:
            raw[key] = val
    return load_scenario(json.dumps(raw))


def _options(args) -> SolveOptions:
    return SolveOptions(tol=args.tol, max_iter=args.max_iter)


def result_columns(n_bs: int, n_users: int = 0) -> list:
    cols = ["scheme", "channel_seed", "symbol_draw", "gamma_target_db", "sigma_e", "status",
            "total_power_w"]
    cols += [f"power_bs_{j + 1}" for j in range(n_bs)]
    cols += ["relaxation_gap", "solve_iterations"]
    cols += [f"satisfaction_user_{u + 1}" for u in range(n_users)]
    return cols + ["config_hash"]


def solution_row(s: Scenario, kind, seed, draw, sol, satisfaction=None) -> list:
    per_bs = sol.per_bs_power_w if sol.per_bs_power_w is not None else [float("nan")] * s.n_bs
    row = [kind, seed, draw, _scalar_text(s.sinr_targets_db), _scalar_text(s.csi_error_std),
           sol.status, repr(float(sol.total_power_w))]
    row += [repr(float(p)) for p in per_bs]
    row += [repr(float(sol.relaxation_gap)), int(sol.iterations)]
    if satisfaction is not None:
        row += [repr(float(v)) for v in satisfaction]
    return row + [config_hash(s)]


def write_table(path, columns, rows, header: bool):
    out = io.StringIO()
    if header:
        stamp = datetime.datetime.now(datetime.timezone.utc).isoformat(timespec="seconds")
        out.write(f"# generated {stamp}\n")
    wr = csv.writer(out, lineterminator="\n")
    wr.writerow(columns)
    wr.writerows(rows)
    text = out.getvalue()
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(path, "w", newline="") as fh:
            fh.write(text)


# ---------------------------------------------------------------------------
# commands


def cmd_gen_scenario(args):
    s = load_config(args.scenario, args.set)
    text = s.to_json() + "\n"
    if args.out in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(args.out, "w") as fh:
            fh.write(text)
    return []


def cmd_solve(args):
    s = load_config(args.scenario, args.set)
    inst = make_instance(s, args.seed)
    sym = symbol_draw(s, args.seed, args.draw)
    rows = []
    for kind in check_schemes(args.schemes):
        sol = solve_kind(kind, inst, sym, options=_options(args))
        rows.append(solution_row(s, kind, args.seed, args.draw, sol))
        if sol.status == "infeasible":
            log.warning("%s: infeasible", kind)
    write_table(args.out, result_columns(s.n_bs), rows, not args.no_header)
    return [r[5] for r in rows]


def _sweep_point(task):
    s_json, schemes, seed, n_draws, tol, max_iter = task
    s = load_scenario(s_json)
    opts = SolveOptions(tol=tol, max_iter=max_iter)
    return [solution_row(s, k, sd, d, sol)
            for k, sd, d, sol in run_grid(s, schemes, [seed], n_draws, opts)]


def cmd_sweep(args):
    base = load_config(args.scenario, args.set)
    schemes = check_schemes(args.schemes)
    field = AXES[args.axis]
    tasks = []
    for v in parse_grid(args.grid):
        if field == "k_users":
            if not float(v).is_integer() or v < 0:
                raise ConfigError("k_users", "grid values must be nonnegative integers")
            v = int(v)
        s = base.with_(**{field: v})
        s.validate()
        tasks += [(s.to_json(), schemes, seed, args.draws, args.tol, args.max_iter)
                  for seed in range(args.seeds)]
    if args.workers > 1:
        with ProcessPoolExecutor(args.workers) as pool:
            chunks = list(pool.map(_sweep_point, tasks))
    else:
        chunks = [_sweep_point(t) for t in tasks]
    rows = [r for chunk in chunks for r in chunk]
    write_table(args.out, result_columns(base.n_bs), rows, not args.no_header)
    return [r[5] for r in rows]


def cmd_montecarlo(args):
    s = load_config(args.scenario, args.set)
    inst = make_instance(s, args.seed)
    sym = symbol_draw(s, args.seed, args.draw)
    rows, dumps = [], []
    for kind in check_schemes(args.schemes):
        sol = solve_kind(kind, inst, sym, options=_options(args))
        sat = [float("nan")] * s.n_users
        if sol.w is not None:
            rep = estimate_outage(s, inst.csi, sol, n_trials=args.trials, seed=args.seed,
                                  symbols=sym)
            sat = rep.per_user_satisfaction
            dumps.append(rep.to_csv())
        rows.append(solution_row(s, kind, args.seed, args.draw, sol, sat))
    write_table(args.out, result_columns(s.n_bs, s.n_users), rows, not args.no_header)
    if args.samples_out:
        with open(args.samples_out, "w") as fh:
            for i, d in enumerate(dumps):
                fh.write(d if i == 0 else d.split("\n", 1)[1])
    return [r[5] for r in rows]


def cmd_audit(args):
    s = load_config(args.scenario, args.set)
    if min(s.users_per_cell) > 0:
        raise ConfigError("k_users", "the audit needs at least one empty cell")
    table = silent_bs_audit(s, check_schemes(args.schemes), seed=args.seed, draw=args.draw,
                            options=_options(args))
    cols = ["scheme", "channel_seed", "status"] + [f"power_bs_{j + 1}" for j in range(s.n_bs)]
    rows = []
    for kind, res in table.items():
        pw = res["per_bs_power_w"]
        pw = [float("nan")] * s.n_bs if pw is None else pw
        rows.append([kind, args.seed, res["status"]] + [repr(float(p)) for p in pw])
    write_table(args.out, cols + ["config_hash"], [r + [config_hash(s)] for r in rows],
                not args.no_header)
    return [r[2] for r in rows]


def cmd_overhead(args):
    ns = [int(v) for v in parse_grid(args.n)]
    kinds = ("full_prob", "full_det", "partial_prob", "partial_det", "stat", "comp",
             "cbf_prob", "cbf_det")
    rows = []
    for n in ns:
        m = analysis.OverheadModel(n=n, k=args.k, m=args.m, chi_c=args.chi_c, chi_s=args.chi_s)
        for kind in kinds:
            rows.append([kind, n, args.k, args.chi_c, args.chi_s,
                         analysis.coordination_overhead(kind, m)])
    write_table(args.out, ["scheme", "n_bs", "k_users", "chi_c", "chi_s", "overhead_bits"],
                rows, not args.no_header)
    return []


def cmd_report(args):
    """Mean power per scheme and grid point over the instances all schemes solved."""
    try:
        with open(args.input) as fh:
            lines = [ln for ln in fh if not ln.startswith("#")]
    except OSError as exc:
        raise ConfigError("--input", f"cannot read {args.input}: {exc.strerror}") from exc
    rd = list(csv.DictReader(lines))
    if not rd:
        raise ConfigError("--input", "no result rows")
    groups = {}
    for r in rd:
        key = (r["gamma_target_db"], r["sigma_e"], r["config_hash"])
        inst = (r["channel_seed"], r["symbol_draw"])
        p = float(r["total_power_w"]) if r["status"] == "optimal" else float("nan")
        groups.setdefault(key, {}).setdefault(r["scheme"], {})[inst] = p
    rows = []
    for key, by_scheme in groups.items():
        insts = sorted(set.intersection(*(set(v) for v in by_scheme.values())))
        powers = {k: [v[i] for i in insts] for k, v in by_scheme.items()}
        means, n_ok = analysis.common_support_means(powers)
        for kind in by_scheme:
            feas = float(np.mean(~np.isnan(powers[kind]))) if insts else float("nan")
            rows.append([kind, key[0], key[1], repr(means[kind]), n_ok, repr(feas), key[2]])
    write_table(args.out, ["scheme", "gamma_target_db", "sigma_e", "mean_power_w",
                           "n_common", "feasibility", "config_hash"], rows,
                not args.no_header)
    return []


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ciprecoding",
                                 description="Multi-cell constructive-interference precoding "
                                             "experiments.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, scenario=True, solver=True):
        if scenario:
            p.add_argument("--scenario", help="JSON scenario file (defaults if omitted)")
            p.add_argument("--set", action="append", metavar="KEY=VALUE",
                           help="override a scenario field (JSON value)")
        if solver:
            p.add_argument("--tol", type=float, default=1e-7)
            p.add_argument("--max-iter", type=int, default=200)
        p.add_argument("--out", default="-", help="output file ('-' for stdout)")
        p.add_argument("--no-header", action="store_true",
                       help="omit the timestamp header line")
        p.add_argument("--tolerate-failures", action="store_true",
                       help="exit 0 even if a solve ends in numerical failure")

    p = sub.add_parser("gen-scenario", help="write a scenario JSON")
    common(p, solver=False)
    p.set_defaults(func=cmd_gen_scenario)

    p = sub.add_parser("solve", help="solve one channel seed and symbol draw")
    common(p)
    p.add_argument("--schemes", nargs="+", default=list(ALL_SCHEMES))
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--draw", type=int, default=0)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("sweep", help="power versus a scenario parameter")
    common(p)
    p.add_argument("--axis", choices=sorted(AXES), required=True)
    p.add_argument("--grid", required=True, help="a:b:step or comma list")
    p.add_argument("--schemes", nargs="+", default=list(ALL_SCHEMES))
    p.add_argument("--seeds", type=int, default=1)
    p.add_argument("--draws", type=int, default=1)
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("montecarlo", help="empirical SINR satisfaction under CSI errors")
    common(p)
    p.add_argument("--schemes", nargs="+", default=list(ALL_SCHEMES))
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--draw", type=int, default=0)
    p.add_argument("--trials", type=int, default=2000)
    p.add_argument("--samples-out", help="CSV dump of every SINR sample")
    p.set_defaults(func=cmd_montecarlo)

    p = sub.add_parser("audit-silent-bs", help="per-BS power with an empty cell")
    common(p)
    p.add_argument("--schemes", nargs="+", default=["partial_det", "stat", "full_det"])
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--draw", type=int, default=0)
    p.set_defaults(func=cmd_audit)

    p = sub.add_parser("overhead", help="backhaul bits per scheme")
    common(p, scenario=False, solver=False)
    p.add_argument("--n", default="2:5", help="BS counts, a:b or comma list")
    p.add_argument("--k", type=int, default=3)
    p.add_argument("--m", type=int, default=4)
    p.add_argument("--chi-c", type=int, default=10)
    p.add_argument("--chi-s", type=int, default=140)
    p.set_defaults(func=cmd_overhead)

    p = sub.add_parser("report", help="aggregate a sweep table")
    common(p, scenario=False, solver=False)
    p.add_argument("--input", required=True)
    p.set_defaults(func=cmd_report)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        statuses = args.func(args)
    except (ConfigError, UsageError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ValueError as exc:
        # unknown scheme names and invalid derived parameters
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    failed = sum(st == "numerical_failure" for st in statuses)
    if failed and not args.tolerate_failures:
        print(f"error: {failed} solve(s) ended in numerical failure", file=sys.stderr)
        return EXIT_SOLVER
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
