"""Command-line experiment runner.

Every command writes plot-ready CSV (or JSON for structured objects) whose
first lines carry the library version and a hash of the resolved config.
Exit codes: 0 success, 1 usage error, 2 a tolerance check failed.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import sys
from contextlib import contextmanager
from typing import Iterable, Sequence

import numpy as np

from . import __version__

EXIT_OK, EXIT_USAGE, EXIT_TOLERANCE = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return str(v)


def config_hash(cfg: dict) -> str:
    blob = json.dumps(cfg, sort_keys=True, default=str, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def _provenance(cfg: dict) -> list[str]:
    lines = [f"# nestprob {__version__} config={config_hash(cfg)}"]
    lines += [f"# {k}={cfg[k]}" for k in sorted(cfg)]
    return lines


@contextmanager
def _sink(path: str | None):
    if path in (None, "-"):
        yield sys.stdout
    else:
        with open(path, "w", newline="") as fh:
            yield fh


def write_csv(path: str | None, cfg: dict, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    with _sink(path) as fh:
        for ln in _provenance(cfg):
            fh.write(ln + "\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([fmt(v) for v in r])


def write_json(path: str | None, cfg: dict, obj: dict) -> None:
    out = {"version": __version__, "config_hash": config_hash(cfg), "config": cfg, **obj}
    with _sink(path) as fh:
        json.dump(out, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    raise TypeError(f"cannot serialize {type(o)}")


def _cfg(args, drop=("func", "out")) -> dict:
    return {k: v for k, v in sorted(vars(args).items()) if k not in drop}


def _load_json(path: str) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except FileNotFoundError:
        raise UsageError(f"file not found: {path}") from None
    except json.JSONDecodeError as e:
        raise UsageError(f"{path} is not valid JSON: {e}") from None


# commands

def cmd_static_insider(args) -> int:
    from .static_games import brute_force_static, discretized_value, insider_value

    if args.R <= 0:
        raise UsageError("--R must be > 0")
    if args.ncells < 100:
        raise UsageError("--ncells must be at least 100")
    sol = insider_value(args.R)
    vd = discretized_value(args.R, args.ncells)
    gap = abs(vd - sol.V)
    header = ["R", "regime", "V_closed", "V_discretized", "a_R", "gap"]
    row = [args.R, sol.regime, sol.V, vd, sol.a_R if sol.a_R is not None else "", gap]
    ok = gap <= args.tol
    if args.brute:
        bf = brute_force_static(args.R, args.brute_cells, args.brute)
        header += ["V_brute", "brute_labels"]
        row += [bf.value, "".join(str(v) for v in bf.labels)]
        ok = ok and bf.value <= sol.V + 5e-3 and abs(bf.value - sol.V) <= 5e-3
    write_csv(args.out, _cfg(args), header, [row])
    return EXIT_OK if ok else EXIT_TOLERANCE


def cmd_nash(args) -> int:
    from .static_games import gaussian_cells, nash_equilibrium, nash_mc, nash_value

    cells = gaussian_cells(args.ncells)
    rows, ok = [], True
    for disc in ("None", "Full"):
        closed = nash_value(args.lam, disc)
        eq, _, _ = nash_equilibrium(args.lam, disc, cells.mean, cells.prob)
        m, se = nash_mc(args.lam, disc, args.samples, args.seed)
        within = abs(m - closed) <= 3 * se
        ok &= within
        rows.append([args.lam, disc, closed, eq, m, se, within])
    write_csv(args.out, _cfg(args), ["lambda", "disclosure", "value_closed", "value_equilibrium", "value_mc",
                                     "stderr", "mc_within_3sigma"], rows)
    return EXIT_OK if ok else EXIT_TOLERANCE


def cmd_braess(args) -> int:
    from .static_games import braess_cost

    rows = [[False, braess_cost(False)], [True, braess_cost(True, args.link_cost)]]
    write_csv(args.out, _cfg(args), ["with_link", "cost"], rows)
    return EXIT_OK


def cmd_nested_w(args) -> int:
    from .measures import NestedMeasure, measure_from_dict
    from .transport import nested_wp, wp

    if args.p not in (1, 2, 3):
        raise UsageError("--p must be 1, 2 or 3")
    a = measure_from_dict(_load_json(args.a))
    b = measure_from_dict(_load_json(args.b))
    if isinstance(a, NestedMeasure) != isinstance(b, NestedMeasure):
        raise UsageError("both inputs must be nested or both plain measures")
    dist, pi = (nested_wp if isinstance(a, NestedMeasure) else wp)(a, b, float(args.p))
    cfg = _cfg(args)
    if args.coupling:
        rows = [[i, j, pi[i, j]] for i in range(pi.shape[0]) for j in range(pi.shape[1]) if pi[i, j] > 0]
        write_csv(args.out, {**cfg, "distance": fmt(dist)}, ["row", "col", "mass"], rows)
    else:
        write_csv(args.out, cfg, ["p", "distance"], [[args.p, dist]])
    return EXIT_OK


def cmd_construct(args) -> int:
    from .conditional import law_of_conditional_law, realize_nested_law
    from .measures import NestedMeasure, canonical_key
    from .transport import nested_wp

    r = NestedMeasure.from_dict(_load_json(args.r))
    real = realize_nested_law(r, level=args.level)
    back = law_of_conditional_law(real.space, real.x, real.partition)
    err, _ = nested_wp(back, real.nested, 2.0)
    obj = {"space": real.space.to_dict(), "x": real.x, "y": real.y, "nested": real.nested.to_dict(),
           "round_trip_w2": err}
    write_json(args.out, _cfg(args), obj)
    return EXIT_OK if err <= 1e-9 else EXIT_TOLERANCE


def _read_labels(path: str) -> list[int]:
    try:
        with open(path) as fh:
            text = fh.read()
    except FileNotFoundError:
        raise UsageError(f"file not found: {path}") from None
    vals = []
    for line in text.splitlines():
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        for tok in line.split(","):
            tok = tok.strip()
            if tok:
                try:
                    vals.append(int(tok))
                except ValueError:
                    if not vals:
                        continue   # header row
                    raise UsageError(f"bad label {tok!r} in {path}") from None
    return vals


def cmd_nested_of(args) -> int:
    from .conditional import FiniteProbSpace, Partition, law_of_conditional_law

    space = FiniteProbSpace.from_dict(_load_json(args.space))
    if args.rv not in space.rvs:
        raise UsageError(f"random variable {args.rv!r} not in {sorted(space.rvs)}")
    labels = _read_labels(args.partition)
    if len(labels) != space.n:
        raise UsageError(f"{len(labels)} labels for {space.n} outcomes")
    r = law_of_conditional_law(space, args.rv, Partition(labels))
    write_json(args.out, _cfg(args), {"nested": r.to_dict()})
    return EXIT_OK


def cmd_dpp(args) -> int:
    from .dynamic_control import parse_config_text, problem_from_config, value_dpp, value_exhaustive

    try:
        with open(args.config) as fh:
            cfg = parse_config_text(fh.read())
        problem = problem_from_config(cfg)
    except FileNotFoundError:
        raise UsageError(f"file not found: {args.config}") from None
    except ValueError as e:
        raise UsageError(str(e)) from None
    ex = value_exhaustive(problem)
    dp = value_dpp(problem)
    gap = abs(ex.value - dp.value)
    obj = {"value_dpp": dp.value, "value_exhaustive": ex.value, "gap": gap,
           "argmax": list(ex.argmax_names(problem)), "dpp_policy": [problem.menu[c].name for c in dp.policy]}
    write_json(args.out, {"file": args.config, **cfg}, obj)
    return EXIT_OK if gap <= 1e-12 else EXIT_TOLERANCE


def cmd_ito_check(args) -> int:
    from .calculus import ITO_CASES, run_ito_case

    if args.case not in ITO_CASES:
        raise UsageError(f"unknown case {args.case!r}; known: {', '.join(sorted(ITO_CASES))}")
    if args.dt <= 0 or args.steps < 1:
        raise UsageError("--dt must be > 0 and --steps >= 1")
    rep = run_ito_case(args.case, args.dt, args.steps)
    rows = [[i, rep.lhs[i], rep.rhs[i], rep.residual[i]] for i in range(len(rep.lhs))]
    write_csv(args.out, _cfg(args), ["step", "lhs", "rhs", "residual"], rows)
    if args.max_residual is not None and rep.max_residual > args.max_residual:
        return EXIT_TOLERANCE
    return EXIT_OK


def cmd_hjb(args) -> int:
    from .hjb_insider import simulate_policy, solve_v

    if args.dx <= 0 or args.T <= 0:
        raise UsageError("--dx and --T must be > 0")
    if args.L < 3:
        raise UsageError("--L must be >= 3")
    dt = args.dt if args.dt is not None else 0.5 * args.dx**2
    if dt > args.dx**2:
        raise UsageError(f"--dt {dt} violates dt <= dx^2 = {args.dx**2}")
    sol = solve_v(args.L, args.dx, dt, args.T, args.save_dt)
    cfg = _cfg(args)
    if args.action == "simulate":
        res = simulate_policy(sol, args.x0, args.paths, args.dt_sim, args.seed)
        write_csv(args.out, cfg, ["x0", "mc_value", "stderr", "pde_value", "tilde_value", "band_entry_fraction",
                                  "z_pde", "gap_gt_3sigma"],
                  [[args.x0, res.mc_value, res.stderr, res.pde_value, res.tilde_value, res.band_entry_fraction,
                    res.z_pde, res.gap_flag]])
        return EXIT_TOLERANCE if res.gap_flag else EXIT_OK
    write_csv(args.out, cfg, ["t", "x", "v", "d2v", "sigma_star"], sol.to_rows())
    return EXIT_OK


def reference_checks():
    """``(name, expected, got, passed)`` for every check tied to a printed value."""
    from .conditional import FiniteProbSpace, Partition, PartitionFiltration, h_check, h_star_check, prop_equiv_check
    from .hjb_insider import solve_v, tilde_v
    from .static_games import (
        I_func, braess_cost, discretized_value, gaussian_cells, insider_value, nash_value, r0, u_of_partition,
    )

    out = []

    def add(name, expected, got, ok):
        out.append((name, expected, got, bool(ok)))

    add("R0 = sqrt(2/pi)", 0.7978845608028654, r0(), abs(r0() - 0.7978845608028654) < 1e-15)
    v1 = insider_value(1.0).V
    add("V(R=1) closed form", math.sqrt(2 / math.pi) - 1 / math.pi + 0.5, v1,
        abs(v1 - (math.sqrt(2 / math.pi) - 1 / math.pi + 0.5)) <= 1e-12)
    v5 = insider_value(0.5)
    add("V(R=0.5) closed form", 0.625, v5.V, abs(v5.V - 0.625) <= 1e-12 and v5.regime == "BelowR0")
    add("I strictly decreasing", "I(0.5) > I(1)", I_func(0.5) - I_func(1.0), I_func(0.5) > I_func(1.0))
    c = gaussian_cells(1000)
    us = u_of_partition(c, (c.mean > 0).astype(int), 1.0)
    add("u(sign split, R=1), N=1000", v1, us, abs(us - v1) <= 2e-3)
    ud = discretized_value(0.5, 1000)
    add("u(camouflage, R=0.5), N=1000", 0.625, ud, abs(ud - 0.625) <= 2e-3)
    add("Nash value, lambda=1, no disclosure", 0.25, nash_value(1.0, "None"), abs(nash_value(1.0, "None") - 0.25) <= 1e-12)
    add("Nash value, lambda=0.5, full disclosure", 0.5, nash_value(0.5, "Full"),
        abs(nash_value(0.5, "Full") - 0.5) <= 1e-12)
    add("Braess cost without link", 1.5, braess_cost(False), braess_cost(False) == 1.5)
    add("Braess cost with link", 2.0, braess_cost(True), braess_cost(True) == 2.0)

    p = np.full(4, 0.25)
    x1, x2 = np.array([0, 0, 1, 1.0]), np.array([0, 1, 0, 1.0])
    space = FiniteProbSpace(p, {"X": x1, "Y": x2})
    verdict = prop_equiv_check(space, "X", Partition.trivial(4), Partition.generated_by(x2))
    add("independent pair: equal nested laws, distinct partitions", "NotSubSigmaOfX", verdict.status,
        verdict.status == "NotSubSigmaOfX" and verdict.nested_equal and not verdict.partitions_equal)
    T = Partition.trivial(4)
    filt = PartitionFiltration((T, T, Partition.generated_by(x1 == x2)),
                               (Partition.generated_by(x1), Partition.generated_by(x2)))
    hs, hh = h_star_check(filt), h_check(filt, [T, Partition.generated_by(x1), Partition.finest(4)], p)
    add("Bernoulli filtration: (H*) fails, (H) holds", "False/True", f"{hs}/{hh}", (not hs) and hh)

    add("closed form at (0.5, 2)", -0.5, float(tilde_v(0.5, 2.0)), float(tilde_v(0.5, 2.0)) == -0.5)
    sol = solve_v(4.0, 0.01, None, 1.0)
    vn = float(sol.value(0.5, 2.0))
    add("PDE value at (0.5, 2)", -0.5, vn, abs(vn + 0.5) <= 1e-2)
    v00 = float(sol.value(0.0, 0.0))
    add("PDE value at (0, 0) beats never observing", "> -0.99", v00, v00 > -1 + 0.01)
    return out


def cmd_paper_suite(args) -> int:
    rows = reference_checks()
    write_csv(args.out, _cfg(args), ["check", "expected", "got", "pass"], rows)
    return EXIT_OK if all(r[3] for r in rows) else EXIT_TOLERANCE


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="nestprob", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"nestprob {__version__}")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    def add(name, func, help_):
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("--out", default=None, help="output file (default stdout)")
        sp.set_defaults(func=func)
        return sp

    s = add("static-insider", cmd_static_insider, "closed-form and discretized static insider value")
    s.add_argument("--R", type=float, required=True)
    s.add_argument("--ncells", type=int, default=1000)
    s.add_argument("--brute", type=int, default=0, metavar="K", help="also search partitions with at most K atoms")
    s.add_argument("--brute-cells", type=int, default=12)
    s.add_argument("--tol", type=float, default=2e-3)

    s = add("nash", cmd_nash, "asymmetric-information Nash game values")
    s.add_argument("--lambda", dest="lam", type=float, default=0.5)
    s.add_argument("--samples", type=int, default=10**6)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--ncells", type=int, default=2000)

    s = add("braess", cmd_braess, "Wardrop equilibrium cost with and without the extra link")
    s.add_argument("--link-cost", type=float, default=0.0)

    s = add("nested-w", cmd_nested_w, "Wasserstein distance between two measures in JSON")
    s.add_argument("a")
    s.add_argument("b")
    s.add_argument("--p", type=int, default=2)
    s.add_argument("--coupling", action="store_true", help="print the optimal coupling instead")

    s = add("construct", cmd_construct, "realize a nested measure as (X, Y) on a finite space")
    s.add_argument("r")
    s.add_argument("--level", type=int, default=None, help="dyadic projection level (inner supports in [0,1))")

    s = add("nested-of", cmd_nested_of, "law of the conditional law on a finite space")
    s.add_argument("space")
    s.add_argument("--partition", required=True, help="file with one integer label per outcome")
    s.add_argument("--rv", default="X")

    s = add("dpp", cmd_dpp, "exhaustive and backward-induction values of a control problem")
    s.add_argument("--config", required=True)

    s = add("ito-check", cmd_ito_check, "Ito formula residuals on an exact tree")
    s.add_argument("--case", default="quadratic-mean")
    s.add_argument("--dt", type=float, default=0.0625)
    s.add_argument("--steps", type=int, default=3)
    s.add_argument("--max-residual", type=float, default=None)

    s = add("hjb", cmd_hjb, "solve the insider HJB equation, or simulate its policy")
    s.add_argument("action", nargs="?", choices=["solve", "simulate"], default="solve")
    s.add_argument("--T", type=float, default=1.0)
    s.add_argument("--dx", type=float, default=0.01)
    s.add_argument("--dt", type=float, default=None)
    s.add_argument("--L", type=float, default=4.0)
    s.add_argument("--save-dt", type=float, default=1e-3)
    s.add_argument("--x0", type=float, default=0.0)
    s.add_argument("--paths", type=int, default=100_000)
    s.add_argument("--seed", type=int, default=7)
    s.add_argument("--dt-sim", type=float, default=5e-4)

    add("paper-suite", cmd_paper_suite, "run the checks tied to printed values")
    return p


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as e:
        print(str(e), file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as e:   # --help / --version
        return int(e.code or 0)


if __name__ == "__main__":
    sys.exit(main())
