"""Command line entry point: ``msdp <subcommand> ...``.

Exit codes: 0 success, 1 a verification failed, 2 usage error.
"""
from __future__ import annotations

import argparse
import hashlib
import io
import json
import math
import os
import sys
from dataclasses import asdict, dataclass
from typing import List, Optional, Sequence

from . import __version__
from .common import TWO_PI
from .dual import DualProblem, solve_dual_ode
from .errors import MSDPError
from .line_mech import laplace_density, line_summary, median_condition, optimal_offsets_closed
from .mechanism import (MechanismConfig, certified_cost, line_mechanism, ring_geo_mechanism,
                        ring_local_mechanism)
from .mhr import SurvivalFn, mhr_bound_check
from .oracle import SearchBudget, brute_force_offsets, mc_cost
from .protocol import simulate
from .ring_mech import geo_ring_laplace_cost_k2, geo_ring_optimize_k2, local_ring_mechanism

DENSITY_POINTS = 1024
FIGURES = ("intro1", "intro3", "dual40", "dual46")


class UsageError(Exception):
    pass


class VerificationFailed(Exception):
    pass


@dataclass
class RunManifest:
    command: List[str]
    seed: int
    tool_version: str
    outputs: List[dict]

    def dumps(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True) + "\n"


def sha256_file(path: str) -> str:
    with open(path, "rb") as f:
        return hashlib.sha256(f.read()).hexdigest()


def replay_manifest(path: str) -> bool:
    """Re-run the command recorded in a manifest and compare output hashes."""
    with open(path) as f:
        m = json.load(f)
    argv = [a for a in m["command"]]
    if "--manifest" in argv:
        i = argv.index("--manifest")
        del argv[i:i + 2]
    if run(argv) != 0:
        return False
    return all(sha256_file(o["path"]) == o["sha256"] for o in m["outputs"])


# -- output helpers ----------------------------------------------------------------

def _fmt(x: float) -> str:
    return repr(float(x))


def _write_text(path: str, text: str, outputs: List[str]) -> None:
    if path == "-":
        sys.stdout.write(text)
        return
    with open(path, "w", newline="\n") as f:
        f.write(text)
    outputs.append(path)


def _write_json(path: str, obj, outputs: List[str]) -> None:
    _write_text(path, json.dumps(obj, indent=2, sort_keys=True, allow_nan=False) + "\n", outputs)


def _csv(header: Sequence[str], rows) -> str:
    buf = io.StringIO()
    buf.write(",".join(header) + "\n")
    for row in rows:
        buf.write(",".join(_fmt(v) if isinstance(v, float) else str(v) for v in row) + "\n")
    return buf.getvalue()


def _density_rows(d, lo: float, hi: float, n: int = DENSITY_POINTS):
    xs, ys = d.grid(n, lo, hi)
    return [(float(x), float(y)) for x, y in zip(xs, ys)]


def _sibling(path: str, suffix: str) -> str:
    root, _ = os.path.splitext(path)
    return root + suffix


# -- subcommands ---------------------------------------------------------------------

def cmd_line(args, outputs):
    res = line_summary(args.eps, args.k, args.h, args.method)
    _write_json(args.out, res, outputs)
    return 0


def cmd_ring_local(args, outputs):
    mech, cost = local_ring_mechanism(args.eps, args.k)
    res = {"eps": mech.eps, "k": mech.k, "beta": mech.beta, "cell": mech.cell, "cost": cost,
           "offsets": list(mech.offsets), "density": mech.density.to_json()}
    _write_json(args.out, res, outputs)
    if args.out != "-":
        _write_text(_sibling(args.out, ".csv"), _csv(("x", "rho"), _density_rows(mech.density, 0.0, TWO_PI)), outputs)
    return 0


def cmd_ring_geo(args, outputs):
    t_star, cost, d, offsets = geo_ring_optimize_k2(args.eps, args.grid)
    res = {"eps": args.eps, "k": 2, "t_star": t_star, "cost": cost,
           "laplace_cost": geo_ring_laplace_cost_k2(args.eps),
           "offsets": list(offsets), "density": d.to_json()}
    _write_json(args.out, res, outputs)
    if args.out != "-":
        _write_text(_sibling(args.out, ".csv"), _csv(("x", "rho"), _density_rows(d, 0.0, TWO_PI)), outputs)
    return 0


def cmd_mhr(args, outputs):
    f = SurvivalFn.exponential(args.eps) if args.dist == "exp" else SurvivalFn.halfnormal(args.eps)
    Ks = [1]
    while Ks[-1] * 2 <= args.kmax:
        Ks.append(Ks[-1] * 2)
    rows = mhr_bound_check(f, Ks, raise_on_violation=False)
    _write_text(args.out, _csv(("K", "phi", "bound", "ratio"), [(r.K, r.phi, r.bound, r.ratio) for r in rows]), outputs)
    return 0 if all(r.phi <= r.bound for r in rows) else 1


def _parse_v(text: str) -> tuple:
    try:
        return tuple(float(x) for x in text.split(","))
    except ValueError:
        raise UsageError(f"--v must be comma-separated numbers, got {text!r}") from None


def _dual_trace(eps, zeta, lam, v, r_max, step):
    p = DualProblem(eps, zeta, lam, v)
    if r_max is None:
        r_max = max(abs(x) for x in v) + 25.0 / eps
    return solve_dual_ode(p, r_max, step)


def _trace_csv(tr, every: int) -> str:
    n = len(tr.r_grid)
    idx = list(range(0, n, every))
    if idx[-1] != n - 1:
        idx.append(n - 1)
    return _csv(("r", "nu"), [(tr.r_grid[i], tr.nu[i]) for i in idx])


def cmd_dual(args, outputs):
    tr = _dual_trace(args.eps, args.zeta, args.lam, _parse_v(args.v), args.r_max, args.step)
    _write_text(args.out, _trace_csv(tr, args.every), outputs)
    summary = {"tail_class": tr.tail_class, "right": tr.right_class, "left": tr.left_class,
               "nonneg_from": tr.nonneg_from, "nonpos_until": tr.nonpos_until, "nu_end": tr.nu[-1]}
    sys.stderr.write(json.dumps(summary, sort_keys=True) + "\n")
    return 0


def _build(target: str, eps: float, k: int) -> MechanismConfig:
    if target == "line":
        return line_mechanism(eps, k)
    if target == "ring-local":
        return ring_local_mechanism(eps, k)
    if target == "ring-geo":
        if k != 2:
            raise UsageError("ring-geo supports k=2 only")
        return ring_geo_mechanism(eps)
    raise UsageError(f"unknown target {target!r}")


def _parse_budget(text: Optional[str], seed: int) -> SearchBudget:
    if not text:
        return SearchBudget(seed=seed)
    try:
        g, r, s = (int(x) for x in text.split(","))
    except ValueError:
        raise UsageError(f"--budget must be GRID,ITERS,RESTARTS, got {text!r}") from None
    return SearchBudget(g, r, s, seed)


def cmd_verify(args, outputs):
    mech = _build(args.target, args.eps, args.k)
    budget = _parse_budget(args.budget, args.seed)
    certified = certified_cost(mech)
    checks = {}
    exact = mech.exact_cost()
    checks["exact_matches_certified"] = abs(exact - certified) <= 1e-9
    priv = mech.privacy()
    checks["privacy"] = priv.satisfied
    _, found = brute_force_offsets(mech.noise, mech.k, mech.h, budget, candidates=[list(mech.offsets)])
    checks["oracle_no_improvement"] = found >= certified - 1e-6
    est = mc_cost(mech, args.n, args.seed, threads=args.threads)
    checks["monte_carlo"] = est.agrees(certified)
    if args.target == "line":
        checks["median_condition"] = median_condition(mech.noise, mech.offsets).max_abs_residual <= 1e-12
    report = {"target": args.target, "eps": args.eps, "k": args.k, "certified_cost": certified,
              "exact_cost": exact, "oracle_cost": found, "privacy_worst_ratio_log": priv.worst_ratio_log,
              "mc_mean": est.mean, "mc_stderr": est.stderr, "mc_n": est.n,
              "checks": checks, "ok": all(checks.values())}
    _write_json(args.out, report, outputs)
    return 0 if report["ok"] else 1


def cmd_simulate(args, outputs):
    mech = _build(args.mech, args.eps, args.k)
    if args.log:
        with open(args.log, "w", newline="\n") as f:
            res = simulate(mech, args.n, args.seed, f)
        outputs.append(args.log)
    else:
        res = simulate(mech, args.n, args.seed)
    exact = certified_cost(mech)
    summary = {"mech": args.mech, "eps": args.eps, "k": args.k, "n": res.n, "mean": res.mean,
               "stderr": res.stderr, "exact_cost": exact,
               "within_4_stderr": abs(res.mean - exact) <= 4.0 * res.stderr}
    _write_json(args.out, summary, outputs)
    return 0


def cmd_repro(args, outputs):
    fig = args.figure
    if fig == "intro1":
        d = laplace_density(1.0)
        offs = optimal_offsets_closed(1.0, 7)
        rows = [(x, y, 0) for x, y in _density_rows(d, -6.0, 6.0)]
        rows += [(float(a), float(d.pdf(a)), 1) for a in offs]
        text = _csv(("x", "rho", "offset"), rows)
    elif fig == "intro3":
        _, _, d, offs = geo_ring_optimize_k2(3.0 / 8.0, 512)
        # shown on [-pi, pi) as in the usual ring picture
        rows = []
        for x, y in _density_rows(d, 0.0, TWO_PI):
            rows.append((x - TWO_PI if x >= math.pi else x, y, 0))
        rows.sort()
        rows += [((a - TWO_PI if a >= math.pi else a), float(d.pdf(a)), 1) for a in offs]
        text = _csv(("x", "rho", "offset"), rows)
    else:
        lam = 0.40 if fig == "dual40" else 0.46
        tr = _dual_trace(1.0, 0.1, lam, (-math.log(4.0), 0.0, math.log(4.0)), None, 1e-3)
        text = _trace_csv(tr, args.every)
    _write_text(args.out, text, outputs)
    return 0


# -- parser --------------------------------------------------------------------------

def _pos_int(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be at least 1, got {v}")
    return v


def _pos_float(text: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number, got {text!r}") from None
    if not (v > 0 and math.isfinite(v)):
        raise argparse.ArgumentTypeError(f"must be positive, got {text}")
    return v


def _default_seed() -> int:
    raw = os.environ.get("MSDP_SEED", "0")
    try:
        return int(raw)
    except ValueError:
        return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=_default_seed(), help="RNG seed (default: $MSDP_SEED or 0)")
    common.add_argument("--threads", type=_pos_int, default=1, help="worker cap for parallel sections")
    common.add_argument("--manifest", default=None, help="write a run manifest with output hashes")

    p = argparse.ArgumentParser(prog="msdp", description="Multi-selection privacy mechanisms.")
    p.add_argument("--version", action="version", version=f"msdp {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("line", parents=[common], help="optimal offsets under Laplace noise")
    s.add_argument("--eps", type=_pos_float, default=1.0)
    s.add_argument("--k", type=_pos_int, required=True)
    s.add_argument("--h", choices=("identity", "sqrt", "square"), default="identity")
    s.add_argument("--method", choices=("closed", "recurrence"), default=None,
                   help="default: closed for identity h, recurrence otherwise")
    s.add_argument("--out", default="-")
    s.set_defaults(func=cmd_line)

    s = sub.add_parser("ring-local", parents=[common], help="local-DP ring mechanism")
    s.add_argument("--eps", type=_pos_float, default=1.0)
    s.add_argument("--k", type=_pos_int, required=True)
    s.add_argument("--out", default="-")
    s.set_defaults(func=cmd_ring_local)

    s = sub.add_parser("ring-geo", parents=[common], help="geographic-DP ring mechanism, k=2")
    s.add_argument("--eps", type=_pos_float, default=3.0 / 8.0)
    s.add_argument("--grid", type=_pos_int, default=512)
    s.add_argument("--out", default="-")
    s.set_defaults(func=cmd_ring_geo)

    s = sub.add_parser("mhr", parents=[common], help="quantile placement cost table")
    s.add_argument("--dist", choices=("exp", "halfnormal"), default="exp")
    s.add_argument("--eps", type=_pos_float, default=1.0)
    s.add_argument("--kmax", type=_pos_int, default=64)
    s.add_argument("--out", default="-")
    s.set_defaults(func=cmd_mhr)

    s = sub.add_parser("dual", parents=[common], help="integrate the dual ODE")
    s.add_argument("--eps", type=_pos_float, default=1.0)
    s.add_argument("--zeta", type=_pos_float, default=0.1)
    s.add_argument("--lambda", dest="lam", type=_pos_float, required=True)
    s.add_argument("--v", required=True,
                   help="comma-separated entries; write --v=-1.386,0,1.386 when the first is negative")
    s.add_argument("--r-max", dest="r_max", type=_pos_float, default=None,
                   help="default: max|v| + 25/eps")
    s.add_argument("--step", type=_pos_float, default=1e-3)
    s.add_argument("--every", type=_pos_int, default=10, help="keep every N-th sample")
    s.add_argument("--out", default="-")
    s.set_defaults(func=cmd_dual)

    s = sub.add_parser("verify", parents=[common], help="certify a shipped mechanism")
    s.add_argument("--target", choices=("line", "ring-local", "ring-geo"), required=True)
    s.add_argument("--eps", type=_pos_float, default=1.0)
    s.add_argument("--k", type=_pos_int, default=3)
    s.add_argument("--budget", default=None, help="GRID,ITERS,RESTARTS for the offset search")
    s.add_argument("--n", type=_pos_int, default=200_000, help="Monte Carlo draws")
    s.add_argument("--out", default="-")
    s.set_defaults(func=cmd_verify)

    s = sub.add_parser("simulate", parents=[common], help="end-to-end client/server sessions")
    s.add_argument("--mech", choices=("line", "ring-local", "ring-geo"), default="line")
    s.add_argument("--eps", type=_pos_float, default=1.0)
    s.add_argument("--k", type=_pos_int, default=3)
    s.add_argument("--n", type=_pos_int, default=10_000)
    s.add_argument("--log", default=None, help="NDJSON session log")
    s.add_argument("--out", default="-")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("repro", parents=[common], help="regenerate figure data")
    s.add_argument("--figure", choices=FIGURES, required=True)
    s.add_argument("--every", type=_pos_int, default=10)
    s.add_argument("--out", default="-")
    s.set_defaults(func=cmd_repro)
    return p


def run(argv: Optional[Sequence[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    if getattr(args, "method", "x") is None:
        args.method = "closed" if args.h == "identity" else "recurrence"
    outputs: List[str] = []
    try:
        code = args.func(args, outputs)
    except (UsageError, MSDPError, ValueError) as e:
        sys.stderr.write(f"msdp {args.command}: error: {e}\n")
        return 2
    except VerificationFailed as e:
        sys.stderr.write(f"msdp {args.command}: verification failed: {e}\n")
        return 1
    if args.manifest:
        m = RunManifest(argv, args.seed, __version__,
                        [{"path": p, "sha256": sha256_file(p)} for p in outputs])
        with open(args.manifest, "w") as f:
            f.write(m.dumps())
    return code


def main() -> None:
    sys.exit(run())
