"""Command-line entry point: ``fockconvert {plan,curve,tradeoff,simulate,emulate}``.

Option values are taken from flags first, then from an optional JSON file
given with --config (keys are the long option names with '_' for '-'),
then from built-in defaults.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from typing import Any, Dict, Optional

from . import coincidence as lab
from .fock import ClickPair, DetectorModel, DomainError, IdealPNR, InefficientPNR
from .montecarlo import dump_trajectories, estimate_success, trajectories
from .planner import Policy, build_policy, evaluate_policy, pmax_table
from .streams import fresh_seed
from .tradeoff import InfeasibleTarget, curve_to_csv, optimize_feedforward, tradeoff_curve

EXIT_OK, EXIT_USAGE, EXIT_INFEASIBLE, EXIT_NUMERIC = 0, 2, 3, 4

DEFAULTS: Dict[str, Dict[str, Any]] = {
    "plan": {"format": "text"},
    "curve": {"format": "csv"},
    "tradeoff": {"eta": 0.85, "eta_o": 0.95, "points": 21, "format": "csv"},
    "simulate": {"detector": "ideal", "eta": 1.0, "eta_o": 1.0, "trials": 1_000_000},
    "emulate": {
        "source": "coherent",
        "mu": lab.DEFAULT_MU,
        "t1": 2.0 / 3.0,
        "loss_aux1": 1.0,
        "loss_aux2": 1.0,
        "loss_out": 1.0,
        "eta": 1.0,
        "pulses": 1_000_000,
    },
}


class UsageError(Exception):
    pass


def sig6(x):
    """Round floats (recursively) to 6 significant digits for printing."""
    if isinstance(x, float):
        return float(f"{x:.6g}")
    if isinstance(x, dict):
        return {k: sig6(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [sig6(v) for v in x]
    return x


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fockconvert", description=__doc__.splitlines()[0])
    parser.add_argument("--config", help="JSON file with option values")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, fmt=("csv", "json")):
        p.add_argument("--format", choices=fmt, default=None)
        p.add_argument("--out", help="write output here instead of stdout")

    def stochastic(p):
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--threads", type=int, default=None)

    p = sub.add_parser("plan", help="optimal adaptive policy for |m> -> |n> with k stages")
    p.add_argument("-m", type=int, required=True)
    p.add_argument("-n", type=int, required=True)
    p.add_argument("-k", type=int, required=True)
    common(p, ("text", "json"))

    p = sub.add_parser("curve", help="P_max(m, n | k) for k = 1..K")
    p.add_argument("-m", type=int, required=True)
    p.add_argument("-n", type=int, required=True)
    p.add_argument("-K", type=int, required=True)
    common(p)

    p = sub.add_parser("tradeoff", help="P vs p1 frontiers of the |2> -> |1> schemes")
    p.add_argument("--eta", type=float)
    p.add_argument("--eta-o", type=float)
    p.add_argument("--points", type=int)
    p.add_argument("--target", type=float, help="only optimize the feedforward scheme at this P")
    common(p)

    p = sub.add_parser("simulate", help="Monte Carlo estimate of a policy's success rate")
    p.add_argument("--policy", help="policy JSON file (as printed by 'plan --format json')")
    p.add_argument("-m", type=int)
    p.add_argument("-n", type=int)
    p.add_argument("-k", type=int)
    p.add_argument("--detector", choices=("ideal", "pnr", "click"))
    p.add_argument("--eta", type=float)
    p.add_argument("--eta-o", type=float)
    p.add_argument("--trials", type=int)
    p.add_argument("--dump", help="write every trajectory as JSON lines (first 10^5 trials at most)")
    stochastic(p)
    common(p, ("json",))

    p = sub.add_parser("emulate", help="coincidence-experiment emulation")
    p.add_argument("--source", choices=("fock2", "coherent"))
    p.add_argument("--mu", type=float)
    p.add_argument("--t1", type=float)
    p.add_argument("--t2", type=float, help="BS2 transmittance when AUX1 stays dark "
                   "(default 0.5; 1 with --no-feedforward)")
    p.add_argument("--loss-aux1", type=float, help="AUX1 port transmittance")
    p.add_argument("--loss-aux2", type=float, help="AUX2 port transmittance")
    p.add_argument("--loss-out", type=float, help="OUT port transmittance")
    p.add_argument("--eta", type=float, help="click-detector efficiency")
    p.add_argument("--pulses", type=int)
    p.add_argument("--no-feedforward", action="store_true", default=None)
    p.add_argument("--sweep", help="comma-separated T1 values; emits a T_eff/P_exp CSV")
    stochastic(p)
    common(p)
    return parser


def resolve(args: argparse.Namespace, config: Dict[str, Any]) -> Dict[str, Any]:
    opts = dict(DEFAULTS.get(args.command, {}))
    opts.update({k.replace("-", "_"): v for k, v in config.items()})
    opts.update({k: v for k, v in vars(args).items() if v is not None})
    if opts.get("threads") is None:
        opts["threads"] = os.cpu_count() or 1
    return opts


def _seed(opts) -> int:
    if opts.get("seed") is None:
        opts["seed"] = fresh_seed()
        print(f"seed={opts['seed']}", file=sys.stderr)
    return int(opts["seed"])


def _detector(opts) -> DetectorModel:
    kind = opts["detector"]
    if kind == "ideal":
        return IdealPNR()
    if kind == "pnr":
        return InefficientPNR(opts["eta"])
    return ClickPair(opts["eta"])


def cmd_plan(opts) -> str:
    m, n, k = opts["m"], opts["n"], opts["k"]
    if m < n or k < 1:
        raise UsageError(f"plan needs m >= n and k >= 1 (got m={m}, n={n}, k={k})")
    table = pmax_table(m, n, k)
    policy = build_policy(m, n, k, table)
    doc = {"P_max": table.pmax(m, k), "T1": policy.root.T, **policy.to_json()}
    if opts["format"] == "json":
        return json.dumps(sig6(doc), indent=2) + "\n"
    return (
        f"P_max={table.pmax(m, k):.6g}\nT1={policy.root.T:.6g}\n"
        + json.dumps(sig6(policy.to_json()), indent=2)
        + "\n"
    )


def cmd_curve(opts) -> str:
    m, n, K = opts["m"], opts["n"], opts["K"]
    if m <= n or K < 1:
        raise UsageError(f"curve needs m > n and K >= 1 (got m={m}, n={n}, K={K})")
    table = pmax_table(m, n, K)
    rows = [r for r in table.rows() if r[0] == m]
    if opts["format"] == "json":
        keys = ("m", "n", "k", "T1_opt", "P_max")
        return json.dumps([sig6(dict(zip(keys, r))) for r in rows], indent=2) + "\n"
    lines = ["m,n,k,T1_opt,P_max"] + [f"{a},{b},{c},{t:.6g},{p:.6g}" for a, b, c, t, p in rows]
    return "\n".join(lines) + "\n"


def cmd_tradeoff(opts) -> str:
    eta, eta_o = opts["eta"], opts["eta_o"]
    if opts.get("target") is not None:
        T1, T2, p1 = optimize_feedforward(eta, eta_o, opts["target"])
        doc = {"eta": eta, "eta_O": eta_o, "target_P": opts["target"], "T1": T1, "T2": T2, "p1": p1}
        return json.dumps(sig6(doc), indent=2) + "\n"
    points = tradeoff_curve(eta, eta_o, opts["points"])
    if opts["format"] == "json":
        return json.dumps([sig6(p.__dict__) for p in points], indent=2) + "\n"
    return curve_to_csv(points)


def cmd_simulate(opts) -> str:
    if opts.get("policy"):
        with open(opts["policy"]) as fp:
            policy = Policy.from_json(json.load(fp))
    elif all(opts.get(x) is not None for x in "mnk"):
        if opts["m"] < opts["n"] or opts["k"] < 1:
            raise UsageError("simulate needs m >= n and k >= 1")
        policy = build_policy(opts["m"], opts["n"], opts["k"])
    else:
        raise UsageError("simulate needs --policy FILE or all of -m, -n, -k")
    det, eta_o, seed = _detector(opts), opts["eta_o"], _seed(opts)
    result = estimate_success(policy, policy.m, det, eta_o, opts["trials"], seed, opts["threads"])
    exact = evaluate_policy(policy, policy.m, det, eta_o)
    if opts.get("dump"):
        with open(opts["dump"], "w") as fp:
            dump_trajectories(fp, trajectories(policy, policy.m, det, eta_o, min(opts["trials"], 100_000), seed))
    doc = {
        "m": policy.m,
        "n": policy.n,
        "k": policy.depth,
        "detector": det.to_json(),
        "eta_O": eta_o,
        **result.to_json(),
        "analytic": exact.success,
        "z": (result.estimate.value - exact.success) / result.estimate.stderr if result.estimate.stderr > 0 else 0.0,
    }
    return json.dumps(sig6(doc), indent=2) + "\n"


def cmd_emulate(opts) -> str:
    feedforward = not opts.get("no_feedforward")
    t2 = opts.get("t2")
    if t2 is None:
        t2 = 0.5 if feedforward else 1.0
    source = lab.SourceModel.fock2() if opts["source"] == "fock2" else lab.SourceModel.coherent(opts["mu"])
    losses = lab.PortLosses(opts["loss_aux1"], opts["loss_aux2"], opts["loss_out"])
    seed = _seed(opts)
    if opts.get("sweep"):
        try:
            t1s = [float(v) for v in opts["sweep"].split(",") if v.strip()]
        except ValueError as exc:
            raise UsageError(f"bad --sweep list: {exc}") from None
        rows = lab.sweep(source, t1s, t2, losses, opts["eta"], opts["pulses"], seed, feedforward, opts["threads"])
        if opts.get("format") == "json":
            return json.dumps([sig6(r.__dict__) for r in rows], indent=2) + "\n"
        return lab.sweep_to_csv(rows)
    counts = lab.run_pulses(source, opts["t1"], t2, losses, opts["eta"], opts["pulses"], seed, feedforward, opts["threads"])
    T_eff, T_se = lab.effective_transmittance(counts)
    P, se = lab.effective_success(counts)
    succ, unsucc = lab.tag(counts)
    doc = {
        "seed": seed,
        "feedforward": feedforward,
        "T_eff": T_eff,
        "T_eff_SE": T_se,
        "P_exp": P,
        "SE": se,
        "spurious_fraction": lab.spurious_fraction(counts),
        "successful": succ,
        "unsuccessful": unsucc,
        "counts": counts.to_json(),
    }
    return json.dumps(sig6(doc), indent=2) + "\n"


COMMANDS = {
    "plan": cmd_plan,
    "curve": cmd_curve,
    "tradeoff": cmd_tradeoff,
    "simulate": cmd_simulate,
    "emulate": cmd_emulate,
}


def main(argv: Optional[list] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    config: Dict[str, Any] = {}
    if args.config:
        try:
            with open(args.config) as fp:
                config = json.load(fp)
        except (OSError, ValueError) as exc:
            print(f"fockconvert: cannot read config: {exc}", file=sys.stderr)
            return EXIT_USAGE
    opts = resolve(args, config)
    try:
        text = COMMANDS[args.command](opts)
    except (UsageError, DomainError, KeyError) as exc:
        print(f"fockconvert {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except InfeasibleTarget as exc:
        print(f"fockconvert {args.command}: infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (ArithmeticError, FloatingPointError) as exc:
        print(f"fockconvert {args.command}: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    if opts.get("out"):
        with open(opts["out"], "w") as fp:
            fp.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
