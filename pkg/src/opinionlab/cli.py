"""Command-line entry point.

Exit codes: 0 success, 2 usage error, 3 resource budget exceeded,
4 verification failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
from fractions import Fraction
from pathlib import Path
from typing import Sequence

from . import __version__
from .core import (
    DebateSpec,
    HierarchySpec,
    ResourceBudgetError,
    RngSeed,
    Rule,
    format_decimal,
    format_fraction,
)
from .debate import hitting_probabilities
from .estimator import estimate_win_probability
from .hierarchy import (
    DEFAULT_MAX_DP_LEAVES,
    DEFAULT_MAX_GENERAL_NODES,
    winning_probabilities,
)
from .meanfield import iterate_q
from .spatial import (
    DualityViolation,
    LatticeSpec,
    TorusState,
    UpdateRule,
    construction_equivalence_test,
    dual_walk_step_kernel,
    duality_check,
    observable_series,
    unit_vector,
)
from .tables import read_table, render

log = logging.getLogger("opinionlab")

EXIT_OK, EXIT_USAGE, EXIT_BUDGET, EXIT_VERIFY = 0, 2, 3, 4

# options that only choose where/how output goes; left out of the embedded config
_OUTPUT_OPTS = ("--out", "--format")


def _csv_ints(text: str) -> tuple[int, ...]:
    return tuple(int(v) for v in text.split(",") if v.strip())


def _csv_floats(text: str) -> tuple[float, ...]:
    return tuple(float(v) for v in text.split(",") if v.strip())


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="opinionlab", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    def output(sp):
        sp.add_argument("--format", choices=["csv", "json"], default="csv")
        sp.add_argument("--out", type=Path, help="output file (default: stdout)")

    h = sub.add_parser("hierarchy-exact", help="exact winning probabilities of the voting hierarchy")
    h.add_argument("--s", type=int, required=True)
    h.add_argument("--levels", type=int, required=True)
    g = h.add_mutually_exclusive_group(required=True)
    g.add_argument("--x", type=int)
    g.add_argument("--all-x", action="store_true")
    h.add_argument("--max-leaves", type=int, default=DEFAULT_MAX_DP_LEAVES)
    h.add_argument("--max-general-nodes", type=int, default=DEFAULT_MAX_GENERAL_NODES)
    output(h)

    m = sub.add_parser("mean-field", help="Q_s iterated N times on a grid of densities")
    m.add_argument("--s", type=int, required=True)
    m.add_argument("--levels", type=int, required=True)
    m.add_argument("--grid", type=int, required=True)
    output(m)

    d = sub.add_parser("debate", help="non-spatial public debate winning probabilities")
    d.add_argument("--rule", choices=[r.value for r in Rule], required=True)
    d.add_argument("--s", type=int, default=3)
    d.add_argument("--N", type=int, required=True)
    g = d.add_mutually_exclusive_group(required=True)
    g.add_argument("--x", type=int)
    g.add_argument("--all-x", action="store_true")
    mode = d.add_mutually_exclusive_group()
    mode.add_argument("--exact", action="store_true")
    mode.add_argument("--mc", action="store_true")
    d.add_argument("--replicas", type=int, default=10_000)
    d.add_argument("--seed", type=int, default=0)
    output(d)

    def lattice(sp):
        sp.add_argument("--d", type=int, default=1)
        sp.add_argument("--L", type=int, default=32)
        sp.add_argument("--s", type=int, default=2)
        sp.add_argument("--theta", type=float, default=0.5)
        sp.add_argument("--horizon", type=float, default=50.0)
        sp.add_argument("--replicas", type=int, default=100)
        sp.add_argument("--seed", type=int, default=0)

    s = sub.add_parser("spatial", help="time series of a torus observable")
    lattice(s)
    s.add_argument("--rule", choices=[r.value for r in UpdateRule], default="threshold")
    s.add_argument("--sample-times", type=_csv_floats, default=None)
    s.add_argument("--observable", choices=["density", "disagreement"], default="density")
    s.add_argument("--w", type=_csv_ints, default=None, help="displacement, e.g. 1,0,0")
    output(s)

    v = sub.add_parser("spatial-verify", help="duality / construction equivalence / dual kernel checks")
    lattice(v)
    v.add_argument("--check", choices=["duality", "equivalence", "kernel"], required=True)
    v.add_argument("--replay", type=Path, default=Path("duality_failure.events"))
    output(v)

    r = sub.add_parser("rerun", help="re-run the command embedded in a result file")
    r.add_argument("file", type=Path)
    output(r)
    return p


def _embedded_argv(argv: Sequence[str]) -> list[str]:
    out, skip = [], False
    for tok in argv:
        if skip:
            skip = False
            continue
        if tok in _OUTPUT_OPTS:
            skip = True
            continue
        if any(tok.startswith(o + "=") for o in _OUTPUT_OPTS):
            continue
        out.append(tok)
    return out


def _prob_row(x: int, p: Fraction) -> dict:
    return {"x": x, "p": format_decimal(p), "p_exact": format_fraction(p)}


def cmd_hierarchy(args, parser) -> tuple[list[str], list[dict], int]:
    spec = HierarchySpec(args.s, args.levels)
    if args.x is not None and not 0 <= args.x <= spec.leaves:
        parser.error(f"--x must lie in [0, {spec.leaves}]")
    probs = winning_probabilities(
        spec, max_leaves=args.max_leaves, max_nodes=args.max_general_nodes
    )
    xs = range(spec.leaves + 1) if args.all_x else [args.x]
    return ["x", "p", "p_exact"], [_prob_row(x, probs[x]) for x in xs], EXIT_OK


def cmd_mean_field(args, parser):
    if args.grid < 1:
        parser.error("--grid must be >= 1")
    if args.s < 2 or args.levels < 0:
        parser.error("need --s >= 2 and --levels >= 0")
    rows = []
    for i in range(args.grid + 1):
        p = Fraction(i, args.grid)
        rows.append({"p": format_decimal(p), "q": f"{iterate_q(args.s, args.levels, float(p)):.12f}"})
    return ["p", "q"], rows, EXIT_OK


def cmd_debate(args, parser):
    spec = DebateSpec(args.N, args.s, Rule(args.rule))
    if args.x is not None and not 0 <= args.x <= spec.N:
        parser.error(f"--x must lie in [0, {spec.N}]")
    xs = range(spec.N + 1) if args.all_x else [args.x]
    if not args.mc:
        probs = hitting_probabilities(spec)
        return ["x", "p", "p_exact"], [_prob_row(x, probs[x]) for x in xs], EXIT_OK
    if args.replicas < 1:
        parser.error("--replicas must be >= 1")
    cols = ["x", "estimate", "stderr", "lo", "hi", "replicas", "successes"]
    rows = []
    for x in xs:
        rep = estimate_win_probability(spec, x, args.replicas, RngSeed(args.seed, x))
        row = {"x": x}
        for k, v in rep.as_row().items():
            row[k] = v if isinstance(v, int) else f"{v:.12f}"
        rows.append(row)
    return cols, rows, EXIT_OK


def _lattice(args, parser) -> LatticeSpec:
    try:
        return LatticeSpec(args.d, args.L, args.s, args.horizon)
    except ValueError as exc:
        parser.error(str(exc))


def cmd_spatial(args, parser):
    spec = _lattice(args, parser)
    if args.replicas < 2:
        parser.error("--replicas must be >= 2")
    times = args.sample_times or (spec.horizon,)
    if min(times) < 0 or max(times) > spec.horizon:
        parser.error("--sample-times must lie in [0, horizon]")
    w = args.w or unit_vector(spec.d)
    if len(w) != spec.d:
        parser.error("--w must have d components")
    series = observable_series(
        spec, args.theta, UpdateRule(args.rule), times, args.replicas, RngSeed(args.seed),
        args.observable, w,
    )
    rows = [{"t": pt.t, "estimate": f"{pt.estimate:.12f}", "stderr": f"{pt.stderr:.12f}"} for pt in series]
    return ["t", "estimate", "stderr"], rows, EXIT_OK


def cmd_spatial_verify(args, parser):
    spec = _lattice(args, parser)
    if args.check == "kernel":
        rows = [
            {"w": ",".join(map(str, w)), "rate": format_decimal(r), "rate_exact": format_fraction(r)}
            for w, r in sorted(dual_walk_step_kernel(spec).items())
        ]
        return ["w", "rate", "rate_exact"], rows, EXIT_OK
    seed = RngSeed(args.seed)
    if args.check == "duality":
        try:
            rep = duality_check(spec, args.theta, spec.horizon, args.replicas, seed, replay_path=args.replay)
        except DualityViolation as exc:
            log.error("%s", exc)
            return ["replicas", "checked", "violations", "replay"], [
                {"replicas": args.replicas, "checked": "", "violations": 1, "replay": str(exc.replay)}
            ], EXIT_VERIFY
        return ["replicas", "checked", "violations", "replay"], [
            {"replicas": rep.replicas, "checked": rep.checked, "violations": rep.violations, "replay": ""}
        ], EXIT_OK
    # equivalence: one update from a Bernoulli(theta) configuration drawn from the seed
    initial = TorusState.bernoulli(spec, args.theta, seed.generator(2**32))
    rep = construction_equivalence_test(spec, initial, args.replicas, seed)
    rows = [
        {"site": i, "freq_threshold": f"{a:.12f}", "freq_voice": f"{b:.12f}", "z": f"{z:.6f}"}
        for i, (a, b, z) in enumerate(zip(rep.freq_threshold, rep.freq_voice, rep.z))
    ]
    return ["site", "freq_threshold", "freq_voice", "z"], rows, (EXIT_OK if rep.passed else EXIT_VERIFY)


COMMANDS = {
    "hierarchy-exact": cmd_hierarchy,
    "mean-field": cmd_mean_field,
    "debate": cmd_debate,
    "spatial": cmd_spatial,
    "spatial-verify": cmd_spatial_verify,
}


def main(argv: Sequence[str] | None = None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "rerun":
        meta, _ = read_table(args.file)
        extra = ["--format", args.format] + (["--out", str(args.out)] if args.out else [])
        return main(list(meta["argv"]) + extra)
    embedded = _embedded_argv(argv)
    config = {k: (str(v) if isinstance(v, Path) else v) for k, v in vars(args).items() if k not in ("out", "format")}
    meta = {"command": args.command, "argv": embedded, "config": config, "version": __version__}
    try:
        columns, rows, code = COMMANDS[args.command](args, parser)
    except ResourceBudgetError as exc:
        print(f"opinionlab: resource budget exceeded: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except ValueError as exc:
        print(f"opinionlab: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    text = render(meta, columns, rows, args.format)
    if args.out:
        args.out.write_text(text)
    else:
        sys.stdout.write(text)
    return code


if __name__ == "__main__":
    sys.exit(main())
