"""Winning probability of the public debate model against the initial support.

For s = 3, exact (closed form equals the solver). For s = 4,
exact solver plus a Monte Carlo column with 99% Wilson bounds.
"""

import argparse
from pathlib import Path

from opinionlab.core import DebateSpec, RngSeed, Rule, format_decimal
from opinionlab.debate import C_PLUS, hitting_probabilities
from opinionlab.estimator import estimate_win_probability
from opinionlab.tables import render


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--N", type=int, default=100)
    ap.add_argument("--replicas", type=int, default=10_000)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--step", type=int, default=2, help="MC every step-th x")
    ap.add_argument("--out-dir", type=Path, default=Path("results/debate"))
    args = ap.parse_args()
    args.out_dir.mkdir(parents=True, exist_ok=True)
    N = args.N

    exact3 = hitting_probabilities(DebateSpec(N, 3, Rule.MAJORITY))
    rows = [{"x": x, "p": format_decimal(exact3[x])} for x in range(N + 1)]
    (args.out_dir / "debate_s3.csv").write_text(render({"N": N, "s": 3}, ["x", "p"], rows))

    exact4 = hitting_probabilities(DebateSpec(N, 4, Rule.MAJORITY))
    rows = []
    for x in range(N + 1):
        row = {"x": x, "p_exact": format_decimal(exact4[x]), "mc": "", "lo": "", "hi": ""}
        if x % args.step == 0:
            rep = estimate_win_probability(DebateSpec(N, 4), x, args.replicas, RngSeed(args.seed, x))
            row.update(mc=f"{rep.estimate:.6f}", lo=f"{rep.lo:.6f}", hi=f"{rep.hi:.6f}")
        rows.append(row)
    meta = {"N": N, "s": 4, "replicas": args.replicas, "seed": args.seed, "c_plus_N": C_PLUS * N}
    (args.out_dir / "debate_s4.csv").write_text(render(meta, ["x", "p_exact", "mc", "lo", "hi"], rows))
    crossing = next(x for x in range(N + 1) if exact4[x] >= 0.5)
    print(f"s=4: p_x first reaches 1/2 at x={crossing}; c+ N = {C_PLUS * N:.1f}")


if __name__ == "__main__":
    main()
