"""Fixed-count winning probabilities of the voting hierarchy next to Q_s^N(x / s^N).

Writes one CSV per (s, N) with columns x, p_fixed, p_fixed_exact, q_binomial.
"""

import argparse
from pathlib import Path

from opinionlab.core import HierarchySpec, format_decimal, format_fraction
from opinionlab.hierarchy import winning_probabilities
from opinionlab.meanfield import iterate_q
from opinionlab.tables import render


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out-dir", type=Path, default=Path("results/hierarchy"))
    args = ap.parse_args()
    args.out_dir.mkdir(parents=True, exist_ok=True)
    for s, N in [(3, 1), (3, 2), (3, 3), (4, 1), (4, 2)]:
        spec = HierarchySpec(s, N)
        n = spec.leaves
        rows = [
            {
                "x": x,
                "p_fixed": format_decimal(p),
                "p_fixed_exact": format_fraction(p),
                "q_binomial": f"{iterate_q(s, N, x / n):.12f}",
            }
            for x, p in enumerate(winning_probabilities(spec))
        ]
        path = args.out_dir / f"hierarchy_s{s}_N{N}.csv"
        path.write_text(render({"s": s, "N": N}, ["x", "p_fixed", "p_fixed_exact", "q_binomial"], rows))
        print(f"wrote {path} ({len(rows)} rows)")


if __name__ == "__main__":
    main()
