import json
import subprocess
import sys
from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from opinionlab.cli import EXIT_BUDGET, EXIT_OK, EXIT_USAGE, EXIT_VERIFY, main
from opinionlab.core import DebateSpec, HierarchySpec, Rule
from opinionlab.debate import closed_form_s3, hitting_probabilities
from opinionlab.hierarchy import brute_force_win_probability, winning_probabilities
from opinionlab.tables import parse, read_table, render


def run_cli(tmp_path, *args, fmt="csv"):
    out = tmp_path / f"out.{fmt}"
    code = main([*args, "--format", fmt, "--out", str(out)])
    meta, rows = read_table(out) if out.exists() else (None, None)
    return code, meta, rows


def test_hierarchy_single_group(tmp_path):
    code, meta, rows = run_cli(tmp_path, "hierarchy-exact", "--s", "3", "--levels", "1", "--all-x")
    assert code == EXIT_OK
    assert [r["p_exact"] for r in rows] == ["0/1", "0/1", "1/1", "1/1"]
    assert meta["config"]["s"] == 3 and "out" not in meta["config"]


def test_hierarchy_matches_enumeration(tmp_path):
    code, _, rows = run_cli(tmp_path, "hierarchy-exact", "--s", "3", "--levels", "2", "--all-x")
    assert code == EXIT_OK and len(rows) == 10
    spec = HierarchySpec(3, 2)
    for r in rows:
        assert Fraction(r["p_exact"]) == brute_force_win_probability(spec, int(r["x"]))


def test_hierarchy_even_bias_row(tmp_path):
    _, _, rows = run_cli(tmp_path, "hierarchy-exact", "--s", "4", "--levels", "2", "--x", "8")
    assert len(rows) == 1 and float(rows[0]["p"]) < 0.5


def test_hierarchy_budget_exit(capsys):
    assert main(["hierarchy-exact", "--s", "3", "--levels", "9", "--x", "1"]) == EXIT_BUDGET
    assert "4096" in capsys.readouterr().err


def test_hierarchy_bad_x_is_usage_error():
    with pytest.raises(SystemExit) as info:
        main(["hierarchy-exact", "--s", "3", "--levels", "1", "--x", "9"])
    assert info.value.code == EXIT_USAGE


def test_mean_field_rows(tmp_path):
    _, _, rows = run_cli(tmp_path, "mean-field", "--s", "3", "--levels", "1", "--grid", "2")
    assert [(float(r["p"]), float(r["q"])) for r in rows] == [(0, 0), (0.5, 0.5), (1, 1)]


def test_mean_field_collapse_below_threshold(tmp_path):
    _, _, rows = run_cli(tmp_path, "mean-field", "--s", "4", "--levels", "8", "--grid", "100")
    assert len(rows) == 101
    nearest = min(rows, key=lambda r: abs(float(r["p"]) - 0.7))
    assert float(nearest["q"]) < 0.01


def test_mean_field_zero_grid():
    with pytest.raises(SystemExit) as info:
        main(["mean-field", "--s", "3", "--levels", "1", "--grid", "0"])
    assert info.value.code == EXIT_USAGE


def test_debate_proportional_exact(tmp_path):
    _, _, rows = run_cli(tmp_path, "debate", "--rule", "proportional", "--exact", "--N", "10", "--all-x")
    assert [Fraction(r["p_exact"]) for r in rows] == [Fraction(x, 10) for x in range(11)]


def test_debate_majority_exact_matches_closed_form(tmp_path):
    _, _, rows = run_cli(tmp_path, "debate", "--rule", "majority", "--s", "3", "--N", "20", "--exact", "--all-x")
    assert [Fraction(r["p_exact"]) for r in rows] == [closed_form_s3(20, x) for x in range(21)]


def test_debate_mc_table(tmp_path):
    code, meta, rows = run_cli(
        tmp_path, "debate", "--rule", "majority", "--s", "4", "--N", "100", "--mc",
        "--replicas", "2000", "--x", "87", "--seed", "4", fmt="json",
    )
    assert code == EXIT_OK and meta["config"]["seed"] == 4
    (row,) = rows
    exact = float(hitting_probabilities(DebateSpec(100, 4, Rule.MAJORITY))[87])
    assert float(row["lo"]) <= exact <= float(row["hi"])
    assert int(row["replicas"]) == 2000


def test_spatial_kernel_table(tmp_path):
    _, _, rows = run_cli(tmp_path, "spatial-verify", "--check", "kernel", "--d", "1", "--s", "2")
    assert {r["w"]: float(r["rate"]) for r in rows} == {"-1": 0.5, "0": 1.0, "1": 0.5}


def test_spatial_duality_exit_zero(tmp_path):
    code, _, rows = run_cli(
        tmp_path, "spatial-verify", "--check", "duality", "--d", "1", "--L", "16",
        "--horizon", "10", "--replicas", "30", "--replay", str(tmp_path / "r.events"),
    )
    assert code == EXIT_OK and rows[0]["violations"] == "0"
    assert not (tmp_path / "r.events").exists()


def test_spatial_equivalence_check(tmp_path):
    code, _, rows = run_cli(tmp_path, "spatial-verify", "--check", "equivalence", "--d", "1", "--L", "12", "--replicas", "3000")
    assert code in (EXIT_OK, EXIT_VERIFY) and len(rows) == 12
    assert code == EXIT_OK


def test_spatial_theta_one_density(tmp_path):
    _, _, rows = run_cli(
        tmp_path, "spatial", "--d", "2", "--L", "6", "--theta", "1.0", "--horizon", "5",
        "--sample-times", "0,2.5,5", "--replicas", "3",
    )
    assert [float(r["estimate"]) for r in rows] == [1.0, 1.0, 1.0]


def test_spatial_bad_sample_time():
    with pytest.raises(SystemExit) as info:
        main(["spatial", "--horizon", "5", "--sample-times", "6"])
    assert info.value.code == EXIT_USAGE


@pytest.mark.parametrize("fmt", ["csv", "json"])
def test_rerun_reproduces_output(tmp_path, fmt):
    first = tmp_path / f"a.{fmt}"
    second = tmp_path / f"b.{fmt}"
    args = ["debate", "--rule", "majority", "--s", "4", "--N", "30", "--x", "22", "--mc", "--replicas", "500", "--seed", "9"]
    assert main([*args, "--format", fmt, "--out", str(first)]) == EXIT_OK
    assert main(["rerun", str(first), "--format", fmt, "--out", str(second)]) == EXIT_OK
    assert first.read_text() == second.read_text()


def test_round_trip_exact_and_decimal(tmp_path):
    spec = HierarchySpec(4, 2)
    probs = winning_probabilities(spec)
    for fmt in ("csv", "json"):
        _, _, rows = run_cli(tmp_path, "hierarchy-exact", "--s", "4", "--levels", "2", "--all-x", fmt=fmt)
        for r in rows:
            p = probs[int(r["x"])]
            assert Fraction(r["p_exact"]) == p
            assert abs(Fraction(r["p"]) - p) <= Fraction(1, 2 * 10**12)


cells = st.one_of(st.integers(-10**6, 10**6), st.text(alphabet="abc,\"' 0123", max_size=8))


@given(st.lists(st.tuples(cells, cells), max_size=6), st.sampled_from(["csv", "json"]))
def test_tables_round_trip(rows, fmt):
    meta = {"argv": ["x"], "config": {"a": 1}}
    dict_rows = [{"u": a, "v": b} for a, b in rows]
    back_meta, back = parse(render(meta, ["u", "v"], dict_rows, fmt))
    assert back_meta == meta
    assert [(str(r["u"]), str(r["v"])) for r in back] == [(str(a), str(b)) for a, b in rows]


def test_entry_point_subprocess():
    res = subprocess.run(
        [sys.executable, "-m", "opinionlab.cli", "hierarchy-exact", "--s", "3", "--levels", "1", "--x", "2", "--format", "json"],
        capture_output=True, text=True, check=True,
    )
    assert json.loads(res.stdout)["rows"] == [{"x": 2, "p": "1.000000000000", "p_exact": "1/1"}]
