from fractions import Fraction

import pytest

from reciprosim.config import build_spec
from reciprosim.errors import LengthMismatch
from reciprosim.events import read_log
from reciprosim.experiments import compare, run_experiment
from reciprosim.scenarios import canonical_text

SMALL = (
    "kind = INSURANCE\nN = 6\nhorizon = 40\n"
    "[experiment]\nseeds = 1..3\ncontrols = giving_disabled\n"
)


def snapshot(root):
    return {p.relative_to(root).as_posix(): p.read_bytes() for p in sorted(root.rglob("*"))
            if p.is_file()}


def test_compare_counts_and_median():
    pc = compare("m", [3, 4, 5], [1, 1, 5])
    assert (pc.wins, pc.losses, pc.ties, pc.median_diff) == (2, 0, 1, 2)


def test_compare_identical():
    pc = compare("m", [1, 2, 3], [1, 2, 3])
    assert (pc.wins, pc.losses, pc.ties, pc.median_diff) == (0, 0, 3, 0)


def test_compare_swap_is_antisymmetric():
    a = compare("m", [3, 4, 5], [1, 1, 5])
    b = compare("m", [1, 1, 5], [3, 4, 5])
    assert (a.wins, a.losses) == (b.losses, b.wins)
    assert a.median_diff == -b.median_diff


def test_compare_even_count_median_is_exact():
    pc = compare("m", [Fraction(1, 3), 2], [0, 0])
    assert pc.median_diff == Fraction(7, 6)


def test_compare_undefined_pairs():
    pc = compare("m", [None, 2, 1], [1, None, 0])
    assert (pc.wins, pc.undefined) == (1, 2)
    assert compare("m", [None], [None]).median_diff is None


def test_compare_length_mismatch():
    with pytest.raises(LengthMismatch):
        compare("m", [1, 2], [1])


def test_three_seeds_one_control(tmp_path):
    spec = build_spec(SMALL)
    result = run_experiment(spec, tmp_path)
    files = snapshot(tmp_path)
    assert len([f for f in files if f.endswith(".log")]) == 6
    assert len([f for f in files if f.startswith("seed-") and f.endswith(".csv")]) == 6
    assert "aggregate.csv" in files and "comparisons.csv" in files
    assert files["MANIFEST"].decode().endswith("status OK\n")
    assert [r.seed for r in result.results] == [1, 2, 3]


def test_rerun_is_byte_identical(tmp_path):
    spec = build_spec(SMALL)
    run_experiment(spec, tmp_path)
    first = snapshot(tmp_path)
    run_experiment(spec, tmp_path)
    assert snapshot(tmp_path) == first


def test_parallel_matches_serial(tmp_path):
    spec = build_spec(SMALL)
    run_experiment(spec, tmp_path / "serial")
    run_experiment(spec, tmp_path / "parallel", jobs=2)
    assert snapshot(tmp_path / "serial") == snapshot(tmp_path / "parallel")


def test_control_header_differs_only_in_the_switch(tmp_path):
    spec = build_spec(SMALL)
    run_experiment(spec, tmp_path)
    for seed in spec.seeds:
        t = read_log(tmp_path / f"seed-{seed}" / "treatment.log").header
        c = read_log(tmp_path / f"seed-{seed}" / "giving_disabled.log").header
        assert t.seed == c.seed == seed and t.digest != c.digest
    lines_t = canonical_text(spec.scenario).splitlines()
    lines_c = canonical_text(spec.control_config("giving_disabled")).splitlines()
    assert [a for a, b in zip(lines_t, lines_c) if a != b] == ["giving_disabled = false"]


def test_aggregate_sorted_by_metric_then_seed(tmp_path):
    run_experiment(build_spec(SMALL), tmp_path)
    lines = (tmp_path / "aggregate.csv").read_text().splitlines()
    assert lines[0] == "metric,seed,treatment,giving_disabled"
    keys = [(r.split(",")[0], int(r.split(",")[1])) for r in lines[1:]]
    assert keys == sorted(keys)
    assert len(keys) == len(set(keys)) == 3 * 24


def test_aggregate_values_match_seed_reports(tmp_path):
    run_experiment(build_spec(SMALL), tmp_path)
    agg = {}
    for row in (tmp_path / "aggregate.csv").read_text().splitlines()[1:]:
        m, seed, t, c = row.split(",")
        agg[(m, int(seed))] = (t, c)
    for seed in (1, 2, 3):
        for run in ("treatment", "giving_disabled"):
            rows = (tmp_path / f"seed-{seed}" / f"{run}.csv").read_text().splitlines()[1:]
            for row in rows:
                m, value, _ = row.split(",")
                assert agg[(m, seed)][0 if run == "treatment" else 1] == value


def test_failure_leaves_failed_manifest(tmp_path):
    spec = build_spec(SMALL)
    blocker = tmp_path / "seed-2"
    blocker.write_text("in the way")  # a file where a directory must go
    with pytest.raises(OSError):
        run_experiment(spec, tmp_path)
    assert "status FAILED" in (tmp_path / "MANIFEST").read_text()
