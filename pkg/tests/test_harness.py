import json

import numpy as np
import pytest

from tilesom import cli, harness
from tilesom.metrics import QualityReport, read_reports


def small_config(**kw):
    raw = {"pairs": [["torus-hex", "torus-hex"]], "repetitions": 1, "train": {"t_max": 500}}
    raw.update(kw)
    return harness.config_from_dict(raw)


def strip_runtime(path):
    rows = read_reports(path)
    for r in rows:
        r.runtime_ms = None
    return rows


def test_one_pair_two_modes(tmp_path, cache_dir):
    cfg = small_config()
    rows = harness.run_experiment(cfg, tmp_path / "a.csv", cache_dir)
    assert len(rows) == 2 and not any(r.error for r in rows)
    assert [r.dispersion_mode for r in rows] == ["simulated", "gaussian_discrete"]
    # both modes of a repetition share the seed, hence the data and the initial weights
    assert rows[0].seed == rows[1].seed
    harness.run_experiment(cfg, tmp_path / "b.csv", cache_dir)
    assert strip_runtime(tmp_path / "a.csv") == strip_runtime(tmp_path / "b.csv")
    assert not (tmp_path / "a.csv.partial").exists()


def test_threaded_run_matches_serial(tmp_path, cache_dir):
    cfg = small_config(repetitions=2)
    serial = harness.run_experiment(cfg, tmp_path / "s.csv", cache_dir)
    pooled = harness.run_experiment(cfg, tmp_path / "p.csv", cache_dir, threads=2)
    assert len(serial) == 4
    assert strip_runtime(tmp_path / "s.csv") == strip_runtime(tmp_path / "p.csv")


def test_error_rows_do_not_stop_the_run(tmp_path, cache_dir):
    cfg = small_config(pairs=[["kq", "torus-hex"], ["torus-hex", "torus-hex"]], methods={"kq": "natural"})
    rows = harness.run_experiment(cfg, tmp_path / "e.csv", cache_dir)
    assert len(rows) == 4
    assert all(r.error for r in rows[:2]) and not any(r.error for r in rows[2:])
    assert "DatagenError" in rows[0].error


def test_seed_derivation():
    a = harness.run_seed(1, "kq", "sphere", 0)
    assert a == harness.run_seed(1, "kq", "sphere", 0)
    assert len({a, harness.run_seed(2, "kq", "sphere", 0), harness.run_seed(1, "sphere", "kq", 0),
                harness.run_seed(1, "kq", "sphere", 1)}) == 4
    assert 0 <= a < 2 ** 31


def test_plan_keys_unique():
    cfg = harness.load_config("desk")
    keys = harness.plan(cfg)
    assert len(keys) == 6 * 10 * 2
    assert len({(k.origin, k.target, k.mode, k.seed) for k in keys}) == len(keys)


def test_full_scale_config():
    cfg = harness.load_config("full")
    assert cfg.repetitions == 100 and cfg.t_max == 30000 and cfg.eta == 0.1
    assert len(harness.plan(cfg)) == 57600


def test_builtin_configs_load():
    assert {"desk", "full", "smoke"} <= set(harness.builtin_configs())
    for name in harness.builtin_configs():
        harness.load_config(name)


def test_config_errors(tmp_path):
    with pytest.raises(harness.ConfigError):
        harness.config_from_dict({"pairs": []})
    with pytest.raises(harness.ConfigError):
        harness.config_from_dict({"pairs": [["kq", "atlantis"]]})
    with pytest.raises(harness.ConfigError):
        harness.config_from_dict({"pairs": [["kq", "kq"]], "colour": "red"})
    with pytest.raises(harness.ConfigError):
        harness.config_from_dict({"pairs": [["kq", "kq"]], "version": 2})
    with pytest.raises(harness.ConfigError):
        harness.config_from_dict({"pairs": [["kq", "kq"]], "modes": ["telepathy"]})
    with pytest.raises(harness.ConfigError):
        harness.config_from_dict({"pairs": [["kq", "kq"]], "repetitions": 0})
    (tmp_path / "bad.json").write_text("{not json")
    with pytest.raises(harness.ConfigError):
        harness.load_config(tmp_path / "bad.json")


def test_config_pair_forms():
    cfg = harness.config_from_dict({"origins": ["kq", "sphere"], "targets": ["torus-hex"]})
    assert cfg.pairs == [["kq", "torus-hex"], ["sphere", "torus-hex"]]
    cfg = harness.config_from_dict({"origins": ["kq", "sphere"], "self_pairs": True})
    assert cfg.pairs == [["kq", "kq"], ["sphere", "sphere"]]


# -------------------------------------------------------------- comparisons
def synthetic(values_sim, values_gau, origin="a", target="b"):
    rows = []
    for seed, (s, g) in enumerate(zip(values_sim, values_gau)):
        rows.append(QualityReport(origin, target, "m", "simulated", seed, villmann=s, energy=float(s)))
        rows.append(QualityReport(origin, target, "m", "gaussian_discrete", seed, villmann=g, energy=float(s)))
    return rows


def test_compare_strictly_better():
    rows = synthetic(range(10), [v + 1 + v for v in range(10)])
    report = harness.compare_dispersions(rows)
    v = next(r for r in report.rows if r.group == "all" and r.metric == "villmann")
    assert v.n == 10 and v.p_greater == pytest.approx(2 ** -10) and v.significant
    assert v.median_difference > 0


def test_compare_identical_flagged():
    report = harness.compare_dispersions(synthetic(range(10), range(10)))
    e = next(r for r in report.rows if r.group == "all" and r.metric == "energy")
    assert e.p_greater is None and not e.significant and e.note
    assert "undefined" in report.text()


def test_compare_pooled_and_orphans():
    rows = synthetic([1, 2, 3], [2, 3, 4], "a", "b") + synthetic([5, 6], [5, 9], "c", "d")
    rows.append(QualityReport("x", "y", "m", "simulated", 0, villmann=1))
    rows.append(QualityReport("a", "b", "m", "gaussian_discrete", 99, villmann=3))
    report = harness.compare_dispersions(rows)
    pooled = next(r for r in report.rows if r.group == "all" and r.metric == "villmann")
    per_pair = [r for r in report.rows if r.group != "all" and r.metric == "villmann"]
    assert pooled.n == sum(r.n for r in per_pair) == 5
    assert len(report.orphans) == 2
    assert all(0 <= p <= 1 for r in report.rows for p in (r.p_greater, r.p_less, r.p_two_sided) if p is not None)


def test_compare_own_output(tmp_path, cache_dir):
    cfg = small_config(repetitions=2)
    harness.run_experiment(cfg, tmp_path / "r.csv", cache_dir)
    report = harness.compare_dispersions(read_reports(tmp_path / "r.csv"))
    assert report.rows and not report.orphans
    report.to_csv(tmp_path / "cmp.csv")
    assert (tmp_path / "cmp.csv").read_text().startswith("group,")


# ---------------------------------------------------------------------- CLI
def run_cli(capsys, *argv):
    code = cli.main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_cli_manifold_info(capsys):
    code, out, _ = run_cli(capsys, "manifold", "info", "kq")
    info = json.loads(out)
    assert code == 0 and info["n"] == 528 and info["edges"] == 1596 and info["euler_characteristic"] == -4
    code, out, _ = run_cli(capsys, "manifold", "info", "bolza")
    info = json.loads(out)
    assert code == 0 and info["n"] == 502 and info["edges"] == 1512


def test_cli_manifold_list_and_check(capsys):
    code, out, _ = run_cli(capsys, "manifold", "list")
    assert code == 0 and "torus-hex" in out and "disk-euclid" in out
    code, out, _ = run_cli(capsys, "manifold", "check", "kq", "sphere", "disk10")
    assert code == 0 and "FAIL" not in out


def test_cli_validation_exits(capsys, tmp_path):
    assert run_cli(capsys, "manifold", "info", "atlantis")[0] == 1
    (tmp_path / "empty.json").write_text(json.dumps({"pairs": []}))
    assert run_cli(capsys, "experiment", "run", str(tmp_path / "empty.json"))[0] == 1
    (tmp_path / "bad.json").write_text(json.dumps({"pairs": [["kq", "atlantis"]]}))
    assert run_cli(capsys, "experiment", "run", str(tmp_path / "bad.json"))[0] == 1
    assert run_cli(capsys, "frobnicate")[0] == 1


def test_cli_pipeline(capsys, tmp_path):
    data, weights = tmp_path / "d.csv", tmp_path / "w.txt"
    assert run_cli(capsys, "dataset", "gen", "torus-hex", "-o", str(data))[0] == 0
    code, _, _ = run_cli(capsys, "--seed", "5", "train", "--target", "torus-hex", "--data", str(data),
                         "--mode", "gaussian_discrete", "--t-max", "300", "-o", str(weights))
    assert code == 0
    assert weights.read_text().split("\n", 1)[0] == "som torus-hex 529 6 5"
    code, _, _ = run_cli(capsys, "eval", "--origin", "torus-hex", "--target", "torus-hex", "--data", str(data),
                         "--weights", str(weights), "-o", str(tmp_path / "q.csv"))
    assert code == 0 and len(read_reports(tmp_path / "q.csv")) == 1
    assert run_cli(capsys, "eval", "--origin", "kq", "--target", "torus-hex", "--data", str(data),
                   "--weights", str(weights))[0] == 1
    svg = tmp_path / "u.svg"
    assert run_cli(capsys, "render", "umatrix", "torus-hex", "--weights", str(weights), "-o", str(svg))[0] == 0
    assert svg.read_text().startswith("<?xml")


def test_cli_experiment_and_compare(capsys, tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"pairs": [["torus-hex", "torus-hex"]], "repetitions": 1,
                               "train": {"t_max": 300}, "output": str(tmp_path / "out.csv")}))
    code, out, _ = run_cli(capsys, "experiment", "run", str(cfg), "--quiet", "--compare")
    assert code == 0 and len(read_reports(tmp_path / "out.csv")) == 2
    code, out, _ = run_cli(capsys, "compare", str(tmp_path / "out.csv"))
    assert code == 0 and "villmann" in out
