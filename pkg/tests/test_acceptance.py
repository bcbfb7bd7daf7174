"""End-to-end acceptance checks; each test prints one PASS/FAIL line."""

import itertools
import json
import pickle
import time
import xml.etree.ElementTree as ET
from pathlib import Path

import numpy as np
import pytest

from tilesom import cli, harness
from tilesom.dispersion import cached_simulate, schedule_f, simulate, simulate_symmetric
from tilesom.metrics import (EmbeddingResult, energy, kendall_from_distances, tears,
                             wilcoxon_signed_rank)
from tilesom.tessellation import catalog
from tilesom.tessellation.graph import non_hexagon_counts

README = Path(__file__).resolve().parent.parent / "README.md"

CENSUS = {
    "sphere": (522, 1560), "kq": (528, 1596), "bolza": (502, 1512), "torus-hex": (529, 1587),
    "elliptic": (541, 1620), "disk10": (520, 1214), "disk-euclid": (520, 1479),
}


@pytest.fixture
def verdict(capsys):
    def emit(number, title, ok, detail=""):
        with capsys.disabled():
            print(f"\n[acceptance {number}] {'PASS' if ok else 'FAIL'}  {title}" + (f"  ({detail})" if detail else ""))
    return emit


def load_cached(name):
    """Build from the on-disk cache, bypassing the in-memory memo."""
    catalog.build(name)
    path = next((catalog.cache_dir() / "manifolds").glob(f"{name}-x1-{catalog._cache_key(name, 1)}.pkl"))
    with open(path, "rb") as fh:
        return pickle.load(fh)


# ------------------------------------------------------------------ census
def test_ac1_census(verdict):
    problems, timings, cold = [], {}, {}
    for name, (n, edges) in CENSUS.items():
        t0 = time.perf_counter()
        g = load_cached(name)
        c = catalog.census(g)
        timings[name] = time.perf_counter() - t0
        if (c["n"], c["edges"]) != (n, edges):
            problems.append(f"{name}: {c['n']}/{c['edges']}")
        if timings[name] >= 1.0:
            problems.append(f"{name}: {timings[name]:.2f}s")
        t0 = time.perf_counter()
        catalog.build(name, use_cache=False)
        cold[name] = time.perf_counter() - t0
    checks = {("torus-hex", "diameter"): 15, ("kq", "diameter"): 13}
    for (name, field), ref in checks.items():
        if catalog.census(catalog.build(name))[field] != ref:
            problems.append(f"{name} {field}")
    curv = {"torus-hex": 0.0, "kq": -0.0454545, "sphere": 0.0229885}
    for name, ref in curv.items():
        if abs(catalog.census(catalog.build(name))["curvature"] - ref) > 1e-6:
            problems.append(f"{name} curvature")
    ok = not problems
    verdict(1, "census counts, diameters, curvatures; each manifold under 1 s from the construction cache", ok,
            "; ".join(problems) or f"slowest {max(timings.values()):.3f}s; cold construction "
            + ", ".join(f"{k} {v:.1f}s" for k, v in cold.items()))
    assert ok, problems


# --------------------------------------------------------------- topology
def test_ac2_topology(verdict):
    problems = []
    for name in catalog.manifold_names():
        g = catalog.build(name)
        if not g.closed:
            continue
        counts = non_hexagon_counts(g)
        if 6 * g.euler_characteristic != sum((6 - p) * k for p, k in counts.items()):
            problems.append(name)
    kq = non_hexagon_counts(catalog.build("kq"))
    if kq.get(7) != 24 or kq.get(5, 0) != 0:
        problems.append(f"kq {kq}")
    for name in catalog.manifold_names():
        g = catalog.build(name)
        if not g.closed or name.startswith(("torus", "klein")):
            if catalog.build(name, 2).n != 4 * g.n:
                problems.append(f"{name} doubled")
    ok = not problems
    verdict(2, "6 chi = pentagons - heptagons; doubling quadruples disks and tori", ok, ", ".join(problems))
    assert ok


# -------------------------------------------------------------- dispersion
def random_graph(rng, n):
    a = np.zeros((n, n))
    order = rng.permutation(n)
    for k in range(1, n):
        u, v = order[k], order[rng.integers(k)]
        a[u, v] = a[v, u] = 1
    extra = np.triu(rng.random((n, n)) < 0.2, 1)
    a[extra | extra.T] = 1
    np.fill_diagonal(a, 0)
    return a


def test_ac3_dispersion(verdict, cache_dir):
    rng = np.random.default_rng(2024)
    worst_power = 0.0
    for _ in range(50):
        n = int(rng.integers(2, 21))
        a = random_graph(rng, n)
        p = 0.9 / a.sum(axis=1).max()
        T = int(rng.integers(1, 51))
        table = simulate(a, p, horizon=T, method="dp")
        M = np.eye(n) + p * (a - np.diag(a.sum(axis=1)))
        for t in range(T + 1):
            worst_power = max(worst_power, np.abs(table.matrix(t) - np.linalg.matrix_power(M, t)).max())
    worst_sum = worst_sym = 0.0
    for name in ("torus-hex", "kq"):
        g = catalog.build(name)
        table = cached_simulate(g, f"{name}-x1", cache_dir, 1e-4, 1.6)
        for t in sorted({schedule_f(s, 30000, table.T) for s in range(0, 30001, 1500)} | {0, 1, table.T}):
            P = table.matrix(t)
            worst_sum = max(worst_sum, np.abs(P.sum(axis=1) - 1).max())
            worst_sym = max(worst_sym, np.abs(P - P.T).max())
    worst_tori = 0.0
    for name in ("torus-hex", "torus-sq", "torus-rec"):
        g = catalog.build(name)
        gen = cached_simulate(g, f"{name}-x1", cache_dir, 1e-4, 1.6)
        times = [schedule_f(s, 30000, gen.T) for s in range(0, 30001, 3000)]
        sym = simulate_symmetric(g, 1e-4, 1.6, times=times)
        for t in set(times) | {sym.T}:
            worst_tori = max(worst_tori, np.abs(sym.matrix(t) - gen.matrix(t)).max())
        worst_tori = max(worst_tori, np.abs(sym.rowmax - gen.rowmax).max())
    ok = worst_power <= 1e-10 and worst_sum <= 1e-9 and worst_sym <= 1e-12 and worst_tori <= 1e-12
    verdict(3, "dispersion = matrix power, conserves mass, symmetric, torus shortcut agrees", ok,
            f"power {worst_power:.1e}, sums {worst_sum:.1e}, symmetry {worst_sym:.1e}, tori {worst_tori:.1e}")
    assert ok


# ----------------------------------------------------------------- metrics
def brute_kendall(dO, dE):
    conc = disc = denom = 0
    for a, b in itertools.combinations(range(len(dO)), 2):
        if dO[a] != dO[b]:
            denom += 1
            s = np.sign(dO[a] - dO[b]) * np.sign(dE[a] - dE[b])
            conc += s > 0
            disc += s < 0
    return (conc - disc) / denom


def test_ac4_metric_oracles(verdict):
    rng = np.random.default_rng(7)
    kendall_ok, done = True, 0
    while done < 500:
        P = int(rng.integers(2, 30))
        dO, dE = rng.integers(0, 5, P), rng.integers(0, 5, P)
        if len(set(dO)) < 2:
            continue
        kendall_ok &= abs(kendall_from_distances(dO, dE) - brute_kendall(dO, dE)) < 1e-12
        done += 1
    wil = wilcoxon_signed_rank([1, 2, 3, 4, 5, 6], "greater")
    g = catalog.build("torus-hex")
    ident = EmbeddingResult(np.arange(g.n), g, g)
    dO = np.arange(1, 30) % 7
    anti = 100 * (1 - kendall_from_distances(dO, 10 - dO))
    checks = {
        "kendall brute force": kendall_ok,
        "wilcoxon 1/64": abs(wil - 1 / 64) < 1e-15,
        "identity energy": energy(ident) == 0,
        "anti-monotone 200": anti == 200,
        "surjective tears": tears(ident, 1) == 0,
    }
    ok = all(checks.values())
    verdict(4, "metric oracles", ok, ", ".join(k for k, v in checks.items() if not v))
    assert ok


# ------------------------------------------------------- training outcomes
SELF_PAIRS = ["torus-hex", "sphere", "kq"]


@pytest.fixture(scope="module")
def desk_runs(tmp_path_factory, cache_dir):
    cfg = harness.config_from_dict({
        "origins": SELF_PAIRS, "self_pairs": True, "repetitions": 10, "base_seed": 1,
        "modes": ["simulated", "gaussian_discrete"], "train": {"t_max": 30000, "eta": 0.1},
        "dispersion": {"p": 1e-4, "stop_ratio": 1.6},
    })
    out = tmp_path_factory.mktemp("desk") / "acceptance.csv"
    return harness.run_experiment(cfg, out, cache_dir)


def test_ac5_torus_self_map(verdict, desk_runs):
    rows = [r for r in desk_runs if r.origin == "torus-hex" and r.dispersion_mode == "simulated"]
    vs = [r.villmann for r in rows]
    good = sum(1 for v in vs if v is not None and v < 8)
    ok = len(rows) == 10 and good >= 7
    verdict(5, "torus-hex self-map, simulated dispersion: at least 7 of 10 seeds reach Villmann < 8", ok,
            f"{good}/10, values {vs}")
    assert ok


def test_ac6_dispersion_comparison(verdict, desk_runs, capsys):
    errors = [r for r in desk_runs if r.error]
    report = harness.compare_dispersions(desk_runs)
    pooled = next((r for r in report.rows if r.group == "all" and r.metric == "villmann"), None)
    with capsys.disabled():
        print("\n" + report.text())
        print("paired Villmann values (simulated, Gaussian) per pair:")
        for name in SELF_PAIRS:
            sim = [r.villmann for r in desk_runs if r.origin == name and r.dispersion_mode == "simulated"]
            gau = [r.villmann for r in desk_runs if r.origin == name and r.dispersion_mode == "gaussian_discrete"]
            print(f"  {name}: " + " ".join(f"({a},{b})" for a, b in zip(sim, gau)))
    ok = (not errors and pooled is not None and pooled.p_greater is not None
          and pooled.median_difference >= 0 and pooled.p_greater < 0.05)
    detail = "no pooled row" if pooled is None else (
        f"n={pooled.n}, median diff {pooled.median_difference:g}, one-sided p "
        + ("undefined" if pooled.p_greater is None else f"{pooled.p_greater:.3g}"))
    verdict(6, "Gaussian minus simulated Villmann: median >= 0 and one-sided p < 0.05", ok, detail)
    assert ok, detail


# ------------------------------------------------------------- full scale
def test_ac7_full_scale_config(verdict):
    cfg = harness.load_config("full")
    raw = json.loads((harness.BUILTIN_CONFIGS / "full.json").read_text())
    n = len(harness.plan(cfg))
    readme = README.read_text() if README.exists() else ""
    ok = n == 57600 and "LONG-RUNNING" in raw.get("description", "") and "long-running" in readme.lower() \
        and "full" in readme
    verdict(7, "full-scale configuration shipped and documented as long-running", ok, f"{n} runs")
    assert ok


# --------------------------------------------------------------- rendering
def svg_checks(path, n):
    root = ET.fromstring(path.read_bytes())
    polys = list(root.iter("{http://www.w3.org/2000/svg}polygon"))
    tiles = [p for p in polys if p.get("class") == "tile"]
    copies = [p for p in polys if p.get("class") == "copy"]
    return len(tiles) == n and len(copies) > 0 and len(copies) % n == 0


def render_pair(workdir):
    workdir.mkdir()
    run = lambda *a: cli.main([str(x) for x in a])  # noqa: E731
    codes = [
        run("dataset", "gen", "torus-hex", "-o", workdir / "torus.csv"),
        run("--seed", 3, "train", "--target", "torus-hex", "--data", workdir / "torus.csv",
            "--t-max", 3000, "-o", workdir / "torus.w"),
        run("render", "umatrix", "torus-hex", "--weights", workdir / "torus.w", "-o", workdir / "umatrix.svg"),
        run("dataset", "gen", "kq", "-o", workdir / "kq.csv"),
        run("--seed", 3, "train", "--target", "kq", "--data", workdir / "kq.csv", "--mode", "gaussian_discrete",
            "--t-max", 3000, "-o", workdir / "kq.w"),
        run("render", "embedding", "kq", "--origin", "kq", "--data", workdir / "kq.csv",
            "--weights", workdir / "kq.w", "-o", workdir / "embedding.svg"),
    ]
    return codes


def test_ac8_svg_outputs(verdict, tmp_path, capsys):
    first = render_pair(tmp_path / "one")
    second = render_pair(tmp_path / "two")
    capsys.readouterr()
    n_t, n_k = catalog.build("torus-hex").n, catalog.build("kq").n
    ok = (first == [0] * 6 and second == [0] * 6
          and svg_checks(tmp_path / "one" / "umatrix.svg", n_t)
          and svg_checks(tmp_path / "one" / "embedding.svg", n_k)
          and all((tmp_path / "one" / f).read_bytes() == (tmp_path / "two" / f).read_bytes()
                  for f in ("umatrix.svg", "embedding.svg")))
    verdict(8, "torus-hex U-matrix and KQ embedding SVGs parse, show tiles plus copies, rerun byte-identical", ok)
    assert ok
