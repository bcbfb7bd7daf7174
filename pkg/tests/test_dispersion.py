import math

import numpy as np
import pytest

from tilesom.dispersion import (DispersionError, GaussianParams, cached_simulate, gaussian_factor, load_table,
                                save_table, schedule_f, simulate, simulate_symmetric, step_matrix)


def random_graph(rng, n):
    """Connected random graph: a random spanning tree plus extra edges."""
    a = np.zeros((n, n))
    order = rng.permutation(n)
    for k in range(1, n):
        u, v = order[k], order[rng.integers(k)]
        a[u, v] = a[v, u] = 1
    extra = rng.random((n, n)) < 0.15
    extra = np.triu(extra, 1)
    a[extra | extra.T] = 1
    np.fill_diagonal(a, 0)
    return a


def test_identity_at_zero(build):
    g = build("torus-sq")
    table = simulate(g, 0.01, horizon=3, method="dp")
    assert np.array_equal(table.matrix(0), np.eye(g.n))


def test_triangle_one_step():
    k3 = np.ones((3, 3)) - np.eye(3)
    table = simulate(k3, 0.1, horizon=1, method="dp")
    P1 = table.matrix(1)
    assert np.allclose(np.diag(P1), 0.8, atol=1e-15)
    assert np.allclose(P1[~np.eye(3, dtype=bool)], 0.1, atol=1e-15)
    M = np.linalg.matrix_power(step_matrix(k3, 0.1).toarray(), 1)
    assert np.allclose(P1, M, atol=1e-15)


def test_matches_matrix_power():
    rng = np.random.default_rng(3)
    for _ in range(50):
        n = int(rng.integers(2, 21))
        a = random_graph(rng, n)
        p = 0.9 / max(a.sum(axis=1).max(), 1)
        T = int(rng.integers(1, 51))
        table = simulate(a, p, horizon=T, method="dp")
        D = np.diag(a.sum(axis=1))
        M = np.eye(n) + p * (a - D)
        for t in (0, 1, T // 2, T):
            assert np.abs(table.matrix(t) - np.linalg.matrix_power(M, t)).max() <= 1e-10


def test_spectral_matches_dp():
    rng = np.random.default_rng(5)
    a = random_graph(rng, 15)
    dp = simulate(a, 0.05, horizon=200, method="dp")
    sp = simulate(a, 0.05, horizon=200, method="spectral")
    for t in (0, 1, 7, 99, 200):
        assert np.abs(dp.matrix(t) - sp.matrix(t)).max() < 1e-12
    assert np.abs(dp.rowmax - sp.rowmax).max() < 1e-12


def test_stop_rule_dp():
    rng = np.random.default_rng(8)
    a = random_graph(rng, 12)
    table = simulate(a, 0.02, 1.6, method="dp")
    ratio = lambda P: np.max(P.max(axis=1) / P.min(axis=1)) if P.min() > 0 else math.inf
    assert ratio(table.matrix(table.T)) <= 1.6
    assert ratio(table.matrix(table.T - 1)) > 1.6
    spectral = simulate(a, 0.02, 1.6, method="spectral")
    assert spectral.T == table.T


@pytest.mark.parametrize("name", ["torus-hex", "kq"])
def test_conservation_and_symmetry(name, build):
    table = simulate(build(name), 1e-4)
    for t in (0, 1, 100, table.T // 3, table.T):
        P = table.matrix(t)
        assert np.abs(P.sum(axis=1) - 1).max() <= 1e-9
        assert np.abs(P - P.T).max() <= 1e-12
        assert P.min() >= -1e-12 and P.max() <= 1 + 1e-12
    last = table.matrix(table.T)
    assert np.max(last.max(axis=1) / last.min(axis=1)) <= 1.6


def test_rowmax_bounds_every_step():
    rng = np.random.default_rng(11)
    a = random_graph(rng, 10)
    dp = simulate(a, 0.05, horizon=2000, method="dp")
    sp = simulate(a, 0.05, horizon=2000, method="spectral")
    assert np.array_equal(dp.rowmax, dp.P.max(axis=0))
    assert np.abs(sp.rowmax - dp.rowmax).max() < 1e-12


def test_monotone_minimum():
    rng = np.random.default_rng(13)
    a = random_graph(rng, 14)
    table = simulate(a, 0.03, horizon=600, method="dp")
    lows = table.P.min(axis=2)
    for i in range(14):
        positive = np.flatnonzero(lows[:, i] > 0)
        assert len(positive)
        seq = lows[positive[0]:, i]
        assert np.all(np.diff(seq) >= -1e-15)


@pytest.mark.parametrize("name", ["torus-sq", "torus-hex", "torus-rec"])
def test_symmetric_equals_generic(name, build):
    g = build(name)
    times = [0, 1, 10, 1000, 50000]
    sym = simulate_symmetric(g, 1e-4, 1.6, times=times + [10 ** 9])
    gen = simulate(g, 1e-4, 1.6)
    assert sym.T == gen.T
    for t in times + [sym.T]:
        assert np.abs(sym.matrix(t) - gen.matrix(t)).max() <= 1e-12
    assert np.abs(sym.rowmax - gen.rowmax).max() <= 1e-12


def test_symmetric_small_dp(build):
    g = build("torus-hex")
    sym = simulate_symmetric(g, 0.01, horizon=40)
    dp = simulate(g, 0.01, horizon=40, method="dp")
    for t in range(41):
        assert np.abs(sym.matrix(t) - dp.matrix(t)).max() <= 1e-12


@pytest.mark.parametrize("name", ["kq", "klein-sq", "disk10"])
def test_symmetric_needs_torus(name, build):
    with pytest.raises(DispersionError):
        simulate_symmetric(build(name), 1e-4)


def test_unstable_and_bad_ratio():
    k3 = np.ones((3, 3)) - np.eye(3)
    with pytest.raises(DispersionError):
        simulate(k3, 0.5)
    with pytest.raises(DispersionError):
        simulate(k3, 0.1, 1.0)
    with pytest.raises(DispersionError):
        simulate(k3, 0.1, 1.6, max_steps=1, method="dp")


def test_missing_step():
    table = simulate(np.ones((3, 3)) - np.eye(3), 0.1, horizon=2, method="dp")
    with pytest.raises(DispersionError):
        table.row(0, 3)


def test_cache_roundtrip(tmp_path, build):
    g = build("torus-hex")
    table = simulate_symmetric(g, 1e-3, times=[0, 5, 50])
    save_table(table, tmp_path / "t.bin")
    back = load_table(tmp_path / "t.bin")
    assert back.kind == table.kind and back.T == table.T
    assert np.array_equal(back.rowmax, table.rowmax)
    assert np.array_equal(back.row(7, 50), table.row(7, 50))
    raw = (tmp_path / "t.bin").read_bytes()
    (tmp_path / "bad.bin").write_bytes(b"XXXXXXXX" + raw[8:])
    with pytest.raises(DispersionError):
        load_table(tmp_path / "bad.bin")
    (tmp_path / "short.bin").write_bytes(raw[:-8])
    with pytest.raises(DispersionError):
        load_table(tmp_path / "short.bin")


def test_cached_simulate_reuses_file(tmp_path):
    from tilesom.tessellation.catalog import build_disk
    from tilesom.tessellation.graph import Schlafli

    g = build_disk(Schlafli(7, 3), (1, 0), 8)
    first = cached_simulate(g, "tiny", tmp_path, p=0.01)
    files = list((tmp_path / "dispersion").iterdir())
    assert len(files) == 1
    second = cached_simulate(g, "tiny", tmp_path, p=0.01)
    assert second.T == first.T
    assert np.array_equal(second.matrix(first.T), first.matrix(first.T))


def test_factor_row_normalized(build):
    table = simulate_symmetric(build("torus-sq"), 1e-3)
    f = table.factor_row(3, 0)
    assert f[3] == 1.0 and np.count_nonzero(f) == 1
    for t in (1, table.T // 2, table.T):
        assert np.all(table.factor_row(3, t) <= 1 + 1e-12)


# ------------------------------------------------------------------ Gaussian
def test_gaussian_factor():
    params = GaussianParams(eta=0.1, sigma0=4.0)
    assert gaussian_factor(0, 10, 100, params) == pytest.approx(0.1)
    s = 4.0 * (1 - 10 / 100)
    assert gaussian_factor(s, 10, 100, params) == pytest.approx(0.1 * math.exp(-0.5))
    assert gaussian_factor(3.0, 100, 100, params) == 0.0
    assert gaussian_factor(0.0, 100, 100, params) == pytest.approx(0.1)
    vec = gaussian_factor(np.array([0.0, 1.0, 2.0]), 0, 100, params)
    assert vec.shape == (3,) and vec[0] == pytest.approx(0.1) and np.all(np.diff(vec) < 0)
    with pytest.raises(DispersionError):
        gaussian_factor(1.0, 101, 100, params)


def test_gaussian_params_checked():
    with pytest.raises(DispersionError):
        GaussianParams(eta=0.1, sigma0=0)
    with pytest.raises(DispersionError):
        GaussianParams(eta=1.5, sigma0=1)
    with pytest.raises(DispersionError):
        GaussianParams(eta=0.1, sigma0=1, distance_mode="euclid")


def test_schedule_f():
    assert schedule_f(0, 100, 37) == 37
    assert schedule_f(100, 100, 37) == 0
    assert schedule_f(50, 100, 37) == round(37 / 4)
    values = [schedule_f(t, 1000, 12345) for t in range(1001)]
    assert all(b <= a for a, b in zip(values, values[1:]))
    with pytest.raises(DispersionError):
        schedule_f(-1, 100, 10)
