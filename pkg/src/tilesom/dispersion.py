"""Neighbourhood influence for SOM training.

The simulated dispersion is the random walk on the tile graph

    P[i, j, t+1] = P[i, j, t] + p * sum_{k in N(j)} (P[i, k, t] - P[i, j, t])

started from the identity, i.e. ``P_t = M**t`` with ``M = I + p (A - D)``.
Small problems run this recurrence literally.  For production sizes
(p = 1e-4, hundreds of tiles, horizons of 10**5..10**6 steps) the same
powers are evaluated through the eigendecomposition of the symmetric
matrix M, which gives identical values up to rounding without storing
every step.  The Gaussian baseline and the iteration schedules live here
as well.
"""

from __future__ import annotations

import hashlib
import json
import math
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import sparse

from .tessellation.graph import TessellationError, TileGraph, torus_translations


class DispersionError(ValueError):
    """Unstable step probability, non-convergence or a malformed table."""


DEFAULT_P = 1e-4
DEFAULT_STOP_RATIO = 1.6
DEFAULT_MAX_STEPS = 10 ** 7
# dense (T+1, n, n) storage is used by the literal recurrence up to this many floats
DENSE_BUDGET = 2 * 10 ** 7


@dataclass(eq=False)
class DispersionTable:
    """P[i, j, t] for t = 0..T, plus the per-(i, j) maximum over t.

    Storage ``kind`` is one of:

    - ``dense``: every step kept, ``P`` has shape (T+1, n, n);
    - ``spectral``: ``P_t = V diag(mu**t) V^T`` from ``eigvals`` (mu) and ``eigvecs``;
    - ``translated``: snapshots of row 0 at ``times``; row i is row 0 moved by
      the translation ``translation[i]`` (tori).
    """

    n: int
    T: int
    p: float
    stop_ratio: float
    kind: str
    rowmax: np.ndarray
    P: np.ndarray | None = field(default=None, repr=False)
    eigvals: np.ndarray | None = field(default=None, repr=False)
    eigvecs: np.ndarray | None = field(default=None, repr=False)
    times: np.ndarray | None = field(default=None, repr=False)
    base_rows: np.ndarray | None = field(default=None, repr=False)
    translation: np.ndarray | None = field(default=None, repr=False)

    def _check_t(self, t: int) -> int:
        t = int(t)
        if not 0 <= t <= self.T:
            raise DispersionError(f"step {t} outside 0..{self.T}")
        return t

    def row(self, i: int, t: int) -> np.ndarray:
        """P[i, :, t]."""
        t = self._check_t(t)
        if self.kind == "dense":
            return self.P[t, i].copy()
        if self.kind == "spectral":
            return (self.eigvecs[i] * np.power(self.eigvals, float(t))) @ self.eigvecs.T
        k = np.searchsorted(self.times, t)
        if k >= len(self.times) or self.times[k] != t:
            raise DispersionError(f"step {t} was not kept in this table")
        out = np.empty(self.n)
        out[self.translation[i]] = self.base_rows[k]
        return out

    def matrix(self, t: int) -> np.ndarray:
        """The full n x n matrix P[:, :, t]."""
        t = self._check_t(t)
        if self.kind == "dense":
            return self.P[t].copy()
        if self.kind == "spectral":
            return (self.eigvecs * np.power(self.eigvals, float(t))) @ self.eigvecs.T
        return np.stack([self.row(i, t) for i in range(self.n)])

    def factor_row(self, i: int, t: int) -> np.ndarray:
        """P[i, :, t] / max_s P[i, :, s], zero where the walk never arrived."""
        r = self.row(i, t)
        m = self.rowmax[i]
        out = np.zeros(self.n)
        np.divide(r, m, out=out, where=m > 0)
        return out


# ------------------------------------------------------------------ helpers
def _adjacency(g) -> sparse.csr_matrix:
    if isinstance(g, TileGraph):
        return g.sparse_adjacency()
    a = sparse.csr_matrix(g, dtype=float)
    if a.shape[0] != a.shape[1]:
        raise DispersionError("adjacency matrix must be square")
    a = a.copy()
    a.data[:] = 1.0
    return a


def step_matrix(g, p: float) -> sparse.csr_matrix:
    """M = I + p (A - D), the one-step operator."""
    a = _adjacency(g)
    deg = np.asarray(a.sum(axis=1)).ravel()
    return (sparse.identity(a.shape[0], format="csr") + p * (a - sparse.diags(deg))).tocsr()


def _validate(a, p: float, stop_ratio: float) -> None:
    deg = np.asarray(a.sum(axis=1)).ravel()
    if not p > 0 or p * deg.max(initial=0) >= 1:
        raise DispersionError(f"step probability {p} is unstable for maximum degree {int(deg.max(initial=0))}")
    if not stop_ratio > 1:
        raise DispersionError("stop ratio must exceed 1")


def _spread_ratio(P: np.ndarray) -> float:
    """max over rows of max_j P / min_j P (inf while some entry is not positive)."""
    lo = P.min(axis=-1)
    if np.any(lo <= 0):
        return math.inf
    return float(np.max(P.max(axis=-1) / lo))


# --------------------------------------------------------------- simulation
def simulate(g, p: float = DEFAULT_P, stop_ratio: float = DEFAULT_STOP_RATIO, *,
             horizon: int | None = None, max_steps: int = DEFAULT_MAX_STEPS,
             method: str = "auto") -> DispersionTable:
    """Simulated dispersion on a tile graph (or a plain adjacency matrix).

    The horizon T is the first step at which every row has
    max_j P / min_j P <= ``stop_ratio``, unless ``horizon`` fixes it.
    ``method`` is ``dp`` (literal recurrence, every step stored),
    ``spectral``, or ``auto`` (dp whenever the dense table fits the budget).
    """
    a = _adjacency(g)
    _validate(a, p, stop_ratio)
    if method not in ("auto", "dp", "spectral"):
        raise DispersionError(f"unknown method {method!r}")
    n = a.shape[0]
    if method == "dp" or (method == "auto" and horizon is not None and (horizon + 1) * n * n <= DENSE_BUDGET):
        return _simulate_dp(a, p, stop_ratio, horizon, max_steps)
    mu, V = _eigen(a, p)
    T = horizon if horizon is not None else _spectral_horizon(mu, V, stop_ratio, max_steps)
    if method == "auto" and (T + 1) * n * n <= DENSE_BUDGET:
        return _simulate_dp(a, p, stop_ratio, horizon, max_steps)
    return DispersionTable(n, T, p, stop_ratio, "spectral", _spectral_rowmax(mu, V, T),
                           eigvals=mu, eigvecs=V)


def _simulate_dp(a, p, stop_ratio, horizon, max_steps) -> DispersionTable:
    n = a.shape[0]
    deg = np.asarray(a.sum(axis=1)).ravel()
    P = np.eye(n)
    steps = [P]
    rowmax = P.copy()
    t = 0
    while True:
        if horizon is not None:
            if t >= horizon:
                break
        elif _spread_ratio(P) <= stop_ratio:
            break
        if t >= max_steps:
            raise DispersionError(f"dispersion did not reach ratio {stop_ratio} within {max_steps} steps")
        if (t + 2) * n * n > DENSE_BUDGET:
            raise DispersionError("dense dispersion table exceeds the memory budget; use the spectral method")
        # sum over neighbours k of j of P[i, k]: (P A)[i, j], A symmetric
        P = P + p * (np.asarray(a @ P.T).T - P * deg[None, :])
        steps.append(P)
        np.maximum(rowmax, P, out=rowmax)
        t += 1
    return DispersionTable(n, t, p, stop_ratio, "dense", rowmax, P=np.stack(steps))


def _eigen(a, p):
    lap = (sparse.diags(np.asarray(a.sum(axis=1)).ravel()) - a).toarray()
    lam, V = np.linalg.eigh(lap)
    mu = 1.0 - p * lam
    return mu, V


def _spectral_matrix(mu, V, t: float) -> np.ndarray:
    return (V * np.power(mu, float(t))) @ V.T


def _spectral_horizon(mu, V, stop_ratio, max_steps) -> int:
    """First t with spread ratio <= stop_ratio (ratio assumed nonincreasing)."""
    def ok(t):
        return _spread_ratio(_spectral_matrix(mu, V, t)) <= stop_ratio

    if ok(0):
        return 0
    hi = 1
    while not ok(hi):
        if hi >= max_steps:
            raise DispersionError(f"dispersion did not reach ratio {stop_ratio} within {max_steps} steps")
        hi = min(2 * hi, max_steps)
    lo = hi // 2
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if ok(mid):
            hi = mid
        else:
            lo = mid
    return hi


def _spectral_rowmax(mu, V, T: int, grid: int = 400) -> np.ndarray:
    """max_t P[i, j, t] over t in [0, T].

    P[i, j, .] is smooth in t for small p; it is sampled on a log-spaced
    grid and each interior maximum refined by a parabola through the three
    samples around it.
    """
    if T <= grid:
        ts = np.arange(T + 1, dtype=float)
    else:
        ts = np.unique(np.concatenate([np.arange(0, 64), np.geomspace(64, T, grid - 64).round()]))
    n = len(mu)
    best = np.full((n, n), -np.inf)
    arg = np.zeros((n, n), dtype=np.int64)
    prev2 = prev1 = None
    left = np.zeros((n, n))
    right = np.zeros((n, n))
    for k, t in enumerate(ts):
        cur = _spectral_matrix(mu, V, t)
        if k >= 1:
            # entries whose running maximum is the previous sample get their right neighbour
            sel = arg == k - 1
            right[sel] = cur[sel]
        better = cur > best
        best[better] = cur[better]
        arg[better] = k
        if prev1 is not None:
            left[better] = prev1[better]
        prev2, prev1 = prev1, cur
    del prev2
    out = best.copy()
    interior = (arg > 0) & (arg < len(ts) - 1)
    if not np.any(interior) or np.any(mu <= 0):
        return out
    k = arg[interior]
    x0, x1, x2 = ts[k - 1], ts[k], ts[k + 1]
    y0, y1, y2 = left[interior], best[interior], right[interior]
    # start from the vertex of the parabola through the three samples
    d01, d12 = (y1 - y0) / (x1 - x0), (y2 - y1) / (x2 - x1)
    c2 = (d12 - d01) / (x2 - x0)
    with np.errstate(divide="ignore", invalid="ignore"):
        xv = 0.5 * (x0 + x1) - d01 / (2 * c2)
    xv = np.where((c2 < 0) & (xv > x0) & (xv < x2), xv, x1)
    lnmu = np.log(mu)
    idx = np.argwhere(interior)
    vals = np.empty(len(idx))
    for i in np.unique(idx[:, 0]):
        rows = np.flatnonzero(idx[:, 0] == i)
        c = V[i][None, :] * V[idx[rows, 1]]
        s = xv[rows]
        lo_s, hi_s = x0[rows], x2[rows]
        # Newton on the derivative, kept inside the bracketing samples
        for _ in range(4):
            pw = c * np.exp(np.outer(s, lnmu))
            d1 = pw @ lnmu
            d2 = pw @ (lnmu * lnmu)
            with np.errstate(divide="ignore", invalid="ignore"):
                s = np.where(d2 < 0, s - d1 / d2, s)
            s = np.clip(s, lo_s, hi_s)
        # the maximum over integer steps sits at one of the two neighbours
        f0 = (c * np.exp(np.outer(np.floor(s), lnmu))).sum(axis=1)
        f1 = (c * np.exp(np.outer(np.ceil(s), lnmu))).sum(axis=1)
        vals[rows] = np.maximum(f0, f1)
    out[interior] = np.maximum(best[interior], vals)
    return out


def simulate_symmetric(g: TileGraph, p: float = DEFAULT_P, stop_ratio: float = DEFAULT_STOP_RATIO, *,
                       times=None, horizon: int | None = None,
                       max_steps: int = DEFAULT_MAX_STEPS) -> DispersionTable:
    """Dispersion on a torus from a single source row.

    Translations act transitively, so P[i, T_i(x), t] = P[0, x, t].  Only
    row 0 is simulated (literal recurrence); ``times`` selects the steps to
    keep (default: all of them; the horizon is always kept).
    """
    try:
        trans = torus_translations(g)
    except TessellationError as exc:
        raise DispersionError(f"symmetric dispersion needs a torus: {exc}") from exc
    a = _adjacency(g)
    _validate(a, p, stop_ratio)
    M = step_matrix(a, p)
    n = g.n
    keep = None if times is None else set(int(x) for x in times)
    row = np.zeros(n)
    row[0] = 1.0
    rowmax = row.copy()
    kept_t, kept = [], []
    t = 0
    while True:
        if horizon is not None:
            done = t >= horizon
        else:
            done = row.min() > 0 and row.max() / row.min() <= stop_ratio
        # the horizon itself is always kept
        if keep is None or t in keep or done:
            kept_t.append(t)
            kept.append(row.copy())
        if done:
            break
        if t >= max_steps:
            raise DispersionError(f"dispersion did not reach ratio {stop_ratio} within {max_steps} steps")
        row = M @ row
        np.maximum(rowmax, row, out=rowmax)
        t += 1
    full_max = np.empty((n, n))
    for i in range(n):
        full_max[i, trans[i]] = rowmax
    return DispersionTable(n, t, p, stop_ratio, "translated", full_max,
                           times=np.array(kept_t, dtype=np.int64), base_rows=np.array(kept),
                           translation=trans)


# ------------------------------------------------------------- binary cache
_MAGIC = b"TSDISP01"


def save_table(table: DispersionTable, path) -> None:
    """Write a table: magic, little-endian u32 header length, JSON header, then
    the arrays as little-endian float64 (int64 for index arrays)."""
    arrays = {}
    for name in ("rowmax", "P", "eigvals", "eigvecs", "times", "base_rows", "translation"):
        v = getattr(table, name)
        if v is not None:
            arrays[name] = v
    header = {
        "n": table.n, "T": table.T, "p": table.p, "stop_ratio": table.stop_ratio, "kind": table.kind,
        "arrays": [[k, list(v.shape), "i8" if v.dtype.kind == "i" else "f8"] for k, v in arrays.items()],
    }
    raw = json.dumps(header, sort_keys=True).encode()
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(path.suffix + ".tmp")
    with open(tmp, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<I", len(raw)))
        fh.write(raw)
        for k, v in arrays.items():
            fh.write(np.ascontiguousarray(v, dtype="<i8" if v.dtype.kind == "i" else "<f8").tobytes())
    tmp.replace(path)


def load_table(path) -> DispersionTable:
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:8] != _MAGIC:
        raise DispersionError(f"{path}: not a dispersion table")
    (hlen,) = struct.unpack("<I", data[8:12])
    header = json.loads(data[12:12 + hlen])
    off = 12 + hlen
    arrays = {}
    for name, shape, code in header["arrays"]:
        count = int(np.prod(shape)) if shape else 1
        if off + 8 * count > len(data):
            raise DispersionError(f"{path}: truncated table")
        arr = np.frombuffer(data, dtype="<" + code, count=count, offset=off).reshape(shape)
        arrays[name] = arr.astype(np.int64 if code == "i8" else np.float64)
        off += 8 * count
    if off != len(data):
        raise DispersionError(f"{path}: trailing or missing data")
    return DispersionTable(header["n"], header["T"], header["p"], header["stop_ratio"], header["kind"], **arrays)


def cached_simulate(g: TileGraph, key: str, cache_dir, p: float = DEFAULT_P,
                    stop_ratio: float = DEFAULT_STOP_RATIO) -> DispersionTable:
    """simulate() with an on-disk cache keyed by (manifold id, adjacency, p, stop ratio)."""
    digest = hashlib.sha256(np.ascontiguousarray(g.edges()).tobytes()).hexdigest()[:12]
    path = Path(cache_dir) / "dispersion" / f"{key}-n{g.n}-{digest}-p{p:g}-r{stop_ratio:g}.bin"
    if path.exists():
        try:
            table = load_table(path)
            if table.n == g.n:
                return table
        except (OSError, ValueError, KeyError):
            pass
    table = simulate(g, p, stop_ratio)
    try:
        save_table(table, path)
    except OSError:
        pass
    return table


# ------------------------------------------------------------------ Gaussian
DISTANCE_MODES = ("discrete_hops", "geometric")


@dataclass(frozen=True)
class GaussianParams:
    eta: float
    sigma0: float
    distance_mode: str = "discrete_hops"

    def __post_init__(self):
        if not self.sigma0 > 0:
            raise DispersionError("sigma0 must be positive")
        if not 0 < self.eta <= 1:
            raise DispersionError("eta must lie in (0, 1]")
        if self.distance_mode not in DISTANCE_MODES:
            raise DispersionError(f"unknown distance mode {self.distance_mode!r}")


def sigma_at(t, t_max, sigma0: float):
    return sigma0 * (1.0 - np.asarray(t, dtype=float) / t_max)


def gaussian_factor(r, t, t_max, params: GaussianParams):
    """eta * exp(-r^2 / (2 sigma(t)^2)), sigma(t) = sigma0 (1 - t/t_max);
    a point mass at r = 0 once sigma reaches 0."""
    if not 0 <= t <= t_max:
        raise DispersionError(f"iteration {t} outside 0..{t_max}")
    r = np.asarray(r, dtype=float)
    s = float(sigma_at(t, t_max, params.sigma0))
    if s <= 0:
        out = np.where(r == 0, params.eta, 0.0)
    else:
        out = params.eta * np.exp(-r * r / (2 * s * s))
    return out if out.ndim else float(out)


def schedule_f(t, t_max, T: int) -> int:
    """round(T (1 - t/t_max)^2), clamped to [0, T]."""
    if not 0 <= t <= t_max:
        raise DispersionError(f"iteration {t} outside 0..{t_max}")
    return int(min(T, max(0, round(T * (1.0 - t / t_max) ** 2))))
