"""Quality of an embedding e: T_O -> T_E produced by a trained map."""

from __future__ import annotations

import csv
import math
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import shortest_path
from scipy.spatial.distance import cdist
from scipy.stats import norm, rankdata

from .tessellation.graph import TileGraph, hop_distances


class MetricError(ValueError):
    """Undefined metric value or invalid input."""


VILLMANN_CENSOR = 8
TIE_TOLERANCE = 1e-9


@dataclass(eq=False)
class EmbeddingResult:
    """``e[t]`` is the E-tile hit by the sample of O-tile t."""

    e: np.ndarray
    O: TileGraph
    E: TileGraph
    weights: np.ndarray | None = None
    samples: np.ndarray | None = None

    def __post_init__(self):
        self.e = np.asarray(self.e, dtype=np.int64)
        if self.e.shape != (self.O.n,):
            raise MetricError(f"embedding has {self.e.shape[0]} entries for {self.O.n} tiles")
        if self.e.size and (self.e.min() < 0 or self.e.max() >= self.E.n):
            raise MetricError("embedding targets must be tiles of E")


# -------------------------------------------------------------------- energy
def energy(res: EmbeddingResult) -> float:
    """Mean over O-edges of (hop distance of the images)^2 - 1."""
    edges = res.O.edges()
    if len(edges) == 0:
        return 0.0
    d = hop_distances(res.E)[res.e[edges[:, 0]], res.e[edges[:, 1]]].astype(np.int64)
    return float(np.sum(d * d - 1)) / len(edges)


# ------------------------------------------------------------------- Kendall
def count_inversions(r) -> int:
    """Number of pairs i < j with r[i] > r[j] (bottom-up merge, vectorized)."""
    cur = np.asarray(r)
    n = len(cur)
    if n < 2:
        return 0
    _, cur = np.unique(cur, return_inverse=True)
    cur = cur.astype(np.int64)
    M = int(cur.max()) + 1
    idx = np.arange(n)
    inv = 0
    w = 1
    while w < n:
        blk = idx // (2 * w)
        right = (idx % (2 * w)) >= w
        key = blk * M + cur
        left_keys = key[~right]
        rk, rb = key[right], blk[right]
        # left elements of the same block that are strictly greater
        end = np.searchsorted(left_keys, (rb + 1) * M, side="left")
        above = np.searchsorted(left_keys, rk, side="right")
        inv += int(np.sum(end - above))
        cur = cur[np.argsort(key, kind="stable")]
        w *= 2
    return inv


def _tied_pairs(x) -> int:
    _, c = np.unique(x, return_counts=True)
    c = c.astype(np.int64)
    return int(np.sum(c * (c - 1) // 2))


def kendall_from_distances(dO, dE) -> float:
    """Kendall coefficient k = (concordant - discordant) / (pairs with dO differing)."""
    dO = np.asarray(dO)
    dE = np.asarray(dE)
    P = len(dO)
    n0 = P * (P - 1) // 2
    n1 = _tied_pairs(dO)
    if n0 - n1 == 0:
        raise MetricError("all original distances are equal; Kendall coefficient undefined")
    n2 = _tied_pairs(dE)
    both = np.stack([dO, dE], axis=1)
    _, c = np.unique(both, axis=0, return_counts=True)
    c = c.astype(np.int64)
    n3 = int(np.sum(c * (c - 1) // 2))
    order = np.lexsort((dE, dO))
    disc = count_inversions(dE[order])
    conc = n0 - n1 - n2 + n3 - disc
    return (conc - disc) / (n0 - n1)


def pair_distances(res: EmbeddingResult):
    """(d_O, d_E) over all unordered pairs of O-tiles."""
    n = res.O.n
    iu, ju = np.triu_indices(n, 1)
    dO = hop_distances(res.O)[iu, ju]
    dE = hop_distances(res.E)[res.e[iu], res.e[ju]]
    return dO, dE


def kendall_unfitness(res: EmbeddingResult) -> float:
    """100 (1 - k); 0 for a perfectly monotone map, 200 for an anti-monotone one."""
    if res.O.n < 2:
        raise MetricError("Kendall unfitness needs at least 2 tiles")
    return 100.0 * (1.0 - kendall_from_distances(*pair_distances(res)))


# --------------------------------------------------------------------- tears
def tears(res: EmbeddingResult, r: int = 1) -> int:
    """Empty E-tiles lying on a geodesic between two occupied tiles within distance r."""
    if not (res.O.closed and res.E.closed):
        raise MetricError("tears are only defined when both manifolds are closed")
    return tears_from_occupancy(hop_distances(res.E), np.unique(res.e), r)


def tears_from_occupancy(dist: np.ndarray, occupied, r: int = 1) -> int:
    n = dist.shape[0]
    occ = np.zeros(n, dtype=bool)
    occ[np.asarray(occupied, dtype=np.int64)] = True
    occ_idx = np.flatnonzero(occ)
    count = 0
    for t in np.flatnonzero(~occ):
        near = occ_idx[dist[t, occ_idx] <= r]
        if len(near) < 2:
            continue
        dt = dist[t, near]
        if np.any(dt[:, None] + dt[None, :] == dist[np.ix_(near, near)]):
            count += 1
    return count


# ------------------------------------------------------------------ Villmann
def villmann_graph(res: EmbeddingResult, tie_tol: float = TIE_TOLERANCE):
    """Edges of the data-induced graph G_V on E-tiles.

    p_t is the sample nearest to weight w_t; each sample belongs to the
    cell of its nearest p_t.  Cells are adjacent when an O-edge joins
    samples of both, or when a sample is (within ``tie_tol``) equally near
    to both representatives.
    """
    if res.weights is None or res.samples is None:
        raise MetricError("Villmann measure needs the trained weights and the data")
    x = np.asarray(res.samples, dtype=float)
    if len(x) == 0:
        raise MetricError("no data samples")
    w = np.asarray(res.weights, dtype=float)
    rep = np.argmin(cdist(w, x), axis=1)
    d = cdist(x, x[rep])
    best = d.min(axis=1)
    near = d <= best[:, None] + tie_tol
    owner = np.argmax(near, axis=1)
    edges = set()
    for s in range(len(x)):
        ts = np.flatnonzero(near[s])
        for a in range(len(ts)):
            for b in range(a + 1, len(ts)):
                edges.add((int(ts[a]), int(ts[b])))
    oe = res.O.edges()
    if len(oe) and len(x) == res.O.n:
        a, b = owner[oe[:, 0]], owner[oe[:, 1]]
        for u, v in zip(a[a != b], b[a != b]):
            edges.add((int(min(u, v)), int(max(u, v))))
    return sorted(edges)


def villmann(res: EmbeddingResult, tie_tol: float = TIE_TOLERANCE) -> int:
    """max over E-edges of d_V + max over G_V-edges of d_E - 2."""
    E = res.E
    n = E.n
    ev = villmann_graph(res, tie_tol)
    dE = hop_distances(E)
    if ev:
        ev_arr = np.array(ev, dtype=np.int64)
        a = csr_matrix((np.ones(len(ev_arr)), (ev_arr[:, 0], ev_arr[:, 1])), shape=(n, n))
        dV = shortest_path(a, unweighted=True, directed=False)
    else:
        ev_arr = np.zeros((0, 2), dtype=np.int64)
        dV = np.where(np.eye(n, dtype=bool), 0.0, np.inf)
    finite = dV[np.isfinite(dV)]
    penalty = int(dE.max()) + int(finite.max() if finite.size else 0) + 1
    ee = E.edges()
    first = dV[ee[:, 0], ee[:, 1]] if len(ee) else np.zeros(1)
    first = np.where(np.isfinite(first), first, penalty)
    second = dE[ev_arr[:, 0], ev_arr[:, 1]] if len(ev_arr) else np.zeros(1)
    return int(first.max()) + int(second.max()) - 2


def censor_villmann(v: int, threshold: int = VILLMANN_CENSOR) -> int:
    return 0 if v < threshold else int(v)


# ------------------------------------------------------------------ Wilcoxon
ALTERNATIVES = ("two_sided", "less", "greater")
EXACT_MAX_N = 25


def signed_rank_distribution(ranks):
    """Null distribution of W+ for the given ranks (half-integers allowed).

    Returns (support, probabilities) with support in units of W+.
    """
    doubled = np.rint(2 * np.asarray(ranks, dtype=float)).astype(np.int64)
    total = int(doubled.sum())
    counts = np.zeros(total + 1, dtype=np.float64)
    counts[0] = 1.0
    for r in doubled:
        shifted = np.zeros_like(counts)
        shifted[r:] = counts[:total + 1 - r]
        counts = counts + shifted
    probs = counts / 2.0 ** len(doubled)
    support = np.arange(total + 1) / 2.0
    keep = probs > 0
    return support[keep], probs[keep]


def wilcoxon_signed_rank(differences, alternative: str = "two_sided") -> float:
    """p-value of the signed-rank test (zeros dropped, average ranks for ties).

    Exact null distribution up to 25 nonzero differences, normal
    approximation with tie correction beyond.  ``greater`` tests whether
    the differences tend to be positive.
    """
    if alternative not in ALTERNATIVES:
        raise MetricError(f"unknown alternative {alternative!r}")
    d = np.asarray(differences, dtype=float)
    d = d[d != 0]
    n = len(d)
    if n == 0:
        raise MetricError("all differences are zero; the signed-rank test is undefined")
    ranks = rankdata(np.abs(d))
    w = float(ranks[d > 0].sum())
    if n <= EXACT_MAX_N:
        support, probs = signed_rank_distribution(ranks)
        p_ge = float(probs[support >= w - 1e-9].sum())
        p_le = float(probs[support <= w + 1e-9].sum())
    else:
        mean = n * (n + 1) / 4.0
        _, t = np.unique(ranks, return_counts=True)
        var = n * (n + 1) * (2 * n + 1) / 24.0 - float(np.sum(t ** 3 - t)) / 48.0
        z = (w - mean) / math.sqrt(var)
        p_ge = float(norm.sf(z))
        p_le = float(norm.cdf(z))
    if alternative == "greater":
        return min(1.0, p_ge)
    if alternative == "less":
        return min(1.0, p_le)
    return min(1.0, 2.0 * min(p_ge, p_le))


# ------------------------------------------------------------------- reports
@dataclass
class QualityReport:
    origin: str
    target: str
    method: str
    dispersion_mode: str
    seed: int
    energy: float | None = None
    kendall_unfitness: float | None = None
    tears1: int | None = None
    villmann: int | None = None
    villmann_censored: int | None = None
    runtime_ms: float | None = None
    error: str = ""


CSV_COLUMNS = [f.name for f in fields(QualityReport)]


def evaluate(res: EmbeddingResult, **key) -> QualityReport:
    """All measures for one embedding; ``key`` fills origin/target/method/mode/seed."""
    rep = QualityReport(**{"origin": res.O.name, "target": res.E.name, "method": "", "dispersion_mode": "",
                           "seed": 0, **key})
    rep.energy = energy(res)
    rep.kendall_unfitness = kendall_unfitness(res)
    rep.tears1 = tears(res, 1) if (res.O.closed and res.E.closed) else None
    if res.weights is not None and res.samples is not None:
        rep.villmann = villmann(res)
        rep.villmann_censored = censor_villmann(rep.villmann)
    return rep


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_reports(reports, path, append: bool = False) -> None:
    path = Path(path)
    new = not (append and path.exists() and path.stat().st_size > 0)
    with open(path, "a" if append else "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        if new:
            w.writerow(CSV_COLUMNS)
        for r in reports:
            d = asdict(r)
            w.writerow([_fmt(d[c]) for c in CSV_COLUMNS])


def read_reports(path) -> list[QualityReport]:
    out = []
    with open(path, newline="") as fh:
        rd = csv.DictReader(fh)
        missing = set(CSV_COLUMNS) - set(rd.fieldnames or []) - {"error"}
        if missing:
            raise MetricError(f"{path}: missing columns {sorted(missing)}")
        for row in rd:
            def num(k, cast):
                v = row.get(k, "")
                return cast(float(v)) if v not in ("", None) else None
            out.append(QualityReport(
                row["origin"], row["target"], row["method"], row["dispersion_mode"], int(row["seed"]),
                num("energy", float), num("kendall_unfitness", float), num("tears1", int),
                num("villmann", int), num("villmann_censored", int), num("runtime_ms", float),
                row.get("error", "") or ""))
    return out
