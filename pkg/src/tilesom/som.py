"""Self-organizing map training on a tile graph."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .dispersion import DispersionTable, GaussianParams, gaussian_factor, schedule_f
from .geometry import distance_array
from .tessellation.graph import TileGraph, hop_distances
from .tessellation.layout import tile_centers


class SomError(ValueError):
    """Invalid training input."""


DISPERSION_MODES = ("simulated", "gaussian_discrete", "gaussian_geometric")
INIT_MODES = ("uniform_box", "sample_copy")


@dataclass(eq=False)
class Dataset:
    """Samples in R^k, one per row, with optional labels and source tiles."""

    samples: np.ndarray
    labels: np.ndarray | None = None
    source_tile: np.ndarray | None = None
    columns: list | None = None

    def __post_init__(self):
        x = np.asarray(self.samples, dtype=float)
        if x.ndim == 1:
            x = x[:, None]
        if x.ndim != 2:
            raise SomError("samples must form a 2-D array")
        if not np.all(np.isfinite(x)):
            raise SomError("samples must be finite")
        self.samples = x

    @property
    def k(self) -> int:
        return self.samples.shape[1]

    def __len__(self):
        return self.samples.shape[0]


def standardize(data: Dataset) -> Dataset:
    """Zero mean, unit variance per coordinate (constant columns only centered)."""
    x = data.samples
    sd = x.std(axis=0)
    sd[sd == 0] = 1.0
    return replace(data, samples=(x - x.mean(axis=0)) / sd)


@dataclass(frozen=True)
class TrainParams:
    t_max: int = 30000
    eta: float = 0.1
    seed: int = 0
    dispersion_mode: str = "simulated"
    init_mode: str = "uniform_box"
    # initial Gaussian radius; None means the diameter of the target
    sigma0: float | None = None

    def __post_init__(self):
        if self.t_max < 0:
            raise SomError("t_max must be nonnegative")
        if not 0 < self.eta <= 1:
            raise SomError("eta must lie in (0, 1]")
        if self.dispersion_mode not in DISPERSION_MODES:
            raise SomError(f"unknown dispersion mode {self.dispersion_mode!r}")
        if self.init_mode not in INIT_MODES:
            raise SomError(f"unknown init mode {self.init_mode!r}")


@dataclass(eq=False)
class SomState:
    weights: np.ndarray
    graph: TileGraph
    params: TrainParams
    iteration: int = 0
    rng: np.random.Generator | None = field(default=None, repr=False)


def init_weights(E: TileGraph, data: Dataset, params: TrainParams) -> SomState:
    """Random initial weights: uniform in the bounding box of the data, or
    copies of uniformly chosen samples."""
    if len(data) == 0:
        raise SomError("empty dataset")
    rng = np.random.default_rng(params.seed)
    x = data.samples
    if params.init_mode == "uniform_box":
        lo, hi = x.min(axis=0), x.max(axis=0)
        w = lo + (hi - lo) * rng.random((E.n, data.k))
    else:
        w = x[rng.integers(0, len(data), E.n)].copy()
    return SomState(w, E, params, 0, rng)


def _sqdist(w: np.ndarray, x: np.ndarray) -> np.ndarray:
    d = w - x
    return np.einsum("ij,ij->i", d, d)


def best_matching_unit(state: SomState, x) -> int:
    """Tile whose weight is nearest to x; ties go to the lowest index."""
    x = np.asarray(x, dtype=float)
    if x.shape != (state.weights.shape[1],):
        raise SomError(f"sample has shape {x.shape}, weights have dimension {state.weights.shape[1]}")
    return int(np.argmin(_sqdist(state.weights, x)))


def assign(state: SomState, data: Dataset) -> np.ndarray:
    """BMU of every sample."""
    return np.array([best_matching_unit(state, x) for x in data.samples], dtype=np.int64)


# ------------------------------------------------------------ neighbourhoods
def distance_matrix(g: TileGraph, mode: str = "discrete_hops") -> np.ndarray:
    """Tile-to-tile distances used by the Gaussian neighbourhood (cached on g)."""
    key = f"dist_{mode}"
    if key not in g.extra:
        if mode == "discrete_hops":
            hop_distances(g)
        elif mode == "geometric":
            if g.closed and not (g.geometry.curvature_sign > 0 and g.euler_characteristic == 2):
                raise SomError("geometric distances are only offered for disks and spheres")
            c = tile_centers(g)
            g.extra[key] = distance_array(c[:, None, :], c[None, :, :], g.geometry)
        else:
            raise SomError(f"unknown distance mode {mode!r}")
    return g.extra[key]


class Neighborhood:
    """Update factors for every tile given the winner and the iteration."""

    def factors(self, winner: int, t: int, t_max: int) -> np.ndarray:
        raise NotImplementedError


class SimulatedNeighborhood(Neighborhood):
    def __init__(self, table: DispersionTable, eta: float):
        self.table, self.eta = table, eta

    def factors(self, winner, t, t_max):
        return self.eta * self.table.factor_row(winner, schedule_f(t, t_max, self.table.T))


class GaussianNeighborhood(Neighborhood):
    def __init__(self, params: GaussianParams, dist: np.ndarray):
        self.params, self.dist = params, dist

    def factors(self, winner, t, t_max):
        return gaussian_factor(self.dist[winner], t, t_max, self.params)


def make_neighborhood(E: TileGraph, params: TrainParams, dispersion=None) -> Neighborhood:
    """Neighbourhood for ``params.dispersion_mode``; ``dispersion`` is the
    DispersionTable in simulated mode and optionally GaussianParams otherwise."""
    if isinstance(dispersion, Neighborhood):
        return dispersion
    if isinstance(dispersion, GaussianParams):
        return GaussianNeighborhood(dispersion, distance_matrix(E, dispersion.distance_mode))
    if params.dispersion_mode == "simulated":
        if not isinstance(dispersion, DispersionTable):
            raise SomError("simulated dispersion needs a DispersionTable")
        if dispersion.n != E.n:
            raise SomError(f"dispersion table has {dispersion.n} tiles, the map has {E.n}")
        return SimulatedNeighborhood(dispersion, params.eta)
    mode = "discrete_hops" if params.dispersion_mode == "gaussian_discrete" else "geometric"
    dist = distance_matrix(E, mode)
    sigma0 = params.sigma0 if params.sigma0 is not None else float(dist.max())
    return GaussianNeighborhood(GaussianParams(params.eta, max(sigma0, 1e-12), mode), dist)


# ------------------------------------------------------------------ training
def train_step(state: SomState, x, t: int, disp, t_max: int | None = None) -> int:
    """One competition + adaptation step; returns the winner.

    ``disp`` is a DispersionTable, GaussianParams or a Neighborhood.
    """
    t_max = state.params.t_max if t_max is None else t_max
    if not 0 <= t < max(t_max, 1):
        raise SomError(f"iteration {t} outside 0..{t_max - 1}")
    nb = disp if isinstance(disp, Neighborhood) else make_neighborhood(state.graph, state.params, disp)
    x = np.asarray(x, dtype=float)
    i = best_matching_unit(state, x)
    f = nb.factors(i, t, t_max)
    state.weights += f[:, None] * (x - state.weights)
    state.iteration = t + 1
    return i


@dataclass(eq=False)
class TrainResult:
    state: SomState
    assignment: np.ndarray


def train(E: TileGraph, data: Dataset, params: TrainParams, dispersion=None,
          state: SomState | None = None) -> TrainResult:
    """t_max iterations, each on a sample drawn uniformly with replacement."""
    if state is None:
        state = init_weights(E, data, params)
    nb = make_neighborhood(E, params, dispersion)
    rng = state.rng if state.rng is not None else np.random.default_rng(params.seed)
    picks = rng.integers(0, len(data), params.t_max)
    x = data.samples
    w = state.weights
    for t in range(params.t_max):
        xt = x[picks[t]]
        i = int(np.argmin(_sqdist(w, xt)))
        f = nb.factors(i, t, params.t_max)
        w += f[:, None] * (xt - w)
    state.iteration = params.t_max
    return TrainResult(state, assign(state, data))


def umatrix(state: SomState) -> np.ndarray:
    """Mean weight-space distance from each tile to its neighbours."""
    w = state.weights
    out = np.zeros(state.graph.n)
    for t, nb in enumerate(state.graph.adjacency):
        if nb:
            out[t] = float(np.mean(np.linalg.norm(w[list(nb)] - w[t], axis=1)))
    return out


# ------------------------------------------------------------- weight dumps
def dump_weights(state: SomState, path, manifold_id: str | None = None) -> None:
    n, k = state.weights.shape
    name = manifold_id or state.graph.name
    if not name or any(c.isspace() for c in name):
        raise SomError(f"manifold id {name!r} must be a single token")
    lines = [f"som {name} {n} {k} {state.params.seed}"]
    lines += [" ".join(repr(float(v)) for v in row) for row in state.weights]
    Path(path).write_text("\n".join(lines) + "\n")


def load_weights(path) -> tuple[dict, np.ndarray]:
    """Returns ({manifold, n, k, seed}, weights)."""
    text = Path(path).read_text().splitlines()
    head = text[0].split() if text else []
    if len(head) != 5 or head[0] != "som":
        raise SomError(f"{path}: missing 'som <manifold> <n> <k> <seed>' header")
    n, k, seed = int(head[2]), int(head[3]), int(head[4])
    rows = [line.split() for line in text[1:] if line.strip()]
    w = np.array(rows, dtype=float).reshape(-1, k) if rows else np.zeros((0, k))
    if w.shape != (n, k) or any(len(r) != k for r in rows):
        raise SomError(f"{path}: expected {n} rows of {k} values")
    return {"manifold": head[1], "n": n, "k": k, "seed": seed}, w
