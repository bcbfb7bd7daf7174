"""Experiment runner: manifold pairs x dispersion modes x repetitions."""

from __future__ import annotations

import csv
import hashlib
import json
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from . import datagen, dispersion, metrics, som
from .tessellation import catalog

CONFIG_VERSION = 1
METRIC_COLUMNS = ("energy", "kendall_unfitness", "tears1", "villmann", "villmann_censored")
SIGNIFICANCE = 0.01


class ConfigError(ValueError):
    """Malformed or unresolvable experiment configuration."""


@dataclass
class ExperimentConfig:
    pairs: list
    repetitions: int = 10
    base_seed: int = 1
    modes: list = field(default_factory=lambda: ["simulated", "gaussian_discrete"])
    t_max: int = 30000
    eta: float = 0.1
    init_mode: str = "uniform_box"
    sigma0: float | None = None
    p: float = dispersion.DEFAULT_P
    stop_ratio: float = dispersion.DEFAULT_STOP_RATIO
    density: int = 1
    methods: dict = field(default_factory=dict)
    landscape_dim: int = datagen.DEFAULT_LANDSCAPE_DIM
    output: str = "results.csv"
    threads: int = 1

    def validate(self) -> None:
        if not self.pairs:
            raise ConfigError("the experiment has no manifold pairs")
        if self.repetitions < 1:
            raise ConfigError("repetitions must be at least 1")
        known = set(catalog.manifold_names())
        for pair in self.pairs:
            if len(pair) != 2:
                raise ConfigError(f"pair {pair!r} must name an origin and a target")
            for name in pair:
                if name not in known:
                    raise ConfigError(f"unknown manifold {name!r}")
        for m in self.modes:
            if m not in som.DISPERSION_MODES:
                raise ConfigError(f"unknown dispersion mode {m!r}")
        if not self.modes:
            raise ConfigError("no dispersion modes selected")
        if self.density not in (1, 2):
            raise ConfigError("density must be 1 or 2")
        for name, method in self.methods.items():
            if method not in datagen.METHODS + ("landscape",):
                raise ConfigError(f"unknown embedding method {method!r} for {name}")
        som.TrainParams(t_max=self.t_max, eta=self.eta, init_mode=self.init_mode)


_KEYS = {
    "version", "pairs", "origins", "targets", "self_pairs", "repetitions", "base_seed", "modes", "train",
    "dispersion", "density", "methods", "landscape_dim", "output", "threads", "description",
}


BUILTIN_CONFIGS = resources.files("tilesom") / "data" / "configs"


def builtin_configs() -> list[str]:
    return sorted(p.name[:-5] for p in BUILTIN_CONFIGS.iterdir() if p.name.endswith(".json"))


def load_config(path) -> ExperimentConfig:
    """Read a JSON experiment configuration (see README for the keys).

    ``path`` may also name a built-in configuration (``desk``, ``full``, ``smoke``).
    """
    source = Path(path)
    if not source.exists() and str(path) in builtin_configs():
        source = BUILTIN_CONFIGS / f"{path}.json"
    try:
        raw = json.loads(source.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return config_from_dict(raw)


def config_from_dict(raw: dict) -> ExperimentConfig:
    """Output paths are relative to the working directory."""
    if not isinstance(raw, dict):
        raise ConfigError("configuration must be a JSON object")
    unknown = set(raw) - _KEYS
    if unknown:
        raise ConfigError(f"unknown configuration keys: {sorted(unknown)}")
    if raw.get("version", CONFIG_VERSION) != CONFIG_VERSION:
        raise ConfigError(f"unsupported configuration version {raw.get('version')!r}")
    pairs = [list(p) for p in raw.get("pairs", [])]
    origins, targets = raw.get("origins", []), raw.get("targets")
    if raw.get("self_pairs"):
        pairs += [[o, o] for o in origins]
    elif origins:
        pairs += [[o, t] for o in origins for t in (targets if targets is not None else origins)]
    train = raw.get("train", {})
    disp = raw.get("dispersion", {})
    unknown = set(train) - {"t_max", "eta", "init_mode", "sigma0"}
    unknown |= set(disp) - {"p", "stop_ratio"}
    if unknown:
        raise ConfigError(f"unknown train/dispersion keys: {sorted(unknown)}")
    out = raw.get("output", "results.csv")
    try:
        cfg = ExperimentConfig(
            pairs=pairs,
            repetitions=int(raw.get("repetitions", 10)),
            base_seed=int(raw.get("base_seed", 1)),
            modes=list(raw.get("modes", ["simulated", "gaussian_discrete"])),
            t_max=int(train.get("t_max", 30000)),
            eta=float(train.get("eta", 0.1)),
            init_mode=train.get("init_mode", "uniform_box"),
            sigma0=train.get("sigma0"),
            p=float(disp.get("p", dispersion.DEFAULT_P)),
            stop_ratio=float(disp.get("stop_ratio", dispersion.DEFAULT_STOP_RATIO)),
            density=int(raw.get("density", 1)),
            methods=dict(raw.get("methods", {})),
            landscape_dim=int(raw.get("landscape_dim", datagen.DEFAULT_LANDSCAPE_DIM)),
            output=str(out),
            threads=int(raw.get("threads", 1)),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    try:
        cfg.validate()
    except som.SomError as exc:
        raise ConfigError(str(exc)) from exc
    return cfg


def run_seed(base_seed: int, origin: str, target: str, rep: int) -> int:
    """Seed shared by all dispersion modes of one repetition of a pair."""
    h = hashlib.sha256(f"{base_seed}|{origin}|{target}|{rep}".encode()).digest()
    return int.from_bytes(h[:4], "little") & 0x7FFFFFFF


# -------------------------------------------------------------------- runs
@dataclass(frozen=True)
class RunKey:
    origin: str
    target: str
    mode: str
    rep: int
    seed: int


def plan(cfg: ExperimentConfig) -> list[RunKey]:
    """All runs in output order: pair, then repetition, then mode."""
    out = []
    for o, e in cfg.pairs:
        for rep in range(cfg.repetitions):
            seed = run_seed(cfg.base_seed, o, e, rep)
            for mode in cfg.modes:
                out.append(RunKey(o, e, mode, rep, seed))
    return out


_DATA_CACHE: dict = {}


def dataset_for(O, method: str | None, seed: int, dim: int):
    key = (O.name, O.goldberg, method, seed, dim)
    if key not in _DATA_CACHE:
        if len(_DATA_CACHE) > 64:
            _DATA_CACHE.clear()
        _DATA_CACHE[key] = datagen.embed(O, method, seed=seed, dim=dim)
    return _DATA_CACHE[key]


def neighborhood_for(E, cfg: ExperimentConfig, mode: str, cache_dir):
    if mode == "simulated":
        key = f"{E.name}-x{cfg.density}"
        return dispersion.cached_simulate(E, key, cache_dir, cfg.p, cfg.stop_ratio)
    return None


def execute(key: RunKey, cfg: ExperimentConfig, cache_dir=None) -> metrics.QualityReport:
    """One training run and its quality report (an error row on failure)."""
    cache_dir = cache_dir or catalog.cache_dir()
    method = cfg.methods.get(key.origin)
    rep = metrics.QualityReport(key.origin, key.target, method or "", key.mode, key.seed)
    t0 = time.perf_counter()
    try:
        O = catalog.build(key.origin, cfg.density)
        E = catalog.build(key.target, cfg.density)
        data = dataset_for(O, method, key.seed, cfg.landscape_dim)
        rep.method = data.method
        params = som.TrainParams(t_max=cfg.t_max, eta=cfg.eta, seed=key.seed, dispersion_mode=key.mode,
                                 init_mode=cfg.init_mode, sigma0=cfg.sigma0)
        disp = neighborhood_for(E, cfg, key.mode, cache_dir)
        result = som.train(E, data, params, disp)
        res = metrics.EmbeddingResult(result.assignment, O, E, result.state.weights, data.samples)
        full = metrics.evaluate(res, method=data.method, dispersion_mode=key.mode, seed=key.seed)
        full.origin, full.target = key.origin, key.target
        rep = full
    except Exception as exc:  # recorded as an error row; the experiment continues
        rep.error = f"{type(exc).__name__}: {exc}".replace("\n", " ")
    rep.runtime_ms = round(1000 * (time.perf_counter() - t0), 1)
    return rep


def _execute_star(args):
    return execute(*args)


def run_experiment(cfg: ExperimentConfig, output=None, cache_dir=None, threads: int | None = None,
                   progress=None) -> list[metrics.QualityReport]:
    """Run every planned (pair, mode, repetition) and write the CSV.

    Rows are written in plan order as they complete; the file is replaced
    atomically at the end.
    """
    cfg.validate()
    output = Path(output or cfg.output)
    cache_dir = cache_dir or catalog.cache_dir()
    keys = plan(cfg)
    threads = threads or cfg.threads or 1
    tmp = output.with_suffix(output.suffix + ".partial")
    output.parent.mkdir(parents=True, exist_ok=True)
    rows = []
    with open(tmp, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(metrics.CSV_COLUMNS)
        if threads > 1:
            pool = ProcessPoolExecutor(max_workers=threads)
            results = pool.map(_execute_star, [(k, cfg, cache_dir) for k in keys])
        else:
            pool = None
            results = (execute(k, cfg, cache_dir) for k in keys)
        try:
            for i, rep in enumerate(results):
                rows.append(rep)
                d = rep.__dict__
                w.writerow([metrics._fmt(d[c]) for c in metrics.CSV_COLUMNS])
                fh.flush()
                if progress:
                    progress(i + 1, len(keys), rep)
        finally:
            if pool is not None:
                pool.shutdown()
    os.replace(tmp, output)
    return rows


# -------------------------------------------------------------- comparisons
@dataclass
class ComparisonRow:
    group: str
    gaussian_mode: str
    metric: str
    n: int
    median_simulated: float
    median_gaussian: float
    mean_simulated: float
    mean_gaussian: float
    median_difference: float
    p_greater: float | None
    p_less: float | None
    p_two_sided: float | None
    significant: bool
    note: str = ""


@dataclass
class ComparisonReport:
    rows: list
    orphans: list

    def to_csv(self, path) -> None:
        cols = list(ComparisonRow.__dataclass_fields__)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(cols)
            for r in self.rows:
                w.writerow([metrics._fmt(getattr(r, c)) for c in cols])

    def text(self) -> str:
        lines = [f"{'group':<24} {'mode':<19} {'metric':<18} {'n':>4} {'med sim':>9} {'med gau':>9} "
                 f"{'med diff':>9} {'p(sim better)':>14}  sig"]
        for r in self.rows:
            p = "undefined" if r.p_greater is None else f"{r.p_greater:.3g}"
            lines.append(f"{r.group:<24} {r.gaussian_mode:<19} {r.metric:<18} {r.n:>4} {r.median_simulated:>9.4g} "
                         f"{r.median_gaussian:>9.4g} {r.median_difference:>9.4g} {p:>14}  "
                         f"{'yes' if r.significant else 'no'}{('  ' + r.note) if r.note else ''}")
        if self.orphans:
            lines.append(f"{len(self.orphans)} unpaired rows:")
            lines += [f"  {o}" for o in self.orphans]
        return "\n".join(lines)


def compare_dispersions(reports, significance: float = SIGNIFICANCE) -> ComparisonReport:
    """Paired differences (Gaussian - simulated) per metric, per pair and pooled.

    All measures are better when lower, so "simulated better" is the
    alternative that the differences are positive.
    """
    ok = [r for r in reports if not r.error]
    by_key: dict = {}
    for r in ok:
        by_key.setdefault((r.origin, r.target, r.seed), {})[r.dispersion_mode] = r
    orphans = []
    paired: dict = {}
    for key, modes in sorted(by_key.items()):
        if "simulated" not in modes or len(modes) < 2:
            orphans += [f"{key[0]} -> {key[1]} seed {key[2]} mode {m}" for m in sorted(modes)]
            continue
        for m, r in modes.items():
            if m != "simulated":
                paired.setdefault(m, []).append((modes["simulated"], r))
    rows = []
    for gmode in sorted(paired):
        pairs = paired[gmode]
        groups = {"all": pairs}
        for s, g in pairs:
            groups.setdefault(f"{s.origin}->{s.target}", []).append((s, g))
        for name in ["all"] + sorted(k for k in groups if k != "all"):
            for metric in METRIC_COLUMNS:
                vals = [(getattr(s, metric), getattr(g, metric)) for s, g in groups[name]]
                vals = [(a, b) for a, b in vals if a is not None and b is not None]
                if not vals:
                    continue
                sim = np.array([a for a, _ in vals], dtype=float)
                gau = np.array([b for _, b in vals], dtype=float)
                diff = gau - sim
                note = ""
                try:
                    pg = metrics.wilcoxon_signed_rank(diff, "greater")
                    pl = metrics.wilcoxon_signed_rank(diff, "less")
                    pt = metrics.wilcoxon_signed_rank(diff, "two_sided")
                except metrics.MetricError:
                    pg = pl = pt = None
                    note = "all differences zero"
                rows.append(ComparisonRow(
                    name, gmode, metric, len(vals), float(np.median(sim)), float(np.median(gau)),
                    float(sim.mean()), float(gau.mean()), float(np.median(diff)), pg, pl, pt,
                    bool(pg is not None and pg < significance), note))
    return ComparisonReport(rows, orphans)
