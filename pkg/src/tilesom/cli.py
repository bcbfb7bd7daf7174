"""Command-line interface: ``tilesom <command> ...``.

Exit codes: 0 success, 1 invalid input or failed check, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import datagen, dispersion, harness, metrics, render, som
from .geometry import GeometryError
from .tessellation import catalog
from .tessellation.graph import TessellationError
from .tessellation.maps import GluingError

EXIT_OK, EXIT_INVALID, EXIT_RUNTIME = 0, 1, 2

VALIDATION_ERRORS = (
    harness.ConfigError, som.SomError, datagen.DatagenError, metrics.MetricError, render.RenderError,
    dispersion.DispersionError, TessellationError, GluingError, GeometryError, FileNotFoundError,
)


class UsageError(Exception):
    """Invalid command-line input detected after parsing."""


def _out(text: str) -> None:
    sys.stdout.write(text if text.endswith("\n") else text + "\n")


def _graph(name: str, density: int):
    try:
        return catalog.build(name, density)
    except TessellationError as exc:
        raise UsageError(str(exc)) from exc


def _ordered_dataset(O, data: som.Dataset) -> som.Dataset:
    """Samples indexed by origin tile (needs a tile_id column covering O)."""
    if len(data) != O.n:
        raise UsageError(f"dataset has {len(data)} rows but {O.name} has {O.n} tiles")
    if data.source_tile is None:
        return data
    order = np.argsort(data.source_tile, kind="stable")
    if not np.array_equal(data.source_tile[order], np.arange(O.n)):
        raise UsageError(f"tile_id column is not a permutation of 0..{O.n - 1}")
    return som.Dataset(data.samples[order], None if data.labels is None else data.labels[order],
                       np.arange(O.n), data.columns)


# ------------------------------------------------------------------ commands
def cmd_manifold(args) -> int:
    names = catalog.manifold_names()
    if args.action == "list":
        for name in names:
            e = catalog.manifest()["manifolds"][name]
            _out(f"{name:<12} {e['kind']:<9} {{{e['p']},3}} GC{tuple(e['goldberg'])} n={e['n']}")
        return EXIT_OK
    targets = args.names or (names if args.action == "check" else [])
    if not targets:
        raise UsageError("name a manifold")
    for t in targets:
        if t not in names:
            raise UsageError(f"unknown manifold {t!r}")
    if args.action == "info":
        for t in targets:
            g = _graph(t, args.density)
            c = catalog.census(g)
            info = {**g.meta, **c, "non_hexagons": {str(k): v for k, v in c["non_hexagons"].items()}}
            _out(json.dumps(info, indent=1))
        return EXIT_OK
    failed = 0
    for t in targets:
        bad = catalog.reference_mismatches(t)
        hard = [b for b in bad if b[3]]
        failed += bool(hard)
        detail = "; ".join(f"{k} {got} (reference {ref}{'' if enforced else ', informational'})"
                           for k, got, ref, enforced in bad)
        _out(f"{t:<12} {'FAIL' if hard else 'ok':<4} {detail}")
    return EXIT_INVALID if failed else EXIT_OK


def cmd_dataset(args) -> int:
    O = _graph(args.manifold, args.density)
    data = datagen.embed(O, args.method, seed=args.seed, dim=args.dim)
    datagen.write_csv(data, args.output)
    _out(f"{args.output}: {len(data)} samples in R^{data.k} ({data.method})")
    return EXIT_OK


def _params(args) -> som.TrainParams:
    return som.TrainParams(t_max=args.t_max, eta=args.eta, seed=args.seed, dispersion_mode=args.mode,
                           init_mode=args.init, sigma0=args.sigma0)


def _train(args, E, data):
    params = _params(args)
    disp = None
    if params.dispersion_mode == "simulated":
        disp = dispersion.cached_simulate(E, f"{E.name}-x{args.density}", args.cache_dir, args.p, args.stop_ratio)
    return som.train(E, data, params, disp)


def cmd_train(args) -> int:
    E = _graph(args.target, args.density)
    data = datagen.load_dataset(args.data)
    res = _train(args, E, data)
    som.dump_weights(res.state, args.output)
    if args.assignment:
        with open(args.assignment, "w") as fh:
            fh.write("sample,tile\n")
            fh.writelines(f"{i},{int(t)}\n" for i, t in enumerate(res.assignment))
    _out(f"{args.output}: {E.n} x {data.k} weights after {res.state.iteration} iterations")
    return EXIT_OK


def _embedding(args):
    O = _graph(args.origin, args.density)
    E = _graph(args.target, args.density)
    data = _ordered_dataset(O, datagen.load_dataset(args.data))
    head, w = som.load_weights(args.weights)
    if head["n"] != E.n or head["k"] != data.k:
        raise UsageError(f"weights are {head['n']} x {head['k']}, expected {E.n} x {data.k}")
    state = som.SomState(w, E, som.TrainParams(seed=head["seed"]))
    e = som.assign(state, data)
    return metrics.EmbeddingResult(e, O, E, w, data.samples), head


def cmd_eval(args) -> int:
    res, head = _embedding(args)
    rep = metrics.evaluate(res, method=args.method or "", dispersion_mode=args.mode or "", seed=head["seed"])
    if args.output:
        metrics.write_reports([rep], args.output, append=args.append)
    for c in metrics.CSV_COLUMNS:
        v = getattr(rep, c)
        if v is not None and v != "":
            _out(f"{c:<18} {v}")
    return EXIT_OK


def cmd_experiment(args) -> int:
    cfg = harness.load_config(args.config)
    if args.repetitions is not None:
        cfg.repetitions = args.repetitions
    if args.t_max is not None:
        cfg.t_max = args.t_max
    cfg.validate()

    def progress(i, total, rep):
        status = rep.error or f"villmann={rep.villmann} kendall={rep.kendall_unfitness:.4g}"
        print(f"[{i}/{total}] {rep.origin}->{rep.target} {rep.dispersion_mode} seed={rep.seed} {status}",
              file=sys.stderr, flush=True)

    rows = harness.run_experiment(cfg, output=args.output, cache_dir=args.cache_dir, threads=args.threads,
                                  progress=None if args.quiet else progress)
    errors = sum(1 for r in rows if r.error)
    _out(f"{args.output or cfg.output}: {len(rows)} runs, {errors} errors")
    if args.compare:
        _out(harness.compare_dispersions(rows).text())
    return EXIT_RUNTIME if errors == len(rows) else EXIT_OK


def cmd_compare(args) -> int:
    rows = []
    for path in args.results:
        rows += metrics.read_reports(path)
    report = harness.compare_dispersions(rows, significance=args.alpha)
    if not report.rows:
        raise UsageError("no paired simulated/Gaussian runs to compare")
    if args.output:
        report.to_csv(args.output)
    _out(report.text())
    return EXIT_OK


def cmd_render(args) -> int:
    spec = render.RenderSpec(projection=args.projection, center_tile=args.center, size=args.size)
    if args.what == "manifold":
        g = _graph(args.manifold, args.density)
        svg = render.render_manifold(g, spec)
    elif args.what == "umatrix":
        g = _graph(args.manifold, args.density)
        head, w = som.load_weights(args.weights)
        if head["n"] != g.n:
            raise UsageError(f"weights have {head['n']} rows, {g.name} has {g.n} tiles")
        svg = render.render_umatrix(g, som.umatrix(som.SomState(w, g, som.TrainParams())), spec)
    else:
        args.target = args.manifold
        res, _ = _embedding(args)
        svg = render.render_embedding(res, spec)
    render.write_svg(svg, args.output)
    _out(f"{args.output}: {svg.count('<polygon')} polygons")
    return EXIT_OK


# -------------------------------------------------------------------- parser
def _train_options(p) -> None:
    p.add_argument("--mode", default="simulated", choices=som.DISPERSION_MODES, help="dispersion mode")
    p.add_argument("--t-max", type=int, default=30000, help="training iterations")
    p.add_argument("--eta", type=float, default=0.1, help="learning rate")
    p.add_argument("--init", default="uniform_box", choices=som.INIT_MODES, help="weight initialization")
    p.add_argument("--sigma0", type=float, default=None, help="initial Gaussian radius (default: diameter)")
    p.add_argument("--p", type=float, default=dispersion.DEFAULT_P, help="dispersion rate")
    p.add_argument("--stop-ratio", type=float, default=dispersion.DEFAULT_STOP_RATIO,
                   help="row max/min ratio that ends the dispersion")


def _common(suppress: bool) -> argparse.ArgumentParser:
    # subcommands repeat the global options; their defaults are suppressed so
    # a value given before the command is not overwritten
    def d(v):
        return argparse.SUPPRESS if suppress else v

    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--seed", type=int, default=d(0), help="random seed")
    p.add_argument("--threads", type=int, default=d(None), help="worker processes for experiments")
    p.add_argument("--cache-dir", default=d(None), help="cache directory (default ~/.cache/tilesom)")
    p.add_argument("--density", type=int, default=d(1), choices=(1, 2),
                   help="2 doubles the Goldberg-Coxeter parameters")
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _common(suppress=True)
    ap = argparse.ArgumentParser(prog="tilesom", description="Self-organizing maps on tessellated manifolds.",
                                 parents=[_common(suppress=False)])
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("manifold", parents=[common], help="list, describe or check the built-in manifolds")
    p.add_argument("action", choices=("list", "info", "check"))
    p.add_argument("names", nargs="*")
    p.set_defaults(func=cmd_manifold)

    p = sub.add_parser("dataset", parents=[common], help="generate the dataset of a manifold")
    p.add_argument("action", choices=("gen",))
    p.add_argument("manifold")
    p.add_argument("--method", default=None, choices=datagen.METHODS + ("landscape",))
    p.add_argument("--dim", type=int, default=None, help="landscape dimension")
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_dataset)

    p = sub.add_parser("train", parents=[common], help="train a map on a target manifold")
    p.add_argument("--target", required=True)
    p.add_argument("--data", required=True, help="CSV dataset")
    _train_options(p)
    p.add_argument("-o", "--output", required=True, help="weights file")
    p.add_argument("--assignment", default=None, help="write sample -> tile CSV")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", parents=[common], help="quality measures of a trained map")
    p.add_argument("--origin", required=True)
    p.add_argument("--target", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--weights", required=True)
    p.add_argument("--method", default=None, help="label for the report")
    p.add_argument("--mode", default=None, help="label for the report")
    p.add_argument("-o", "--output", default=None, help="append the report to this CSV")
    p.add_argument("--append", action="store_true")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("experiment", parents=[common], help="run an experiment configuration")
    p.add_argument("action", choices=("run",))
    p.add_argument("config", help="JSON configuration")
    p.add_argument("-o", "--output", default=None, help="results CSV (default from the configuration)")
    p.add_argument("--repetitions", type=int, default=None)
    p.add_argument("--t-max", type=int, default=None)
    p.add_argument("--compare", action="store_true", help="print the dispersion comparison")
    p.add_argument("--quiet", action="store_true")
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("compare", parents=[common], help="paired Wilcoxon comparison of dispersion modes")
    p.add_argument("results", nargs="+", help="results CSV files")
    p.add_argument("--alpha", type=float, default=harness.SIGNIFICANCE)
    p.add_argument("-o", "--output", default=None, help="comparison CSV")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("render", parents=[common], help="SVG drawings")
    p.add_argument("what", choices=("manifold", "umatrix", "embedding"))
    p.add_argument("manifold", help="manifold to draw (the target for embeddings)")
    p.add_argument("--weights", default=None)
    p.add_argument("--origin", default=None)
    p.add_argument("--data", default=None)
    p.add_argument("--projection", default=None)
    p.add_argument("--center", type=int, default=None, help="tile drawn at the center")
    p.add_argument("--size", type=int, default=800)
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_render)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_INVALID
    if args.cache_dir:
        os.environ["TILESOM_CACHE_DIR"] = args.cache_dir
    args.cache_dir = args.cache_dir or str(catalog.cache_dir())
    if args.command == "render" and args.what != "manifold":
        need = ["weights"] + (["origin", "data"] if args.what == "embedding" else [])
        missing = [f"--{k}" for k in need if getattr(args, k) is None]
        if missing:
            print(f"tilesom: render {args.what} needs {' '.join(missing)}", file=sys.stderr)
            return EXIT_INVALID
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"tilesom: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except VALIDATION_ERRORS as exc:
        print(f"tilesom: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except KeyboardInterrupt:
        return EXIT_RUNTIME
    except Exception as exc:  # anything else is a runtime failure
        print(f"tilesom: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
