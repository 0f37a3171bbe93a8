"""Command-line front end.

Every command prints a ``key=value`` summary on stdout and writes its
tabular output as CSV. Exit status: 0 success, 2 bad input, 3 numerical
failure (singular moment matrix, overflow).
"""

from __future__ import annotations

import argparse
import io
import logging
import sys

import numpy as np

from . import christoffel as cf
from . import rational
from .errors import (
    InvalidArgumentError,
    NumericOverflowError,
    SingularMomentMatrixError,
)
from .graph import build_junction_tree, read_graph
from .moments import get_measure, read_samples, write_samples
from .multiindex import Mode, enumerate_basis

EXIT_INPUT = 2
EXIT_NUMERIC = 3


def _emit(**pairs) -> None:
    for key, value in pairs.items():
        if isinstance(value, float):
            value = f"{value:.6g}"
        elif isinstance(value, (list, tuple)):
            value = ";".join(_fmt_set(v) if isinstance(v, (list, tuple)) else str(v) for v in value)
        print(f"{key}={value}")


def _fmt_set(vs) -> str:
    return "{" + ",".join(str(v) for v in vs) + "}"


def _write_text(path, text: str) -> None:
    rational._atomic_write(path, text)


def _write_csv(path, header: list[str], columns: list[np.ndarray], fmts: list[str]) -> None:
    buf = io.StringIO()
    buf.write(",".join(header) + "\n")
    for row in zip(*columns):
        buf.write(",".join(f % v for f, v in zip(fmts, row)) + "\n")
    _write_text(path, buf.getvalue())


def _source(args):
    if bool(args.samples) == bool(args.measure):
        raise InvalidArgumentError("give exactly one of --samples or --measure")
    if args.samples:
        return read_samples(args.samples)
    return get_measure(args.measure)


def _parse_cliques(text: str):
    return [tuple(int(v) for v in part.split(",")) for part in text.split(";") if part.strip()]


def _parse_grid(text: str, d: int) -> np.ndarray:
    """``lo:hi:count`` per coordinate, comma separated; C-ordered grid points."""
    parts = [p for p in text.split(",") if p.strip()]
    if len(parts) != d:
        raise InvalidArgumentError(f"grid has {len(parts)} axes, model has {d} variables")
    axes = []
    for p in parts:
        try:
            lo, hi, count = p.split(":")
            lo, hi, count = float(lo), float(hi), int(count)
        except ValueError:
            raise InvalidArgumentError(f"bad grid axis {p!r}; expected lo:hi:count") from None
        if count < 1:
            raise InvalidArgumentError(f"grid axis {p!r} needs a positive count")
        axes.append(np.linspace(lo, hi, count) if count > 1 else np.array([lo]))
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1)


def _points_arg(path, d: int) -> np.ndarray:
    return read_samples(path, dim=d).points


# -- commands ---------------------------------------------------------------


def cmd_fit(args) -> int:
    source = _source(args)
    graph = read_graph(args.graph) if args.graph else None
    cliques = _parse_cliques(args.cliques) if args.cliques else None
    if graph is None and cliques is None:
        raise InvalidArgumentError("give --graph or --cliques")
    model = rational.fit(
        source,
        graph,
        args.degree,
        args.mode,
        args.jitter,
        cliques=cliques,
        rescale=not args.no_rescale,
        training_size=args.train_size,
        seed=args.seed,
        max_degree=args.max_degree,
        workers=args.workers,
    )
    rational.save(model, args.out)
    rconds = [f.rcond for f in model.clique_factors]
    rconds += [f.rcond for f in model.separator_factors if f is not None]
    _emit(
        model=args.out,
        num_vars=model.num_vars,
        degree=model.degree,
        mode=model.mode.value,
        cliques=[list(c) for c in model.tree.cliques],
        separators=[list(s) for s in model.tree.separators[1:]],
        clique_number=model.tree.clique_number,
        num_factors=model.num_factors,
        factor_sizes=model.factor_sizes,
        max_factor_size=max(model.factor_sizes),
        dense_size=model.dense_size,
        min_rcond=min(rconds),
        wall_seconds=model.fit_seconds,
    )
    return 0


def cmd_score(args) -> int:
    model = rational.load(args.model)
    pts = _points_arg(args.samples, model.num_vars)
    res = rational.score_outliers(model, pts, args.quantile)
    idx = np.arange(len(res.scores))
    _write_csv(args.out, ["index", "log_score", "flag"],
               [idx, res.scores, res.flags.astype(int)], ["%d", "%.17g", "%d"])
    _emit(points=len(idx), threshold=res.threshold, flagged=int(res.flags.sum()),
          flag_rate=float(res.flags.mean()), out=args.out)
    return 0


def cmd_density(args) -> int:
    model = rational.load(args.model)
    pts = _points_arg(args.samples, model.num_vars)
    dens = np.atleast_1d(rational.estimate_density(model, pts, args.epsilon))
    _write_csv(args.out, ["index", "density"], [np.arange(len(dens)), dens], ["%d", "%.17g"])
    _emit(points=len(dens), epsilon=args.epsilon, out=args.out)
    return 0


def cmd_graph_analyze(args) -> int:
    g = read_graph(args.graph)
    jt = build_junction_tree(g)
    dot = jt.to_dot()
    if args.out:
        _write_text(args.out, dot)
    _emit(
        num_vars=g.num_vars,
        added_edges=[list(e) for e in jt.added_edges],
        cliques=[list(c) for c in jt.cliques],
        separators=[list(s) for s in jt.separators[1:]],
        tree_edges=[f"{_fmt_set(jt.cliques[a])}-{_fmt_set(jt.cliques[b])}" for a, b in jt.tree_edges],
        clique_number=jt.clique_number,
        treewidth_upper=jt.treewidth_bound,
    )
    if not args.out:
        sys.stdout.write(dot)
    return 0


def cmd_sublevel(args) -> int:
    model = rational.load(args.model)
    if (args.gamma is None) == (args.quantile is None):
        raise InvalidArgumentError("give exactly one of --gamma or --quantile")
    if args.gamma is not None:
        if not args.gamma > 0:
            raise InvalidArgumentError("--gamma must be positive")
        log_gamma = float(np.log(args.gamma))
    else:
        log_gamma = rational.threshold_for(model, args.quantile)
    pts = _parse_grid(args.grid, model.num_vars)
    logs = np.atleast_1d(rational.log_evaluate(model, pts))
    inside = logs <= log_gamma
    header = [f"x{i}" for i in range(1, model.num_vars + 1)] + ["log_psi", "inside"]
    cols = [pts[:, i] for i in range(model.num_vars)] + [logs, inside.astype(int)]
    _write_csv(args.out, header, cols, ["%.17g"] * (model.num_vars + 1) + ["%d"])
    _emit(points=len(pts), log_gamma=log_gamma, inside=int(inside.sum()),
          inside_fraction=float(inside.mean()), out=args.out)
    return 0


def cmd_eval_dense(args) -> int:
    source = _source(args)
    factor, affine = rational.dense_factor(source, args.degree, args.mode, args.jitter,
                                           rescale=not args.no_rescale, max_size=args.max_size)
    pts = _points_arg(args.points, source.dim)
    logs = np.atleast_1d(cf.log_evaluate(factor, affine.apply(pts)))
    _write_csv(args.out, ["index", "log_lambda"], [np.arange(len(logs)), logs], ["%d", "%.17g"])
    _emit(points=len(logs), basis_size=factor.size, rcond=factor.rcond, out=args.out)
    return 0


def cmd_equilibrium(args) -> int:
    """Normalized coordinate-wise polynomial ``Lambda(z) / (n+1)^d`` over a degree range."""
    measure = get_measure(args.measure)
    z = np.array([float(v) for v in args.point.split(",")])
    if z.size != measure.dim:
        raise InvalidArgumentError(f"--point has {z.size} coordinates, measure has {measure.dim}")
    vars = tuple(range(1, measure.dim + 1))
    rows = []
    for n in range(1, args.max_degree + 1):
        table = measure.moment_table(vars, 2 * n)
        lam = cf.evaluate(cf.fit_factor(table, n, Mode.COORD), z)
        size = len(enumerate_basis(vars, n, Mode.COORD))
        density = float(measure.density(z[None, :])[0])
        rows.append((n, lam, lam / size, lam / size * density))
    cols = list(map(np.array, zip(*rows)))
    _write_csv(args.out, ["degree", "lambda", "normalized", "normalized_times_density"],
               cols, ["%d", "%.17g", "%.17g", "%.17g"])
    _emit(point=args.point, max_degree=args.max_degree, last_normalized=rows[-1][2], out=args.out)
    return 0


def cmd_sample(args) -> int:
    measure = get_measure(args.measure)
    s = measure.sample(args.num, args.seed)
    write_samples(args.out, s.points)
    _emit(measure=measure.id, points=s.num_points, dim=s.dim, seed=args.seed, out=args.out)
    return 0


# -- parser -----------------------------------------------------------------


def _add_source(p) -> None:
    p.add_argument("--samples", help="headerless CSV of points, one per row")
    p.add_argument("--measure", help="analytic measure id (uniform:d, coupled, product:...)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sparsecd", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", help="fit a rational Christoffel model")
    _add_source(p)
    p.add_argument("--graph", help="graph file: d, then one 'u v' edge per line")
    p.add_argument("--cliques", help="explicit cliques, e.g. '1,2;2,3'")
    p.add_argument("--degree", type=int, required=True)
    p.add_argument("--mode", choices=["coord", "total"], default="coord")
    p.add_argument("--jitter", type=float, default=0.0)
    p.add_argument("--max-degree", type=int, default=cf.DEFAULT_MAX_DEGREE)
    p.add_argument("--no-rescale", action="store_true", help="skip the [-1, 1] rescaling")
    p.add_argument("--train-size", type=int, default=10_000,
                   help="training points drawn from an analytic measure for score thresholds")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("score", help="outlier scores and flags")
    p.add_argument("--model", required=True)
    p.add_argument("--samples", required=True)
    p.add_argument("--quantile", type=float, default=0.95)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("density", help="regularized density estimates")
    p.add_argument("--model", required=True)
    p.add_argument("--samples", required=True)
    p.add_argument("--epsilon", type=float, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_density)

    p = sub.add_parser("graph", help="graph utilities")
    gsub = p.add_subparsers(dest="graph_command", required=True)
    ga = gsub.add_parser("analyze", help="chordal completion and junction tree")
    ga.add_argument("--graph", required=True)
    ga.add_argument("--out", help="write the DOT rendering here instead of stdout")
    ga.set_defaults(func=cmd_graph_analyze)

    p = sub.add_parser("sublevel", help="grid of log Psi and the mask log Psi <= log gamma")
    p.add_argument("--model", required=True)
    p.add_argument("--gamma", type=float)
    p.add_argument("--quantile", type=float, help="take gamma at this training-score quantile")
    p.add_argument("--grid", required=True, help="lo:hi:count per coordinate, comma separated")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sublevel)

    p = sub.add_parser("eval-dense", help="unfactored Christoffel polynomial for comparison")
    _add_source(p)
    p.add_argument("--points", required=True)
    p.add_argument("--degree", type=int, required=True)
    p.add_argument("--mode", choices=["coord", "total"], default="coord")
    p.add_argument("--jitter", type=float, default=0.0)
    p.add_argument("--no-rescale", action="store_true")
    p.add_argument("--max-size", type=int, default=4096)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_eval_dense)

    p = sub.add_parser("equilibrium", help="normalized coordinate-wise polynomial vs degree")
    p.add_argument("--measure", required=True)
    p.add_argument("--point", required=True, help="comma-separated coordinates")
    p.add_argument("--max-degree", type=int, default=8)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_equilibrium)

    p = sub.add_parser("sample", help="draw samples from an analytic measure")
    p.add_argument("--measure", required=True)
    p.add_argument("--num", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sample)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (InvalidArgumentError, FileNotFoundError, IsADirectoryError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (SingularMomentMatrixError, NumericOverflowError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
