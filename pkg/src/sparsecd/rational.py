"""Rational Christoffel functions over a junction tree.

For cliques ``C_1..C_l`` in RIP order with separators ``S_k``, the model
evaluates

    Psi(x) = prod_k Lambda_{C_k}(x_{C_k}) / prod_{k>=2} Lambda_{S_k}(x_{S_k})

where each ``Lambda`` is the Christoffel polynomial of the corresponding
marginal. Evaluation happens in the log domain; exterior values grow
exponentially with the degree.
"""

from __future__ import annotations

import json
import os
import tempfile
import time
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import christoffel as cf
from .errors import InvalidArgumentError, SingularMomentMatrixError
from .graph import (
    GraphicalModel,
    JunctionTree,
    build_junction_tree,
    junction_tree_from_cliques,
    verify_clique_intersection,
    verify_rip,
)
from .moments import (
    AffineMap,
    AnalyticMeasure,
    MomentTable,
    Provenance,
    SampleSet,
    empirical_moments,
    restrict,
)
from .multiindex import Mode, expected_size

FORMAT_TAG = "sparsecd-model"
FORMAT_VERSION = 1


class OverflowFlagWarning(RuntimeWarning):
    pass


@dataclass(frozen=True)
class RationalModel:
    num_vars: int
    graph: GraphicalModel
    tree: JunctionTree
    degree: int
    mode: Mode
    clique_factors: tuple[cf.ChristoffelFactor, ...]
    # aligned with tree.cliques; entry 0 and empty separators are None (constant 1)
    separator_factors: tuple[cf.ChristoffelFactor | None, ...]
    clique_tables: tuple[MomentTable, ...]
    rescale: AffineMap
    jitter: float = 0.0
    training_scores: np.ndarray | None = None
    metadata: dict = field(default_factory=dict)
    # reported by the CLI, never persisted, so saved models stay byte-identical
    fit_seconds: float = field(default=0.0, compare=False)

    @property
    def num_factors(self) -> int:
        return len(self.clique_factors) + sum(f is not None for f in self.separator_factors)

    @property
    def factor_sizes(self) -> list[int]:
        sizes = [f.size for f in self.clique_factors]
        sizes += [f.size for f in self.separator_factors if f is not None]
        return sizes

    @property
    def dense_size(self) -> int:
        """Basis size of the unfactored polynomial over all variables."""
        return expected_size(self.num_vars, self.degree, self.mode)

    def _prepare(self, x) -> tuple[np.ndarray, bool]:
        pts = np.asarray(x, dtype=float)
        single = pts.ndim == 1
        pts = np.atleast_2d(pts)
        if pts.shape[1] != self.num_vars:
            raise InvalidArgumentError(
                f"points have dimension {pts.shape[1]}, model expects {self.num_vars}"
            )
        return self.rescale.apply(pts), single


def _cols(vars) -> list[int]:
    return [v - 1 for v in vars]


def _factor_job(table: MomentTable, sep: tuple[int, ...], degree, mode, jitter, label):
    try:
        clique = cf.fit_factor(table, degree, mode, jitter)
        sep_factor = None
        if sep:
            sep_factor = cf.fit_factor(restrict(table, sep), degree, mode, jitter)
    except SingularMomentMatrixError as exc:
        raise SingularMomentMatrixError(f"clique {label}: {exc}") from None
    return clique, sep_factor


def fit(
    source: SampleSet | AnalyticMeasure,
    graph: GraphicalModel | None = None,
    degree: int = 2,
    mode=Mode.COORD,
    jitter: float = 0.0,
    *,
    cliques=None,
    rescale: bool = True,
    retain_scores: bool = True,
    training_size: int = 10_000,
    seed: int = 0,
    max_degree: int | None = cf.DEFAULT_MAX_DEGREE,
    workers: int = 1,
) -> RationalModel:
    """Fit the rational Christoffel function of ``source`` over ``graph``.

    Parameters
    ----------
    source
        Samples (empirical moments) or an analytic measure (exact moments).
    graph
        Graphical model; completed by min-fill. Ignored when ``cliques`` is
        given, in which case the junction tree is built from those cliques.
    degree, mode
        Per-factor degree ``n`` and the truncation (coordinate-wise by default).
    jitter
        Added to each moment-matrix diagonal before factorization.
    rescale
        Map samples affinely onto ``[-1, 1]`` per coordinate before computing
        moments. Has no effect for analytic sources.
    retain_scores
        Store log-scores of the training points, needed for quantile thresholds.
        For analytic sources ``training_size`` points are drawn with ``seed``.
    """
    t0 = time.perf_counter()
    mode = Mode.parse(mode)
    cf.check_degree(degree, max_degree)
    if degree < 1:
        raise InvalidArgumentError("degree must be at least 1")
    d = source.dim
    if cliques is not None:
        tree = junction_tree_from_cliques(d, cliques)
        graph = graph or GraphicalModel(d, frozenset())
    else:
        if graph is None:
            raise InvalidArgumentError("either graph or cliques must be given")
        if graph.num_vars != d:
            raise InvalidArgumentError(f"graph has {graph.num_vars} variables, data has {d}")
        tree = build_junction_tree(graph)

    table_degree = 2 * degree
    if isinstance(source, SampleSet):
        affine = AffineMap.to_unit_box(source) if rescale else AffineMap.identity(d)
        scaled = SampleSet(affine.apply(source.points))

        def table_for(c):
            return empirical_moments(scaled, c, table_degree)
    else:
        affine = AffineMap.identity(d)

        def table_for(c):
            return source.moment_table(c, table_degree)

    def job(k):
        table = table_for(tree.cliques[k])
        return (table,) + _factor_job(
            table, tree.separators[k], degree, mode, jitter, tree.cliques[k]
        )

    ks = range(len(tree.cliques))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(job, ks))
    else:
        results = [job(k) for k in ks]

    model = RationalModel(
        num_vars=d,
        graph=graph,
        tree=tree,
        degree=int(degree),
        mode=mode,
        clique_factors=tuple(r[1] for r in results),
        separator_factors=tuple(r[2] for r in results),
        clique_tables=tuple(r[0] for r in results),
        rescale=affine,
        jitter=float(jitter),
        metadata={
            "source": "samples" if isinstance(source, SampleSet) else source.id,
            "clique_number": tree.clique_number,
            "tree_edges": [list(e) for e in tree.tree_edges],
        },
    )
    if retain_scores:
        train = source if isinstance(source, SampleSet) else source.sample(training_size, seed)
        model = replace(model, training_scores=log_evaluate(model, train.points))
    return replace(model, fit_seconds=time.perf_counter() - t0)


def factor_logs(m: RationalModel, x) -> tuple[np.ndarray, np.ndarray]:
    """Per-clique ``log Lambda_{C_k}`` and ``log Lambda_{S_k}`` (0 where ``S_k`` is empty).

    Arrays have shape ``(num_points, num_cliques)``; row ``k`` of the RIP
    factorization is ``numerator[:, k] - denominator[:, k]``.
    """
    pts, _ = m._prepare(x)
    num = np.zeros((pts.shape[0], len(m.clique_factors)))
    den = np.zeros_like(num)
    for k, (fc, fs) in enumerate(zip(m.clique_factors, m.separator_factors)):
        num[:, k] = cf.log_evaluate(fc, pts[:, _cols(fc.vars)])
        if fs is not None:
            den[:, k] = cf.log_evaluate(fs, pts[:, _cols(fs.vars)])
    return num, den


def log_evaluate(m: RationalModel, x):
    single = np.ndim(x) == 1
    num, den = factor_logs(m, x)
    out = num.sum(axis=1) - den.sum(axis=1)
    return float(out[0]) if single else out


def evaluate(m: RationalModel, x, return_overflow: bool = False):
    """``Psi(x)``; overflowing points come back as ``inf``.

    With ``return_overflow=True`` a boolean mask of overflowed points is
    returned alongside the values; otherwise a warning is issued.
    """
    single = np.ndim(x) == 1
    logs = np.atleast_1d(log_evaluate(m, x))
    with np.errstate(over="ignore"):
        vals = np.exp(logs)
    overflow = ~np.isfinite(vals)
    if overflow.any() and not return_overflow:
        warnings.warn(
            f"{int(overflow.sum())} value(s) overflowed; use log_evaluate",
            OverflowFlagWarning,
            stacklevel=2,
        )
    if single:
        vals, overflow = float(vals[0]), bool(overflow[0])
    return (vals, overflow) if return_overflow else vals


def log_evaluate_regularized(m: RationalModel, x, epsilon: float):
    if not epsilon > 0:
        raise InvalidArgumentError(f"epsilon must be positive, got {epsilon}")
    single = np.ndim(x) == 1
    pts, _ = m._prepare(x)
    # a side-epsilon box in data coordinates has side epsilon * scale after rescaling
    sides = epsilon * np.abs(m.rescale.scale)
    out = np.zeros(pts.shape[0])
    for fc, fs in zip(m.clique_factors, m.separator_factors):
        c = _cols(fc.vars)
        out += cf.log_evaluate_regularized(fc, pts[:, c], sides[c])
        if fs is not None:
            s = _cols(fs.vars)
            out -= cf.log_evaluate_regularized(fs, pts[:, s], sides[s])
    return float(out[0]) if single else out


def evaluate_regularized(m: RationalModel, x, epsilon: float):
    return np.exp(log_evaluate_regularized(m, x, epsilon))


def estimate_density(m: RationalModel, x, epsilon: float):
    """``epsilon^-d / Psi_reg(x; epsilon)`` in data coordinates.

    Computed in rescaled coordinates (box sides ``epsilon * scale``) and
    mapped back with the Jacobian of the affine rescaling.
    """
    logs = log_evaluate_regularized(m, x, epsilon)
    sides = epsilon * np.abs(m.rescale.scale)
    log_scaled_density = -np.sum(np.log(sides)) - logs
    return np.exp(log_scaled_density + m.rescale.log_jacobian())


@dataclass(frozen=True)
class OutlierScores:
    scores: np.ndarray
    flags: np.ndarray
    threshold: float


def threshold_for(m: RationalModel, quantile: float) -> float:
    if not 0 < quantile < 1:
        raise InvalidArgumentError(f"quantile must lie in (0, 1), got {quantile}")
    if m.training_scores is None:
        raise InvalidArgumentError(
            "model has no stored training scores; re-fit with retain_scores=True"
        )
    return float(np.quantile(m.training_scores, quantile))


def score_outliers(m: RationalModel, points, quantile: float = 0.95) -> OutlierScores:
    """Log-scores and flags ``score > q-quantile of the training scores``."""
    thr = threshold_for(m, quantile)
    pts = points.points if isinstance(points, SampleSet) else points
    scores = np.atleast_1d(log_evaluate(m, np.atleast_2d(pts)))
    return OutlierScores(scores, scores > thr, thr)


def dense_factor(source, degree: int, mode=Mode.COORD, jitter: float = 0.0,
                 rescale: bool = True, max_size: int = 4096):
    """Unfactored Christoffel polynomial over all variables, for comparison.

    Returns the factor and the affine map to apply to evaluation points.
    """
    mode = Mode.parse(mode)
    d = source.dim
    size = expected_size(d, degree, mode)
    if size > max_size:
        raise InvalidArgumentError(
            f"dense basis size {size} exceeds max_size {max_size}; lower the degree"
        )
    vars = tuple(range(1, d + 1))
    if isinstance(source, SampleSet):
        affine = AffineMap.to_unit_box(source) if rescale else AffineMap.identity(d)
        table = empirical_moments(SampleSet(affine.apply(source.points)), vars, 2 * degree)
    else:
        affine = AffineMap.identity(d)
        table = source.moment_table(vars, 2 * degree)
    return cf.fit_factor(table, degree, mode, jitter), affine


# -- persistence ------------------------------------------------------------


def _factor_record(f: cf.ChristoffelFactor | None):
    if f is None:
        return None
    return {
        "vars": list(f.vars),
        "size": f.size,
        "rcond": f.rcond,
        "lower": [row[: i + 1].tolist() for i, row in enumerate(f.lower)],
    }


def to_dict(m: RationalModel) -> dict:
    t = m.tree
    return {
        "format": FORMAT_TAG,
        "version": FORMAT_VERSION,
        "num_vars": m.num_vars,
        "graph_edges": sorted(list(e) for e in m.graph.edges),
        "added_edges": [list(e) for e in t.added_edges],
        "cliques": [list(c) for c in t.cliques],
        "parents": list(t.parents),
        "separators": [list(s) for s in t.separators],
        "degree": m.degree,
        "mode": m.mode.value,
        "jitter": m.jitter,
        "rescale": {"center": m.rescale.center.tolist(), "scale": m.rescale.scale.tolist()},
        "tables": [
            {
                "vars": list(tb.vars),
                "degree": tb.degree,
                "provenance": tb.provenance.value,
                "source": tb.source,
                "entries": tb.entries.ravel().tolist(),
            }
            for tb in m.clique_tables
        ],
        "clique_factors": [_factor_record(f) for f in m.clique_factors],
        "separator_factors": [_factor_record(f) for f in m.separator_factors],
        "training_scores": None if m.training_scores is None else m.training_scores.tolist(),
        "metadata": m.metadata,
    }


def _atomic_write(path, text: str) -> None:
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def save(m: RationalModel, path) -> None:
    _atomic_write(path, json.dumps(to_dict(m), indent=1) + "\n")


def _load_factor(rec, table: MomentTable, degree, mode, jitter, tol):
    if rec is None:
        return None
    vars = tuple(rec["vars"])
    if vars != tuple(table.vars):
        table = restrict(table, vars)
    M = cf.assemble(table, degree, mode)
    m = M.size
    L = np.zeros((m, m))
    for i, row in enumerate(rec["lower"]):
        L[i, : len(row)] = row
    L.setflags(write=False)
    f = cf.ChristoffelFactor(M.basis, L, float(rec["rcond"]), jitter)
    err = cf.reconstruction_error(f, M)
    if not err <= tol:
        raise InvalidArgumentError(
            f"stored factor over {vars} does not reproduce its moment matrix "
            f"(relative error {err:.2e})"
        )
    return f


def from_dict(data: dict, tol: float = 1e-8) -> RationalModel:
    if data.get("format") != FORMAT_TAG:
        raise InvalidArgumentError("not a sparsecd model file")
    if data.get("version") != FORMAT_VERSION:
        raise InvalidArgumentError(f"unsupported model version {data.get('version')}")
    d = int(data["num_vars"])
    graph = GraphicalModel(d, frozenset(tuple(e) for e in data["graph_edges"]))
    tree = JunctionTree(
        d,
        tuple(tuple(c) for c in data["cliques"]),
        tuple(data["parents"]),
        tuple(tuple(s) for s in data["separators"]),
        tuple(tuple(e) for e in data["added_edges"]),
    )
    if not (verify_rip(tree) and verify_clique_intersection(tree)):
        raise InvalidArgumentError("stored junction tree is inconsistent")
    degree, mode, jitter = int(data["degree"]), Mode.parse(data["mode"]), float(data["jitter"])
    tables = []
    for rec in data["tables"]:
        vars = tuple(rec["vars"])
        shape = (rec["degree"] + 1,) * len(vars)
        tables.append(MomentTable(vars, rec["degree"], np.array(rec["entries"]).reshape(shape),
                                  Provenance(rec["provenance"]), rec.get("source", "")))
    cliques = [_load_factor(r, tb, degree, mode, jitter, tol)
               for r, tb in zip(data["clique_factors"], tables)]
    seps = [_load_factor(r, tb, degree, mode, jitter, tol)
            for r, tb in zip(data["separator_factors"], tables)]
    scores = data.get("training_scores")
    return RationalModel(
        num_vars=d,
        graph=graph,
        tree=tree,
        degree=degree,
        mode=mode,
        clique_factors=tuple(cliques),
        separator_factors=tuple(seps),
        clique_tables=tuple(tables),
        rescale=AffineMap(np.array(data["rescale"]["center"], dtype=float),
                          np.array(data["rescale"]["scale"], dtype=float)),
        jitter=jitter,
        training_scores=None if scores is None else np.array(scores, dtype=float),
        metadata=dict(data.get("metadata", {})),
    )


def load(path, tol: float = 1e-8) -> RationalModel:
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise InvalidArgumentError(f"{path}: invalid model file ({exc})") from None
    try:
        return from_dict(data, tol)
    except InvalidArgumentError:
        raise
    except (KeyError, TypeError, ValueError, IndexError) as exc:
        raise InvalidArgumentError(f"{path}: malformed model file ({exc!r})") from None
