"""Moment tables from samples, closed-form test measures, or quadrature.

A :class:`MomentTable` over variables ``vars`` with coordinate-wise degree
``D`` stores ``entries[a_1, ..., a_k] = E[x_{v_1}^{a_1} ... x_{v_k}^{a_k}]``
for all ``0 <= a_i <= D`` as a dense k-dimensional array.
"""

from __future__ import annotations

import csv
import enum
from dataclasses import dataclass
from math import comb

import numpy as np

from .errors import InvalidArgumentError, NumericOverflowError


class Provenance(str, enum.Enum):
    EMPIRICAL = "empirical"
    ANALYTIC = "analytic"
    QUADRATURE = "quadrature"


@dataclass(frozen=True)
class MomentTable:
    vars: tuple[int, ...]
    degree: int
    entries: np.ndarray
    provenance: Provenance
    source: str = ""

    def __post_init__(self):
        expected = (self.degree + 1,) * len(self.vars)
        if self.entries.shape != expected:
            raise InvalidArgumentError(f"entries shape {self.entries.shape} != {expected}")
        if not np.all(np.isfinite(self.entries)):
            raise NumericOverflowError("moment table contains non-finite entries")

    def __getitem__(self, alpha) -> float:
        return float(self.entries[tuple(int(a) for a in alpha)])


def _check_vars(vars, d: int) -> tuple[int, ...]:
    vars = tuple(int(v) for v in vars)
    if not vars:
        raise InvalidArgumentError("variable set must be nonempty")
    if len(set(vars)) != len(vars):
        raise InvalidArgumentError(f"duplicate variable index in {vars}")
    bad = [v for v in vars if not 1 <= v <= d]
    if bad:
        raise InvalidArgumentError(f"variables {bad} outside 1..{d}")
    return vars


def restrict(table: MomentTable, subvars, degree: int | None = None) -> MomentTable:
    """Marginal table on ``subvars``: entries with zero exponent elsewhere."""
    subvars = tuple(int(v) for v in subvars)
    degree = table.degree if degree is None else int(degree)
    if degree > table.degree:
        raise InvalidArgumentError(f"table has degree {table.degree}, {degree} requested")
    missing = [v for v in subvars if v not in table.vars]
    if missing or not subvars or len(set(subvars)) != len(subvars):
        raise InvalidArgumentError(f"cannot restrict {table.vars} to {subvars}")
    index = []
    for v in table.vars:
        index.append(slice(0, degree + 1) if v in subvars else 0)
    sub = table.entries[tuple(index)]
    kept = [v for v in table.vars if v in subvars]
    sub = np.transpose(sub, [kept.index(v) for v in subvars]).copy()
    return MomentTable(subvars, degree, sub, table.provenance, table.source)


# -- samples ----------------------------------------------------------------


@dataclass(frozen=True)
class SampleSet:
    points: np.ndarray

    def __post_init__(self):
        pts = np.atleast_2d(np.asarray(self.points, dtype=float))
        if pts.ndim != 2 or pts.shape[0] == 0:
            raise InvalidArgumentError("sample set must contain at least one point")
        if not np.all(np.isfinite(pts)):
            raise InvalidArgumentError("sample set contains non-finite values")
        object.__setattr__(self, "points", pts)

    @property
    def num_points(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def columns(self, vars) -> np.ndarray:
        return self.points[:, [v - 1 for v in vars]]


def read_samples(path, dim: int | None = None) -> SampleSet:
    """Headerless CSV, one point per row."""
    rows = []
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), 1):
            if not row or all(not c.strip() for c in row):
                continue
            try:
                rows.append([float(c) for c in row])
            except ValueError:
                raise InvalidArgumentError(f"{path}:{lineno}: non-numeric entry") from None
    if not rows:
        raise InvalidArgumentError(f"{path}: no samples")
    widths = {len(r) for r in rows}
    if len(widths) != 1:
        raise InvalidArgumentError(f"{path}: rows have differing lengths {sorted(widths)}")
    s = SampleSet(np.array(rows))
    if dim is not None and s.dim != dim:
        raise InvalidArgumentError(f"{path}: expected {dim} columns, found {s.dim}")
    return s


def write_samples(path, points) -> None:
    np.savetxt(path, np.atleast_2d(points), delimiter=",", fmt="%.17g")


def empirical_moments(samples: SampleSet, vars, degree: int, chunk: int = 4096) -> MomentTable:
    """``(1/N) sum_k X_k^alpha`` for all ``alpha`` of coordinate-wise degree ``<= degree``."""
    vars = _check_vars(vars, samples.dim)
    if degree < 0:
        raise InvalidArgumentError("degree must be nonnegative")
    X = samples.columns(vars)
    k = len(vars)
    acc = np.zeros((degree + 1,) * k)
    powers = np.arange(degree + 1)
    with np.errstate(over="ignore", invalid="ignore"):
        for start in range(0, X.shape[0], chunk):
            P = X[start:start + chunk, :, None] ** powers  # (n, k, D+1)
            outer = P[:, 0, :]
            for i in range(1, k):
                outer = (outer[..., None] * P[:, i, :].reshape((-1,) + (1,) * i + (degree + 1,)))
            acc += outer.sum(axis=0)
    entries = acc / samples.num_points
    if not np.all(np.isfinite(entries)):
        raise NumericOverflowError(
            "empirical moments overflowed; rescale the data (e.g. to [-1, 1]) or lower the degree"
        )
    entries[(0,) * k] = 1.0
    return MomentTable(vars, degree, entries, Provenance.EMPIRICAL, "samples")


# -- affine rescaling -------------------------------------------------------


@dataclass(frozen=True)
class AffineMap:
    """Per-coordinate map ``y = (x - center) * scale``."""

    center: np.ndarray
    scale: np.ndarray

    @classmethod
    def identity(cls, d: int) -> "AffineMap":
        return cls(np.zeros(d), np.ones(d))

    @classmethod
    def to_unit_box(cls, samples: SampleSet) -> "AffineMap":
        lo = samples.points.min(axis=0)
        hi = samples.points.max(axis=0)
        width = hi - lo
        scale = np.where(width > 0, 2.0 / np.where(width > 0, width, 1.0), 1.0)
        return cls((lo + hi) / 2.0, scale)

    def apply(self, x) -> np.ndarray:
        return (np.asarray(x, dtype=float) - self.center) * self.scale

    def log_jacobian(self, vars=None) -> float:
        s = self.scale if vars is None else self.scale[[v - 1 for v in vars]]
        return float(np.sum(np.log(np.abs(s))))


# -- analytic measures ------------------------------------------------------


def _interval_power_integral(k: int) -> float:
    """Integral of x^k over [-1, 1]."""
    return 0.0 if k % 2 else 2.0 / (k + 1)


class Univariate:
    """Univariate probability density on ``[lo, hi]`` with closed-form moments."""

    kind = ""

    def __init__(self, lo: float = -1.0, hi: float = 1.0):
        if not hi > lo:
            raise InvalidArgumentError(f"empty interval [{lo}, {hi}]")
        self.lo, self.hi = float(lo), float(hi)

    @property
    def center(self):
        return (self.lo + self.hi) / 2

    @property
    def half(self):
        return (self.hi - self.lo) / 2

    def standard_moment(self, k: int) -> float:
        raise NotImplementedError

    def standard_density(self, t):
        raise NotImplementedError

    def moments(self, degree: int) -> np.ndarray:
        # x = c + h t with t distributed on [-1, 1]
        c, h = self.center, self.half
        std = [self.standard_moment(j) for j in range(degree + 1)]
        out = np.empty(degree + 1)
        for k in range(degree + 1):
            out[k] = sum(comb(k, j) * c ** (k - j) * h**j * std[j] for j in range(k + 1))
        out[0] = 1.0
        return out

    def density(self, x):
        x = np.asarray(x, dtype=float)
        t = (x - self.center) / self.half
        inside = np.abs(t) <= 1
        return np.where(inside, self.standard_density(t) / self.half, 0.0)

    def sample(self, rng, n: int) -> np.ndarray:
        raise NotImplementedError

    def __repr__(self):
        return f"{self.kind}({self.lo:g},{self.hi:g})"


class UniformInterval(Univariate):
    kind = "uniform"

    def standard_moment(self, k):
        return _interval_power_integral(k) / 2

    def standard_density(self, t):
        return np.full_like(np.asarray(t, dtype=float), 0.5)

    def sample(self, rng, n):
        return rng.uniform(self.lo, self.hi, size=n)


class ParabolicInterval(Univariate):
    """Density ``3/4 (1 - t^2)`` in the standardized variable."""

    kind = "parabolic"

    def standard_moment(self, k):
        return 0.75 * (_interval_power_integral(k) - _interval_power_integral(k + 2))

    def standard_density(self, t):
        t = np.asarray(t, dtype=float)
        return 0.75 * (1 - t**2)

    def sample(self, rng, n):
        # median of three uniforms on [-1, 1] has the Epanechnikov law
        t = np.median(rng.uniform(-1, 1, size=(n, 3)), axis=1)
        return self.center + self.half * t


class AnalyticMeasure:
    """Probability measure with closed-form marginal moments and density."""

    id: str
    dim: int

    @property
    def box(self) -> tuple[np.ndarray, np.ndarray]:
        raise NotImplementedError

    def moment_entries(self, vars: tuple[int, ...], degree: int) -> np.ndarray:
        raise NotImplementedError

    def moment_table(self, vars, degree: int) -> MomentTable:
        vars = _check_vars(vars, self.dim)
        entries = self.moment_entries(vars, int(degree))
        entries[(0,) * len(vars)] = 1.0
        return MomentTable(vars, int(degree), entries, Provenance.ANALYTIC, self.id)

    def marginal_density(self, x, vars) -> np.ndarray:
        raise NotImplementedError

    def density(self, x) -> np.ndarray:
        return self.marginal_density(x, tuple(range(1, self.dim + 1)))

    def contains(self, x) -> np.ndarray:
        lo, hi = self.box
        x = np.atleast_2d(np.asarray(x, dtype=float))
        return np.all((x >= lo) & (x <= hi), axis=1)

    def sample(self, n: int, seed=0) -> SampleSet:
        raise NotImplementedError


class ProductMeasure(AnalyticMeasure):
    def __init__(self, factors, id: str | None = None):
        self.factors = list(factors)
        self.dim = len(self.factors)
        if self.dim == 0:
            raise InvalidArgumentError("product measure needs at least one factor")
        self.id = id or "product:" + ",".join(repr(f) for f in self.factors)

    @property
    def box(self):
        return (np.array([f.lo for f in self.factors]), np.array([f.hi for f in self.factors]))

    def univariate_moments(self, var: int, degree: int) -> np.ndarray:
        return self.factors[var - 1].moments(degree)

    def moment_entries(self, vars, degree):
        out = np.ones(())
        for v in vars:
            out = np.multiply.outer(out, self.univariate_moments(v, degree))
        return np.array(out, dtype=float)

    def marginal_density(self, x, vars):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        out = np.ones(x.shape[0])
        for i, v in enumerate(vars):
            out *= self.factors[v - 1].density(x[:, i])
        return out

    def sample(self, n, seed=0):
        rng = np.random.default_rng(seed)
        return SampleSet(np.column_stack([f.sample(rng, n) for f in self.factors]))


def uniform_box(d: int, lo: float = -1.0, hi: float = 1.0) -> ProductMeasure:
    m = ProductMeasure([UniformInterval(lo, hi) for _ in range(d)])
    if lo == -1.0 and hi == 1.0:
        m.id = f"uniform:{d}"
    return m


class CoupledChainMeasure(AnalyticMeasure):
    """Density ``(1 + x1 x2)(1 + x2 x3) / 8`` on ``[-1, 1]^3``.

    Factorizes as ``g(x1, x2) h(x2, x3)``, so the chain 1-2-3 is a graphical
    model. The x2 marginal is uniform and, given x2, x1 and x3 are
    independent with density ``(1 + x x2) / 2``.
    """

    id = "coupled"
    dim = 3

    @property
    def box(self):
        return (-np.ones(3), np.ones(3))

    def moment_entries(self, vars, degree):
        D = degree + 1
        I = np.array([_interval_power_integral(k) for k in range(D + 3)])
        grids = np.meshgrid(*([np.arange(D)] * len(vars)), indexing="ij")
        e = [np.zeros_like(grids[0]) for _ in range(3)]
        for g, v in zip(grids, vars):
            e[v - 1] = g
        a, b, c = e
        # expand (1 + x1 x2)(1 + x2 x3) = 1 + x1 x2 + x2 x3 + x1 x2^2 x3
        total = (
            I[a] * I[b] * I[c]
            + I[a + 1] * I[b + 1] * I[c]
            + I[a] * I[b + 1] * I[c + 1]
            + I[a + 1] * I[b + 2] * I[c + 1]
        )
        return total / 8.0

    def marginal_density(self, x, vars):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        vars = tuple(vars)
        inside = np.all(np.abs(x) <= 1, axis=1)
        val = {v: x[:, i] for i, v in enumerate(vars)}
        present = set(vars)
        if present >= {1, 2, 3}:
            g = (1 + val[1] * val[2]) * (1 + val[2] * val[3])
        elif present >= {1, 3}:
            # x2 integrated out: int (1 + x1 t)(1 + t x3) dt / 2 = 1 + x1 x3 / 3
            g = 1 + val[1] * val[3] / 3
        elif present >= {1, 2}:
            g = 1 + val[1] * val[2]
        elif present >= {2, 3}:
            g = 1 + val[2] * val[3]
        else:
            g = 1.0
        out = np.ones(x.shape[0]) * g / 2.0 ** len(vars)
        return np.where(inside, out, 0.0)

    def sample(self, n, seed=0):
        rng = np.random.default_rng(seed)
        x2 = rng.uniform(-1, 1, size=n)

        def conditional(slope):
            # inverse CDF of (1 + s t)/2 on [-1, 1]: s t^2/4 + t/2 + (2 - s)/4 = u
            u = rng.uniform(0, 1, size=n)
            out = 2 * u - 1
            big = np.abs(slope) > 1e-12
            s = slope[big]
            disc = 1 - s * (2 - s - 4 * u[big])
            out[big] = (-1 + np.sqrt(np.maximum(disc, 0))) / s
            return np.clip(out, -1, 1)

        x1 = conditional(x2)
        x3 = conditional(x2)
        return SampleSet(np.column_stack([x1, x2, x3]))


_UNIVARIATE = {"uniform": UniformInterval, "parabolic": ParabolicInterval}


def get_measure(spec: str) -> AnalyticMeasure:
    """Resolve a measure id.

    ``uniform:d``
        uniform on ``[-1, 1]^d``.
    ``coupled``
        the three-variable chain density ``(1 + x1 x2)(1 + x2 x3) / 8``.
    ``product:kind[(lo,hi)],...``
        product of univariate factors, ``kind`` in ``uniform``/``parabolic``,
        e.g. ``product:uniform,parabolic(0,2)``.
    """
    spec = spec.strip()
    if spec == "coupled":
        return CoupledChainMeasure()
    head, _, rest = spec.partition(":")
    if head == "uniform":
        try:
            return uniform_box(int(rest))
        except ValueError:
            raise InvalidArgumentError(f"bad measure id {spec!r}") from None
    if head == "product" and rest:
        factors = []
        for item in _split_factors(rest):
            name, _, args = item.partition("(")
            cls = _UNIVARIATE.get(name.strip())
            if cls is None:
                raise InvalidArgumentError(f"unknown univariate factor {name!r}")
            if args:
                lo, hi = (float(a) for a in args.rstrip(")").split(","))
                factors.append(cls(lo, hi))
            else:
                factors.append(cls())
        return ProductMeasure(factors, id=spec)
    raise InvalidArgumentError(f"unknown measure id {spec!r}")


def _split_factors(text: str) -> list[str]:
    parts, depth, cur = [], 0, ""
    for ch in text:
        if ch == "," and depth == 0:
            parts.append(cur)
            cur = ""
            continue
        depth += ch == "("
        depth -= ch == ")"
        cur += ch
    parts.append(cur)
    return [p for p in parts if p.strip()]


# -- quadrature -------------------------------------------------------------


def quadrature_moments(density, box, vars, degree: int, nodes: int | None = None) -> MomentTable:
    """Marginal moments of ``density`` on ``box`` by tensor Gauss-Legendre.

    ``density`` takes an ``(N, d)`` array. Exact when the density is a
    polynomial of coordinate-wise degree below ``2 * nodes - degree``.
    """
    lo, hi = (np.asarray(b, dtype=float) for b in box)
    d = lo.size
    vars = _check_vars(vars, d)
    nodes = nodes or degree + 4
    t, w = np.polynomial.legendre.leggauss(nodes)
    xs = [(hi[i] - lo[i]) / 2 * t + (hi[i] + lo[i]) / 2 for i in range(d)]
    ws = [(hi[i] - lo[i]) / 2 * w for i in range(d)]
    grid = np.stack(np.meshgrid(*xs, indexing="ij"), axis=-1).reshape(-1, d)
    weight = np.ones(())
    for wi in ws:
        weight = np.multiply.outer(weight, wi)
    mass = np.asarray(density(grid), dtype=float) * weight.ravel()
    powers = np.arange(degree + 1)
    P = grid[:, [v - 1 for v in vars], None] ** powers
    outer = P[:, 0, :] * mass[:, None]
    for i in range(1, len(vars)):
        outer = outer[..., None] * P[:, i, :].reshape((-1,) + (1,) * i + (degree + 1,))
    entries = outer.sum(axis=0)
    return MomentTable(vars, degree, entries, Provenance.QUADRATURE, "quadrature")


def analytic_moments(measure: AnalyticMeasure, vars, degree: int) -> MomentTable:
    return measure.moment_table(vars, degree)
