"""Exponent-vector bases and monomial vectors.

Two truncations of the monomial basis are supported: total degree
(``sum(alpha) <= n``) and coordinate-wise degree (``max(alpha) <= n``).
Indices are 1-based variable labels; the columns of a point passed to
:func:`monomial_vector` follow ``basis.vars`` in order.
"""

from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass
from math import comb

import numpy as np

from .errors import InvalidArgumentError


class Mode(str, enum.Enum):
    TOTAL = "total"
    COORD = "coord"

    @classmethod
    def parse(cls, value) -> "Mode":
        if isinstance(value, Mode):
            return value
        aliases = {
            "total": cls.TOTAL,
            "totaldegree": cls.TOTAL,
            "coord": cls.COORD,
            "coordinatewise": cls.COORD,
            "coordinate-wise": cls.COORD,
        }
        try:
            return aliases[str(value).lower().replace("_", "")]
        except KeyError:
            raise InvalidArgumentError(f"unknown degree mode {value!r}") from None


@dataclass(frozen=True)
class MultiIndexBasis:
    """Ordered exponent vectors over a subset of variables.

    ``indices`` has shape ``(size, len(vars))`` and is sorted graded-lex:
    by total degree, then by exponents in descending lexicographic order,
    so ``(1, 0)`` precedes ``(0, 1)``.
    """

    vars: tuple[int, ...]
    degree: int
    mode: Mode
    indices: np.ndarray

    @property
    def size(self) -> int:
        return self.indices.shape[0]

    @property
    def nvars(self) -> int:
        return len(self.vars)

    def position(self, alpha) -> int:
        """Row of ``alpha`` in ``indices``; raises KeyError if absent."""
        hits = np.flatnonzero((self.indices == np.asarray(alpha)).all(axis=1))
        if hits.size == 0:
            raise KeyError(tuple(alpha))
        return int(hits[0])

    def __len__(self) -> int:
        return self.size


def expected_size(nvars: int, degree: int, mode) -> int:
    """``binomial(n + k, k)`` for total degree, ``(n + 1) ** k`` coordinate-wise."""
    mode = Mode.parse(mode)
    if mode is Mode.TOTAL:
        return comb(degree + nvars, nvars)
    return (degree + 1) ** nvars


def enumerate_basis(vars, degree: int, mode=Mode.COORD) -> MultiIndexBasis:
    vars = tuple(int(v) for v in vars)
    mode = Mode.parse(mode)
    if not vars:
        raise InvalidArgumentError("variable set must be nonempty")
    if len(set(vars)) != len(vars):
        raise InvalidArgumentError(f"duplicate variable index in {vars}")
    if degree < 0:
        raise InvalidArgumentError(f"degree must be nonnegative, got {degree}")

    k = len(vars)
    alphas = itertools.product(range(degree + 1), repeat=k)
    if mode is Mode.TOTAL:
        alphas = (a for a in alphas if sum(a) <= degree)
    ordered = sorted(alphas, key=lambda a: (sum(a), tuple(-e for e in a)))
    indices = np.array(ordered, dtype=np.uint16).reshape(-1, k)
    indices.setflags(write=False)
    return MultiIndexBasis(vars=vars, degree=int(degree), mode=mode, indices=indices)


def _as_points(basis: MultiIndexBasis, point) -> tuple[np.ndarray, bool]:
    pts = np.asarray(point, dtype=float)
    single = pts.ndim == 1
    pts = np.atleast_2d(pts)
    if pts.ndim != 2 or pts.shape[1] != basis.nvars:
        raise InvalidArgumentError(
            f"point dimension {pts.shape[-1]} does not match basis over {basis.nvars} variables"
        )
    return pts, single


def _gather(basis: MultiIndexBasis, table: np.ndarray) -> np.ndarray:
    # table[p, i, a] holds the per-coordinate factor for exponent a of variable i
    idx = basis.indices.astype(np.intp)
    out = np.ones((table.shape[0], basis.size))
    for i in range(basis.nvars):
        out *= table[:, i, idx[:, i]]
    return out


def monomial_vector(basis: MultiIndexBasis, point) -> np.ndarray:
    """Evaluate ``[z^alpha for alpha in basis]``.

    ``point`` may be a single vector over ``basis.vars`` or a 2-D array with
    one point per row, in which case one row per point is returned.
    """
    pts, single = _as_points(basis, point)
    powers = np.arange(basis.degree + 1)
    table = pts[:, :, None] ** powers
    out = _gather(basis, table)
    return out[0] if single else out


def _box_power_averages(z: np.ndarray, half: np.ndarray, degree: int) -> np.ndarray:
    """Mean of y**a over [z - half, z + half], for a = 0..degree.

    Binomial expansion of the antiderivative difference; only even powers of
    the half-width survive, so nothing cancels as the box shrinks.
    """
    out = np.zeros(z.shape + (degree + 1,))
    for a in range(degree + 1):
        acc = np.zeros_like(z)
        for j in range(0, a + 1, 2):
            acc = acc + comb(a, j) * z ** (a - j) * half**j / (j + 1)
        out[..., a] = acc
    return out


def averaged_monomial_vector(basis: MultiIndexBasis, point, epsilon) -> np.ndarray:
    """Average of the monomial vector over the L-infinity box of side ``epsilon``.

    The box around ``z`` is ``{y : |y_i - z_i| <= epsilon / 2}`` with volume
    ``epsilon ** k``. ``epsilon`` may also be a per-coordinate array of side
    lengths, which is how an affinely rescaled box is expressed.
    """
    pts, single = _as_points(basis, point)
    eps = np.broadcast_to(np.asarray(epsilon, dtype=float), (basis.nvars,))
    if np.any(~np.isfinite(eps)) or np.any(eps <= 0):
        raise InvalidArgumentError(f"epsilon must be positive, got {epsilon!r}")
    half = np.broadcast_to(eps / 2.0, pts.shape)
    table = _box_power_averages(pts, half, basis.degree)
    out = _gather(basis, table)
    return out[0] if single else out


def scaled_monomial_vector(basis: MultiIndexBasis, point, epsilon=None) -> tuple[np.ndarray, np.ndarray]:
    """Overflow-safe monomial (or box-averaged) vector.

    Returns ``(V, log_scale)`` with ``V * exp(log_scale)[:, None]`` equal to the
    plain vector, and every entry of ``V`` bounded by one in magnitude for
    ``epsilon=None``. Coordinates are divided by ``max(1, |z_i|)`` (one common
    factor in total-degree mode) before any power is taken.
    """
    pts, _ = _as_points(basis, point)
    n = basis.degree
    idx = basis.indices.astype(np.intp)
    if basis.mode is Mode.COORD:
        c = np.maximum(1.0, np.abs(pts))
    else:
        c = np.broadcast_to(np.maximum(1.0, np.abs(pts).max(axis=1, keepdims=True)), pts.shape)
    logc = np.log(c)
    if epsilon is None:
        table = (pts / c)[:, :, None] ** np.arange(n + 1)
    else:
        eps = np.broadcast_to(np.asarray(epsilon, dtype=float), (basis.nvars,))
        if np.any(~np.isfinite(eps)) or np.any(eps <= 0):
            raise InvalidArgumentError(f"epsilon must be positive, got {epsilon!r}")
        table = _box_power_averages(pts / c, eps / 2.0 / c, n)
    V = _gather(basis, table)
    if basis.mode is Mode.COORD:
        V *= np.exp(logc @ (idx - n).T)
        log_scale = n * logc.sum(axis=1)
    else:
        V *= np.exp(logc[:, :1] * (idx.sum(axis=1) - n))
        log_scale = n * logc[:, 0]
    return V, log_scale
