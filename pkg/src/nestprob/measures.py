"""Discrete measures on R^d and finite mixtures of them (nested measures).

Both types are immutable values. Every operation returns a fresh object, so
measures can be used as memoization keys through :func:`canonical_key`.
"""
from __future__ import annotations

import math
from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import (
    NonPositiveWeight,
    SupportOutOfUnitCube,
    WeightSumOutOfTolerance,
)

WEIGHT_SUM_TOL = 1e-9
POINT_MERGE_TOL = 1e-12
KEY_DIGITS = 10


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float, copy=True)
    a.setflags(write=False)
    return a


def _check_weights(w: np.ndarray, tol: float = WEIGHT_SUM_TOL) -> None:
    if w.size == 0:
        raise WeightSumOutOfTolerance("measure has no atoms")
    if np.any(~np.isfinite(w)) or np.any(w <= 0):
        raise NonPositiveWeight(f"weights must be > 0, got min {w.min()!r}")
    s = math.fsum(w)
    if abs(s - 1.0) > tol:
        raise WeightSumOutOfTolerance(f"weights sum to {s!r}, not 1")


def _normalize(w: np.ndarray) -> np.ndarray:
    s = math.fsum(w)
    # leave already-normalized vectors untouched so canonicalize is idempotent
    if abs(s - 1.0) <= 1e-14:
        return w
    return w / s


class DiscreteMeasure:
    """Finitely supported probability measure on R^d.

    ``points`` has shape ``(n, d)``; a 1-D array is read as ``n`` scalar
    points. Construction validates weights but does not sort or merge; use
    :func:`canonicalize` (or :meth:`from_points`) for that.
    """

    __slots__ = ("points", "weights")

    def __init__(self, points, weights):
        pts = np.asarray(points, dtype=float)
        if pts.ndim == 0:
            pts = pts.reshape(1, 1)
        elif pts.ndim == 1:
            pts = pts.reshape(-1, 1)
        w = np.asarray(weights, dtype=float).reshape(-1)
        if pts.shape[0] != w.shape[0]:
            raise ValueError(f"{pts.shape[0]} points but {w.shape[0]} weights")
        _check_weights(w)
        object.__setattr__(self, "points", _readonly(pts))
        object.__setattr__(self, "weights", _readonly(w))

    def __setattr__(self, name, value):
        raise AttributeError("DiscreteMeasure is immutable")

    @classmethod
    def from_points(cls, points, weights=None) -> "DiscreteMeasure":
        """Canonical measure; uniform weights when ``weights`` is omitted."""
        pts = np.asarray(points, dtype=float)
        n = 1 if pts.ndim == 0 else pts.shape[0]
        if weights is None:
            weights = np.full(n, 1.0 / n)
        return canonicalize(cls(pts, weights))

    @classmethod
    def dirac(cls, x) -> "DiscreteMeasure":
        x = np.atleast_1d(np.asarray(x, dtype=float))
        return cls(x.reshape(1, -1), [1.0])

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    @property
    def size(self) -> int:
        return self.points.shape[0]

    def __len__(self) -> int:
        return self.size

    def __eq__(self, other) -> bool:
        if not isinstance(other, DiscreteMeasure):
            return NotImplemented
        return canonical_key(self) == canonical_key(other)

    def __hash__(self) -> int:
        return hash(canonical_key(self))

    def __repr__(self) -> str:
        if self.dim == 1:
            pts = ", ".join(f"{p:.6g}" for p in self.points[:, 0])
        else:
            pts = ", ".join(str(tuple(np.round(p, 6))) for p in self.points)
        ws = ", ".join(f"{w:.6g}" for w in self.weights)
        return f"DiscreteMeasure(points=[{pts}], weights=[{ws}])"

    def to_dict(self) -> dict:
        return {"points": self.points.tolist(), "weights": self.weights.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "DiscreteMeasure":
        return cls(d["points"], d["weights"])


class NestedMeasure:
    """Finite mixture ``sum_i w_i delta_{mu_i}`` of discrete measures."""

    __slots__ = ("weights", "inners")

    def __init__(self, atoms: Iterable[tuple[float, DiscreteMeasure]]):
        atoms = list(atoms)
        if not atoms:
            raise WeightSumOutOfTolerance("nested measure has no atoms")
        w = np.array([float(a[0]) for a in atoms])
        inners = tuple(a[1] for a in atoms)
        _check_weights(w)
        dims = {m.dim for m in inners}
        if len(dims) != 1:
            raise ValueError(f"inner measures have mixed dimensions {sorted(dims)}")
        object.__setattr__(self, "weights", _readonly(w))
        object.__setattr__(self, "inners", inners)

    def __setattr__(self, name, value):
        raise AttributeError("NestedMeasure is immutable")

    @classmethod
    def dirac(cls, mu: DiscreteMeasure) -> "NestedMeasure":
        return cls([(1.0, mu)])

    @property
    def atoms(self) -> list[tuple[float, DiscreteMeasure]]:
        return list(zip(self.weights.tolist(), self.inners))

    @property
    def dim(self) -> int:
        return self.inners[0].dim

    @property
    def size(self) -> int:
        return len(self.inners)

    def __len__(self) -> int:
        return self.size

    def __eq__(self, other) -> bool:
        if not isinstance(other, NestedMeasure):
            return NotImplemented
        return canonical_key(self) == canonical_key(other)

    def __hash__(self) -> int:
        return hash(canonical_key(self))

    def __repr__(self) -> str:
        body = ", ".join(f"{w:.6g}*{m!r}" for w, m in self.atoms)
        return f"NestedMeasure([{body}])"

    def to_dict(self) -> dict:
        return {"atoms": [{"w": w, "inner": m.to_dict()} for w, m in self.atoms]}

    @classmethod
    def from_dict(cls, d: dict) -> "NestedMeasure":
        return cls((a["w"], DiscreteMeasure.from_dict(a["inner"])) for a in d["atoms"])


def measure_from_dict(d: dict) -> DiscreteMeasure | NestedMeasure:
    """Decode either JSON layout."""
    if "atoms" in d:
        return NestedMeasure.from_dict(d)
    return DiscreteMeasure.from_dict(d)


def _canonical_discrete(mu: DiscreteMeasure) -> DiscreteMeasure:
    # bucket points at the merge tolerance; sorting on buckets keeps
    # near-duplicates adjacent in any dimension
    buckets = np.round(mu.points / POINT_MERGE_TOL)
    order = np.lexsort(buckets.T[::-1])
    pts, w, buckets = mu.points[order], mu.weights[order], buckets[order]
    keep_pts, keep_w = [], []
    last = None
    for p, b, wi in zip(pts, buckets, w):
        bt = tuple(b)
        if last is not None and bt == last:
            keep_w[-1] += wi
            continue
        keep_pts.append(p)
        keep_w.append(wi)
        last = bt
    new_w = _normalize(np.array(keep_w))
    out = object.__new__(DiscreteMeasure)
    object.__setattr__(out, "points", _readonly(np.array(keep_pts)))
    object.__setattr__(out, "weights", _readonly(new_w))
    return out


def _canonical_nested(r: NestedMeasure, digits: int) -> NestedMeasure:
    merged: dict[tuple, list] = {}
    for w, m in zip(r.weights, r.inners):
        cm = _canonical_discrete(m)
        k = canonical_key(cm, digits)
        if k in merged:
            merged[k][0] += w
        else:
            merged[k] = [w, cm]
    keys = sorted(merged)
    w = _normalize(np.array([merged[k][0] for k in keys]))
    out = object.__new__(NestedMeasure)
    object.__setattr__(out, "weights", _readonly(w))
    object.__setattr__(out, "inners", tuple(merged[k][1] for k in keys))
    return out


def canonicalize(m, digits: int = KEY_DIGITS):
    """Sort atoms, merge duplicates and renormalize. Idempotent."""
    if isinstance(m, NestedMeasure):
        return _canonical_nested(m, digits)
    if isinstance(m, DiscreteMeasure):
        return _canonical_discrete(m)
    raise TypeError(f"cannot canonicalize {type(m).__name__}")


def _q(x: float, digits: int) -> float:
    # + 0.0 folds -0.0 into 0.0
    return round(float(x), digits) + 0.0


def canonical_key(m, digits: int = KEY_DIGITS) -> tuple:
    """Hashable total-order serialization of a measure.

    Equal keys mean the measures agree after canonicalization, up to the
    quantization of points and weights to ``digits`` decimals.
    """
    if isinstance(m, DiscreteMeasure):
        c = _canonical_discrete(m)
        return tuple(
            (tuple(_q(v, digits) for v in p), _q(w, digits))
            for p, w in zip(c.points, c.weights)
        )
    if isinstance(m, NestedMeasure):
        inner = {}
        for w, mu in zip(m.weights, m.inners):
            k = canonical_key(mu, digits)
            inner[k] = inner.get(k, 0.0) + w
        return tuple((k, _q(inner[k], digits)) for k in sorted(inner))
    raise TypeError(f"no canonical key for {type(m).__name__}")


def mean(mu: DiscreteMeasure) -> np.ndarray:
    """First moment as a length-d vector."""
    return mu.weights @ mu.points


def mean_scalar(mu: DiscreteMeasure) -> float:
    return float(mu.weights @ mu.points[:, 0])


def second_moment(mu: DiscreteMeasure) -> float:
    return float(mu.weights @ np.sum(mu.points**2, axis=1))


def variance(mu: DiscreteMeasure) -> float:
    m = mean(mu)
    return float(second_moment(mu) - m @ m)


def push_forward(mu: DiscreteMeasure, f: Callable[[np.ndarray], np.ndarray]) -> DiscreteMeasure:
    """Image measure ``f_# mu``; ``f`` maps one point (length-d array) to R^k."""
    img = np.array([np.atleast_1d(np.asarray(f(p), dtype=float)) for p in mu.points])
    return canonicalize(DiscreteMeasure(img, mu.weights))


def push_forward_nested(r: NestedMeasure, f) -> NestedMeasure:
    return canonicalize(NestedMeasure((w, push_forward(m, f)) for w, m in r.atoms))


def logistic(x):
    """Coordinatewise bijection R^d -> (0, 1)^d."""
    x = np.asarray(x, dtype=float)
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def logit(y):
    """Inverse of :func:`logistic`."""
    y = np.asarray(y, dtype=float)
    return np.log(y) - np.log1p(-y)


def dyadic_project(mu: DiscreteMeasure, n: int) -> DiscreteMeasure:
    """Project ``mu`` on [0,1)^d onto the level-``n`` dyadic grid.

    Each grid point x != 0 gets ``floor(4^{dn} mu(cell(x))) / 4^{dn}``, where
    cell(x) is the half-open cube of side 2^-n with lower corner x; the
    truncation remainder goes to the origin.
    """
    if n < 1:
        raise ValueError("level n must be >= 1")
    pts = mu.points
    if np.any(pts < 0.0) or np.any(pts >= 1.0):
        raise SupportOutOfUnitCube("support must lie in [0, 1)^d")
    d = mu.dim
    scale = 2.0**n
    quantum = 2.0 ** (2 * d * n)
    cells = np.floor(pts * scale).astype(np.int64)
    mass: dict[tuple, list[float]] = {}
    for c, w in zip(map(tuple, cells), mu.weights):
        mass.setdefault(c, []).append(w)
    origin = (0,) * d
    out_pts, out_w = [], []
    for c in sorted(mass):
        if c == origin:
            continue
        k = math.floor(math.fsum(mass[c]) * quantum)
        if k > 0:
            out_pts.append(np.array(c, dtype=float) / scale)
            out_w.append(k / quantum)
    rest = 1.0 - math.fsum(out_w)
    if rest > 0:
        out_pts.insert(0, np.zeros(d))
        out_w.insert(0, rest)
    return canonicalize(DiscreteMeasure(np.array(out_pts), np.array(out_w)))


def mixture(parts: Sequence[tuple[float, NestedMeasure]]) -> NestedMeasure:
    """Convex combination of nested measures, e.g. ``theta r2 + (1-theta) r1``."""
    atoms = []
    for lam, r in parts:
        if lam <= 0:
            continue
        atoms.extend((lam * w, m) for w, m in r.atoms)
    return canonicalize(NestedMeasure(atoms))


def flatten(r: NestedMeasure) -> DiscreteMeasure:
    """Intensity measure ``int mu r(dmu)``."""
    pts = np.vstack([m.points for m in r.inners])
    w = np.concatenate([wi * m.weights for wi, m in r.atoms])
    return canonicalize(DiscreteMeasure(pts, w))
