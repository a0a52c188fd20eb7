"""Finite probability spaces, partitions and laws of conditional laws.

A sub-sigma-algebra of a finite space is represented by the partition that
generates it, so every conditional law is computed exactly.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Mapping, Sequence

import numpy as np

from .errors import EmptyAtom, NonPositiveWeight, WeightSumOutOfTolerance
from .measures import DiscreteMeasure, NestedMeasure, canonical_key, canonicalize, dyadic_project

PROB_TOL = 1e-12


class FiniteProbSpace:
    """Outcomes ``0..n-1`` with probabilities and named random variables.

    Each random variable is stored as an ``(n, d)`` array; 1-D input is read
    as a scalar variable.
    """

    def __init__(self, prob, rvs: Mapping[str, np.ndarray] | None = None):
        p = np.asarray(prob, dtype=float).reshape(-1)
        if np.any(p <= 0):
            raise NonPositiveWeight("outcome probabilities must be > 0")
        if abs(p.sum() - 1.0) > PROB_TOL:
            raise WeightSumOutOfTolerance(f"probabilities sum to {p.sum()!r}")
        p.setflags(write=False)
        self.prob = p
        self.rvs: dict[str, np.ndarray] = {}
        for name, v in (rvs or {}).items():
            self.rvs[name] = self._as_rv(v)

    @property
    def n(self) -> int:
        return self.prob.shape[0]

    def _as_rv(self, v) -> np.ndarray:
        a = np.asarray(v, dtype=float)
        if a.ndim == 1:
            a = a.reshape(-1, 1)
        if a.shape[0] != self.n:
            raise ValueError(f"random variable has {a.shape[0]} values for {self.n} outcomes")
        a = a.copy()
        a.setflags(write=False)
        return a

    def with_rv(self, name: str, values) -> "FiniteProbSpace":
        out = FiniteProbSpace(self.prob, self.rvs)
        out.rvs[name] = out._as_rv(values)
        return out

    def law(self, name: str) -> DiscreteMeasure:
        return canonicalize(DiscreteMeasure(self.rvs[name], self.prob))

    def permuted(self, perm: Sequence[int]) -> "FiniteProbSpace":
        """The same space with outcomes relabeled: new outcome k is old ``perm[k]``."""
        perm = np.asarray(perm)
        return FiniteProbSpace(self.prob[perm], {k: v[perm] for k, v in self.rvs.items()})

    def to_dict(self) -> dict:
        return {"prob": self.prob.tolist(), "rvs": {k: v.tolist() for k, v in self.rvs.items()}}

    @classmethod
    def from_dict(cls, d: dict) -> "FiniteProbSpace":
        return cls(d["prob"], d.get("rvs", {}))


@dataclass(frozen=True)
class Partition:
    """Partition of the outcomes given by one integer label per outcome."""

    labels: tuple[int, ...]

    def __init__(self, labels):
        lab = np.asarray(labels).reshape(-1)
        # relabel by first occurrence so equal partitions compare equal
        _, first, inv = np.unique(lab, return_index=True, return_inverse=True)
        rank = np.empty(len(first), dtype=int)
        rank[np.argsort(first)] = np.arange(len(first))
        object.__setattr__(self, "labels", tuple(int(v) for v in rank[inv]))

    @classmethod
    def trivial(cls, n: int) -> "Partition":
        return cls(np.zeros(n, dtype=int))

    @classmethod
    def finest(cls, n: int) -> "Partition":
        return cls(np.arange(n))

    @classmethod
    def generated_by(cls, values) -> "Partition":
        """Partition into level sets of a (possibly vector) random variable."""
        a = np.asarray(values)
        if a.ndim == 1:
            a = a.reshape(-1, 1)
        _, inv = np.unique(a, axis=0, return_inverse=True)
        return cls(inv.reshape(-1))

    @property
    def n(self) -> int:
        return len(self.labels)

    @property
    def array(self) -> np.ndarray:
        return np.asarray(self.labels)

    @property
    def n_atoms(self) -> int:
        return max(self.labels) + 1

    def atoms(self) -> list[np.ndarray]:
        lab = self.array
        return [np.flatnonzero(lab == k) for k in range(self.n_atoms)]


def join(*parts: Partition) -> Partition:
    """Coarsest common refinement (the generated sigma-algebra of the union)."""
    stacked = np.stack([p.array for p in parts], axis=1)
    return Partition.generated_by(stacked)


def refines(fine: Partition, coarse: Partition) -> bool:
    """True iff every atom of ``fine`` lies inside one atom of ``coarse``,
    i.e. ``sigma(coarse)`` is contained in ``sigma(fine)``."""
    f, c = fine.array, coarse.array
    seen = {}
    for a, b in zip(f, c):
        if seen.setdefault(a, b) != b:
            return False
    return True


def measurable(part: Partition, wrt: Partition) -> bool:
    """Is ``sigma(part)`` contained in ``sigma(wrt)``?"""
    return refines(wrt, part)


def set_partitions(n: int, max_blocks: int | None = None) -> Iterator[tuple[int, ...]]:
    """All set partitions of ``n`` items as restricted growth strings, in
    lexicographic order."""
    k = n if max_blocks is None else max_blocks
    a = [0] * n

    def rec(i: int, m: int):
        if i == n:
            yield tuple(a)
            return
        for v in range(min(m + 2, k)):
            a[i] = v
            yield from rec(i + 1, max(m, v))

    if n == 0:
        yield ()
        return
    yield from rec(1, 0)


def _check_atoms(space: FiniteProbSpace, part: Partition) -> list[np.ndarray]:
    if part.n != space.n:
        raise ValueError(f"partition covers {part.n} outcomes, space has {space.n}")
    atoms = part.atoms()
    for k, idx in enumerate(atoms):
        if idx.size == 0 or space.prob[idx].sum() <= 0:
            raise EmptyAtom(f"atom {k} has zero probability")
    return atoms


def conditional_law(space: FiniteProbSpace, x: str, part: Partition) -> dict[int, DiscreteMeasure]:
    """Law of ``x`` on each atom, keyed by atom label."""
    vals = space.rvs[x]
    out = {}
    for k, idx in enumerate(_check_atoms(space, part)):
        p = space.prob[idx]
        out[k] = canonicalize(DiscreteMeasure(vals[idx], p / p.sum()))
    return out


def conditional_law_per_outcome(space: FiniteProbSpace, x: str, part: Partition) -> list[DiscreteMeasure]:
    """The random measure ``omega -> L_{x|G}(omega)``."""
    laws = conditional_law(space, x, part)
    return [laws[k] for k in part.labels]


def law_of_conditional_law(space: FiniteProbSpace, x: str, part: Partition) -> NestedMeasure:
    laws = conditional_law(space, x, part)
    atoms = [(float(space.prob[idx].sum()), laws[k]) for k, idx in enumerate(part.atoms())]
    return canonicalize(NestedMeasure(atoms))


def is_sub_sigma_of(space: FiniteProbSpace, part: Partition, x: str) -> bool:
    """``sigma(part)`` inside ``sigma(x)``: outcomes with equal x share an atom."""
    return measurable(part, Partition.generated_by(space.rvs[x]))


@dataclass(frozen=True)
class EquivVerdict:
    nested_equal: bool
    partitions_equal: bool
    sub_sigma_of_x: bool

    @property
    def status(self) -> str:
        if not self.sub_sigma_of_x:
            return "NotSubSigmaOfX"
        return "Equivalent" if self.nested_equal else "Distinct"


class EquivalenceViolation(AssertionError):
    """Nested laws and partitions disagree although both are inside sigma(X)."""


def prop_equiv_check(space: FiniteProbSpace, x: str, part1: Partition, part2: Partition) -> EquivVerdict:
    """Compare nested-law equality with partition equality.

    For partitions inside ``sigma(x)`` the two must agree; otherwise a soft
    ``NotSubSigmaOfX`` verdict is returned and no claim is made.
    """
    same_law = canonical_key(law_of_conditional_law(space, x, part1)) == canonical_key(
        law_of_conditional_law(space, x, part2)
    )
    # no null atoms, so a.s. equality is equality of the partitions
    same_part = part1 == part2
    inside = is_sub_sigma_of(space, part1, x) and is_sub_sigma_of(space, part2, x)
    verdict = EquivVerdict(same_law, same_part, inside)
    if inside and same_law != same_part:
        raise EquivalenceViolation(f"nested laws equal={same_law} but partitions equal={same_part}")
    return verdict


@dataclass(frozen=True)
class Realization:
    """Random variables ``(X, Y)`` whose law of ``L_{X|Y}`` is ``nested``."""

    space: FiniteProbSpace
    x: str
    y: str
    nested: NestedMeasure

    @property
    def partition(self) -> Partition:
        return Partition.generated_by(self.space.rvs[self.y])


def realize_nested_law(r: NestedMeasure, level: int | None = None) -> Realization:
    """Build a finite space carrying ``X, Y`` with ``L_{L_{X|Y}} = r``.

    Outcomes are pairs (outer atom i, inner support point k) with probability
    ``w_i * mu_i(x_k)``; ``Y = i + 1`` and ``X = x_k``. With ``level`` set, every
    inner measure (supported in [0,1)^d) is first replaced by its dyadic
    projection, and ``nested`` records the projected law.
    """
    r = canonicalize(r)
    if level is not None:
        r = canonicalize(NestedMeasure((w, dyadic_project(m, level)) for w, m in r.atoms))
    probs, xs, ys = [], [], []
    for i, (w, m) in enumerate(r.atoms):
        for pt, q in zip(m.points, m.weights):
            probs.append(w * q)
            xs.append(pt)
            ys.append(i + 1)
    prob = np.array(probs)
    prob = prob / prob.sum()
    space = FiniteProbSpace(prob, {"X": np.array(xs), "Y": np.array(ys, dtype=float)})
    return Realization(space, "X", "Y", r)


@dataclass(frozen=True)
class PartitionFiltration:
    """Partitions ``G_0..G_n`` plus increment partitions.

    ``increments[i]`` generates the fresh noise revealed over
    ``(t_i, t_{i+1}]``, so there are ``n`` increments for ``n + 1`` partitions.
    """

    partitions: tuple[Partition, ...]
    increments: tuple[Partition, ...] = field(default=())

    def __post_init__(self):
        object.__setattr__(self, "partitions", tuple(self.partitions))
        object.__setattr__(self, "increments", tuple(self.increments))
        if len(self.increments) != len(self.partitions) - 1:
            raise ValueError(
                f"{len(self.partitions)} partitions need {len(self.partitions) - 1} increments, "
                f"got {len(self.increments)}"
            )
        sizes = {p.n for p in self.partitions + self.increments}
        if len(sizes) != 1:
            raise ValueError("all partitions must live on the same space")

    @property
    def steps(self) -> int:
        return len(self.increments)

    def is_increasing(self) -> bool:
        return all(refines(b, a) for a, b in zip(self.partitions, self.partitions[1:]))

    @classmethod
    def full_information(cls, g0: Partition, increments: Sequence[Partition]) -> "PartitionFiltration":
        parts = [g0]
        for inc in increments:
            parts.append(join(parts[-1], inc))
        return cls(tuple(parts), tuple(increments))


def h_star_check(filt: PartitionFiltration) -> bool:
    """(H*): each ``G_j`` is measurable w.r.t. ``G_i`` joined with the
    increments over ``(t_i, t_j]``, for all ``i < j``."""
    G, inc = filt.partitions, filt.increments
    for i in range(len(G)):
        gen = G[i]
        for j in range(i + 1, len(G)):
            gen = join(gen, inc[j - 1])
            if not measurable(G[j], gen):
                return False
    return True


def _cond_independent(prob: np.ndarray, a: Partition, b: Partition, c: Partition, tol: float) -> bool:
    A, B, C = a.array, b.array, c.array
    for k in range(c.n_atoms):
        on = C == k
        pc = prob[on].sum()
        for i in np.unique(A[on]):
            pa = prob[on & (A == i)].sum()
            for j in np.unique(B[on]):
                pb = prob[on & (B == j)].sum()
                pab = prob[on & (A == i) & (B == j)].sum()
                if abs(pab * pc - pa * pb) > tol * max(pc * pc, 1e-300):
                    return False
    return True


def h_check(filt: PartitionFiltration, ambient: Sequence[Partition], prob, tol: float = 1e-12) -> bool:
    """(H): ``F_t`` and ``G_T`` conditionally independent given ``G_t``, for
    every time index, by direct enumeration over atoms."""
    prob = np.asarray(prob, dtype=float)
    if len(ambient) != len(filt.partitions):
        raise ValueError("ambient filtration must have one partition per time")
    GT = filt.partitions[-1]
    return all(
        _cond_independent(prob, F, GT, G, tol) for F, G in zip(ambient, filt.partitions)
    )


def mean_square_functional(r: NestedMeasure) -> float:
    """``int (m_mu)^2 r(dmu)``, a convex functional in the convex order."""
    return float(sum(w * float(m.weights @ m.points[:, 0]) ** 2 for w, m in r.atoms))
