"""Static insider problem with a Gaussian prior, plus two small games.

The insider chooses which information about ``X ~ N(0, 1)`` to reveal. For an
information partition ``G`` the value is

    u(G) = E[ R |E[X|G] - E[X]| + 0.5 Var(X|G) ],

maximized in closed form at a sign split (R >= R0) or at the camouflage set
``{-a_R < X < 0} u {X > a_R}`` (R < R0).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations
from typing import Sequence

import numpy as np
from scipy import integrate, special, stats

from .conditional import set_partitions
from .errors import EmptyAtom, NegativeA, NonPositiveR, ROutOfRange
from .rng import ordered_map, stream


def r0() -> float:
    """``E|X| = sqrt(2/pi)`` for a standard normal."""
    return math.sqrt(2.0 / math.pi)


def I_func(a: float) -> float:
    """``R0 - 2 E[|X| 1{|X| <= a}] = R0 (2 exp(-a^2/2) - 1)``."""
    if a < 0:
        raise NegativeA(f"a must be >= 0, got {a}")
    return r0() * (2.0 * math.exp(-0.5 * a * a) - 1.0)


def I_quad(a: float) -> float:
    """:func:`I_func` by adaptive quadrature, used as an independent check."""
    if a < 0:
        raise NegativeA(f"a must be >= 0, got {a}")
    inner, _ = integrate.quad(lambda x: x * stats.norm.pdf(x), 0.0, a, epsabs=1e-13, epsrel=1e-13)
    return r0() - 4.0 * inner


def a_closed_form(R: float) -> float:
    R0 = r0()
    return math.sqrt(2.0 * math.log(2.0 * R0 / (R + R0)))


def invert_I(R: float, tol: float = 1e-14) -> float:
    """Unique ``a_R > 0`` with ``I(a_R) = R``, by bisection."""
    R0 = r0()
    if not (0.0 < R < R0):
        raise ROutOfRange(f"R must lie in (0, {R0}), got {R}")
    lo, hi = 0.0, 1.0
    while I_func(hi) > R:
        hi *= 2.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if I_func(mid) > R:
            lo = mid
        else:
            hi = mid
        if hi - lo < tol:
            break
    return 0.5 * (lo + hi)


@dataclass(frozen=True)
class StaticInsiderSolution:
    R: float
    V: float
    regime: str                 # "AboveR0" or "BelowR0"
    a_R: float | None
    optimal_partition_description: str


def insider_value(R: float) -> StaticInsiderSolution:
    if R <= 0:
        raise NonPositiveR(f"R must be > 0, got {R}")
    R0 = r0()
    if R >= R0:
        V = R0 * R - 1.0 / math.pi + 0.5
        return StaticInsiderSolution(R, V, "AboveR0", None, "sigma({X > 0})")
    a = invert_I(R)
    return StaticInsiderSolution(
        R, 0.5 * R * R + 0.5, "BelowR0", a, f"sigma({{-{a:.6g} < X < 0}} u {{X > {a:.6g}}})"
    )


# discretized standard normal

@dataclass(frozen=True)
class GaussianCells:
    """Standard normal cut into ``N`` equal-probability quantile cells.

    ``mean[k]`` and ``second[k]`` are the exact conditional moments on cell k.
    """

    edges: np.ndarray
    prob: np.ndarray
    mean: np.ndarray
    second: np.ndarray

    @property
    def n(self) -> int:
        return self.prob.shape[0]


def gaussian_cells(N: int) -> GaussianCells:
    edges = stats.norm.ppf(np.linspace(0.0, 1.0, N + 1))
    pdf = stats.norm.pdf(edges)
    # x * phi(x) -> 0 at the infinite ends
    xpdf = np.where(np.isfinite(edges), edges, 0.0) * pdf
    prob = np.diff(special.ndtr(edges))
    mean = (pdf[:-1] - pdf[1:]) / prob
    second = 1.0 + (xpdf[:-1] - xpdf[1:]) / prob
    return GaussianCells(edges, prob, mean, second)


def _atom_moments(cells: GaussianCells, labels: np.ndarray):
    labels = np.asarray(labels)
    if labels.shape[0] != cells.n:
        raise ValueError(f"{labels.shape[0]} labels for {cells.n} cells")
    _, labels = np.unique(labels, return_inverse=True)
    k = int(labels.max()) + 1
    p = np.bincount(labels, weights=cells.prob, minlength=k)
    if np.any(p <= 0):
        raise EmptyAtom("partition has an atom of zero probability")
    m1 = np.bincount(labels, weights=cells.prob * cells.mean, minlength=k) / p
    m2 = np.bincount(labels, weights=cells.prob * cells.second, minlength=k) / p
    return p, m1, m2


def u_of_partition(cells: GaussianCells, labels, R: float) -> float:
    """``E[R |E[X|G] - E[X]| + 0.5 Var(X|G)]`` for the partition of cells."""
    p, m1, m2 = _atom_moments(cells, np.asarray(labels))
    ex = float(cells.prob @ cells.mean)
    return float(p @ (R * np.abs(m1 - ex) + 0.5 * (m2 - m1 * m1)))


def tilde_u(cells: GaussianCells, labels, R: float) -> float:
    """``E[(|E[X|G]| - R)^2]``; ``u = (R^2 + 1 - tilde_u) / 2``."""
    p, m1, _ = _atom_moments(cells, np.asarray(labels))
    return float(p @ (np.abs(m1) - R) ** 2)


def conditional_mean_abs(cells: GaussianCells, labels) -> np.ndarray:
    """``|E[X|G]|`` per cell."""
    labels = np.asarray(labels)
    _, m1, _ = _atom_moments(cells, labels)
    return np.abs(m1[np.unique(labels, return_inverse=True)[1]])


def sign_partition(cells: GaussianCells) -> np.ndarray:
    return (cells.mean > 0).astype(int)


def camouflage_partition(cells: GaussianCells, a: float) -> np.ndarray:
    """Cells (by their mean) in ``{-a < X < 0} u {X > a}`` get label 1."""
    m = cells.mean
    return (((m > -a) & (m < 0)) | (m > a)).astype(int)


def optimal_partition(cells: GaussianCells, R: float) -> np.ndarray:
    sol = insider_value(R)
    if sol.regime == "AboveR0":
        return sign_partition(cells)
    return camouflage_partition(cells, sol.a_R)


def discretized_value(R: float, N: int = 1000) -> float:
    cells = gaussian_cells(N)
    return u_of_partition(cells, optimal_partition(cells, R), R)


@dataclass(frozen=True)
class BruteForceResult:
    value: float
    labels: tuple[int, ...]
    exhaustive: bool


def _local_search(cells: GaussianCells, R: float, k: int, start: np.ndarray) -> tuple[float, np.ndarray]:
    best = np.array(start)
    best_val = u_of_partition(cells, best, R)
    improved = True
    while improved:
        improved = False
        for i in range(cells.n):
            for lab in range(k):
                if lab == best[i]:
                    continue
                cand = best.copy()
                cand[i] = lab
                if np.setdiff1d(np.arange(cand.max() + 1), cand).size:
                    continue
                v = u_of_partition(cells, cand, R)
                if v > best_val + 1e-15:
                    best, best_val, improved = cand, v, True
    return best_val, best


def brute_force_static(R: float, N: int = 12, k: int = 2) -> BruteForceResult:
    """Best partition of ``N`` quantile cells into at most ``k`` atoms.

    Exhaustive over restricted growth strings when ``N <= 16``; ties go to the
    lexicographically smallest label vector. Larger ``N`` falls back to a
    single-cell-move local search started from the closed-form optimizer.
    """
    cells = gaussian_cells(N)
    if N <= 16:
        cands = list(set_partitions(N, max_blocks=k))
        vals = ordered_map(lambda lab: u_of_partition(cells, np.array(lab), R), cands)
        best = int(np.argmax(vals))   # first maximum = lexicographically smallest
        return BruteForceResult(float(vals[best]), cands[best], True)
    start = optimal_partition(cells, R) if k >= 2 else np.zeros(N, dtype=int)
    val, lab = _local_search(cells, R, k, start)
    return BruteForceResult(val, tuple(int(v) for v in lab), False)


# asymmetric-information Nash game

def nash_value(lam: float, disclose: str) -> float:
    """Player 1's equilibrium value ``1/4 + (3/4 - lam) E[E[xi|G]^2]``."""
    second = {"None": 0.0, "Full": 1.0}
    if disclose not in second:
        raise ValueError(f"disclose must be 'None' or 'Full', got {disclose!r}")
    return 0.25 + (0.75 - lam) * second[disclose]


def nash_equilibrium(lam: float, disclose: str, xi, prob, tol: float = 1e-15):
    """Iterate best responses on a discrete prior ``(xi, prob)``.

    ``alpha1 = (xi + alpha2) / 2`` and ``alpha2 = E[xi + alpha1 | G] / 2`` form
    a contraction with factor 1/4. Returns ``(J1, alpha1, alpha2)`` with all
    expectations exact on the discrete law.
    """
    if disclose not in ("None", "Full"):
        raise ValueError(f"disclose must be 'None' or 'Full', got {disclose!r}")
    xi = np.asarray(xi, dtype=float)
    p = np.asarray(prob, dtype=float)
    full = disclose == "Full"
    a1 = np.zeros_like(xi)
    a2 = np.zeros_like(xi)
    for _ in range(500):
        s = xi + a1
        new2 = 0.5 * (s if full else np.full_like(xi, p @ s))
        new1 = 0.5 * (xi + new2)
        step = max(np.max(np.abs(new1 - a1)), np.max(np.abs(new2 - a2)))
        a1, a2 = new1, new2
        if step < tol:
            break
    X = xi + a1 + a2
    return float(p @ (a1 * X - 2 * a1**2 - lam * a2**2)), a1, a2


def nash_mc(lam: float, disclose: str, n: int = 10**6, seed: int = 0) -> tuple[float, float]:
    """Monte Carlo estimate of Player 1's value at the closed-form equilibrium."""
    xi = stream(seed, 0).standard_normal(n)
    cond = xi if disclose == "Full" else np.zeros(n)
    a1 = 0.5 * (xi + cond)
    a2 = cond
    X = xi + a1 + a2
    j = a1 * X - 2 * a1**2 - lam * a2**2
    return float(j.mean()), float(j.std(ddof=1) / math.sqrt(n))


# Braess network

_BRAESS_PATHS = {"ABD": ("AB", "BD"), "ACD": ("AC", "CD"), "ABCD": ("AB", "BC", "CD")}


def _solve_exact(A: list[list[Fraction]], b: list[Fraction]) -> list[Fraction] | None:
    n = len(A)
    M = [row[:] + [rhs] for row, rhs in zip(A, b)]
    for c in range(n):
        piv = next((r for r in range(c, n) if M[r][c] != 0), None)
        if piv is None:
            return None
        M[c], M[piv] = M[piv], M[c]
        for r in range(n):
            if r != c and M[r][c] != 0:
                f = M[r][c] / M[c][c]
                M[r] = [x - f * y for x, y in zip(M[r], M[c])]
    return [M[i][n] / M[i][i] for i in range(n)]


def wardrop(links: dict[str, tuple[Fraction, Fraction]], paths: dict[str, Sequence[str]], demand=Fraction(1)):
    """Wardrop equilibrium for affine link costs ``a*x + b`` by support enumeration.

    Returns ``(cost, flows)``: every used path has the common cost and no
    unused path is cheaper.
    """
    names = list(paths)

    def path_cost(flow: dict[str, Fraction], pth) -> Fraction:
        load = {e: sum(flow[q] for q in names if e in paths[q]) for e in links}
        return sum(links[e][0] * load[e] + links[e][1] for e in paths[pth])

    for size in range(1, len(names) + 1):
        for support in combinations(names, size):
            # unknowns: flows on the support plus the common cost
            A, b = [], []
            for pth in support:
                row = []
                for q in support:
                    row.append(sum(links[e][0] for e in paths[pth] if e in paths[q]))
                row.append(Fraction(-1))
                A.append(row)
                b.append(-sum(links[e][1] for e in paths[pth]))
            A.append([Fraction(1)] * size + [Fraction(0)])
            b.append(demand)
            sol = _solve_exact(A, b)
            if sol is None or any(f < 0 for f in sol[:-1]):
                continue
            flow = {q: Fraction(0) for q in names}
            flow.update(dict(zip(support, sol[:-1])))
            c = sol[-1]
            if all(path_cost(flow, q) >= c for q in names if q not in support):
                return c, flow
    raise RuntimeError("no Wardrop equilibrium found")


def braess_cost(with_link: bool, link_cost: float = 0.0) -> float:
    """Per-driver equilibrium cost on the four-node network, unit demand."""
    one, zero = Fraction(1), Fraction(0)
    links = {"AB": (one, zero), "BD": (zero, one), "AC": (zero, one), "CD": (one, zero)}
    paths = {k: v for k, v in _BRAESS_PATHS.items() if k != "ABCD"}
    if with_link and math.isfinite(link_cost):
        links["BC"] = (zero, Fraction(link_cost))
        paths["ABCD"] = _BRAESS_PATHS["ABCD"]
    cost, _ = wardrop(links, paths)
    return float(cost)
