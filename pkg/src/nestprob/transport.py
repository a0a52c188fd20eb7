"""Exact Wasserstein distances between discrete and nested measures.

Couplings come from the transportation linear program solved by the HiGHS
dual simplex (``scipy.optimize.linprog``), so optimal couplings are vertex
solutions and accurate to rounding. No entropic regularization.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog
from scipy.sparse import coo_matrix

from .errors import DimensionMismatch, NotOneLipschitz
from .measures import DiscreteMeasure, NestedMeasure
from .rng import ordered_map

LIPSCHITZ_TOL = 1e-12


@dataclass(frozen=True)
class TransportResult:
    """Optimal value and coupling of a transportation problem."""

    cost: float            # minimal total cost, i.e. W_p^p
    coupling: np.ndarray   # shape (m, n), rows = first marginal
    row_potential: np.ndarray
    col_potential: np.ndarray


def cost_matrix(x: np.ndarray, y: np.ndarray, p: float) -> np.ndarray:
    """``|x_i - y_j|^p`` for Euclidean norm."""
    diff = x[:, None, :] - y[None, :, :]
    dist = np.sqrt(np.sum(diff * diff, axis=-1))
    return dist**p


def solve_transport(a: np.ndarray, b: np.ndarray, C: np.ndarray) -> TransportResult:
    """Minimize ``<pi, C>`` over couplings of weight vectors ``a`` and ``b``."""
    m, n = C.shape
    if m == 1 or n == 1:
        pi = np.outer(a, b)
        cost = float(np.sum(pi * C))
        if m == 1:
            return TransportResult(cost, pi, np.zeros(1), C[0].copy())
        return TransportResult(cost, pi, C[:, 0].copy(), np.zeros(1))
    rows = np.concatenate([np.repeat(np.arange(m), n), m + np.tile(np.arange(n), m)])
    cols = np.concatenate([np.arange(m * n), np.arange(m * n)])
    A = coo_matrix((np.ones(2 * m * n), (rows, cols)), shape=(m + n, m * n)).tocsr()
    beq = np.concatenate([a, b])
    res = linprog(
        C.ravel(), A_eq=A, b_eq=beq, bounds=(0, None), method="highs-ds",
        options={"primal_feasibility_tolerance": 1e-10, "dual_feasibility_tolerance": 1e-10},
    )
    if res.status != 0:
        raise RuntimeError(f"transport LP failed: {res.message}")
    pi = np.maximum(res.x.reshape(m, n), 0.0)
    duals = res.eqlin.marginals
    cost = float(np.sum(pi * C))
    return TransportResult(max(cost, 0.0), pi, duals[:m].copy(), duals[m:].copy())


def _check_dims(d1: int, d2: int) -> None:
    if d1 != d2:
        raise DimensionMismatch(f"dimension {d1} vs {d2}")


def wp(mu1: DiscreteMeasure, mu2: DiscreteMeasure, p: float = 2.0) -> tuple[float, np.ndarray]:
    """``W_p(mu1, mu2)`` and an optimal coupling."""
    if p < 1:
        raise ValueError("p must be >= 1")
    _check_dims(mu1.dim, mu2.dim)
    C = cost_matrix(mu1.points, mu2.points, p)
    res = solve_transport(mu1.weights, mu2.weights, C)
    return res.cost ** (1.0 / p), res.coupling


def wp_pow(mu1: DiscreteMeasure, mu2: DiscreteMeasure, p: float = 2.0) -> float:
    """``W_p^p(mu1, mu2)``."""
    _check_dims(mu1.dim, mu2.dim)
    return solve_transport(mu1.weights, mu2.weights, cost_matrix(mu1.points, mu2.points, p)).cost


def wp_1d(mu1: DiscreteMeasure, mu2: DiscreteMeasure, p: float = 2.0) -> float:
    """``W_p`` on the line via the monotone (quantile) coupling."""
    if mu1.dim != 1 or mu2.dim != 1:
        raise DimensionMismatch("wp_1d needs one-dimensional measures")
    x, a = mu1.points[:, 0], mu1.weights
    y, b = mu2.points[:, 0], mu2.weights
    ix, iy = np.argsort(x, kind="stable"), np.argsort(y, kind="stable")
    x, a, y, b = x[ix], a[ix], y[iy], b[iy]
    ca, cb = np.cumsum(a), np.cumsum(b)
    ca[-1] = cb[-1] = 1.0
    # merged quantile levels; each slice pairs one x-atom with one y-atom
    levels = np.unique(np.concatenate([[0.0], ca, cb]))
    levels = levels[levels <= 1.0]
    mids = 0.5 * (levels[:-1] + levels[1:])
    lengths = np.diff(levels)
    i = np.minimum(np.searchsorted(ca, mids), len(x) - 1)
    j = np.minimum(np.searchsorted(cb, mids), len(y) - 1)
    total = float(np.sum(lengths * np.abs(x[i] - y[j]) ** p))
    return total ** (1.0 / p)


def nested_cost_matrix(r1: NestedMeasure, r2: NestedMeasure, p: float) -> np.ndarray:
    """Ground costs ``W_p^p(mu_i, nu_j)`` between inner atoms."""
    pairs = [(i, j) for i in range(r1.size) for j in range(r2.size)]
    vals = ordered_map(lambda ij: wp_pow(r1.inners[ij[0]], r2.inners[ij[1]], p), pairs)
    return np.array(vals).reshape(r1.size, r2.size)


def nested_wp(r1: NestedMeasure, r2: NestedMeasure, p: float = 2.0) -> tuple[float, np.ndarray]:
    """Nested distance on P_p(P_p(R^d)) and an optimal outer coupling."""
    if p < 1:
        raise ValueError("p must be >= 1")
    _check_dims(r1.dim, r2.dim)
    C = nested_cost_matrix(r1, r2, p)
    res = solve_transport(r1.weights, r2.weights, C)
    return res.cost ** (1.0 / p), res.coupling


def interpolation_gap(r1: NestedMeasure, r2: NestedMeasure) -> float:
    """``W_2 - sqrt(W_1 W_3)``; positive values violate the two-sided interpolation bound."""
    w1, w2, w3 = (nested_wp(r1, r2, p)[0] for p in (1.0, 2.0, 3.0))
    return w2 - float(np.sqrt(w1 * w3))


def moment_interpolation_bound(r1: NestedMeasure, r2: NestedMeasure) -> float:
    """Upper bound ``sqrt(W_1) * sqrt(4 (M_3(r1) + M_3(r2)))`` on ``W_2^2``.

    Hoelder under the W_1-optimal couplings gives
    ``W_2^2 <= sqrt(W_1) * (int |x - y|^3)^(1/2)`` and ``|x - y|^3 <= 4(|x|^3 + |y|^3)``.
    """
    def m3(r):
        return sum(w * float(np.sum(m.weights * np.linalg.norm(m.points, axis=1) ** 3)) for w, m in r.atoms)

    w1 = nested_wp(r1, r2, 1.0)[0]
    return float(np.sqrt(w1) * np.sqrt(4.0 * (m3(r1) + m3(r2))))


def union_support(mu1: DiscreteMeasure, mu2: DiscreteMeasure) -> np.ndarray:
    """Distinct points of both supports, lexicographically sorted."""
    _check_dims(mu1.dim, mu2.dim)
    pts = np.vstack([mu1.points, mu2.points])
    pts = np.unique(pts, axis=0)
    return pts


def _potential_values(phi, z: np.ndarray) -> np.ndarray:
    if callable(phi):
        return np.array([float(phi(p if p.size > 1 else p[0])) for p in z])
    vals = np.asarray(phi, dtype=float).reshape(-1)
    if vals.shape[0] != z.shape[0]:
        raise ValueError(f"potential has {vals.shape[0]} values for {z.shape[0]} support points")
    return vals


def _lookup(z: np.ndarray, pts: np.ndarray) -> np.ndarray:
    idx = []
    for p in pts:
        k = np.flatnonzero(np.all(z == p, axis=1))
        idx.append(k[0])
    return np.array(idx)


def kantorovich_dual_value(mu1: DiscreteMeasure, mu2: DiscreteMeasure, phi) -> float:
    """``int phi d(mu1 - mu2)`` for a 1-Lipschitz potential.

    ``phi`` is a callable or an array of values on :func:`union_support`.
    Raises :class:`NotOneLipschitz` if any pair of support points violates
    the Lipschitz bound.
    """
    z = union_support(mu1, mu2)
    f = _potential_values(phi, z)
    gap = np.abs(f[:, None] - f[None, :]) - cost_matrix(z, z, 1.0)
    if np.max(gap) > LIPSCHITZ_TOL:
        raise NotOneLipschitz(f"Lipschitz bound exceeded by {np.max(gap):.3e}")
    return float(mu1.weights @ f[_lookup(z, mu1.points)] - mu2.weights @ f[_lookup(z, mu2.points)])


def kantorovich_potential(mu1: DiscreteMeasure, mu2: DiscreteMeasure) -> np.ndarray:
    """An optimal 1-Lipschitz potential on :func:`union_support`.

    Built as the c-transform ``phi(z) = min_j |z - y_j| - v_j`` of the column
    duals of the W_1 program, which is 1-Lipschitz by construction.
    """
    z = union_support(mu1, mu2)
    res = solve_transport(mu1.weights, mu2.weights, cost_matrix(mu1.points, mu2.points, 1.0))
    D = cost_matrix(z, mu2.points, 1.0)
    return np.min(D - res.col_potential[None, :], axis=1)
