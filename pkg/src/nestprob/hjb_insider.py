"""Dynamic insider problem on the line.

The value ``v(t, x)`` of choosing how much of the Brownian signal to observe,
``0 <= sigma' <= 1``, while paying ``(|x| - 1)^2`` per unit time, solves

    v_t + 0.5 (v_xx)^+ - (|x| - 1)^2 = 0,   v(T, x) = 0.

It is computed by an explicit monotone scheme. For ``|x| >= 1`` the optimum
is ``sigma' = 0`` with the closed form ``-(T - t)(|x| - 1)^2``, which also
pins the lateral boundary.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .calculus import FunctionalBundle
from .errors import CFLViolation, MeanOutOfGrid
from .measures import NestedMeasure, mean_scalar
from .rng import ordered_map, stream

FLOAT_FLOOR = 1e-9


def tilde_v(t, x, T: float = 1.0):
    """Value of never observing: ``-(T - t)(|x| - 1)^2``."""
    return -(T - np.asarray(t, dtype=float)) * (np.abs(np.asarray(x, dtype=float)) - 1.0) ** 2


def running_cost(x):
    return (np.abs(x) - 1.0) ** 2


@dataclass(frozen=True)
class GridSolution:
    """``v`` and its second difference on saved time layers.

    ``t`` holds the saved layer times (every ``stride`` scheme steps, always
    including 0 and T); ``v`` and ``d2v`` have shape ``(len(t), len(x))``.
    """

    x: np.ndarray
    t: np.ndarray
    v: np.ndarray
    d2v: np.ndarray
    dx: float
    dt: float
    T: float
    L: float

    @property
    def sigma_star(self) -> np.ndarray:
        # tie I*(0) = 0
        return (self.d2v > 0).astype(np.int8)

    def layer(self, t: float) -> int:
        k = int(np.searchsorted(self.t, t - 1e-12))
        k = min(max(k, 0), len(self.t) - 1)
        if k > 0 and abs(self.t[k - 1] - t) < abs(self.t[k] - t):
            k -= 1
        return k

    def _check_x(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if np.any(np.abs(x) > self.L + 1e-12):
            raise MeanOutOfGrid(f"point outside [-{self.L}, {self.L}]")
        return x

    def value(self, t: float, x) -> np.ndarray:
        """Linear interpolation in x and in time between saved layers."""
        x = self._check_x(x)
        t = min(max(t, 0.0), self.T)
        k = min(int(np.searchsorted(self.t, t, side="right")) - 1, len(self.t) - 2)
        k = max(k, 0)
        s = (t - self.t[k]) / (self.t[k + 1] - self.t[k])
        a = np.interp(x, self.x, self.v[k])
        b = np.interp(x, self.x, self.v[k + 1])
        return (1 - s) * a + s * b

    def node(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.clip(np.rint((x + self.L) / self.dx).astype(int), 0, self.x.size - 1)

    def policy(self, t: float, x) -> np.ndarray:
        """Nearest-node lookup of ``I*(D2 v)``."""
        return self.sigma_star[self.layer(t), self.node(x)]

    def to_rows(self):
        """``(t, x, v, d2v, sigma_star)`` rows, layer by layer."""
        s = self.sigma_star
        for k, tk in enumerate(self.t):
            for j, xj in enumerate(self.x):
                yield tk, xj, self.v[k, j], self.d2v[k, j], int(s[k, j])


def _d2(v: np.ndarray, dx: float) -> np.ndarray:
    d = np.empty_like(v)
    d[1:-1] = (v[2:] - 2 * v[1:-1] + v[:-2]) / (dx * dx)
    d[0], d[-1] = d[1], d[-2]
    return d


def solve_v(L: float = 4.0, dx: float = 0.01, dt: float | None = None, T: float = 1.0, save_dt: float = 1e-3,
            terminal: np.ndarray | None = None, boundary: Callable | None = None) -> GridSolution:
    """Backward explicit scheme ``v(t - dt) = v(t) + dt [0.5 (D2 v)^+ - (|x| - 1)^2]``.

    ``dt`` defaults to ``dx^2 / 2`` and is shrunk so that it divides ``T``.
    ``terminal`` overrides ``v(T, .)`` and ``boundary(t, x)`` the pinned
    values at ``x = +-L``; both exist for perturbation tests.
    """
    if L < 3:
        raise ValueError(f"L must be >= 3, got {L}")
    dt = 0.5 * dx * dx if dt is None else dt
    if dt > dx * dx * (1 + 1e-12):
        raise CFLViolation(f"dt = {dt} exceeds dx^2 = {dx * dx}")
    nx = int(round(2 * L / dx)) + 1
    x = np.linspace(-L, L, nx)
    N = int(math.ceil(T / dt - 1e-9))
    dt = T / N
    stride = max(1, int(round(save_dt / dt)))
    bnd = boundary if boundary is not None else (lambda t, xb: tilde_v(t, xb, T))
    cost = running_cost(x)
    v = np.zeros(nx) if terminal is None else np.asarray(terminal, dtype=float).copy()
    ends = np.array([x[0], x[-1]])
    layers, d2s, times = [], [], []
    for k in range(N, -1, -1):
        d2 = _d2(v, dx)
        if k % stride == 0 or k == N:
            layers.append(v.copy())
            d2s.append(d2)
            times.append(k * dt)
        if k == 0:
            break
        v = v + dt * (0.5 * np.maximum(d2, 0.0) - cost)
        v[[0, -1]] = bnd((k - 1) * dt, ends)
    order = np.argsort(times)
    return GridSolution(x, np.array(times)[order], np.array(layers)[order], np.array(d2s)[order], dx, dt, T, L)


def closed_form_error(sol: GridSolution) -> float:
    """Nodal sup error against the closed form on ``1 <= |x| <= L``, all layers."""
    band = np.abs(sol.x) >= 1 - 1e-12
    ref = tilde_v(sol.t[:, None], sol.x[None, :], sol.T)
    return float(np.max(np.abs(sol.v - ref)[:, band]))


def interpolant_error(sol: GridSolution, refine: int = 8) -> float:
    """Sup error of the piecewise-linear interpolant on ``1 <= |x| <= L``.

    Evaluated on a mesh ``refine`` times finer than the grid, all layers.
    """
    xf = np.linspace(-sol.L, sol.L, (sol.x.size - 1) * refine + 1)
    xf = xf[np.abs(xf) >= 1 - 1e-12]
    worst = 0.0
    for k, tk in enumerate(sol.t):
        approx = np.interp(xf, sol.x, sol.v[k])
        worst = max(worst, float(np.max(np.abs(approx - tilde_v(tk, xf, sol.T)))))
    return worst


def assemble_V(sol: GridSolution, t: float, r: NestedMeasure) -> float:
    """``sum_j w_j v(t, m_{mu_j})``."""
    means = np.array([mean_scalar(m) for m in r.inners])
    if np.any(np.abs(means) > sol.L + 1e-12):
        raise MeanOutOfGrid(f"an inner mean lies outside [-{sol.L}, {sol.L}]")
    return float(r.weights @ sol.value(t, means))


def band_cost_functional(r: NestedMeasure) -> float:
    """``F(r) = -int (|m_mu| - 1)^2 r(dmu)``."""
    return -float(sum(w * running_cost(mean_scalar(m)) for w, m in r.atoms))


def dpp_step_gap(sol: GridSolution, t: float, x: float, h: float) -> float:
    """One binary-tree DPP step from ``(t, x)`` over ``[t, t + h]``.

    Compares ``v(t, x)`` with ``-(|x| - 1)^2 h + max(v(t+h, x), avg v(t+h, x +- sqrt h))``,
    the continuation values of ignoring and observing the increment.
    """
    keep = sol.value(t + h, x)
    s = math.sqrt(h)
    look = 0.5 * (sol.value(t + h, x + s) + sol.value(t + h, x - s))
    rhs = -running_cost(x) * h + max(float(keep), float(look))
    return abs(float(sol.value(t, x)) - rhs)


@dataclass(frozen=True)
class SimulationResult:
    mc_value: float
    stderr: float
    pde_value: float
    tilde_value: float
    band_entry_fraction: float

    @property
    def z_pde(self) -> float:
        return (self.mc_value - self.pde_value) / (self.stderr + FLOAT_FLOOR)

    def within(self, target: float, k: float = 3.0) -> bool:
        """``|mc - target| <= k stderr``, with a 1e-9 floor for paths that never move."""
        return abs(self.mc_value - target) <= k * self.stderr + FLOAT_FLOOR

    @property
    def gap_flag(self) -> bool:
        """True when the policy value and the PDE value differ by more than 3 sigma."""
        return not self.within(self.pde_value)


def _simulate_block(sol: GridSolution, x0: float, t0: float, n: int, dt_sim: float, seed: int, block: int):
    rng = stream(seed, block)
    steps = int(round((sol.T - t0) / dt_sim))
    X = np.full(n, float(x0))
    cost = np.zeros(n)
    entered = np.abs(X) < 1 - 1e-12
    sq = math.sqrt(dt_sim)
    for i in range(steps):
        t = t0 + i * dt_sim
        sig = sol.policy(t, X)
        cost += running_cost(X) * dt_sim
        X = X + sig * sq * rng.standard_normal(n)
        np.clip(X, -sol.L, sol.L, out=X)
        entered |= np.abs(X) < 1 - 1e-12
    return -cost, entered


def simulate_policy(sol: GridSolution, x0: float, n_paths: int = 100_000, dt_sim: float = 5e-4, seed: int = 7,
                    t0: float = 0.0, block: int = 10_000) -> SimulationResult:
    """Euler simulation of ``dX = I*(D2 v(t, X)) dB`` from ``X_{t0} = x0``.

    Paths run in blocks, each with its own counter-based stream keyed by
    ``(seed, block index)``, so results do not depend on the thread count.
    """
    sizes = [block] * (n_paths // block) + ([n_paths % block] if n_paths % block else [])
    parts = ordered_map(lambda kb: _simulate_block(sol, x0, t0, kb[1], dt_sim, seed, kb[0]), list(enumerate(sizes)))
    vals = np.concatenate([p[0] for p in parts])
    entered = np.concatenate([p[1] for p in parts])
    return SimulationResult(
        float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(vals.size)),
        float(sol.value(t0, x0)), float(tilde_v(t0, x0, sol.T)), float(entered.mean()),
    )


def _layer_derivatives(sol: GridSolution):
    # forward difference in time between saved layers, central in x
    vt = np.empty_like(sol.v)
    vt[:-1] = (sol.v[1:] - sol.v[:-1]) / np.diff(sol.t)[:, None]
    vt[-1] = vt[-2]
    vx = np.gradient(sol.v, sol.x, axis=1)
    return vt, vx


def hjb_registry_bundle(sol: GridSolution) -> FunctionalBundle:
    """``U(t, r) = int v(t, m_mu) r(dmu)`` with derivatives read off the grid.

    ``dU = v(t, m_mu)``, ``d/dmu dU = v_x(t, m_mu) x`` and
    ``d2/dmu2 dU = v_xx(t, m_mu) x xt``.
    """
    vt, vx = _layer_derivatives(sol)

    def field(F, t, m):
        k = sol.layer(t)
        return float(np.interp(m, sol.x, F[k]))

    def U(t, r):
        return assemble_V(sol, t, r)

    def dt_U(t, r):
        return float(sum(w * field(vt, t, mean_scalar(m)) for w, m in r.atoms))

    def dU(t, r, mu):
        return float(sol.value(t, mean_scalar(mu)))

    def dx_dmu(t, r, mu, x):
        return np.full(np.shape(x), field(vx, t, mean_scalar(mu)))

    def dxxt(t, r, mu, x, xt):
        return np.full(np.broadcast(np.asarray(x), np.asarray(xt)).shape, field(sol.d2v, t, mean_scalar(mu)))

    def d2mu(t, r, mu, x, xt):
        return field(sol.d2v, t, mean_scalar(mu)) * np.asarray(x) * np.asarray(xt)

    return FunctionalBundle("hjb-insider", U, dt_U, dU, dx_dmu, lambda t, r, mu, x: np.zeros(np.shape(x)),
                            dxxt, d2mu, growth=None)


def hjb_residual(sol: GridSolution, t: float, r: NestedMeasure) -> float:
    """``|L U + F|`` for the grid bundle with ``b = 0``, ``sigma = 1``."""
    from .calculus import hamiltonian

    val, _ = hamiltonian(hjb_registry_bundle(sol), t, r, lambda s, x: 0.0 * x, lambda s, x: np.ones_like(x))
    return abs(val + band_cost_functional(r))
