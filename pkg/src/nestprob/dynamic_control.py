"""Discrete-time information control on finite noise trees.

The controller picks, at each step, a signal about the fresh noise increment.
The information filtration is then ``G_{i+1} = G_i v sigma(signal)``, which
satisfies (H*) by construction. Two independent evaluations are provided:

* ``value_exhaustive`` builds every filtration on the full path space and
  computes laws of conditional laws directly;
* ``value_dpp`` runs backward induction on nested measures only, memoized on
  ``(step, canonical key)``.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .conditional import (
    FiniteProbSpace,
    Partition,
    PartitionFiltration,
    conditional_law,
    h_star_check,
    join,
    law_of_conditional_law,
)
from .errors import FiltrationNotHStar, RepresentationMismatch, SearchSpaceTooLarge
from .measures import DiscreteMeasure, NestedMeasure, canonical_key, canonicalize, mean_scalar, variance
from .rng import ordered_map, stream

MAX_SEARCH = 10**6
VALUE_TOL = 1e-12


@dataclass(frozen=True)
class StateDynamics:
    """Scalar state with drift ``b(t, x)`` and volatility ``sigma(t, x)``.

    Both callables take numpy arrays and return arrays of the same shape.
    """

    b: Callable[[float, np.ndarray], np.ndarray]
    sigma: Callable[[float, np.ndarray], np.ndarray]
    times: tuple[float, ...]

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        if t.ndim != 1 or t.size < 2 or np.any(np.diff(t) <= 0):
            raise ValueError("time grid must be strictly increasing with at least two points")
        object.__setattr__(self, "times", tuple(float(v) for v in t))

    @classmethod
    def uniform(cls, b, sigma, steps: int, dt: float, t0: float = 0.0) -> "StateDynamics":
        return cls(b, sigma, tuple(t0 + dt * np.arange(steps + 1)))

    @property
    def steps(self) -> int:
        return len(self.times) - 1

    @property
    def dts(self) -> np.ndarray:
        return np.diff(self.times)

    def lipschitz_estimate(self, grid=None) -> float:
        """Largest difference quotient in x of either coefficient on a test grid."""
        x = np.linspace(-5, 5, 201) if grid is None else np.asarray(grid, dtype=float)
        worst = 0.0
        for t in self.times:
            for f in (self.b, self.sigma):
                v = np.broadcast_to(np.asarray(f(t, x), dtype=float), x.shape)
                if not np.all(np.isfinite(v)):
                    raise ValueError(f"coefficient not finite at t={t}")
                worst = max(worst, float(np.max(np.abs(np.diff(v) / np.diff(x)))))
        return worst

    def step(self, i: int, x: np.ndarray, db: np.ndarray) -> np.ndarray:
        t, dt = self.times[i], self.times[i + 1] - self.times[i]
        return x + np.asarray(self.b(t, x)) * dt + np.asarray(self.sigma(t, x)) * db


@dataclass(frozen=True)
class NoiseTree:
    """Independent discrete increments with mean 0 and variance ``dt`` per step.

    ``binary``: ``+-sqrt(dt)`` with probability 1/2. ``ternary``: ``+-sqrt(3 dt)``
    with probability 1/6 and 0 with 2/3, which also matches the fourth moment.
    """

    dts: tuple[float, ...]
    kind: str = "binary"

    def __post_init__(self):
        if self.kind not in ("binary", "ternary"):
            raise ValueError(f"unknown tree kind {self.kind!r}")
        object.__setattr__(self, "dts", tuple(float(v) for v in self.dts))

    @classmethod
    def uniform(cls, steps: int, dt: float, kind: str = "binary") -> "NoiseTree":
        return cls((dt,) * steps, kind)

    @property
    def steps(self) -> int:
        return len(self.dts)

    @property
    def branches(self) -> int:
        return 2 if self.kind == "binary" else 3

    def increment_law(self, i: int) -> tuple[np.ndarray, np.ndarray]:
        """Support values and probabilities of the step-``i`` increment."""
        s = math.sqrt(self.dts[i])
        if self.kind == "binary":
            return np.array([-s, s]), np.array([0.5, 0.5])
        r = math.sqrt(3.0) * s
        return np.array([-r, 0.0, r]), np.array([1 / 6, 2 / 3, 1 / 6])

    def paths(self) -> tuple[np.ndarray, np.ndarray]:
        """Branch indices ``(n_paths, steps)`` and path probabilities."""
        k = self.branches
        idx = np.array(list(itertools.product(range(k), repeat=self.steps)), dtype=int).reshape(-1, self.steps)
        prob = np.ones(idx.shape[0])
        for i in range(self.steps):
            prob = prob * self.increment_law(i)[1][idx[:, i]]
        return idx, prob


@dataclass(frozen=True)
class PathSpace:
    """Initial outcomes times noise paths, with the Euler states attached."""

    space: FiniteProbSpace          # rvs "xi", "X0".."Xn"
    branch: np.ndarray              # (n, steps) branch index of each increment
    initial: np.ndarray             # (n,) index of the initial outcome
    tree: NoiseTree

    def X(self, i: int) -> np.ndarray:
        return self.space.rvs[f"X{i}"][:, 0]

    def increment_partition(self, i: int) -> Partition:
        return Partition(self.branch[:, i])

    def increments(self, i: int, clamp: float | None = None) -> np.ndarray:
        vals = self.tree.increment_law(i)[0]
        if clamp is not None:
            vals = np.clip(vals, -clamp, clamp)
        return vals[self.branch[:, i]]


def euler_paths(dyn: StateDynamics, tree: NoiseTree, xi_space: FiniteProbSpace, xi: str = "xi",
                clamp: float | None = None) -> PathSpace:
    """Euler scheme on every (initial outcome, noise path) pair.

    ``clamp`` truncates each increment to ``[-clamp, clamp]``.
    """
    if dyn.steps != tree.steps or not np.allclose(dyn.dts, tree.dts, rtol=0, atol=1e-15):
        raise ValueError("dynamics and noise tree use different time grids")
    idx, q = tree.paths()
    m = xi_space.n
    initial = np.repeat(np.arange(m), idx.shape[0])
    branch = np.tile(idx, (m, 1))
    prob = (xi_space.prob[:, None] * q[None, :]).reshape(-1)
    x = xi_space.rvs[xi][:, 0][initial].astype(float)
    rvs = {"xi": x.copy(), "X0": x.copy()}
    for i in range(tree.steps):
        vals = tree.increment_law(i)[0]
        if clamp is not None:
            vals = np.clip(vals, -clamp, clamp)
        x = dyn.step(i, x, vals[branch[:, i]])
        rvs[f"X{i + 1}"] = x.copy()
    # the product probabilities may drift from sum 1 by a few ulps
    prob = prob / math.fsum(prob)
    return PathSpace(FiniteProbSpace(prob, rvs), branch, initial, tree)


# signals: a label for each increment value, possibly depending on the atom's law

@dataclass(frozen=True)
class Signal:
    """Information revealed about the fresh increment.

    ``fn(mu, values)`` gets the conditional law of the current state on an
    atom and the increment support, and returns one label per support value.
    Depending on the atom only through its law keeps the problem law-invariant.
    """

    name: str
    fn: Callable[[DiscreteMeasure, np.ndarray], np.ndarray]

    def labels(self, mu: DiscreteMeasure, values: np.ndarray) -> np.ndarray:
        return np.asarray(self.fn(mu, values), dtype=int)


def _nothing(mu, v):
    return np.zeros(len(v), dtype=int)


def _observe(mu, v):
    return np.arange(len(v))


def _up(mu, v):
    return (np.asarray(v) > 0).astype(int)


def _observe_if_positive(mu, v):
    return np.arange(len(v)) if mean_scalar(mu) > 0 else np.zeros(len(v), dtype=int)


def _observe_if_spread(mu, v):
    return np.arange(len(v)) if variance(mu) > 1e-12 else np.zeros(len(v), dtype=int)


SIGNALS = {
    "nothing": Signal("nothing", _nothing),
    "observe": Signal("observe", _observe),
    "up": Signal("up", _up),
    "observe_if_positive": Signal("observe_if_positive", _observe_if_positive),
    "observe_if_spread": Signal("observe_if_spread", _observe_if_spread),
}


# rewards on nested measures

def mean_square(r: NestedMeasure) -> float:
    return float(sum(w * mean_scalar(m) ** 2 for w, m in r.atoms))


def band_cost(t: float, r: NestedMeasure) -> float:
    return -float(sum(w * (abs(mean_scalar(m)) - 1.0) ** 2 for w, m in r.atoms))


def expected_variance(r: NestedMeasure) -> float:
    return float(sum(w * variance(m) for w, m in r.atoms))


F_REGISTRY: dict[str, Callable[[float, NestedMeasure], float]] = {
    "zero": lambda t, r: 0.0,
    "band": band_cost,
    "mean_square": lambda t, r: mean_square(r),
    "neg_variance": lambda t, r: -expected_variance(r),
}

G_REGISTRY: dict[str, Callable[[NestedMeasure], float]] = {
    "zero": lambda r: 0.0,
    "one": lambda r: 1.0,
    "mean_square": mean_square,
    "neg_mean_square": lambda r: -mean_square(r),
    "abs_mean": lambda r: float(sum(w * abs(mean_scalar(m)) for w, m in r.atoms)),
    "expected_variance": expected_variance,
}

DRIFTS = {
    "zero": lambda t, x: np.zeros_like(x),
    "ou": lambda t, x: -x,
    "one": lambda t, x: np.ones_like(x),
    "sin": lambda t, x: np.sin(x),
}

VOLS = {
    "zero": lambda t, x: np.zeros_like(x),
    "one": lambda t, x: np.ones_like(x),
    "half": lambda t, x: np.full_like(x, 0.5),
    "affine": lambda t, x: 1.0 + 0.5 * np.tanh(x),
}


@dataclass(frozen=True)
class ControlProblem:
    dyn: StateDynamics
    tree: NoiseTree
    xi_space: FiniteProbSpace
    g0: Partition
    menu: tuple[Signal, ...]
    F: Callable[[float, NestedMeasure], float]
    G: Callable[[NestedMeasure], float]
    clamp: float | None = None
    xi: str = "xi"

    def __post_init__(self):
        object.__setattr__(self, "menu", tuple(self.menu))
        if not self.menu:
            raise ValueError("menu must contain at least one signal")
        if self.g0.n != self.xi_space.n:
            raise ValueError("initial partition must live on the initial space")

    @property
    def steps(self) -> int:
        return self.tree.steps

    def with_initial(self, xi_space: FiniteProbSpace, g0: Partition) -> "ControlProblem":
        return ControlProblem(self.dyn, self.tree, xi_space, g0, self.menu, self.F, self.G, self.clamp, self.xi)

    def with_menu(self, menu: Sequence[Signal]) -> "ControlProblem":
        return ControlProblem(self.dyn, self.tree, self.xi_space, self.g0, tuple(menu), self.F, self.G,
                              self.clamp, self.xi)

    def initial_law(self) -> NestedMeasure:
        return law_of_conditional_law(self.xi_space, self.xi, self.g0)

    def path_space(self) -> PathSpace:
        return euler_paths(self.dyn, self.tree, self.xi_space, self.xi, self.clamp)


def build_filtration(problem: ControlProblem, ps: PathSpace, choice: Sequence[int]) -> PartitionFiltration:
    """Filtration generated on the path space by menu indices ``choice``."""
    G = [Partition(problem.g0.array[ps.initial])]
    for i, c in enumerate(choice):
        sig = problem.menu[c]
        vals = problem.tree.increment_law(i)[0]
        laws = conditional_law(ps.space, f"X{i}", G[-1])
        cur = G[-1].array
        sig_lab = np.empty(ps.space.n, dtype=int)
        for a, mu in laws.items():
            on = cur == a
            sig_lab[on] = sig.labels(mu, vals)[ps.branch[on, i]]
        G.append(join(G[-1], Partition(sig_lab)))
    incs = tuple(ps.increment_partition(i) for i in range(len(choice)))
    return PartitionFiltration(tuple(G), incs)


def objective(problem: ControlProblem, filt: PartitionFiltration, ps: PathSpace | None = None) -> float:
    """``G(law at T) + sum_i F(t_i, law at t_i) dt_i`` with left endpoints."""
    if not h_star_check(filt):
        raise FiltrationNotHStar("filtration learns more than the fresh noise")
    ps = problem.path_space() if ps is None else ps
    dts = problem.dyn.dts
    total = 0.0
    for i in range(problem.steps):
        total += problem.F(problem.dyn.times[i], law_of_conditional_law(ps.space, f"X{i}", filt.partitions[i])) * dts[i]
    n = problem.steps
    return total + problem.G(law_of_conditional_law(ps.space, f"X{n}", filt.partitions[n]))


def _check_size(problem: ControlProblem) -> None:
    size = len(problem.menu) ** problem.steps
    if size > MAX_SEARCH:
        raise SearchSpaceTooLarge(f"{size} menu sequences exceed the limit {MAX_SEARCH}")


@dataclass(frozen=True)
class ExhaustiveResult:
    value: float
    argmax: tuple[int, ...]
    values: dict

    def argmax_names(self, problem: ControlProblem) -> tuple[str, ...]:
        return tuple(problem.menu[c].name for c in self.argmax)


def value_exhaustive(problem: ControlProblem) -> ExhaustiveResult:
    """Maximize the objective over all menu sequences.

    Ties keep the first sequence in lexicographic menu order.
    """
    _check_size(problem)
    ps = problem.path_space()
    seqs = list(itertools.product(range(len(problem.menu)), repeat=problem.steps))
    vals = ordered_map(lambda s: objective(problem, build_filtration(problem, ps, s), ps), seqs)
    best = 0
    for k in range(1, len(seqs)):
        if vals[k] > vals[best] + VALUE_TOL:
            best = k
    return ExhaustiveResult(float(vals[best]), seqs[best], dict(zip(seqs, vals)))


def transition(problem: ControlProblem, i: int, r: NestedMeasure, sig: Signal) -> NestedMeasure:
    """Nested law at step ``i + 1`` from the one at step ``i`` under ``sig``.

    The increment is independent of the current state and information, so on
    an atom ``(w, mu)`` the sub-atom with signal label ``k`` has weight
    ``w P(k)`` and carries the image of ``mu x law(dB | k)`` under one Euler step.
    """
    vals, q = problem.tree.increment_law(i)
    step_vals = vals if problem.clamp is None else np.clip(vals, -problem.clamp, problem.clamp)
    out = []
    for w, mu in r.atoms:
        lab = sig.labels(mu, vals)
        x = mu.points[:, 0]
        for k in np.unique(lab):
            sel = lab == k
            qk = q[sel].sum()
            cond = q[sel] / qk
            # outer product of state atoms and selected increments
            xs = problem.dyn.step(i, np.repeat(x, sel.sum()), np.tile(step_vals[sel], x.size))
            ws = np.outer(mu.weights, cond).reshape(-1)
            out.append((w * qk, canonicalize(DiscreteMeasure(xs, ws / ws.sum()))))
    return canonicalize(NestedMeasure(out))


@dataclass
class DPPResult:
    value: float
    policy: tuple[int, ...]           # optimal choice along the realized path of laws
    states_visited: int
    memo_hits: int = 0


def value_dpp(problem: ControlProblem, memo: bool = True) -> DPPResult:
    """Backward induction on nested measures.

    ``V_n = G`` and ``V_i(r) = F(t_i, r) dt_i + max_s V_{i+1}(T_s r)``. States
    are memoized on ``(i, canonical_key(r))``; ``memo=False`` recomputes every
    subtree, which the test suite uses to check that the key is a sufficient
    state.
    """
    _check_size(problem)
    cache: dict = {}
    stats = {"visited": 0, "hits": 0}
    n = problem.steps
    dts = problem.dyn.dts

    def V(i: int, r: NestedMeasure) -> tuple[float, tuple[int, ...]]:
        key = (i, canonical_key(r))
        if memo and key in cache:
            stats["hits"] += 1
            return cache[key]
        stats["visited"] += 1
        if i == n:
            res = (float(problem.G(r)), ())
        else:
            run = problem.F(problem.dyn.times[i], r) * dts[i]
            best_val, best_pol = -math.inf, ()
            for c, sig in enumerate(problem.menu):
                v, pol = V(i + 1, transition(problem, i, r, sig))
                if v > best_val + VALUE_TOL:
                    best_val, best_pol = v, (c,) + pol
            res = (run + best_val, best_pol)
        if memo:
            cache[key] = res
        return res

    val, pol = V(0, problem.initial_law())
    return DPPResult(val, pol, stats["visited"], stats["hits"])


@dataclass(frozen=True)
class InvarianceReport:
    values_exhaustive: tuple[float, ...]
    values_dpp: tuple[float, ...]
    spread: float

    @property
    def ok(self) -> bool:
        return self.spread <= VALUE_TOL


def law_invariance_check(problem: ControlProblem,
                         representations: Sequence[tuple[FiniteProbSpace, Partition]]) -> InvarianceReport:
    """Evaluate the value on several initial spaces with the same nested law.

    Raises :class:`RepresentationMismatch` when the nested laws differ.
    """
    if not representations:
        raise ValueError("need at least one representation")
    keys = set()
    ex, dp = [], []
    for space, g0 in representations:
        p = problem.with_initial(space, g0)
        keys.add(canonical_key(p.initial_law()))
        if len(keys) > 1:
            raise RepresentationMismatch("initial nested laws differ between representations")
        ex.append(value_exhaustive(p).value)
        dp.append(value_dpp(p).value)
    allv = np.array(ex + dp)
    return InvarianceReport(tuple(ex), tuple(dp), float(allv.max() - allv.min()))


# strong convergence of the Euler scheme

def bridge_refine(B: np.ndarray, dt: float, rng: np.random.Generator) -> np.ndarray:
    """Insert Brownian-bridge midpoints between the columns of ``B``."""
    n_paths, m = B.shape
    mid = 0.5 * (B[:, :-1] + B[:, 1:]) + math.sqrt(dt / 4.0) * rng.standard_normal((n_paths, m - 1))
    out = np.empty((n_paths, 2 * m - 1))
    out[:, ::2] = B
    out[:, 1::2] = mid
    return out


def _euler_on_grid(b, sigma, x0: float, B: np.ndarray, T: float) -> np.ndarray:
    n = B.shape[1] - 1
    dt = T / n
    dB = np.diff(B, axis=1)
    X = np.empty_like(B)
    X[:, 0] = x0
    for i in range(n):
        t = i * dt
        X[:, i + 1] = X[:, i] + b(t, X[:, i]) * dt + sigma(t, X[:, i]) * dB[:, i]
    return X


def euler_strong_errors(ns: Sequence[int] = (2, 4, 8, 16), b=DRIFTS["ou"], sigma=VOLS["one"], x0: float = 0.0,
                        T: float = 1.0, n_paths: int = 20000, seed: int = 0) -> dict[int, float]:
    """``E[max_i |X^n_{t_i} - X^{2n}_{t_i}|^2]`` on coarse grid times.

    Brownian paths start on the coarsest grid and are refined by bridge
    midpoints, so every level shares one path.
    """
    ns = sorted(ns)
    if any(n2 != 2 * n1 for n1, n2 in zip(ns, ns[1:])):
        raise ValueError("levels must double")
    rng = stream(seed, 0)
    n0 = ns[0]
    B = np.concatenate([np.zeros((n_paths, 1)),
                        np.cumsum(math.sqrt(T / n0) * rng.standard_normal((n_paths, n0)), axis=1)], axis=1)
    levels = {n0: B}
    n = n0
    while n < 2 * ns[-1]:
        B = bridge_refine(B, T / n, rng)
        n *= 2
        levels[n] = B
    out = {}
    for n in ns:
        Xc = _euler_on_grid(b, sigma, x0, levels[n], T)
        Xf = _euler_on_grid(b, sigma, x0, levels[2 * n], T)[:, ::2]
        out[n] = float(np.mean(np.max(np.abs(Xc - Xf), axis=1) ** 2))
    return out


# config-driven problems

def _parse_floats(s: str) -> list[float]:
    return [float(v) for v in s.replace(";", ",").split(",") if v.strip()]


CONFIG_KEYS = {
    "steps": "2", "dt": "0.5", "tree": "binary", "drift": "zero", "vol": "one",
    "menu": "nothing,observe", "F": "zero", "G": "mean_square",
    "xi_points": "0", "xi_weights": "", "g0": "trivial", "clamp": "",
}


def parse_config_text(text: str) -> dict[str, str]:
    """``key = value`` lines; ``#`` starts a comment. Unknown keys are rejected."""
    cfg = {}
    for ln, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {ln}: expected 'key = value', got {raw!r}")
        k, v = (s.strip() for s in line.split("=", 1))
        if k not in CONFIG_KEYS:
            raise ValueError(f"line {ln}: unknown key {k!r}; known keys: {', '.join(CONFIG_KEYS)}")
        cfg[k] = v
    return {**CONFIG_KEYS, **cfg}


def problem_from_config(cfg: dict[str, str]) -> ControlProblem:
    cfg = {**CONFIG_KEYS, **cfg}
    steps, dt = int(cfg["steps"]), float(cfg["dt"])
    for key, reg in (("drift", DRIFTS), ("vol", VOLS), ("F", F_REGISTRY), ("G", G_REGISTRY)):
        if cfg[key] not in reg:
            raise ValueError(f"{key}={cfg[key]!r} not in registry {sorted(reg)}")
    menu = []
    for name in (s.strip() for s in cfg["menu"].split(",")):
        if name not in SIGNALS:
            raise ValueError(f"unknown signal {name!r}; known: {sorted(SIGNALS)}")
        menu.append(SIGNALS[name])
    pts = _parse_floats(cfg["xi_points"])
    w = _parse_floats(cfg["xi_weights"]) if cfg["xi_weights"] else [1.0 / len(pts)] * len(pts)
    space = FiniteProbSpace(w, {"xi": pts})
    if cfg["g0"] == "trivial":
        g0 = Partition.trivial(space.n)
    elif cfg["g0"] == "full":
        g0 = Partition.finest(space.n)
    else:
        g0 = Partition([int(v) for v in cfg["g0"].split(",")])
    dyn = StateDynamics.uniform(DRIFTS[cfg["drift"]], VOLS[cfg["vol"]], steps, dt)
    tree = NoiseTree.uniform(steps, dt, cfg["tree"])
    clamp = float(cfg["clamp"]) if cfg["clamp"] else None
    return ControlProblem(dyn, tree, space, g0, tuple(menu), F_REGISTRY[cfg["F"]], G_REGISTRY[cfg["G"]], clamp)


# fixed instance suites

_SUITE_SPECS = [
    # steps, dt, tree, drift, vol, menu, F, G, xi_points, xi_weights, g0, clamp
    (1, 0.5, "binary", "zero", "one", "nothing,observe", "zero", "mean_square", "0", "", "trivial", ""),
    (2, 0.5, "binary", "zero", "one", "nothing,observe", "zero", "mean_square", "0", "", "trivial", ""),
    (2, 0.5, "binary", "zero", "one", "nothing,observe", "zero", "neg_mean_square", "0", "", "trivial", ""),
    (2, 0.25, "ternary", "ou", "one", "nothing,observe,up", "zero", "mean_square", "-1,1", "", "trivial", ""),
    (3, 0.25, "binary", "ou", "affine", "nothing,observe,up", "band", "zero", "-1,0,1", "", "trivial", ""),
    (3, 0.2, "ternary", "sin", "one", "nothing,observe,up,observe_if_positive", "band", "abs_mean", "-1,1", "",
     "trivial", ""),
    (2, 0.5, "ternary", "one", "half", "nothing,up,observe_if_spread", "mean_square", "expected_variance",
     "0,2", "0.3,0.7", "trivial", ""),
    (3, 0.1, "binary", "zero", "one", "observe,nothing", "neg_variance", "mean_square", "0", "", "trivial", ""),
    (2, 0.5, "binary", "ou", "one", "nothing,observe", "zero", "abs_mean", "-1,1", "", "full", ""),
    (3, 0.25, "ternary", "zero", "affine", "nothing,observe_if_positive,up", "band", "neg_mean_square",
     "-0.5,0.5", "", "trivial", ""),
    (1, 1.0, "ternary", "zero", "one", "nothing,observe,up,observe_if_spread", "zero", "abs_mean", "0", "",
     "trivial", ""),
    (2, 0.5, "binary", "sin", "affine", "nothing,observe,up,observe_if_positive", "neg_variance", "abs_mean",
     "-1,0,1", "0.2,0.3,0.5", "0,0,1", ""),
    (3, 0.2, "binary", "one", "one", "nothing,observe", "band", "mean_square", "0", "", "trivial", "0.3"),
    (2, 0.25, "ternary", "ou", "half", "up,nothing", "mean_square", "neg_mean_square", "1", "", "trivial", ""),
    (3, 0.25, "binary", "zero", "one", "nothing,observe,up", "zero", "expected_variance", "-1,1", "", "trivial",
     ""),
    (2, 0.5, "ternary", "sin", "one", "nothing,observe", "band", "zero", "-2,0,2", "", "0,1,0", ""),
    (3, 0.2, "ternary", "ou", "affine", "nothing,observe_if_positive", "zero", "abs_mean", "0.5", "", "trivial",
     ""),
    (1, 0.5, "binary", "one", "zero", "nothing,observe", "band", "mean_square", "-1,1", "", "trivial", ""),
    (3, 0.25, "binary", "sin", "half", "nothing,observe,up,observe_if_spread", "neg_variance", "neg_mean_square",
     "-1,1", "0.4,0.6", "full", ""),
    (2, 0.5, "ternary", "zero", "one", "nothing,observe,up,observe_if_positive", "mean_square", "abs_mean",
     "-1,0,1", "", "trivial", "1.0"),
]


def dpp_suite() -> list[tuple[str, ControlProblem]]:
    """Twenty fixed instances with at most 3 steps and menus of at most 4 signals."""
    keys = ("steps", "dt", "tree", "drift", "vol", "menu", "F", "G", "xi_points", "xi_weights", "g0", "clamp")
    out = []
    for k, spec in enumerate(_SUITE_SPECS):
        cfg = {key: str(v) for key, v in zip(keys, spec)}
        out.append((f"case{k:02d}", problem_from_config(cfg)))
    return out


def representations(space: FiniteProbSpace, g0: Partition, seed: int = 0,
                    xi: str = "xi") -> list[tuple[FiniteProbSpace, Partition]]:
    """The space itself, a relabeled copy, and a copy with every outcome split in two.

    All three carry the same law of the conditional law of ``xi`` given ``g0``.
    """
    rng = np.random.default_rng(seed)
    perm = rng.permutation(space.n)
    moved = (space.permuted(perm), Partition(g0.array[perm]))
    s = rng.uniform(0.2, 0.8, space.n)
    prob = np.concatenate([space.prob * s, space.prob * (1 - s)])
    vals = np.concatenate([space.rvs[xi][:, 0]] * 2)
    split = (FiniteProbSpace(prob, {xi: vals}), Partition(np.concatenate([g0.array] * 2)))
    return [(space, g0), moved, split]
