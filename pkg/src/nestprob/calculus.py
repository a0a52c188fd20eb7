"""Functional derivatives on nested measures and exact Ito-formula checks.

Everything is evaluated on finite noise trees. Conditional laws are exact
(partition filtrations), and the conditionally independent copy needed by the
second-order term is the product of each information atom with itself, so the
only discrepancy between the two sides of the Ito formula is the O(dt) time
discretization.

The state is scalar; the driving noise may have several components.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .conditional import FiniteProbSpace, Partition, PartitionFiltration, conditional_law, h_star_check, join
from .dynamic_control import NoiseTree
from .errors import FiltrationNotHStar, UnboundedDerivativeDetected
from .measures import DiscreteMeasure, NestedMeasure, canonicalize, mean_scalar, second_moment

GL_NODES = 32
MARTINGALE_TOL = 1e-12
EIG_TOL = 1e-12


def _zero(*args):
    return 0.0


@dataclass(frozen=True)
class FunctionalBundle:
    """``U(t, r)`` on nested measures together with closed-form derivatives.

    ``dU(t, r, mu)`` is the linear functional derivative in ``r``.
    ``dx_dmu_dU`` and ``dxx_dmu_dU`` take ``(t, r, mu, x)``; ``dxxt_d2mu_dU``
    and ``d2mu_dU`` take ``(t, r, mu, x, xt)``. The ``x`` arguments may be
    numpy arrays and must broadcast. ``growth`` is the constant C in
    ``|dU| <= C (1 + ||mu||_2^2)``, or None to skip the check.
    """

    name: str
    U: Callable
    dt_U: Callable = _zero
    dU: Callable = _zero
    dx_dmu_dU: Callable = _zero
    dxx_dmu_dU: Callable = _zero
    dxxt_d2mu_dU: Callable = _zero
    d2mu_dU: Callable | None = None
    growth: float | None = None

    def scaled_derivative(self, c: float) -> "FunctionalBundle":
        """Same ``U`` with ``dU`` multiplied by ``c`` (a negative control)."""
        d = self.dU
        return FunctionalBundle(self.name + f"*{c}", self.U, self.dt_U, lambda t, r, mu: c * d(t, r, mu),
                                self.dx_dmu_dU, self.dxx_dmu_dU, self.dxxt_d2mu_dU, self.d2mu_dU, self.growth)

    def flip_second_order(self) -> "FunctionalBundle":
        f = self.dxxt_d2mu_dU
        return FunctionalBundle(self.name + "-flipped", self.U, self.dt_U, self.dU, self.dx_dmu_dU,
                                self.dxx_dmu_dU, lambda *a: -np.asarray(f(*a)), self.d2mu_dU, self.growth)


def _mbar(r: NestedMeasure) -> float:
    return float(sum(w * mean_scalar(m) for w, m in r.atoms))


def linear_bundle(phi: Callable[[DiscreteMeasure], float], name: str = "linear") -> FunctionalBundle:
    """``U(r) = int phi dr`` with only the first derivative supplied."""
    return FunctionalBundle(name, lambda t, r: float(sum(w * phi(m) for w, m in r.atoms)),
                            dU=lambda t, r, mu: phi(mu))


def _linear_mean() -> FunctionalBundle:
    return FunctionalBundle(
        "linear-mean",
        U=lambda t, r: _mbar(r),
        dU=lambda t, r, mu: mean_scalar(mu),
        dx_dmu_dU=lambda t, r, mu, x: np.ones_like(np.asarray(x, dtype=float)),
        d2mu_dU=lambda t, r, mu, x, xt: 0.0 * np.asarray(x) * np.asarray(xt),
        growth=1.0,
    )


def _linear_second_moment() -> FunctionalBundle:
    return FunctionalBundle(
        "linear-second-moment",
        U=lambda t, r: float(sum(w * second_moment(m) for w, m in r.atoms)),
        dU=lambda t, r, mu: second_moment(mu),
        dx_dmu_dU=lambda t, r, mu, x: 2.0 * np.asarray(x, dtype=float),
        dxx_dmu_dU=lambda t, r, mu, x: np.full_like(np.asarray(x, dtype=float), 2.0),
        d2mu_dU=lambda t, r, mu, x, xt: 0.0 * np.asarray(x) * np.asarray(xt),
        growth=1.0,
    )


def _quadratic_mean() -> FunctionalBundle:
    # U = int m_mu^2 dr; d/dmu of m_mu^2 is 2 m_mu x, and again 2 x xt
    return FunctionalBundle(
        "quadratic-mean",
        U=lambda t, r: float(sum(w * mean_scalar(m) ** 2 for w, m in r.atoms)),
        dU=lambda t, r, mu: mean_scalar(mu) ** 2,
        dx_dmu_dU=lambda t, r, mu, x: np.full_like(np.asarray(x, dtype=float), 2.0 * mean_scalar(mu)),
        dxxt_d2mu_dU=lambda t, r, mu, x, xt: np.full(np.broadcast(np.asarray(x), np.asarray(xt)).shape, 2.0),
        d2mu_dU=lambda t, r, mu, x, xt: 2.0 * np.asarray(x) * np.asarray(xt),
        growth=1.0,
    )


def _mean_squared() -> FunctionalBundle:
    # U = (int m_mu dr)^2, so dU = 2 mbar m_mu
    return FunctionalBundle(
        "mean-squared",
        U=lambda t, r: _mbar(r) ** 2,
        dU=lambda t, r, mu: 2.0 * _mbar(r) * mean_scalar(mu),
        dx_dmu_dU=lambda t, r, mu, x: np.full_like(np.asarray(x, dtype=float), 2.0 * _mbar(r)),
        d2mu_dU=lambda t, r, mu, x, xt: 0.0 * np.asarray(x) * np.asarray(xt),
        growth=None,
    )


def _time_quadratic_mean() -> FunctionalBundle:
    # exp(-t) times the quadratic mean, to exercise the time derivative
    q = _quadratic_mean()
    return FunctionalBundle(
        "time-quadratic-mean",
        U=lambda t, r: math.exp(-t) * q.U(t, r),
        dt_U=lambda t, r: -math.exp(-t) * q.U(t, r),
        dU=lambda t, r, mu: math.exp(-t) * q.dU(t, r, mu),
        dx_dmu_dU=lambda t, r, mu, x: math.exp(-t) * q.dx_dmu_dU(t, r, mu, x),
        dxxt_d2mu_dU=lambda t, r, mu, x, xt: math.exp(-t) * q.dxxt_d2mu_dU(t, r, mu, x, xt),
        d2mu_dU=lambda t, r, mu, x, xt: math.exp(-t) * q.d2mu_dU(t, r, mu, x, xt),
        growth=1.0,
    )


BUNDLES: dict[str, Callable[[], FunctionalBundle]] = {
    "linear-mean": _linear_mean,
    "linear-second-moment": _linear_second_moment,
    "quadratic-mean": _quadratic_mean,
    "mean-squared": _mean_squared,
    "time-quadratic-mean": _time_quadratic_mean,
}


def lfd_check(bundle: FunctionalBundle, r1: NestedMeasure, r2: NestedMeasure, t: float = 0.0,
              nodes: int = GL_NODES) -> float:
    """Residual of the linear-derivative identity along ``theta r2 + (1-theta) r1``."""
    th, wq = np.polynomial.legendre.leggauss(nodes)
    th, wq = 0.5 * (th + 1.0), 0.5 * wq
    d1 = [(w, m) for w, m in r1.atoms]
    d2 = [(w, m) for w, m in r2.atoms]
    integral = 0.0
    for theta, wt in zip(th, wq):
        mix = NestedMeasure([(theta * w, m) for w, m in d2] + [((1 - theta) * w, m) for w, m in d1])
        s = sum(w * bundle.dU(t, mix, m) for w, m in d2) - sum(w * bundle.dU(t, mix, m) for w, m in d1)
        integral += wt * s
    return abs(bundle.U(t, r2) - bundle.U(t, r1) - integral)


def symmetry_residual(bundle: FunctionalBundle, r: NestedMeasure, xs, t: float = 0.0) -> float:
    """``max |d2mu_dU(mu, x, xt) - d2mu_dU(mu, xt, x)|`` over atoms and a point set."""
    if bundle.d2mu_dU is None:
        return 0.0
    x = np.asarray(xs, dtype=float)
    worst = 0.0
    for _, m in r.atoms:
        a = np.asarray(bundle.d2mu_dU(t, r, m, x[:, None], x[None, :]))
        worst = max(worst, float(np.max(np.abs(a - np.swapaxes(a, 0, 1)))) if a.ndim == 2 else 0.0)
    return worst


# noise paths with several components

@dataclass(frozen=True)
class NoisePaths:
    """Initial outcomes times noise paths with ``k`` independent components."""

    prob: np.ndarray           # (n,)
    dB: np.ndarray             # (n, steps, k)
    comp_branch: np.ndarray    # (n, steps, k)
    initial: np.ndarray        # (n,)
    xi: np.ndarray             # (n,)
    times: np.ndarray          # (steps + 1,)
    n_initial: int

    @property
    def n(self) -> int:
        return self.prob.shape[0]

    @property
    def steps(self) -> int:
        return self.dB.shape[1]

    @property
    def k(self) -> int:
        return self.dB.shape[2]

    @property
    def dts(self) -> np.ndarray:
        return np.diff(self.times)

    def B(self, i: int) -> np.ndarray:
        return self.dB[:, :i, :].sum(axis=1)

    def increment_partition(self, i: int) -> Partition:
        return Partition.generated_by(self.comp_branch[:, i, :])


def noise_paths(tree: NoiseTree, xi_space: FiniteProbSpace, dim: int = 1, xi: str = "xi") -> NoisePaths:
    steps = tree.steps
    per_step = []
    for i in range(steps):
        v, q = tree.increment_law(i)
        combos = list(itertools.product(range(len(v)), repeat=dim))
        per_step.append((np.array(combos), v, q))
    step_choices = [range(len(c[0])) for c in per_step]
    paths = np.array(list(itertools.product(*step_choices)), dtype=int).reshape(-1, steps)
    m = xi_space.n
    n_paths = paths.shape[0]
    comp = np.empty((n_paths, steps, dim), dtype=int)
    dB = np.empty((n_paths, steps, dim))
    qp = np.ones(n_paths)
    for i, (combos, v, q) in enumerate(per_step):
        comp[:, i, :] = combos[paths[:, i]]
        dB[:, i, :] = v[comp[:, i, :]]
        qp *= np.prod(q[comp[:, i, :]], axis=1)
    initial = np.repeat(np.arange(m), n_paths)
    prob = (xi_space.prob[:, None] * qp[None, :]).reshape(-1)
    prob = prob / math.fsum(prob)
    times = np.concatenate([[0.0], np.cumsum(tree.dts)])
    return NoisePaths(prob, np.tile(dB, (m, 1, 1)), np.tile(comp, (m, 1, 1)), initial,
                      xi_space.rvs[xi][:, 0][initial].astype(float), times, m)


def make_filtration(paths: NoisePaths, kind: str = "full", g0: Partition | None = None) -> PartitionFiltration:
    """Built-in partition filtrations on a noise path space.

    ``full``: every increment; ``trivial``: nothing beyond ``G_0``; ``sign``:
    sign of each increment component; ``up``: whether the first component
    moved up; ``component:j``: component ``j`` only.
    """
    g0 = Partition.trivial(paths.n_initial) if g0 is None else g0
    G = [Partition(g0.array[paths.initial])]
    for i in range(paths.steps):
        if kind == "full":
            sig = paths.increment_partition(i)
        elif kind == "trivial":
            sig = Partition.trivial(paths.n)
        elif kind == "sign":
            sig = Partition.generated_by(np.sign(paths.dB[:, i, :]))
        elif kind == "up":
            sig = Partition(paths.dB[:, i, 0] > 0)
        elif kind.startswith("component:"):
            j = int(kind.split(":", 1)[1])
            sig = Partition(paths.comp_branch[:, i, j])
        else:
            raise ValueError(f"unknown filtration kind {kind!r}")
        G.append(join(G[-1], sig))
    return PartitionFiltration(tuple(G), tuple(paths.increment_partition(i) for i in range(paths.steps)))


@dataclass(frozen=True)
class BMProjection:
    BG: np.ndarray              # (steps + 1, n, k)
    aG: np.ndarray              # (steps, n, k, k), constant on atoms of G_i
    martingale_error: float
    eig_min: float
    eig_max: float


def _atom_mean(prob, labels, values):
    out = np.empty_like(values)
    for a in np.unique(labels):
        on = labels == a
        p = prob[on]
        out[on] = (p @ values[on]) / p.sum()
    return out


def project_bm(paths: NoisePaths, filt: PartitionFiltration) -> BMProjection:
    """``B^G_i = E[B_i | G_i]`` and ``a^G_i = E[dB^G dB^G^T | G_i] / dt``.

    Raises AssertionError if ``B^G`` fails the martingale identity or ``a^G``
    leaves ``[0, I]``.
    """
    if not h_star_check(filt):
        raise FiltrationNotHStar("filtration is not (H*)")
    n, k, steps = paths.n, paths.k, paths.steps
    BG = np.empty((steps + 1, n, k))
    for i in range(steps + 1):
        BG[i] = _atom_mean(paths.prob, filt.partitions[i].array, paths.B(i))
    aG = np.empty((steps, n, k, k))
    mart = 0.0
    lo, hi = math.inf, -math.inf
    for i in range(steps):
        d = BG[i + 1] - BG[i]
        lab = filt.partitions[i].array
        for a in np.unique(lab):
            on = lab == a
            p = paths.prob[on] / paths.prob[on].sum()
            mart = max(mart, float(np.max(np.abs(p @ d[on]))))
            A = np.einsum("j,jk,jl->kl", p, d[on], d[on]) / paths.dts[i]
            aG[i, on] = A
            ev = np.linalg.eigvalsh(A)
            lo, hi = min(lo, ev[0]), max(hi, ev[-1])
    if mart > MARTINGALE_TOL:
        raise AssertionError(f"projected Brownian motion is not a martingale (error {mart:.3e})")
    if lo < -EIG_TOL or hi > 1 + EIG_TOL:
        raise AssertionError(f"a^G eigenvalues [{lo}, {hi}] outside [0, 1]")
    return BMProjection(BG, aG, mart, lo, hi)


# processes on the tree

@dataclass(frozen=True)
class Process:
    """Euler flow ``X_{i+1} = X_i + alpha_i dt + beta_i . dB_i`` with its coefficients."""

    X: np.ndarray       # (steps + 1, n)
    alpha: np.ndarray   # (steps, n)
    beta: np.ndarray    # (steps, n, k)


def simulate(paths: NoisePaths, alpha: Callable, beta: Callable, x0: np.ndarray | None = None) -> Process:
    """``alpha(t, x) -> (n,)`` and ``beta(t, x) -> (n, k)``, evaluated at left points."""
    x = paths.xi.copy() if x0 is None else np.asarray(x0, dtype=float).copy()
    X, A, Bt = [x.copy()], [], []
    for i in range(paths.steps):
        t = paths.times[i]
        a = np.broadcast_to(np.asarray(alpha(t, x), dtype=float), (paths.n,)).copy()
        b = np.broadcast_to(np.asarray(beta(t, x), dtype=float), (paths.n, paths.k)).copy()
        x = x + a * paths.dts[i] + np.einsum("nk,nk->n", b, paths.dB[:, i, :])
        X.append(x.copy())
        A.append(a)
        Bt.append(b)
    return Process(np.array(X), np.array(A), np.array(Bt))


def _nested_and_laws(paths: NoisePaths, x: np.ndarray, part: Partition):
    space = FiniteProbSpace(paths.prob, {"X": x})
    laws = conditional_law(space, "X", part)
    r = canonicalize(NestedMeasure([(float(paths.prob[part.array == a].sum()), m) for a, m in laws.items()]))
    return r, laws


@dataclass(frozen=True)
class ItoReport:
    lhs: np.ndarray
    rhs: np.ndarray
    terms: np.ndarray   # (steps, 4): time, drift, diffusion, common-information terms

    @property
    def residual(self) -> np.ndarray:
        return np.abs(self.lhs - self.rhs)

    @property
    def max_residual(self) -> float:
        return float(np.max(self.residual))


def _check_growth(bundle: FunctionalBundle, t, r: NestedMeasure) -> None:
    if bundle.growth is None:
        return
    for _, m in r.atoms:
        v = abs(bundle.dU(t, r, m))
        if v > bundle.growth * (1 + second_moment(m)) + 1e-12:
            raise UnboundedDerivativeDetected(f"|dU| = {v} exceeds the growth bound at t={t}")


def ito_rhs(bundle: FunctionalBundle, t: float, paths: NoisePaths, x, alpha, beta, part: Partition,
            aG: np.ndarray) -> tuple[float, np.ndarray]:
    """Right side of the Ito formula at one time, all expectations exact.

    ``aG`` is ``(n, k, k)``; the copy runs over pairs inside each atom of ``part``.
    """
    r, laws = _nested_and_laws(paths, x, part)
    _check_growth(bundle, t, r)
    lab = part.array
    drift = diff = common = 0.0
    for a, mu in laws.items():
        on = np.flatnonzero(lab == a)
        p = paths.prob[on]
        pa = p.sum()
        xa, al, be = x[on], alpha[on], beta[on]
        drift += float(p @ (np.asarray(bundle.dx_dmu_dU(t, r, mu, xa)) * al))
        diff += 0.5 * float(p @ (np.broadcast_to(bundle.dxx_dmu_dU(t, r, mu, xa), xa.shape) * np.sum(be * be, axis=1)))
        A = aG[on[0]]
        kern = np.broadcast_to(bundle.dxxt_d2mu_dU(t, r, mu, xa[:, None], xa[None, :]), (on.size, on.size))
        bab = be @ A @ be.T
        q = p / pa
        common += 0.5 * pa * float(q @ (kern * bab) @ q)
    dt_term = float(bundle.dt_U(t, r))
    terms = np.array([dt_term, drift, diff, common])
    return float(terms.sum()), terms


def ito_residual(bundle: FunctionalBundle, paths: NoisePaths, proc: Process, filt: PartitionFiltration) -> ItoReport:
    """Compare ``(U(t_{i+1}, r_{i+1}) - U(t_i, r_i)) / dt`` with the Ito right side."""
    proj = project_bm(paths, filt)
    lhs, rhs, terms = [], [], []
    for i in range(paths.steps):
        t0, t1 = paths.times[i], paths.times[i + 1]
        r0, _ = _nested_and_laws(paths, proc.X[i], filt.partitions[i])
        r1, _ = _nested_and_laws(paths, proc.X[i + 1], filt.partitions[i + 1])
        lhs.append((bundle.U(t1, r1) - bundle.U(t0, r0)) / (t1 - t0))
        v, tm = ito_rhs(bundle, t0, paths, proc.X[i], proc.alpha[i], proc.beta[i], filt.partitions[i], proj.aG[i])
        rhs.append(v)
        terms.append(tm)
    return ItoReport(np.array(lhs), np.array(rhs), np.array(terms))


# registry of Ito test cases

@dataclass(frozen=True)
class ItoCase:
    bundle: str
    alpha: Callable
    beta: Callable
    xi_points: tuple[float, ...]
    filtration: str
    g0: str = "full"
    tree: str = "binary"
    trivial: bool = False   # residual is expected to vanish identically


ITO_CASES: dict[str, ItoCase] = {
    "linear-mean": ItoCase("linear-mean", lambda t, x: -x, lambda t, x: np.ones((x.size, 1)), (-1.0, 1.0), "sign",
                           trivial=True),
    "linear-mean-martingale": ItoCase("linear-mean", lambda t, x: 0 * x, lambda t, x: np.ones((x.size, 1)),
                                      (-1.0, 1.0), "sign", trivial=True),
    "quadratic-mean": ItoCase("quadratic-mean", lambda t, x: -x, lambda t, x: np.ones((x.size, 1)), (-1.0, 1.0),
                              "sign"),
    "quadratic-mean-partial": ItoCase("quadratic-mean", lambda t, x: -x, lambda t, x: np.ones((x.size, 1)),
                                      (-1.0, 1.0), "up", tree="ternary"),
    "quadratic-mean-trivial": ItoCase("quadratic-mean", lambda t, x: 0 * x, lambda t, x: np.ones((x.size, 1)),
                                      (-1.0, 1.0), "trivial", g0="trivial", trivial=True),
    "linear-second-moment": ItoCase("linear-second-moment", lambda t, x: -x, lambda t, x: np.ones((x.size, 1)),
                                    (-1.0, 1.0), "sign"),
    "mean-squared": ItoCase("mean-squared", lambda t, x: -x, lambda t, x: np.ones((x.size, 1)), (0.0, 2.0),
                            "trivial", g0="trivial"),
    "time-quadratic-mean": ItoCase("time-quadratic-mean", lambda t, x: -x, lambda t, x: np.ones((x.size, 1)),
                                   (-1.0, 1.0), "up", tree="ternary"),
}


def _g0(case_g0: str, n: int) -> Partition:
    return Partition.finest(n) if case_g0 == "full" else Partition.trivial(n)


def run_ito_case(name: str, dt: float, steps: int = 3) -> ItoReport:
    case = ITO_CASES[name]
    xs = np.array(case.xi_points)
    space = FiniteProbSpace(np.full(xs.size, 1.0 / xs.size), {"xi": xs})
    paths = noise_paths(NoiseTree.uniform(steps, dt, case.tree), space)
    filt = make_filtration(paths, case.filtration, _g0(case.g0, space.n))
    proc = simulate(paths, case.alpha, case.beta)
    return ito_residual(BUNDLES[case.bundle](), paths, proc, filt)


def loglog_slope(dts: Sequence[float], residuals: Sequence[float]) -> float:
    return float(np.polyfit(np.log(dts), np.log(residuals), 1)[0])


# generalized formula on P2(R x P2(R))

@dataclass(frozen=True)
class PairLaw:
    """Law of ``(X1, L_{X2|G})`` as per-outcome atoms."""

    weights: np.ndarray
    x: np.ndarray
    inners: tuple[DiscreteMeasure, ...]

    @property
    def atoms(self):
        return list(zip(self.weights, self.x, self.inners))


@dataclass(frozen=True)
class PairFunctionalBundle:
    """``V(t, P)`` on joint laws of a point and a measure, with derivatives.

    Signatures: ``dV(t, P, x, mu)``, ``dx_dV``/``dxx_dV`` likewise;
    ``dxt_dmu_dV``, ``dxtxt_dmu_dV``, ``dxxt_dmu_dV`` take ``(t, P, x, mu, xt)``;
    ``dxtxb_d2mu_dV`` takes ``(t, P, x, mu, xt, xb)``.
    """

    name: str
    V: Callable
    dt_V: Callable = _zero
    dV: Callable = _zero
    dx_dV: Callable = _zero
    dxx_dV: Callable = _zero
    dxt_dmu_dV: Callable = _zero
    dxtxt_dmu_dV: Callable = _zero
    dxxt_dmu_dV: Callable = _zero
    dxtxb_d2mu_dV: Callable = _zero


def _pair_mean() -> PairFunctionalBundle:
    return PairFunctionalBundle("pair-mean", V=lambda t, P: float(P.weights @ P.x),
                                dV=lambda t, P, x, mu: x, dx_dV=lambda t, P, x, mu: 1.0)


def _x_times_mean() -> PairFunctionalBundle:
    # V = E[v(X1, mu)] with v(x, mu) = x m_mu, so dV/dP = v
    return PairFunctionalBundle(
        "x-times-mean",
        V=lambda t, P: float(sum(w * x * mean_scalar(m) for w, x, m in P.atoms)),
        dV=lambda t, P, x, mu: x * mean_scalar(mu),
        dx_dV=lambda t, P, x, mu: mean_scalar(mu),
        dxt_dmu_dV=lambda t, P, x, mu, xt: x + 0.0 * xt,
        dxxt_dmu_dV=lambda t, P, x, mu, xt: 1.0 + 0.0 * x * xt,
    )


def _product_means() -> PairFunctionalBundle:
    # V = E[X1] * E[m_mu]
    def e1(P):
        return float(P.weights @ P.x)

    def e2(P):
        return float(sum(w * mean_scalar(m) for w, _, m in P.atoms))

    return PairFunctionalBundle(
        "product-means",
        V=lambda t, P: e1(P) * e2(P),
        dV=lambda t, P, x, mu: x * e2(P) + mean_scalar(mu) * e1(P),
        dx_dV=lambda t, P, x, mu: e2(P),
        dxt_dmu_dV=lambda t, P, x, mu, xt: e1(P) + 0.0 * x * xt,
    )


PAIR_BUNDLES: dict[str, Callable[[], PairFunctionalBundle]] = {
    "pair-mean": _pair_mean,
    "x-times-mean": _x_times_mean,
    "product-means": _product_means,
}


def _pair_law(paths: NoisePaths, x1, x2, part: Partition) -> tuple[PairLaw, dict]:
    space = FiniteProbSpace(paths.prob, {"X": x2})
    laws = conditional_law(space, "X", part)
    inners = tuple(laws[a] for a in part.labels)
    return PairLaw(paths.prob.copy(), np.asarray(x1, dtype=float).copy(), inners), laws


def _bcast(v, shape):
    return np.broadcast_to(np.asarray(v, dtype=float), shape)


def ito_general_terms(bundle: PairFunctionalBundle, t: float, paths: NoisePaths, x1, a1, b1, x2, a2, b2,
                      part: Partition, aG: np.ndarray, common: int | None = None) -> np.ndarray:
    """The seven right-side terms of the joint-law Ito formula at one time.

    With ``common=j`` the two information terms use ``beta[:, j]`` products in
    place of ``beta a^G beta^T``, which is the common-noise form obtained by
    taking expectations of the classical formula.
    """
    P, laws = _pair_law(paths, x1, x2, part)
    lab = part.array
    T = np.zeros(7)
    T[0] = float(bundle.dt_V(t, P))
    for a, mu in laws.items():
        on = np.flatnonzero(lab == a)
        p = paths.prob[on]
        pa = p.sum()
        q = p / pa
        n = on.size
        X1, X2 = x1[on], x2[on]
        B1, B2 = b1[on], b2[on]
        A = aG[on[0]]
        T[1] += float(p @ (_bcast(bundle.dx_dV(t, P, X1, mu), (n,)) * a1[on]))
        T[2] += 0.5 * float(p @ (_bcast(bundle.dxx_dV(t, P, X1, mu), (n,)) * np.sum(B1 * B1, axis=1)))
        # pairs (omega, copy) inside the atom
        xj, xl = X1[:, None], X2[None, :]
        w2 = pa * np.outer(q, q)
        T[3] += float(np.sum(w2 * _bcast(bundle.dxt_dmu_dV(t, P, xj, mu, xl), (n, n)) * a2[on][None, :]))
        T[4] += 0.5 * float(np.sum(w2 * _bcast(bundle.dxtxt_dmu_dV(t, P, xj, mu, xl), (n, n))
                                   * np.sum(B2 * B2, axis=1)[None, :]))
        if common is None:
            cross12, cross22 = B1 @ A @ B2.T, B2 @ A @ B2.T
        else:
            cross12 = np.outer(B1[:, common], B2[:, common])
            cross22 = np.outer(B2[:, common], B2[:, common])
        T[5] += float(np.sum(w2 * _bcast(bundle.dxxt_dmu_dV(t, P, xj, mu, xl), (n, n)) * cross12))
        # triples (omega, copy, second copy)
        w3 = pa * q[:, None, None] * q[None, :, None] * q[None, None, :]
        k3 = _bcast(bundle.dxtxb_d2mu_dV(t, P, X1[:, None, None], mu, X2[None, :, None], X2[None, None, :]), (n, n, n))
        T[6] += 0.5 * float(np.sum(w3 * k3 * cross22[None, :, :]))
    return T


@dataclass(frozen=True)
class GeneralItoReport:
    lhs: np.ndarray
    rhs: np.ndarray
    terms: np.ndarray               # (steps, 7)
    common_terms: np.ndarray | None  # (steps, 7) in the common-noise form, if requested

    @property
    def max_residual(self) -> float:
        return float(np.max(np.abs(self.lhs - self.rhs)))

    @property
    def consistency_gap(self) -> float:
        if self.common_terms is None:
            return math.nan
        return float(np.max(np.abs(self.terms - self.common_terms)))


def ito_general_residual(bundle: PairFunctionalBundle, paths: NoisePaths, p1: Process, p2: Process,
                         filt: PartitionFiltration, common: int | None = None) -> GeneralItoReport:
    proj = project_bm(paths, filt)
    lhs, rhs, terms, cterms = [], [], [], []
    for i in range(paths.steps):
        t0, t1 = paths.times[i], paths.times[i + 1]
        P0, _ = _pair_law(paths, p1.X[i], p2.X[i], filt.partitions[i])
        P1, _ = _pair_law(paths, p1.X[i + 1], p2.X[i + 1], filt.partitions[i + 1])
        lhs.append((bundle.V(t1, P1) - bundle.V(t0, P0)) / (t1 - t0))
        args = (bundle, t0, paths, p1.X[i], p1.alpha[i], p1.beta[i], p2.X[i], p2.alpha[i], p2.beta[i],
                filt.partitions[i], proj.aG[i])
        T = ito_general_terms(*args)
        terms.append(T)
        rhs.append(float(T.sum()))
        if common is not None:
            cterms.append(ito_general_terms(*args, common=common))
    return GeneralItoReport(np.array(lhs), np.array(rhs), np.array(terms),
                            np.array(cterms) if common is not None else None)


def common_noise_case(bundle: str = "x-times-mean", dt: float = 0.125, steps: int = 3) -> GeneralItoReport:
    """Two scalar states driven by ``B = (B', B0)`` with ``G`` generated by ``B0``.

    The coefficients are state dependent so every term is exercised.
    """
    space = FiniteProbSpace([0.5, 0.5], {"xi": [-0.5, 1.0]})
    paths = noise_paths(NoiseTree.uniform(steps, dt), space, dim=2)
    filt = make_filtration(paths, "component:1", Partition.finest(2))
    p1 = simulate(paths, lambda t, x: 0.5 - x, lambda t, x: np.stack([np.ones_like(x), 0.5 + 0.1 * np.tanh(x)], 1))
    p2 = simulate(paths, lambda t, x: np.sin(x), lambda t, x: np.stack([0.3 * np.ones_like(x), 1.0 + 0.2 * x * x], 1),
                  x0=paths.xi * 0.5 + 0.25)
    return ito_general_residual(PAIR_BUNDLES[bundle](), paths, p1, p2, filt, common=1)


# the operator L and the selector

def hamiltonian(bundle: FunctionalBundle, t: float, r: NestedMeasure, b: Callable, sigma: Callable):
    """``L U(t, r)`` with exact sums over atoms.

    Returns ``(value, sigma_star)`` where ``sigma_star[j]`` is 1 when the
    second-order information term on atom ``j`` is positive and 0 otherwise.
    """
    total = float(bundle.dt_U(t, r))
    sel = []
    for w, mu in r.atoms:
        x = mu.points[:, 0]
        pw = mu.weights
        bx = np.broadcast_to(np.asarray(b(t, x), dtype=float), x.shape)
        sx = np.broadcast_to(np.asarray(sigma(t, x), dtype=float), x.shape)
        first = pw @ (_bcast(bundle.dx_dmu_dU(t, r, mu, x), x.shape) * bx
                      + 0.5 * _bcast(bundle.dxx_dmu_dU(t, r, mu, x), x.shape) * sx * sx)
        kern = _bcast(bundle.dxxt_d2mu_dU(t, r, mu, x[:, None], x[None, :]), (x.size, x.size))
        phi = float(pw @ (kern * np.outer(sx, sx)) @ pw)
        total += w * (first + 0.5 * max(phi, 0.0))
        sel.append(1 if phi > 0 else 0)
    return total, np.array(sel, dtype=int)
