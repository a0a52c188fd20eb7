import numpy as np
from hypothesis import HealthCheck, settings, strategies as st

from nestprob.measures import DiscreteMeasure, NestedMeasure

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@st.composite
def discrete_measures(draw, max_atoms=5, lo=-3.0, hi=3.0, d=1):
    n = draw(st.integers(1, max_atoms))
    pts = draw(st.lists(st.lists(st.floats(lo, hi, allow_nan=False, width=32), min_size=d, max_size=d),
                        min_size=n, max_size=n))
    w = draw(st.lists(st.floats(0.05, 1.0), min_size=n, max_size=n))
    w = np.asarray(w) / np.sum(w)
    return DiscreteMeasure(np.asarray(pts, dtype=float), w)


@st.composite
def nested_measures(draw, max_outer=4, max_inner=4, lo=-3.0, hi=3.0):
    k = draw(st.integers(1, max_outer))
    inners = [draw(discrete_measures(max_inner, lo, hi)) for _ in range(k)]
    w = draw(st.lists(st.floats(0.05, 1.0), min_size=k, max_size=k))
    w = np.asarray(w) / np.sum(w)
    return NestedMeasure(list(zip(w, inners)))


def random_measure(rng, n=None, lo=0.0, hi=1.0):
    n = n or int(rng.integers(1, 6))
    return DiscreteMeasure(rng.uniform(lo, hi, size=(n, 1)), rng.dirichlet(np.ones(n)))


def random_nested(rng, k=None, lo=0.0, hi=1.0):
    k = k or int(rng.integers(1, 5))
    return NestedMeasure([(w, random_measure(rng, lo=lo, hi=hi)) for w in rng.dirichlet(np.ones(k))])
