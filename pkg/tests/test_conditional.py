import numpy as np
import pytest
from hypothesis import given, strategies as st

from nestprob.conditional import (
    FiniteProbSpace, Partition, PartitionFiltration, conditional_law, h_check, h_star_check, join,
    law_of_conditional_law, mean_square_functional, measurable, prop_equiv_check, realize_nested_law, refines,
    set_partitions,
)
from nestprob.errors import EmptyAtom
from nestprob.measures import DiscreteMeasure, NestedMeasure, canonical_key, flatten, mixture
from nestprob.transport import nested_wp

from conftest import nested_measures, random_nested

BERN = DiscreteMeasure([[0.0], [1.0]], [0.5, 0.5])


def bernoulli_pair():
    x1, x2 = np.array([0, 0, 1, 1.0]), np.array([0, 1, 0, 1.0])
    return FiniteProbSpace(np.full(4, 0.25), {"X": x1, "Y": x2}), x1, x2


@st.composite
def spaces_and_partitions(draw, max_n=6):
    n = draw(st.integers(1, max_n))
    p = np.asarray(draw(st.lists(st.floats(0.05, 1.0), min_size=n, max_size=n)))
    x = draw(st.lists(st.integers(-2, 2), min_size=n, max_size=n))
    labels = draw(st.lists(st.integers(0, 3), min_size=n, max_size=n))
    return FiniteProbSpace(p / p.sum(), {"X": np.asarray(x, float)}), Partition(labels)


def test_partition_relabel_and_equality():
    assert Partition([5, 5, 2]) == Partition([0, 0, 1])
    assert Partition.trivial(3).n_atoms == 1 and Partition.finest(3).n_atoms == 3
    assert refines(Partition.finest(3), Partition([0, 0, 1]))
    assert join(Partition([0, 0, 1, 1]), Partition([0, 1, 0, 1])) == Partition.finest(4)


def test_set_partition_counts():
    # Bell numbers, and Stirling numbers S(n, <=2)
    assert [sum(1 for _ in set_partitions(n)) for n in range(1, 7)] == [1, 2, 5, 15, 52, 203]
    assert sum(1 for _ in set_partitions(6, 2)) == 32
    assert next(set_partitions(4)) == (0, 0, 0, 0)


def test_conditional_law_examples():
    space, x1, x2 = bernoulli_pair()
    (only,) = conditional_law(space, "X", Partition.trivial(4)).values()
    assert canonical_key(only) == canonical_key(BERN)
    two = FiniteProbSpace([0.5, 0.5], {"X": [0.0, 1.0]})
    laws = conditional_law(two, "X", Partition.finest(2))
    assert all(m.size == 1 for m in laws.values())
    for m in conditional_law(space, "X", Partition.generated_by(x2)).values():
        assert canonical_key(m) == canonical_key(BERN)


def test_empty_atom_rejected():
    space = FiniteProbSpace([0.5, 0.5], {"X": [0.0, 1.0]})
    with pytest.raises((EmptyAtom, ValueError)):
        conditional_law(space, "X", Partition([0, 0, 0]))


def test_law_of_conditional_law_examples():
    space, x1, x2 = bernoulli_pair()
    target = canonical_key(NestedMeasure.dirac(BERN))
    assert canonical_key(law_of_conditional_law(space, "X", Partition.trivial(4))) == target
    assert canonical_key(law_of_conditional_law(space, "X", Partition.generated_by(x2))) == target
    r = law_of_conditional_law(space, "X", Partition([0, 0, 1, 1]))
    assert canonical_key(r) == canonical_key(NestedMeasure([(0.5, DiscreteMeasure.dirac(0.0)),
                                                            (0.5, DiscreteMeasure.dirac(1.0))]))
    inj = FiniteProbSpace([0.2, 0.3, 0.5], {"X": [1.0, 2.0, 3.0]})
    r = law_of_conditional_law(inj, "X", Partition.finest(3))
    assert all(m.size == 1 for m in r.inners)


def test_prop_equiv_examples():
    space, x1, x2 = bernoulli_pair()
    v = prop_equiv_check(space, "X", Partition([0, 0, 1, 1]), Partition([0, 0, 1, 1]))
    assert v.nested_equal and v.partitions_equal and v.status == "Equivalent"
    v = prop_equiv_check(space, "X", Partition.trivial(4), Partition.generated_by(x2))
    assert v.status == "NotSubSigmaOfX" and v.nested_equal and not v.partitions_equal


def test_prop_equiv_exhaustive_injective():
    space = FiniteProbSpace([0.1, 0.2, 0.3, 0.4], {"X": [0.0, 1.0, 2.0, 3.0]})
    parts = [Partition(l) for l in set_partitions(4)]
    for a in parts:
        for b in parts:
            v = prop_equiv_check(space, "X", a, b)
            assert v.sub_sigma_of_x and v.nested_equal == v.partitions_equal == (a == b)


def test_realize_examples():
    rz = realize_nested_law(NestedMeasure.dirac(DiscreteMeasure.dirac(0.0)))
    assert np.all(rz.space.rvs["X"] == 0.0)
    r = NestedMeasure([(0.5, DiscreteMeasure.dirac(0.0)), (0.5, DiscreteMeasure.dirac(1.0))])
    rz = realize_nested_law(r)
    assert np.allclose(rz.space.prob, 0.5)
    assert nested_wp(law_of_conditional_law(rz.space, "X", rz.partition), r)[0] == 0.0
    r = NestedMeasure([(0.5, BERN), (0.5, DiscreteMeasure.dirac(1.0))])
    rz = realize_nested_law(r)
    assert nested_wp(law_of_conditional_law(rz.space, "X", rz.partition), r)[0] <= 1e-9


def test_realize_with_projection_level():
    rng = np.random.default_rng(2)
    r = random_nested(rng)
    rz = realize_nested_law(r, level=3)
    back = law_of_conditional_law(rz.space, "X", rz.partition)
    assert nested_wp(back, rz.nested)[0] <= 1e-9
    assert nested_wp(rz.nested, r)[0] <= 4 * 2 ** (-1.5)


def test_h_star_examples():
    space, x1, x2 = bernoulli_pair()
    T, inc = Partition.trivial(4), (Partition.generated_by(x1), Partition.generated_by(x2))
    ambient = [T, Partition.generated_by(x1), Partition.finest(4)]
    full = PartitionFiltration.full_information(T, inc)
    assert h_star_check(full) and h_check(full, ambient, space.prob)
    const = PartitionFiltration((T, T, T), inc)
    assert h_star_check(const) and h_check(const, ambient, space.prob)
    odd = PartitionFiltration((T, T, Partition.generated_by(x1 == x2)), inc)
    assert not h_star_check(odd) and h_check(odd, ambient, space.prob)


def test_h_fails_when_future_is_revealed():
    space, x1, x2 = bernoulli_pair()
    T = Partition.trivial(4)
    inc = (Partition.generated_by(x1), Partition.generated_by(x2))
    peek = PartitionFiltration((T, Partition.generated_by(x2), Partition.finest(4)), inc)
    assert not h_star_check(peek)
    ambient = [T, Partition.generated_by(x1), Partition.finest(4)]
    # G_T carries X_1, which is not independent of F_1 given G_1 = sigma(X_2)
    assert not h_check(peek, ambient, space.prob)


@given(spaces_and_partitions())
def test_tower_property(sp):
    space, part = sp
    r = law_of_conditional_law(space, "X", part)
    assert canonical_key(flatten(r)) == canonical_key(space.law("X"))
    assert np.isclose(mean_square_functional(r), sum(
        w * float(m.weights @ m.points[:, 0]) ** 2 for w, m in r.atoms), atol=1e-12)


@given(spaces_and_partitions())
def test_convex_order(sp):
    space, part = sp
    lo = mean_square_functional(law_of_conditional_law(space, "X", Partition.trivial(space.n)))
    mid = mean_square_functional(law_of_conditional_law(space, "X", part))
    hi = mean_square_functional(law_of_conditional_law(space, "X", Partition.finest(space.n)))
    assert lo <= mid + 1e-12 and mid <= hi + 1e-12


@given(spaces_and_partitions(), st.lists(st.integers(0, 2), min_size=6, max_size=6))
def test_refinement_monotone(sp, extra):
    space, part = sp
    finer = join(part, Partition(extra[: space.n]))
    assert measurable(part, finer)
    assert mean_square_functional(law_of_conditional_law(space, "X", part)) <= \
        mean_square_functional(law_of_conditional_law(space, "X", finer)) + 1e-12


def test_round_trip_random():
    rng = np.random.default_rng(7)
    for _ in range(100):
        r = random_nested(rng, lo=-1, hi=1)
        rz = realize_nested_law(r)
        assert nested_wp(law_of_conditional_law(rz.space, "X", rz.partition), r)[0] <= 1e-9


@given(nested_measures())
def test_round_trip_property(r):
    rz = realize_nested_law(r)
    assert canonical_key(law_of_conditional_law(rz.space, "X", rz.partition)) == canonical_key(r)


@given(spaces_and_partitions(), st.randoms(use_true_random=False))
def test_permutation_invariance(sp, rnd):
    space, part = sp
    perm = list(range(space.n))
    rnd.shuffle(perm)
    moved = space.permuted(perm)
    assert canonical_key(law_of_conditional_law(moved, "X", Partition(part.array[perm]))) == \
        canonical_key(law_of_conditional_law(space, "X", part))


def test_space_json_round_trip():
    space, _, _ = bernoulli_pair()
    back = FiniteProbSpace.from_dict(space.to_dict())
    assert np.array_equal(back.prob, space.prob) and np.array_equal(back.rvs["Y"], space.rvs["Y"])


def test_mixture_is_linear():
    a = NestedMeasure.dirac(BERN)
    b = NestedMeasure.dirac(DiscreteMeasure.dirac(2.0))
    m = mixture([(0.25, a), (0.75, b)])
    assert mean_square_functional(m) == pytest.approx(0.25 * 0.25 + 0.75 * 4.0)
