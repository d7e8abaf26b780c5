import math

import numpy as np
import pytest

from collinear.bounds import prop1_bound, residual_from_triplets
from collinear.closeness import check_closeness
from collinear.corrdata import accuracies
from collinear.events import (
    CELL_NAMES,
    PATTERNS,
    TripletDistribution,
    TripletPoint,
    dominance_table,
    triplet_events,
)
from collinear.synth import (
    EXAMPLE2_WEDGE,
    RNG_ALGORITHM,
    exact_matrix,
    example1,
    example2,
    independent_triplet,
    ordered_chain,
    planted_pair,
    random_triplet,
    sample_matrix,
)


def test_example1_recomputed():
    sc = example1()
    assert sc.P.accuracies == pytest.approx((0.6, 0.7, 0.8), abs=1e-12)
    assert sc.Q.accuracies == pytest.approx((0.5, 0.9, 0.9), abs=1e-12)
    assert residual_from_triplets(sc.P, sc.Q) == pytest.approx(sc.expected["residual"], abs=1e-12)
    assert sc.P.is_ordered() and sc.Q.is_ordered()
    assert sc.P.p_none == pytest.approx(0.2) and sc.Q.p_none == pytest.approx(0.1)


def test_example2_recomputed():
    sc = example2()
    assert sc.Q.accuracies == pytest.approx(sc.expected["mu_q"], abs=1e-12)
    assert residual_from_triplets(sc.P, sc.Q) == pytest.approx(0.163, abs=1e-12)
    assert sc.P.dominances == pytest.approx((0.18, 0.12, 0.14), abs=1e-12)
    pts = [TripletPoint(0, 1, 2, PATTERNS[0], getattr(sc.P, c), getattr(sc.Q, c)) for c in CELL_NAMES[:-1]]
    assert check_closeness(pts, EXAMPLE2_WEDGE).violating == 0
    assert prop1_bound(*sc.P.accuracies, EXAMPLE2_WEDGE).bound_value == pytest.approx(
        sc.expected["prop1_if_ordered"], abs=1e-12
    )


def test_independent_triplet():
    assert independent_triplet(1, 1, 1).p123 == 1
    t = independent_triplet(0.6, 0.7, 0.8)
    assert (t.p123, t.p23, t.p1) == pytest.approx((0.336, 0.224, 0.036), abs=1e-12)
    rng = np.random.default_rng(0)
    for mu in rng.uniform(0, 1, (20, 3)):
        assert independent_triplet(*mu).accuracies == pytest.approx(tuple(mu), abs=1e-12)
    with pytest.raises(ValueError):
        independent_triplet(1.2, 0.5, 0.5)


def test_ordered_chain():
    acc = [0.3, 0.45, 0.45, 0.7, 0.91]
    m = ordered_chain(acc, 1000, 2)
    assert dominance_table(m).zeta_max == 0
    assert np.all(np.abs(accuracies(m) - acc) <= 1 / 1000)
    for i, j, k in ((0, 1, 2), (1, 3, 4), (0, 2, 4)):
        t = triplet_events(m, i, j, k)
        assert t.p1 == t.p2 == t.p12 == t.p13 == 0
    with pytest.raises(ValueError):
        ordered_chain([], 10, 0)
    with pytest.raises(ValueError):
        ordered_chain([0.5, 0.4], 10, 0)


def test_ordered_chain_rounding_keeps_order():
    m = ordered_chain([0.1004, 0.1006], 1000, 0)
    assert accuracies(m).tolist() == [0.1, 0.101]


def test_sample_point_mass():
    m = sample_matrix(TripletDistribution.from_cells(p123=1.0), 50, 3)
    assert m.bits().all()


def test_sample_determinism():
    t = example2().Q
    a, b, c = (sample_matrix(t, 500, s) for s in (7, 7, 8))
    assert np.array_equal(a.packed, b.packed)
    assert not np.array_equal(a.packed, c.packed)
    assert RNG_ALGORITHM.startswith("numpy")


def test_sampled_example2_cells():
    n = 1_000_000
    P = example2().P
    t = triplet_events(sample_matrix(P, n, 5), 0, 1, 2)
    for name in CELL_NAMES:
        assert abs(getattr(t, name) - getattr(P, name)) <= 3 / math.sqrt(n)


def test_exact_matrix_counts():
    P = example2().Q
    t = triplet_events(exact_matrix(P, 1000, seed=1), 0, 1, 2)
    for name in CELL_NAMES:
        assert getattr(t, name) == pytest.approx(getattr(P, name), abs=1e-12)


def test_random_triplets_are_valid():
    rng = np.random.default_rng(0)
    for _ in range(100):
        t = random_triplet(rng)
        assert math.fsum(t.as_dict().values()) == pytest.approx(1.0, abs=1e-12)


def test_planted_pair_on_line():
    acc = list(np.linspace(0.5, 0.8, 8).round(4))
    mp, mq = planted_pair(acc, 0.9, -0.05, 10_000, 4)
    assert mp.model_names == mq.model_names
    assert np.allclose(accuracies(mq), 0.9 * accuracies(mp) - 0.05, atol=2e-4)
    assert dominance_table(mq).zeta_max == 0
