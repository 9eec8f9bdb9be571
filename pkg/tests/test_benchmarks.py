from fractions import Fraction

import numpy as np
import pytest

from hyperform.benchmarks import (barbell_adjacency, barbell_continuous, barbell_discrete,
                                  barbell_split, iid_chain, make_barbell, split_layout,
                                  split_probe_family, unsplit_point)
from hyperform.chain_core import dirichlet_form, validate_chain, variance
from hyperform.grid import Point, build_partition, check_kernel, discretize_kernel
from hyperform.paths import congestion_ratio_finite

from oracles import barbell_bruteforce, congestion_bruteforce


@pytest.mark.parametrize("n", [3, 4, 8, 13])
def test_discrete_structure(n):
    inst = barbell_discrete(n)
    A = barbell_adjacency(n)
    assert A.sum() // 2 == (n - 1) ** 2 + n
    P, pi, _ = barbell_bruteforce(n)
    assert inst.chain.dense() == pytest.approx(P, abs=1e-15)
    assert inst.chain.stationary == pytest.approx(pi, abs=1e-15)
    assert validate_chain(inst.chain).ok
    probs = {Fraction(x).limit_denominator(1000) for x in inst.chain.kernel.data}
    assert probs <= {Fraction(1, n), Fraction(1, n - 1)}
    edges = (n - 1) ** 2 + n
    masses = {round(x * 2 * edges, 9) for x in inst.chain.stationary}
    assert masses == {n, n - 1}


def test_discrete_family_shape():
    n = 6
    fam = barbell_discrete(n).family
    assert len(fam) == (2 * n) * (2 * n - 1)
    assert max(p.length for p in fam.values()) == 3
    assert fam[0, 1].length == 1
    assert fam[n - 1, n].length == 1
    assert fam[0, n + 1].vertices == (0, n - 1, n, n + 1)
    assert fam[n + 1, n - 1].vertices == (n + 1, n, n - 1)
    center = sum((n - 1, n) in p.edges for p in fam.values())
    assert center == n * n
    assert fam.max_paths_per_edge() == n * n


@pytest.mark.parametrize("n", [3, 5])
def test_discrete_congestion_matches_bruteforce(n):
    inst = barbell_discrete(n)
    ref = inst.reference()
    paths = {k: list(p.vertices) for k, p in inst.family.items()}
    want = congestion_bruteforce(inst.chain.dense(), inst.chain.stationary, ref.dense(), ref.stationary, paths)
    assert congestion_ratio_finite(inst.chain, ref, inst.family).value == pytest.approx(want, rel=1e-12)


def test_discrete_congestion_frozen_values():
    # computed by the brute-force oracle; the center edge is the argmax
    for n, want in [(4, 15.5), (8, 77.5)]:
        inst = barbell_discrete(n)
        res = congestion_ratio_finite(inst.chain, inst.reference(), inst.family)
        assert res.value == pytest.approx(want, rel=1e-12)
        assert (n - 1, n) in res.argmax


def test_small_n_rejected():
    for maker in (barbell_discrete, barbell_continuous, barbell_split):
        with pytest.raises(ValueError):
            maker(2)
    with pytest.raises(ValueError):
        make_barbell(4, "square")


def test_continuous_density_is_the_walk():
    n = 4
    inst = barbell_continuous(n)
    P = barbell_discrete(n).chain.dense()
    k = inst.kernel
    for a, b in [(0, 1), (n - 1, n), (0, n + 1), (2, 2)]:
        assert k.f(Point.of(a, 0.3), Point.of(b, 0.9)) == P[a, b]
    assert check_kernel(k, np.random.default_rng(0))["ok"]


@pytest.mark.parametrize("m", [1, 3, 4])
def test_continuous_aggregates_to_discrete(m):
    n = 4
    inst = barbell_continuous(n)
    part = build_partition(inst.kernel.space, m)
    G = discretize_kernel(inst.kernel, part)
    D = G.base.dense()
    agg = D.reshape(2 * n, m, 2 * n, m).sum(axis=3)[:, 0, :]
    assert agg == pytest.approx(barbell_discrete(n).chain.dense(), abs=1e-14)
    assert G.stationary.reshape(2 * n, m).sum(axis=1) == pytest.approx(barbell_discrete(n).chain.stationary, abs=1e-14)


def test_split_layout_and_map():
    n = 4
    vertex_of, clone_of, rank = split_layout(n)
    assert len(vertex_of) == 4 * (n - 1)
    assert vertex_of.count(n - 1) == n - 1 and vertex_of.count(n) == n - 1
    inst = barbell_split(n)
    c = n - 1 + 1  # second clone of l, indexed by vertex 1
    assert clone_of[c] == 1 and rank[c] == 2
    v, t = unsplit_point(inst, Point.of(c, 0.5))
    assert v == n - 1 and t == pytest.approx(0.5 / 3 + 1 / 3)
    assert unsplit_point(inst, Point.of(0, 0.5)) == (0, 0.5)


def test_split_is_measure_preserving_relabel():
    n = 5
    inst = barbell_split(n)
    assert check_kernel(inst.kernel, np.random.default_rng(0))["ok"]
    T, S = inst.kernel.component_transition, inst.kernel.component_stationary
    V = np.array(inst.vertex_of)
    merge = np.zeros((len(V), 2 * n))
    merge[np.arange(len(V)), V] = 1.0
    disc = barbell_discrete(n).chain
    # every component's row, merged over clones, is the walk row of its vertex
    assert T @ merge == pytest.approx(disc.dense()[V], abs=1e-15)
    assert S @ merge == pytest.approx(disc.stationary, abs=1e-15)


def test_split_family_paths_short_and_in_support():
    inst = barbell_split(4)
    fam = split_probe_family(inst, 4, seed=0)
    assert fam.max_paths_per_edge() == 1
    for p in fam.values():
        assert 1 <= p.length <= 3
        for e in p.edges:
            assert inst.kernel.f(*e) > 0


def test_split_route_cross_path_hits_clones():
    n = 4
    inst = barbell_split(n)
    x, y = Point.of(0, 0.2), Point.of(4 * (n - 1) - 1, 0.7)
    p = inst.family.path_for(x, y)
    assert [v.component for v in p.vertices] == [0, n - 1, 2 * (n - 1) + (n - 2), 4 * (n - 1) - 1]
    assert p.vertices[1].coords == (0.2,) and p.vertices[2].coords == (0.7,)


def test_iid_chain():
    pi = np.array([0.2, 0.3, 0.5])
    ch = iid_chain(pi)
    assert (ch.dense() == np.tile(pi, (3, 1))).all()
    f = np.array([1.0, -2.0, 4.0])
    assert dirichlet_form(ch, f) == pytest.approx(variance(ch, f))
    with pytest.raises(ValueError):
        iid_chain([0.5, 0.6])
    with pytest.raises(ValueError):
        iid_chain([1.2, -0.2])
