"""Barbell benchmark instances and the i.i.d. reference chain.

The discrete barbell has vertices ``0..n-1`` for the left clique ``L`` (with
``l = n-1`` the bridge vertex) and ``n..2n-1`` for the right clique ``R``
(with ``r = n`` the bridge vertex).  Clone orderings are ascending vertex
index.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

import numpy as np

from .chain_core import FiniteChain, make_chain
from .grid import DensityKernel, Point, ProductSpace
from .kernels import iid_of, piecewise_constant_kernel
from .paths import AssumptionConfig, Path, PathFamily

FLAVORS = ("discrete", "continuous", "split")


@dataclass(frozen=True)
class BarbellInstance:
    n: int
    flavor: str
    family: PathFamily
    config: AssumptionConfig
    chain: Optional[FiniteChain] = None
    kernel: Optional[DensityKernel] = None
    vertex_of: tuple = ()          # component (or state) -> barbell vertex
    clone_rank: dict = field(default_factory=dict)  # component -> N(v), clones only

    @property
    def left_bridge(self) -> int:
        return self.n - 1

    @property
    def right_bridge(self) -> int:
        return self.n

    def side(self, vertex: int) -> str:
        return "L" if vertex < self.n else "R"

    def reference(self):
        """The i.i.d. comparison target (chain or kernel)."""
        if self.chain is not None:
            return iid_chain(self.chain.stationary)
        return iid_of(self.kernel)


def _check_n(n: int) -> None:
    if int(n) != n or n < 3:
        raise ValueError(f"barbell needs an integer clique size n >= 3, got {n}")


def barbell_adjacency(n: int) -> np.ndarray:
    _check_n(n)
    A = np.zeros((2 * n, 2 * n), dtype=int)
    A[:n, :n] = 1
    A[n:, n:] = 1
    np.fill_diagonal(A, 0)
    A[n - 1, n] = A[n, n - 1] = 1
    return A


def _barbell_exact(n: int):
    """Simple-random-walk kernel and stationary law as exact fractions."""
    A = barbell_adjacency(n)
    deg = A.sum(axis=1)
    total = int(deg.sum())
    P = [[Fraction(int(a), int(d)) for a in row] for row, d in zip(A, deg)]
    pi = [Fraction(int(d), total) for d in deg]
    return A, P, pi


def barbell_config(n: int, epsilon: float = 0.5, epsilon0: float = 0.5) -> AssumptionConfig:
    return AssumptionConfig(epsilon=epsilon, epsilon0=epsilon0, R=3, M=2,
                            m=f"constant:{n + 1}", K=float(n + 1), L="identity",
                            goodset="support", biggoodset="support")


def _discrete_family(n: int) -> PathFamily:
    l, r = n - 1, n
    fam = PathFamily()
    for x in range(2 * n):
        for y in range(2 * n):
            if x == y:
                continue
            if (x < n) == (y < n):
                fam.add(Path((x, y)))
            elif x < n:
                fam.add(Path.through(x, l, r, y))
            else:
                fam.add(Path.through(x, r, l, y))
    return fam


def barbell_discrete(n: int) -> BarbellInstance:
    """Simple random walk on two ``n``-cliques joined by one edge."""
    _, P, pi = _barbell_exact(n)
    chain = make_chain(np.array([[float(p) for p in row] for row in P]),
                       np.array([float(p) for p in pi]), reversible=True,
                       labels=[f"{'L' if v < n else 'R'}{v}" for v in range(2 * n)])
    return BarbellInstance(n, "discrete", _discrete_family(n), barbell_config(n),
                           chain=chain, vertex_of=tuple(range(2 * n)))


def iid_chain(pi) -> FiniteChain:
    """Chain whose every row is ``pi``."""
    pi = np.asarray(pi, dtype=float)
    if pi.ndim != 1 or pi.size == 0 or pi.min() < 0 or abs(pi.sum() - 1.0) > 1e-12:
        raise ValueError("iid_chain needs a probability vector")
    return make_chain(np.tile(pi, (pi.size, 1)), pi.copy(), reversible=True)


# -- continuous flavors ---------------------------------------------------------

def barbell_continuous(n: int) -> BarbellInstance:
    """Product of the barbell walk with uniform draws on each vertex interval."""
    _, P, pi = _barbell_exact(n)
    trans = np.array([[float(p) for p in row] for row in P])
    stat = np.array([float(p) for p in pi])
    space = ProductSpace((1,) * (2 * n))
    kernel = piecewise_constant_kernel(space, trans, stat, name=f"barbell:{n}:continuous")
    l, r = n - 1, n

    def route(x: Point, y: Point) -> Path:
        a, b = x.component, y.component
        if a == b:
            via = (n - 2) if a == l else (n + 1) if a == r else (l if a < n else r)
            return Path.through(x, Point(via, x.coords), y)
        if (a < n) == (b < n):
            return Path((x, y))
        s, t = (l, r) if a < n else (r, l)
        return Path.through(x, Point(s, x.coords), Point(t, y.coords), y)

    return BarbellInstance(n, "continuous", PathFamily(route=route), barbell_config(n),
                           kernel=kernel, vertex_of=tuple(range(2 * n)))


def split_layout(n: int):
    """Components of the split space and their barbell vertices.

    Order: ``L`` minus ``l``, the ``n-1`` clones of ``l``, the ``n-1`` clones
    of ``r``, ``R`` minus ``r``.  Returns ``(vertex_of, clone_of, rank)``
    where ``clone_of[c]`` is the vertex a clone component is indexed by and
    ``rank[c]`` its ordering number ``N(v)`` in ``1..n-1``.
    """
    _check_n(n)
    left = list(range(n - 1))
    right = list(range(n + 1, 2 * n))
    vertex_of = left + [n - 1] * (n - 1) + [n] * (n - 1) + right
    clone_of, rank = {}, {}
    for k, v in enumerate(left):
        clone_of[n - 1 + k] = v
        rank[n - 1 + k] = k + 1
    for k, v in enumerate(right):
        clone_of[2 * (n - 1) + k] = v
        rank[2 * (n - 1) + k] = k + 1
    return tuple(vertex_of), clone_of, rank


def barbell_split(n: int) -> BarbellInstance:
    """Barbell product walk with each bridge interval cut into ``n-1`` clones.

    A clone of ``l`` indexed by ``v`` carries the slice of the ``l``
    interval given by :func:`unsplit_point`; densities are pushed forward so
    the process is the continuous barbell relabeled.
    """
    _, P, pi = _barbell_exact(n)
    vertex_of, clone_of, rank = split_layout(n)
    C = len(vertex_of)
    is_clone = np.array([c in clone_of for c in range(C)])
    trans = np.empty((C, C))
    stat = np.empty(C)
    for a in range(C):
        va = vertex_of[a]
        stat[a] = float(pi[va]) / (n - 1 if is_clone[a] else 1)
        for b in range(C):
            vb = vertex_of[b]
            trans[a, b] = float(P[va][vb]) / (n - 1 if is_clone[b] else 1)
    space = ProductSpace((1,) * C)
    kernel = piecewise_constant_kernel(space, trans, stat, name=f"barbell:{n}:split")

    # clone component of l (resp. r) indexed by each non-bridge vertex, and back
    clone_for = {(vertex_of[c], v): c for c, v in clone_of.items()}
    comp_of_vertex = {v: c for c, v in enumerate(vertex_of) if c not in clone_of}

    def bridge_clone(c: int, side_bridge: int) -> int:
        # the clone a point hops to: indexed by its own vertex, or itself if a clone
        if c in clone_of:
            return c
        return clone_for[(side_bridge, vertex_of[c])]

    def route(x: Point, y: Point) -> Path:
        a, b = x.component, y.component
        left_a, left_b = vertex_of[a] < n, vertex_of[b] < n
        if a == b:
            # no self-loops in the walk: detour through a neighbouring component
            if a in clone_of:
                hub = comp_of_vertex[clone_of[a]]
            else:
                hub = bridge_clone(a, n - 1 if left_a else n)
            return Path.through(x, Point(hub, x.coords), y)
        if left_a == left_b:
            if a in clone_of and b in clone_of:
                # two clones of one bridge vertex are not adjacent
                return Path.through(x, Point(comp_of_vertex[clone_of[b]], x.coords), y)
            return Path((x, y))
        s, t = (n - 1, n) if left_a else (n, n - 1)
        return Path.through(x, Point(bridge_clone(a, s), x.coords), Point(bridge_clone(b, t), y.coords), y)

    return BarbellInstance(n, "split", PathFamily(route=route), barbell_config(n),
                           kernel=kernel, vertex_of=vertex_of, clone_rank=rank)


def unsplit_point(instance: BarbellInstance, p: Point) -> tuple:
    """Map a split-space point to ``(vertex, coordinate)`` in the unsplit space."""
    v = instance.vertex_of[p.component]
    t = p.coords[0]
    rank = instance.clone_rank.get(p.component)
    if rank is None:
        return v, t
    return v, t / (instance.n - 1) + (rank - 1) / (instance.n - 1)


def split_probe_family(instance: BarbellInstance, per_axis: int, seed: int = 0) -> PathFamily:
    """Stored paths for one jittered pair per component pair and cell.

    For each ordered component pair ``(a, b)`` and cell index ``i`` the start
    point is uniform in cell ``i`` of ``a`` and the end point uniform in a
    seeded-permuted cell of ``b``.  Distinct jittered points mean no edge is
    shared exactly by two stored paths.
    """
    if instance.flavor not in ("split", "continuous"):
        raise ValueError("probe families are built for continuous barbell flavors")
    rng = np.random.default_rng(seed)
    C = instance.kernel.space.n_components
    fam = PathFamily(route=instance.family.route)
    cells = np.arange(per_axis)
    for a in range(C):
        for b in range(C):
            perm = rng.permutation(per_axis)
            u = (cells + rng.random(per_axis)) / per_axis
            w = (perm + rng.random(per_axis)) / per_axis
            for s, t in zip(u, w):
                x, y = Point(a, (float(s),)), Point(b, (float(t),))
                if x != y:
                    fam.add(instance.family.path_for(x, y))
    return fam


def make_barbell(n: int, flavor: str) -> BarbellInstance:
    if flavor not in FLAVORS:
        raise ValueError(f"unknown barbell flavor {flavor!r}; choose from {FLAVORS}")
    return {"discrete": barbell_discrete, "continuous": barbell_continuous,
            "split": barbell_split}[flavor](n)
