"""Uniform meshes on disjoint unions of unit cubes and kernel discretization.

The state space is ``X = [0,1]^{k_1} ⊔ ... ⊔ [0,1]^{k_I}``.  A mesh with
``per_axis = m`` cuts every component into axis-aligned cells of side
``1/m``; each cell is represented by its lower-left corner (its anchor).
Cells are half-open, closed on the top face of the space, so every point
belongs to exactly one cell.

Given a transition density ``f(x, y)`` and a stationary density ``k(x)``
(both with respect to Lebesgue measure on each component) this module
builds

* ``G``: ``G[i, j] = ∫_{B(j)} f(anchor_i, y) dy``,
* ``Pi``: ``Pi[i] = ∫_{B(i)} k``,
* ``H``: the cell-averaged kernel that is exactly reversible for its
  stationary vector,

all by a deterministic tensor-product midpoint rule.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Optional, Sequence

import numpy as np

from .chain_core import FiniteChain, make_chain, total_variation

log = logging.getLogger(__name__)

DEFAULT_QUAD_ORDER = 3
ZERO_MASS = 1e-14
RENORM_TOL = 1e-3


class Point(NamedTuple):
    """A point of the product space: component index plus coordinates."""

    component: int
    coords: tuple

    @classmethod
    def of(cls, component: int, *coords: float) -> "Point":
        return cls(int(component), tuple(float(c) for c in coords))


@dataclass(frozen=True)
class ProductSpace:
    """Disjoint union of unit hypercubes ``[0,1]^{k_i}``."""

    components: tuple

    def __post_init__(self):
        comps = tuple(int(k) for k in self.components)
        if not comps:
            raise ValueError("product space needs at least one component")
        if min(comps) < 1:
            raise ValueError(f"component dimensions must be >= 1, got {comps}")
        object.__setattr__(self, "components", comps)

    @property
    def n_components(self) -> int:
        return len(self.components)

    @property
    def far_distance(self) -> float:
        """Distance between points of different components."""
        return 1.0 + max(math.sqrt(k) for k in self.components)

    def contains(self, x: Point) -> bool:
        if not 0 <= x.component < self.n_components:
            return False
        c = x.coords
        return len(c) == self.components[x.component] and all(0.0 <= t <= 1.0 for t in c)

    def distance(self, x: Point, y: Point) -> float:
        if x.component != y.component:
            return self.far_distance
        return math.dist(x.coords, y.coords)

    def sample(self, rng: np.random.Generator, size: int) -> list[Point]:
        """Points drawn component-uniformly, then uniformly in the cube."""
        comps = rng.integers(0, self.n_components, size=size)
        out = []
        for c in comps:
            k = self.components[c]
            out.append(Point(int(c), tuple(rng.random(k).tolist())))
        return out


# absorbs rounding in k/m * m so anchors land in their own cell
_SNAP = 1e-9


@dataclass(frozen=True)
class MeshPartition:
    """Uniform mesh of side ``1/per_axis`` on a :class:`ProductSpace`.

    Cells are numbered component by component, and within a component in
    C order of the multi-index.
    """

    space: ProductSpace
    per_axis: int
    offsets: tuple = field(init=False, repr=False)

    def __post_init__(self):
        if int(self.per_axis) < 1:
            raise ValueError(f"per_axis must be >= 1, got {self.per_axis}")
        object.__setattr__(self, "per_axis", int(self.per_axis))
        counts = [self.per_axis ** k for k in self.space.components]
        object.__setattr__(self, "offsets", tuple(np.concatenate([[0], np.cumsum(counts)]).tolist()))

    @property
    def delta(self) -> float:
        return 1.0 / self.per_axis

    @property
    def n_cells(self) -> int:
        return self.offsets[-1]

    def cells_in(self, component: int) -> range:
        return range(self.offsets[component], self.offsets[component + 1])

    def cell_volume(self, component: int) -> float:
        return self.delta ** self.space.components[component]

    def cell_diameter(self, component: int) -> float:
        return self.delta * math.sqrt(self.space.components[component])

    def component_of(self, cell: int) -> int:
        if not 0 <= cell < self.n_cells:
            raise IndexError(f"cell {cell} out of range")
        return int(np.searchsorted(self.offsets, cell, side="right") - 1)

    def multi_index(self, cell: int) -> tuple:
        c = self.component_of(cell)
        shape = (self.per_axis,) * self.space.components[c]
        return tuple(int(i) for i in np.unravel_index(cell - self.offsets[c], shape))

    def anchor(self, cell: int) -> Point:
        c = self.component_of(cell)
        return Point(c, tuple(i * self.delta for i in self.multi_index(cell)))

    def anchors(self, component: int) -> np.ndarray:
        """Anchor coordinates of every cell of ``component``, shape (m^k, k)."""
        k = self.space.components[component]
        grids = np.meshgrid(*[np.arange(self.per_axis) * self.delta] * k, indexing="ij")
        return np.stack([g.ravel() for g in grids], axis=1)

    def nodes(self, component: int, order: int) -> np.ndarray:
        """Midpoint-rule nodes, shape (n_cells_in_component, order^k, k)."""
        k = self.space.components[component]
        base = self.anchors(component)
        t = (np.arange(order) + 0.5) / order * self.delta
        sub = np.stack([g.ravel() for g in np.meshgrid(*[t] * k, indexing="ij")], axis=1)
        return base[:, None, :] + sub[None, :, :]

    def cell_of(self, x: Point) -> int:
        if not self.space.contains(x):
            raise ValueError(f"point {x} is outside the space")
        m = self.per_axis
        idx = tuple(min(int(math.floor(t * m + _SNAP)), m - 1) for t in x.coords)
        shape = (m,) * len(idx)
        return self.offsets[x.component] + int(np.ravel_multi_index(idx, shape))

    def cells_of(self, component: int, coords: np.ndarray) -> np.ndarray:
        """Vectorized :meth:`cell_of` for points of one component."""
        m = self.per_axis
        idx = np.minimum(np.floor(np.asarray(coords) * m + _SNAP).astype(int), m - 1)
        shape = (m,) * idx.shape[1]
        return self.offsets[component] + np.ravel_multi_index(tuple(idx.T), shape)

    def distance(self, i: int, j: int) -> float:
        """Space distance between the anchors of two cells."""
        return self.space.distance(self.anchor(i), self.anchor(j))

    def labels(self) -> list:
        return [{"component": self.component_of(c), "index": list(self.multi_index(c)),
                 "anchor": list(self.anchor(c).coords)} for c in range(self.n_cells)]


def build_partition(space: ProductSpace, per_axis: int) -> MeshPartition:
    return MeshPartition(space, per_axis)


def _true(cx, x, cy, y):
    return np.ones(len(x), dtype=bool)


@dataclass(frozen=True)
class DensityKernel:
    """Transition and stationary densities with respect to Lebesgue measure.

    ``transition_density(cx, x, cy, y)`` receives component indices and
    coordinate arrays of shapes ``(N, k_cx)`` and ``(N, k_cy)`` and returns the
    ``N`` density values ``f(x, y)``.  ``stationary_density(c, x)`` likewise
    returns ``k(x)`` for ``x`` of shape ``(N, k_c)``.
    """

    space: ProductSpace
    transition_density: Callable
    stationary_density: Callable
    continuity_region: Callable = _true
    reversible: bool = False
    name: str = "kernel"
    piecewise_constant: bool = False
    # per-component tables, set only for kernels constant on component pairs
    component_transition: Optional[np.ndarray] = field(default=None, repr=False, compare=False)
    component_stationary: Optional[np.ndarray] = field(default=None, repr=False, compare=False)

    def f(self, x: Point, y: Point) -> float:
        return float(self.transition_density(x.component, np.array([x.coords]),
                                              y.component, np.array([y.coords]))[0])

    def k(self, x: Point) -> float:
        return float(self.stationary_density(x.component, np.array([x.coords]))[0])

    def flow_density(self, x: Point, y: Point) -> float:
        """Q(x, y) = k(x) f(x, y)."""
        return self.k(x) * self.f(x, y)


def _pairs(x: np.ndarray, y: np.ndarray):
    """All (x_a, y_b) combinations flattened, x-major."""
    na, nb = len(x), len(y)
    return np.repeat(x, nb, axis=0), np.tile(y, (na, 1))


def check_kernel(kernel: DensityKernel, rng: np.random.Generator, n_points: int = 16,
                 quadrature_order: int = 8, tol: float = 1e-3) -> dict:
    """Probe the kernel contracts at random points.

    Returns the worst deviation of ``∫ f(x, ·) dλ`` from 1 and, for kernels
    flagged reversible, the worst relative detailed-balance residual.
    """
    space = kernel.space
    part = MeshPartition(space, 1)
    pts = space.sample(rng, n_points)
    mass_err = 0.0
    for x in pts:
        total = 0.0
        for cy in range(space.n_components):
            ny = part.nodes(cy, quadrature_order).reshape(-1, space.components[cy])
            xx = np.repeat(np.array([x.coords]), len(ny), axis=0)
            total += kernel.transition_density(x.component, xx, cy, ny).mean()
        mass_err = max(mass_err, abs(total - 1.0))
    db_err = 0.0
    if kernel.reversible:
        ys = space.sample(rng, n_points)
        for x, y in zip(pts, ys):
            a, b = kernel.flow_density(x, y), kernel.flow_density(y, x)
            scale = max(abs(a), abs(b), 1e-300)
            db_err = max(db_err, abs(a - b) / scale)
    return {"mass_error": mass_err, "detailed_balance_error": db_err,
            "ok": mass_err <= tol and db_err <= tol}


@dataclass(frozen=True)
class DiscretizedChain:
    """A mesh chain together with its provenance."""

    base: FiniteChain
    partition: MeshPartition
    quadrature_order: int
    which: str
    renormalization: np.ndarray = field(repr=False, default=None)

    @property
    def kernel(self):
        return self.base.kernel

    @property
    def stationary(self) -> np.ndarray:
        return self.base.stationary


class QuadratureError(ValueError):
    pass


def _check_factors(factors: np.ndarray, what: str) -> None:
    zero = np.flatnonzero(~(factors > 0))
    if zero.size:
        raise QuadratureError(f"{what}: row {int(zero[0])} has zero mass after quadrature "
                              "(kernel mass escaped the space)")
    dev = np.abs(factors - 1.0)
    if dev.max() > RENORM_TOL:
        worst = int(dev.argmax())
        raise QuadratureError(f"{what}: renormalization factor {factors[worst]:.6g} at row {worst} "
                              f"deviates from 1 by more than {RENORM_TOL}")
    log.debug("%s: max renormalization deviation %.3e", what, dev.max())


def _raw_kernel(kernel: DensityKernel, partition: MeshPartition, order: int) -> np.ndarray:
    space = kernel.space
    n = partition.n_cells
    G = np.zeros((n, n))
    for cx in range(space.n_components):
        ax = partition.anchors(cx)
        rows = partition.cells_in(cx)
        for cy in range(space.n_components):
            ny = partition.nodes(cy, order)  # (cells, q, k)
            ncell, q, k = ny.shape
            xx, yy = _pairs(ax, ny.reshape(-1, k))
            vals = kernel.transition_density(cx, xx, cy, yy).reshape(len(ax), ncell, q)
            G[rows.start:rows.stop, partition.cells_in(cy).start:partition.cells_in(cy).stop] = (
                vals.mean(axis=2) * partition.cell_volume(cy))
    return G


def discretize_kernel(kernel: DensityKernel, partition: MeshPartition,
                      quadrature_order: int = DEFAULT_QUAD_ORDER) -> DiscretizedChain:
    """Mesh kernel ``G`` with rows started at the cell anchors.

    The stationary vector attached is the quadrature of the stationary
    density; ``G`` itself need not leave it invariant.
    """
    if kernel.space != partition.space:
        raise ValueError("kernel and partition live on different spaces")
    G = _raw_kernel(kernel, partition, quadrature_order)
    factors = G.sum(axis=1)
    _check_factors(factors, "discretize_kernel")
    G /= factors[:, None]
    pi = discretize_measure(kernel, partition, quadrature_order)
    chain = make_chain(G, pi, labels=partition.labels())
    return DiscretizedChain(chain, partition, quadrature_order, "G", factors)


def discretize_measure(kernel: DensityKernel, partition: MeshPartition,
                       quadrature_order: int = DEFAULT_QUAD_ORDER, *,
                       return_factor: bool = False):
    """Cell masses of the stationary density, renormalized to sum to one."""
    parts = []
    for c in range(kernel.space.n_components):
        nodes = partition.nodes(c, quadrature_order)
        ncell, q, k = nodes.shape
        vals = kernel.stationary_density(c, nodes.reshape(-1, k)).reshape(ncell, q)
        parts.append(vals.mean(axis=1) * partition.cell_volume(c))
    pi = np.concatenate(parts)
    total = pi.sum()
    _check_factors(np.array([total]), "discretize_measure")
    pi = pi / total
    return (pi, total) if return_factor else pi


def _raw_flow(kernel: DensityKernel, partition: MeshPartition, order: int) -> np.ndarray:
    """Quadrature of k(x) f(x, y) over every cell pair."""
    space = kernel.space
    n = partition.n_cells
    N = np.zeros((n, n))
    for cx in range(space.n_components):
        nx = partition.nodes(cx, order)
        ncx, qx, kx = nx.shape
        flat_x = nx.reshape(-1, kx)
        kvals = kernel.stationary_density(cx, flat_x)
        rx = partition.cells_in(cx)
        for cy in range(space.n_components):
            ny = partition.nodes(cy, order)
            ncy, qy, ky = ny.shape
            xx, yy = _pairs(flat_x, ny.reshape(-1, ky))
            vals = kernel.transition_density(cx, xx, cy, yy).reshape(ncx * qx, ncy * qy)
            vals *= kvals[:, None]
            block = vals.reshape(ncx, qx, ncy, qy).mean(axis=(1, 3))
            ry = partition.cells_in(cy)
            N[rx.start:rx.stop, ry.start:ry.stop] = (
                block * partition.cell_volume(cx) * partition.cell_volume(cy))
    return N


def reversibilize(kernel: DensityKernel, partition: MeshPartition, G: DiscretizedChain,
                  Pi: Optional[np.ndarray] = None,
                  quadrature_order: Optional[int] = None) -> DiscretizedChain:
    """Cell-averaged kernel ``H``, reversible with respect to its stationary vector.

    ``H[i, j]`` is the ``k``-weighted average over ``x ∈ B(i)`` of the mass
    ``f(x, ·)`` puts on ``B(j)``.  The flow matrix is symmetrized (the exact
    integral is symmetric for a reversible kernel) and the stationary vector
    is taken as its row sums, so detailed balance and stationarity hold to
    rounding.  Rows whose cell mass in ``Pi`` is below ``ZERO_MASS`` copy
    the corresponding row of ``G``.
    """
    if not kernel.reversible:
        raise ValueError(f"kernel {kernel.name!r} is not flagged reversible")
    order = G.quadrature_order if quadrature_order is None else quadrature_order
    if Pi is None:
        Pi = G.stationary
    Pi = np.asarray(Pi, dtype=float)
    N = _raw_flow(kernel, partition, order)
    zero = Pi < ZERO_MASS
    N[zero, :] = 0.0
    N[:, zero] = 0.0
    N = 0.5 * (N + N.T)
    total = N.sum()
    if not total > 0:
        raise QuadratureError("reversibilize: flow quadrature has zero total mass")
    N /= total
    mass = N.sum(axis=1)
    live = ~zero
    factors = np.ones_like(Pi)
    factors[live] = mass[live] / Pi[live]
    _check_factors(factors, "reversibilize")
    H = np.zeros_like(N)
    H[live] = N[live] / mass[live, None]
    if zero.any():
        H[zero] = G.base.dense()[zero]
        mass[zero] = 0.0
    chain = make_chain(H, mass, labels=partition.labels(), reversible=True)
    return DiscretizedChain(chain, partition, order, "H", factors)


@dataclass(frozen=True)
class StepFunction:
    """Function constant on each mesh cell."""

    partition: MeshPartition
    values: np.ndarray

    def __call__(self, x: Point) -> float:
        return float(self.values[self.partition.cell_of(x)])

    def evaluate(self, points: Sequence[Point]) -> np.ndarray:
        return np.array([self(p) for p in points])


class DominationError(ValueError):
    pass


def histogram_density(target_mass, reference_mass, partition: MeshPartition,
                      tol: float = 1e-12) -> StepFunction:
    """Per-cell mass ratio of two measures, a step-function density."""
    P = np.asarray(target_mass, dtype=float)
    Q = np.asarray(reference_mass, dtype=float)
    if P.shape != (partition.n_cells,) or Q.shape != P.shape:
        raise ValueError("mass vectors must have one entry per cell")
    bad = np.flatnonzero((Q <= 0) & (P > 0))
    if bad.size:
        c = int(bad[0])
        raise DominationError(f"cell {c} (anchor {partition.anchor(c)}) has target mass "
                              f"{P[c]:g} but zero reference mass")
    phi = np.divide(P, Q, out=np.zeros_like(P), where=Q > 0)
    integral = float(phi @ Q)
    if abs(integral - 1.0) > tol:
        raise ValueError(f"histogram density integrates to {integral!r}, not 1; "
                         "are both mass vectors normalized?")
    return StepFunction(partition, phi)


def uniform_mass(partition: MeshPartition) -> np.ndarray:
    """Normalized Lebesgue cell masses."""
    vols = np.concatenate([np.full(len(partition.cells_in(c)), partition.cell_volume(c))
                           for c in range(partition.space.n_components)])
    return vols / vols.sum()


def reference_dirichlet(kernel: DensityKernel, f: Callable, quadrature_order: int = 200) -> float:
    r"""Midpoint quadrature of :math:`\frac12\iint (f(x)-f(y))^2 f(x,y) k(x)\,dy\,dx`.

    ``f`` maps a component index and an ``(N, k)`` coordinate array to ``N``
    values.  ``quadrature_order`` is the number of nodes per axis on each
    unit cube.
    """
    space = kernel.space
    part = MeshPartition(space, quadrature_order)
    total = 0.0
    for cx in range(space.n_components):
        x = part.nodes(cx, 1).reshape(-1, space.components[cx])
        wx = kernel.stationary_density(cx, x) * part.cell_volume(cx)
        fx = np.asarray(f(cx, x), dtype=float)
        for cy in range(space.n_components):
            y = part.nodes(cy, 1).reshape(-1, space.components[cy])
            fy = np.asarray(f(cy, y), dtype=float)
            xx, yy = _pairs(x, y)
            dens = kernel.transition_density(cx, xx, cy, yy).reshape(len(x), len(y))
            diff2 = (fx[:, None] - fy[None, :]) ** 2
            total += float(wx @ (diff2 * dens).sum(axis=1)) * part.cell_volume(cy)
    return 0.5 * total


def field_on_anchors(f: Callable, partition: MeshPartition) -> np.ndarray:
    """Evaluate a field evaluator at every cell anchor."""
    return np.concatenate([np.asarray(f(c, partition.anchors(c)), dtype=float)
                           for c in range(partition.space.n_components)])


def max_row_tv(A: DiscretizedChain, B: DiscretizedChain) -> float:
    a, b = A.base.dense(), B.base.dense()
    return max(total_variation(a[i], b[i]) for i in range(a.shape[0]))
