"""Mesh-refinement studies: measured errors as the mesh gets finer.

Every study returns a :class:`StudyTable` with one row per mesh, sorted by
cell side descending.  Rows are independent and may be evaluated on a thread
pool whose size is read from ``HYPERFORM_THREADS`` (default 1); assembly
order is fixed, so output does not depend on scheduling.
"""
from __future__ import annotations

import csv
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional, Sequence, TextIO

import numpy as np

from .chain_core import dirichlet_form, total_variation
from .grid import (DEFAULT_QUAD_ORDER, DensityKernel, MeshPartition, Point, build_partition,
                   discretize_kernel, discretize_measure, field_on_anchors, histogram_density,
                   max_row_tv, reference_dirichlet, reversibilize, uniform_mass)

CSV_HEADER = ("per_axis", "delta", "value", "reference", "abs_error")
FieldFn = Callable[[int, np.ndarray], np.ndarray]


@dataclass(frozen=True)
class StudyRow:
    per_axis: int
    delta: float
    value: float
    reference: float

    @property
    def abs_error(self) -> float:
        return abs(self.value - self.reference)


@dataclass
class StudyTable:
    rows: list
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.rows = sorted(self.rows, key=lambda r: -r.delta)

    @property
    def errors(self) -> np.ndarray:
        return np.array([r.abs_error for r in self.rows])

    @property
    def values(self) -> np.ndarray:
        return np.array([r.value for r in self.rows])

    def to_csv(self, out: TextIO) -> None:
        w = csv.writer(out, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for r in self.rows:
            w.writerow([r.per_axis, repr(r.delta), repr(r.value), repr(r.reference), repr(r.abs_error)])


def nonincreasing(values: Sequence[float], slack: float = 0.1, max_inversions: int = 1) -> bool:
    """True if ``values`` never rise, except up to ``max_inversions`` rises of at most ``slack`` relative."""
    inversions = 0
    for a, b in zip(values[:-1], values[1:]):
        if b > a:
            inversions += 1
            if inversions > max_inversions or b > a * (1 + slack):
                return False
    return True


def strictly_decreasing(values: Sequence[float]) -> bool:
    return all(b < a for a, b in zip(values[:-1], values[1:]))


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("HYPERFORM_THREADS", "1")))
    except ValueError:
        return 1


def _map_rows(fn: Callable[[int], StudyRow], per_axis: Iterable[int]) -> list:
    per_axis = [int(m) for m in per_axis]
    if any(m < 1 for m in per_axis):
        raise ValueError("per_axis values must be positive")
    workers = _threads()
    if workers == 1:
        return [fn(m) for m in per_axis]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, per_axis))


def _meta(kernel: DensityKernel, quadrature_order: int, **extra) -> dict:
    return {"kernel": kernel.name, "quadrature_order": quadrature_order, **extra}


def mesh_dirichlet(kernel: DensityKernel, f: FieldFn, per_axis: int,
                   quadrature_order: int = DEFAULT_QUAD_ORDER) -> float:
    """Mesh analogue of the Dirichlet form with ``H`` and ``F = f(anchor)``."""
    part = build_partition(kernel.space, per_axis)
    G = discretize_kernel(kernel, part, quadrature_order)
    H = reversibilize(kernel, part, G)
    return dirichlet_form(H.base, field_on_anchors(f, part))


def dirichlet_convergence_study(kernel: DensityKernel, f: FieldFn, per_axis: Iterable[int], *,
                                quadrature_order: int = DEFAULT_QUAD_ORDER,
                                reference: Optional[float] = None, field_id: str = "f") -> StudyTable:
    """Compare mesh Dirichlet forms against a reference value.

    Without ``reference``, the continuum form is integrated with twice the
    finest study resolution (``2 * max(per_axis) * quadrature_order`` nodes
    per axis).
    """
    per_axis = list(per_axis)
    if reference is None:
        reference = reference_dirichlet(kernel, f, 2 * max(per_axis) * quadrature_order)

    def row(m: int) -> StudyRow:
        return StudyRow(m, 1.0 / m, mesh_dirichlet(kernel, f, m, quadrature_order), reference)

    return StudyTable(_map_rows(row, per_axis), _meta(kernel, quadrature_order, field=field_id))


def reversibilization_drift_study(kernel: DensityKernel, per_axis: Iterable[int], *,
                                  quadrature_order: int = DEFAULT_QUAD_ORDER) -> StudyTable:
    """Largest row total variation between ``G`` and ``H`` per mesh."""

    def row(m: int) -> StudyRow:
        part = build_partition(kernel.space, m)
        G = discretize_kernel(kernel, part, quadrature_order)
        H = reversibilize(kernel, part, G)
        return StudyRow(m, 1.0 / m, max_row_tv(G, H), 0.0)

    return StudyTable(_map_rows(row, per_axis), _meta(kernel, quadrature_order, field="max_row_tv"))


def density_convergence_study(target: DensityKernel, per_axis: Iterable[int], probes: Sequence[Point],
                              reference: Optional[DensityKernel] = None, *,
                              quadrature_order: int = DEFAULT_QUAD_ORDER,
                              true_density: Optional[Callable[[Point], float]] = None) -> StudyTable:
    """Histogram density of ``target``'s stationary law against a reference measure.

    The reference is normalized Lebesgue measure when ``reference`` is None,
    else ``reference``'s stationary law.  The value per mesh is the largest
    probe-point error of the step density.
    """
    space = target.space
    volume = float(space.n_components)  # every component is a unit cube
    if true_density is None:
        if reference is None:
            true_density = lambda p: target.k(p) * volume  # noqa: E731
        else:
            true_density = lambda p: target.k(p) / reference.k(p)  # noqa: E731
    truth = np.array([true_density(p) for p in probes])

    def row(m: int) -> StudyRow:
        part = build_partition(space, m)
        P = discretize_measure(target, part, quadrature_order)
        Q = uniform_mass(part) if reference is None else discretize_measure(reference, part, quadrature_order)
        phi = histogram_density(P, Q, part)
        return StudyRow(m, 1.0 / m, float(np.max(np.abs(phi.evaluate(probes) - truth))), 0.0)

    meta = _meta(target, quadrature_order, field="histogram_density",
                 reference="lebesgue" if reference is None else reference.name, n_probes=len(probes))
    return StudyTable(_map_rows(row, per_axis), meta)


def transition_density_study(kernel: DensityKernel, per_axis: Iterable[int], *, which: str = "H",
                             quadrature_order: int = DEFAULT_QUAD_ORDER) -> StudyTable:
    """Largest gap between ``M_ij / λ(B_j)`` and ``f(anchor_i, anchor_j)`` over cell pairs.

    ``which`` selects the mesh kernel ``M``: ``"G"`` or ``"H"``.  Pairs whose
    anchors fall outside the kernel's continuity region are skipped.
    """
    if which not in ("G", "H"):
        raise ValueError("which must be 'G' or 'H'")
    space = kernel.space

    def row(m: int) -> StudyRow:
        part = build_partition(space, m)
        G = discretize_kernel(kernel, part, quadrature_order)
        M = (reversibilize(kernel, part, G) if which == "H" else G).base.dense()
        worst = 0.0
        for cx in range(space.n_components):
            ax = part.anchors(cx)
            rx = part.cells_in(cx)
            for cy in range(space.n_components):
                ay = part.anchors(cy)
                ry = part.cells_in(cy)
                xx = np.repeat(ax, len(ay), axis=0)
                yy = np.tile(ay, (len(ax), 1))
                f = kernel.transition_density(cx, xx, cy, yy).reshape(len(ax), len(ay))
                ok = np.asarray(kernel.continuity_region(cx, xx, cy, yy), dtype=bool).reshape(f.shape)
                est = M[rx.start:rx.stop, ry.start:ry.stop] / part.cell_volume(cy)
                if ok.any():
                    worst = max(worst, float(np.abs(est - f)[ok].max()))
        return StudyRow(m, 1.0 / m, worst, 0.0)

    return StudyTable(_map_rows(row, per_axis), _meta(kernel, quadrature_order, field=f"{which}_density"))


def _row_masses(kernel: DensityKernel, partition: MeshPartition, x: Point, order: int) -> np.ndarray:
    """Cell masses of ``f(x, ·)`` by midpoint quadrature."""
    parts = []
    xa = np.asarray(x.coords, dtype=float)[None, :]
    for cy in range(kernel.space.n_components):
        ny = partition.nodes(cy, order)
        ncell, q, k = ny.shape
        vals = kernel.transition_density(x.component, np.repeat(xa, ncell * q, axis=0),
                                         cy, ny.reshape(-1, k)).reshape(ncell, q)
        parts.append(vals.mean(axis=1) * partition.cell_volume(cy))
    return np.concatenate(parts)


def strong_feller_probe(kernel: DensityKernel, partition: MeshPartition, n_pairs: int = 64,
                        seed: int = 0, quadrature_order: int = DEFAULT_QUAD_ORDER) -> float:
    """Largest TV distance between the mesh rows started at ``x`` and at its anchor.

    Points ``x`` are drawn uniformly with the given seed.  Small values are
    consistent with a mesh-scale strong Feller property; they prove nothing.
    """
    rng = np.random.default_rng(seed)
    worst = 0.0
    for x in kernel.space.sample(rng, n_pairs):
        anchor = partition.anchor(partition.cell_of(x))
        a = _row_masses(kernel, partition, x, quadrature_order)
        b = _row_masses(kernel, partition, anchor, quadrature_order)
        worst = max(worst, total_variation(a, b))
    return worst


def strong_feller_study(kernel: DensityKernel, per_axis: Iterable[int], *, n_pairs: int = 64,
                        seed: int = 0, quadrature_order: int = DEFAULT_QUAD_ORDER) -> StudyTable:
    def row(m: int) -> StudyRow:
        part = build_partition(kernel.space, m)
        return StudyRow(m, 1.0 / m, strong_feller_probe(kernel, part, n_pairs, seed, quadrature_order), 0.0)

    return StudyTable(_map_rows(row, per_axis),
                      _meta(kernel, quadrature_order, field="strong_feller", seed=seed, n_pairs=n_pairs))
