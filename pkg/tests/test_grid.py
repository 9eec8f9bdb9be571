import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hyperform.chain_core import validate_chain
from hyperform.grid import (DensityKernel, DominationError, MeshPartition, Point, ProductSpace,
                            QuadratureError, build_partition, check_kernel, discretize_kernel,
                            discretize_measure, field_on_anchors, histogram_density, max_row_tv,
                            reference_dirichlet, reversibilize, uniform_mass)
from hyperform.kernels import (affine_xy_kernel, iid_kernel, piecewise_constant_kernel,
                               step_density_kernel, uniform_kernel)

MIXED = ProductSpace((1, 2))


def test_space_metric():
    s = MIXED
    assert s.far_distance == pytest.approx(1 + math.sqrt(2))
    assert s.distance(Point.of(1, 0, 0), Point.of(1, 1, 1)) == pytest.approx(math.sqrt(2))
    assert s.distance(Point.of(0, 0.5), Point.of(1, 0.5, 0.5)) == s.far_distance
    # every cross-component distance beats every within-component diameter
    assert s.far_distance > max(math.sqrt(k) for k in s.components)


def test_space_validation():
    with pytest.raises(ValueError):
        ProductSpace(())
    with pytest.raises(ValueError):
        ProductSpace((0,))
    assert not MIXED.contains(Point.of(0, 1.5))
    assert not MIXED.contains(Point.of(2, 0.5))
    assert not MIXED.contains(Point.of(1, 0.5))


def test_partition_layout():
    part = MeshPartition(MIXED, 4)
    assert part.n_cells == 4 + 16
    assert part.cells_in(1) == range(4, 20)
    assert part.cell_volume(1) == pytest.approx(1 / 16)
    assert part.cell_diameter(1) == pytest.approx(math.sqrt(2) / 4)
    assert part.anchor(5) == Point.of(1, 0.0, 0.25)
    assert part.anchors(1).shape == (16, 2)
    assert part.nodes(1, 3).shape == (16, 9, 2)
    with pytest.raises(ValueError):
        MeshPartition(MIXED, 0)
    with pytest.raises(IndexError):
        part.component_of(20)


def test_half_open_cells_with_closed_top_face():
    part = MeshPartition(ProductSpace((1,)), 4)
    assert part.cell_of(Point.of(0, 0.25)) == 1
    assert part.cell_of(Point.of(0, 0.2499)) == 0
    assert part.cell_of(Point.of(0, 1.0)) == 3
    with pytest.raises(ValueError):
        part.cell_of(Point.of(0, 1.01))


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 9), st.integers(0, 1), st.floats(0, 1), st.floats(0, 1))
def test_cell_of_contains_point(m, comp, a, b):
    part = MeshPartition(MIXED, m)
    x = Point.of(0, a) if comp == 0 else Point.of(1, a, b)
    i = part.cell_of(x)
    anc = part.anchor(i)
    assert anc.component == x.component
    for t, lo in zip(x.coords, anc.coords):
        assert lo <= t <= lo + part.delta + 1e-12
    assert part.cell_of(anc) == i
    assert part.cells_of(x.component, np.array([x.coords]))[0] == i


def test_kernel_contracts():
    rng = np.random.default_rng(0)
    assert check_kernel(affine_xy_kernel(), rng)["ok"]
    assert check_kernel(uniform_kernel(MIXED), rng)["ok"]
    leaky = DensityKernel(ProductSpace((1,)), lambda cx, x, cy, y: np.full(len(x), 0.5),
                          lambda c, x: np.ones(len(x)))
    assert not check_kernel(leaky, rng)["ok"]


# values below are integrals of linear / bilinear densities, which the midpoint rule gets exactly

def test_affine_measure_and_kernel_exact():
    k = affine_xy_kernel()
    part = build_partition(k.space, 2)
    assert discretize_measure(k, part) == pytest.approx([0.45, 0.55], abs=1e-14)
    G = discretize_kernel(k, part)
    assert G.base.dense() == pytest.approx(np.array([[0.5, 0.5], [0.45, 0.55]]), abs=1e-14)
    assert G.renormalization == pytest.approx([1.0, 1.0], abs=1e-14)


def test_affine_reversibilized_kernel_exact():
    k = affine_xy_kernel()
    part = build_partition(k.space, 2)
    H = reversibilize(k, part, discretize_kernel(k, part))
    # flow density 0.8(1 + xy) integrated over quarter-cells
    N = np.array([[0.2125, 0.2375], [0.2375, 0.3125]])
    assert H.stationary == pytest.approx(N.sum(axis=1), abs=1e-14)
    assert H.base.dense() == pytest.approx(N / N.sum(axis=1)[:, None], abs=1e-14)


@pytest.mark.parametrize("m", [3, 8, 17])
def test_reversibilized_invariants(m):
    k = affine_xy_kernel()
    part = build_partition(k.space, m)
    H = reversibilize(k, part, discretize_kernel(k, part))
    assert H.base.reversible
    assert validate_chain(H.base).ok
    pi, P = H.stationary, H.base.dense()
    assert np.abs(pi[:, None] * P - (pi[:, None] * P).T).max() <= 1e-12
    assert np.abs(pi @ P - pi).max() <= 1e-12


def test_piecewise_constant_kernel_gives_h_equal_g():
    k = piecewise_constant_kernel(ProductSpace((1, 1)), [[0.25, 0.75], [0.75, 0.25]], [0.5, 0.5], "pc")
    part = build_partition(k.space, 4)
    G = discretize_kernel(k, part)
    H = reversibilize(k, part, G)
    assert max_row_tv(G, H) == pytest.approx(0.0, abs=1e-14)


def test_zero_mass_rows_copy_g():
    k = step_density_kernel(0.25)
    part = build_partition(k.space, 4)
    G = discretize_kernel(k, part)
    H = reversibilize(k, part, G)
    assert G.stationary[0] == 0.0
    assert (H.base.dense()[0] == G.base.dense()[0]).all()
    assert H.stationary[0] == 0.0
    assert validate_chain(H.base).ok


def test_non_reversible_kernel_rejected():
    k = DensityKernel(ProductSpace((1,)), lambda cx, x, cy, y: np.ones(len(x)),
                      lambda c, x: np.ones(len(x)), reversible=False)
    part = build_partition(k.space, 2)
    with pytest.raises(ValueError):
        reversibilize(k, part, discretize_kernel(k, part))


def test_escaping_mass_is_an_error():
    k = DensityKernel(ProductSpace((1,)), lambda cx, x, cy, y: np.full(len(x), 0.5),
                      lambda c, x: np.ones(len(x)), reversible=True)
    with pytest.raises(QuadratureError, match="renormalization"):
        discretize_kernel(k, build_partition(k.space, 2))
    dead = DensityKernel(ProductSpace((1,)), lambda cx, x, cy, y: np.where(x[:, 0] < 0.5, 0.0, 1.0),
                         lambda c, x: np.ones(len(x)))
    with pytest.raises(QuadratureError, match="row 0"):
        discretize_kernel(dead, build_partition(dead.space, 2))


def test_uniform_kernel_on_mixed_space():
    k = uniform_kernel(MIXED)
    part = build_partition(MIXED, 3)
    G = discretize_kernel(k, part)
    assert validate_chain(G.base).ok
    assert G.stationary[:3].sum() == pytest.approx(0.5)


def test_histogram_density_exact_and_normalized():
    k = affine_xy_kernel()
    part = build_partition(k.space, 2)
    phi = histogram_density(discretize_measure(k, part), uniform_mass(part), part)
    assert phi.values == pytest.approx([0.9, 1.1])
    assert phi(Point.of(0, 0.7)) == pytest.approx(1.1)


def test_histogram_domination_failure():
    part = build_partition(ProductSpace((1,)), 2)
    with pytest.raises(DominationError, match="cell 1"):
        histogram_density([0.5, 0.5], [1.0, 0.0], part)
    with pytest.raises(ValueError):
        histogram_density([0.2, 0.2], [0.5, 0.5], part)


def test_reference_dirichlet_uniform():
    k = uniform_kernel()
    # Var of a uniform draw: 1/12 for x, 4/45 for x^2
    assert reference_dirichlet(k, lambda c, x: x[:, 0], 400) == pytest.approx(1 / 12, abs=1e-5)
    assert reference_dirichlet(k, lambda c, x: x[:, 0] ** 2, 400) == pytest.approx(4 / 45, abs=1e-5)


def test_iid_kernel_is_reversible_for_its_law():
    k = iid_kernel(ProductSpace((1,)), lambda c, x: (4 + 2 * x[:, 0]) / 5)
    assert check_kernel(k, np.random.default_rng(1))["detailed_balance_error"] < 1e-14


def test_field_on_anchors():
    part = build_partition(MIXED, 2)
    vals = field_on_anchors(lambda c, x: x.sum(axis=1) + c, part)
    assert vals.tolist() == [0.0, 0.5, 1.0, 1.5, 1.5, 2.0]
