"""Built-in density kernels."""
from __future__ import annotations

import numpy as np

from .grid import DensityKernel, ProductSpace

UNIT_INTERVAL = ProductSpace((1,))


def uniform_kernel(space: ProductSpace = UNIT_INTERVAL) -> DensityKernel:
    """i.i.d. draws from normalized Lebesgue measure."""
    total = float(space.n_components)

    def f(cx, x, cy, y):
        return np.full(len(x), 1.0 / total)

    def k(c, x):
        return np.full(len(x), 1.0 / total)

    return DensityKernel(space, f, k, reversible=True, name="uniform", piecewise_constant=True)


def affine_xy_kernel() -> DensityKernel:
    """Kernel on [0,1] whose flow density is proportional to 1 + xy.

    Stationary density ``(4 + 2x)/5``, transition density
    ``(1 + xy)/(1 + x/2)``.
    """

    def f(cx, x, cy, y):
        return (1.0 + x[:, 0] * y[:, 0]) / (1.0 + 0.5 * x[:, 0])

    def k(c, x):
        return (4.0 + 2.0 * x[:, 0]) / 5.0

    return DensityKernel(UNIT_INTERVAL, f, k, reversible=True, name="affine-xy")


def iid_kernel(space: ProductSpace, stationary_density, name: str = "iid") -> DensityKernel:
    """Kernel that ignores its start point: ``f(x, y) = k(y)``."""

    def f(cx, x, cy, y):
        return stationary_density(cy, y)

    return DensityKernel(space, f, stationary_density, reversible=True, name=name)


def piecewise_constant_kernel(space: ProductSpace, flow_density: np.ndarray,
                              stationary_density: np.ndarray, name: str,
                              reversible: bool = True) -> DensityKernel:
    """Kernel whose densities are constant on every component (pair).

    ``flow_density[a, b]`` is the transition density from component ``a``
    into component ``b``; ``stationary_density[a]`` is ``k`` on ``a``.
    """
    trans = np.asarray(flow_density, dtype=float)
    stat = np.asarray(stationary_density, dtype=float)

    def f(cx, x, cy, y):
        return np.full(len(x), trans[cx, cy])

    def k(c, x):
        return np.full(len(x), stat[c])

    def region(cx, x, cy, y):
        return np.full(len(x), trans[cx, cy] > 0)

    return DensityKernel(space, f, k, region, reversible, name, piecewise_constant=True,
                         component_transition=trans, component_stationary=stat)


def iid_of(kernel: DensityKernel) -> DensityKernel:
    """The i.i.d. kernel sampling from ``kernel``'s stationary law."""
    name = f"iid({kernel.name})"
    if kernel.component_stationary is not None:
        stat = kernel.component_stationary
        return piecewise_constant_kernel(kernel.space, np.tile(stat, (len(stat), 1)), stat, name)
    return iid_kernel(kernel.space, kernel.stationary_density, name=name)


def step_density_kernel(support_start: float = 0.25) -> DensityKernel:
    """i.i.d. kernel on [0,1] whose stationary density vanishes below ``support_start``."""
    height = 1.0 / (1.0 - support_start)

    def k(c, x):
        return np.where(x[:, 0] >= support_start, height, 0.0)

    return iid_kernel(UNIT_INTERVAL, k, name=f"step({support_start})")
