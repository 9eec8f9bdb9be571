"""Finite reversible Markov chains: validation, edge flows, Dirichlet forms.

A :class:`FiniteChain` stores a sparse row-stochastic kernel together with a
stationary distribution.  Nothing is normalized silently; pass
``normalize=True`` to :func:`make_chain` if the stationary vector is only
known up to a constant.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any, Optional

import numpy as np
import scipy.sparse as sp

ROW_TOL = 1e-12
STAT_TOL = 1e-10


@dataclass(frozen=True)
class FiniteChain:
    """Row-stochastic sparse kernel plus stationary distribution.

    Attributes
    ----------
    kernel : scipy.sparse.csr_array, shape (n, n)
        Transition probabilities; explicit zeros are suppressed.
    stationary : ndarray, shape (n,)
        The distribution pi.
    initial : ndarray or None
        Optional initial distribution.
    labels : list or None
        Optional per-state annotations.
    reversible : bool
        Whether the chain is declared reversible; checked by
        :func:`validate_chain`.
    """

    kernel: sp.csr_array
    stationary: np.ndarray
    initial: Optional[np.ndarray] = None
    labels: Optional[list] = None
    reversible: bool = False

    @property
    def n_states(self) -> int:
        return self.kernel.shape[0]

    def dense(self) -> np.ndarray:
        return self.kernel.toarray()


def _as_distribution(p, name: str, normalize: bool) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    if p.ndim != 1:
        raise ValueError(f"{name} must be a vector, got shape {p.shape}")
    if normalize:
        total = p.sum()
        if not total > 0:
            raise ValueError(f"{name} has non-positive total mass {total}")
        p = p / total
    return p


def make_chain(kernel, stationary, *, initial=None, labels=None,
               reversible: bool = False, normalize: bool = False) -> FiniteChain:
    """Build a :class:`FiniteChain` from a dense or sparse kernel.

    Raises ``ValueError`` on structural problems (non-square kernel, length
    mismatches).  Numeric problems are left to :func:`validate_chain`.
    """
    K = sp.csr_array(kernel, dtype=float)
    K.eliminate_zeros()
    K.sort_indices()
    n, m = K.shape
    if n != m:
        raise ValueError(f"kernel must be square, got {K.shape}")
    pi = _as_distribution(stationary, "stationary", normalize)
    if pi.shape[0] != n:
        raise ValueError(f"stationary has length {pi.shape[0]}, kernel has {n} states")
    v = None
    if initial is not None:
        v = _as_distribution(initial, "initial", normalize)
        if v.shape[0] != n:
            raise ValueError(f"initial has length {v.shape[0]}, kernel has {n} states")
    if labels is not None and len(labels) != n:
        raise ValueError(f"labels has length {len(labels)}, kernel has {n} states")
    pi.setflags(write=False)
    return FiniteChain(K, pi, v, None if labels is None else list(labels), reversible)


@dataclass(frozen=True)
class Violation:
    invariant: str
    residual: float
    detail: str = ""


@dataclass
class ValidationReport:
    violations: list[Violation] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def names(self) -> list[str]:
        return [v.invariant for v in self.violations]

    def __str__(self) -> str:
        if self.ok:
            return "all invariants hold"
        return "\n".join(f"{v.invariant}: residual {v.residual:.3e} {v.detail}".rstrip()
                         for v in self.violations)


def validate_chain(chain: FiniteChain, tol: Optional[float] = None, *,
                   row_tol: float = ROW_TOL, stat_tol: float = STAT_TOL) -> ValidationReport:
    """Check every :class:`FiniteChain` invariant and report residuals.

    ``tol``, when given, overrides both ``row_tol`` and ``stat_tol``.
    Never raises on numeric violations.
    """
    if tol is not None:
        row_tol = stat_tol = tol
    K, pi = chain.kernel, chain.stationary
    if K.shape != (pi.shape[0], pi.shape[0]):
        raise ValueError(f"kernel shape {K.shape} does not match stationary length {pi.shape[0]}")
    report = ValidationReport()

    neg = -min(0.0, K.data.min()) if K.nnz else 0.0
    if neg > 0:
        report.violations.append(Violation("nonnegative_kernel", neg))
    rows = np.asarray(K.sum(axis=1)).ravel()
    row_res = np.abs(rows - 1.0)
    if row_res.size and row_res.max() > row_tol:
        worst = int(row_res.argmax())
        report.violations.append(Violation("row_stochastic", float(row_res.max()), f"(row {worst})"))

    pneg = -min(0.0, pi.min()) if pi.size else 0.0
    if pneg > 0:
        report.violations.append(Violation("nonnegative_stationary", pneg))
    mass_res = abs(pi.sum() - 1.0)
    if mass_res > row_tol:
        report.violations.append(Violation("stationary_mass", float(mass_res)))

    stat_res = np.abs(K.T @ pi - pi)
    if stat_res.size and stat_res.max() > stat_tol:
        report.violations.append(Violation("stationarity", float(stat_res.max())))

    if chain.reversible:
        flow = flow_matrix(chain)
        db = abs(flow - flow.T)
        db_res = float(db.max()) if db.nnz else 0.0
        if db_res > stat_tol:
            report.violations.append(Violation("detailed_balance", db_res))

    if chain.initial is not None:
        v = chain.initial
        res = max(abs(v.sum() - 1.0), -min(0.0, v.min()))
        if res > row_tol:
            report.violations.append(Violation("initial_distribution", float(res)))
    return report


def flow_matrix(chain: FiniteChain) -> sp.csr_array:
    """Sparse matrix of edge flows Q(i, j) = pi_i P_ij."""
    return sp.csr_array(sp.diags_array(chain.stationary) @ chain.kernel)


def edge_flow(chain: FiniteChain, i: int, j: int) -> float:
    n = chain.n_states
    if not (0 <= i < n and 0 <= j < n):
        raise IndexError(f"state ({i}, {j}) out of range for {n} states")
    return float(chain.stationary[i] * chain.kernel[i, j])


def _field(chain: FiniteChain, f) -> np.ndarray:
    f = np.asarray(f, dtype=float)
    if f.shape != (chain.n_states,):
        raise ValueError(f"field has shape {f.shape}, expected ({chain.n_states},)")
    if not np.all(np.isfinite(f)):
        raise ValueError("field has non-finite entries")
    return f


def dirichlet_form(chain: FiniteChain, f) -> float:
    r"""Dirichlet form :math:`\frac12\sum_{i,j}(f_i-f_j)^2 P_{ij}\pi_i`.

    Only stored kernel entries are visited.
    """
    f = _field(chain, f)
    K = chain.kernel.tocoo()
    diff = f[K.row] - f[K.col]
    return 0.5 * float(np.sum(diff * diff * K.data * chain.stationary[K.row]))


def variance(chain: FiniteChain, f) -> float:
    f = _field(chain, f)
    pi = chain.stationary
    mean = float(pi @ f)
    # centered form avoids cancellation for large offsets
    return float(pi @ (f - mean) ** 2)


def total_variation(p, q) -> float:
    """Total variation distance, half the L1 distance."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.shape != q.shape:
        raise ValueError(f"distributions have shapes {p.shape} and {q.shape}")
    return 0.5 * float(np.abs(p - q).sum())


# -- interchange format -------------------------------------------------------

def chain_to_dict(chain: FiniteChain) -> dict[str, Any]:
    K = chain.kernel.tocoo()
    order = np.lexsort((K.col, K.row))
    out: dict[str, Any] = {
        "n": chain.n_states,
        "triplets": [[int(K.row[k]), int(K.col[k]), float(K.data[k])] for k in order],
        "pi": [float(x) for x in chain.stationary],
    }
    if chain.labels is not None:
        out["labels"] = chain.labels
    if chain.reversible:
        out["reversible"] = True
    return out


def chain_from_dict(data: dict[str, Any]) -> FiniteChain:
    try:
        n = int(data["n"])
        trip = data["triplets"]
        pi = data["pi"]
    except KeyError as exc:
        raise ValueError(f"chain file missing field {exc}") from None
    if trip:
        arr = np.asarray(trip, dtype=float)
        if arr.ndim != 2 or arr.shape[1] != 3:
            raise ValueError("triplets must be [i, j, p] rows")
        rows, cols = arr[:, 0].astype(int), arr[:, 1].astype(int)
        if rows.min() < 0 or cols.min() < 0 or max(rows.max(), cols.max()) >= n:
            raise ValueError("triplet index out of range")
        K = sp.coo_array((arr[:, 2], (rows, cols)), shape=(n, n))
    else:
        K = sp.coo_array((n, n))
    return make_chain(K, pi, labels=data.get("labels"), reversible=bool(data.get("reversible", False)))


def save_chain(chain: FiniteChain, path) -> None:
    with open(path, "w") as fh:
        json.dump(chain_to_dict(chain), fh)


def load_chain(path) -> FiniteChain:
    with open(path) as fh:
        return chain_from_dict(json.load(fh))


def random_reversible_chain(n: int, rng: np.random.Generator, density: float = 0.5,
                            lazy: bool = False) -> FiniteChain:
    """Random connected reversible chain from symmetric edge weights."""
    W = rng.random((n, n)) * (rng.random((n, n)) < density)
    W = np.triu(W, 1)
    # spanning path keeps the graph connected
    for i in range(n - 1):
        W[i, i + 1] = max(W[i, i + 1], 0.05 + rng.random())
    W = W + W.T
    if lazy:
        W += np.diag(rng.random(n))
    deg = W.sum(axis=1)
    P = W / deg[:, None]
    return make_chain(P, deg / deg.sum(), reversible=True)
