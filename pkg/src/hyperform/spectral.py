"""Spectral gaps, relaxation times and comparison bounds for reversible chains."""
from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Iterable, TextIO

import numpy as np
import scipy.sparse as sp

from .chain_core import FiniteChain, dirichlet_form, validate_chain, variance

DENSE_LIMIT = 2000
ZERO_MASS = 1e-14
MAX_ITER = 100_000
TOL = 1e-8


class ConvergenceError(RuntimeError):
    pass


@dataclass(frozen=True)
class SpectralResult:
    gap: float
    relaxation_time: float
    second_eigenvalue: float
    method: str
    residual: float


def _symmetrized(chain: FiniteChain):
    """Restrict to positive-mass states and return ``D^½ P D^-½`` and ``√π``."""
    pi = chain.stationary
    keep = np.flatnonzero(pi >= ZERO_MASS)
    P = chain.kernel[keep][:, keep]
    s = np.sqrt(pi[keep])
    A = sp.csr_array(sp.diags_array(s) @ P @ sp.diags_array(1.0 / s))
    # remove rounding asymmetry; exact for reversible chains
    A = (A + A.T) * 0.5
    return A, s / np.linalg.norm(s)


def _dense_gap(A, top):
    vals, vecs = np.linalg.eigh(A.toarray())
    # discard the eigenvector aligned with sqrt(pi)
    overlap = np.abs(vecs.T @ top)
    k = int(np.argmax(overlap))
    rest = np.delete(np.arange(len(vals)), k)
    if rest.size == 0:
        return 0.0, 0.0
    j = rest[np.argmax(vals[rest])]
    v = vecs[:, j]
    residual = float(np.linalg.norm(A @ v - vals[j] * v))
    return float(vals[j]), residual


def _power_gap(A, top, max_iter: int, tol: float):
    n = A.shape[0]
    # shift by I makes the spectrum nonnegative, so the top of what remains is 1+lambda_2
    B = A + sp.identity(n, format="csr")
    v = np.where(np.arange(n) % 2 == 0, 1.0, -1.0)
    v -= (top @ v) * top
    if np.linalg.norm(v) == 0:
        v = np.arange(n, dtype=float)
        v -= (top @ v) * top
    v /= np.linalg.norm(v)
    lam, residual = 0.0, np.inf
    for _ in range(max_iter):
        w = B @ v
        w -= (top @ w) * top
        lam = float(v @ w) - 1.0
        residual = float(np.linalg.norm(A @ v - lam * v - (top @ (A @ v)) * top))
        if residual <= tol:
            return lam, residual
        norm = np.linalg.norm(w)
        if norm == 0:
            return -1.0, 0.0
        v = w / norm
    raise ConvergenceError(f"power iteration stopped after {max_iter} steps, residual {residual:.3e}")


def spectral_gap(chain: FiniteChain, method: str = "auto", *, max_iter: int = MAX_ITER,
                 tol: float = TOL) -> SpectralResult:
    """Gap ``1 - lambda_2`` of a reversible chain.

    ``method`` is ``"dense"``, ``"iterative"`` or ``"auto"`` (dense below
    2000 positive-mass states).  States of mass below 1e-14 are dropped.
    """
    if not chain.reversible:
        raise ValueError("spectral_gap needs a chain declared reversible")
    report = validate_chain(chain)
    if not report.ok:
        raise ValueError(f"invalid chain: {report}")
    A, top = _symmetrized(chain)
    if method == "auto":
        method = "dense" if A.shape[0] < DENSE_LIMIT else "iterative"
    if method == "dense":
        lam, residual = _dense_gap(A, top)
    elif method == "iterative":
        lam, residual = _power_gap(A, top, max_iter, tol)
    else:
        raise ValueError(f"unknown method {method!r}")
    gap = 1.0 - lam
    return SpectralResult(gap, np.inf if gap <= 0 else 1.0 / gap, lam, method, residual)


def rayleigh_quotient(chain: FiniteChain, f) -> float:
    var = variance(chain, f)
    if not var > 0:
        raise ValueError("Rayleigh quotient is undefined for a field constant under pi")
    return dirichlet_form(chain, f) / var


def stationary_ratio(base: FiniteChain, target: FiniteChain) -> float:
    """``max(pi_t/pi_b) * max(pi_b/pi_t)``; exactly 1 for bit-equal vectors."""
    a, b = base.stationary, target.stationary
    if a.shape != b.shape:
        raise ValueError("chains have different state sets")
    if np.array_equal(a, b):
        return 1.0
    if (a <= 0).any() or (b <= 0).any():
        return np.inf
    return float(np.max(b / a) * np.max(a / b))


def comparison_bound(B: float, base: FiniteChain, target: FiniteChain) -> float:
    """Upper bound ``B * c_pi / gap(base)`` on the relaxation time of ``target``.

    ``base`` is the chain with known gap (the i.i.d. reference, say) and
    ``target`` the one whose Dirichlet form dominates ``base``'s up to ``B``.
    The factor ``c_pi`` corrects the variance for differing stationary laws;
    it is a crude standard correction, not a sharp one.
    """
    if base.n_states != target.n_states:
        raise ValueError("chains have different state sets")
    c_pi = stationary_ratio(base, target)
    return float(B * c_pi / spectral_gap(base).gap)


CSV_HEADER = ("instance", "n_states", "gap", "t_rel", "method", "residual")


def write_spectral_csv(rows: Iterable[tuple], out: TextIO) -> None:
    """Write ``(instance_id, n_states, SpectralResult)`` rows."""
    w = csv.writer(out, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for inst, n, res in rows:
        w.writerow([inst, n, repr(res.gap), repr(res.relaxation_time), res.method, repr(res.residual)])
