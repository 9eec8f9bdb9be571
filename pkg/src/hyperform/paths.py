"""Edge paths, path families and congestion constants.

States are either integer indices of a finite (mesh) chain or
:class:`~hyperform.grid.Point` objects of a continuous product space.  A
:class:`Path` is stored as its vertex sequence; a path from ``x`` to ``x``
with no edges has length 0.
"""
from __future__ import annotations

import json
import math
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Any, Callable, Hashable, Iterable, Iterator, Mapping, Optional

import numpy as np
import scipy.sparse.csgraph as csgraph

from .chain_core import FiniteChain, flow_matrix, validate_chain
from .grid import DensityKernel, MeshPartition, Point

State = Hashable
Edge = tuple  # (tail, head)


def drop_self_edges(vertices: Iterable[State]) -> tuple:
    """Remove consecutive repeats, i.e. delete self-edges from a walk."""
    out: list = []
    for v in vertices:
        if not out or out[-1] != v:
            out.append(v)
    return tuple(out)


@dataclass(frozen=True)
class Path:
    vertices: tuple

    def __post_init__(self):
        if len(self.vertices) == 0:
            raise ValueError("a path needs at least its start vertex")
        object.__setattr__(self, "vertices", tuple(self.vertices))

    @classmethod
    def through(cls, *vertices: State) -> "Path":
        """Path visiting ``vertices`` with self-edges deleted."""
        return cls(drop_self_edges(vertices))

    @property
    def start(self) -> State:
        return self.vertices[0]

    @property
    def end(self) -> State:
        return self.vertices[-1]

    @property
    def edges(self) -> tuple:
        v = self.vertices
        return tuple(zip(v[:-1], v[1:]))

    @property
    def length(self) -> int:
        return len(self.vertices) - 1

    def __len__(self) -> int:
        return self.length


class PathFamily(Mapping):
    """Paths keyed by ordered endpoint pair.

    ``route``, when given, produces the path for any pair on demand; stored
    paths take precedence and are what congestion sums iterate over.
    """

    def __init__(self, paths: Optional[Mapping] = None,
                 route: Optional[Callable[[State, State], Path]] = None):
        self._paths: dict = {}
        self.route = route
        for key, p in (paths or {}).items():
            self.add(p, key)

    def add(self, path: Path, key: Optional[tuple] = None) -> None:
        key = (path.start, path.end) if key is None else tuple(key)
        if key != (path.start, path.end):
            raise ValueError(f"path {path.vertices} does not join {key}")
        self._paths[key] = path

    def __getitem__(self, key) -> Path:
        key = tuple(key)
        if key in self._paths:
            return self._paths[key]
        if key[0] == key[1]:
            return Path((key[0],))
        raise KeyError(key)

    def __contains__(self, key) -> bool:
        key = tuple(key)
        return key in self._paths or key[0] == key[1]

    def __iter__(self) -> Iterator:
        return iter(self._paths)

    def __len__(self) -> int:
        return len(self._paths)

    def path_for(self, a: State, b: State) -> Path:
        if (a, b) in self._paths or a == b:
            return self[a, b]
        if self.route is None:
            raise KeyError((a, b))
        return self.route(a, b)

    def edge_index(self) -> dict:
        """Map each edge to the endpoint pairs whose stored path uses it."""
        index: dict = defaultdict(list)
        for key, p in self._paths.items():
            for e in set(p.edges):
                index[e].append(key)
        return index

    def max_paths_per_edge(self) -> int:
        """The naive congestion count: most stored paths sharing one edge."""
        counts: dict = defaultdict(int)
        for p in self._paths.values():
            for e in set(p.edges):
                if e[0] != e[1]:
                    counts[e] += 1
        return max(counts.values(), default=0)

    def relabel(self, perm: Mapping) -> "PathFamily":
        out = PathFamily()
        for p in self._paths.values():
            out.add(Path(tuple(perm[v] for v in p.vertices)))
        return out


def distance_W(a, b, space) -> float:
    """Endpoint distance between two edges or two paths.

    ``space`` supplies ``distance(x, y)``: a :class:`ProductSpace` for points
    or a :class:`MeshPartition` for cell indices.
    """
    if isinstance(a, Path) != isinstance(b, Path):
        raise TypeError("distance_W compares two edges or two paths, not one of each")
    if isinstance(a, Path):
        ends_a, ends_b = (a.start, a.end), (b.start, b.end)
    else:
        ends_a, ends_b = tuple(a), tuple(b)
        if len(ends_a) != 2 or len(ends_b) != 2:
            raise TypeError("edges are (tail, head) pairs")
    return max(space.distance(ends_a[0], ends_b[0]), space.distance(ends_a[1], ends_b[1]))


# -- finite congestion ------------------------------------------------------------

class CoverageError(ValueError):
    pass


@dataclass
class CongestionResult:
    value: float
    argmax: list
    loads: dict = field(repr=False)
    max_paths_per_edge: int = 0

    def __float__(self) -> float:
        return self.value


def _argmax(ratios: dict, rel: float = 1e-9) -> list:
    if not ratios:
        return []
    top = max(ratios.values())
    return sorted((e for e, r in ratios.items() if r >= top * (1 - rel)), key=repr)


def congestion_ratio_finite(P: FiniteChain, P_tilde: FiniteChain, family: PathFamily,
                            check: bool = True) -> CongestionResult:
    """Congestion ratio ``max_e Q(e)^{-1} Σ_{γ_xy ∋ e} Q̃(x,y)|γ_xy|``."""
    if P.n_states != P_tilde.n_states:
        raise ValueError("chains have different state sets")
    if check:
        for name, ch in (("P", P), ("P_tilde", P_tilde)):
            rep = validate_chain(ch)
            if not rep.ok or not ch.reversible:
                raise ValueError(f"{name} must be a valid reversible chain: {rep}")
    Q = flow_matrix(P).todok()
    Qt = flow_matrix(P_tilde).tocoo()
    loads: dict = defaultdict(float)
    users: dict = defaultdict(int)
    order = np.lexsort((Qt.col, Qt.row))
    for k in order:
        x, y, q = int(Qt.row[k]), int(Qt.col[k]), float(Qt.data[k])
        if x == y:
            continue
        if (x, y) not in family:
            raise CoverageError(f"family has no path for pair ({x}, {y}) with P_tilde > 0")
        path = family[x, y]
        w = q * path.length
        for e in path.edges:
            loads[e] += w
            users[e] += 1
    ratios = {}
    for e, load in loads.items():
        qe = Q.get(e, 0.0)
        if not qe > 0:
            raise ValueError(f"family edge {e} has Q(e) = 0")
        ratios[e] = float(load / qe)
    value = max(ratios.values(), default=0.0)
    return CongestionResult(value, _argmax(ratios), ratios, max(users.values(), default=0))


def shortest_path_family(chain: FiniteChain, pairs: Optional[Iterable[tuple]] = None) -> PathFamily:
    """Fewest-edge paths in the graph ``{P > 0}``, ties broken by scipy's BFS."""
    n = chain.n_states
    _, pred = csgraph.shortest_path(chain.kernel, unweighted=True, return_predecessors=True)
    fam = PathFamily()
    if pairs is None:
        pairs = ((i, j) for i in range(n) for j in range(n) if i != j)
    for i, j in pairs:
        if i == j:
            continue
        if pred[i, j] < 0:
            raise CoverageError(f"state {j} unreachable from {i}")
        walk = [j]
        while walk[-1] != i:
            walk.append(int(pred[i, walk[-1]]))
        fam.add(Path(tuple(reversed(walk))))
    return fam


# -- assumption configuration ----------------------------------------------------

def parse_function(spec: str) -> Callable[[float], float]:
    """Named scalar functions: ``constant:<c>``, ``identity``, ``affine:<a>,<b>``."""
    name, _, arg = spec.partition(":")
    if name == "identity" and not arg:
        return lambda x: float(x)
    if name == "constant":
        c = float(arg)
        return lambda x: c
    if name == "affine":
        a, b = (float(t) for t in arg.split(","))
        return lambda x: a * float(x) + b
    raise ValueError(f"unknown function spec {spec!r}")


EdgePredicate = Callable[[Point, Point], bool]


@dataclass
class AssumptionConfig:
    """Constants and functions for the path-regularity assumptions.

    ``m`` and ``L`` are named function specs.  ``m`` is evaluated at the
    edge length ``‖e‖``; ``L`` at the endpoint distance of a path.  The good
    sets are named: ``"support"`` means pairs with positive transition
    density (off the diagonal for ``goodset``), ``"all"`` means everything.
    """

    epsilon: float
    epsilon0: float
    R: float
    M: float
    m: str = "constant:1"
    K: float = 1.0
    L: str = "identity"
    goodset: str = "support"
    biggoodset: str = "support"
    density_floor: float = 1e-12
    pl_delta: Optional[float] = None

    def m_of(self, length: float) -> float:
        return parse_function(self.m)(length)

    def L_of(self, x: float) -> float:
        return parse_function(self.L)(x)

    def to_dict(self) -> dict:
        return dict(self.__dict__)

    @classmethod
    def from_dict(cls, data: Mapping) -> "AssumptionConfig":
        known = cls.__dataclass_fields__
        extra = set(data) - set(known)
        if extra:
            raise ValueError(f"unknown config fields {sorted(extra)}")
        cfg = cls(**data)
        parse_function(cfg.m)
        parse_function(cfg.L)
        for name in (cfg.goodset, cfg.biggoodset):
            if name not in ("support", "all"):
                raise ValueError(f"unknown good-set name {name!r}")
        return cfg


def _goodset(kind: str, kernel: DensityKernel, off_diagonal: bool) -> EdgePredicate:
    if kind == "all":
        return lambda x, y: not (off_diagonal and x == y)
    return lambda x, y: (not (off_diagonal and x == y)) and kernel.f(x, y) > 0


# -- generalized congestion ------------------------------------------------------

@dataclass
class GeneralCongestion:
    value: float
    argmax: list
    terms: dict = field(repr=False)
    max_paths_per_edge: int = 0

    def __float__(self) -> float:
        return self.value


def congestion_constant_general(kernel: DensityKernel, kernel_tilde: DensityKernel,
                                family: PathFamily, config: AssumptionConfig) -> GeneralCongestion:
    """Generalized congestion constant over the edges used by ``family``.

    For each used edge ``e``::

        2 (ceil(m(e)) + 1) / Q(e) * Σ_{γ_xy ∋ e} Q̃(x, y) (|γ_xy| + M)

    with ``Q = k f`` and ``Q̃ = k̃ f̃`` evaluated pointwise.  Edges no stored
    path uses contribute nothing.
    """
    loads: dict = defaultdict(float)
    users: dict = defaultdict(int)
    for (x, y), path in family.items():
        if x == y or path.length == 0:
            continue
        w = kernel_tilde.flow_density(x, y) * (path.length + config.M)
        for e in set(path.edges):
            loads[e] += w
            users[e] += 1
    space = kernel.space
    terms = {}
    for e, load in loads.items():
        qe = kernel.flow_density(*e)
        if not qe > 0:
            raise ValueError(f"family edge {e} has Q(e) = 0")
        mult = 2 * (math.ceil(config.m_of(space.distance(*e))) + 1)
        terms[e] = float(mult * load / qe)
    value = max(terms.values(), default=0.0)
    return GeneralCongestion(value, _argmax(terms), terms, max(users.values(), default=0))


# -- lifting to the mesh ----------------------------------------------------------

def lift_path(path: Path, partition: MeshPartition) -> Path:
    return Path.through(*(partition.cell_of(v) for v in path.vertices))


def lift_path_family(family: PathFamily, partition: MeshPartition,
                     pairs: Optional[Iterable[tuple]] = None) -> PathFamily:
    """Replace path vertices by their cells and delete the self-edges created.

    With ``pairs`` of cells, the family's ``route`` is evaluated between the
    cell anchors (the mesh construction); otherwise stored paths are lifted
    and the first path landing on a cell pair wins.
    """
    out = PathFamily()
    if pairs is not None:
        for i, j in pairs:
            if i == j:
                continue
            p = family.path_for(partition.anchor(i), partition.anchor(j))
            # endpoints are anchors, so they lift to i and j themselves
            out.add(lift_path(p, partition), (i, j))
        return out
    for (x, y), p in family.items():
        lifted = lift_path(p, partition)
        key = (lifted.start, lifted.end)
        if lifted.length and key not in out:
            out.add(lifted, key)
    return out


# -- assumption validation -------------------------------------------------------

ASSUMPTIONS = ("DP", "GP", "SP", "UB", "PL", "RP", "NSTPA")


@dataclass
class Verdict:
    passed: bool
    checked: int
    witness: Any = None
    detail: str = ""


@dataclass
class AssumptionReport:
    verdicts: dict
    seed: int

    @property
    def passed(self) -> bool:
        return all(v.passed for v in self.verdicts.values())

    def failed(self) -> list:
        return [k for k, v in self.verdicts.items() if not v.passed]

    def __str__(self) -> str:
        lines = []
        for name, v in self.verdicts.items():
            status = "pass-on-samples" if v.passed else f"FAIL witness={v.witness!r}"
            lines.append(f"{name}: {status} ({v.checked} checked) {v.detail}".rstrip())
        return "\n".join(lines)


def _coords(p: Point) -> np.ndarray:
    return np.asarray(p.coords, dtype=float)


def _check_dp(kernel, config, rng, n) -> Verdict:
    big = _goodset(config.biggoodset, kernel, off_diagonal=False)
    space = kernel.space
    checked = 0
    for _ in range(n):
        x, y = space.sample(rng, 2)
        if not big(x, y):
            continue
        checked += 1
        kx, fxy = kernel.k(x), kernel.f(x, y)
        if kx < config.density_floor or fxy < config.density_floor:
            return Verdict(False, checked, (x, y), f"k={kx:g} f={fxy:g} below floor {config.density_floor:g}")
    return Verdict(True, checked)


def _check_gp(family, kernel, kernel_tilde, config, rng, n) -> Verdict:
    good = _goodset(config.goodset, kernel, off_diagonal=True)
    space = kernel.space
    if family.route is None:
        # without a route only stored paths can be checked
        pairs = iter(list(family)[:n])
    else:
        pairs = (tuple(space.sample(rng, 2)) for _ in range(n))
    checked = 0
    for x, y in pairs:
        if x == y or not kernel_tilde.f(x, y) > 0:
            continue
        checked += 1
        path = family.path_for(x, y)
        for e in path.edges:
            if not good(*e) or not kernel.f(*e) > 0:
                return Verdict(False, checked, {"pair": (x, y), "edge": e}, "edge outside the good set")
    return Verdict(True, checked)


def _check_sp(family, space, config) -> Verdict:
    index = family.edge_index()
    checked = 0
    eps = config.epsilon
    for e, keys in index.items():
        if e[0] == e[1] or len(keys) < 2:
            continue
        for a in range(len(keys)):
            for b in range(a + 1, len(keys)):
                checked += 1
                (x1, y1), (x2, y2) = keys[a], keys[b]
                ok_x = x1 == x2 or space.distance(x1, x2) > eps
                ok_y = y1 == y2 or space.distance(y1, y2) > eps
                if not (ok_x and ok_y):
                    return Verdict(False, checked, {"edge": e, "pairs": (keys[a], keys[b])},
                                   "two paths through one edge with close, unequal endpoints")
    return Verdict(True, checked)


def _check_ub(family, config) -> Verdict:
    for key, p in family.items():
        if p.length > config.R:
            return Verdict(False, len(family), {"pair": key, "length": p.length}, f"longer than R={config.R}")
    return Verdict(True, len(family))


def _blocks(items, key_fn):
    out = defaultdict(list)
    for it in items:
        out[key_fn(it)].append(it)
    return out


def _check_pl(family, space, config) -> Verdict:
    delta = config.epsilon if config.pl_delta is None else config.pl_delta
    paths = [p for p in family.values() if p.length > 0]
    if not paths:
        return Verdict(True, 0)
    if delta > space.far_distance:
        lens = [p.length for p in paths]
        ok = max(lens) - min(lens) <= config.M
        lo, hi = paths[int(np.argmin(lens))], paths[int(np.argmax(lens))]
        return Verdict(ok, len(paths), None if ok else {"paths": (lo.vertices, hi.vertices)})
    checked = 0
    for _, group in _blocks(paths, lambda p: (p.start.component, p.end.component)).items():
        if len(group) < 2:
            continue
        S = np.array([_coords(p.start) for p in group])
        E = np.array([_coords(p.end) for p in group])
        dS = np.linalg.norm(S[:, None] - S[None], axis=2)
        dE = np.linalg.norm(E[:, None] - E[None], axis=2)
        W = np.maximum(dS, dE)
        lens = np.array([p.length for p in group])
        bad = (W < delta) & (np.abs(lens[:, None] - lens[None]) > config.M)
        checked += len(group) ** 2
        if bad.any():
            a, b = map(int, np.argwhere(bad)[0])
            return Verdict(False, checked, {"paths": (group[a].vertices, group[b].vertices)},
                           f"lengths differ by more than M={config.M}")
    return Verdict(True, checked)


def _check_rp(family, space, config, rng, n) -> Verdict:
    eps = config.epsilon
    index = family.edge_index()
    edges = [e for e in index if e[0] != e[1]]
    if not edges:
        return Verdict(True, 0)
    by_block = _blocks(edges, lambda e: (e[0].component, e[1].component))
    arrays = {}
    for blk, es in by_block.items():
        arrays[blk] = (es, np.array([_coords(e[0]) for e in es]), np.array([_coords(e[1]) for e in es]))
    occurrences = [(key, e) for e in edges for key in index[e]]
    picks = rng.choice(len(occurrences), size=min(n, len(occurrences)), replace=False)
    checked = 0
    for idx in sorted(picks.tolist()):
        key, e = occurrences[idx]
        gamma = family[key]
        limit = config.m_of(space.distance(*e)) * eps
        if eps > space.far_distance:
            cands = [c for c in edges if c != e and distance_W(c, e, space) < eps]
        else:
            es, T, H = arrays[(e[0].component, e[1].component)]
            W = np.maximum(np.linalg.norm(T - _coords(e[0]), axis=1), np.linalg.norm(H - _coords(e[1]), axis=1))
            cands = [es[i] for i in np.flatnonzero(W < eps) if es[i] != e]
        for c in cands:
            checked += 1
            best = min(distance_W(gamma, family[k2], space) for k2 in index[c])
            if not best < limit:
                return Verdict(False, checked, {"edge": e, "path": key, "nearby_edge": c, "W": best},
                               f"no path through the nearby edge within m(e)*eps={limit:g}")
    return Verdict(True, checked)


def _check_nstpa(family, space, config, rng) -> Verdict:
    for x in rng.random(32) * space.far_distance + 1e-9:
        if not config.L_of(x) > 0:
            return Verdict(False, 0, {"x": float(x)}, "L(x) must be positive for x > 0")
    checked = 0
    for (a, b), p in family.items():
        bound = config.L_of(space.distance(a, b))
        for e in p.edges:
            checked += 1
            if space.distance(*e) < bound:
                return Verdict(False, checked, {"pair": (a, b), "edge": e},
                               f"edge shorter than L(d(a,b))={bound:g}")
    return Verdict(True, checked)


def validate_assumptions(family: PathFamily, config: AssumptionConfig, kernel: DensityKernel,
                         kernel_tilde: Optional[DensityKernel] = None, seed: int = 0,
                         n_samples: int = 10_000) -> AssumptionReport:
    """Check every path assumption, exactly on stored paths or by seeded sampling.

    UB, PL, SP and NSTPA are decided on the stored paths.  DP and GP sample
    point pairs; RP samples stored (path, edge) occurrences and compares
    against the stored edges near each one.  A pass means "no witness found".
    """
    kernel_tilde = kernel if kernel_tilde is None else kernel_tilde
    space = kernel.space
    rng = np.random.default_rng(seed)
    m_samples = [config.m_of(x) for x in rng.random(64) * space.far_distance]
    verdicts = {
        "DP": _check_dp(kernel, config, rng, n_samples),
        "GP": _check_gp(family, kernel, kernel_tilde, config, rng, min(n_samples, 2000)),
        "SP": _check_sp(family, space, config),
        "UB": _check_ub(family, config),
        "PL": _check_pl(family, space, config),
        "RP": _check_rp(family, space, config, rng, n_samples),
        "NSTPA": _check_nstpa(family, space, config, rng),
    }
    if max(m_samples) > config.K:
        verdicts["RP"] = Verdict(False, len(m_samples), {"m": max(m_samples)}, f"m exceeds its bound K={config.K}")
    return AssumptionReport(verdicts, seed)


# -- file formats -------------------------------------------------------------

def _encode_state(v):
    if isinstance(v, Point):
        return {"component": v.component, "coords": list(v.coords)}
    return int(v)


def _decode_state(v):
    if isinstance(v, dict):
        return Point(int(v["component"]), tuple(float(t) for t in v["coords"]))
    return int(v)


def family_to_dict(family: PathFamily) -> dict:
    return {"pairs": [{"from": _encode_state(p.start), "to": _encode_state(p.end),
                       "via": [_encode_state(v) for v in p.vertices[1:-1]]}
                      for p in family.values()]}


def family_from_dict(data: Mapping) -> PathFamily:
    fam = PathFamily()
    for item in data["pairs"]:
        a, b = _decode_state(item["from"]), _decode_state(item["to"])
        via = [_decode_state(v) for v in item.get("via", [])]
        fam.add(Path((a, *via, b)) if a != b or via else Path((a,)), (a, b))
    return fam


def save_family(family: PathFamily, path) -> None:
    with open(path, "w") as fh:
        json.dump(family_to_dict(family), fh)


def load_family(path) -> PathFamily:
    with open(path) as fh:
        return family_from_dict(json.load(fh))


def load_config(path) -> AssumptionConfig:
    with open(path) as fh:
        return AssumptionConfig.from_dict(json.load(fh))
