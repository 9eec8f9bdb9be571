"""Independent brute-force computations the library is checked against.

Everything here works on dense arrays with explicit loops and shares no
code with the package.
"""
import numpy as np


def dirichlet_bruteforce(P, pi, f):
    n = len(pi)
    total = 0.0
    for i in range(n):
        for j in range(n):
            total += (f[i] - f[j]) ** 2 * P[i][j] * pi[i]
    return 0.5 * total


def variance_bruteforce(pi, f):
    mean = sum(p * x for p, x in zip(pi, f))
    return sum(p * (x - mean) ** 2 for p, x in zip(pi, f))


def second_eigenvalue_general(P):
    """lambda_2 from the non-symmetric eigensolver on P itself."""
    vals = np.sort(np.real(np.linalg.eigvals(np.asarray(P, dtype=float))))[::-1]
    return vals[1]


def congestion_bruteforce(P, pi, Pt, pit, paths):
    """``paths[(x, y)]`` is a vertex list; returns the congestion ratio."""
    n = len(pi)
    best = 0.0
    for a in range(n):
        for b in range(n):
            if a == b or P[a][b] == 0:
                continue
            load = 0.0
            for (x, y), verts in paths.items():
                edges = list(zip(verts[:-1], verts[1:]))
                if (a, b) in edges:
                    load += pit[x] * Pt[x][y] * len(edges)
            best = max(best, load / (pi[a] * P[a][b]))
    return best


def barbell_bruteforce(n):
    """Simple random walk on the barbell by adjacency lists."""
    N = 2 * n
    adj = {v: set() for v in range(N)}
    for side in (range(n), range(n, N)):
        for u in side:
            for v in side:
                if u != v:
                    adj[u].add(v)
    adj[n - 1].add(n)
    adj[n].add(n - 1)
    P = np.zeros((N, N))
    for u, nbrs in adj.items():
        for v in nbrs:
            P[u, v] = 1.0 / len(nbrs)
    deg = np.array([len(adj[v]) for v in range(N)], dtype=float)
    return P, deg / deg.sum(), adj
