"""Independent reference computations used by the tests.

Nothing here calls the package's solvers: transport problems go through
``scipy.optimize.linprog`` or brute-force vertex enumeration, potentials are
direct sums.
"""

import itertools

import numpy as np
from scipy.optimize import linprog


def put_direct(atoms, weights, x):
    """``sum_i w_i (x - a_i)^+`` evaluated at each ``x``."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    return (np.maximum(x[:, None] - np.asarray(atoms)[None, :], 0.0) * np.asarray(weights)[None, :]).sum(axis=1)


def sampled_dual_leq_cd(m1, m2, rng, n_funcs=200, tol=1e-6):
    """Compare ``int f dm1 <= int f dm2 + tol`` over sampled convex nonincreasing ``f``.

    Test functions are hinges ``(s - t)^+`` at every atom of either measure,
    completed with random nonnegative combinations of hinges at random
    locations (constants cancel for equal masses).
    """
    grid = np.union1d(m1.atoms, m2.atoms)
    locs = list(grid)
    while len(locs) < n_funcs:
        k = int(rng.integers(1, 4))
        locs.append((rng.uniform(grid.min() - 1, grid.max() + 1, k), rng.random(k)))
    for item in locs[:max(n_funcs, grid.size)]:
        if isinstance(item, tuple):
            s, a = item
        else:
            s, a = np.array([item]), np.array([1.0])

        def f(t, s=s, a=a):
            return (np.maximum(s[None, :] - np.asarray(t)[:, None], 0.0) * a[None, :]).sum(axis=1)

        if f(m1.atoms) @ m1.weights > f(m2.atoms) @ m2.weights + tol:
            return False
    return True


def transport_linprog(a, b, cost):
    """Optimal value of the balanced transport problem by ``linprog``."""
    n, m = cost.shape
    A = np.zeros((n + m, n * m))
    for i in range(n):
        A[i, i * m:(i + 1) * m] = 1.0
    for j in range(m):
        A[n + j, j::m] = 1.0
    res = linprog(cost.reshape(-1), A_eq=A, b_eq=np.concatenate([a, b]), bounds=(0, None), method="highs")
    assert res.status == 0
    return res.fun


def wasserstein_linprog(m1, m2, r=1.0):
    cost = np.abs(m1.atoms[:, None] - m2.atoms[None, :]) ** r
    return transport_linprog(m1.weights, m2.weights, cost) ** (1.0 / r)


def super_polytope(x, wx, y, wy, martingale=False):
    """Standard-form data ``A z = b`` of the (super)martingale coupling polytope.

    Variables are the ``n*m`` coupling entries followed by ``n`` slacks of
    the barycentre rows (fixed to zero when ``martingale``); one marginal
    row is dropped as it is implied by the others.
    """
    n, m = x.size, y.size
    nv = n * m + n
    rows, rhs = [], []
    for i in range(n):
        r = np.zeros(nv)
        r[i * m:(i + 1) * m] = 1.0
        rows.append(r)
        rhs.append(wx[i])
    for j in range(m - 1):
        r = np.zeros(nv)
        r[j:n * m:m] = 1.0
        rows.append(r)
        rhs.append(wy[j])
    for i in range(n):
        r = np.zeros(nv)
        r[i * m:(i + 1) * m] = y - x[i]
        r[n * m + i] = 1.0
        rows.append(r)
        rhs.append(0.0)
    A, b = np.array(rows), np.array(rhs)
    if martingale:
        A = A[:, :n * m]
    return A, b


def enumerate_vertices(A, b, tol=1e-9):
    """All basic feasible solutions of ``A z = b, z >= 0`` by brute force."""
    rank = np.linalg.matrix_rank(A)
    # drop dependent rows
    keep = []
    for i in range(A.shape[0]):
        if np.linalg.matrix_rank(A[keep + [i]]) > len(keep):
            keep.append(i)
    A, b = A[keep], b[keep]
    assert len(keep) == rank
    verts = []
    for cols in itertools.combinations(range(A.shape[1]), rank):
        B = A[:, cols]
        if abs(np.linalg.det(B)) < 1e-12:
            continue
        zb = np.linalg.solve(B, b)
        if np.all(zb >= -tol):
            z = np.zeros(A.shape[1])
            z[list(cols)] = np.maximum(zb, 0.0)
            verts.append(z)
    return verts


def transport_vertices(a, b):
    """Vertices of the transport polytope with marginals ``a`` and ``b``."""
    n, m = a.size, b.size
    A = np.zeros((n + m, n * m))
    for i in range(n):
        A[i, i * m:(i + 1) * m] = 1.0
    for j in range(m):
        A[n + j, j::m] = 1.0
    return [v.reshape(n, m) for v in enumerate_vertices(A, np.concatenate([a, b]))]


def aw_enumerate(p, q, r=1.0):
    """Adapted Wasserstein distance by enumerating outer-coupling vertices.

    Inner distances come from ``linprog`` so nothing of the package's
    transport code is reused.
    """
    cost = np.zeros((p.size, q.size))
    for i, (x, kp) in enumerate(zip(p.xs, p.kernels)):
        for j, (xq, kq) in enumerate(zip(q.xs, q.kernels)):
            inner = wasserstein_linprog(kp, kq, r) ** r if kp.size and kq.size else 0.0
            cost[i, j] = abs(x - xq) ** r + inner
    best = min(float((v * cost).sum()) for v in transport_vertices(p.ws, q.ws * p.mass / q.mass))
    return max(best, 0.0) ** (1.0 / r)


def sot_enumerate(mu, nu, cost):
    """Optimal supermartingale transport value by vertex enumeration."""
    A, b = super_polytope(mu.atoms, mu.weights, nu.atoms, nu.weights)
    n, m = mu.size, nu.size
    c = np.concatenate([cost.reshape(-1), np.zeros(n)])
    verts = enumerate_vertices(A, b)
    return min(float(c @ v) for v in verts), [v[:n * m].reshape(n, m) for v in verts]
