"""Independent reference implementations used to check the main code paths.

These deliberately avoid the library's own algorithms: brute-force active-set
enumeration for QPs, finite differences for gradients, topological sweeps for
water tracing, and scipy's LP solver for pure DC dispatch.
"""

from __future__ import annotations

import itertools

import numpy as np


def enumerate_qp(Q, q, A, b, G, h, feas_tol=1e-7):
    """Globally solve a strictly convex QP by enumerating active sets.

    Solves the equality-constrained system for every subset of inequality
    rows (up to the dimension limit), keeps primal-feasible candidates and
    returns (z, objective) of the best one.  Exponential in len(h); only for
    small test problems.
    """
    n = len(q)
    me = A.shape[0] if A is not None and A.size else 0
    mi = G.shape[0] if G is not None and G.size else 0
    A = np.zeros((0, n)) if me == 0 else np.asarray(A, dtype=float)
    b = np.zeros(0) if me == 0 else np.asarray(b, dtype=float)
    G = np.zeros((0, n)) if mi == 0 else np.asarray(G, dtype=float)
    h = np.zeros(0) if mi == 0 else np.asarray(h, dtype=float)

    best_z, best_obj = None, np.inf
    max_active = n - np.linalg.matrix_rank(A) if me else n
    for size in range(0, min(mi, max_active) + 1):
        for subset in itertools.combinations(range(mi), size):
            S = list(subset)
            C = np.vstack([A, G[S]])
            d = np.concatenate([b, h[S]])
            dim = n + C.shape[0]
            K = np.zeros((dim, dim))
            K[:n, :n] = Q
            K[:n, n:] = C.T
            K[n:, :n] = C
            rhs = np.concatenate([-q, d])
            try:
                sol = np.linalg.solve(K, rhs)
            except np.linalg.LinAlgError:
                continue
            if np.abs(K @ sol - rhs).max(initial=0.0) > 1e-9 * max(1.0, np.abs(rhs).max()):
                continue
            z = sol[:n]
            if mi and (G @ z - h).max(initial=0.0) > feas_tol:
                continue
            obj = 0.5 * z @ Q @ z + q @ z
            if obj < best_obj - 1e-12:
                best_obj = obj
                best_z = z
    return best_z, best_obj


def random_feasible_qp(rng, n, mi, me, box=True):
    """Random strictly convex QP with a guaranteed interior feasible point."""
    M = rng.standard_normal((n, n))
    Q = M @ M.T + (0.3 + rng.random()) * np.eye(n)
    q = rng.standard_normal(n) * 2.0
    z0 = rng.standard_normal(n)
    A = rng.standard_normal((me, n)) if me else None
    b = A @ z0 if me else None
    G = rng.standard_normal((mi, n)) if mi else None
    h = G @ z0 + rng.uniform(0.05, 1.0, mi) if mi else None
    return Q, q, A, b, G, h


def qp_from_known_solution(rng, n, mi, me, n_active):
    """Construct a QP whose optimum, duals and active set are known exactly.

    Strict complementarity holds by construction (active duals and inactive
    slacks are bounded away from zero), which the gradient checks require.
    """
    M = rng.standard_normal((n, n))
    Q = M @ M.T + (0.5 + rng.random()) * np.eye(n)
    z_star = rng.standard_normal(n)
    A = rng.standard_normal((me, n)) if me else np.zeros((0, n))
    b = A @ z_star
    nu = rng.standard_normal(me)
    G = rng.standard_normal((mi, n)) if mi else np.zeros((0, n))
    lam = np.zeros(mi)
    h = np.zeros(mi)
    active = rng.permutation(mi)[:n_active]
    for i in range(mi):
        if i in active:
            h[i] = G[i] @ z_star
            lam[i] = rng.uniform(0.2, 2.0)
        else:
            h[i] = G[i] @ z_star + rng.uniform(0.2, 2.0)
    q = -(Q @ z_star + A.T @ nu + G.T @ lam)
    return (Q, q, A, b, G, h), (z_star, nu, lam)


def finite_difference_gradient(f, x0, step=1e-6):
    """Central-difference gradient of a scalar function of a flat array."""
    x0 = np.asarray(x0, dtype=float)
    g = np.zeros_like(x0)
    for i in range(x0.size):
        xp = x0.copy()
        xm = x0.copy()
        xp[i] += step
        xm[i] -= step
        g[i] = (f(xp) - f(xm)) / (2.0 * step)
    return g
