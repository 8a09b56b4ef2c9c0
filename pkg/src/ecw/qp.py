"""Dense convex quadratic programming.

Solves  min 1/2 z'Qz + q'z  s.t.  Az = b, Gz <= h  with a primal-dual
interior-point method (Mehrotra predictor-corrector) on dense LU
factorizations, followed by an active-set polish step that sharpens the
primal/dual residuals to near machine precision.  Duals are returned with
the sign convention  Qz + q + A'nu + G'lambda = 0, lambda >= 0.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"
MAX_ITER = "max_iter"

_SYM_TOL = 1e-12
_RANK_TOL = 1e-10


class QpInputError(ValueError):
    """Malformed QP data (shape mismatch, asymmetric Q)."""


class QpSolveError(RuntimeError):
    """Raised by require_optimal() when the solve did not reach optimality."""

    def __init__(self, status: str):
        super().__init__(f"QP solve failed with status '{status}'")
        self.status = status


@dataclass(frozen=True)
class QpInstance:
    """Canonical dense QP data: min 1/2 z'Qz + q'z s.t. Az=b, Gz<=h."""

    Q: np.ndarray
    q: np.ndarray
    A: np.ndarray
    b: np.ndarray
    G: np.ndarray
    h: np.ndarray

    def __post_init__(self):
        n = self.q.shape[0]
        if self.Q.shape != (n, n):
            raise QpInputError(f"Q must be {n}x{n}, got {self.Q.shape}")
        if np.abs(self.Q - self.Q.T).max(initial=0.0) > _SYM_TOL * max(
            1.0, np.abs(self.Q).max(initial=0.0)
        ):
            raise QpInputError("Q is not symmetric")
        if self.A.ndim != 2 or self.A.shape[1] != n:
            raise QpInputError(f"A must have {n} columns, got {self.A.shape}")
        if self.b.shape != (self.A.shape[0],):
            raise QpInputError("b length does not match A rows")
        if self.G.ndim != 2 or self.G.shape[1] != n:
            raise QpInputError(f"G must have {n} columns, got {self.G.shape}")
        if self.h.shape != (self.G.shape[0],):
            raise QpInputError("h length does not match G rows")

    @property
    def n(self) -> int:
        return self.q.shape[0]

    @property
    def m_eq(self) -> int:
        return self.A.shape[0]

    @property
    def m_in(self) -> int:
        return self.G.shape[0]

    def objective(self, z: np.ndarray) -> float:
        return float(0.5 * z @ self.Q @ z + self.q @ z)


def make_instance(Q, q, A=None, b=None, G=None, h=None) -> QpInstance:
    """Build a QpInstance from array-likes; None means an empty block."""
    q = np.atleast_1d(np.asarray(q, dtype=float))
    n = q.shape[0]
    Q = np.asarray(Q, dtype=float).reshape(n, n)
    A = np.zeros((0, n)) if A is None else np.asarray(A, dtype=float).reshape(-1, n)
    b = np.zeros(0) if b is None else np.atleast_1d(np.asarray(b, dtype=float))
    G = np.zeros((0, n)) if G is None else np.asarray(G, dtype=float).reshape(-1, n)
    h = np.zeros(0) if h is None else np.atleast_1d(np.asarray(h, dtype=float))
    return QpInstance(Q, q, A, b, G, h)


@dataclass(frozen=True)
class KktPoint:
    """Primal-dual solution of a QpInstance."""

    z_star: np.ndarray
    nu_star: np.ndarray
    lambda_star: np.ndarray
    status: str
    iterations: int

    def require_optimal(self) -> "KktPoint":
        if self.status != OPTIMAL:
            raise QpSolveError(self.status)
        return self


def kkt_residuals(inst: QpInstance, z, nu, lam) -> dict:
    """Infinity-norm KKT residuals (stationarity, primal eq/in, complementarity)."""
    r_d = inst.Q @ z + inst.q + inst.A.T @ nu + inst.G.T @ lam
    slack = inst.G @ z - inst.h
    out = {
        "stationarity": float(np.abs(r_d).max(initial=0.0)),
        "primal_eq": float(np.abs(inst.A @ z - inst.b).max(initial=0.0)),
        "primal_in": float(slack.max(initial=0.0)),
        "complementarity": float(np.abs(lam * slack).max(initial=0.0)),
        "dual_sign": float((-lam).max(initial=0.0)),
    }
    out["max"] = max(out["stationarity"], out["primal_eq"], out["primal_in"],
                     out["complementarity"], out["dual_sign"])
    return out


def _lu_with_refinement(K: np.ndarray, reg: np.ndarray):
    """Factor K (+ static regularization) and return a solver that applies
    two rounds of iterative refinement against the unregularized K."""
    try:
        lu = sla.lu_factor(K + np.diag(reg), check_finite=False)
    except sla.LinAlgError:
        lu = sla.lu_factor(K + np.diag(reg + 1e-8 * (np.abs(reg) + 1.0)),
                           check_finite=False)

    def solve(rhs: np.ndarray) -> np.ndarray:
        x = sla.lu_solve(lu, rhs, check_finite=False)
        for _ in range(2):
            r = rhs - K @ x
            x = x + sla.lu_solve(lu, r, check_finite=False)
        return x

    return solve


def _eliminate_redundant_rows(A: np.ndarray, b: np.ndarray):
    """Rank-revealing selection of independent equality rows.

    Returns (keep_idx, consistent): removed rows are linear combinations of
    the kept ones; `consistent` is False when their right-hand sides
    contradict the kept rows (the system Az=b has no solution).
    """
    me = A.shape[0]
    if me == 0:
        return np.arange(0), True
    _, R, piv = sla.qr(A.T, mode="economic", pivoting=True)
    diag = np.abs(np.diag(R))
    scale = diag[0] if diag.size and diag[0] > 0 else 1.0
    rank = int(np.sum(diag > _RANK_TOL * scale))
    keep = np.sort(piv[:rank])
    if rank == me:
        return keep, True
    z_ls, *_ = np.linalg.lstsq(A[keep], b[keep], rcond=None)
    resid = np.abs(A @ z_ls - b).max(initial=0.0)
    consistent = resid <= 1e-7 * max(1.0, np.abs(b).max(initial=0.0))
    return keep, consistent


def _max_step(v: np.ndarray, dv: np.ndarray) -> float:
    """Largest alpha in (0,1] keeping v + alpha*dv >= 0."""
    neg = dv < 0
    if not np.any(neg):
        return 1.0
    return float(min(1.0, np.min(-v[neg] / dv[neg])))


def _polish(inst: QpInstance, keep_eq, z, lam, s, tol):
    """Active-set refinement: re-solve the equality KKT system on the
    estimated active set and accept the result if it is primal/dual clean."""
    n, mi = inst.n, inst.m_in
    act = np.flatnonzero(lam >= s) if mi else np.zeros(0, dtype=int)
    A_r = inst.A[keep_eq]
    Ga = inst.G[act]
    me_r, ma = A_r.shape[0], Ga.shape[0]
    dim = n + me_r + ma
    K = np.zeros((dim, dim))
    K[:n, :n] = inst.Q
    K[:n, n:n + me_r] = A_r.T
    K[n:n + me_r, :n] = A_r
    K[:n, n + me_r:] = Ga.T
    K[n + me_r:, :n] = Ga
    rhs = np.concatenate([-inst.q, inst.b[keep_eq], inst.h[act]])
    try:
        sol = np.linalg.solve(K, rhs)
    except np.linalg.LinAlgError:
        sol, *_ = np.linalg.lstsq(K, rhs, rcond=None)
    if np.abs(K @ sol - rhs).max(initial=0.0) > 1e-8 * max(1.0, np.abs(rhs).max(initial=0.0)):
        return None
    z_p = sol[:n]
    nu_p = np.zeros(inst.m_eq)
    nu_p[keep_eq] = sol[n:n + me_r]
    lam_p = np.zeros(mi)
    lam_p[act] = sol[n + me_r:]
    if lam_p.size and lam_p.min(initial=0.0) < -tol:
        return None
    lam_p = np.maximum(lam_p, 0.0)
    return z_p, nu_p, lam_p


def _classify_failure(inst, keep_eq, z, nu, lam, s, tol) -> str:
    r = kkt_residuals(inst, z, nu, lam)
    dual_norm = max(np.abs(nu).max(initial=0.0), np.abs(lam).max(initial=0.0))
    primal_bad = max(r["primal_eq"], r["primal_in"]) > 1e3 * tol
    if primal_bad and dual_norm > 1e7:
        return INFEASIBLE
    if np.abs(z).max(initial=0.0) > 1e9 and inst.objective(z) < -1e12:
        return UNBOUNDED
    return MAX_ITER


def solve_qp(instance: QpInstance, tol_kkt: float = 1e-8, max_iter: int = 50) -> KktPoint:
    """Solve the QP to the requested absolute KKT tolerance.

    status=optimal guarantees stationarity, primal feasibility and
    complementarity within tol_kkt; deterministic for fixed inputs.
    """
    inst = instance
    n, me, mi = inst.n, inst.m_eq, inst.m_in

    keep_eq, consistent = _eliminate_redundant_rows(inst.A, inst.b)
    if not consistent:
        return KktPoint(np.zeros(n), np.zeros(me), np.zeros(mi), INFEASIBLE, 0)
    A = inst.A[keep_eq]
    b = inst.b[keep_eq]
    me_r = A.shape[0]

    # Row equilibration of the inequality block; duals are rescaled on exit.
    if mi:
        g_scale = np.maximum(np.abs(inst.G).max(axis=1), 1e-12)
        G = inst.G / g_scale[:, None]
        h = inst.h / g_scale
    else:
        g_scale = np.ones(0)
        G = inst.G
        h = inst.h

    Q, q = inst.Q, inst.q

    def finish(z, nu_r, lam_scaled, status, iters):
        nu = np.zeros(me)
        nu[keep_eq] = nu_r
        lam = lam_scaled / g_scale if mi else np.zeros(0)
        if status == OPTIMAL:
            polished = _polish(inst, keep_eq, z, lam, h - G @ z if mi else np.zeros(0),
                               tol_kkt)
            if polished is not None:
                z_p, nu_p, lam_p = polished
                if kkt_residuals(inst, z_p, nu_p, lam_p)["max"] <= max(
                    tol_kkt, kkt_residuals(inst, z, nu, lam)["max"]
                ):
                    return KktPoint(z_p, nu_p, lam_p, OPTIMAL, iters)
        return KktPoint(z, nu, lam, status, iters)

    # No inequalities: one saddle-point solve.
    if mi == 0:
        dim = n + me_r
        K = np.zeros((dim, dim))
        K[:n, :n] = Q
        K[:n, n:] = A.T
        K[n:, :n] = A
        rhs = np.concatenate([-q, b])
        try:
            sol = np.linalg.solve(K, rhs)
        except np.linalg.LinAlgError:
            sol, *_ = np.linalg.lstsq(K, rhs, rcond=None)
        if np.abs(K @ sol - rhs).max(initial=0.0) > 1e-8 * max(1.0, np.abs(rhs).max(initial=0.0)):
            # Stationarity unsolvable with feasible equalities: unbounded below.
            return KktPoint(sol[:n], np.zeros(me), np.zeros(0), UNBOUNDED, 1)
        return finish(sol[:n], sol[n:], np.zeros(0), OPTIMAL, 1)

    # Interior-point initialization.
    reg0 = np.concatenate([np.full(n, 1e-9), np.full(me_r, -1e-9)])
    K0 = np.zeros((n + me_r, n + me_r))
    K0[:n, :n] = Q + np.eye(n)
    K0[:n, n:] = A.T
    K0[n:, :n] = A
    sol0 = _lu_with_refinement(K0, reg0)(np.concatenate([-q, b]))
    z = sol0[:n]
    nu = sol0[n:]
    s_raw = h - G @ z
    shift = max(0.0, -1.5 * s_raw.min(initial=0.0)) + 1.0
    s = s_raw + shift
    lam = np.ones(mi)

    scale = max(1.0, np.abs(q).max(initial=0.0), np.abs(b).max(initial=0.0),
                np.abs(h).max(initial=0.0))
    status = MAX_ITER
    it = 0
    for it in range(1, max_iter + 1):
        r_d = Q @ z + q + A.T @ nu + G.T @ lam
        r_p = A @ z - b
        r_g = G @ z + s - h
        comp = s * lam
        res = max(np.abs(r_d).max(initial=0.0), np.abs(r_p).max(initial=0.0),
                  np.abs(r_g).max(initial=0.0), comp.max(initial=0.0))
        if res <= tol_kkt:
            status = OPTIMAL
            break
        # Near-converged iterates often polish to full tolerance.
        if res <= 1e4 * tol_kkt:
            trial = finish(z, nu, lam, OPTIMAL, it)
            if trial.status == OPTIMAL and kkt_residuals(
                inst, trial.z_star, trial.nu_star, trial.lambda_star
            )["max"] <= tol_kkt:
                return KktPoint(trial.z_star, trial.nu_star, trial.lambda_star,
                                OPTIMAL, it)
        if not np.isfinite(res) or res > 1e14 * scale:
            status = _classify_failure(inst, keep_eq, z, nu, lam, s, tol_kkt)
            return finish(z, nu, lam, status, it)

        mu = comp.mean()
        d = lam / s
        H = Q + G.T @ (d[:, None] * G)
        dim = n + me_r
        K = np.zeros((dim, dim))
        K[:n, :n] = H
        K[:n, n:] = A.T
        K[n:, :n] = A
        reg = np.concatenate([np.full(n, 1e-11 * max(1.0, np.abs(H).max())),
                              np.full(me_r, -1e-11)])
        solver = _lu_with_refinement(K, reg)

        def newton_step(rc):
            rhs1 = -r_d - G.T @ ((-rc + lam * r_g) / s)
            sol = solver(np.concatenate([rhs1, -r_p]))
            dz = sol[:n]
            dnu = sol[n:]
            ds = -r_g - G @ dz
            dlam = (-rc - lam * ds) / s
            return dz, dnu, ds, dlam

        dz_a, dnu_a, ds_a, dlam_a = newton_step(comp)
        a_p = _max_step(s, ds_a)
        a_d = _max_step(lam, dlam_a)
        mu_aff = ((s + a_p * ds_a) @ (lam + a_d * dlam_a)) / mi
        sigma = float(np.clip((max(mu_aff, 0.0) / max(mu, 1e-300)) ** 3, 1e-8, 1.0))

        rc = comp + ds_a * dlam_a - sigma * mu
        dz, dnu, ds, dlam = newton_step(rc)
        a_p = min(1.0, 0.99 * _max_step(s, ds))
        a_d = min(1.0, 0.99 * _max_step(lam, dlam))
        z = z + a_p * dz
        s = s + a_p * ds
        nu = nu + a_d * dnu
        lam = lam + a_d * dlam

    if status != OPTIMAL:
        status = _classify_failure(inst, keep_eq, z, nu, lam, s, tol_kkt)
    return finish(z, nu, lam, status, it)
