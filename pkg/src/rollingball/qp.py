"""Nearest-point projection onto {z : A z <= b} by the Goldfarb-Idnani dual method.

The objective is 0.5 |z - x|^2, so the Hessian is the identity and every
primal step is a null-space projection of the entering constraint normal.
Starting from the unconstrained minimiser (z = x), violated constraints are
added one at a time while dual feasibility (multipliers >= 0) is kept.
"""

import numpy as np

from .errors import ConvergenceFailure, InfeasibleBody

MAX_ITER = 10_000


def project_halfspaces(A, b, x, tol=1e-12, max_iter=MAX_ITER):
    """Project ``x`` onto the polyhedron ``{z : A z <= b}``.

    Parameters
    ----------
    A : array, shape (m, n)
        Constraint normals; rows are assumed to have unit length.
    b : array, shape (m,)
        Offsets.
    x : array, shape (n,)
        Point to project.
    tol : float
        Feasibility tolerance, scaled by ``max(1, |x|, max|b|)``.

    Returns
    -------
    z : array, shape (n,)
        The projection.
    active : list of int
        Indices of constraints in the final working set.
    """
    x = np.asarray(x, dtype=float)
    z = x.copy()
    scale = max(1.0, float(np.max(np.abs(x))), float(np.max(np.abs(b))))
    feas_tol = tol * scale
    active = []
    u = np.zeros(0)
    it = 0
    while True:
        slack = b - A @ z
        p = int(np.argmin(slack))
        if slack[p] >= -feas_tol:
            return z, active
        n_plus = -A[p]
        u_plus = np.append(u, 0.0)
        while True:
            it += 1
            if it > max_iter:
                raise ConvergenceFailure(
                    "projection did not terminate", iterations=max_iter
                )
            k = len(active)
            if k:
                N = -A[active]
                r = np.linalg.solve(N @ N.T, N @ n_plus)
                d = n_plus - N.T @ r
            else:
                r = np.zeros(0)
                d = n_plus
            dn = float(d @ n_plus)
            s_p = float(A[p] @ z - b[p])  # > 0 while p is violated
            t2 = s_p / dn if dn > 1e-14 else np.inf
            t1 = np.inf
            drop = -1
            for j in range(k):
                if r[j] > 1e-14:
                    ratio = u_plus[j] / r[j]
                    if ratio < t1:
                        t1, drop = ratio, j
            if not np.isfinite(t1) and not np.isfinite(t2):
                raise InfeasibleBody("halfspace system is infeasible")
            if not np.isfinite(t2):
                # dual-only step: n_plus lies in the span of the working set
                u_plus[:k] -= t1 * r
                u_plus[k] += t1
                del active[drop]
                u_plus = np.delete(u_plus, drop)
                continue
            t = min(t1, t2)
            z = z + t * d
            u_plus[:k] -= t * r
            u_plus[k] += t
            if t2 <= t1:
                active.append(p)
                u = u_plus
                break
            del active[drop]
            u_plus = np.delete(u_plus, drop)
