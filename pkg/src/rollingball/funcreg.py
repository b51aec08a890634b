"""Convex max-of-quadratics functions and their epigraph opening.

For a convex ``f`` and a radius ``δ``:

* the erosion ``f^δ(x) = max_{|u|<=δ} f(x+u) + sqrt(δ² - |u|²)`` is the lower
  boundary of the set of centers of ``δ``-balls that fit inside ``epi f``;
* the opening ``g(x) = min_{|u|<=δ} f^δ(x+u) - sqrt(δ² - |u|²)`` is the lower
  boundary of the union of those balls.

``g >= f``, ``g`` is convex with a Lipschitz gradient, and ``g = f`` wherever
a ``δ``-ball inside the epigraph touches the graph.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DomainExceeded, InnerSolveFailure, ValidationError
from .parallel import chunk_bounds, chunk_rng, ordered_map

DISAGREE_TOL = 1e-9
ACTIVE_TOL = 1e-9


def as_points(X, n):
    """Coerce ``X`` to shape (N, n); scalars and flat arrays are accepted in 1D."""
    X = np.asarray(X, dtype=float)
    if n == 1 and X.ndim <= 1:
        return X.reshape(-1, 1)
    if X.ndim == 1:
        return X.reshape(1, -1)
    return X


class PCQFunction:
    """``f(x) = max_i ½ xᵀQ_i x + <a_i, x> + b_i`` with every ``Q_i`` symmetric PSD."""

    def __init__(self, pieces):
        pieces = list(pieces)
        if not pieces:
            raise ValidationError("a PCQ function needs at least one piece")
        a = np.array([np.asarray(p[1], dtype=float).reshape(-1) for p in pieces])
        n = a.shape[1]
        Q = np.array([np.asarray(p[0], dtype=float).reshape(n, n) for p in pieces])
        b = np.array([float(p[2]) for p in pieces])
        for i, Qi in enumerate(Q):
            if np.max(np.abs(Qi - Qi.T), initial=0.0) > 1e-12:
                raise ValidationError("quadratic term is not symmetric", piece=i)
            if np.linalg.eigvalsh(Qi).min() < -1e-10:
                raise ValidationError("quadratic term is not positive semidefinite", piece=i)
        self.Q = 0.5 * (Q + Q.transpose(0, 2, 1))
        self.a = a
        self.b = b
        self.affine = np.all(self.Q == 0.0, axis=(1, 2))
        self.curvature = np.array([np.linalg.eigvalsh(Qi).max() for Qi in self.Q])

    @classmethod
    def max_affine(cls, slopes, offsets):
        slopes = np.atleast_2d(np.asarray(slopes, dtype=float))
        if slopes.shape[0] == 1 and len(np.atleast_1d(offsets)) > 1:
            slopes = slopes.T
        n = slopes.shape[1]
        return cls([(np.zeros((n, n)), s, c) for s, c in zip(slopes, np.atleast_1d(offsets))])

    @classmethod
    def quadratic(cls, Q, a=None, b=0.0):
        Q = np.atleast_2d(np.asarray(Q, dtype=float))
        a = np.zeros(Q.shape[0]) if a is None else a
        return cls([(Q, a, b)])

    @classmethod
    def from_dict(cls, data):
        try:
            pieces = [(p["Q"], p["a"], p["b"]) for p in data["pieces"]]
        except (KeyError, TypeError) as exc:
            raise ValidationError(f"function file is missing field {exc}", field=str(exc)) from exc
        return cls(pieces)

    def to_dict(self):
        return {
            "pieces": [
                {"Q": Q.tolist(), "a": a.tolist(), "b": float(b)}
                for Q, a, b in zip(self.Q, self.a, self.b)
            ]
        }

    @property
    def dim(self):
        return self.a.shape[1]

    @property
    def n_pieces(self):
        return self.b.size

    def piece_values(self, X):
        X = as_points(X, self.dim)
        quad = 0.5 * np.einsum("ni,pij,nj->np", X, self.Q, X)
        return quad + X @ self.a.T + self.b

    def piece_gradients(self, X):
        X = as_points(X, self.dim)
        return np.einsum("pij,nj->npi", self.Q, X) + self.a

    def values(self, X):
        return self.piece_values(X).max(axis=1)

    def __call__(self, x):
        v = self.values(x)
        return float(v[0]) if np.ndim(x) <= (0 if self.dim == 1 else 1) else v

    def increments(self, X, V):
        """``f(x + v) - f(x)`` for rows of ``X`` and every row of ``V``, shape (N, len(V)).

        Each piece contributes ``(q_i(x) - f(x)) + <∇q_i(x), v> + ½ vᵀQ_i v``,
        so the rounding error scales with ``|v|`` rather than with ``|f(x)|``.
        """
        X = as_points(X, self.dim)
        V = as_points(V, self.dim)
        pv = self.piece_values(X)
        gap = pv - pv.max(axis=1, keepdims=True)
        lin = np.einsum("npi,di->ndp", self.piece_gradients(X), V)
        quad = 0.5 * np.einsum("di,pij,dj->dp", V, self.Q, V)
        return np.max(gap[:, None, :] + lin + quad[None], axis=2)

    def gradients(self, X):
        """Gradient of one maximal piece at each point (the gradient a.e.)."""
        X = as_points(X, self.dim)
        k = self.piece_values(X).argmax(axis=1)
        return self.piece_gradients(X)[np.arange(len(X)), k]

    def subdiff(self, x, tol=ACTIVE_TOL):
        x = as_points(x, self.dim)[0]
        vals = self.piece_values(x)[0]
        act = np.flatnonzero(vals >= vals.max() - tol)
        grads = self.piece_gradients(x)[0][act]
        return SubdifferentialSet(_unique_rows(grads), tol)


def _unique_rows(G, tol=1e-12):
    out = []
    for g in G:
        if not any(np.max(np.abs(g - h)) <= tol for h in out):
            out.append(g)
    return np.array(out)


@dataclass
class SubdifferentialSet:
    """Gradients of the active pieces; their convex hull is the subdifferential."""

    generators: np.ndarray
    tol: float

    def is_singleton(self, tol=None):
        tol = self.tol if tol is None else tol
        G = self.generators
        return bool(np.max(np.abs(G - G[0]), initial=0.0) <= max(tol, 1e-12))

    @property
    def vector(self):
        return self.generators[0]


def evaluate(f, x):
    return f(x)


def subdiff(f, x, tol=ACTIVE_TOL):
    return f.subdiff(x, tol)


# erosion ------------------------------------------------------------------

def _smooth_regime(f, delta):
    return np.all(delta * f.curvature < 1.0)


def _eroded_pieces(f, C, delta, order=2):
    """Values, gradients and Hessians of each eroded piece at centers ``C``.

    Affine pieces have the closed form ``<a,c> + b + δ sqrt(1 + |a|²)``.  For
    a quadratic piece the touching point ``z`` solves
    ``z - δ ∇q(z)/sqrt(1+|∇q(z)|²) = c`` (Newton), and then
    ``q^δ(c) = q(z) + δ / sqrt(1+|∇q(z)|²)`` with gradient ``∇q(z)``.
    """
    N, n = C.shape
    p = f.n_pieces
    H = np.empty((N, p))
    G = np.empty((N, p, n))
    Hs = np.zeros((N, p, n, n)) if order >= 2 else None
    eye = np.eye(n)
    for i in range(p):
        Q, a, b = f.Q[i], f.a[i], f.b[i]
        if f.affine[i]:
            H[:, i] = C @ a + b + delta * np.sqrt(1.0 + a @ a)
            G[:, i] = a
            continue
        if delta * f.curvature[i] >= 1.0:
            if order >= 1:
                raise InnerSolveFailure(
                    "piece curvature is at least 1/δ; derivatives of the erosion are not available",
                    piece=i,
                )
        Z = C.copy()
        for _ in range(60):
            g = Z @ Q + a
            sig = np.sqrt(1.0 + np.sum(g * g, axis=1))
            F = Z - delta * g / sig[:, None] - C
            if np.max(np.abs(F)) <= 1e-15 * max(1.0, float(np.max(np.abs(C)))):
                break
            M = eye[None] / sig[:, None, None] - np.einsum("ni,nj->nij", g, g) / sig[:, None, None] ** 3
            J = eye[None] - delta * M @ Q
            Z = Z - np.linalg.solve(J, F[..., None])[..., 0]
        else:
            if np.max(np.abs(F)) > 1e-10 * max(1.0, float(np.max(np.abs(C)))):
                raise InnerSolveFailure("touching-point Newton iteration did not converge", piece=i)
        g = Z @ Q + a
        sig = np.sqrt(1.0 + np.sum(g * g, axis=1))
        H[:, i] = 0.5 * np.einsum("ni,ij,nj->n", Z, Q, Z) + Z @ a + b + delta / sig
        G[:, i] = g
        if order >= 2:
            M = eye[None] / sig[:, None, None] - np.einsum("ni,nj->nij", g, g) / sig[:, None, None] ** 3
            J = eye[None] - delta * M @ Q
            # Q J^{-1}, symmetrised against roundoff
            S = np.linalg.solve(J.transpose(0, 2, 1), np.broadcast_to(Q, J.shape)).transpose(0, 2, 1)
            Hs[:, i] = 0.5 * (S + S.transpose(0, 2, 1))
    return H, G, Hs


def _ascent_erosion(f, i, C, delta, iters=200, seed=0):
    """Multi-start projected gradient ascent of ``q_i(c+u) + sqrt(δ²-|u|²)``."""
    Q, a, b = f.Q[i], f.a[i], f.b[i]
    n = C.shape[1]
    rng = np.random.default_rng(seed)
    r = rng.normal(size=n)
    starts = [np.zeros(n)]
    for k in range(n):
        e = np.zeros(n)
        e[k] = 0.99 * delta
        starts += [e, -e]
    starts.append(0.5 * delta * r / np.linalg.norm(r))
    lim = delta * (1.0 - 1e-12)

    def obj(U):
        Z = C + U
        return 0.5 * np.einsum("ni,ij,nj->n", Z, Q, Z) + Z @ a + b + np.sqrt(np.maximum(delta**2 - np.sum(U * U, axis=1), 0.0))

    def grad(U):
        s = np.sqrt(np.maximum(delta**2 - np.sum(U * U, axis=1), 1e-200))
        return (C + U) @ Q + a - U / s[:, None]

    def proj(U):
        nrm = np.linalg.norm(U, axis=1)
        scale = np.where(nrm > lim, lim / np.maximum(nrm, 1e-300), 1.0)
        return U * scale[:, None]

    best = np.full(len(C), -np.inf)
    for u0 in starts:
        U = np.broadcast_to(u0, C.shape).copy()
        val = obj(U)
        step = np.full(len(C), delta)
        for _ in range(iters):
            gr = grad(U)
            gn = np.maximum(np.linalg.norm(gr, axis=1), 1e-300)
            cand = proj(U + (step / gn)[:, None] * gr)
            cv = obj(cand)
            up = cv > val
            improved = up & (cv - val > 1e-10 * np.maximum(1.0, np.abs(val)))
            U[up] = cand[up]
            val = np.where(up, cv, val)
            step = np.where(up, step, 0.5 * step)
            if not np.any(improved) and np.all(step < 1e-13 * delta):
                break
        best = np.maximum(best, val)
    return best


def erode(f, delta):
    """Return the erosion ``x -> f^δ(x)`` as a vectorised callable."""
    if not delta > 0:
        raise ValidationError("δ must be positive", delta=delta)

    def fdelta(X):
        C = as_points(X, f.dim)
        out = np.full(len(C), -np.inf)
        for i in range(f.n_pieces):
            if not f.affine[i] and delta * f.curvature[i] >= 1.0:
                v = _ascent_erosion(f, i, C, delta)
            else:
                sub = PCQFunction([(f.Q[i], f.a[i], f.b[i])])
                v = _eroded_pieces(sub, C, delta, order=0)[0][:, 0]
            out = np.maximum(out, v)
        return out

    return fdelta


# opening ------------------------------------------------------------------

def _barrier_solve(f, X, delta, tau_final=1e9, center_tol=1e-12):
    """Interior-point solve of ``min_c max_i F_i(c)``, ``F_i = f_i^δ(c) - sqrt(δ²-|c-x|²)``.

    Epigraph form ``min t`` s.t. ``F_i(c) <= t`` with a log barrier, plus a
    barrier keeping ``|c - x| < δ``.  Each point gets its own damped Newton
    iteration; converged points drop out of the batch.  Returns centers and
    barrier dual estimates.
    """
    N, n = X.shape
    d2 = delta * delta
    eye = np.eye(n)

    def terms(C, Xs, order):
        Hh, Gh, Hsh = _eroded_pieces(f, C, delta, order=order)
        U = C - Xs
        s = np.sqrt(np.maximum(d2 - np.sum(U * U, axis=1), 1e-200))
        F = Hh - s[:, None]
        if order == 0:
            return F, None, None, U
        GF = Gh + (U / s[:, None])[:, None, :]
        hs = eye[None] / s[:, None, None] + np.einsum("ni,nj->nij", U, U) / s[:, None, None] ** 3
        return F, GF, Hsh + hs[:, None], U

    def phi(F, U, t, tau):
        slack = t[:, None] - F
        D = d2 - np.sum(U * U, axis=1)
        ok = np.all(slack > 0, axis=1) & (D > 0)
        with np.errstate(divide="ignore", invalid="ignore"):
            val = tau * t - np.sum(np.log(np.where(slack > 0, slack, 1.0)), axis=1) - np.log(np.where(D > 0, D, 1.0))
        return np.where(ok, val, np.inf)

    C = X.copy()
    F0 = terms(C, X, 0)[0]
    t = F0.max(axis=1) + delta
    tau = 1.0 / delta
    while True:
        live = np.arange(N)
        for _ in range(100):
            if live.size == 0:
                break
            Xs, Cs, ts = X[live], C[live], t[live]
            F, GF, HF, U = terms(Cs, Xs, 2)
            w = 1.0 / (ts[:, None] - F)
            D = d2 - np.sum(U * U, axis=1)
            gc = np.einsum("np,npi->ni", w, GF) + 2.0 * U / D[:, None]
            gt = tau - w.sum(axis=1)
            w2 = w * w
            Hm = np.empty((live.size, n + 1, n + 1))
            Hm[:, :n, :n] = (
                np.einsum("np,npi,npj->nij", w2, GF, GF)
                + np.einsum("np,npij->nij", w, HF)
                + 2.0 * eye[None] / D[:, None, None]
                + 4.0 * np.einsum("ni,nj->nij", U, U) / (D * D)[:, None, None]
            )
            Hct = -np.einsum("np,npi->ni", w2, GF)
            Hm[:, :n, n] = Hct
            Hm[:, n, :n] = Hct
            Hm[:, n, n] = w2.sum(axis=1)
            grad = np.concatenate([gc, gt[:, None]], axis=1)
            step = -np.linalg.solve(Hm, grad[..., None])[..., 0]
            dec = -np.sum(grad * step, axis=1)
            keep = dec >= center_tol
            live, Xs, Cs, ts, step, dec, F, U = (live[keep], Xs[keep], Cs[keep], ts[keep],
                                                 step[keep], dec[keep], F[keep], U[keep])
            if live.size == 0:
                break
            val0 = phi(F, U, ts, tau)
            alpha = np.ones(live.size)
            todo = np.arange(live.size)
            for _ in range(60):
                Cn = Cs[todo] + alpha[todo, None] * step[todo, :n]
                tn = ts[todo] + alpha[todo] * step[todo, n]
                Fn, _, _, Un = terms(Cn, Xs[todo], 0)
                val = phi(Fn, Un, tn, tau)
                good = val <= val0[todo] - 0.25 * alpha[todo] * dec[todo] + 1e-13 * np.abs(val0[todo])
                todo = todo[~good]
                if todo.size == 0:
                    break
                alpha[todo] *= 0.5
                tiny = alpha[todo] < 1e-16
                alpha[todo[tiny]] = 0.0
                todo = todo[~tiny]
                if todo.size == 0:
                    break
            C[live] = Cs + alpha[:, None] * step[:, :n]
            t[live] = ts + alpha * step[:, n]
            live = live[alpha > 0]
        if tau >= tau_final:
            break
        tau *= 10.0
    F = terms(C, X, 0)[0]
    lam = (1.0 / (t[:, None] - F)) / tau
    return C, t, lam


def _kkt_polish(f, X, delta, C, lam, rounds=4, iters=12):
    """Newton on the KKT system of ``min t s.t. F_i(c) <= t`` with a fixed active set."""
    N, n = X.shape
    p = f.n_pieces
    d2 = delta * delta
    eye = np.eye(n)

    def terms(C):
        Hh, Gh, Hsh = _eroded_pieces(f, C, delta)
        U = C - X
        s = np.sqrt(np.maximum(d2 - np.sum(U * U, axis=1), 1e-200))
        F = Hh - s[:, None]
        GF = Gh + (U / s[:, None])[:, None, :]
        hs = eye[None] / s[:, None, None] + np.einsum("ni,nj->nij", U, U) / s[:, None, None] ** 3
        return F, GF, Hsh + hs[:, None], U

    act = lam > 1e-6
    C = C.copy()
    L = np.where(act, lam, 0.0)
    L /= L.sum(axis=1, keepdims=True)
    F, _, _, _ = terms(C)
    t = np.max(np.where(act, F, -np.inf), axis=1)
    size = n + 1 + p
    for _ in range(rounds):
        for _ in range(iters):
            F, GF, HF, U = terms(C)
            r = np.zeros((N, size))
            r[:, :n] = np.einsum("np,npi->ni", L, GF)
            r[:, n] = L.sum(axis=1) - 1.0
            r[:, n + 1:] = np.where(act, F - t[:, None], L)
            Jm = np.zeros((N, size, size))
            Jm[:, :n, :n] = np.einsum("np,npij->nij", L, HF)
            Jm[:, :n, n + 1:] = GF.transpose(0, 2, 1)
            Jm[:, n, n + 1:] = 1.0
            Jm[:, n + 1:, :n] = np.where(act[..., None], GF, 0.0)
            Jm[:, n + 1:, n] = np.where(act, -1.0, 0.0)
            diag = np.where(act, 0.0, 1.0)
            Jm[:, n + 1 + np.arange(p), n + 1 + np.arange(p)] = diag
            step = -np.einsum("nij,nj->ni", np.linalg.pinv(Jm), r)
            C = C + step[:, :n]
            t = t + step[:, n]
            L = L + step[:, n + 1:]
            U = C - X
            over = np.sum(U * U, axis=1) >= d2
            if np.any(over):
                C[over] = X[over] + U[over] * (0.999999 * delta / np.linalg.norm(U[over], axis=1))[:, None]
            if np.max(np.abs(r), initial=0.0) < 1e-15:
                break
        F, _, _, _ = terms(C)
        viol = (~act) & (F > t[:, None] + 1e-14)
        neg = act & (L < 0.0)
        if not (np.any(viol) or np.any(neg)):
            break
        act = (act | viol) & ~neg
        L = np.where(act, np.maximum(L, 1e-3), 0.0)
        L /= L.sum(axis=1, keepdims=True)
    return C


class RegularizedFunction:
    """Epigraph opening ``g`` of a PCQ function at radius ``δ``.

    Evaluation solves the convex inner problem over the ball center with an
    interior-point method followed by a KKT Newton polish.  With ``fast=True``
    (default) points whose tangent ``δ``-ball provably fits in the epigraph
    are recognised directly: there ``g = f`` and ``∇g = ∇f``.
    """

    def __init__(self, f, delta, R=None, fast=True):
        if not delta > 0:
            raise ValidationError("δ must be positive", delta=delta)
        if not _smooth_regime(f, delta):
            raise InnerSolveFailure(
                "δ times the largest piece curvature must be below 1",
                delta=delta,
                curvature=float(f.curvature.max()),
            )
        self.f = f
        self.delta = float(delta)
        self.R = None if R is None else float(R)
        self.fast = fast
        self.erosion = erode(f, delta)

    @property
    def dim(self):
        return self.f.dim

    def touch_certificate(self, X):
        """Mask of points where the tangent ball below the graph lies in ``epi f``.

        Only points with a single active piece are tested.
        """
        X = as_points(X, self.dim)
        vals = self.f.piece_values(X)
        top = vals.max(axis=1)
        k = vals.argmax(axis=1)
        single = np.sum(vals >= top[:, None] - ACTIVE_TOL, axis=1) == 1
        g = self.f.piece_gradients(X)[np.arange(len(X)), k]
        sig = np.sqrt(1.0 + np.sum(g * g, axis=1))
        cx = X - self.delta * g / sig[:, None]
        cy = top + self.delta / sig
        fits = cy >= self.erosion(cx) - 1e-13 * np.maximum(1.0, np.abs(cy))
        return single & fits

    def solve(self, X):
        """Values of ``g`` and the optimal ball-center abscissae at points ``X``."""
        X = as_points(X, self.dim)
        if self.R is not None and np.any(np.linalg.norm(X, axis=1) > self.R):
            raise DomainExceeded("evaluation point outside the configured domain", R=self.R)
        g = np.empty(len(X))
        C = np.empty_like(X)
        todo = np.ones(len(X), dtype=bool)
        if self.fast:
            hit = self.touch_certificate(X)
            if np.any(hit):
                Xh = X[hit]
                gr = self.f.gradients(Xh)
                sig = np.sqrt(1.0 + np.sum(gr * gr, axis=1))
                C[hit] = Xh - self.delta * gr / sig[:, None]
                g[hit] = self.f.values(Xh)
                todo = ~hit
        if np.any(todo):
            Xt = X[todo]
            Cb, _, lam = _barrier_solve(self.f, Xt, self.delta)
            Cp = _kkt_polish(self.f, Xt, self.delta, Cb, lam)
            vb = self._objective(Xt, Cb)
            vp = self._objective(Xt, Cp)
            use_p = np.isfinite(vp) & (vp <= vb)
            C[todo] = np.where(use_p[:, None], Cp, Cb)
            g[todo] = np.where(use_p, vp, vb)
        if self.R is not None and np.any(np.linalg.norm(C, axis=1) > self.R):
            raise DomainExceeded("ball center left the configured domain", R=self.R)
        return g, C

    def _objective(self, X, C):
        U = C - X
        D = self.delta**2 - np.sum(U * U, axis=1)
        Hh, _, _ = _eroded_pieces(self.f, C, self.delta, order=0)
        with np.errstate(invalid="ignore"):
            return np.where(D >= 0, Hh.max(axis=1) - np.sqrt(np.maximum(D, 0.0)), np.inf)

    def values(self, X):
        return self.solve(X)[0]

    def __call__(self, x):
        v = self.values(x)
        return float(v[0]) if np.ndim(x) <= (0 if self.dim == 1 else 1) else v

    def value_and_gradient(self, X):
        X = as_points(X, self.dim)
        g, C = self.solve(X)
        U = X - C
        s = np.sqrt(np.maximum(self.delta**2 - np.sum(U * U, axis=1), 1e-200))
        return g, U / s[:, None]

    def gradients(self, X):
        return self.value_and_gradient(X)[1]


def regularize(f, delta, R=None, fast=True):
    return RegularizedFunction(f, delta, R, fast)


# measures -----------------------------------------------------------------

def parse_region(region, n=None):
    """Accept ``"[a,b]^n"``, a list of ``(lo, hi)`` pairs, or a single pair."""
    if isinstance(region, str):
        body, _, power = region.strip().partition("^")
        lo, hi = (float(v) for v in body.strip().strip("[]").split(","))
        k = int(power) if power else (n or 1)
        return np.array([[lo, hi]] * k)
    box = np.asarray(region, dtype=float)
    if box.ndim == 1:
        box = box.reshape(1, 2)
    if n is not None and box.shape[0] == 1 and n > 1:
        box = np.repeat(box, n, axis=0)
    if np.any(box[:, 1] <= box[:, 0]):
        raise ValidationError("region box has an empty side")
    return box


def grid_nodes(box, resolution):
    """Cell-centred nodes: ``resolution`` cells per axis; returns nodes and cell volume."""
    axes = [lo + (np.arange(resolution) + 0.5) * (hi - lo) / resolution for lo, hi in box]
    mesh = np.meshgrid(*axes, indexing="ij")
    nodes = np.column_stack([m.ravel() for m in mesh])
    vol = float(np.prod((box[:, 1] - box[:, 0]) / resolution))
    return nodes, vol


@dataclass
class MeasureEstimate:
    measure: float
    error: float
    method: str
    points: int


def _gap(f, g, X):
    fv = f.values(X)
    gv = g.values(X) if hasattr(g, "values") else np.asarray(g(X))
    return gv - fv


def disagreement_measure(f, g, region, method="grid", resolution=200, seed=0, samples=None,
                         workers=None, tol=DISAGREE_TOL, chunk=4096):
    """Lebesgue measure of ``{x in region : g(x) - f(x) > tol}``.

    ``grid`` uses ``resolution`` cells per axis (midpoint rule); the error bar
    counts the cells whose classification differs from a neighbour's.  ``mc``
    draws ``samples`` uniform points from the counter-based stream.
    """
    box = parse_region(region, f.dim)
    volume = float(np.prod(box[:, 1] - box[:, 0]))
    if method == "grid":
        nodes, cell = grid_nodes(box, resolution)
        parts = ordered_map(lambda b: _gap(f, g, nodes[b[0]:b[1]]) > tol,
                            chunk_bounds(len(nodes), chunk), workers)
        bad = np.concatenate(parts)
        shape = (resolution,) * box.shape[0]
        grid = bad.reshape(shape)
        edge = np.zeros(shape, dtype=bool)
        for ax in range(grid.ndim):
            diff = np.diff(grid, axis=ax)
            lo = [slice(None)] * grid.ndim
            hi = [slice(None)] * grid.ndim
            lo[ax] = slice(0, -1)
            hi[ax] = slice(1, None)
            edge[tuple(lo)] |= diff
            edge[tuple(hi)] |= diff
        return MeasureEstimate(float(bad.sum() * cell), float(edge.sum() * cell), "grid", int(bad.size))
    if method == "mc":
        samples = int(samples or resolution ** box.shape[0])
        span = box[:, 1] - box[:, 0]

        def run(bounds):
            idx, (lo, hi) = bounds
            P = box[:, 0] + chunk_rng(seed, idx).random((hi - lo, box.shape[0])) * span
            return int(np.count_nonzero(_gap(f, g, P) > tol))

        hits = sum(ordered_map(run, enumerate(chunk_bounds(samples, chunk)), workers))
        p = hits / samples
        return MeasureEstimate(volume * p, volume * float(np.sqrt(p * (1 - p) / samples)), "mc", samples)
    raise ValidationError(f"unknown method {method!r}")


def touch_points(f, g, region, tol=DISAGREE_TOL, budget=1000, grad_tol=1e-6):
    """Probe points (grid of about ``budget`` nodes) where ``g - f <= tol``.

    Each returned point has a singleton subdifferential equal to ``∇g`` within
    ``grad_tol``; probes that touch but fail that check are dropped.
    """
    box = parse_region(region, f.dim)
    res = max(2, int(round(budget ** (1.0 / box.shape[0]))))
    X, _ = grid_nodes(box, res)
    gv, grad = g.value_and_gradient(X)
    touch = gv - f.values(X) <= tol
    keep = []
    for x, gr in zip(X[touch], grad[touch]):
        sd = f.subdiff(x, tol=tol)
        if sd.is_singleton(1e-9) and np.max(np.abs(sd.vector - gr)) <= grad_tol:
            keep.append(x)
    return np.array(keep).reshape(-1, f.dim)
