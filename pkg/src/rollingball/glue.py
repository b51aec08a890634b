"""Smooth maximum, convex extension from a ball, barrier patchwork and grid envelopes."""

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize
from scipy.spatial import ConvexHull, QhullError

from .errors import CoercivityWarning, DegenerateGrid, DomainExceeded, MarginFailure, ValidationError

MARGIN = 0.5


def theta(t):
    """Even convex bump: ``(t² + 1)/2`` on ``|t| < 1`` and ``|t|`` elsewhere."""
    t = np.asarray(t, dtype=float)
    a = np.abs(t)
    out = np.where(a < 1.0, 0.5 * (t * t + 1.0), a)
    return out if out.ndim else float(out)


def theta_prime(t):
    t = np.asarray(t, dtype=float)
    out = np.where(np.abs(t) < 1.0, t, np.sign(t))
    return out if out.ndim else float(out)


def smooth_max(x, y):
    """``M(x, y) = (x + y + θ(x - y))/2``; returns ``max(x, y)`` itself when ``|x - y| >= 1``."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    d = x - y
    near = np.abs(d) < 1.0
    out = np.where(near, 0.5 * (x + y + 0.5 * (d * d + 1.0)), np.maximum(x, y))
    return out if out.ndim else float(out)


def smooth_max_compose(u, v):
    """Return ``x -> M(u(x), v(x))``; convex whenever ``u`` and ``v`` are."""
    def composed(X):
        return smooth_max(u(X), v(X))

    return composed


def _radial(X, n):
    X = np.asarray(X, dtype=float)
    if n == 1 and X.ndim <= 1:
        X = X.reshape(-1, 1)
    elif X.ndim == 1:
        X = X.reshape(1, -1)
    return X


def sphere_directions(n, count=None):
    """Deterministic unit directions: ±1 in 1D, evenly spaced in 2D, Fibonacci sphere in 3D+."""
    if n == 1:
        return np.array([[1.0], [-1.0]])
    if n == 2:
        count = count or 720
        t = 2 * np.pi * np.arange(count) / count
        return np.column_stack([np.cos(t), np.sin(t)])
    count = count or 4096
    if n == 3:
        k = np.arange(count) + 0.5
        z = 1 - 2 * k / count
        phi = np.pi * (1 + 5**0.5) * k
        rr = np.sqrt(1 - z * z)
        return np.column_stack([rr * np.cos(phi), rr * np.sin(phi), z])
    g = np.random.default_rng(0).normal(size=(count, n))
    return g / np.linalg.norm(g, axis=1, keepdims=True)


def _ball_min(h, n, r, samples):
    """Minimum of ``h`` over the closed ball of radius ``r``.

    Dense radial sampling followed by an SLSQP polish from the best sample;
    for convex ``h`` the polish reaches the true minimum.
    """
    dirs = sphere_directions(n)
    radii = np.linspace(0.0, r, samples)
    P = (radii[:, None, None] * dirs[None]).reshape(-1, n)
    vals = np.asarray(h(P), dtype=float)
    k = int(np.argmin(vals))
    best = float(vals[k])
    try:
        res = minimize(
            lambda x: float(np.asarray(h(x[None]))[0]),
            P[k],
            method="SLSQP",
            constraints=[{"type": "ineq", "fun": lambda x: r * r - x @ x}],
            options={"ftol": 1e-14, "maxiter": 500},
        )
        if res.success and res.x @ res.x <= r * r * (1 + 1e-12):
            best = min(best, float(res.fun))
    except (ValueError, ArithmeticError):
        pass
    return best


def _sphere_max(h, n, rho):
    dirs = sphere_directions(n)
    vals = np.asarray(h(rho * dirs), dtype=float)
    return float(vals.max())


@dataclass
class GluedFunction:
    """``H = M(h, q)`` on ``|x| <= ρ`` and ``H = q`` outside, with ``q = a|x|² - b``."""

    h: object
    dim: int
    r: float
    R: float
    rho: float
    a: float
    b: float
    m: float
    M: float
    eps: float
    margin: float = MARGIN

    def q(self, X):
        X = _radial(X, self.dim)
        return self.a * np.sum(X * X, axis=1) - self.b

    def values(self, X):
        X = _radial(X, self.dim)
        nr = np.linalg.norm(X, axis=1)
        out = self.q(X)
        inside = nr <= self.rho
        if np.any(inside):
            out[inside] = smooth_max(np.asarray(self.h(X[inside]), dtype=float), out[inside])
        return out

    def __call__(self, X):
        return self.values(X)

    @property
    def outer_radius(self):
        return self.rho + self.eps


def extend(h, r, R, dim=1, samples=400, margin=MARGIN):
    """Convex extension ``H`` of ``h`` from ``B(0, r)`` that is quadratic far out.

    ``m`` (min of ``h`` on the r-ball) and ``M`` (max on the ρ-sphere) are
    estimated by dense sampling plus a local solve; the inequalities
    ``q < m - 1`` on ``|x| <= r`` and ``q > M + 1`` on ``|x| = ρ`` are then
    checked by probes, raising ``MarginFailure`` if either fails.
    """
    if not 0 < r < R:
        raise ValidationError("extension needs 0 < r < R", r=r, R=R)
    if hasattr(h, "values") and hasattr(h, "dim"):
        dim = h.dim
        fn = h.values
    else:
        fn = h
    rho = 0.5 * (r + R)
    m = _ball_min(fn, dim, r, samples)
    M = _sphere_max(fn, dim, rho)
    a = (M - m + 2.0 + margin) / (rho * rho - r * r)
    b = a * r * r - (m - 1.0 - margin / 2.0)
    H = GluedFunction(fn, dim, r, R, rho, a, b, m, M, 0.0, margin)

    dirs = sphere_directions(dim)
    inner = np.concatenate([t * dirs for t in np.linspace(0.0, r, 50)])
    if not np.all(H.q(inner) < np.asarray(fn(inner)) - 1.0):
        raise MarginFailure("quadratic is not below h - 1 on the inner ball", m=m)
    if not np.all(H.q(rho * dirs) > np.asarray(fn(rho * dirs)) + 1.0):
        raise MarginFailure("quadratic is not above h + 1 on the switch sphere", M=M)
    H.eps = _outer_eps(fn, H, dirs)
    return H


def _outer_eps(fn, H, dirs, steps=64):
    """Width ``ε > 0`` of the overlap annulus ``ρ <= |x| <= ρ + ε`` where ``q - h >= 1``.

    There ``M(h, q) = q``, so the two branches of ``H`` agree on the overlap.
    Radii are scanned up to ``R`` and the first failure is refined by bisection.
    """
    def ok(t):
        return float(np.min(H.q(t * dirs) - np.asarray(fn(t * dirs)))) >= 1.0

    lo = H.rho
    for t in np.linspace(H.rho, H.R, steps + 1)[1:]:
        if ok(t):
            lo = t
            continue
        hi = t
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            if ok(mid):
                lo = mid
            else:
                hi = mid
        break
    return lo - H.rho


def psi(s):
    """``ψ(s) = 0`` for ``s <= 0`` and ``s²/(1 - s)`` for ``0 <= s < 1``."""
    s = np.asarray(s, dtype=float)
    pos = np.clip(s, 0.0, None)
    with np.errstate(divide="ignore"):
        out = np.where(s <= 0, 0.0, pos * pos / (1.0 - pos))
    return out if out.ndim else float(out)


def barrier(k):
    """Return ``θ_k(t) = ψ(k - 1 - t) + ψ(t - k)`` on ``(k - 2, k + 1)``."""
    def theta_k(t):
        t = np.asarray(t, dtype=float)
        if np.any((t <= k - 2) | (t >= k + 1)):
            raise DomainExceeded("barrier evaluated outside its annulus", k=k)
        out = psi(k - 1 - t) + psi(t - k)
        return out if np.ndim(out) else float(out)

    theta_k.k = k
    return theta_k


@dataclass
class PatchworkFunction:
    """``φ = min_k φ_k`` with ``φ_k = g_k + θ_k(|x|)`` on ``k-2 < |x| < k+1``."""

    f: object
    regularizers: list
    K: int
    dim: int = 1

    def pieces(self, X):
        X = _radial(X, self.dim)
        nr = np.linalg.norm(X, axis=1)
        out = np.full((len(X), self.K), np.inf)
        for k in range(1, self.K + 1):
            inside = (nr > k - 2) & (nr < k + 1)
            if np.any(inside):
                g = self.regularizers[k - 1]
                gv = g.values(X[inside]) if hasattr(g, "values") else np.asarray(g(X[inside]))
                out[inside, k - 1] = gv + barrier(k)(nr[inside])
        return out

    def values(self, X):
        return self.pieces(X).min(axis=1)

    def __call__(self, X):
        return self.values(X)


def patchwork(f, regularizers, K):
    """Assemble the annulus patchwork; warns if ``f`` fails a coercivity probe."""
    regularizers = list(regularizers)
    if len(regularizers) < K:
        raise ValidationError("need one regularizer per annulus", have=len(regularizers), K=K)
    n = f.dim
    dirs = sphere_directions(n)
    outer = float(np.min(f.values(K * dirs)))
    inner = float(np.min(f.values(np.concatenate([t * dirs for t in np.linspace(0, 1, 20)]))))
    if not outer > inner:
        warnings.warn("coercivity probe failed: f is not larger on |x| = K than inside the unit ball",
                      CoercivityWarning, stacklevel=2)
    return PatchworkFunction(f, regularizers, K, n)


@dataclass
class EnvelopeFunction:
    """Lower convex hull of lifted grid samples."""

    nodes: np.ndarray
    phi: np.ndarray
    F: np.ndarray
    hull_vertices: np.ndarray
    facets: list = field(default_factory=list)

    @property
    def dim(self):
        return self.nodes.shape[1]


def _lower_hull_1d(x, y):
    """Andrew's monotone chain, lower part; returns hull vertex indices."""
    order = np.argsort(x, kind="stable")
    hull = []
    for i in order:
        while len(hull) >= 2:
            o, a = hull[-2], hull[-1]
            cross = (x[a] - x[o]) * (y[i] - y[o]) - (y[a] - y[o]) * (x[i] - x[o])
            if cross <= 0:
                hull.pop()
            else:
                break
        hull.append(i)
    return np.array(hull)


def convex_envelope(nodes, phi):
    """Lower convex envelope of samples ``phi`` at grid ``nodes`` (1D or 2D)."""
    nodes = np.asarray(nodes, dtype=float)
    if nodes.ndim == 1:
        nodes = nodes[:, None]
    phi = np.asarray(phi, dtype=float)
    if not np.all(np.isfinite(phi)):
        raise ValidationError("envelope samples must be finite")
    n = nodes.shape[1]
    if n == 1:
        x = nodes[:, 0]
        if np.unique(x).size < 2:
            raise DegenerateGrid("need at least two distinct nodes")
        hv = _lower_hull_1d(x, phi)
        F = np.interp(x, x[hv], phi[hv])
        return EnvelopeFunction(nodes, phi, F, hv, [(int(a), int(b)) for a, b in zip(hv[:-1], hv[1:])])
    if n != 2:
        raise ValidationError("envelopes are supported in 1D and 2D only", dim=n)
    lifted = np.column_stack([nodes, phi])
    try:
        hull = ConvexHull(lifted)
    except QhullError as exc:
        raise DegenerateGrid("lifted nodes are degenerate") from exc
    eq = hull.equations
    lower = eq[:, 2] < -1e-12
    if not np.any(lower):
        raise DegenerateGrid("no lower facets")
    # facet plane  nx x + ny y + nz z + c = 0  ->  z = -(nx x + ny y + c)/nz
    planes = -eq[lower][:, [0, 1, 3]] / eq[lower][:, 2:3]
    F = np.max(nodes @ planes[:, :2].T + planes[:, 2], axis=1)
    F = np.minimum(F, phi)
    verts = np.unique(hull.simplices[lower].ravel())
    return EnvelopeFunction(nodes, phi, F, verts, [tuple(s) for s in hull.simplices[lower]])


def second_difference(F, x, h, domain=None):
    """``E_h(x) = F(x + h) + F(x - h) - 2 F(x)`` for a callable ``F``."""
    x = np.asarray(x, dtype=float)
    h = np.asarray(h, dtype=float)
    if domain is not None:
        lo, hi = np.asarray(domain, dtype=float).T if np.ndim(domain) == 2 else domain
        for p in (x + h, x - h):
            if np.any(p < np.asarray(lo) - 1e-15) or np.any(p > np.asarray(hi) + 1e-15):
                raise DomainExceeded("second difference leaves the domain")
    return F(x + h) + F(x - h) - 2.0 * F(x)


def grid_second_difference_ratio(values, step, max_shift=None):
    """Max of ``E_h / h²`` over a 1D uniform grid for all shifts ``h = j·step``."""
    v = np.asarray(values, dtype=float)
    n = v.size
    max_shift = max_shift or (n - 1) // 2
    best = -np.inf
    for j in range(1, max_shift + 1):
        e = v[2 * j:] + v[:-2 * j] - 2.0 * v[j:-j]
        best = max(best, float(e.max()) / (j * step) ** 2)
    return best
