"""Second-order expansions of convex functions at touch points of their opening.

Where the opening ``g`` touches ``f``, the Hessian of ``g`` (central
differences of its analytic gradient) is the candidate second derivative of
``f``.  The residuals

    ρ(r) = max_{|y-x|=r} |f(y) - f(x) - <σ, y-x> - ½ (y-x)ᵀ D (y-x)| / r²
    τ(r) = max_{|y-x|=r, σ_y ∈ ∂f(y)} |σ_y - σ - D(y-x)| / r

are tracked along a shrinking radius schedule; decay certifies the point.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import KinkAtCenter, NotTouchPoint, StepUnderflow
from .funcreg import DISAGREE_TOL, as_points, grid_nodes, parse_region, regularize
from .parallel import chunk_bounds, ordered_map

HESSIAN_STEP = 1e-4
DECAY = 0.1
ABS_TOL = 1e-8
ACTIVE_TOL = 1e-9


def default_radii(r0=0.1, levels=9):
    return r0 * 2.0 ** -np.arange(levels)


def sphere_samples(n):
    """64 directions in 2D, 256 in 3D (Fibonacci), the two endpoints in 1D."""
    if n == 1:
        return np.array([[1.0], [-1.0]])
    if n == 2:
        t = 2 * np.pi * np.arange(64) / 64
        return np.column_stack([np.cos(t), np.sin(t)])
    count = 256
    if n == 3:
        k = np.arange(count) + 0.5
        z = 1 - 2 * k / count
        phi = np.pi * (1 + 5**0.5) * k
        rr = np.sqrt(1 - z * z)
        return np.column_stack([rr * np.cos(phi), rr * np.sin(phi), z])
    g = np.random.default_rng(0).normal(size=(count, n))
    return g / np.linalg.norm(g, axis=1, keepdims=True)


def _check_step(delta, h):
    if h > 0.01 * delta:
        raise StepUnderflow("difference step is not small against δ; retry with a smaller step",
                            h=h, delta=delta)


def _central_hessians(g, X, h):
    """Symmetrised central-difference Jacobians of ∇g at rows of ``X``."""
    M, n = X.shape
    eye = np.eye(n)
    probes = np.concatenate([X + h * eye[j] for j in range(n)] + [X - h * eye[j] for j in range(n)])
    G = g.gradients(probes).reshape(2, n, M, n)
    D = ((G[0] - G[1]) / (2 * h)).transpose(1, 2, 0)  # D[m, i, j] = d_j (∇g)_i
    return 0.5 * (D + D.transpose(0, 2, 1))


def hessians(g, X, h=HESSIAN_STEP):
    """Hessian estimates of ``g``; Richardson extrapolation with ``h/2`` when ``δ < 1e-2``."""
    _check_step(g.delta, h)
    D = _central_hessians(g, X, h)
    if g.delta < 1e-2:
        D = (4.0 * _central_hessians(g, X, h / 2) - D) / 3.0
    return D


def hessian_at_touch(f, delta, x, h=HESSIAN_STEP, tol=DISAGREE_TOL, g=None):
    g = regularize(f, delta) if g is None else g
    x = as_points(x, f.dim)[:1]
    gap = float(g.values(x)[0] - f.values(x)[0])
    if gap > tol:
        raise NotTouchPoint("the opening lies strictly above f here", gap=gap)
    return hessians(g, x, h)[0]


def _center_slope(f, x, allow_kink):
    sd = f.subdiff(x, ACTIVE_TOL)
    if not sd.is_singleton(ACTIVE_TOL):
        if not allow_kink:
            raise KinkAtCenter("subdifferential at the center is not a singleton",
                               generators=sd.generators.tolist())
        return sd.generators.mean(axis=0)
    return sd.vector


def _rho(f, X, S, D, radii, dirs):
    """Batched second-order residuals; rows of X, S, D are centers, slopes, matrices."""
    out = np.empty((len(X), len(radii)))
    for k, r in enumerate(radii):
        V = r * dirs
        inc = f.increments(X, V)
        lin = S @ V.T
        quad = 0.5 * np.einsum("di,mij,dj->md", V, D, V)
        out[:, k] = np.max(np.abs(inc - lin - quad), axis=1) / r**2
    return out


def _tau(f, X, S, D, radii, dirs):
    """Batched subgradient residuals over every active generator at each sample."""
    out = np.empty((len(X), len(radii)))
    n = X.shape[1]
    for k, r in enumerate(radii):
        Y = (X[:, None, :] + r * dirs[None]).reshape(-1, n)
        pv = f.piece_values(Y)
        act = pv >= pv.max(axis=1, keepdims=True) - ACTIVE_TOL
        pg = f.piece_gradients(Y).reshape(len(X), len(dirs), f.n_pieces, n)
        V = r * dirs
        base = S[:, None, :] + np.einsum("mij,dj->mdi", D, V)
        res = np.linalg.norm(pg - base[:, :, None, :], axis=3)
        res = np.where(act.reshape(len(X), len(dirs), -1), res, -np.inf)
        out[:, k] = res.max(axis=(1, 2)) / r
    return out


def second_order_residual(f, x, D, radii=None, allow_kink=False):
    radii = default_radii() if radii is None else np.asarray(radii, dtype=float)
    x = as_points(x, f.dim)[:1]
    s = _center_slope(f, x[0], allow_kink)
    return _rho(f, x, s[None], np.atleast_2d(D)[None], radii, sphere_samples(f.dim))[0]


def subgradient_residual(f, x, D, radii=None, allow_kink=False):
    """``τ(r)``; with ``allow_kink`` the mean active gradient stands in for ``σ_x``."""
    radii = default_radii() if radii is None else np.asarray(radii, dtype=float)
    x = as_points(x, f.dim)[:1]
    s = _center_slope(f, x[0], allow_kink)
    return _tau(f, x, s[None], np.atleast_2d(D)[None], radii, sphere_samples(f.dim))[0]


def decays(seq, factor=DECAY, abs_tol=ABS_TOL):
    seq = np.asarray(seq)
    return bool(seq[-1] <= factor * seq[0] or seq[-1] <= abs_tol)


@dataclass
class AlexandrovReport:
    nodes: np.ndarray
    radii: np.ndarray
    touch: np.ndarray
    singleton: np.ndarray
    D: np.ndarray
    rho: np.ndarray
    tau: np.ndarray
    status: list
    volume: float
    settings: dict = field(default_factory=dict)

    @property
    def certified(self):
        return np.array([s == "certified" for s in self.status])

    @property
    def certified_fraction(self):
        return float(self.certified.mean())

    @property
    def non_touch_measure(self):
        return float((~self.touch).mean() * self.volume)

    def summary(self):
        st = np.array(self.status)
        return {
            "nodes": int(len(st)),
            "certified": int(np.sum(st == "certified")),
            "kink": int(np.sum(st == "kink")),
            "inconclusive": int(np.sum(st == "inconclusive")),
            "certified_fraction": self.certified_fraction,
            "non_touch_measure": self.non_touch_measure,
        }


def alexandrov_scan(f, region, delta, grid=50, radii=None, h=HESSIAN_STEP, tol=DISAGREE_TOL,
                    factor=DECAY, abs_tol=ABS_TOL, workers=None, chunk=2048):
    """Classify cell-centred grid nodes as certified, kink or inconclusive."""
    radii = default_radii() if radii is None else np.asarray(radii, dtype=float)
    box = parse_region(region, f.dim)
    nodes, cell = grid_nodes(box, grid)
    g = regularize(f, delta)
    _check_step(delta, h)
    dirs = sphere_samples(f.dim)
    n = f.dim

    def work(bounds):
        lo, hi = bounds
        X = nodes[lo:hi]
        m = len(X)
        touch = g.values(X) - f.values(X) <= tol
        pv = f.piece_values(X)
        act = pv >= pv.max(axis=1, keepdims=True) - ACTIVE_TOL
        pg = f.piece_gradients(X)
        first = pg[np.arange(m), act.argmax(axis=1)]
        spread = np.where(act[..., None], np.abs(pg - first[:, None, :]), 0.0).max(axis=(1, 2))
        single = spread <= ACTIVE_TOL
        D = np.full((m, n, n), np.nan)
        rho = np.full((m, len(radii)), np.nan)
        tau = np.full((m, len(radii)), np.nan)
        ok = touch & single
        if np.any(ok):
            Xo = X[ok]
            Do = hessians(g, Xo, h)
            D[ok] = Do
            rho[ok] = _rho(f, Xo, first[ok], Do, radii, dirs)
            tau[ok] = _tau(f, Xo, first[ok], Do, radii, dirs)
        return touch, single, D, rho, tau

    parts = ordered_map(work, chunk_bounds(len(nodes), chunk), workers)
    touch = np.concatenate([p[0] for p in parts])
    single = np.concatenate([p[1] for p in parts])
    D = np.concatenate([p[2] for p in parts])
    rho = np.concatenate([p[3] for p in parts])
    tau = np.concatenate([p[4] for p in parts])
    status = []
    for i in range(len(nodes)):
        if not single[i]:
            status.append("kink")
        elif touch[i] and decays(rho[i], factor, abs_tol) and decays(tau[i], factor, abs_tol):
            status.append("certified")
        else:
            status.append("inconclusive")
    settings = {"delta": float(delta), "grid": int(grid), "h": h, "tol": tol,
                "decay_factor": factor, "abs_tol": abs_tol}
    return AlexandrovReport(nodes, radii, touch, single, D, rho, tau, status,
                            float(np.prod(box[:, 1] - box[:, 0])), settings)
