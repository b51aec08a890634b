"""Inner parallel bodies, ball-openings and boundary measures.

The opening ``K(r)`` (union of all closed r-balls inside ``K``) is stored as
the inner parallel body ``K_r`` fattened by ``r``.  Membership, projection
and the inner normal field then reduce to nearest-point queries on ``K_r``.
"""

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .core import (
    MEMBER_TOL,
    HPolytope,
    Point,
    VPolygon,
    as_vector,
    minkowski_functional,
)
from .errors import DegenerateBody, InvalidSampleCount, NotOnBoundary, ValidationError
from .parallel import chunk_bounds, chunk_rng, ordered_map

CONTACT_TOL = 1e-9


class BallBody:
    """``core ⊕ radius·B``: every point within ``radius`` of the core body."""

    def __init__(self, core, radius):
        if not radius > 0:
            raise ValidationError("ball radius must be positive", radius=radius)
        self.core = core
        self.radius = float(radius)

    @classmethod
    def ball(cls, center, radius):
        return cls(Point(center), radius)

    @property
    def dim(self):
        return self.core.dim

    @property
    def chebyshev(self):
        if isinstance(self.core, Point):
            return self.core.p.copy(), self.radius
        c, rho = self.core.chebyshev
        return c, rho + self.radius

    def core_distance(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return np.linalg.norm(X - self.core.project_many(X), axis=1)

    def contains(self, x, tol=MEMBER_TOL):
        X = np.asarray(x, dtype=float)
        d = self.core_distance(X.reshape(-1, self.dim))
        inside = d <= self.radius + tol
        return inside[0] if X.ndim == 1 else inside

    def project(self, x):
        return self.project_many(np.atleast_2d(as_vector(x, self.dim)))[0]

    def project_many(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        C = self.core.project_many(X)
        D = X - C
        d = np.linalg.norm(D, axis=1)
        out = X.copy()
        far = d > self.radius
        out[far] = C[far] + self.radius * D[far] / d[far, None]
        return out

    def distance(self, x):
        x = as_vector(x, self.dim)
        return float(np.linalg.norm(x - self.project(x)))

    def support(self, u):
        u = as_vector(u, self.dim)
        val, arg = self.core.support(u)
        return val + self.radius, arg + self.radius * u

    def translate(self, t):
        return BallBody(self.core.translate(t), self.radius)

    def boundary_normal(self, p, tol=1e-9):
        """Inner unit normal ``(project(core, p) - p) / radius`` at ``p`` on the boundary."""
        p = as_vector(p, self.dim)
        c = self.core.project(p)
        d = np.linalg.norm(p - c)
        if abs(d - self.radius) > tol * max(1.0, self.radius):
            raise NotOnBoundary("point is not on the ball-body boundary", offset=float(d - self.radius))
        return (c - p) / self.radius

    def boundary_normals(self, P):
        """Batched inner normals; no boundary check."""
        P = np.atleast_2d(np.asarray(P, dtype=float))
        return (self.core.project_many(P) - P) / self.radius

    def __repr__(self):
        return f"BallBody({self.core!r}, radius={self.radius})"


def _as_hpolytope(K):
    if isinstance(K, VPolygon):
        return K.to_hpolytope()
    return K


def inner_parallel(K, r):
    """Points of ``K`` at distance at least ``r`` from its boundary.

    For a polytope with unit normals this is the offset ``<a_i, x> <= b_i - r``.
    For a ball body ``C ⊕ sB`` it is ``C ⊕ (s - r)B`` when ``r < s`` and the
    inner parallel body of ``C`` at ``r - s`` otherwise.
    """
    if not r > 0:
        raise ValidationError("offset radius must be positive", r=r)
    K = _as_hpolytope(K)
    if isinstance(K, HPolytope):
        _, r_o = K.chebyshev
        if r >= r_o - 1e-12:
            raise DegenerateBody("inner parallel body has empty interior", r=r, r_o=r_o)
        return HPolytope(K.A, K.b - r)
    if isinstance(K, BallBody):
        s = K.radius
        if r < s:
            return BallBody(K.core, s - r)
        if isinstance(K.core, Point):
            if r == s:
                return K.core
            raise DegenerateBody("inner parallel body is empty", r=r, r_o=s)
        return inner_parallel(K.core, r - s)
    raise ValidationError(f"no inner parallel body for {type(K).__name__}")


def opening(K, r):
    """Union of all closed ``r``-balls contained in ``K``."""
    return BallBody(inner_parallel(K, r), r)


def boundary_normal(W, p, tol=1e-9):
    return W.boundary_normal(p, tol)


def boundary_points(W, X):
    """Nearest points of ``∂W`` to points ``X`` lying outside ``W``."""
    return W.project_many(X)


def lambda_factor(K, r, return_center=False):
    """Smallest ``λ`` with ``K ⊂ λ K_r`` after moving the Chebyshev center to 0.

    With ``return_center=True`` the translation (the Chebyshev center that was
    moved to the origin) is returned as well.
    """
    K = _as_hpolytope(K)
    center, _ = K.chebyshev
    Kt = K.translate(-center)
    inner = inner_parallel(Kt, r)
    if isinstance(Kt, HPolytope):
        lam = max(minkowski_functional(inner, v) for v in Kt.vertices)
    else:
        # sup over directions of the support ratio h_K / h_{K_r}
        n = Kt.dim
        if n == 1:
            U = np.array([[1.0], [-1.0]])
        elif n == 2:
            t = np.linspace(0.0, 2 * np.pi, 4096, endpoint=False)
            U = np.column_stack([np.cos(t), np.sin(t)])
        else:
            U = np.random.default_rng(0).normal(size=(8192, n))
            U /= np.linalg.norm(U, axis=1)[:, None]
        lam = max(Kt.support(u)[0] / inner.support(u)[0] for u in U)
    lam = float(max(lam, 1.0))
    return (lam, center) if return_center else lam


# exact 2D decomposition ---------------------------------------------------

@dataclass
class Arc:
    center: np.ndarray
    radius: float
    start: float  # angle of the first endpoint
    span: float  # counterclockwise angular extent

    @property
    def length(self):
        return self.radius * self.span

    def points(self, k=32):
        t = self.start + self.span * np.linspace(0.0, 1.0, k)
        return self.center + self.radius * np.column_stack([np.cos(t), np.sin(t)])


@dataclass
class ContactDecomposition2D:
    """Exact split of ``∂K`` and ``∂K(r)`` for a convex polygon."""

    polygon: VPolygon
    radius: float
    core: np.ndarray  # vertices of K_r, counterclockwise
    segments: list = field(default_factory=list)  # (2, 2) arrays on ∂K ∩ ∂K(r)
    arcs: list = field(default_factory=list)
    boundary: float = 0.0
    contact: float = 0.0
    lost: float = 0.0  # length of ∂K \ ∂K(r)
    rounded: float = 0.0  # length of ∂K(r) \ ∂K
    sym_diff: float = 0.0

    def as_dict(self):
        return {
            "boundary": self.boundary,
            "contact": self.contact,
            "boundary_minus_opening": self.lost,
            "opening_minus_boundary": self.rounded,
            "sym_diff": self.sym_diff,
        }

    def walk(self):
        """Boundary of ``K(r)`` as alternating segments and arcs, counterclockwise."""
        out = []
        for seg, arc in zip(self.segments, self.arcs):
            out.append(("segment", seg))
            out.append(("arc", arc))
        return out


def contact_set_2d(P, r):
    """Exact contact decomposition of a polygon and its ``r``-opening.

    Each side of ``K_r`` pushed out by ``r`` along its normal is a contact
    segment; each vertex of ``K_r`` carries a circular arc of radius ``r``
    spanning the turn between the adjacent side normals.
    """
    if not isinstance(P, VPolygon):
        P = VPolygon(_as_hpolytope(P).vertices)
    H = P.to_hpolytope()
    _, inradius = H.chebyshev
    if not 0 < r < inradius:
        raise DegenerateBody("radius must lie strictly between 0 and the inradius", r=r, inradius=inradius)
    core = HPolytope(H.A, H.b - r)
    V = core.vertices
    m = len(V)
    segs, arcs = [], []
    normals = []
    for j in range(m):
        v, w = V[j], V[(j + 1) % m]
        res = np.abs(H.A @ v - core.b) + np.abs(H.A @ w - core.b)
        i = int(np.argmin(res))
        a = H.A[i]
        segs.append(np.vstack([v + r * a, w + r * a]))
        normals.append(a)
    for j in range(m):
        a_in, a_out = normals[j - 1], normals[j]
        start = np.arctan2(a_in[1], a_in[0])
        span = (np.arctan2(a_out[1], a_out[0]) - start) % (2 * np.pi)
        arcs.append(Arc(V[j], r, float(start), float(span)))
    # arcs[j] sits between segs[j-1] and segs[j]; rotate so arc j follows seg j
    arcs = arcs[1:] + arcs[:1]
    dec = ContactDecomposition2D(P, float(r), V, segs, arcs)
    dec.boundary = P.perimeter
    dec.contact = float(sum(np.linalg.norm(s[1] - s[0]) for s in segs))
    dec.lost = dec.boundary - dec.contact
    dec.rounded = float(sum(a.length for a in arcs))
    dec.sym_diff = dec.lost + dec.rounded
    return dec


def truncated_contact_length(P, r):
    """Per-side formula: side length minus ``r / tan(angle / 2)`` at both ends, clipped at 0."""
    cut = r / np.tan(P.interior_angles / 2.0)
    return float(np.sum(np.maximum(0.0, P.edge_lengths - cut - np.roll(cut, -1))))


def exact_measures(K, r):
    """Exact boundary measures of ``K`` and ``K(r)`` for polytopes in 2D and 3D."""
    K = _as_hpolytope(K)
    if K.dim == 2:
        return contact_set_2d(VPolygon(K.vertices), r).as_dict()
    if K.dim != 3:
        raise ValidationError("exact measures are available in dimensions 2 and 3")
    core = inner_parallel(K, r)
    mesh = core.mesh
    contact = mesh.total_measure
    boundary = K.mesh.total_measure
    # cylinders along edges of K_r plus a full sphere's worth of vertex caps
    owners = {}
    for f, loop in enumerate(mesh.loops):
        for a, b in zip(loop, loop[1:] + loop[:1]):
            owners.setdefault((min(a, b), max(a, b)), []).append(f)
    V = core.vertices
    cyl = 0.0
    for (a, b), fs in owners.items():
        if len(fs) != 2:
            continue
        n1, n2 = mesh.normals[fs[0]], mesh.normals[fs[1]]
        turn = np.arccos(np.clip(n1 @ n2, -1.0, 1.0))
        cyl += np.linalg.norm(V[a] - V[b]) * turn
    rounded = r * cyl + 4 * np.pi * r * r
    lost = boundary - contact
    return {
        "boundary": boundary,
        "contact": contact,
        "boundary_minus_opening": lost,
        "opening_minus_boundary": rounded,
        "sym_diff": lost + rounded,
    }


# Monte Carlo boundary measure --------------------------------------------

class BoundaryEstimate(NamedTuple):
    estimate: float  # H^{n-1}(∂K \ ∂K(r))
    stderr: float
    contact: float  # H^{n-1}(∂K ∩ ∂K(r))
    boundary: float
    samples: int


def boundary_measure_mc(K, r, samples, seed, workers=None, tol=CONTACT_TOL):
    """Monte Carlo estimate of the part of ``∂K`` not touched by ``∂K(r)``.

    Points are drawn uniformly on the facets (probability proportional to the
    exact facet measure) and classified as contact points when their distance
    to ``K_r`` is at most ``r + tol``.  The random stream of each block of
    samples depends only on ``(seed, block index)``.
    """
    K = _as_hpolytope(K)
    if int(samples) != samples or samples < 1:
        raise InvalidSampleCount("sample count must be a positive integer", samples=samples)
    if K.dim not in (2, 3):
        raise ValidationError("boundary sampling is available in dimensions 2 and 3")
    core = inner_parallel(K, r)
    mesh = K.mesh
    total = mesh.total_measure
    core_mesh = core.mesh
    n = K.dim

    def run(bounds):
        idx, (lo, hi) = bounds
        u = chunk_rng(seed, idx).random((hi - lo, n))
        X = mesh.sample(u)
        d = np.linalg.norm(X - core_mesh.project(X), axis=1)
        return int(np.count_nonzero(d <= r + tol))

    hits = sum(ordered_map(run, enumerate(chunk_bounds(int(samples))), workers))
    p = hits / samples
    se = total * np.sqrt(p * (1.0 - p) / samples)
    return BoundaryEstimate(total * (1.0 - p), float(se), total * p, total, int(samples))
