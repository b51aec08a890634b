"""Convex bodies and the basic convex-analysis kernel.

Bodies are immutable.  Every body exposes ``dim``, ``contains``, ``project``,
``project_many``, ``support`` and ``distance``; the module-level functions
below dispatch on those methods so that :class:`rollingball.morphology.BallBody`
plugs in without special cases.
"""

from functools import cached_property

import numpy as np
from scipy.optimize import linprog
from scipy.spatial import ConvexHull, HalfspaceIntersection, cKDTree

from .errors import (
    DegenerateBody,
    InfeasibleBody,
    NotOnBoundary,
    OriginNotInterior,
    UnboundedBody,
    ValidationError,
)
from .qp import project_halfspaces

NORMAL_TOL = 1e-14
DEGENERATE_RADIUS = 1e-10
MEMBER_TOL = 1e-9


def as_vector(x, dim=None):
    v = np.asarray(x, dtype=float).reshape(-1)
    if not np.all(np.isfinite(v)):
        raise ValidationError("vector has non-finite coordinates", value=v.tolist())
    if dim is not None and v.shape[0] != dim:
        raise ValidationError(f"expected a vector of dimension {dim}, got {v.shape[0]}")
    return v


def _solve_lp(c, A_ub, b_ub):
    res = linprog(c, A_ub=A_ub, b_ub=b_ub, bounds=[(None, None)] * len(c), method="highs")
    return res


class HPolytope:
    """Bounded intersection of halfspaces ``<a_i, x> <= b_i`` with unit normals.

    Normals are normalised on construction.  Boundedness is checked with
    support values in the 2n axis directions and the simplex direction, and a
    body whose Chebyshev radius is at most 1e-10 is rejected as degenerate.
    """

    def __init__(self, A, b, *, validate=True):
        A = np.atleast_2d(np.asarray(A, dtype=float))
        b = np.asarray(b, dtype=float).reshape(-1)
        if A.shape[0] != b.shape[0]:
            raise ValidationError("halfspace normals and offsets differ in count")
        if A.shape[0] == 0:
            raise UnboundedBody("no halfspaces given")
        if not (np.all(np.isfinite(A)) and np.all(np.isfinite(b))):
            raise ValidationError("halfspaces contain non-finite numbers")
        norms = np.linalg.norm(A, axis=1)
        bad = np.flatnonzero(norms < NORMAL_TOL)
        if bad.size:
            raise ValidationError("halfspace normal is (numerically) zero", index=int(bad[0]))
        self.A = A / norms[:, None]
        self.b = b / norms
        self.A.setflags(write=False)
        self.b.setflags(write=False)
        if validate:
            self._validate()

    def _validate(self):
        n = self.dim
        dirs = np.vstack([np.eye(n), -np.eye(n), np.ones((1, n)) / np.sqrt(n)])
        for u in dirs:
            res = _solve_lp(-u, self.A, self.b)
            if res.status == 2:
                raise InfeasibleBody("halfspace system is empty")
            if res.status == 3:
                raise UnboundedBody("body is unbounded", direction=u.tolist())
            if res.status != 0:
                raise InfeasibleBody(f"support LP failed: {res.message}")
        _, radius = self.chebyshev
        if radius <= DEGENERATE_RADIUS:
            raise DegenerateBody("body has empty interior", chebyshev_radius=radius)

    # constructors -------------------------------------------------------
    @classmethod
    def from_rows(cls, rows):
        rows = np.asarray(rows, dtype=float)
        return cls(rows[:, :-1], rows[:, -1])

    @classmethod
    def box(cls, lo, hi):
        lo = np.asarray(lo, dtype=float).reshape(-1)
        hi = np.asarray(hi, dtype=float).reshape(-1)
        n = lo.size
        return cls(np.vstack([np.eye(n), -np.eye(n)]), np.concatenate([hi, -lo]))

    @classmethod
    def from_points(cls, points):
        """Convex hull of points (n >= 2)."""
        pts = np.asarray(points, dtype=float)
        hull = ConvexHull(pts)
        eq = np.unique(np.round(hull.equations, 12), axis=0)
        return cls(eq[:, :-1], -eq[:, -1])

    @classmethod
    def regular_polygon(cls, m, circumradius=1.0, center=(0.0, 0.0), phase=0.0):
        return VPolygon.regular(m, circumradius, center, phase).to_hpolytope()

    # basic properties ---------------------------------------------------
    @property
    def dim(self):
        return self.A.shape[1]

    @cached_property
    def chebyshev(self):
        n = self.dim
        c = np.zeros(n + 1)
        c[-1] = -1.0
        A_ub = np.hstack([self.A, np.ones((self.A.shape[0], 1))])
        res = linprog(c, A_ub=A_ub, b_ub=self.b, bounds=[(None, None)] * n + [(0, None)], method="highs")
        if res.status == 2:
            raise InfeasibleBody("halfspace system is empty")
        if res.status != 0:
            raise UnboundedBody(f"Chebyshev LP failed: {res.message}")
        sol = res.x
        # polish to the exact vertex of the LP when it is uniquely determined
        act = np.flatnonzero(np.abs(A_ub @ sol - self.b) < 1e-8)
        if act.size == n + 1:
            M = A_ub[act]
            if abs(np.linalg.det(M)) > 1e-10:
                sol = np.linalg.solve(M, self.b[act])
        return sol[:n], float(sol[n])

    @cached_property
    def vertices(self):
        n = self.dim
        if n == 1:
            a = self.A[:, 0]
            hi = np.min(self.b[a > 0] / a[a > 0])
            lo = np.max(self.b[a < 0] / a[a < 0])
            return np.array([[lo], [hi]])
        center, _ = self.chebyshev
        hs = HalfspaceIntersection(np.hstack([self.A, -self.b[:, None]]), center)
        pts = _dedupe(hs.intersections)
        if n == 2:
            ang = np.arctan2(*(pts - pts.mean(axis=0))[:, ::-1].T)
            pts = pts[np.argsort(ang)]
        return pts

    @cached_property
    def mesh(self):
        return FacetMesh.from_hpolytope(self)

    # geometry -----------------------------------------------------------
    def contains(self, x, tol=MEMBER_TOL):
        X = np.asarray(x, dtype=float)
        return np.all(X @ self.A.T <= self.b + tol, axis=-1)

    def project(self, x):
        x = as_vector(x, self.dim)
        z, _ = project_halfspaces(self.A, self.b, x)
        return z

    def project_many(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if self.dim in (2, 3):
            return self.mesh.project(X)
        return np.array([self.project(x) for x in X])

    def distance(self, x):
        x = as_vector(x, self.dim)
        return float(np.linalg.norm(x - self.project(x)))

    def support(self, u):
        u = as_vector(u, self.dim)
        V = self.vertices
        vals = V @ u
        i = int(np.argmax(vals))
        return float(vals[i]), V[i].copy()

    def translate(self, t):
        t = as_vector(t, self.dim)
        return HPolytope(self.A, self.b + self.A @ t)

    def offset(self, r):
        """Halfspaces shifted inward by ``r``; no validation."""
        return HPolytope(self.A, self.b - r, validate=False)

    def boundary_measure(self):
        if self.dim == 1:
            return 2.0
        return self.mesh.total_measure

    def __repr__(self):
        return f"HPolytope(m={self.A.shape[0]}, n={self.dim})"


def _dedupe(pts, tol=1e-9):
    pts = np.asarray(pts)
    tol = tol * max(1.0, float(np.max(np.abs(pts))))
    keep = np.ones(len(pts), dtype=bool)
    for i, j in sorted(cKDTree(pts).query_pairs(tol)):
        if keep[i]:
            keep[j] = False
    return pts[keep]


class VPolygon:
    """Strictly convex polygon with counterclockwise vertices."""

    def __init__(self, vertices):
        V = np.asarray(vertices, dtype=float)
        if V.ndim != 2 or V.shape[1] != 2 or V.shape[0] < 3:
            raise ValidationError("a polygon needs at least three 2D vertices")
        if not np.all(np.isfinite(V)):
            raise ValidationError("polygon vertices contain non-finite numbers")
        E = np.roll(V, -1, axis=0) - V
        if np.any(np.linalg.norm(E, axis=1) == 0.0):
            raise ValidationError("duplicate polygon vertex")
        cross = E[:, 0] * np.roll(E, -1, axis=0)[:, 1] - E[:, 1] * np.roll(E, -1, axis=0)[:, 0]
        if np.any(cross <= 0.0):
            raise ValidationError(
                "vertices are not a strictly convex counterclockwise sequence",
                index=int(np.flatnonzero(cross <= 0.0)[0]),
            )
        self.vertices = V
        self.vertices.setflags(write=False)

    @classmethod
    def regular(cls, m, circumradius=1.0, center=(0.0, 0.0), phase=0.0):
        t = phase + 2 * np.pi * np.arange(m) / m
        return cls(np.column_stack([np.cos(t), np.sin(t)]) * circumradius + np.asarray(center))

    @classmethod
    def hull(cls, points):
        pts = np.asarray(points, dtype=float)
        hull = ConvexHull(pts)
        return cls(pts[hull.vertices])  # qhull returns 2D hulls counterclockwise

    dim = 2

    @cached_property
    def edges(self):
        return np.roll(self.vertices, -1, axis=0) - self.vertices

    @cached_property
    def edge_lengths(self):
        return np.linalg.norm(self.edges, axis=1)

    @property
    def perimeter(self):
        return float(self.edge_lengths.sum())

    @property
    def area(self):
        x, y = self.vertices.T
        return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))

    @cached_property
    def interior_angles(self):
        E = self.edges
        prev = -np.roll(E, 1, axis=0)
        cos = np.sum(prev * E, axis=1) / (np.linalg.norm(prev, axis=1) * np.linalg.norm(E, axis=1))
        return np.arccos(np.clip(cos, -1.0, 1.0))

    def to_hpolytope(self):
        E = self.edges
        normals = np.column_stack([E[:, 1], -E[:, 0]])
        normals /= np.linalg.norm(normals, axis=1)[:, None]
        return HPolytope(normals, np.sum(normals * self.vertices, axis=1))

    @cached_property
    def _h(self):
        return self.to_hpolytope()

    @cached_property
    def mesh(self):
        return FacetMesh.from_polygon(self.vertices)

    def contains(self, x, tol=MEMBER_TOL):
        return self._h.contains(x, tol)

    def project(self, x):
        return self.mesh.project(np.atleast_2d(as_vector(x, 2)))[0]

    def project_many(self, X):
        return self.mesh.project(np.atleast_2d(np.asarray(X, dtype=float)))

    def distance(self, x):
        x = as_vector(x, 2)
        return float(np.linalg.norm(x - self.project(x)))

    def support(self, u):
        u = as_vector(u, 2)
        vals = self.vertices @ u
        i = int(np.argmax(vals))
        return float(vals[i]), self.vertices[i].copy()

    @property
    def chebyshev(self):
        return self._h.chebyshev

    def boundary_measure(self):
        return self.perimeter


class Point:
    """A single point; the core of a Euclidean ball viewed as a ball-opening."""

    def __init__(self, p):
        self.p = as_vector(p)

    @property
    def dim(self):
        return self.p.size

    def contains(self, x, tol=MEMBER_TOL):
        X = np.asarray(x, dtype=float)
        return np.linalg.norm(X - self.p, axis=-1) <= tol

    def project(self, x):
        as_vector(x, self.dim)
        return self.p.copy()

    def project_many(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return np.broadcast_to(self.p, X.shape).copy()

    def distance(self, x):
        return float(np.linalg.norm(as_vector(x, self.dim) - self.p))

    def support(self, u):
        u = as_vector(u, self.dim)
        return float(u @ self.p), self.p.copy()

    def translate(self, t):
        return Point(self.p + as_vector(t, self.dim))

    def offset(self, r):
        raise DegenerateBody("a point has no inner parallel body")


class FacetMesh:
    """Boundary of a 2D or 3D polytope as ordered facet loops.

    Used for exact facet measures, uniform boundary sampling and batched
    nearest-point queries.  In 2D every facet is an edge (two vertices).
    """

    def __init__(self, dim, facets, normals, offsets, loops=None):
        self.dim = dim
        self.facets = facets  # list of (k, dim) arrays, ordered loops
        self.loops = loops  # vertex indices of each loop, when known
        self.normals = np.asarray(normals, dtype=float)
        self.offsets = np.asarray(offsets, dtype=float)

    @classmethod
    def from_polygon(cls, V):
        V = np.asarray(V, dtype=float)
        W = np.roll(V, -1, axis=0)
        E = W - V
        nrm = np.column_stack([E[:, 1], -E[:, 0]])
        nrm /= np.linalg.norm(nrm, axis=1)[:, None]
        facets = [np.vstack([v, w]) for v, w in zip(V, W)]
        loops = [[i, (i + 1) % len(V)] for i in range(len(V))]
        return cls(2, facets, nrm, np.sum(nrm * V, axis=1), loops)

    @classmethod
    def from_hpolytope(cls, K):
        V = K.vertices
        if K.dim == 2:
            return cls.from_polygon(V)
        if K.dim != 3:
            raise ValidationError("facet meshes exist for dimensions 2 and 3 only")
        scale = max(1.0, float(np.max(np.abs(V))))
        facets, normals, offsets, loops = [], [], [], []
        seen = set()
        for a, b in zip(K.A, K.b):
            on = np.flatnonzero(np.abs(V @ a - b) <= 1e-9 * scale)
            if on.size < 3:
                continue
            key = tuple(sorted(on.tolist()))
            if key in seen:
                continue
            seen.add(key)
            P = V[on]
            c = P.mean(axis=0)
            e1 = P[0] - c
            e1 /= np.linalg.norm(e1)
            e2 = np.cross(a, e1)
            ang = np.arctan2((P - c) @ e2, (P - c) @ e1)
            order = np.argsort(ang)
            facets.append(P[order])
            loops.append(on[order].tolist())
            normals.append(a)
            offsets.append(b)
        return cls(3, facets, normals, offsets, loops)

    @cached_property
    def simplices(self):
        """Facet triangulation: (tri, dim, dim) points plus per-simplex facet index."""
        if self.dim == 2:
            return np.array(self.facets), np.arange(len(self.facets))
        tris, idx = [], []
        for i, P in enumerate(self.facets):
            for j in range(1, len(P) - 1):
                tris.append(np.vstack([P[0], P[j], P[j + 1]]))
                idx.append(i)
        return np.array(tris), np.array(idx)

    @cached_property
    def simplex_measures(self):
        S, _ = self.simplices
        if self.dim == 2:
            return np.linalg.norm(S[:, 1] - S[:, 0], axis=1)
        return 0.5 * np.linalg.norm(np.cross(S[:, 1] - S[:, 0], S[:, 2] - S[:, 0]), axis=1)

    @cached_property
    def facet_measures(self):
        _, idx = self.simplices
        return np.bincount(idx, weights=self.simplex_measures, minlength=len(self.facets))

    @property
    def total_measure(self):
        return float(self.simplex_measures.sum())

    @cached_property
    def segments(self):
        if self.dim == 2:
            return np.array(self.facets)
        segs = []
        for P in self.facets:
            segs.extend(np.stack([P, np.roll(P, -1, axis=0)], axis=1))
        return np.array(segs)

    def sample(self, u):
        """Map uniforms ``u`` of shape (N, dim) to points uniform on the boundary."""
        S, _ = self.simplices
        cdf = np.cumsum(self.simplex_measures)
        cdf /= cdf[-1]
        k = np.minimum(np.searchsorted(cdf, u[:, 0], side="right"), len(cdf) - 1)
        T = S[k]
        if self.dim == 2:
            t = u[:, 1:2]
            return T[:, 0] + t * (T[:, 1] - T[:, 0])
        s, t = u[:, 1], u[:, 2]
        flip = s + t > 1.0
        s = np.where(flip, 1.0 - s, s)
        t = np.where(flip, 1.0 - t, t)
        return T[:, 0] + s[:, None] * (T[:, 1] - T[:, 0]) + t[:, None] * (T[:, 2] - T[:, 0])

    def project(self, X, tol=1e-12):
        """Batched nearest point of the polytope for each row of ``X``."""
        X = np.asarray(X, dtype=float)
        out = X.copy()
        outside = np.any(X @ self.normals.T > self.offsets + tol, axis=1)
        if not np.any(outside):
            return out
        Y = X[outside]
        best = np.full(Y.shape[0], np.inf)
        best_pt = np.zeros_like(Y)
        # nearest point on every boundary segment (edges in 3D, sides in 2D)
        S = self.segments
        a, d = S[:, 0], S[:, 1] - S[:, 0]
        dd = np.sum(d * d, axis=1)
        for j in range(len(S)):
            t = np.clip((Y - a[j]) @ d[j] / dd[j], 0.0, 1.0)
            P = a[j] + t[:, None] * d[j]
            dist = np.sum((Y - P) ** 2, axis=1)
            better = dist < best
            best[better] = dist[better]
            best_pt[better] = P[better]
        if self.dim == 3:
            for F, nrm, off in zip(self.facets, self.normals, self.offsets):
                P = Y - (Y @ nrm - off)[:, None] * nrm
                E = np.roll(F, -1, axis=0) - F
                inward = np.cross(nrm, E)
                inside = np.all(np.einsum("nk,ek->ne", P, inward) >= np.sum(inward * F, axis=1) - 1e-12, axis=1)
                dist = np.sum((Y - P) ** 2, axis=1)
                better = inside & (dist < best)
                best[better] = dist[better]
                best_pt[better] = P[better]
        out[outside] = best_pt
        return out


# module-level operations -------------------------------------------------

def chebyshev_center(K):
    """Center and radius of a largest ball inscribed in ``K``."""
    if hasattr(K, "chebyshev"):
        return K.chebyshev
    raise ValidationError(f"no Chebyshev center for {type(K).__name__}")


def project(K, x):
    return K.project(x)


def dist_sq_gradient(K, x):
    """Gradient of dist(., K)^2, i.e. 2 (x - project(K, x))."""
    x = as_vector(x, K.dim)
    return 2.0 * (x - K.project(x))


def support(K, u):
    """Support value ``max <u, x>`` over ``K`` and a maximiser."""
    u = as_vector(u, K.dim)
    if abs(np.linalg.norm(u) - 1.0) > 1e-9:
        raise ValidationError("support direction must be a unit vector", norm=float(np.linalg.norm(u)))
    return K.support(u)


def _origin_interior(K):
    if isinstance(K, HPolytope):
        return bool(np.min(K.b) > DEGENERATE_RADIUS)
    zero = np.zeros(K.dim)
    if hasattr(K, "radius") and hasattr(K, "core"):
        return K.core.distance(zero) < K.radius - DEGENERATE_RADIUS
    return bool(K.contains(zero, tol=0.0))


def minkowski_functional(K, x, tol=1e-13):
    """Gauge ``inf{t > 0 : x / t in K}``; requires 0 in the interior of ``K``.

    Exact for polytopes (largest ratio <a_i, x> / b_i); every other body is
    handled by bisection on membership.
    """
    x = as_vector(x, K.dim)
    if not _origin_interior(K):
        raise OriginNotInterior("the origin is not an interior point of the body")
    if isinstance(K, HPolytope):
        return float(max(0.0, np.max(K.A @ x / K.b)))
    if isinstance(K, VPolygon):
        return minkowski_functional(K._h, x)
    return gauge_bisection(K, x, tol)


def gauge_bisection(K, x, tol=1e-13):
    x = as_vector(x, K.dim)
    if np.linalg.norm(x) == 0.0:
        return 0.0
    lo, hi = 0.0, 1.0
    while K.contains(x / hi, tol=0.0):
        hi *= 0.5
        if hi < 1e-300:
            return 0.0
    lo = hi
    hi = lo * 2.0
    while not K.contains(x / hi, tol=0.0):
        lo, hi = hi, hi * 2.0
    # now x/lo outside, x/hi inside
    while hi - lo > tol * hi:
        mid = 0.5 * (lo + hi)
        if K.contains(x / mid, tol=0.0):
            hi = mid
        else:
            lo = mid
    return hi


class SupportingHyperplane:
    def __init__(self, point, normal):
        self.point = point
        self.normal = normal

    def violation(self, X):
        """Largest ``<normal, x - point>`` over rows of ``X``."""
        X = np.atleast_2d(X)
        return float(np.max((X - self.point) @ self.normal))


def supporting_hyperplane(K, p, tol=1e-9):
    """Outward supporting hyperplane of ``K`` at a boundary point ``p``."""
    p = as_vector(p, K.dim)
    if isinstance(K, (HPolytope, VPolygon)):
        H = K if isinstance(K, HPolytope) else K._h
        slack = H.b - H.A @ p
        if np.min(slack) < -tol or np.min(slack) > tol:
            raise NotOnBoundary("point is not on the polytope boundary", slack=float(np.min(slack)))
        act = slack <= tol
        nu = H.A[act].sum(axis=0)
        return SupportingHyperplane(p, nu / np.linalg.norm(nu))
    if hasattr(K, "boundary_normal"):
        return SupportingHyperplane(p, -K.boundary_normal(p))
    raise ValidationError(f"no supporting hyperplane for {type(K).__name__}")
