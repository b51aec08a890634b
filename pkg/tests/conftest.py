import itertools

import numpy as np
import pytest

from rollingball.core import HPolytope, VPolygon


def random_polygon(rng, m=8, spread=1.0):
    """Hull of random points on a jittered circle; always has a fat interior."""
    t = np.sort(rng.uniform(0, 2 * np.pi, m))
    rad = spread * rng.uniform(0.6, 1.4, m)
    pts = np.column_stack([rad * np.cos(t), rad * np.sin(t)]) + rng.normal(scale=0.3, size=2)
    return VPolygon.hull(pts)


def random_polytope(rng, n):
    if n == 2:
        return random_polygon(rng).to_hpolytope()
    pts = rng.normal(size=(14, n))
    pts /= np.linalg.norm(pts, axis=1, keepdims=True)
    pts *= rng.uniform(0.7, 1.3, (14, 1))
    return HPolytope.from_points(pts + rng.normal(scale=0.2, size=n))


def kkt_projection(A, b, x, tol=1e-9):
    """Projection by enumerating active sets of size <= n (exact KKT check)."""
    if np.all(A @ x <= b + tol):
        return x.copy()
    n = A.shape[1]
    best = None
    for k in range(1, n + 1):
        for S in itertools.combinations(range(len(b)), k):
            AS = A[list(S)]
            G = AS @ AS.T
            if abs(np.linalg.det(G)) < 1e-12:
                continue
            lam = np.linalg.solve(G, AS @ x - b[list(S)])
            if np.any(lam < -tol):
                continue
            z = x - AS.T @ lam
            if np.all(A @ z <= b + tol):
                d = np.linalg.norm(z - x)
                if best is None or d < best[0]:
                    best = (d, z)
    return best[1]


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def square():
    return HPolytope.box([-1, -1], [1, 1])


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
