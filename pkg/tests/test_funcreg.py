import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.optimize import brentq, minimize

from rollingball.errors import DomainExceeded, InnerSolveFailure, ValidationError
from rollingball.funcreg import (PCQFunction, RegularizedFunction, disagreement_measure, erode,
                                 evaluate, regularize, subdiff, touch_points)

ABS = PCQFunction.max_affine([[1.0], [-1.0]], [0.0, 0.0])
L1 = PCQFunction.max_affine([[1, 1], [1, -1], [-1, 1], [-1, -1]], [0, 0, 0, 0])


def abs_opening(x, d):
    x = np.abs(np.asarray(x, dtype=float))
    return np.where(x <= d / np.sqrt(2), d * np.sqrt(2) - np.sqrt(np.maximum(d * d - x * x, 0)), x)


def random_pcq(rng, n=2, pieces=4, curv=1.0):
    out = []
    for _ in range(pieces):
        B = rng.normal(size=(n, n))
        Q = B @ B.T
        Q *= curv * rng.uniform(0, 1) / np.linalg.eigvalsh(Q).max()
        out.append((Q, rng.normal(size=n), rng.normal(scale=0.3)))
    return PCQFunction(out)


def brute_erosion(f, x, d, k=401):
    """Dense search over the δ-ball (1D exact grid, 2D polar grid)."""
    n = f.dim
    if n == 1:
        u = np.linspace(-d, d, k)[:, None]
    else:
        rr = np.linspace(0, d, k)
        t = np.linspace(0, 2 * np.pi, k, endpoint=False)
        u = (rr[:, None, None] * np.stack([np.cos(t), np.sin(t)], -1)[None]).reshape(-1, 2)
    v = f.values(x + u) + np.sqrt(np.maximum(d * d - np.sum(u * u, axis=1), 0))
    return v.max()


def dual_max_affine(A, b, d, x):
    """g(x) = max over the simplex of sum λ_i(a_i.x + b_i + δ sqrt(1+|a_i|²)) - δ sqrt(1+|Σλ_i a_i|²)."""
    c = A @ x + b + d * np.sqrt(1 + np.sum(A * A, axis=1))
    fun = lambda l: -(l @ c - d * np.sqrt(1 + np.sum((l @ A) ** 2)))
    best = np.inf
    m = len(b)
    for k in range(m):
        l0 = np.full(m, 0.01)
        l0[k] = 1.0
        l0 /= l0.sum()
        r = minimize(fun, l0, bounds=[(0, 1)] * m, method="SLSQP",
                     constraints=[{"type": "eq", "fun": lambda l: l.sum() - 1}],
                     options={"ftol": 1e-15, "maxiter": 500})
        best = min(best, r.fun)
    return -best


# PCQ functions -------------------------------------------------------------

def test_eval_and_subdiff_examples():
    assert evaluate(ABS, 0.0) == 0.0
    sd = subdiff(ABS, 0.0)
    assert sorted(sd.generators[:, 0]) == [-1.0, 1.0]
    assert not sd.is_singleton()
    half = PCQFunction.quadratic(np.eye(2))
    x = np.array([0.3, -1.2])
    sd = subdiff(half, x)
    assert sd.is_singleton() and np.allclose(sd.vector, x)


def test_active_switch_matches_bisection():
    # max(x, x²): pieces cross at x = 1 (and x = 0)
    f = PCQFunction([([[0.0]], [1.0], 0.0), ([[2.0]], [0.0], 0.0)])
    diff = lambda x: f.piece_values(x)[0, 1] - f.piece_values(x)[0, 0]
    root = brentq(diff, 0.5, 2.0, xtol=1e-15)
    assert root == pytest.approx(1.0, abs=1e-12)
    assert len(subdiff(f, root).generators) == 2
    assert subdiff(f, 1.1).is_singleton() and subdiff(f, 0.9).is_singleton()


def test_pcq_validation():
    with pytest.raises(ValidationError):
        PCQFunction([])
    with pytest.raises(ValidationError):
        PCQFunction([([[1.0, 0.5], [0.0, 1.0]], [0, 0], 0)])
    with pytest.raises(ValidationError):
        PCQFunction([([[-1.0]], [0.0], 0.0)])


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000))
def test_pcq_convexity_and_subgradients(seed):
    rng = np.random.default_rng(seed)
    f = random_pcq(rng, pieces=3)
    X, Y = rng.normal(size=(2, 500, 2))
    assert np.all(f.values((X + Y) / 2) <= (f.values(X) + f.values(Y)) / 2 + 1e-9)
    x = rng.normal(size=2)
    for s in f.subdiff(x, tol=1e-6).generators:
        assert np.all(f.values(Y) >= f(x) + (Y - x) @ s - 1e-5)


# erosion ------------------------------------------------------------------

def test_erosion_examples():
    d = 0.1
    assert erode(ABS, d)(0.0)[0] == pytest.approx(d * np.sqrt(2), abs=1e-15)
    a, b = np.array([0.3, -2.0]), 0.7
    f = PCQFunction.max_affine([a], [b])
    X = np.random.default_rng(0).normal(size=(50, 2))
    assert np.allclose(erode(f, d)(X), X @ a + b + d * np.sqrt(1 + a @ a), atol=1e-14)
    zero = PCQFunction.max_affine([[0.0, 0.0]], [0.0])
    assert np.allclose(erode(zero, d)(X), d)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10_000), st.floats(0.05, 0.9))
def test_erosion_matches_dense_search(seed, d):
    rng = np.random.default_rng(seed)
    f = random_pcq(rng, n=2, pieces=3, curv=1.0)
    fd = erode(f, d)
    for x in rng.normal(size=(3, 2)):
        exact = fd(x)[0]
        dense = brute_erosion(f, x, d, k=301)
        assert dense <= exact + 1e-12
        assert exact - dense < 5e-4
        assert exact >= f(x) + d - 1e-12


def test_erosion_high_curvature_uses_ascent():
    f = PCQFunction.quadratic([[2.0]])  # curvature 2, δ = 0.8 is past 1/curvature
    fd = erode(f, 0.8)
    for x in (-0.5, 0.0, 0.3, 1.0):
        assert fd(x)[0] == pytest.approx(brute_erosion(f, np.array([x]), 0.8, k=200_001), abs=1e-9)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10_000))
def test_erosion_convex(seed):
    rng = np.random.default_rng(seed)
    f = random_pcq(rng, pieces=3)
    fd = erode(f, 0.3)
    X, Y = rng.normal(size=(2, 300, 2))
    assert np.all(fd((X + Y) / 2) <= (fd(X) + fd(Y)) / 2 + 1e-9)


# opening ------------------------------------------------------------------

def test_abs_closed_form():
    d = 0.1
    g = regularize(ABS, d)
    assert g(0.0) == pytest.approx(d * (np.sqrt(2) - 1), abs=1e-12)
    x = np.linspace(-0.3, 0.3, 601)
    assert np.max(np.abs(g.values(x) - abs_opening(x, d))) < 1e-12
    slow = RegularizedFunction(ABS, d, fast=False)
    assert np.max(np.abs(slow.values(x) - abs_opening(x, d))) < 1e-12


def test_quadratic_and_affine_unchanged(rng):
    half = PCQFunction.quadratic(np.eye(2))
    X = rng.uniform(-1, 1, (200, 2))
    g = RegularizedFunction(half, 0.5, fast=False)
    assert np.max(np.abs(g.values(X) - half.values(X))) < 1e-12
    aff = PCQFunction.max_affine([[0.5, -1.0]], [0.2])
    g = RegularizedFunction(aff, 0.3, fast=False)
    assert np.max(np.abs(g.values(X) - aff.values(X))) < 1e-12


def test_max_affine_dual_formula(rng):
    A = rng.normal(size=(5, 2))
    b = rng.normal(scale=0.1, size=5)
    f = PCQFunction.max_affine(A, b)
    d = 0.3
    g = regularize(f, d)
    X = rng.uniform(-1, 1, (25, 2))
    v = g.values(X)
    for x, gv in zip(X, v):
        assert gv == pytest.approx(dual_max_affine(A, b, d, x), abs=1e-10)


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 10_000))
def test_fast_path_agrees_with_full_solve(seed):
    rng = np.random.default_rng(seed)
    f = random_pcq(rng, pieces=4, curv=2.0)
    d = 0.3
    X = rng.uniform(-1, 1, (60, 2))
    a = RegularizedFunction(f, d).values(X)
    b = RegularizedFunction(f, d, fast=False).values(X)
    assert np.max(np.abs(a - b)) < 1e-10


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 10_000))
def test_sandwich_and_convexity(seed):
    rng = np.random.default_rng(seed)
    f = random_pcq(rng, pieces=4, curv=2.0)
    g = regularize(f, 0.25)
    X, Y = rng.uniform(-1, 1, (2, 400, 2))
    gv = g.values(X)
    assert np.all(gv >= f.values(X) - 1e-9)
    assert np.all(gv <= g.erosion(X) + 1e-12)
    mid = g.values((X + Y) / 2)
    assert np.all(mid <= (gv + g.values(Y)) / 2 + 1e-9)


def test_gradient_matches_central_differences(rng):
    f = random_pcq(rng, pieces=4, curv=2.0)
    g = regularize(f, 0.25)
    X = rng.uniform(-1, 1, (100, 2))
    _, G = g.value_and_gradient(X)
    h = 1e-6
    for j in range(2):
        e = np.zeros(2)
        e[j] = h
        fd = (g.values(X + e) - g.values(X - e)) / (2 * h)
        assert np.max(np.abs(fd - G[:, j])) < 1e-6


def test_quadratic_growth_bounds(rng):
    d = 0.2
    for f in (L1, random_pcq(rng, pieces=4, curv=2.0)):
        g = regularize(f, d)
        X = rng.uniform(-0.8, 0.8, (300, 2))
        Y = X + rng.uniform(-0.1, 0.1, X.shape)
        gx, Gx = g.value_and_gradient(X)
        Ms = np.max(np.linalg.norm(np.concatenate([Gx, g.gradients(Y)]), axis=1))
        M = (1 + Ms**2) ** 1.5 * (2 / d)
        dist2 = np.sum((Y - X) ** 2, axis=1)
        assert np.all(np.abs(g.values(Y) - gx - np.sum(Gx * (Y - X), axis=1)) <= M * dist2 + 1e-12)
        # at touch points the same bound holds with f in place of g
        t = gx - f.values(X) <= 1e-9
        lhs = np.abs(f.values(Y[t]) - f.values(X[t]) - np.sum(Gx[t] * (Y[t] - X[t]), axis=1))
        assert np.all(lhs <= M * dist2[t] + 1e-12)


def test_scaling_identity():
    # f̃(x) = λ f(x / λ) has epigraph λ·epi f, so its opening at λδ is x -> λ g(x / λ)
    f = PCQFunction([([[1.0]], [1.0], 0.0), ([[1.0]], [-1.0], 0.0)])
    lam, d = 2.5, 0.2
    ft = PCQFunction([([[1.0 / lam]], [1.0], 0.0), ([[1.0 / lam]], [-1.0], 0.0)])
    x = np.linspace(-0.5, 0.5, 101)
    lhs = regularize(ft, lam * d).values(x)
    rhs = lam * regularize(f, d).values(x / lam)
    assert np.max(np.abs(lhs - rhs)) < 1e-12
    # |x| is its own rescaling, so its opening scales exactly as well
    assert np.allclose(regularize(ABS, lam * d).values(x), lam * abs_opening(x / lam, d), atol=1e-12)


def test_regularize_errors():
    with pytest.raises(InnerSolveFailure):
        regularize(PCQFunction.quadratic([[4.0]]), 0.5)
    with pytest.raises(ValidationError):
        regularize(ABS, 0.0)
    g = regularize(ABS, 0.1, R=1.0)
    with pytest.raises(DomainExceeded):
        g.values(np.array([2.0]))


# measures -----------------------------------------------------------------

def test_disagreement_abs():
    d = 0.1
    est = disagreement_measure(ABS, regularize(ABS, d), "[-1,1]^1", resolution=20_000)
    assert abs(est.measure - np.sqrt(2) * d) <= 1e-4
    assert est.error <= 4e-4


def test_disagreement_affine_zero():
    f = PCQFunction.max_affine([[0.3, 0.1]], [1.0])
    assert disagreement_measure(f, regularize(f, 0.2), "[-1,1]^2", resolution=40).measure == 0.0


def test_disagreement_mc_deterministic_and_consistent():
    g = regularize(ABS, 0.1)
    a = disagreement_measure(ABS, g, [[-1, 1]], method="mc", samples=40_000, seed=5, workers=1)
    b = disagreement_measure(ABS, g, [[-1, 1]], method="mc", samples=40_000, seed=5, workers=3)
    assert a == b
    assert abs(a.measure - np.sqrt(2) * 0.1) <= 4 * a.error


def test_disagreement_l1_sweep_halves():
    ms = []
    for k in range(4):
        d = 0.2 * 2.0**-k
        est = disagreement_measure(L1, regularize(L1, d), "[-1,1]^2", resolution=160)
        ms.append(est)
    for a, b in zip(ms, ms[1:]):
        assert b.measure <= a.measure / 2 + b.error


def test_touch_points_examples():
    d = 0.1
    g = regularize(ABS, d)
    pts = touch_points(ABS, g, "[-1,1]^1", budget=400)
    assert len(pts) > 0
    assert np.all(np.abs(pts[:, 0]) >= d / np.sqrt(2) - 1e-9)
    q = PCQFunction.quadratic(np.eye(2))
    assert len(touch_points(q, regularize(q, 0.5), "[-1,1]^2", budget=400)) == 400
    aff = PCQFunction.max_affine([[1.0, 2.0]], [0.0])
    assert len(touch_points(aff, regularize(aff, 0.5), "[-1,1]^2", budget=400)) == 400
