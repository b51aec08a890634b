"""Acceptance criteria 1-10, each at its stated tolerance and runtime budget.

Every criterion prints one ``criterion N: PASS|FAIL ...`` line; the lines are
also collected into the pytest terminal summary.
"""

import io
import json
import time

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES, random_polygon, random_polytope
from rollingball.alexandrov import alexandrov_scan, decays, subgradient_residual
from rollingball.cli import main
from rollingball.core import HPolytope, VPolygon
from rollingball.funcreg import PCQFunction, disagreement_measure, regularize
from rollingball.glue import convex_envelope, extend, grid_second_difference_ratio, smooth_max
from rollingball.morphology import (boundary_measure_mc, contact_set_2d, lambda_factor, opening)


def report(k, ok, detail, elapsed, budget):
    line = f"criterion {k}: {'PASS' if ok else 'FAIL'} ({elapsed:.1f}s of {budget}s) {detail}"
    print(line)
    ACCEPTANCE_LINES.append(line)


def test_criterion_1_projection_contraction():
    t0 = time.perf_counter()
    rng = np.random.default_rng(101)
    worst = -np.inf
    for i in range(20):
        n = 2 if i < 10 else 3
        K = random_polytope(rng, n)
        X = rng.normal(scale=3.0, size=(500, n))
        Y = rng.normal(scale=3.0, size=(500, n))
        gap = np.linalg.norm(K.project_many(X) - K.project_many(Y), axis=1) - np.linalg.norm(X - Y, axis=1)
        worst = max(worst, float(gap.max()))
    el = time.perf_counter() - t0
    ok = worst <= 1e-9 and el < 10
    report(1, ok, f"max(|πx-πy| - |x-y|) = {worst:.3e} over 10^4 pairs", el, 10)
    assert ok


def test_criterion_2_square_opening():
    t0 = time.perf_counter()
    K = HPolytope.box([-1, -1], [1, 1])
    dec = contact_set_2d(VPolygon(K.vertices), 0.25)
    est = boundary_measure_mc(K, 0.25, 1_000_000, seed=2024)
    el = time.perf_counter() - t0
    z = abs(est.estimate - dec.lost) / est.stderr
    ok = (abs(dec.contact - 6.0) <= 1e-12 and abs(dec.sym_diff - (2 + np.pi / 2)) <= 1e-12
          and z <= 3 and el < 30)
    report(2, ok, f"contact {dec.contact!r}, sym_diff {dec.sym_diff!r}, "
                  f"MC {est.estimate:.5f} ± {est.stderr:.5f} (z = {z:.2f})", el, 30)
    assert ok


def test_criterion_3_decay_and_chain():
    t0 = time.perf_counter()
    rng = np.random.default_rng(303)
    ok = True
    worst_chain = -np.inf
    for _ in range(10):
        P = random_polygon(rng)
        ro = P.chebyshev[1]
        lost, first_small = [], None
        for k in range(13):
            r = 2.0**-k
            if r >= ro:
                continue
            dec = contact_set_2d(P, r)
            lost.append(dec.lost)
            if first_small is None and dec.lost < 0.01 * dec.boundary:
                first_small = k
            lam = lambda_factor(P, r)
            worst_chain = max(worst_chain, dec.boundary - lam * dec.contact)
        ok &= all(b <= a + 1e-12 for a, b in zip(lost, lost[1:]))
        ok &= first_small is not None
    el = time.perf_counter() - t0
    ok = ok and worst_chain <= 1e-9 and el < 60
    report(3, ok, f"monotone decay below 1% by k<=12 for 10 polygons; "
                  f"max(H(∂K) - λ·contact) = {worst_chain:.3e}", el, 60)
    assert ok


def test_criterion_4_normal_lipschitz():
    t0 = time.perf_counter()
    rng = np.random.default_rng(404)
    worst = -np.inf
    for _ in range(5):
        H = random_polygon(rng).to_hpolytope()
        r = 0.3 * H.chebyshev[1]
        W = opening(H, r)
        B = W.project_many(rng.normal(scale=5.0, size=(20_000, 2)))
        N = W.boundary_normals(B)
        i, j = np.arange(0, 20_000, 2), np.arange(1, 20_000, 2)
        excess = np.linalg.norm(N[i] - N[j], axis=1) - (2 / r) * np.linalg.norm(B[i] - B[j], axis=1)
        worst = max(worst, float(excess.max()))
    el = time.perf_counter() - t0
    ok = worst <= 1e-9 and el < 30
    report(4, ok, f"max(|ν(p)-ν(q)| - (2/r)|p-q|) = {worst:.3e} over 5 x 10^4 pairs", el, 30)
    assert ok


def test_criterion_5_regularizer_closed_form():
    t0 = time.perf_counter()
    f = PCQFunction.max_affine([[1.0], [-1.0]], [0.0, 0.0])
    d = 0.1
    g = regularize(f, d)
    g0 = g(0.0)
    est = disagreement_measure(f, g, "[-1,1]^1", resolution=20_000)
    X = np.random.default_rng(505).uniform(-1, 1, 100_000)
    below = float(np.min(g.values(X) - f.values(X)))
    el = time.perf_counter() - t0
    ok = (abs(g0 - d * (np.sqrt(2) - 1)) <= 1e-8 and abs(est.measure - np.sqrt(2) * d) <= 1e-4
          and below >= -1e-9 and el < 30)
    report(5, ok, f"g(0) = {g0!r}, disagreement {est.measure!r} vs {np.sqrt(2) * d:.6f}, "
                  f"min(g - f) = {below:.2e}", el, 30)
    assert ok


def _lusin_functions():
    rng = np.random.default_rng(606)
    A = rng.normal(size=(5, 2))
    b = rng.normal(scale=0.3, size=5)
    return {
        "|x|": (PCQFunction.max_affine([[1.0], [-1.0]], [0.0, 0.0]), "[-1,1]^1", "grid"),
        "|x1|+|x2|": (PCQFunction.max_affine([[1, 1], [1, -1], [-1, 1], [-1, -1]], [0, 0, 0, 0]), "[-1,1]^2", "mc"),
        "max 5 affine": (PCQFunction.max_affine(A, b), "[-1,1]^2", "mc"),
    }


_SWEEP = {}


def _lusin_sweep():
    if _SWEEP:
        return _SWEEP
    t0 = time.perf_counter()
    for name, (f, region, method) in _lusin_functions().items():
        vol = 2.0**f.dim
        ms = []
        for k in range(7):
            d = 0.2 * 2.0**-k
            est = disagreement_measure(f, regularize(f, d), region, method=method, resolution=20_000,
                                       samples=100_000, seed=66)
            ms.append(est)
        _SWEEP[name] = (ms, 1e-3 * vol)
    _SWEEP["elapsed"] = time.perf_counter() - t0
    return _SWEEP


def test_criterion_6_lusin_sweep_monotone():
    sweep = _lusin_sweep()
    el = sweep["elapsed"]
    mono, below, parts = True, True, []
    for name, (ms, eps) in ((k, v) for k, v in sweep.items() if k != "elapsed"):
        m = [e.measure for e in ms]
        mono &= all(b <= a for a, b in zip(m, m[1:]))
        hit = [k for k, v in enumerate(m) if v < eps]
        below &= bool(hit)
        parts.append(f"{name}: k=6 measure {m[-1]:.5f} ± {ms[-1].error:.5f} vs eps {eps:.3f}")
    ok = mono and below and el < 300
    report(6, ok, f"monotone={mono}, below eps by k<=6={below}; " + "; ".join(parts), el, 300)
    assert mono and el < 300


@pytest.mark.xfail(strict=True, reason="the disagreement measure scales like c·δ with c >= √2, so "
                   "δ = 0.2·2^-6 cannot reach 10^-3·|region| (see decisions ledger)")
def test_criterion_6_lusin_sweep_threshold():
    sweep = _lusin_sweep()
    for name, (ms, eps) in ((k, v) for k, v in sweep.items() if k != "elapsed"):
        assert any(e.measure < eps for e in ms), name


def test_criterion_7_smooth_max_and_extension():
    t0 = time.perf_counter()
    rng = np.random.default_rng(707)
    x = rng.uniform(-100, 100, 100_000)
    y = x + rng.choice([-1, 1], 100_000) * rng.uniform(1, 50, 100_000)
    exact = np.array_equal(smooth_max(x, y), np.maximum(x, y))
    H = extend(lambda X: np.asarray(X, float).reshape(-1) ** 2, 1.0, 2.0, dim=1)
    p = rng.uniform(-1, 1, 100_000)
    inner = np.array_equal(H.values(p), p**2)
    far = rng.uniform(H.outer_radius, 20, 50_000) * rng.choice([-1, 1], 50_000)
    outer = np.array_equal(H.values(far), H.q(far))
    X, Y = rng.uniform(-5, 5, (2, 100_000))
    conv = float(np.max(H.values((X + Y) / 2) - (H.values(X) + H.values(Y)) / 2))
    el = time.perf_counter() - t0
    ok = exact and inner and outer and conv <= 1e-9 and el < 30
    report(7, ok, f"eq-max exact={exact}, H=h inside={inner}, H=q beyond ρ+ε={outer} "
                  f"(ρ={H.rho}, ε={H.eps:.4f}), max midpoint excess {conv:.2e}", el, 30)
    assert ok


def _envelope_ratio(n):
    x = np.linspace(-2, 2, n)
    phi = np.minimum((x + 1) ** 2, (x - 1) ** 2)
    E = convex_envelope(x, phi)
    step = x[1] - x[0]
    shifts = max(1, int(round(0.05 / step)))
    return x, phi, E, grid_second_difference_ratio(E.F, step, shifts), grid_second_difference_ratio(phi, step, shifts)


def test_criterion_8_envelope():
    t0 = time.perf_counter()
    x, phi, E, rF, rphi = _envelope_ratio(4001)
    F = E.F
    f0 = float(F[2000])
    consecutive = bool(np.all(F[2:] + F[:-2] - 2 * F[1:-1] >= -1e-12))
    rng = np.random.default_rng(808)
    ijk = np.sort(rng.integers(0, len(x), (100_000, 3)), axis=1)
    ijk = ijk[(ijk[:, 0] < ijk[:, 1]) & (ijk[:, 1] < ijk[:, 2])]
    i, j, k = ijk.T
    w = (x[j] - x[i]) / (x[k] - x[i])
    triples = bool(np.all(F[j] <= (1 - w) * F[i] + w * F[k] + 1e-12))
    _, _, _, rF2, rphi2 = _envelope_ratio(8001)
    el = time.perf_counter() - t0
    ok = (abs(f0) <= 1e-6 and consecutive and triples and rF <= rphi + 1e-6 and rF2 <= rphi2 + 1e-6
          and bool(np.all(F <= phi)) and el < 60)
    report(8, ok, f"F(0) = {f0!r}, convex={consecutive and triples}, sup E_h/h²: F {rF:.4f} <= φ {rphi:.4f}; "
                  f"refined F {rF2:.4f} <= φ {rphi2:.4f}", el, 60)
    assert ok


def test_criterion_9_alexandrov():
    t0 = time.perf_counter()
    Q = np.array([[1.5, 0.3], [0.3, 0.8]])
    quad = PCQFunction.quadratic(Q, [0.2, -0.1], 0.0)
    rq = alexandrov_scan(quad, "[-1,1]^2", 0.2, grid=30)
    dq = float(np.max(np.abs(rq.D - Q)))
    f = PCQFunction.max_affine([[1.0], [-1.0]], [0.0, 0.0])
    d, grid = 0.05, 400
    ra = alexandrov_scan(f, "[-1,1]^1", d, grid=grid)
    bad = np.abs(ra.nodes[~ra.certified, 0])
    confined = bool(np.all(bad < d / np.sqrt(2) + 2.0 / grid))
    cert = ra.certified
    decay = all(decays(r) and decays(t) for r, t in zip(ra.rho[cert], ra.tau[cert]))
    relu = PCQFunction.max_affine([[0.0], [1.0]], [0.0, 0.0])
    tau = subgradient_residual(relu, 0.0, [[0.0]], allow_kink=True)
    el = time.perf_counter() - t0
    ok = rq.certified_fraction == 1.0 and dq <= 1e-5 and confined and decay and bool(np.all(tau >= 0.5)) and el < 120
    report(9, ok, f"quadratic certified {rq.certified_fraction:.3f} with |D-Q| = {dq:.1e}; |x|: "
                  f"{int((~cert).sum())} uncertified nodes, max |x| {bad.max():.4f} < {d / np.sqrt(2) + 2 / grid:.4f}; "
                  f"kink min τ = {tau.min():.3f}", el, 120)
    assert ok


def _commands(tmp):
    square = tmp / "square.json"
    square.write_text(json.dumps({"type": "hpolytope", "halfspaces": [[1, 0, 1], [-1, 0, 1], [0, 1, 1], [0, -1, 1]]}))
    absf = tmp / "abs.json"
    absf.write_text(json.dumps({"pieces": [{"Q": [[0]], "a": [1], "b": 0}, {"Q": [[0]], "a": [-1], "b": 0}]}))
    l1 = tmp / "l1.json"
    l1.write_text(json.dumps({"pieces": [{"Q": [[0, 0], [0, 0]], "a": a, "b": 0}
                                         for a in ([1, 1], [1, -1], [-1, 1], [-1, -1])]}))
    x = np.linspace(-2, 2, 401)
    grid = tmp / "grid.csv"
    np.savetxt(grid, np.column_stack([x, np.minimum((x + 1) ** 2, (x - 1) ** 2)]), delimiter=",",
               header="x,phi", comments="")
    return [
        ["body", "open", "--input", str(square), "--radius", "0.25", "--samples", "300000", "--seed", "9"],
        ["body", "measure", "--input", str(square), "--radius", "0.25", "--samples", "300000", "--seed", "9"],
        ["func", "regularize", "--input", str(l1), "--delta", "0.1", "--grid", "60"],
        ["func", "lusin", "--input", str(l1), "--levels", "3", "--method", "mc", "--samples", "20000",
         "--seed", "4"],
        ["func", "extend", "--input", str(absf), "--r", "1", "--R", "2"],
        ["envelope", "--input", str(grid)],
        ["alexandrov", "scan", "--input", str(l1), "--delta", "0.05", "--region", "[-1,1]^2", "--grid", "40"],
    ]


def test_criterion_10_determinism(tmp_path, monkeypatch):
    t0 = time.perf_counter()
    same = []
    for argv in _commands(tmp_path):
        outs = []
        for workers in ("1", "4", "1"):
            monkeypatch.setenv("ROLLINGBALL_THREADS", workers)
            buf = io.StringIO()
            assert main(argv, stdout=buf) == 0
            outs.append(buf.getvalue().encode())
        same.append(outs[0] == outs[1] == outs[2])
    el = time.perf_counter() - t0
    ok = all(same) and el < 60
    report(10, ok, f"{sum(same)}/{len(same)} commands byte-identical across reruns at 1 and 4 workers", el, 60)
    assert ok


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-q", "-s"]))
