"""Command-line front end: ``rollingball <group> <command> [options]``.

Reports are sorted-key JSON that embed the configuration, the package version
and every tolerance in force, so identical inputs give byte-identical output.
"""

import argparse
import sys
import warnings

import numpy as np

from . import __version__
from .alexandrov import ABS_TOL, DECAY, HESSIAN_STEP, alexandrov_scan, default_radii
from .core import VPolygon
from .errors import ParseError, RollingBallError, ValidationError
from .funcreg import DISAGREE_TOL, disagreement_measure, grid_nodes, parse_region, regularize, touch_points
from .glue import convex_envelope, extend
from .io import (body_from_dict, curves_svg, dumps, error_object, function_from_dict, load_json,
                 mask_svg, opening_svg, read_grid_csv, write_csv)
from .morphology import (CONTACT_TOL, BallBody, boundary_measure_mc, contact_set_2d, exact_measures,
                         inner_parallel, lambda_factor)
from .parallel import THREADS_ENV

EXIT_INPUT = 2
EXIT_COMPUTE = 1


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ParseError(message, field="arguments")


def _region(args, n):
    if getattr(args, "region", None):
        try:
            return parse_region(args.region, n)
        except (ValueError, TypeError) as exc:
            raise ValidationError(f"bad region {args.region!r}", field="region") from exc
    R = getattr(args, "domain", None) or 1.0
    return np.array([[-R, R]] * n)


def _config(args):
    # worker counts and output paths do not influence results
    skip = {"func", "group", "command", "workers", "report", "svg", "plot", "csv", "out"}
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip and not callable(v)}


def _base(args, command, tolerances):
    return {
        "command": command,
        "version": __version__,
        "config": _config(args),
        "tolerances": tolerances,
        "workers_env": THREADS_ENV,
    }


def _positive(value, field):
    if value is None or not value > 0:
        raise ValidationError(f"{field} must be positive", field=field)


# body ---------------------------------------------------------------------

def cmd_body_open(args):
    _positive(args.radius, "radius")
    K = body_from_dict(load_json(args.input))
    r = args.radius
    rep = _base(args, "body open", {"contact": args.contact_tol})
    rep["dim"] = K.dim
    lam, center = lambda_factor(K, r, return_center=True)
    rep["lambda"] = lam
    rep["chebyshev_center"] = center
    if isinstance(K, BallBody):
        rep["core_radius"] = K.radius - r
        W = inner_parallel(K, r)
        rep["opening"] = {"type": "ball", "radius": r, "core": repr(W)}
        return rep, None
    measures = exact_measures(K, r) if K.dim in (2, 3) else None
    rep["measures"] = measures
    if args.samples:
        est = boundary_measure_mc(K, r, args.samples, args.seed, args.workers, args.contact_tol)
        mc = est._asdict()
        if measures is not None:
            mc["sym_diff"] = est.estimate + measures["opening_minus_boundary"]
            mc["z_score"] = (est.estimate - measures["boundary_minus_opening"]) / est.stderr if est.stderr > 0 else 0.0
        rep["mc"] = mc
    svg = None
    if args.svg and K.dim == 2:
        P = K if isinstance(K, VPolygon) else VPolygon(K.vertices)
        dec = contact_set_2d(P, r)
        rep["contact_segments"] = len(dec.segments)
        rep["arcs"] = len(dec.arcs)
        svg = opening_svg(dec)
    return rep, svg


def cmd_body_measure(args):
    _positive(args.radius, "radius")
    K = body_from_dict(load_json(args.input))
    if isinstance(K, BallBody):
        raise ValidationError("boundary sampling needs a polytope", field="type")
    rep = _base(args, "body measure", {"contact": args.contact_tol})
    est = boundary_measure_mc(K, args.radius, args.samples, args.seed, args.workers, args.contact_tol)
    rep["mc"] = est._asdict()
    if K.dim in (2, 3):
        ex = exact_measures(K, args.radius)
        rep["exact"] = ex
        rep["within_3se"] = bool(abs(est.estimate - ex["boundary_minus_opening"]) <= 3 * est.stderr)
    return rep, None


# func ---------------------------------------------------------------------

def cmd_func_regularize(args):
    _positive(args.delta, "delta")
    f = function_from_dict(load_json(args.input))
    box = _region(args, f.dim)
    g = regularize(f, args.delta)
    res = args.grid or (20000 if f.dim == 1 else 200)
    est = disagreement_measure(f, g, box, resolution=res, workers=args.workers, tol=args.tol)
    rep = _base(args, "func regularize", {"disagreement": args.tol})
    rep["dim"] = f.dim
    rep["region"] = box
    rep["disagreement"] = est.measure
    rep["disagreement_error"] = est.error
    rep["grid_points"] = est.points
    probes, _ = grid_nodes(box, 11 if f.dim == 1 else 5)
    gv = g.values(probes)
    rep["probes"] = [
        {"x": x, "f": fv, "erosion": ev, "g": v}
        for x, fv, ev, v in zip(probes, f.values(probes), g.erosion(probes), gv)
    ]
    tp = touch_points(f, g, box, tol=args.tol, budget=1000)
    rep["touch_points"] = int(len(tp))
    svg = None
    if args.plot:
        if f.dim == 1:
            x = np.linspace(box[0, 0], box[0, 1], 401)
            svg = curves_svg(x, {"black": f.values(x), "blue": g.erosion(x), "red": g.values(x)})
        elif f.dim == 2:
            nodes, _ = grid_nodes(box, 60)
            svg = mask_svg(nodes, g.values(nodes) - f.values(nodes) <= args.tol, box)
    return rep, svg


def cmd_func_lusin(args):
    f = function_from_dict(load_json(args.input))
    box = _region(args, f.dim)
    volume = float(np.prod(box[:, 1] - box[:, 0]))
    eps = args.eps if args.eps is not None else 1e-3 * volume
    res = args.grid or (20000 if f.dim == 1 else 200)
    sweep = []
    for k in range(args.levels):
        d = args.delta0 * 2.0 ** -k
        est = disagreement_measure(f, regularize(f, d), box, method=args.method, resolution=res,
                                   seed=args.seed, samples=args.samples, workers=args.workers, tol=args.tol)
        sweep.append({"k": k, "delta": d, "measure": est.measure, "error": est.error})
    m = [s["measure"] for s in sweep]
    below = [s["k"] for s in sweep if s["measure"] < eps]
    rep = _base(args, "func lusin", {"disagreement": args.tol})
    rep.update({
        "region": box,
        "eps": eps,
        "sweep": sweep,
        "monotone": bool(all(b <= a for a, b in zip(m, m[1:]))),
        "first_below_eps": below[0] if below else None,
    })
    return rep, None


def cmd_func_extend(args):
    f = function_from_dict(load_json(args.input))
    H = extend(f, args.r, args.R)
    rep = _base(args, "func extend", {"margin": H.margin})
    rep.update({"m": H.m, "M": H.M, "a": H.a, "b": H.b, "rho": H.rho, "eps": H.eps,
                "outer_radius": H.outer_radius})
    return rep, None


def cmd_envelope(args):
    nodes, phi = read_grid_csv(args.input)
    E = convex_envelope(nodes, phi)
    if args.out:
        header = [f"x{i + 1}" for i in range(nodes.shape[1])] + ["phi", "F"]
        write_csv(args.out, header, np.column_stack([nodes, phi, E.F]))
    rep = _base(args, "envelope", {})
    rep.update({"nodes": int(len(phi)), "hull_vertices": int(len(E.hull_vertices)),
                "max_gap": float(np.max(phi - E.F))})
    return rep, None


def cmd_alexandrov_scan(args):
    _positive(args.delta, "delta")
    f = function_from_dict(load_json(args.input))
    box = _region(args, f.dim)
    radii = default_radii(args.radius0, args.levels)
    rep_ = alexandrov_scan(f, box, args.delta, grid=args.grid, radii=radii, h=args.hessian_step,
                           tol=args.tol, factor=args.decay_factor, abs_tol=args.abs_tol, workers=args.workers)
    rep = _base(args, "alexandrov scan", {"touch": args.tol, "decay_factor": args.decay_factor,
                                          "abs_tol": args.abs_tol, "hessian_step": args.hessian_step})
    rep["region"] = box
    rep["radii"] = radii
    rep["summary"] = rep_.summary()
    if args.csv:
        n = f.dim
        header = [f"x{i + 1}" for i in range(n)] + ["touch", "certified"] \
            + [f"rho{k}" for k in range(len(radii))] + [f"tau{k}" for k in range(len(radii))]
        rows = np.column_stack([rep_.nodes, rep_.touch, rep_.certified, rep_.rho, rep_.tau])
        write_csv(args.csv, header, rows)
    return rep, None


# parser -------------------------------------------------------------------

def build_parser():
    p = _Parser(prog="rollingball", description="Rolling-ball openings of convex bodies and functions.")
    p.add_argument("--version", action="version", version=__version__)
    groups = p.add_subparsers(dest="group", required=True, parser_class=_Parser)

    def common(sp, seed=False):
        sp.add_argument("--input", required=True)
        sp.add_argument("--report")
        sp.add_argument("--workers", type=int, default=None)
        if seed:
            sp.add_argument("--seed", type=int, default=0)

    body = groups.add_parser("body").add_subparsers(dest="command", required=True, parser_class=_Parser)
    sp = body.add_parser("open")
    common(sp, seed=True)
    sp.add_argument("--radius", type=float, required=True)
    sp.add_argument("--samples", type=int, default=100_000)
    sp.add_argument("--svg")
    sp.add_argument("--contact-tol", type=float, default=CONTACT_TOL)
    sp.set_defaults(func=cmd_body_open)
    sp = body.add_parser("measure")
    common(sp, seed=True)
    sp.add_argument("--radius", type=float, required=True)
    sp.add_argument("--samples", type=int, default=100_000)
    sp.add_argument("--contact-tol", type=float, default=CONTACT_TOL)
    sp.set_defaults(func=cmd_body_measure)

    func = groups.add_parser("func").add_subparsers(dest="command", required=True, parser_class=_Parser)
    sp = func.add_parser("regularize")
    common(sp)
    sp.add_argument("--delta", type=float, required=True)
    sp.add_argument("--domain", type=float, help="half-width R of the box [-R, R]^n")
    sp.add_argument("--region")
    sp.add_argument("--grid", type=int)
    sp.add_argument("--plot")
    sp.add_argument("--tol", type=float, default=DISAGREE_TOL)
    sp.set_defaults(func=cmd_func_regularize)
    sp = func.add_parser("lusin")
    common(sp, seed=True)
    sp.add_argument("--eps", type=float)
    sp.add_argument("--delta0", type=float, default=0.2)
    sp.add_argument("--levels", type=int, default=7)
    sp.add_argument("--domain", type=float)
    sp.add_argument("--region")
    sp.add_argument("--grid", type=int)
    sp.add_argument("--method", choices=["grid", "mc"], default="grid")
    sp.add_argument("--samples", type=int)
    sp.add_argument("--tol", type=float, default=DISAGREE_TOL)
    sp.set_defaults(func=cmd_func_lusin)
    sp = func.add_parser("extend")
    common(sp)
    sp.add_argument("--r", type=float, required=True)
    sp.add_argument("--R", type=float, required=True)
    sp.set_defaults(func=cmd_func_extend)

    sp = groups.add_parser("envelope")
    common(sp)
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_envelope, command=None)

    alex = groups.add_parser("alexandrov").add_subparsers(dest="command", required=True, parser_class=_Parser)
    sp = alex.add_parser("scan")
    common(sp)
    sp.add_argument("--delta", type=float, required=True)
    sp.add_argument("--domain", type=float)
    sp.add_argument("--region")
    sp.add_argument("--grid", type=int, default=50)
    sp.add_argument("--csv")
    sp.add_argument("--radius0", type=float, default=0.1)
    sp.add_argument("--levels", type=int, default=9)
    sp.add_argument("--hessian-step", type=float, default=HESSIAN_STEP)
    sp.add_argument("--decay-factor", type=float, default=DECAY)
    sp.add_argument("--abs-tol", type=float, default=ABS_TOL)
    sp.add_argument("--tol", type=float, default=DISAGREE_TOL)
    sp.set_defaults(func=cmd_alexandrov_scan)
    return p


def main(argv=None, stdout=None):
    out = stdout or sys.stdout
    try:
        args = build_parser().parse_args(argv)
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            rep, svg = args.func(args)
        if caught:
            rep["warnings"] = sorted({str(w.message) for w in caught})
        text = dumps(rep)
        if args.report:
            with open(args.report, "w", encoding="utf-8") as fh:
                fh.write(text)
        else:
            out.write(text)
        svg_path = getattr(args, "svg", None) or getattr(args, "plot", None)
        if svg and svg_path:
            with open(svg_path, "w", encoding="utf-8") as fh:
                fh.write(svg)
        return 0
    except (ParseError, ValidationError) as exc:
        out.write(dumps(error_object(exc)))
        return EXIT_INPUT
    except RollingBallError as exc:
        out.write(dumps(error_object(exc)))
        return EXIT_COMPUTE


if __name__ == "__main__":
    sys.exit(main())
