"""Command-line front end: validate, smooth, verify, sweep.

Exit codes: 0 success, 1 a check or build failed, 2 bad input.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .approximation import (
    CSV_FIELDS,
    PiecewiseAffineMap,
    SmoothedMap,
    build_xi,
    choose_deltas,
    clamp_delta,
    norm_linf_diff,
    norm_w1p_diff,
)
from .complex_core import validate_complex
from .construction_2d import DisjointnessError as Disjoint2D
from .construction_3d import DisjointnessError as Disjoint3D
from .construction_3d import PreconditionError
from .files import InputError, load_map, load_mesh
from .fixtures import MESHES, vertex_images
from .verification import (
    DEFAULT_SPECS,
    LEMMATA,
    REPAIRED_LEMMATA,
    SuperposedStage,
    check_c1,
    check_disjointness,
    check_injectivity,
    check_jacobian,
    check_normal_derivatives,
    check_stage_order,
    check_subsimplex_preservation,
    check_uniform_gradient_bound,
    convergence_sweep,
    fit_rate,
    support_measure_sweep,
)

log = logging.getLogger("pinchsmooth")

ALL_CHECKS = ("normal", "c1", "injectivity", "preservation", "support", "gradient", "jacobian", "order",
              "disjointness", "negative", "disjointness-literal")
DEFAULT_CHECKS = ALL_CHECKS[:9]
EXIT_OK, EXIT_FAIL, EXIT_INPUT = 0, 1, 2


class _InputArgError(Exception):
    pass


def _floats(text):
    try:
        return [float(v) for v in str(text).split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def build_parser():
    p = argparse.ArgumentParser(prog="pinchsmooth", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, need_map=True):
        sp.add_argument("--mesh", required=True, help="mesh JSON file, or builtin:NAME (%s)" % ", ".join(MESHES))
        g = sp.add_mutually_exclusive_group(required=need_map)
        g.add_argument("--map", help="piecewise affine map JSON file")
        g.add_argument("--builtin", help="builtin map: identity, shear2d, twist3d, random-seeded")
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--out", help="output directory")

    sp = sub.add_parser("validate", help="check the mesh and the map's compatibility")
    common(sp)

    for name, helptext in (("smooth", "build f∘Ξ and write sampled fields plus a norm report"),
                           ("verify", "run certification checks"),
                           ("sweep", "norm reports over a width sweep with fitted rates")):
        sp = sub.add_parser(name, help=helptext)
        common(sp)
        mode = sp.add_mutually_exclusive_group(required=(name == "smooth"))
        mode.add_argument("--delta", type=_floats, help="pinch width (a comma list for sweep)")
        mode.add_argument("--eps", type=float, help="target W^{1,p} error (smooth only)")
        sp.add_argument("--p", type=_floats, default=None, help="exponent(s), default 2 (sweep: 1,2)")
        sp.add_argument("--grid", type=int, default=21, help="samples per axis for field output")
        sp.add_argument("--checks", "--check", dest="checks", default=",".join(DEFAULT_CHECKS),
                        help="comma list from: " + ", ".join(ALL_CHECKS))
        sp.add_argument("--target", choices=("smoothed", "pa", "xi"), default="smoothed",
                        help="map the c1 check runs on")
    return p


# -- loading -------------------------------------------------------------------
def _load(args):
    if args.mesh.startswith("builtin:"):
        name = args.mesh.split(":", 1)[1]
        if name not in MESHES:
            raise InputError(f"unknown builtin mesh {name!r}; choose from {sorted(MESHES)}")
        cx = MESHES[name]()
        mesh_bytes = name.encode()
    else:
        cx = load_mesh(args.mesh)
        mesh_bytes = Path(args.mesh).read_bytes()
    if getattr(args, "map", None):
        f = load_map(args.map, cx)
        map_bytes = Path(args.map).read_bytes()
    elif getattr(args, "builtin", None):
        try:
            f = PiecewiseAffineMap.from_vertex_images(cx, vertex_images(args.builtin, cx, args.seed))
        except KeyError as exc:
            raise InputError(str(exc.args[0])) from None
        map_bytes = args.builtin.encode()
    else:
        f = PiecewiseAffineMap.from_vertex_images(cx, cx.vertices)
        map_bytes = b"identity"
    return cx, f, hashlib.sha256(mesh_bytes).hexdigest(), hashlib.sha256(map_bytes).hexdigest()


def _config(args, mesh_hash, map_hash):
    cfg = {k: v for k, v in vars(args).items() if k not in ("out",)}
    cfg.update(mesh_sha256=mesh_hash, map_sha256=map_hash)
    text = json.dumps(cfg, sort_keys=True, default=str)
    return cfg, hashlib.sha256(text.encode()).hexdigest()[:16]


def _header(cfg_hash, seed, extra=()):
    lines = [f"# config_hash={cfg_hash}", f"# seed={seed}"]
    lines += [f"# {line}" for line in extra]
    return "\n".join(lines) + "\n"


def _outdir(args):
    out = Path(args.out or ".")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write(path, text, quiet=False):
    Path(path).write_text(text)
    if not quiet:
        print(f"wrote {path}")


# -- commands ----------------------------------------------------------------
def cmd_validate(args):
    cx, f, _, _ = _load(args)
    problems = [str(v) for v in validate_complex(cx)] + f.check()
    for line in problems:
        print("violation:", line)
    if problems:
        return EXIT_FAIL
    print(f"ok: {cx.n_simplices} simplices in dimension {cx.dimension}, map orientation {f.orientation:+d}")
    return EXIT_OK


def _resolve_width(args, cx, f):
    """Width(s) and metadata from δ- or ε-mode, after clamping to the caps."""
    meta = {}
    p = (args.p or [2.0])[0]
    if args.eps is not None:
        deltas, info = choose_deltas(cx, f, args.eps, p, seed=args.seed)
        meta.update(mode="eps", eps=args.eps, p=p, halvings=info["halvings"], verified_error=info["error"])
        width = float(deltas.min()) if cx.dimension == 2 else deltas
    else:
        if len(args.delta) != 1:
            raise _InputArgError("smooth and verify take a single --delta")
        meta.update(mode="delta", requested_delta=args.delta[0])
        width = args.delta[0]
    if not np.all(np.asarray(width) > 0):
        raise _InputArgError("--delta must be positive")
    width, clamped = clamp_delta(cx, width)
    meta["clamped"] = clamped
    if clamped:
        print(f"warning: delta clamped to {float(np.min(width)):.6g} (admissible cap)", file=sys.stderr)
    meta["delta"] = float(np.min(width)) if cx.dimension == 2 else np.asarray(width).tolist()
    return width, meta


def _grid(cx, n):
    lo, hi = cx.vertices.min(0), cx.vertices.max(0)
    axes = [np.linspace(a, b, n) for a, b in zip(lo, hi)]
    pts = np.stack(np.meshgrid(*axes, indexing="ij"), -1).reshape(-1, cx.dimension)
    return pts[cx.locate(pts) >= 0]


def cmd_smooth(args):
    cx, f, mh, fh = _load(args)
    cfg, h = _config(args, mh, fh)
    width, meta = _resolve_width(args, cx, f)
    xi = build_xi(cx, width, seed=args.seed)
    ft = SmoothedMap(f, xi)
    x = _grid(cx, args.grid)
    vals, Dft, J, cell = ft.evaluate(x)
    fx = f(x, cell)
    y = xi(x)
    n = cx.dimension
    cols = ([f"x{i}" for i in range(n)] + [f"f{i}" for i in range(n)] + [f"ftilde{i}" for i in range(n)]
            + [f"xi{i}" for i in range(n)] + [f"dxi{i}{j}" for i in range(n) for j in range(n)]
            + [f"dftilde{i}{j}" for i in range(n) for j in range(n)])
    data = np.hstack([x, fx, vals, y, J.reshape(len(x), -1), Dft.reshape(len(x), -1)])
    buf = io.StringIO()
    buf.write(_header(h, args.seed))
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols)
    w.writerows([[f"{v:.17g}" for v in row] for row in data])
    out = _outdir(args)
    _write(out / "samples.csv", buf.getvalue())
    ps = args.p or [2.0]
    rep = norm_w1p_diff(ft, ps)
    rep.linf, pt = norm_linf_diff(f, ft, 20_000, args.seed)
    rep.linf_point = pt
    extra = [f"{k}={json.dumps(v)}" for k, v in meta.items()]
    _write(out / "report.csv", _header(h, args.seed, extra) + rep.to_csv())
    meta.update(config=cfg, config_hash=h, seed=args.seed, w1p={str(k): v for k, v in rep.w1p.items()},
                linf=rep.linf, support_fraction=rep.support_fraction, sup_jacobian=rep.sup_jacobian)
    _write(out / "meta.json", json.dumps(meta, indent=2, sort_keys=True, default=str) + "\n")
    for row in rep.rows():
        print(", ".join(f"{k}={row[k]:.6g}" for k in CSV_FIELDS))
    return EXIT_OK


def _family(cx, width):
    return [build_xi(cx, np.asarray(width) / 2**k, certify=False) for k in range(4)]


def cmd_verify(args):
    cx, f, mh, fh = _load(args)
    cfg, h = _config(args, mh, fh)
    if args.delta is None and args.eps is None:
        args.delta = [0.05 if cx.dimension == 2 else 0.1]
    width, meta = _resolve_width(args, cx, f)
    checks = [c.strip() for c in args.checks.split(",") if c.strip()]
    unknown = set(checks) - set(ALL_CHECKS)
    if unknown:
        raise _InputArgError(f"unknown checks {sorted(unknown)}; choose from {ALL_CHECKS}")
    seeded = {k: replace(v, seed=args.seed) for k, v in DEFAULT_SPECS.items()}
    xi = build_xi(cx, width, seed=args.seed)
    ft = SmoothedMap(f, xi)
    certs = []
    for c in checks:
        if c == "normal":
            certs.append(check_normal_derivatives(xi, cx, seeded["normal"]))
        elif c == "c1":
            target = {"smoothed": ft, "pa": f, "xi": xi}[args.target]
            certs.append(check_c1(target, cx, seeded["c1"]))
        elif c == "injectivity":
            certs.append(check_injectivity(xi, cx, seeded["injectivity"]))
        elif c == "preservation":
            certs.append(check_subsimplex_preservation(xi, cx, seeded["preservation"]))
        elif c == "support":
            ds = [float(np.max(width)) / 2**k for k in range(4)]
            certs.append(support_measure_sweep(cx, ds, seeded["support"]))
        elif c == "gradient":
            certs.append(check_uniform_gradient_bound(_family(cx, width), cx, seeded["gradient"]))
        elif c == "jacobian":
            certs.append(check_jacobian(ft, cx, seeded["jacobian"]))
        elif c == "order":
            certs.append(check_stage_order(xi, seeded["order"]))
        elif c in ("disjointness", "disjointness-literal"):
            if cx.dimension == 3:
                sets = LEMMATA if c == "disjointness-literal" else REPAIRED_LEMMATA
                certs.append(check_disjointness(xi, seeded["disjointness"], sets))
        elif c == "negative":
            m = next(iter(xi.maps))
            bad = SuperposedStage([m, m])
            inner = check_injectivity(bad, cx, replace(seeded["injectivity"], n_samples=100_000,
                                                        extra={"n_jac": 10_000}), xi=bad)
            # the control passes when the deliberately overlapping pair is caught
            certs.append(replace(inner, check="negative_control", passed=not inner.passed))
    text = _header(h, args.seed, [f"{k}={json.dumps(v)}" for k, v in meta.items()])
    text += "".join(c.line() + "\n" for c in certs)
    print(text, end="")
    out = _outdir(args)
    _write(out / "certificates.txt", text, quiet=True)
    doc = {"config_hash": h, "seed": args.seed, "meta": meta, "certificates": [c.to_dict() for c in certs]}
    _write(out / "certificates.json", json.dumps(doc, indent=2, sort_keys=True, default=str) + "\n", quiet=True)
    return EXIT_OK if all(c.passed for c in certs) else EXIT_FAIL


def cmd_sweep(args):
    cx, f, mh, fh = _load(args)
    cfg, h = _config(args, mh, fh)
    deltas = args.delta or [0.1, 0.05, 0.025, 0.0125]
    if any(d <= 0 for d in deltas):
        raise _InputArgError("--delta values must be positive")
    clamped = [clamp_delta(cx, d) for d in deltas]
    if any(c for _, c in clamped):
        print("warning: some widths were clamped to the admissible cap", file=sys.stderr)
    widths = [w for w, _ in clamped]
    ps = args.p or [1.0, 2.0]
    reports, rates = convergence_sweep(cx, f, widths, ps, seed=args.seed)
    buf = io.StringIO()
    buf.write(_header(h, args.seed, [f"clamped={json.dumps([c for _, c in clamped])}"]))
    for k, rep in enumerate(reports):
        buf.write(rep.to_csv(header=(k == 0)))
    if len(deltas) >= 2:
        for q, r in rates.items():
            buf.write(f"rate,{q:g},w1p_error,{r:.6g},,\n")
        sf = fit_rate([r.delta_scalar for r in reports], [r.support_fraction for r in reports])
        buf.write(f"rate,,support_fraction,{sf:.6g},,\n")
    print(buf.getvalue(), end="")
    _write(_outdir(args) / "sweep.csv", buf.getvalue(), quiet=True)
    return EXIT_OK


COMMANDS = {"validate": cmd_validate, "smooth": cmd_smooth, "verify": cmd_verify, "sweep": cmd_sweep}


def main(argv=None):
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s: %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    try:
        return COMMANDS[args.command](args)
    except (InputError, _InputArgError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (Disjoint2D, Disjoint3D, PreconditionError, RuntimeError, ValueError) as exc:
        print(f"failed: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
