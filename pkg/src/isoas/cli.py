"""Command-line front end.

    isoas moas     problem.json  [--out DIR]
    isoas isoas    problem.json  [--out DIR] [--trace --trace-r R]
    isoas slice    sets.json     --r R [R ...] [--out DIR]
    isoas verify   problem.json  [--target isoas|moas] [--samples N]
    isoas compare  problem.json  [--r R ...] [--grid N]
    isoas simulate problem.json  --x0 X [X ...] --r R [--steps N]

All commands are batch: problem file in, JSON/CSV artifacts out, fixed
seeds, deterministic output bytes. Exit codes: 0 ok, 2 bad problem
file, 3 model precondition violated, 4 iteration cap exceeded,
5 verification found violations, 1 anything else. Errors go to stderr
as one JSON object. ISOAS_LOG=debug|info|warning controls logging.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys

import numpy as np

from . import geometry, model, oracle, sets
from .config import load_problem
from .errors import CapExceededError, IsoasError, ModelError, SchemaError
from .geometry import Polyhedron, cross_section, vertices_2d, write_polygons_csv

log = logging.getLogger("isoas")


def _setup_logging():
    level = os.environ.get("ISOAS_LOG", "warning").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")


def _add_common(p):
    p.add_argument("problem", help="problem JSON file")
    p.add_argument("--out", default=".", help="output directory")
    _add_overrides(p)


def _add_overrides(p):
    g = p.add_argument_group("overrides")
    g.add_argument("--tol-feas", type=float, default=None)
    g.add_argument("--tol-red", type=float, default=None)
    g.add_argument("--tol-geom", type=float, default=None)
    g.add_argument("--k-max", type=int, default=None)
    g.add_argument("--i-max", type=int, default=None)
    g.add_argument("--row-max", type=int, default=None)
    g.add_argument("--unsafe-repro", action="store_true",
                   help="allow disabling the safeguard steps")
    g.add_argument("--no-empty-set-prevention", action="store_true",
                   help="(with --unsafe-repro) skip the k=1 guard in the "
                        "saturated routes")
    g.add_argument("--no-erosion-prevention", action="store_true",
                   help="(with --unsafe-repro) re-seed saturated rows "
                        "unfiltered")


def _overrides(args):
    ov = {"tol_feas": args.tol_feas, "tol_red": args.tol_red,
          "tol_geom": args.tol_geom, "k_max": args.k_max,
          "i_max": args.i_max, "row_max": args.row_max}
    if args.no_empty_set_prevention or args.no_erosion_prevention:
        if not args.unsafe_repro:
            raise SchemaError(["--no-empty-set-prevention / "
                               "--no-erosion-prevention require "
                               "--unsafe-repro"])
    if args.no_empty_set_prevention:
        ov["empty_set_prevention"] = False
    if args.no_erosion_prevention:
        ov["erosion_prevention"] = False
    if getattr(args, "trace", False):
        ov["trace"] = True
    return ov


def _load(args):
    plant, loop, outc, opts = load_problem(args.problem, _overrides(args))
    diag = model.validate(loop, outc)
    log.info("model diagnostics: %s", json.dumps(diag))
    if not diag["observable"]:
        log.warning("(A, C) not observable: rank %d < %d",
                    diag["observability_rank"], plant.n)
    return plant, loop, outc, opts


def _write_json(path, obj):
    with open(path, "w") as f:
        json.dump(obj, f, indent=2, sort_keys=True)
        f.write("\n")
    log.info("wrote %s", path)


def _meta(loop, opts, args):
    return {
        "problem": os.path.basename(args.problem),
        "epsilon": loop.eps,
        "tolerances": {"feas": opts.tol_feas, "red": opts.tol_red,
                       "geom": opts.tol_geom},
        "caps": {"k_max": opts.caps.k_max, "i_max": opts.caps.i_max,
                 "row_max": opts.caps.row_max},
        "empty_set_prevention": opts.empty_set_prevention,
        "erosion_prevention": opts.erosion_prevention,
    }


# ---------------------------------------------------------------------------
# subcommands

def cmd_moas(args):
    _, loop, outc, opts = _load(args)
    res = sets.compute_moas(loop, outc, opts)
    out = res.to_dict()
    out["meta"].update(_meta(loop, opts, args))
    _write_json(os.path.join(args.out, "moas.json"), out)
    print(f"moas: {res.O.nrows} rows, fixed point after {res.steps} steps")
    return 0


def cmd_isoas(args):
    _, loop, outc, opts = _load(args)
    res = sets.compute_isoas(loop, outc, opts)
    out = res.to_dict(meta=_meta(loop, opts, args))
    _write_json(os.path.join(args.out, "sets.json"), out)
    for name, poly in res.sets().items():
        tag = "empty" if geometry.is_empty(poly) else f"{poly.nrows} rows"
        print(f"{name}: {tag}")
    print(f"outer iterations: {res.outer_iterations}")
    if args.trace:
        _write_trace(os.path.join(args.out, "trace.jsonl"), res, args.trace_r)
    return 0


def _write_trace(path, res, r_value):
    with open(path, "w") as f:
        for rec in res.trace:
            for name in ("nonsat", "upper", "lower"):
                region = rec["regions"][name]
                bundle = rec["bundles"][name]
                H_acc = [region.H]
                h_acc = [region.h]
                for k, (H, h) in enumerate(bundle.generations):
                    H_acc.append(H)
                    h_acc.append(h)
                    poly = Polyhedron(np.vstack(H_acc), np.concatenate(h_acc))
                    sl = cross_section(poly, r_value)
                    verts = [] if geometry.is_empty(sl) else \
                        [v.tolist() for v in vertices_2d(sl)]
                    f.write(json.dumps({
                        "i": rec["i"], "region": name, "k": k,
                        "H": H.tolist(), "h": h.tolist(),
                        "slice_r": r_value, "slice_vertices": verts,
                    }, sort_keys=True) + "\n")
    log.info("wrote %s", path)


def cmd_slice(args):
    with open(args.sets) as f:
        data = json.load(f)
    keys = [k for k in ("Q", "Q_up", "Q_lo", "moas") if k in data]
    if not keys:
        raise SchemaError([f"{args.sets}: no set entries found"])
    index = {"source": os.path.basename(args.sets), "r_values": args.r,
             "files": {}}
    for key in keys:
        poly = Polyhedron.from_dict(data[key])
        for i, r in enumerate(args.r):
            sl = cross_section(poly, r)
            verts = [] if geometry.is_empty(sl) else vertices_2d(sl)
            name = f"{key}_r{i}.csv"
            write_polygons_csv(os.path.join(args.out, name),
                               [verts] if verts else [])
            index["files"][name] = {"set": key, "r": r,
                                    "vertices": len(verts)}
    _write_json(os.path.join(args.out, "slices.json"), index)
    return 0


def cmd_verify(args):
    _, loop, outc, opts = _load(args)
    moas_res = sets.compute_moas(loop, outc, opts)
    if args.target == "moas":
        targets = [moas_res.O]
    else:
        iso = sets.compute_isoas(loop, outc, opts)
        targets = [iso.Q, iso.Q_up, iso.Q_lo]
    report = oracle.verify_set(targets, loop, outc, moas=moas_res.O,
                               n_samples=args.samples, T=args.horizon,
                               seed=args.seed, tol=opts.tol_feas)
    report["target"] = args.target
    if args.target == "moas" and report["saturation_events"]:
        report["ok"] = False
    _write_json(os.path.join(args.out, "verify_report.json"), report)
    if report.get("ok"):
        status = "ok"
    elif report.get("empty_target"):
        status = "EMPTY TARGET"
    else:
        status = "VIOLATIONS"
    print(f"verify[{args.target}]: {status} "
          f"({report['n_samples']} samples, T={report['T']})")
    return 0 if report.get("ok") else 5


def cmd_compare(args):
    _, loop, outc, opts = _load(args)
    moas_res = sets.compute_moas(loop, outc, opts)
    iso = sets.compute_isoas(loop, outc, opts)
    iso_sets = [iso.Q, iso.Q_up, iso.Q_lo]

    if args.r:
        r_values = list(args.r)
    else:
        band = loop.reference_band()
        top = geometry.lp_solve(np.eye(loop.dim)[-1], band)
        r_hi = top.value if top.status == "optimal" else 0.0
        r_values = [float(v) for v in np.linspace(0.0, r_hi, 4)]

    moas_polys, iso_polys, rows = [], [], []
    report = {"r_values": r_values, "per_r": [],
              "settings": {"grid": args.grid, "inflate": args.inflate,
                           "t_max": args.t_max, "seed": args.seed}}
    rng = np.random.default_rng(args.seed)
    strict_point = None
    member_outside_isoas = 0
    iso_member_nonmember = 0

    for r in r_values:
        mo_sl = cross_section(moas_res.O, r)
        mo_verts = [] if geometry.is_empty(mo_sl) else vertices_2d(mo_sl)
        moas_polys.append(mo_verts)
        slice_polys = []
        for poly in iso_sets:
            sl = cross_section(poly, r)
            slice_polys.append([] if geometry.is_empty(sl) else
                               vertices_2d(sl))
        iso_polys.append(slice_polys)

        # classification grid over the inflated isoas-slice bounding box
        pts = [np.asarray(v) for v in mo_verts]
        for sp in slice_polys:
            pts.extend(np.asarray(v) for v in sp)
        counts = {"member": 0, "nonmember": 0, "undecided": 0}
        if pts:
            P = np.vstack(pts)
            lo, hi = P.min(axis=0), P.max(axis=0)
            c, half = (lo + hi) / 2.0, np.maximum((hi - lo) / 2.0, 1e-6)
            lo, hi = c - half * args.inflate, c + half * args.inflate
            gx = np.linspace(lo[0], hi[0], args.grid)
            gy = np.linspace(lo[1], hi[1], args.grid)
            XX, YY = np.meshgrid(gx, gy)
            Z = np.column_stack([XX.ravel(), YY.ravel(),
                                 np.full(XX.size, r)])
            status = oracle.omega_membership_batch(loop, outc, moas_res.O, Z,
                                                   T_max=args.t_max,
                                                   tol=opts.tol_feas)
            in_union = np.zeros(Z.shape[0], dtype=bool)
            for p in iso_sets:
                in_union |= p.contains_many(Z, opts.tol_feas)
            in_moas = moas_res.O.contains_many(Z, opts.tol_feas)
            for zi, st in enumerate(status):
                counts[st] += 1
                rows.append((Z[zi, 0], Z[zi, 1], r, st))
                if st == "member" and not in_union[zi]:
                    member_outside_isoas += 1
                if in_union[zi] and st == "nonmember":
                    iso_member_nonmember += 1
                if strict_point is None and in_union[zi] and not in_moas[zi]:
                    strict_point = Z[zi].tolist()
        # containment: every moas-slice vertex inside the isoas union
        vert_ok = True
        for v in mo_verts:
            z = np.array([v[0], v[1], r])
            if not any(p.contains(z, opts.tol_feas) for p in iso_sets):
                vert_ok = False
        report["per_r"].append({
            "r": r, "moas_vertices": len(mo_verts),
            "isoas_nonempty": [bool(sp) for sp in slice_polys],
            "moas_vertices_in_isoas": vert_ok,
            "omega_counts": counts,
        })

    report["moas_vertices_in_isoas"] = all(p["moas_vertices_in_isoas"]
                                           for p in report["per_r"])
    report["strict_inclusion_point"] = strict_point
    report["isoas_members_classified_nonmember"] = iso_member_nonmember
    report["omega_members_outside_isoas"] = member_outside_isoas

    write_polygons_csv(os.path.join(args.out, "moas_slices.csv"),
                       [p for p in moas_polys if p])
    flat = []
    for slice_polys in iso_polys:
        flat.extend(p for p in slice_polys if p)
    write_polygons_csv(os.path.join(args.out, "isoas_slices.csv"), flat)
    with open(os.path.join(args.out, "omega_points.csv"), "w",
              newline="") as f:
        w = csv.writer(f)
        w.writerow(["x1", "x2", "r", "status"])
        for x1, x2, r, st in rows:
            w.writerow(["%.17g" % x1, "%.17g" % x2, "%.17g" % r, st])
    _write_json(os.path.join(args.out, "compare_report.json"), report)
    ok = report["moas_vertices_in_isoas"] and iso_member_nonmember == 0
    print(f"compare: containment={'ok' if ok else 'FAILED'}, "
          f"strict point {'found' if strict_point else 'not found'}")
    return 0 if ok else 5


def cmd_simulate(args):
    _, loop, outc, opts = _load(args)
    x0 = np.asarray(args.x0, dtype=float)
    if x0.shape[0] != loop.n:
        raise SchemaError([f"--x0: expected {loop.n} entries, "
                           f"got {x0.shape[0]}"])
    traj = oracle.simulate(loop, x0, args.r, args.steps)
    path = os.path.join(args.out, "trajectory.csv")
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        n, l = loop.n, loop.plant.l
        w.writerow(["k"] + [f"x{i+1}" for i in range(n)]
                   + ["u_demand", "u"] + [f"y{i+1}" for i in range(l)])
        for k in range(args.steps):
            row = [k] + ["%.17g" % v for v in traj.states[k]]
            row += ["%.17g" % traj.demands[k], "%.17g" % traj.inputs[k]]
            row += ["%.17g" % v for v in traj.outputs[k]]
            w.writerow(row)
    log.info("wrote %s", path)
    print(f"simulate: {args.steps} steps written")
    return 0


# ---------------------------------------------------------------------------

def build_parser():
    ap = argparse.ArgumentParser(prog="isoas", description=__doc__,
                                 formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("moas", help="maximal admissible set of the linear loop")
    _add_common(p)
    p.set_defaults(fn=cmd_moas)

    p = sub.add_parser("isoas", help="three-region saturated invariant sets")
    _add_common(p)
    p.add_argument("--trace", action="store_true",
                   help="write trace.jsonl with per-(i,k) generations")
    p.add_argument("--trace-r", type=float, default=0.0,
                   help="reference value for trace cross-sections")
    p.set_defaults(fn=cmd_isoas)

    p = sub.add_parser("slice", help="export 2-D cross-section vertex CSVs")
    p.add_argument("sets", help="sets.json or moas.json produced earlier")
    p.add_argument("--r", type=float, nargs="+", required=True)
    p.add_argument("--out", default=".")
    p.set_defaults(fn=cmd_slice)

    p = sub.add_parser("verify", help="sampling verification of computed sets")
    _add_common(p)
    p.add_argument("--target", choices=("isoas", "moas"), default="isoas")
    p.add_argument("--samples", type=int, default=10_000)
    p.add_argument("--horizon", type=int, default=500)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(fn=cmd_verify)

    p = sub.add_parser("compare", help="cross-sections + rollout classification")
    _add_common(p)
    p.add_argument("--r", type=float, nargs="*", default=None)
    p.add_argument("--grid", type=int, default=61,
                   help="classification grid points per axis")
    p.add_argument("--inflate", type=float, default=1.4,
                   help="bounding-box inflation for the grid")
    p.add_argument("--t-max", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(fn=cmd_compare)

    p = sub.add_parser("simulate", help="roll the saturated loop forward")
    _add_common(p)
    p.add_argument("--x0", type=float, nargs="+", required=True)
    p.add_argument("--r", type=float, required=True)
    p.add_argument("--steps", type=int, default=100)
    p.set_defaults(fn=cmd_simulate)
    return ap


_EXIT_CODES = [(SchemaError, 2), (ModelError, 3), (CapExceededError, 4)]


def main(argv=None):
    _setup_logging()
    ap = build_parser()
    args = ap.parse_args(argv)
    if getattr(args, "out", None):
        os.makedirs(args.out, exist_ok=True)
    try:
        return args.fn(args)
    except IsoasError as e:
        payload = {"error": type(e).__name__, "message": str(e)}
        if isinstance(e, SchemaError):
            payload["problems"] = e.problems
        if isinstance(e, CapExceededError):
            payload["diagnostics"] = e.diagnostics
        print(json.dumps(payload), file=sys.stderr)
        for cls, code in _EXIT_CODES:
            if isinstance(e, cls):
                return code
        return 1


if __name__ == "__main__":
    sys.exit(main())
