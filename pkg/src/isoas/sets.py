"""Invariant set construction.

`compute_moas` runs the non-saturated recursion over the whole reference
band: the result O is the maximal admissible set of the linear loop with
tightened references, and the input-range rows in its seed make it live
inside the linear regime by construction.

`compute_isoas` composes the three regions. Each outer round propagates
the current seeds through all three routes, then turns each route's
retained generations into the next seeds of the OTHER two routes (a
trajectory leaving one region enters another; the receiving region must
honor the rows the trajectory will face after it crosses). A route only
shares the rows it holds beyond its own region: the region-defining rows
assert membership in the source region, which is false everywhere in
the destination, so passing them along would empty the target set while
their pullbacks still transfer. Saturated rows additionally pass
through an erosion filter: a row already implied by the original
saturated region plus everything the non-saturated route has retained
so far cannot cut anything later and would only erode the
linear-regime set, so it is not re-seeded.

Seeds are never shrunk by LP redundancy tests: a row that is redundant
over the destination set still generates pull-back rows that cut (they
constrain the successors of states about to leave the region), so
dropping it breaks invariance. Instead each route keeps an exact-match
registry of every row it has ever held, and candidate re-seeds are
deduplicated against it. The loop ends when all three deduplicated
re-seeds are empty — at a fixed point the routes only offer each other
rows they have already exchanged.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import geometry
from .errors import CapExceededError
from .geometry import (ConstraintBundle, INFEASIBLE, OPTIMAL, Polyhedron,
                       lp_solve, stack_rows)
from .model import OutputConstraints, RegionTriple, SaturatedLoop, build_regions
from .propagation import (Options, control_authority, nonsat_seed,
                          propagate_lower, propagate_nonsat, propagate_upper,
                          saturated_seed)


@dataclass(frozen=True)
class MoasResult:
    O: Polyhedron
    steps: int
    bundle: ConstraintBundle

    def to_dict(self):
        return {"moas": self.O.to_dict(), "meta": {"steps": self.steps}}


def compute_moas(loop: SaturatedLoop, outc: OutputConstraints,
                 opts: Options = Options()) -> MoasResult:
    region = loop.reference_band()
    res = propagate_nonsat(region, nonsat_seed(loop, outc), loop, opts)
    return MoasResult(O=res.Q, steps=res.steps, bundle=res.bundle)


def erosion_filter(rows, region: Polyhedron, nonsat_rows, tol):
    """Drop share rows implied by region ∪ accumulated non-saturated rows.

    `rows` is the (H, h) family a saturated region offers for sharing;
    `nonsat_rows` is an (H, h) pair with every non-saturated row retained
    past its own region so far (all outer rounds). A row whose maximum
    over that context stays under its offset can never improve the
    composition and would only shrink the sets it gets re-seeded into.
    """
    H, h = rows
    if H.shape[0] == 0:
        return H, h
    ctxH, ctxh = stack_rows((region.H, region.h), nonsat_rows)
    ctx = Polyhedron(ctxH, ctxh)
    keep = []
    for ell in range(H.shape[0]):
        res = lp_solve(H[ell], ctx)
        if res.status == INFEASIBLE:
            continue
        if res.status == OPTIMAL and res.value <= h[ell] + tol:
            continue
        keep.append(ell)
    return H[keep].copy(), h[keep].copy()


@dataclass(frozen=True)
class IsoasResult:
    Q: Polyhedron
    Q_up: Polyhedron
    Q_lo: Polyhedron
    outer_iterations: int
    regions: RegionTriple
    trace: tuple = ()

    def sets(self):
        return {"Q": self.Q, "Q_up": self.Q_up, "Q_lo": self.Q_lo}

    def to_dict(self, meta=None):
        out = {k: v.to_dict() for k, v in self.sets().items()}
        out["meta"] = {"outer_iterations": self.outer_iterations}
        if meta:
            out["meta"].update(meta)
        return out


def membership(result: IsoasResult, z, tol=geometry.TOL_FEAS) -> bool:
    """z belongs to the union of the three sets."""
    return (result.Q.contains(z, tol) or result.Q_up.contains(z, tol)
            or result.Q_lo.contains(z, tol))


def _bundle_rows(bundle: ConstraintBundle):
    return bundle.flatten()


def _row_keys(H, h):
    return geometry.row_keys(H, h)


def _dedupe(rows, banned, d):
    """Keep only rows whose key is not in `banned`.

    Rows travel between routes bitwise unchanged (normalization of an
    already-normalized row is the identity), so exact-key comparison is
    enough. Used both to strip a route's own region rows from what it
    shares and to skip re-seeding rows a destination has already
    propagated: the earlier propagation ran in a superset of the current
    region, so every cut such a row can produce is already in place.
    """
    H, h = rows
    if H.shape[0] == 0:
        return np.zeros((0, d)), np.zeros(0)
    keep = [i for i, key in enumerate(_row_keys(H, h)) if key not in banned]
    return H[keep].copy(), h[keep].copy()


def compute_isoas(loop: SaturatedLoop, outc: OutputConstraints,
                  opts: Options = Options()) -> IsoasResult:
    regions = build_regions(loop)
    auth_up, auth_lo = control_authority(loop)
    d = loop.dim

    seed_ns = geometry.normalize_rows(*nonsat_seed(loop, outc))
    seed_up = geometry.normalize_rows(
        *saturated_seed(loop, outc, auth_up, loop.u_hi))
    seed_lo = geometry.normalize_rows(
        *saturated_seed(loop, outc, auth_lo, loop.u_lo))

    Q, Qu, Ql = regions.S, regions.S_up, regions.S_lo
    seen = {
        "nonsat": set(_row_keys(Q.H, Q.h)),
        "upper": set(_row_keys(Qu.H, Qu.h)),
        "lower": set(_row_keys(Ql.H, Ql.h)),
    }
    cum_ns = (np.zeros((0, d)), np.zeros(0))
    trace = []
    i = 0
    while True:
        if i >= opts.caps.i_max:
            raise CapExceededError(
                f"outer loop: no convergence within i_max={opts.caps.i_max} "
                f"rounds (possible seed limit cycle)",
                {"outer_iterations": i})
        regions_before = {"nonsat": Q, "upper": Qu, "lower": Ql}
        res_ns = propagate_nonsat(Q, seed_ns, loop, opts)
        res_up = propagate_upper(Qu, seed_up, loop, opts)
        res_lo = propagate_lower(Ql, seed_lo, loop, opts)
        Q, Qu, Ql = res_ns.Q, res_up.Q, res_lo.Q
        for name, res in (("nonsat", res_ns), ("upper", res_up),
                          ("lower", res_lo)):
            seen[name].update(_row_keys(*res.bundle.flatten()))
        cum_ns = stack_rows(cum_ns, res_ns.bundle.flatten())

        if opts.erosion_prevention:
            f_up = erosion_filter(res_up.bundle.flatten(), regions.S_up,
                                  cum_ns, opts.tol_red)
            f_lo = erosion_filter(res_lo.bundle.flatten(), regions.S_lo,
                                  cum_ns, opts.tol_red)
        else:
            f_up = res_up.bundle.flatten()
            f_lo = res_lo.bundle.flatten()

        next_ns = _dedupe(stack_rows(f_up, f_lo), seen["nonsat"], d)
        next_up = _dedupe(stack_rows(res_ns.bundle.flatten(), f_lo),
                          seen["upper"], d)
        next_lo = _dedupe(stack_rows(f_up, res_ns.bundle.flatten()),
                          seen["lower"], d)
        for name, nxt in (("nonsat", next_ns), ("upper", next_up),
                          ("lower", next_lo)):
            seen[name].update(_row_keys(*nxt))

        i += 1
        if opts.trace:
            trace.append({
                "i": i - 1,
                "regions": regions_before,
                "nonsat": res_ns.trace, "upper": res_up.trace,
                "lower": res_lo.trace,
                "steps": {"nonsat": res_ns.steps, "upper": res_up.steps,
                          "lower": res_lo.steps},
                "bundles": {"nonsat": res_ns.bundle,
                            "upper": res_up.bundle, "lower": res_lo.bundle},
                "filtered_rows": {
                    "upper": int(res_up.bundle.nrows - f_up[0].shape[0]),
                    "lower": int(res_lo.bundle.nrows - f_lo[0].shape[0])},
                "reseeds": {"nonsat": next_ns, "upper": next_up,
                            "lower": next_lo},
                "reseed_rows": {"nonsat": int(next_ns[0].shape[0]),
                                "upper": int(next_up[0].shape[0]),
                                "lower": int(next_lo[0].shape[0])},
            })
        if (next_ns[0].shape[0] == 0 and next_up[0].shape[0] == 0
                and next_lo[0].shape[0] == 0):
            break
        seed_ns, seed_up, seed_lo = next_ns, next_up, next_lo

    return IsoasResult(Q=Q, Q_up=Qu, Q_lo=Ql, outer_iterations=i,
                       regions=regions, trace=tuple(trace))
