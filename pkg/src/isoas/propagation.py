"""Constraint propagation inside a fixed region of z = (x, r) space.

Three routes share one engine:

  non-saturated   H_{k+1} = H_k M_hat,                h_{k+1} = h_k
  saturated hi    H_{k+1} = H_k M_plain,  h_{k+1} = h_k - H_k [B u_hi; 0]
  saturated lo    H_{k+1} = H_k M_plain,  h_{k+1} = h_k - H_k [B u_lo; 0]

where M_hat maps z -> (A_hat x + B_hat r, r) and M_plain freezes the
reference, z -> (A x, r). Each new generation is reduced row-by-row
against the region plus all retained generations; propagation stops when
a whole generation reduces away. Dropping a row also drops its
descendants -- trajectories that stay in the region keep satisfying the
retained rows (the exit-or-satisfy dichotomy), which is exactly what the
downstream composition needs.

The saturated routes run an extra guard at k = 1: a generation-1 row is
kept only if it can still bind somewhere in the region once its own
one-step image, the seed and the region are imposed. Without it the
first propagated generation can slice the region to nothing (the
translated offsets shrink every step), and the guard removes precisely
the rows that force that collapse.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import geometry
from .errors import CapExceededError, ModelError
from .geometry import (ConstraintBundle, INFEASIBLE, OPTIMAL, Polyhedron,
                       lp_solve, remove_redundant_rows, stack_rows)
from .model import OutputConstraints, SaturatedLoop


@dataclass(frozen=True)
class Caps:
    k_max: int = 500
    i_max: int = 100
    row_max: int = 100_000


@dataclass(frozen=True)
class Options:
    tol_feas: float = geometry.TOL_FEAS
    tol_red: float = geometry.TOL_RED
    tol_geom: float = geometry.TOL_GEOM
    caps: Caps = field(default_factory=Caps)
    empty_set_prevention: bool = True
    erosion_prevention: bool = True
    trace: bool = False


@dataclass(frozen=True)
class ControlAuthority:
    """Whether feedback alone can undo a persistent saturated input.

    Needs I - A invertible and 1 + K (I - A)^{-1} B <= 0; then
    x_bar = (I - A)^{-1} B u_hi (resp. u_lo) is the rest point the
    saturated plant drifts to, and the authority row keeps the demand on
    the saturated side of it with an eps/2 margin.
    """

    applicable: bool
    x_rest: np.ndarray | None = None
    condition_value: float | None = None
    row: np.ndarray | None = None
    offset: float | None = None


def control_authority(loop: SaturatedLoop):
    """(upper, lower) ControlAuthority records for the two saturation rails."""
    plant, K, eps = loop.plant, loop.K[0], loop.eps
    n = plant.n
    I_A = np.eye(n) - plant.A
    s = np.linalg.svd(I_A, compute_uv=False)
    if s[-1] <= 1e-10 * max(s[0], 1.0):
        na = ControlAuthority(applicable=False)
        return na, na
    base = np.linalg.solve(I_A, plant.B[:, 0])
    cond = 1.0 + float(K @ base)
    if cond > 0.0:
        na = ControlAuthority(applicable=False, condition_value=cond)
        return na, na
    d = n + 1
    x_up = base * loop.u_hi
    row_up = np.zeros(d)
    row_up[:n] = -K
    up = ControlAuthority(applicable=True, x_rest=x_up, condition_value=cond,
                          row=row_up, offset=(eps / 2.0 - 1.0) * float(K @ x_up))
    x_lo = base * loop.u_lo
    row_lo = np.zeros(d)
    row_lo[:n] = K
    lo = ControlAuthority(applicable=True, x_rest=x_lo, condition_value=cond,
                          row=row_lo, offset=(1.0 - eps / 2.0) * float(K @ x_lo))
    return up, lo


# ---------------------------------------------------------------------------
# initial generations

def nonsat_seed(loop: SaturatedLoop, outc: OutputConstraints):
    """Input-range rows on the demand plus output rows on (C_hat, D_hat)."""
    w = loop.demand_row()
    Hy = outc.H
    out_block = np.column_stack([Hy @ loop.C_hat, Hy @ loop.D_hat])
    H = np.vstack([w, -w, out_block])
    h = np.concatenate([[loop.u_hi, -loop.u_lo], outc.h])
    return H, h


def saturated_seed(loop: SaturatedLoop, outc: OutputConstraints, auth, u_sat):
    """Output rows with the input pinned at u_sat, plus the authority row."""
    n = loop.n
    Hy = outc.H
    H = np.column_stack([Hy @ loop.plant.C, np.zeros(Hy.shape[0])])
    h = outc.h - (Hy @ loop.plant.D[:, 0]) * u_sat
    if auth.applicable:
        H = np.vstack([H, auth.row])
        h = np.concatenate([h, [auth.offset]])
    return H, h


# ---------------------------------------------------------------------------
# engine

@dataclass(frozen=True)
class PropagationResult:
    Q: Polyhedron
    bundle: ConstraintBundle
    steps: int
    trace: tuple = ()
    prevention_dropped: int = 0


def _context(region: Polyhedron, gens):
    H, h = stack_rows((region.H, region.h), *gens)
    return Polyhedron(H, h) if H.shape[0] else Polyhedron.full_space(region.dim)


def empty_set_prevention(gen1, gen2, seed, region: Polyhedron, tol):
    """Filter generation-1 rows that would empty the saturated recursion.

    Row l of generation 1 survives iff max of its own normal over
    {row l of generation 2} ∩ seed ∩ region exceeds its offset: the row
    must remain attainable once its one-step image is imposed. Row
    indices align because generation 2 is the image of generation 1.
    Returns (kept_indices, H1_filtered, h1_filtered).
    """
    H1, h1 = gen1
    H2, h2 = gen2
    ctxH, ctxh = stack_rows((region.H, region.h), seed)
    kept = []
    for ell in range(H1.shape[0]):
        test = Polyhedron(np.vstack([H2[ell:ell + 1], ctxH]),
                          np.concatenate([h2[ell:ell + 1], ctxh]))
        res = lp_solve(H1[ell], test)
        if res.status == INFEASIBLE:
            continue
        if res.status == OPTIMAL and res.value <= h1[ell] + tol:
            continue
        kept.append(ell)
    idx = np.asarray(kept, dtype=int)
    return idx, H1[idx].copy(), h1[idx].copy()


def _propagate(region: Polyhedron, seed, M, translate, loop,
               opts: Options, guard: bool, label: str) -> PropagationResult:
    """Shared generation loop. `translate` is the per-step offset shift
    (zeros for the non-saturated route); `guard` enables the k = 1
    empty-set check."""
    d = region.dim
    # rows are renormalized every step: with an unstable A the raw rows
    # grow geometrically and wreck the LP scaling
    step = lambda H, h: geometry.normalize_rows(H @ M, h - H @ translate)
    trace = []
    # the seed is retained verbatim (never reduced): even a seed row that
    # is redundant over the region has pullbacks that cut, and those are
    # generated from it
    H0, h0 = geometry.normalize_rows(*seed)
    gens = [(H0, h0)]
    if opts.trace:
        trace.append({"k": 0, "rows": int(H0.shape[0])})
    k = 0
    dropped = 0
    while gens[k][0].shape[0] > 0:
        if k >= opts.caps.k_max:
            raise CapExceededError(
                f"{label}: no convergence within k_max={opts.caps.k_max} steps",
                {"route": label, "k": k,
                 "rows": int(sum(H.shape[0] for H, _ in gens))})
        Hn, hn = step(*gens[k])
        if guard and k == 1 and opts.empty_set_prevention:
            idx, H1f, h1f = empty_set_prevention(
                gens[1], (Hn, hn), gens[0], region, opts.tol_red)
            if H1f.shape[0] < gens[1][0].shape[0]:
                dropped += gens[1][0].shape[0] - H1f.shape[0]
                gens[1] = (H1f, h1f)
                if gens[1][0].shape[0] == 0:
                    if opts.trace:
                        trace.append({"k": 1, "rows": 0, "guard_dropped": dropped})
                    break
                Hn, hn = step(*gens[1])
        Hn, hn = remove_redundant_rows((Hn, hn), _context(region, gens),
                                       tol=opts.tol_red)
        total = sum(H.shape[0] for H, _ in gens) + Hn.shape[0]
        if total > opts.caps.row_max:
            raise CapExceededError(
                f"{label}: retained rows exceed row_max={opts.caps.row_max}",
                {"route": label, "k": k + 1, "rows": int(total)})
        gens.append((Hn, hn))
        k += 1
        if opts.trace:
            trace.append({"k": k, "rows": int(Hn.shape[0])})
    # the bundle reports what this run adds BEYOND the region: rows the
    # region already carries stay in the recursion (their pullbacks cut)
    # but are excluded here, so downstream sharing never re-imports a
    # region's membership rows into a different region
    region_keys = set(geometry.row_keys(region.H, region.h))
    kept = []
    for H, h in gens:
        if H.shape[0] == 0:
            continue
        idx = [i for i, key in enumerate(geometry.row_keys(H, h))
               if key not in region_keys]
        if idx:
            kept.append((H[idx].copy(), h[idx].copy()))
    bundle = ConstraintBundle(tuple(kept))
    BH, bh = bundle.flatten()
    Q = Polyhedron(np.vstack([region.H, BH.reshape(-1, d)]),
                   np.concatenate([region.h, bh]))
    return PropagationResult(Q=Q, bundle=bundle, steps=k,
                             trace=tuple(trace), prevention_dropped=dropped)


def propagate_nonsat(region: Polyhedron, seed, loop: SaturatedLoop,
                     opts: Options = Options()) -> PropagationResult:
    # constraint rows compose with the state map on the right:
    # eta (M z) = (eta M) z
    return _propagate(region, seed, loop.lifted_hat(),
                      np.zeros(region.dim), loop, opts, guard=False,
                      label="nonsat")


def propagate_upper(region: Polyhedron, seed, loop: SaturatedLoop,
                    opts: Options = Options()) -> PropagationResult:
    t = np.zeros(region.dim)
    t[:loop.n] = loop.plant.B[:, 0] * loop.u_hi
    return _propagate(region, seed, loop.lifted_plain(), t, loop, opts,
                      guard=True, label="saturated-upper")


def propagate_lower(region: Polyhedron, seed, loop: SaturatedLoop,
                    opts: Options = Options()) -> PropagationResult:
    t = np.zeros(region.dim)
    t[:loop.n] = loop.plant.B[:, 0] * loop.u_lo
    return _propagate(region, seed, loop.lifted_plain(), t, loop, opts,
                      guard=True, label="saturated-lower")
