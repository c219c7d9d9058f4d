"""Simulation-based checks, independent of the set machinery.

Everything here rolls the saturated closed loop

    u_k = sat( G_u r - K (x_k - G_x r) ),   x_{k+1} = A x_k + B u_k,

forward and compares what trajectories do against what the sets claim.
The verifier samples inside computed sets and looks for invariance or
admissibility violations; `omega_membership` classifies points of the
true (uncomputable) admissible domain by rollout. Batched variants keep
the 1e4-sample acceptance runs fast.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import geometry
from .errors import ModelError
from .geometry import Polyhedron, cross_section, lp_solve, vertices_2d
from .model import OutputConstraints, SaturatedLoop

MEMBER = "member"
NONMEMBER = "nonmember"
UNDECIDED = "undecided"


def saturate(u, lo, hi):
    if not lo < hi:
        raise ModelError(f"saturation bounds must satisfy lo < hi, "
                         f"got [{lo}, {hi}]")
    return float(np.clip(u, lo, hi))


def demand(loop: SaturatedLoop, x, r):
    """Unsaturated input the prestabilizer asks for."""
    x = np.asarray(x, dtype=float).reshape(-1)
    return float(loop.G_u * r - loop.K[0] @ (x - loop.G_x * r))


@dataclass(frozen=True)
class Trajectory:
    states: np.ndarray   # (T+1, n)
    inputs: np.ndarray   # (T,)
    demands: np.ndarray  # (T,)
    outputs: np.ndarray  # (T, l)


def simulate(loop: SaturatedLoop, x0, r, T) -> Trajectory:
    plant = loop.plant
    x = np.asarray(x0, dtype=float).reshape(plant.n)
    states = np.empty((T + 1, plant.n))
    inputs = np.empty(T)
    dems = np.empty(T)
    outputs = np.empty((T, plant.l))
    states[0] = x
    for k in range(T):
        ud = demand(loop, x, r)
        u = saturate(ud, loop.u_lo, loop.u_hi)
        outputs[k] = plant.C @ x + plant.D[:, 0] * u
        x = plant.A @ x + plant.B[:, 0] * u
        states[k + 1] = x
        inputs[k] = u
        dems[k] = ud
    return Trajectory(states=states, inputs=inputs, demands=dems,
                      outputs=outputs)


def _rollout_batch(loop: SaturatedLoop, X, r, T, visit):
    """Roll N points T steps; call visit(k, X_k, U_k, D_k, Y_k) each step.

    X is (N, n); r scalar or (N,). visit may return a bool mask of points
    to stop tracking (for early classification); tracking state is the
    caller's business, here we just keep everything dense -- N and n are
    small.
    """
    plant = loop.plant
    X = np.array(X, dtype=float)
    r = np.broadcast_to(np.asarray(r, dtype=float), (X.shape[0],))
    K = loop.K[0]
    base = loop.G_u * r + (K @ loop.G_x) * r
    for k in range(T):
        D = base - X @ K
        U = np.clip(D, loop.u_lo, loop.u_hi)
        Y = X @ plant.C.T + np.outer(U, plant.D[:, 0])
        if visit(k, X, U, D, Y):
            break
        X = X @ plant.A.T + np.outer(U, plant.B[:, 0])
    return X


def omega_membership(loop: SaturatedLoop, outc: OutputConstraints,
                     moas: Polyhedron, z, T_max=1000,
                     tol=geometry.TOL_FEAS) -> str:
    """Classify z = (x, r) against the saturated admissible domain.

    member     -- the rollout enters the linear-regime MOAS (all future
                  outputs admissible from there on)
    nonmember  -- an output constraint is violated first
    undecided  -- neither event within T_max steps
    """
    status = omega_membership_batch(loop, outc, moas,
                                    np.asarray(z, dtype=float).reshape(1, -1),
                                    T_max=T_max, tol=tol)
    return status[0]


def omega_membership_batch(loop: SaturatedLoop, outc: OutputConstraints,
                           moas: Polyhedron, Z, T_max=1000,
                           tol=geometry.TOL_FEAS):
    Z = np.asarray(Z, dtype=float)
    if Z.ndim != 2 or Z.shape[1] != loop.dim:
        raise ValueError(f"expected (N, {loop.dim}) points, got {Z.shape}")
    N = Z.shape[0]
    X = Z[:, :-1].copy()
    r = Z[:, -1].copy()
    Hy, hy = outc.H, outc.h
    status = np.full(N, UNDECIDED, dtype=object)
    open_mask = np.ones(N, dtype=bool)

    def visit(k, Xk, Uk, Dk, Yk):
        Zk = np.column_stack([Xk, r])
        inside = moas.contains_many(Zk, tol)
        viol = np.any(Yk @ Hy.T > hy + tol, axis=1)
        newly_member = open_mask & inside
        newly_bad = open_mask & ~inside & viol
        status[newly_member] = MEMBER
        status[newly_bad] = NONMEMBER
        open_mask[newly_member] = False
        open_mask[newly_bad] = False
        return not open_mask.any()

    _rollout_batch(loop, X, r, T_max, visit)
    return status.tolist()


def lqr_gain(plant, Q, R):
    """Infinite-horizon LQR gain by fixed-point Riccati iteration.

    Iterates P <- A'PA - A'PB (R + B'PB)^-1 B'PA + Q from P = Q until
    the update moves less than 1e-12 in the max norm. Returns K (1 x n)
    for u = -K x.
    """
    A, B = plant.A, plant.B
    Q = np.asarray(Q, dtype=float)
    R = np.asarray(R, dtype=float).reshape(1, 1)
    P = Q.copy()
    # divergence shows up as overflow in the iterate; detect it on Pn
    # instead of letting numpy warn
    with np.errstate(over="ignore", invalid="ignore"):
        for _ in range(100_000):
            BtP = B.T @ P
            K = np.linalg.solve(R + BtP @ B, BtP @ A)
            Pn = A.T @ P @ A - A.T @ P @ B @ K + Q
            if not np.all(np.isfinite(Pn)):
                raise ModelError("Riccati iteration diverged; "
                                 "is (A, B) stabilizable?")
            delta = float(np.max(np.abs(Pn - P)))
            P = Pn
            if delta <= 1e-12:
                break
        else:
            raise ModelError(
                "Riccati iteration did not converge in 1e5 steps")
    K = np.linalg.solve(R + B.T @ P @ B, B.T @ P @ A)
    return K, P


def dare_residual(plant, Q, R, P):
    """Max-norm residual of the discrete Riccati equation at P."""
    A, B = plant.A, plant.B
    R = np.asarray(R, dtype=float).reshape(1, 1)
    BtP = B.T @ P
    rhs = A.T @ P @ A - A.T @ P @ B @ np.linalg.solve(R + BtP @ B, BtP @ A) + Q
    return float(np.max(np.abs(rhs - P)))


# ---------------------------------------------------------------------------
# sampling verifier

def _slice_boxes(target_sets, ref_values, tol):
    """(set_index, r, lo, hi) boxes around each nonempty 2-D slice,
    inflated 10% about the center."""
    boxes = []
    for si, poly in enumerate(target_sets):
        for r in ref_values:
            sl = cross_section(poly, r)
            verts = vertices_2d(sl)
            if not verts:
                continue
            V = np.asarray(verts)
            lo, hi = V.min(axis=0), V.max(axis=0)
            c, half = (lo + hi) / 2.0, (hi - lo) / 2.0
            half = np.maximum(half * 1.1, 1e-9)
            boxes.append((si, float(r), c - half, c + half))
    return boxes


def _coordinate_boxes(target_sets, n):
    """Per-set bounding boxes from 2(n+1) support LPs (general n)."""
    boxes = []
    for si, poly in enumerate(target_sets):
        d = poly.dim
        lo = np.empty(d)
        hi = np.empty(d)
        ok = True
        for j in range(d):
            e = np.zeros(d)
            e[j] = 1.0
            res_hi = lp_solve(e, poly)
            res_lo = lp_solve(-e, poly)
            if res_hi.status != "optimal" or res_lo.status != "optimal":
                ok = False
                break
            hi[j] = res_hi.value
            lo[j] = -res_lo.value
        if ok:
            boxes.append((si, lo, hi))
    return boxes


def sample_in_sets(target_sets, n_samples, rng, ref_grid=21,
                   tol=geometry.TOL_FEAS):
    """Rejection-sample n_samples points from the union of the sets.

    For n = 2 the proposal is uniform over per-slice bounding boxes on a
    reference grid (membership with tol 0 keeps samples strictly
    inside); for higher n, per-set coordinate boxes from support LPs.
    Returns (N, d) points.
    """
    target_sets = [p for p in target_sets if not geometry.is_empty(p)]
    if not target_sets:
        return np.zeros((0, 0))
    d = target_sets[0].dim
    if d == 3:
        r_lo, r_hi = np.inf, -np.inf
        for p in target_sets:
            e = np.zeros(d)
            e[-1] = 1.0
            a, b = lp_solve(-e, p), lp_solve(e, p)
            if a.status == "optimal":
                r_lo = min(r_lo, -a.value)
            if b.status == "optimal":
                r_hi = max(r_hi, b.value)
        refs = np.linspace(r_lo, r_hi, ref_grid)
        boxes = _slice_boxes(target_sets, refs, tol)
        if not boxes:
            return np.zeros((0, d))
        out = []
        attempts = 0
        while len(out) < n_samples and attempts < 1000 * n_samples:
            si, r, lo, hi = boxes[rng.integers(len(boxes))]
            x = lo + (hi - lo) * rng.random(2)
            z = np.array([x[0], x[1], r])
            attempts += 1
            if target_sets[si].contains(z, tol=0.0):
                out.append(z)
        return np.asarray(out)
    boxes = _coordinate_boxes(target_sets, d)
    if not boxes:
        return np.zeros((0, d))
    out = []
    attempts = 0
    while len(out) < n_samples and attempts < 1000 * n_samples:
        si, lo, hi = boxes[rng.integers(len(boxes))]
        z = lo + (hi - lo) * rng.random(d)
        attempts += 1
        if target_sets[si].contains(z, tol=0.0):
            out.append(z)
    return np.asarray(out)


def verify_set(target_sets, loop: SaturatedLoop, outc: OutputConstraints,
               moas: Polyhedron | None = None, n_samples=10_000, T=500,
               seed=0, tol=geometry.TOL_FEAS, ref_grid=21):
    """Sample the union of `target_sets` and stress the claims.

    Checks per sample: one-step invariance of the union, T-step output
    admissibility, input-demand saturation bookkeeping, and (when a MOAS
    is supplied) agreement with rollout classification -- no sampled
    member may come back `nonmember`.

    Returns a plain-dict report; `violations` holds the first few
    offending samples per category.
    """
    rng = np.random.default_rng(seed)
    target_sets = [p for p in target_sets if not geometry.is_empty(p)]
    report = {
        "seed": seed, "n_samples": 0, "T": T, "tol": tol,
        "invariance_violations": 0, "admissibility_violations": 0,
        "classification_violations": 0, "saturation_events": 0,
        "worst_invariance_margin": -np.inf,
        "worst_output_margin": -np.inf,
        "violations": [],
    }
    if not target_sets:
        report["empty_target"] = True
        return report
    Z = sample_in_sets(target_sets, n_samples, rng, ref_grid=ref_grid, tol=tol)
    N = Z.shape[0]
    report["n_samples"] = int(N)
    if N == 0:
        return report
    X, r = Z[:, :-1], Z[:, -1]
    plant = loop.plant
    Hy, hy = outc.H, outc.h

    def union_contains(Zk):
        inside = np.zeros(Zk.shape[0], dtype=bool)
        for p in target_sets:
            inside |= p.contains_many(Zk, tol)
        return inside

    # one step
    K = loop.K[0]
    D0 = loop.G_u * r + (K @ loop.G_x) * r - X @ K
    U0 = np.clip(D0, loop.u_lo, loop.u_hi)
    X1 = X @ plant.A.T + np.outer(U0, plant.B[:, 0])
    inv_ok = union_contains(np.column_stack([X1, r]))
    bad = np.flatnonzero(~inv_ok)
    report["invariance_violations"] = int(bad.size)
    for i in bad[:5]:
        report["violations"].append({"kind": "invariance",
                                     "z": Z[i].tolist()})
    margins = []
    for p in target_sets:
        Z1 = np.column_stack([X1, r])
        margins.append(np.max(Z1 @ p.H.T - p.h, axis=1))
    report["worst_invariance_margin"] = float(np.min(np.stack(margins),
                                                     axis=0).max())

    # T-step outputs + saturation bookkeeping
    worst_out = -np.inf
    adm_bad = np.zeros(N, dtype=bool)
    sat_events = 0

    def visit(k, Xk, Uk, Dk, Yk):
        nonlocal worst_out, sat_events
        viol = Yk @ Hy.T - hy
        worst_out = max(worst_out, float(viol.max()))
        adm_bad[np.any(viol > tol, axis=1)] = True
        sat_events += int(np.count_nonzero(
            (Dk > loop.u_hi + tol) | (Dk < loop.u_lo - tol)))
        return False

    _rollout_batch(loop, X, r, T, visit)
    report["admissibility_violations"] = int(np.count_nonzero(adm_bad))
    for i in np.flatnonzero(adm_bad)[:5]:
        report["violations"].append({"kind": "admissibility",
                                     "z": Z[i].tolist()})
    report["worst_output_margin"] = worst_out
    report["saturation_events"] = sat_events

    if moas is not None:
        status = omega_membership_batch(loop, outc, moas, Z, T_max=T, tol=tol)
        cls_bad = [i for i, s in enumerate(status) if s == NONMEMBER]
        report["classification_violations"] = len(cls_bad)
        for i in cls_bad[:5]:
            report["violations"].append({"kind": "classification",
                                         "z": Z[i].tolist()})
    report["ok"] = (report["invariance_violations"] == 0
                    and report["admissibility_violations"] == 0
                    and report["classification_violations"] == 0)
    return report
