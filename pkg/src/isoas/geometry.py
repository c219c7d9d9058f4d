"""Polyhedral primitives in halfspace form.

Every set in this package is a polyhedron {z : H z <= h} with H (m x d),
h (m,). There is no vertex representation anywhere except the 2-D plotting
path (`vertices_2d`), which enumerates pairwise facet intersections --
cheap and exact enough for d = 2, hopeless beyond it, hence the hard
dimension check.

All optimization goes through `lp_solve` (scipy/HiGHS). Callers never see
scipy statuses, only {OPTIMAL, INFEASIBLE, UNBOUNDED}.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog

from .errors import LPSolverError

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"

#: default absolute tolerances; overridable per call
TOL_FEAS = 1e-8   # membership / feasibility slack
TOL_RED = 1e-9    # redundancy acceptance: drop row if max <= offset + TOL_RED
TOL_GEOM = 1e-7   # vertex merge radius in 2-D


def _as_matrix(H):
    H = np.asarray(H, dtype=float)
    if H.ndim != 2:
        raise ValueError(f"H must be 2-D, got shape {H.shape}")
    return H


def _as_vector(h, rows):
    h = np.asarray(h, dtype=float).reshape(-1)
    if h.shape[0] != rows:
        raise ValueError(f"h has {h.shape[0]} entries for {rows} rows")
    return h


@dataclass(frozen=True)
class Polyhedron:
    """Halfspace-form set {z : H z <= h}.

    Zero rows of H are rejected: a row 0 <= h is either vacuous or makes
    the whole representation infeasible, and both cases break the row
    bookkeeping downstream. Use `empty(d)` for the canonical empty set
    and H with zero rows (shape (0, d)) for the whole space.
    """

    H: np.ndarray
    h: np.ndarray

    def __post_init__(self):
        H = _as_matrix(self.H)
        h = _as_vector(self.h, H.shape[0])
        if not (np.all(np.isfinite(H)) and np.all(np.isfinite(h))):
            raise ValueError("H and h must be finite")
        if H.shape[0] and np.any(np.max(np.abs(H), axis=1) == 0.0):
            raise ValueError("zero rows of H are not allowed")
        H.setflags(write=False)
        h.setflags(write=False)
        object.__setattr__(self, "H", H)
        object.__setattr__(self, "h", h)

    @property
    def dim(self):
        return self.H.shape[1]

    @property
    def nrows(self):
        return self.H.shape[0]

    @classmethod
    def full_space(cls, d):
        return cls(np.zeros((0, d)), np.zeros(0))

    @classmethod
    def empty(cls, d):
        # contradictory pair x1 <= -1, -x1 <= -1; stands in for the empty
        # set because literal zero rows are banned
        H = np.zeros((2, d))
        H[0, 0] = 1.0
        H[1, 0] = -1.0
        return cls(H, np.array([-1.0, -1.0]))

    @classmethod
    def box(cls, lo, hi):
        lo = np.asarray(lo, dtype=float)
        hi = np.asarray(hi, dtype=float)
        d = lo.shape[0]
        return cls(np.vstack([np.eye(d), -np.eye(d)]), np.concatenate([hi, -lo]))

    def contains(self, z, tol=TOL_FEAS):
        z = np.asarray(z, dtype=float).reshape(-1)
        if z.shape[0] != self.dim:
            raise ValueError(f"point has dim {z.shape[0]}, set has dim {self.dim}")
        if self.nrows == 0:
            return True
        return bool(np.all(self.H @ z <= self.h + tol))

    def contains_many(self, Z, tol=TOL_FEAS):
        """Vectorized membership for Z of shape (N, d) -> bool (N,)."""
        Z = np.asarray(Z, dtype=float)
        if Z.ndim != 2 or Z.shape[1] != self.dim:
            raise ValueError(f"expected (N, {self.dim}) array, got {Z.shape}")
        if self.nrows == 0:
            return np.ones(Z.shape[0], dtype=bool)
        return np.all(Z @ self.H.T <= self.h + tol, axis=1)

    def to_dict(self):
        return {"H": self.H.tolist(), "h": self.h.tolist()}

    @classmethod
    def from_dict(cls, d):
        return cls(np.asarray(d["H"], dtype=float), np.asarray(d["h"], dtype=float))


@dataclass(frozen=True)
class LPResult:
    status: str
    z: np.ndarray | None = None
    value: float | None = None


def normalize_rows(H, h):
    """Scale each inequality by its row ∞-norm. Same set, sane scaling."""
    H = _as_matrix(H)
    h = _as_vector(h, H.shape[0])
    if H.shape[0] == 0:
        return H.copy(), h.copy()
    s = np.max(np.abs(H), axis=1)
    if np.any(s == 0.0):
        raise ValueError("cannot normalize a zero row")
    return H / s[:, None], h / s


def row_keys(H, h):
    """Exact-match identity keys for constraint rows.

    Rows are normalized first, so a row keeps its key wherever it
    travels (normalizing an already-normalized row is the identity).
    """
    H = _as_matrix(H)
    h = _as_vector(h, H.shape[0])
    if H.shape[0]:
        H, h = normalize_rows(H, h)
    return [(H[i].tobytes(), float(h[i]).hex()) for i in range(H.shape[0])]


def lp_solve(c, poly: Polyhedron) -> LPResult:
    """maximize c @ z subject to z in poly. Free variables throughout."""
    c = np.asarray(c, dtype=float).reshape(-1)
    if c.shape[0] != poly.dim:
        raise ValueError(f"objective dim {c.shape[0]} != set dim {poly.dim}")
    kw = dict(bounds=(None, None), method="highs")
    if poly.nrows:
        kw.update(A_ub=poly.H, b_ub=poly.h)
    res = linprog(-c, **kw)
    if res.status not in (0, 2, 3):
        # HiGHS occasionally reports Unknown on near-degenerate systems;
        # a presolve-off retry settles it
        res = linprog(-c, **kw, options={"presolve": False})
    if res.status == 0:
        z = np.asarray(res.x, dtype=float)
        return LPResult(OPTIMAL, z=z, value=float(c @ z))
    if res.status == 2:
        return LPResult(INFEASIBLE)
    if res.status == 3:
        return LPResult(UNBOUNDED)
    raise LPSolverError(f"LP backend failed (status {res.status}): {res.message}")


def is_empty(poly: Polyhedron, tol=TOL_FEAS) -> bool:
    if poly.nrows == 0:
        return False
    return lp_solve(np.zeros(poly.dim), poly).status == INFEASIBLE


def intersect(a: Polyhedron, b: Polyhedron) -> Polyhedron:
    if a.dim != b.dim:
        raise ValueError(f"dimension mismatch: {a.dim} vs {b.dim}")
    return Polyhedron(np.vstack([a.H, b.H]), np.concatenate([a.h, b.h]))


def stack_rows(*blocks):
    """Stack (H, h) pairs, skipping empty blocks. Returns (H, h)."""
    Hs = [np.atleast_2d(H) for H, _ in blocks if np.size(H)]
    hs = [np.atleast_1d(h) for H, h in blocks if np.size(H)]
    if not Hs:
        d = max((np.shape(H)[-1] for H, _ in blocks if np.ndim(H) >= 1), default=0)
        return np.zeros((0, d)), np.zeros(0)
    return np.vstack(Hs), np.concatenate(hs)


def tighten(poly: Polyhedron, eps: float) -> Polyhedron:
    """Scale the set toward the origin: offsets h -> (1 - eps) h.

    Requires 0 in the interior, i.e. all offsets strictly positive;
    eps = 0 is the identity.
    """
    if not 0.0 <= eps < 1.0:
        raise ValueError(f"eps must be in [0, 1), got {eps}")
    if poly.nrows and np.any(poly.h <= 0.0):
        raise ValueError("tighten requires strictly positive offsets "
                         "(0 must be in the interior)")
    return Polyhedron(poly.H, (1.0 - eps) * poly.h)


def remove_redundant_rows(rows, context: Polyhedron, tol=TOL_RED):
    """Drop rows of (H, h) that never bind over (remaining rows ∩ context).

    Sequential sweep: row l is tested against the context, the rows before
    it that survived, and the rows after it. Drop if the maximum of
    H_l z over that set is <= h_l + tol, or if the test LP is infeasible
    (the row is vacuous on an empty set). Keep on unbounded.

    Returns the surviving (H, h). Deterministic for fixed input order.
    """
    H, h = rows
    H = _as_matrix(H)
    h = _as_vector(h, H.shape[0])
    m = H.shape[0]
    if m == 0:
        return H.copy(), h.copy()
    if H.shape[1] != context.dim:
        raise ValueError(f"row dim {H.shape[1]} != context dim {context.dim}")
    keep = np.ones(m, dtype=bool)
    for ell in range(m):
        others = keep.copy()
        others[ell] = False
        test = Polyhedron(
            np.vstack([H[others], context.H]),
            np.concatenate([h[others], context.h]),
        ) if (others.any() or context.nrows) else Polyhedron.full_space(context.dim)
        res = lp_solve(H[ell], test)
        if res.status == INFEASIBLE:
            keep[ell] = False
        elif res.status == OPTIMAL and res.value <= h[ell] + tol:
            keep[ell] = False
        # unbounded -> the row cuts something off; keep it
    return H[keep].copy(), h[keep].copy()


def cross_section(poly: Polyhedron, value: float, axis: int = -1) -> Polyhedron:
    """Fix one coordinate and project the rows onto the rest.

    Rows that lose all coefficients become 0 <= h': vacuous ones are
    dropped, violated ones make the slice empty.
    """
    d = poly.dim
    axis = axis % d
    rest = [j for j in range(d) if j != axis]
    Hx = poly.H[:, rest]
    hx = poly.h - poly.H[:, axis] * value
    lead = np.max(np.abs(Hx), axis=1) if poly.nrows else np.zeros(0)
    degenerate = lead == 0.0
    if np.any(hx[degenerate] < -TOL_FEAS):
        return Polyhedron.empty(d - 1)
    keepers = ~degenerate
    return Polyhedron(Hx[keepers], hx[keepers])


def vertices_2d(poly: Polyhedron, tol=TOL_GEOM):
    """Vertices of a bounded 2-D polyhedron, CCW order. [] if empty.

    Pairwise facet intersections filtered by feasibility, then merged
    within `tol` and sorted by angle around the centroid. Raises on
    unbounded input (checked with 4 axis LPs first) and on dim != 2.
    """
    if poly.dim != 2:
        raise ValueError(f"vertices_2d needs a 2-D set, got dim {poly.dim}")
    if is_empty(poly):
        return []
    for c in (np.array([1.0, 0.0]), np.array([-1.0, 0.0]),
              np.array([0.0, 1.0]), np.array([0.0, -1.0])):
        if lp_solve(c, poly).status == UNBOUNDED:
            raise ValueError("vertices_2d: set is unbounded")
    H, h = poly.H, poly.h
    feas_tol = max(TOL_FEAS, tol)
    cands = []
    for i in range(poly.nrows):
        for j in range(i + 1, poly.nrows):
            A = H[[i, j]]
            det = A[0, 0] * A[1, 1] - A[0, 1] * A[1, 0]
            scale = np.max(np.abs(A))
            if abs(det) <= 1e-12 * max(scale * scale, 1.0):
                continue
            p = np.linalg.solve(A, h[[i, j]])
            if np.all(H @ p <= h + feas_tol * (1.0 + np.abs(h))):
                cands.append(p)
    if not cands:
        return []
    uniq = []
    for p in cands:
        if all(np.linalg.norm(p - q) > tol for q in uniq):
            uniq.append(p)
    center = np.mean(uniq, axis=0)
    uniq.sort(key=lambda p: np.arctan2(p[1] - center[1], p[0] - center[0]))
    return [np.asarray(p) for p in uniq]


@dataclass(frozen=True)
class ConstraintBundle:
    """Ordered generations of constraint rows produced by propagation.

    Each generation is an (H, h) pair; the flattened stack is the
    bundle's polyhedron. Generations keep their identity because the
    outer algorithm filters and re-seeds them generation-wise.
    """

    generations: tuple = field(default_factory=tuple)

    def __post_init__(self):
        gens = []
        for H, h in self.generations:
            H = _as_matrix(H)
            gens.append((H, _as_vector(h, H.shape[0])))
        object.__setattr__(self, "generations", tuple(gens))

    @property
    def nrows(self):
        return sum(H.shape[0] for H, _ in self.generations)

    def flatten(self):
        return stack_rows(*self.generations)

    def as_polyhedron(self, dim=None):
        H, h = self.flatten()
        if H.shape[0] == 0:
            if dim is None and H.shape[1] == 0:
                raise ValueError("empty bundle with unknown dimension")
            return Polyhedron.full_space(H.shape[1] if dim is None else dim)
        return Polyhedron(H, h)


# ---------------------------------------------------------------------------
# file formats

def write_polyhedron_json(path, poly: Polyhedron):
    with open(path, "w") as f:
        json.dump(poly.to_dict(), f, indent=2)
        f.write("\n")


def read_polyhedron_json(path) -> Polyhedron:
    with open(path) as f:
        return Polyhedron.from_dict(json.load(f))


def write_polygons_csv(path, polygons):
    """Vertex loops to CSV: header, then one polygon per block, blank
    record between polygons. 17 significant digits so re-runs are
    byte-identical."""
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["vertex_index", "x1", "x2"])
        for b, loop in enumerate(polygons):
            if b:
                w.writerow([])
            for i, p in enumerate(loop):
                w.writerow([i, "%.17g" % p[0], "%.17g" % p[1]])


def read_polygons_csv(path):
    polygons = [[]]
    with open(path, newline="") as f:
        r = csv.reader(f)
        header = next(r, None)
        if header is None or header[:1] != ["vertex_index"]:
            raise ValueError(f"{path}: not a polygon CSV")
        for row in r:
            if not row or all(c == "" for c in row):
                if polygons[-1]:
                    polygons.append([])
                continue
            polygons[-1].append([float(row[1]), float(row[2])])
    if polygons and not polygons[-1]:
        polygons.pop()
    return [np.asarray(p) for p in polygons]
