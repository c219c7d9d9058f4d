"""Plant, prestabilized loop and the constraint regions.

Single-input discrete LTI plant

    x+ = A x + B u,   y = C x + D u,

with input range u_lo <= u <= u_hi and output set Y = {y : Hy y <= hy}.
References enter through the steady-state family: [G_x; G_u] spans the
null space of [A - I, B] (required to be one-dimensional) and
G_y = C G_x + D G_u. The prestabilizer u = G_u r - K (x - G_x r) turns
(x, r) into the lifted state z with closed-loop data

    A_hat = A - B K          B_hat = B (G_u + K G_x)
    C_hat = C - D K          D_hat = D (G_u + K G_x)

Everything downstream works in z = (x, r), dimension n + 1.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import geometry
from .errors import ModelError
from .geometry import Polyhedron

_NULLITY_TOL = 1e-10
_EQ_RESIDUAL_TOL = 1e-10


@dataclass(frozen=True)
class Plant:
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray

    def __post_init__(self):
        A = np.asarray(self.A, dtype=float)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise ModelError(f"A must be square, got shape {A.shape}")
        n = A.shape[0]
        B = np.asarray(self.B, dtype=float).reshape(n, -1)
        if B.shape[1] != 1:
            raise ModelError("single-input plant required: B must be n x 1")
        if np.max(np.abs(B)) == 0.0:
            raise ModelError("B must be nonzero")
        C = np.atleast_2d(np.asarray(self.C, dtype=float))
        if C.shape[1] != n:
            raise ModelError(f"C must have {n} columns, got shape {C.shape}")
        D = np.asarray(self.D, dtype=float).reshape(C.shape[0], 1)
        for name, M in (("A", A), ("B", B), ("C", C), ("D", D)):
            if not np.all(np.isfinite(M)):
                raise ModelError(f"{name} must be finite")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "C", C)
        object.__setattr__(self, "D", D)

    @property
    def n(self):
        return self.A.shape[0]

    @property
    def l(self):
        return self.C.shape[0]


@dataclass(frozen=True)
class OutputConstraints:
    """Y = {y : H y <= h} with 0 in the interior (h > 0)."""

    H: np.ndarray
    h: np.ndarray

    def __post_init__(self):
        H = np.asarray(self.H, dtype=float)
        h = np.asarray(self.h, dtype=float).reshape(-1)
        if H.ndim != 2 or H.shape[0] != h.shape[0]:
            raise ModelError(f"output constraint shapes do not match: "
                             f"H {H.shape}, h {h.shape}")
        if np.any(h <= 0.0):
            raise ModelError("output constraints must have strictly positive "
                             "offsets (0 in the interior of Y)")
        object.__setattr__(self, "H", H)
        object.__setattr__(self, "h", h)

    def as_polyhedron(self):
        return Polyhedron(self.H, self.h)


def equilibrium_basis(plant: Plant):
    """(G_x, G_u, residual) spanning null([A - I, B]), normalized.

    Normalization: G_u = 1 when the input participates in the steady
    state, otherwise the largest-magnitude entry of G_x is scaled to 1.
    Raises ModelError unless the nullity is exactly one.
    """
    n = plant.n
    M = np.hstack([plant.A - np.eye(n), plant.B])
    _, s, Vt = np.linalg.svd(M)
    smax = s[0] if s.size else 0.0
    null_mask = s <= _NULLITY_TOL * max(smax, 1.0)
    nullity = (n + 1) - np.count_nonzero(~null_mask) if s.size else n + 1
    if nullity != 1:
        raise ModelError(f"null space of [A - I, B] must be one-dimensional, "
                         f"got nullity {nullity}")
    v = Vt[-1]
    gu = v[-1]
    if abs(gu) > 1e-9 * np.max(np.abs(v)):
        v = v / gu
    else:
        v = v.copy()
        v[-1] = 0.0
        k = int(np.argmax(np.abs(v[:n])))
        v = v / v[k]
    G_x, G_u = v[:n].copy(), float(v[n])
    residual = float(np.max(np.abs((plant.A - np.eye(n)) @ G_x
                                   + plant.B[:, 0] * G_u)))
    if residual > _EQ_RESIDUAL_TOL:
        raise ModelError(f"equilibrium residual {residual:.3e} exceeds "
                         f"{_EQ_RESIDUAL_TOL:.0e}")
    return G_x, G_u, residual


def spectral_radius(M):
    return float(np.max(np.abs(np.linalg.eigvals(M))))


@dataclass(frozen=True)
class SaturatedLoop:
    """Plant + prestabilizer + input range + tightening, precomputed."""

    plant: Plant
    K: np.ndarray
    u_lo: float
    u_hi: float
    eps: float
    G_x: np.ndarray
    G_u: float
    G_y: np.ndarray
    A_hat: np.ndarray
    B_hat: np.ndarray
    C_hat: np.ndarray
    D_hat: np.ndarray
    R: Polyhedron

    @classmethod
    def build(cls, plant: Plant, K, u_lo: float, u_hi: float, eps: float,
              outc: OutputConstraints) -> "SaturatedLoop":
        K = np.asarray(K, dtype=float).reshape(1, plant.n)
        if not u_lo < 0.0 < u_hi:
            raise ModelError(f"input range must contain 0 in its interior, "
                             f"got [{u_lo}, {u_hi}]")
        if not 0.0 < eps < 1.0:
            raise ModelError(f"eps must be in (0, 1), got {eps}")
        G_x, G_u, _ = equilibrium_basis(plant)
        A_hat = plant.A - plant.B @ K
        rho = spectral_radius(A_hat)
        if rho >= 1.0:
            raise ModelError(f"A - B K must be Schur, spectral radius {rho:.6f}")
        ff = float(G_u + (K @ G_x)[0])
        B_hat = (plant.B * ff)[:, 0]
        C_hat = plant.C - plant.D @ K
        D_hat = (plant.D * ff)[:, 0]
        R = _reference_set(G_x, G_u, plant.C, plant.D, u_lo, u_hi, outc)
        return cls(plant=plant, K=K, u_lo=float(u_lo), u_hi=float(u_hi),
                   eps=float(eps), G_x=G_x, G_u=G_u,
                   G_y=plant.C @ G_x + plant.D[:, 0] * G_u,
                   A_hat=A_hat, B_hat=B_hat, C_hat=C_hat, D_hat=D_hat, R=R)

    @property
    def n(self):
        return self.plant.n

    @property
    def dim(self):
        """Lifted state dimension, n + 1."""
        return self.plant.n + 1

    @property
    def ff_gain(self):
        """G_u + K G_x: the reference feedthrough of the prestabilizer."""
        return float(self.G_u + (self.K @ self.G_x)[0])

    def demand_row(self):
        """Row w with w z = the unsaturated input demand at z = (x, r)."""
        return np.concatenate([-self.K[0], [self.ff_gain]])

    def lifted_hat(self):
        """blockdiag-style map z -> (A_hat x + B_hat r, r)."""
        n = self.n
        M = np.zeros((n + 1, n + 1))
        M[:n, :n] = self.A_hat
        M[:n, n] = self.B_hat
        M[n, n] = 1.0
        return M

    def lifted_plain(self):
        """z -> (A x, r): open-loop state map with the reference frozen."""
        n = self.n
        M = np.zeros((n + 1, n + 1))
        M[:n, :n] = self.plant.A
        M[n, n] = 1.0
        return M

    def reference_band(self) -> Polyhedron:
        """(1 - eps) R lifted to z-space: rows act on the r coordinate."""
        Rt = geometry.tighten(self.R, self.eps)
        H = np.zeros((Rt.nrows, self.dim))
        H[:, -1] = Rt.H[:, 0]
        return Polyhedron(*geometry.normalize_rows(H, Rt.h))


def _reference_set(G_x, G_u, C, D, u_lo, u_hi, outc: OutputConstraints):
    """R = {r : u_lo <= G_u r <= u_hi, H_y G_y r <= h_y}, zero rows pruned."""
    G_y = C @ G_x + D[:, 0] * G_u
    coeffs = np.concatenate([[G_u, -G_u], outc.H @ G_y])
    offs = np.concatenate([[u_hi, -u_lo], outc.h])
    keep = np.abs(coeffs) > 1e-12 * max(1.0, float(np.max(np.abs(coeffs))))
    if np.any(offs[~keep] <= 0.0):
        raise ModelError("reference set is structurally empty "
                         "(a zero-coefficient row has nonpositive offset)")
    if not np.any(keep):
        raise ModelError("reference set is unbounded: no constraint touches r")
    return Polyhedron(coeffs[keep].reshape(-1, 1), offs[keep])


@dataclass(frozen=True)
class RegionTriple:
    """S (linear regime), S_up (demand >= u_hi), S_lo (demand <= u_lo)."""

    S: Polyhedron
    S_up: Polyhedron
    S_lo: Polyhedron


def build_regions(loop: SaturatedLoop) -> RegionTriple:
    band = loop.reference_band()
    w = loop.demand_row()

    def block(H, h):
        return geometry.intersect(
            Polyhedron(*geometry.normalize_rows(np.atleast_2d(H), h)), band)

    S = block(np.vstack([w, -w]), np.array([loop.u_hi, -loop.u_lo]))
    S_up = block(-w, np.array([-loop.u_hi]))
    S_lo = block(w, np.array([loop.u_lo]))
    return RegionTriple(S=S, S_up=S_up, S_lo=S_lo)


def observability_rank(plant: Plant) -> int:
    blocks = [plant.C]
    M = plant.C.copy()
    for _ in range(plant.n - 1):
        M = M @ plant.A
        blocks.append(M)
    return int(np.linalg.matrix_rank(np.vstack(blocks)))


def validate(loop: SaturatedLoop, outc: OutputConstraints) -> dict:
    """Structural diagnostics. Reported, not enforced, except where the
    constructors already raised."""
    from . import propagation  # local import to avoid a cycle

    plant = loop.plant
    up, lo = propagation.control_authority(loop)
    return {
        "spectral_radius": spectral_radius(loop.A_hat),
        "schur": spectral_radius(loop.A_hat) < 1.0,
        "input_range": [loop.u_lo, loop.u_hi],
        "origin_in_input_interior": loop.u_lo < 0.0 < loop.u_hi,
        "origin_in_output_interior": bool(np.all(outc.h > 0.0)),
        "equilibrium_residual": equilibrium_basis(plant)[2],
        "observability_rank": observability_rank(plant),
        "observable": observability_rank(plant) == plant.n,
        "reference_rows": loop.R.nrows,
        "authority_upper": {"applicable": up.applicable,
                            "condition_value": up.condition_value},
        "authority_lower": {"applicable": lo.applicable,
                            "condition_value": lo.condition_value},
    }
