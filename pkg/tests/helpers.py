"""Shared helpers for the test suite: slice grids, sampling, set equality."""

import numpy as np

from isoas import geometry


def band_halfwidth(loop):
    """Effective half-width of the tightened reference band.

    The band can carry several row pairs (input-derived and
    output-derived bounds on r); the attainable range is set by the
    tightest one.
    """
    band = loop.reference_band()
    lead = np.abs(band.H[:, -1])
    mask = lead > 0
    return float(np.min(band.h[mask] / lead[mask]))


def moas_slice_vertices(moas_poly, loop, grid=21):
    """All (z, r) vertex points of the MOAS slices over the band grid."""
    rmax = band_halfwidth(loop)
    points = []
    for r in np.linspace(-rmax, rmax, grid):
        sl = geometry.cross_section(moas_poly, r)
        if sl.nrows == 0 or geometry.is_empty(sl):
            continue
        for v in geometry.vertices_2d(sl):
            points.append(np.array([v[0], v[1], r]))
    return points


def union_contains_many(polys, Z, tol=geometry.TOL_FEAS):
    inside = np.zeros(np.asarray(Z).shape[0], dtype=bool)
    for p in polys:
        inside |= p.contains_many(Z, tol)
    return inside


def sets_equal_sampled(a, b, box_lo, box_hi, n=1000, seed=0, tol=1e-8):
    """Membership equality of two polyhedra over a seeded sample box."""
    rng = np.random.default_rng(seed)
    d = a.dim
    Z = box_lo + (np.asarray(box_hi) - np.asarray(box_lo)) * rng.random((n, d))
    return bool(np.all(a.contains_many(Z, tol) == b.contains_many(Z, tol)))


def random_bounded_polyhedron(rng, d=2, extra_rows=6, radius=5.0):
    """A bounded random polyhedron: a box plus random halfplanes.

    The box guarantees boundedness; the halfplanes all keep the origin
    inside so the result is nonempty.
    """
    H = [np.eye(d), -np.eye(d)]
    h = [np.full(d, radius), np.full(d, radius)]
    A = rng.normal(size=(extra_rows, d))
    norms = np.linalg.norm(A, axis=1, keepdims=True)
    A = A / np.maximum(norms, 1e-12)
    b = rng.uniform(0.5, radius, size=extra_rows)
    H.append(A)
    h.append(b)
    return geometry.Polyhedron(np.vstack(H), np.concatenate(h))
