"""Constraint propagation: authority rows, seeds, guards and caps."""

import dataclasses

import numpy as np
import pytest

from isoas.errors import CapExceededError
from isoas.geometry import (Polyhedron, is_empty, lp_solve, normalize_rows,
                            stack_rows, OPTIMAL)
from isoas.model import build_regions
from isoas.propagation import (control_authority, empty_set_prevention,
                               nonsat_seed, propagate_nonsat, propagate_upper,
                               propagate_lower, saturated_seed)

from helpers import sets_equal_sampled


# ---------------------------------------------------------------------------
# control authority rows

def test_authority_inapplicable_when_A_has_unit_eigenvalue(problems):
    _, loop, _, _ = problems["example1"]
    up, lo = control_authority(loop)
    assert not up.applicable and not lo.applicable
    assert up.condition_value is None


def test_authority_applicable_coupled_plant(problems):
    _, loop, _, _ = problems["example2"]
    up, lo = control_authority(loop)
    assert up.applicable and lo.applicable
    assert abs(up.condition_value - (-1.2592403945269859)) <= 1e-9

    # saturated rest points: x+ = Ax + B u_sat has the unique fixed point
    # (I - A)^{-1} B u_sat
    assert np.max(np.abs(up.x_rest - np.array([-2.0, 0.0]))) <= 1e-9
    assert np.max(np.abs(lo.x_rest - np.array([2.0, 0.0]))) <= 1e-9

    # both offsets evaluate the demand bound at the rest point
    assert abs(up.offset - 4.495888385108702) <= 1e-9
    assert abs(lo.offset - 4.495888385108702) <= 1e-9

    # row directions: upper bounds -Kx from above, lower from below
    assert np.allclose(up.row[:2], -loop.K[0]) or np.allclose(
        normalize_rows(up.row[None, :2], np.array([up.offset]))[0][0],
        normalize_rows(-loop.K, np.array([1.0]))[0][0])
    assert up.row[2] == 0.0 and lo.row[2] == 0.0


def test_authority_inapplicable_positive_condition(problems):
    _, loop, _, _ = problems["example3"]
    up, lo = control_authority(loop)
    assert not up.applicable and not lo.applicable
    assert abs(up.condition_value - 43.5876) <= 1e-6
    assert up.condition_value > 0


def test_authority_rest_points_are_fixed_points(problems):
    _, loop, _, _ = problems["example2"]
    up, lo = control_authority(loop)
    A, B = loop.plant.A, loop.plant.B[:, 0]
    assert np.max(np.abs(A @ up.x_rest + B * loop.u_hi - up.x_rest)) <= 1e-9
    assert np.max(np.abs(A @ lo.x_rest + B * loop.u_lo - lo.x_rest)) <= 1e-9


# ---------------------------------------------------------------------------
# seed rows

def test_nonsat_seed_structure(problems):
    _, loop, outc, _ = problems["example1"]
    H, h = nonsat_seed(loop, outc)
    # two demand rows plus one lifted output row per output constraint
    assert H.shape == (2 + outc.H.shape[0], 3)
    w = loop.demand_row()
    assert np.allclose(H[0], w) and abs(h[0] - loop.u_hi) <= 1e-12
    assert np.allclose(H[1], -w) and abs(h[1] + loop.u_lo) <= 1e-12
    # output rows evaluate y through the prestabilized loop matrices
    assert np.allclose(H[2:], np.column_stack(
        [outc.H @ loop.C_hat, outc.H @ loop.D_hat]))
    assert np.allclose(h[2:], outc.h)


def test_saturated_seed_offsets(problems):
    _, loop, outc, _ = problems["example2"]
    up, lo = control_authority(loop)
    H, h = saturated_seed(loop, outc, up, loop.u_hi)
    # output rows first: H_y C x <= h_y - H_y D u_sat, then the authority row
    assert H.shape[0] == outc.H.shape[0] + 1
    assert np.all(H[:, 2][:-1] == 0.0)
    raw_H = np.hstack([outc.H @ loop.plant.C, np.zeros((outc.H.shape[0], 1))])
    raw_h = outc.h - (outc.H @ loop.plant.D)[:, 0] * loop.u_hi
    assert np.allclose(H[:-1], raw_H) and np.allclose(h[:-1], raw_h)


def test_saturated_seed_no_authority_row(problems):
    _, loop, outc, _ = problems["example1"]
    up, _ = control_authority(loop)
    H, h = saturated_seed(loop, outc, up, loop.u_hi)
    assert H.shape[0] == outc.H.shape[0]


# ---------------------------------------------------------------------------
# empty-set prevention (unit behavior)

def test_prevention_drops_row_made_infeasible_by_partner():
    # partner row x1 <= -3 contradicts the seed box |x| <= 1, so the
    # candidate row's feasible set is empty and it must be dropped
    seed = (np.array([[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]]),
            np.array([1.0, 1.0, 1.0, 1.0]))
    region = Polyhedron.full_space(2)
    H1 = np.array([[1.0, 0.0]])
    h1 = np.array([5.0])
    H2 = np.array([[1.0, 0.0]])
    h2 = np.array([-3.0])
    kept, Hf, hf = empty_set_prevention((H1, h1), (H2, h2), seed, region,
                                        1e-9)
    assert kept.size == 0 and Hf.shape[0] == 0


def test_prevention_keeps_binding_row():
    # partner row is vacuous; the candidate genuinely cuts the box
    seed = (np.array([[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]]),
            np.array([2.0, 2.0, 2.0, 2.0]))
    region = Polyhedron.full_space(2)
    H1 = np.array([[1.0, 0.0]])
    h1 = np.array([1.0])
    H2 = np.array([[1.0, 0.0]])
    h2 = np.array([100.0])
    kept, Hf, hf = empty_set_prevention((H1, h1), (H2, h2), seed, region,
                                        1e-9)
    assert list(kept) == [0]
    assert np.allclose(Hf, H1) and np.allclose(hf, h1)


def test_prevention_drops_row_that_cannot_bind():
    # candidate already implied by the seed: max x1 over the box is 2 <= 5
    seed = (np.array([[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]]),
            np.array([2.0, 2.0, 2.0, 2.0]))
    region = Polyhedron.full_space(2)
    H1 = np.array([[1.0, 0.0]])
    h1 = np.array([5.0])
    H2 = np.array([[0.0, 1.0]])
    h2 = np.array([100.0])
    kept, _, _ = empty_set_prevention((H1, h1), (H2, h2), seed, region, 1e-9)
    assert kept.size == 0


# ---------------------------------------------------------------------------
# propagation routes

def test_redundant_seed_terminates_immediately(problems):
    _, loop, _, opts = problems["example1"]
    regions = build_regions(loop)
    seed = normalize_rows(np.array([[1.0, 0.0, 0.0], [-1.0, 0.0, 0.0]]),
                          np.array([1e6, 1e6]))
    res = propagate_nonsat(regions.S, seed, loop, opts)
    assert res.steps == 1
    flat_H, flat_h = res.bundle.flatten()
    assert np.allclose(flat_H, seed[0]) and np.allclose(flat_h, seed[1])
    assert sets_equal_sampled(res.Q, regions.S,
                              np.array([-8.0, -8.0, -6.0]),
                              np.array([8.0, 8.0, 6.0]))


def test_nonsat_route_step_count(problems, iso_results):
    _, loop, outc, opts = problems["example1"]
    regions = build_regions(loop)
    res = propagate_nonsat(regions.S, nonsat_seed(loop, outc), loop, opts)
    assert res.steps == 28


def test_nonsat_dichotomy(problems, iso_results):
    # inside the computed non-saturated set, one lifted step either stays
    # in the set or leaves the demand region entirely
    _, loop, _, _ = problems["example1"]
    res = iso_results["example1"]
    regions = res.regions
    M = loop.lifted_hat()
    rng = np.random.default_rng(11)
    from isoas.oracle import sample_in_sets
    Z = sample_in_sets([res.Q], 100, rng)
    for z in Z:
        zn = M @ z
        assert res.Q.contains(zn, tol=1e-7) or not regions.S.contains(
            zn, tol=-1e-9)


def test_saturated_route_requires_prevention(problems):
    _, loop, outc, opts = problems["example1"]
    regions = build_regions(loop)
    up, _ = control_authority(loop)
    seed = saturated_seed(loop, outc, up, loop.u_hi)

    off = dataclasses.replace(opts, empty_set_prevention=False)
    res_off = propagate_upper(regions.S_up, seed, loop, off)
    assert is_empty(res_off.Q)

    res_on = propagate_upper(regions.S_up, seed, loop, opts)
    assert not is_empty(res_on.Q)
    assert res_on.prevention_dropped > 0


def test_inner_step_cap(problems):
    _, loop, outc, opts = problems["example1"]
    regions = build_regions(loop)
    tight = dataclasses.replace(
        opts, caps=dataclasses.replace(opts.caps, k_max=3))
    with pytest.raises(CapExceededError) as exc:
        propagate_nonsat(regions.S, nonsat_seed(loop, outc), loop, tight)
    assert exc.value.diagnostics.get("k") == 3
    assert "k_max" in str(exc.value)


def test_row_budget_cap(problems):
    _, loop, outc, opts = problems["example1"]
    regions = build_regions(loop)
    tiny = dataclasses.replace(
        opts, caps=dataclasses.replace(opts.caps, row_max=10))
    with pytest.raises(CapExceededError):
        propagate_nonsat(regions.S, nonsat_seed(loop, outc), loop, tiny)


def test_route_set_equals_region_plus_bundle(problems, iso_results):
    _, loop, outc, opts = problems["example2"]
    regions = build_regions(loop)
    res = propagate_nonsat(regions.S, nonsat_seed(loop, outc), loop, opts)
    flat = res.bundle.flatten()
    rebuilt = Polyhedron(H=stack_rows((regions.S.H, regions.S.h), flat)[0],
                         h=stack_rows((regions.S.H, regions.S.h), flat)[1])
    assert sets_equal_sampled(res.Q, rebuilt,
                              np.array([-8.0, -8.0, -3.0]),
                              np.array([8.0, 8.0, 3.0]))


def test_lower_route_mirrors_upper(problems):
    # example 2 is symmetric under (x, r) -> (-x, -r); the lower route's
    # demand extremum mirrors the upper one
    _, loop, _, opts = problems["example2"]
    regions = build_regions(loop)
    up, lo = control_authority(loop)
    outc = problems["example2"][2]
    res_up = propagate_upper(regions.S_up, saturated_seed(loop, outc, up,
                                                          loop.u_hi),
                             loop, opts)
    res_lo = propagate_lower(regions.S_lo, saturated_seed(loop, outc, lo,
                                                          loop.u_lo),
                             loop, opts)
    w = loop.demand_row()
    r_up = lp_solve(w, res_up.Q)
    r_lo = lp_solve(-w, res_lo.Q)
    assert r_up.status == OPTIMAL and r_lo.status == OPTIMAL
    assert abs(r_up.value - r_lo.value) <= 1e-7
