"""Simulation oracle, LQR synthesis, membership classification, sampling."""

import numpy as np
import pytest
import scipy.linalg

from isoas.errors import ModelError
from isoas.model import Plant
from isoas.oracle import (MEMBER, NONMEMBER, UNDECIDED, dare_residual,
                          demand, lqr_gain, omega_membership,
                          omega_membership_batch, sample_in_sets, saturate,
                          simulate, verify_set)
from isoas.sets import compute_moas

from helpers import union_contains_many


# ---------------------------------------------------------------------------
# saturation and simulation

def test_saturate_clips():
    assert saturate(5.0, -2.0, 2.0) == 2.0
    assert saturate(-5.0, -2.0, 2.0) == -2.0
    assert saturate(0.5, -2.0, 2.0) == 0.5


def test_saturate_rejects_bad_range():
    with pytest.raises(ModelError):
        saturate(0.0, 2.0, -2.0)


def test_simulate_matches_manual_rollout(problems):
    _, loop, _, _ = problems["example2"]
    A, B = loop.plant.A, loop.plant.B[:, 0]
    # start far enough out that the demand saturates on early steps
    x0 = np.array([4.0, 3.0])
    r = 1.5
    T = 40
    traj = simulate(loop, x0, r, T)
    assert traj.states.shape == (T + 1, 2)
    assert traj.inputs.shape == (T,)

    x = x0.copy()
    for k in range(T):
        u = saturate(demand(loop, x, r), loop.u_lo, loop.u_hi)
        assert abs(traj.inputs[k] - u) <= 1e-12
        x = A @ x + B * u
        assert np.max(np.abs(traj.states[k + 1] - x)) <= 1e-12
    assert np.all(traj.inputs >= loop.u_lo - 1e-12)
    assert np.all(traj.inputs <= loop.u_hi + 1e-12)
    # the chosen start actually exercises the saturation branch
    assert np.any(np.abs(traj.demands) > loop.u_hi)


def test_simulate_outputs(problems):
    _, loop, _, _ = problems["example1"]
    traj = simulate(loop, np.array([0.3, -0.2]), 0.5, 10)
    C, D = loop.plant.C, loop.plant.D[:, 0]
    for k in range(10):
        y = C @ traj.states[k] + D * traj.inputs[k]
        assert np.max(np.abs(traj.outputs[k] - y)) <= 1e-12


# ---------------------------------------------------------------------------
# LQR synthesis against an independent Riccati solve

@pytest.mark.parametrize("name", ["example1", "example2"])
def test_lqr_gain_matches_scipy(name, problems):
    plant = problems[name][0]
    Q, R = np.eye(2), np.array([[1.0]])
    K, P = lqr_gain(plant, Q, R)
    P_ref = scipy.linalg.solve_discrete_are(plant.A, plant.B, Q, R)
    K_ref = np.linalg.solve(R + plant.B.T @ P_ref @ plant.B,
                            plant.B.T @ P_ref @ plant.A)
    assert np.max(np.abs(K - K_ref)) <= 1e-9
    assert np.max(np.abs(P - P_ref)) <= 1e-7
    assert dare_residual(plant, Q, R, P) <= 1e-10


def test_lqr_gain_deadbeat_plant():
    plant = Plant(A=np.zeros((2, 2)), B=np.array([[1.0], [0.0]]),
                  C=np.eye(2), D=np.zeros((2, 1)))
    Q, R = np.eye(2), np.array([[1.0]])
    K, P = lqr_gain(plant, Q, R)
    assert np.max(np.abs(P - Q)) <= 1e-12
    assert np.max(np.abs(K)) <= 1e-12


def test_lqr_gain_rejects_unstabilizable():
    # uncontrollable unstable mode: no stabilizing solution exists
    plant = Plant(A=np.array([[2.0, 0.0], [0.0, 0.5]]),
                  B=np.array([[0.0], [1.0]]),
                  C=np.eye(2), D=np.zeros((2, 1)))
    with pytest.raises(ModelError):
        lqr_gain(plant, np.eye(2), np.array([[1.0]]))


# ---------------------------------------------------------------------------
# membership classification

def test_origin_is_member(problems, moas_results):
    _, loop, outc, _ = problems["example2"]
    moas = moas_results["example2"].O
    assert omega_membership(loop, outc, moas, np.zeros(3)) == MEMBER


def test_immediate_violation_is_nonmember(problems, moas_results):
    _, loop, outc, _ = problems["example2"]
    moas = moas_results["example2"].O
    z = np.array([20.0, 0.0, 0.0])  # y1 = 20 breaks |y1| <= 5 at k = 0
    assert omega_membership(loop, outc, moas, z) == NONMEMBER


def test_tiny_horizon_is_undecided(problems, moas_results):
    _, loop, outc, _ = problems["example2"]
    moas = moas_results["example2"].O
    # admissible now, outside the no-saturation set, zero look-ahead
    z = np.array([3.0, 2.0, 1.0])
    assert not moas.contains(z)
    assert omega_membership(loop, outc, moas, z, T_max=0) == UNDECIDED


def test_membership_persists_along_trajectories(problems, moas_results,
                                                iso_results):
    # a state classified as a member stays a member along its own orbit
    _, loop, outc, _ = problems["example2"]
    moas = moas_results["example2"].O
    rng = np.random.default_rng(5)
    Z = sample_in_sets(list(iso_results["example2"].sets().values()), 20, rng)
    for z in Z:
        if omega_membership(loop, outc, moas, z) != MEMBER:
            continue
        traj = simulate(loop, z[:2], z[2], 10)
        for k in (5, 10):
            zk = np.append(traj.states[k], z[2])
            assert omega_membership(loop, outc, moas, zk) == MEMBER


def test_batch_matches_scalar(problems, moas_results):
    _, loop, outc, _ = problems["example2"]
    moas = moas_results["example2"].O
    Z = np.array([[0.0, 0.0, 0.0],
                  [20.0, 0.0, 0.0],
                  [3.0, 2.0, 1.0]])
    labels = omega_membership_batch(loop, outc, moas, Z, T_max=50)
    assert list(labels) == [omega_membership(loop, outc, moas, z, T_max=50)
                            for z in Z]


# ---------------------------------------------------------------------------
# sampling

def test_sample_in_sets_deterministic(iso_results):
    sets = list(iso_results["example1"].sets().values())
    Z1 = sample_in_sets(sets, 50, np.random.default_rng(42))
    Z2 = sample_in_sets(sets, 50, np.random.default_rng(42))
    assert np.array_equal(Z1, Z2)
    assert Z1.shape == (50, 3)


def test_sample_in_sets_members_only(iso_results):
    sets = list(iso_results["example3"].sets().values())
    Z = sample_in_sets(sets, 200, np.random.default_rng(8))
    assert union_contains_many(sets, Z, tol=1e-12).all()


# ---------------------------------------------------------------------------
# verification driver

def test_verify_report_structure(problems, iso_results, moas_results):
    _, loop, outc, _ = problems["example2"]
    sets = list(iso_results["example2"].sets().values())
    rep = verify_set(sets, loop, outc, moas=moas_results["example2"].O,
                     n_samples=200, T=50, seed=3)
    assert rep["ok"] is True
    assert rep["invariance_violations"] == 0
    assert rep["admissibility_violations"] == 0
    assert rep["classification_violations"] == 0
    assert rep["violations"] == []
    assert rep["saturation_events"] > 0
    assert rep["worst_output_margin"] <= 0.0


def test_verify_moas_target_never_saturates(problems, moas_results):
    _, loop, outc, _ = problems["example1"]
    rep = verify_set([moas_results["example1"].O], loop, outc,
                     n_samples=200, T=50, seed=3)
    assert rep["ok"] is True
    assert rep["saturation_events"] == 0


def test_verify_empty_target(problems):
    from isoas.geometry import Polyhedron
    _, loop, outc, _ = problems["example1"]
    rep = verify_set([Polyhedron.empty(3)], loop, outc, n_samples=10, T=5)
    assert rep.get("empty_target") is True
    assert "ok" not in rep
