import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from projsa.engine import (
    ExplicitPoints,
    Full,
    NonFiniteDriftError,
    Problem,
    Thin,
    Window,
    check_step_invariants,
    policy_from_dict,
    run,
    step_prox_v1,
    step_prox_v2,
    step_rm,
)
from projsa.geometry import Box, face_signature, in_normal_cone
from projsa.problems import ConstantDrift, make_composite, make_quadratic, make_rotation
from projsa.prox import Penalty
from projsa.schedules import (
    GaussianIID,
    NoiseModel,
    Polynomial,
    PowerBias,
    ScaledGaussian,
    Table,
    UniformIID,
    make_rng,
)

QUIET = NoiseModel()


def const_problem(direction, lower=0.0, upper=1.0, penalty=None, f=None):
    d = np.atleast_1d(np.asarray(direction, dtype=float))
    box = Box(np.full(d.size, lower), np.full(d.size, upper))
    return Problem(drift=ConstantDrift(d), box=box, H=max(float(np.linalg.norm(d)), 1e-12),
                   penalty=penalty, check=False)


def test_step_rm_examples():
    p = const_problem([1.0])
    rec, _ = step_rm(p, [0.9], 1, Table((0.5,)), QUIET, make_rng(0))
    assert rec.x.tolist() == [1.0]
    assert rec.P[0] == pytest.approx(0.4, abs=1e-15)
    rec, _ = step_rm(const_problem([0.0]), [0.3], 1, Table((0.5,)), QUIET, make_rng(0))
    assert rec.x.tolist() == [0.3] and rec.P.tolist() == [0.0]
    rec, _ = step_rm(p, [0.5], 1, Table((0.1,)), QUIET, make_rng(0))
    assert rec.x.tolist() == [0.6] and rec.P.tolist() == [0.0]


def test_step_rejects_nonfinite_drift():
    bad = Problem(drift=lambda x: np.array([np.nan]), box=Box([0.0], [1.0]), H=1.0, check=False)
    with pytest.raises(NonFiniteDriftError) as exc:
        step_rm(bad, [0.5], 7, Polynomial(1.0, 1.0), QUIET, make_rng(0))
    assert exc.value.step == 7


def test_prox_step_examples():
    box = Box([0.0], [1.0])
    # Zero penalty reduces to the projected step
    zero = Problem(drift=ConstantDrift([1.0]), box=box, H=1.0, penalty=Penalty.zero(), check=False)
    rec, _ = step_prox_v1(zero, [0.9], 1, Table((0.5,)), QUIET, make_rng(0))
    assert rec.x.tolist() == [1.0]
    # L1, grad f = 0: prox of v = 0.5 on [0, 1] with gamma = 0.3
    l1 = Problem(drift=ConstantDrift([0.0]), box=box, H=1e-12, penalty=Penalty.l1(1.0), check=False)
    rec, _ = step_prox_v1(l1, [0.5], 1, Table((0.3,)), QUIET, make_rng(0))
    assert rec.x[0] == pytest.approx(0.2, abs=1e-15)
    # stationary quadratic stays put
    q = make_quadratic(1, (0.0, 1.0), 0.5)
    for step in (step_prox_v1, step_prox_v2, step_rm):
        rec, _ = step(q, [0.5], 1, Table((0.3,)), QUIET, make_rng(0))
        assert rec.x.tolist() == [0.5]


def test_prox_v2_examples():
    # v = x + gamma * h = 2 with gamma = 0.3
    l1 = Problem(drift=ConstantDrift([1.5 / 0.3]), box=Box([0.0], [1.0]), H=5.0, penalty=Penalty.l1(1.0), check=False)
    a, _ = step_prox_v1(l1, [0.5], 1, Table((0.3,)), QUIET, make_rng(0))
    b, _ = step_prox_v2(l1, [0.5], 1, Table((0.3,)), QUIET, make_rng(0))
    assert a.x.tolist() == b.x.tolist() == [1.0]
    # MCP(1, 2), gamma = 0.5, box [0, 0.5], v = 5
    mcp = Problem(drift=ConstantDrift([4.75 / 0.5]), box=Box([0.0], [0.5]), H=10.0,
                  penalty=Penalty.mcp(1.0, 2.0), check=False)
    a, _ = step_prox_v1(mcp, [0.25], 1, Table((0.5,)), QUIET, make_rng(0))
    b, _ = step_prox_v2(mcp, [0.25], 1, Table((0.5,)), QUIET, make_rng(0))
    assert a.x.tolist() == b.x.tolist() == [0.5]


def test_run_hand_simulation_reaches_face():
    # h(x) = -(x - 2), x0 = 0, gamma_n = 1/n, no noise: x_2 = 0 + 1*2 -> clamped to 1
    p = make_quadratic(1, (0.0, 1.0), 2.0)
    traj = run(p, "rm", Polynomial(1.0, 1.0), QUIET, 20, seed=0, x0=[0.0])
    xs = np.concatenate([[0.0], traj.x[:, 0]])
    assert np.all(np.diff(xs) >= 0)
    first = int(np.argmax(xs == 1.0))
    assert first <= 20
    # after pinning, P_n = gamma_n * h(1) = gamma_n
    later = traj.n >= first + 1
    assert np.allclose(traj.P[later, 0], traj.gamma[later], rtol=0, atol=1e-15)


def test_run_one_step_equals_step_rm():
    p = make_quadratic(2, (-1.0, 1.0), [0.3, 2.0])
    noise = NoiseModel(GaussianIID(0.2), PowerBias((0.1, 0.1), 1.0))
    traj = run(p, "rm", Polynomial(1.0, 0.75), noise, 1, seed=9)
    rec, _ = step_rm(p, [0.0, 0.0], 1, Polynomial(1.0, 0.75), noise, make_rng(9))
    assert np.array_equal(traj.x[0], rec.x) and np.array_equal(traj.P[0], rec.P)


@pytest.mark.parametrize("alg", ["rm", "prox1", "prox2"])
def test_run_deterministic_and_generic_path_agrees(alg):
    p = make_composite(2, (-2.0, 2.0), [1.5, -3.0], 1.0, Penalty.scad(0.5))
    noise = NoiseModel(UniformIID(0.5), PowerBias((0.2, -0.2), 0.8))
    a = run(p, alg, Polynomial(0.5, 0.8), noise, 500, seed=4)
    b = run(p, alg, Polynomial(0.5, 0.8), noise, 500, seed=4)
    c = run(p, alg, Polynomial(0.5, 0.8), noise, 500, seed=4, generic=True)
    assert a.equals(b) and a.equals(c)
    assert all(Box([-2.0, -2.0], [2.0, 2.0]).contains(x) for x in a.x)


def test_zero_penalty_prox_modes_equal_rm():
    p = make_composite(3, (0.0, 1.0), [2.0, 0.5, -1.0], [1.0, 2.0, 0.5], Penalty.zero())
    noise = NoiseModel(GaussianIID(0.3), PowerBias((0.5, 0.5, 0.5), 1.0))
    rm = run(p, "rm", Polynomial(1.0, 1.0), noise, 2000, seed=1)
    for alg in ("prox1", "prox2"):
        other = run(p, alg, Polynomial(1.0, 1.0), noise, 2000, seed=1)
        assert np.array_equal(other.x, rm.x)
        assert np.array_equal(other.P, rm.P)


def test_interior_zero_noise_run_is_plain_euler():
    p = make_quadratic(2, (-10.0, 10.0), [0.5, -0.5])
    traj = run(p, "rm", Polynomial(1.0, 1.0), QUIET, 200, seed=0, x0=[1.0, 1.0])
    assert not np.any(traj.P)
    x = np.array([1.0, 1.0])
    for i in range(200):
        x = x + traj.gamma[i] * ((np.array([0.5, -0.5]) - x) + 0.0 + 0.0)
        assert np.array_equal(x, traj.x[i])


def test_state_dependent_noise_uses_generic_path():
    p = make_quadratic(1, (0.0, 1.0), 0.7)
    noise = NoiseModel(ScaledGaussian(lambda x: 0.1 * (1 + np.abs(x)), 0.2))
    traj = run(p, "rm", Polynomial(1.0, 1.0), noise, 300, seed=2)
    assert traj.metadata["backend"] == "generic"
    inv = check_step_invariants(traj)
    assert inv["cone_violations"] == 0 and inv["max_ulps"] <= 4


@given(st.integers(0, 10**6), st.sampled_from([1, 2, 3]), st.floats(0.1, 3.0), st.floats(0.51, 1.0))
def test_step_invariants_hold(seed, dim, sigma, alpha):
    rng = np.random.default_rng(seed)
    p = make_quadratic(dim, (-1.0, 1.0), rng.uniform(-3, 3, dim), rng.uniform(0.5, 2, dim))
    noise = NoiseModel(GaussianIID(sigma), PowerBias(tuple(rng.uniform(-1, 1, dim)), 1.0))
    traj = run(p, "rm", Polynomial(2.0, alpha), noise, 400, seed=seed)
    inv = check_step_invariants(traj)
    assert inv["max_ulps"] <= 4
    assert inv["cone_violations"] == 0
    assert inv["size_violations"] == 0
    assert inv["primitive_agreement"]
    for i in range(0, 400, 37):
        assert in_normal_cone(traj.P[i], face_signature(traj.x[i], p.box))
        g = traj.gamma[i] * ((traj.h[i] + traj.e[i]) + traj.r[i])
        assert np.all(np.abs(traj.P[i]) <= np.abs(g))


def test_rotation_problem_runs_in_both_modes():
    p = make_rotation(([0.0, 0.0], [1.0, 1.0]), [0.5, 0.5], 1.0)
    traj = run(p, "rm", Polynomial(1.0, 1.0), NoiseModel(GaussianIID(0.05)), 5000, seed=0, x0=[0.9, 0.5])
    assert np.linalg.norm(traj.final_state - 0.5) < 0.05


def test_record_policies():
    p = make_quadratic(1, (0.0, 1.0), 0.3)
    full = run(p, "rm", Polynomial(1.0, 1.0), NoiseModel(GaussianIID(0.1)), 5000, seed=0)
    thin = run(p, "rm", Polynomial(1.0, 1.0), NoiseModel(GaussianIID(0.1)), 5000, seed=0, record_policy=Thin(10, 100))
    win = run(p, "rm", Polynomial(1.0, 1.0), NoiseModel(GaussianIID(0.1)), 5000, seed=0, record_policy=Window(200))
    assert full.is_contiguous and not thin.is_contiguous and not win.is_contiguous
    assert len(win) == 400
    for tr in (thin, win):
        rows = [full.row_of(int(n)) for n in tr.n]
        assert np.array_equal(tr.x, full.x[rows])
        assert np.array_equal(tr.final_state, full.final_state)
        assert tr.aggregates == full.aggregates
    assert np.array_equal(win.state(4802), full.state(4802))
    assert policy_from_dict(Thin(3, 5).to_dict()) == Thin(3, 5)
    assert policy_from_dict(None) == Full()


def test_projection_of_initial_point():
    p = make_quadratic(1, (0.0, 1.0), 0.3)
    traj = run(p, "rm", Polynomial(1.0, 1.0), QUIET, 3, seed=0, x0=[7.0])
    assert traj.x_init.tolist() == [1.0]


def test_problem_construction_checks():
    box = Box([0.0], [1.0])
    with pytest.raises(ValueError):
        Problem(drift=lambda x: -2 * x, box=box, H=2.0, f=lambda x: float(x[0] ** 2 / 2))
    with pytest.warns(UserWarning):
        Problem(drift=lambda x: np.asarray(x) * 0 + 5.0, box=box, H=1.0)
    with pytest.raises(ValueError):
        Problem(drift=lambda x: x, box=box, H=0.0)


def test_explicit_points_descriptor():
    assert ExplicitPoints([1.0, 2.0]).points.shape == (1, 2)
