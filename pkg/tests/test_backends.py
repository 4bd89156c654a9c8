import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from projsa import _backend
from projsa.engine import run
from projsa.problems import make_composite, make_pinned_drift, make_quadratic, make_rotation
from projsa.prox import Penalty
from projsa.schedules import GaussianIID, NoiseModel, Polynomial, PowerBias

needs_compiled = pytest.mark.skipif("compiled" not in _backend.available(), reason="extension not built")

PROBLEMS = [
    ("rm", lambda: make_quadratic(3, (-1.0, 1.0), [0.2, 3.0, -4.0], [1.0, 0.5, 2.0])),
    ("rm", lambda: make_rotation(([0.0, 0.0], [1.0, 1.0]), [1.4, 0.5], 2.0)),
    ("rm", lambda: make_pinned_drift(2, (0.0, 1.0), [1.0, -1.0])),
    ("prox1", lambda: make_composite(2, (-3.0, 3.0), [2.0, -0.3], 1.0, Penalty.l1(1.0))),
    ("prox2", lambda: make_composite(2, (-3.0, 3.0), [2.0, -0.3], 1.0, Penalty.mcp(0.8, 1.5))),
    ("prox1", lambda: make_composite(2, (0.0, 1.0), [2.0, -0.3], 1.0, Penalty.scad(0.8, 3.0))),
    ("prox2", lambda: make_composite(1, (-10.0, 10.0), 2.0, 1.0, Penalty.scad(1.0))),
]


@needs_compiled
@pytest.mark.parametrize("alg,make", PROBLEMS)
def test_compiled_and_python_loops_bit_identical(alg, make):
    p = make()
    d = p.dim
    noise = NoiseModel(GaussianIID(0.5), PowerBias(tuple([0.5] * d), 1.0))
    a = run(p, alg, Polynomial(1.0, 0.7), noise, 3000, seed=11, backend="compiled")
    b = run(p, alg, Polynomial(1.0, 0.7), noise, 3000, seed=11, backend="python")
    for col in ("x", "h", "P"):
        assert getattr(a, col).tobytes() == getattr(b, col).tobytes()


def brute_window_sup(F, ends):
    out = np.zeros(F.shape[1])
    for i in range(len(F)):
        for j in range(i, ends[i] + 1):
            out = np.maximum(out, np.abs(F[j] - F[i]))
    return out


@st.composite
def window_inputs(draw):
    L = draw(st.integers(1, 40))
    d = draw(st.integers(1, 3))
    seed = draw(st.integers(0, 10**6))
    rng = np.random.default_rng(seed)
    F = rng.normal(size=(L, d)).cumsum(axis=0)
    raw = np.maximum(np.arange(L) + rng.integers(0, 6, L), np.arange(L))
    ends = np.minimum(np.maximum.accumulate(raw), L - 1)
    return F, ends


@given(window_inputs())
def test_window_sup_matches_brute_force(inp):
    F, ends = inp
    want = brute_window_sup(F, ends)
    for name in _backend.available():
        assert np.array_equal(_backend.window_sup(F, ends, backend=name), want)


def test_window_sup_validates_ends():
    F = np.zeros((3, 1))
    with pytest.raises(ValueError):
        _backend.window_sup(F, [0, 0, 2])
    with pytest.raises(ValueError):
        _backend.window_sup(F, [2, 1, 2])
    with pytest.raises(ValueError):
        _backend.window_sup(F, [1, 2])


def brute_lipschitz(Z, tau, floor, ceil):
    out = np.zeros(Z.shape[1])
    for p in range(len(tau)):
        for q in range(p + 1, len(tau)):
            dt = tau[q] - tau[p]
            if floor <= dt <= ceil:
                out = np.maximum(out, np.abs(Z[q] - Z[p]) / dt)
    return out


@given(st.integers(0, 10**6), st.integers(2, 60), st.floats(0.0, 0.5), st.floats(0.0, 2.0))
def test_lipschitz_max_matches_brute_force(seed, K, floor, extra):
    rng = np.random.default_rng(seed)
    tau = np.concatenate([[0.0], np.cumsum(rng.uniform(0.01, 0.2, K - 1))])
    Z = rng.normal(size=(K, 2)).cumsum(axis=0)
    want = brute_lipschitz(Z, tau, floor, floor + extra)
    for name in _backend.available():
        got = _backend.lipschitz_max(Z, tau, floor, floor + extra, backend=name)
        assert np.allclose(got, want, rtol=1e-15, atol=0)


def test_environment_forces_python_backend():
    env = dict(os.environ, PROJSA_BACKEND="python")
    out = subprocess.run([sys.executable, "-c", "import projsa; print(projsa.BACKEND)"],
                         capture_output=True, text=True, env=env, check=True)
    assert out.stdout.strip() == "python"


def test_unknown_backend():
    with pytest.raises(ValueError):
        _backend.kernels("fortran")
