import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from projsa.engine import Thin, Window, run
from projsa.problems import make_pinned_drift, make_quadratic, make_rotation
from projsa.schedules import GaussianIID, NoiseModel, Polynomial, PowerBias
from projsa.traces import TraceFormatError, header, read_trace, write_trace


def test_header_layout():
    assert header(2) == ["n", "t", "gamma", "x_0", "x_1", "e_0", "e_1", "r_0", "r_1", "h_0", "h_1", "P_0", "P_1"]


@pytest.mark.parametrize("policy", [None, Thin(7, 50), Window(40)])
def test_round_trip_bit_exact(tmp_path, policy):
    p = make_rotation((0.0, 1.0), [0.9, 0.2], 1.3)
    noise = NoiseModel(GaussianIID(0.7), PowerBias((0.3, -0.2), 0.6))
    kw = {} if policy is None else {"record_policy": policy}
    tr = run(p, "rm", Polynomial(0.5, 0.7), noise, 300, seed=11, **kw)
    back = read_trace(write_trace(tr, tmp_path / "t.csv"))
    for col in ("n", "t", "gamma", "x", "e", "r", "h", "P", "x_init"):
        a, b = getattr(tr, col), getattr(back, col)
        assert a.shape == b.shape
        assert np.array_equal(a.view(np.uint64) if a.dtype == float else a,
                              b.view(np.uint64) if b.dtype == float else b), col
    assert back.aggregates == tr.aggregates
    assert {k: v for k, v in tr.metadata.items() if k != "backend"} == back.metadata


@given(st.lists(st.floats(allow_nan=False, allow_infinity=False, width=64), min_size=1, max_size=30))
def test_arbitrary_doubles_survive(tmp_path_factory, values):
    p = make_pinned_drift(1, (0.0, 1.0), [1.0])
    tr = run(p, "rm", Polynomial(1.0, 1.0), NoiseModel(), len(values), seed=0)
    tr.e[:, 0] = values
    back = read_trace(write_trace(tr, tmp_path_factory.mktemp("tr") / "t.csv"))
    assert np.array_equal(back.e.view(np.uint64), tr.e.view(np.uint64))


def test_same_seed_same_bytes(tmp_path):
    p = make_quadratic(2, (0.0, 1.0), [2.0, 0.4], 1.0)
    noise = NoiseModel(GaussianIID(0.1))
    a = write_trace(run(p, "rm", Polynomial(1.0, 1.0), noise, 500, seed=3), tmp_path / "a.csv")
    b = write_trace(run(p, "rm", Polynomial(1.0, 1.0), noise, 500, seed=3), tmp_path / "b.csv")
    assert a.read_bytes() == b.read_bytes()


def test_backend_not_in_provenance(tmp_path):
    p = make_quadratic(1, (0.0, 1.0), 0.5)
    a = write_trace(run(p, "rm", Polynomial(1.0, 1.0), NoiseModel(), 50, seed=0, backend="python"), tmp_path / "a.csv")
    b = write_trace(run(p, "rm", Polynomial(1.0, 1.0), NoiseModel(), 50, seed=0, backend="compiled"), tmp_path / "b.csv")
    assert a.read_bytes() == b.read_bytes()


def _trace(tmp_path):
    p = make_quadratic(1, (0.0, 1.0), 0.5)
    return write_trace(run(p, "rm", Polynomial(1.0, 1.0), NoiseModel(), 20, seed=0), tmp_path / "t.csv")


def test_truncated_trace_rejected(tmp_path):
    path = _trace(tmp_path)
    lines = path.read_text().splitlines(keepends=True)
    path.write_text("".join(lines[:-3]))
    with pytest.raises(TraceFormatError, match="truncated"):
        read_trace(path)
    path.write_text("".join(lines[:-1]) + lines[-1][:5])
    with pytest.raises(TraceFormatError):
        read_trace(path)


@pytest.mark.parametrize("mangle", [
    lambda ls: ls[1:],  # no provenance line
    lambda ls: ["# {not json\n"] + ls[1:],
    lambda ls: ls[:1] + ["n,t,gamma,x_0\n"] + ls[2:],
    lambda ls: ls[:2] + [ls[2].replace(",", ",abc", 1)] + ls[3:],
])
def test_malformed_trace_rejected(tmp_path, mangle):
    path = _trace(tmp_path)
    lines = path.read_text().splitlines(keepends=True)
    path.write_text("".join(mangle(lines)))
    with pytest.raises(TraceFormatError):
        read_trace(path)
