import numpy as np
import pytest

from magkey.errors import DomainError, FormatError
from magkey.trace import MagSample, Trace, as_matrix, read_trace_csv, write_trace_csv


def test_trace_shapes_and_indexing():
    t = np.arange(5) / 50.0
    b = np.arange(15, dtype=float).reshape(5, 3)
    tr = Trace(t, b)
    assert len(tr) == 5
    s = tr[2]
    assert isinstance(s, MagSample)
    assert s.t == pytest.approx(0.04)
    assert np.array_equal(s.b, b[2])
    assert len(tr[1:4]) == 3


def test_trace_rejects_bad_input():
    with pytest.raises(DomainError):
        Trace(np.arange(3), np.zeros((4, 3)))
    with pytest.raises(DomainError):
        Trace(np.array([0.0, -1.0]), np.zeros((2, 3)))
    with pytest.raises(DomainError):
        Trace(np.array([0.0, np.nan]), np.zeros((2, 3)))


def test_csv_round_trip(tmp_path):
    t = np.arange(100) / 50.0
    rng = np.random.default_rng(1)
    tr = Trace(t, rng.normal(0, 10, (100, 3)))
    path = tmp_path / "trace.csv"
    write_trace_csv(tr, path)
    back = read_trace_csv(path)
    assert np.array_equal(back.t, tr.t)
    assert np.array_equal(back.b, tr.b)


def test_csv_rejects_bad_header(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("time,x,y,z\n0,1,2,3\n")
    with pytest.raises(FormatError):
        read_trace_csv(p)


def test_as_matrix_accepts_common_shapes():
    b = np.zeros((4, 3))
    assert as_matrix(b) is b
    assert as_matrix(Trace(np.arange(4.0), b)).shape == (4, 3)
    assert as_matrix([MagSample(0.0, np.array([1.0, 2.0, 3.0]))]).shape == (1, 3)
    with pytest.raises(DomainError):
        as_matrix(np.zeros((4, 2)))
