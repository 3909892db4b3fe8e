"""Trace container and exact CSV round-tripping."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from evtherm.errors import DomainError
from evtherm.trace import COLUMNS, Trace


def make_trace(n=5, rng=None) -> Trace:
    rng = rng or np.random.default_rng(0)
    data = {c: rng.uniform(-5.0, 40.0, size=n) for c in COLUMNS}
    data["t"] = np.arange(float(n))
    data["soc"] = rng.uniform(0.1, 1.0, size=n)
    for c in ("mdot_b", "mdot_c", "mdot_a1", "mdot_a2", "mdot_a3", "mdot_a4"):
        data[c] = rng.uniform(0.0, 0.2, size=n)
    data["q_hp"] = rng.uniform(0.0, 7000.0, size=n)
    data["door_signal"] = (rng.uniform(size=n) > 0.5).astype(float)
    data["lower_active"] = (rng.uniform(size=n) > 0.5).astype(float)
    return Trace(data)


class TestTrace:
    def test_missing_column_rejected(self):
        with pytest.raises(DomainError):
            Trace({"t": np.arange(3.0)})

    def test_non_increasing_time_rejected(self):
        tr = make_trace()
        bad = {c: tr.data[c].copy() for c in COLUMNS}
        bad["t"] = np.array([0.0, 1.0, 1.0, 2.0, 3.0])
        with pytest.raises(DomainError):
            Trace(bad)

    def test_records_round_trip_fields(self):
        tr = make_trace()
        rec = tr.record(2)
        assert rec.t == 2.0
        assert rec.state.t_cab == tr.column("t_cab")[2]
        assert rec.u.mdot_b == tr.column("mdot_b")[2]
        assert rec.q_hp == tr.column("q_hp")[2]

    def test_slice_time(self):
        tr = make_trace()
        part = tr.slice_time(2.0, 3.0)
        assert list(part.t) == [2.0, 3.0]
        with pytest.raises(DomainError):
            tr.slice_time(99.0)


class TestCsvRoundTrip:
    def test_exact_numeric_round_trip(self, tmp_path):
        tr = make_trace(n=20, rng=np.random.default_rng(42))
        path = tmp_path / "t.csv"
        tr.write_csv(path)
        back = Trace.read_csv(path)
        for c in COLUMNS:
            assert tr.data[c].tobytes() == back.data[c].tobytes(), c

    def test_rewrite_is_byte_identical(self, tmp_path):
        tr = make_trace(n=10, rng=np.random.default_rng(7))
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        tr.write_csv(a)
        Trace.read_csv(a).write_csv(b)
        assert a.read_bytes() == b.read_bytes()

    def test_header_enforced(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("a,b,c\n1,2,3\n")
        with pytest.raises(DomainError):
            Trace.read_csv(path)

    @given(values=st.lists(
        st.floats(min_value=-1e6, max_value=1e6,
                  allow_nan=False, allow_infinity=False),
        min_size=1, max_size=8))
    @settings(max_examples=40, deadline=None)
    def test_awkward_floats_survive(self, values, tmp_path_factory):
        n = len(values)
        data = {c: np.zeros(n) for c in COLUMNS}
        data["t"] = np.arange(float(n))
        data["t_cab"] = np.array(values)
        tr = Trace(data)
        path = tmp_path_factory.mktemp("csv") / "t.csv"
        tr.write_csv(path)
        back = Trace.read_csv(path)
        assert back.column("t_cab").tobytes() == tr.column("t_cab").tobytes()
