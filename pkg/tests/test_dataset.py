import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import make_tuple
from practicegp.dataset import (
    CSV_COLUMNS,
    Dataset,
    PracticeMode,
    PracticeTuple,
    Provenance,
    dumps_csv,
    load_csv,
    loads_csv,
    save_csv,
    split,
)
from practicegp.errors import DatasetValidationError, UnstratifiedSplitWarning
from practicegp.simulator import ImprovementModel, TeacherRule, simulate_dataset

HEADER = ",".join(CSV_COLUMNS)


def test_single_row_file():
    text = HEADER + "\ns1,p1,0,0,0,60,0,0\n"
    ds = loads_csv(text)
    assert len(ds) == 1
    assert ds.tuples[0].pm is PracticeMode.PITCH
    assert ds.tuples[0].bpm == 60.0


def test_out_of_range_value_reports_row_number():
    text = HEADER + "\ns1,p1,0.1,0.1,0,60,0.1,0.1\ns1,p1,1.2,0.1,0,60,0.1,0.1\n"
    with pytest.raises(DatasetValidationError) as err:
        loads_csv(text)
    assert err.value.row == 3


def test_wrong_header_rejected():
    with pytest.raises(DatasetValidationError):
        loads_csv("a,b,c\n1,2,3\n")


def test_unparsable_cell_reports_row():
    text = HEADER + "\ns1,p1,abc,0.1,0,60,0.1,0.1\n"
    with pytest.raises(DatasetValidationError) as err:
        loads_csv(text)
    assert err.value.row == 2


def test_bad_pm_rejected():
    text = HEADER + "\ns1,p1,0.1,0.1,2,60,0.1,0.1\n"
    with pytest.raises(DatasetValidationError):
        loads_csv(text)


def test_round_trip_identity_on_synthetic_121(tmp_path):
    ds = simulate_dataset(TeacherRule.reference(), ImprovementModel(), 121, seed=11)
    path = tmp_path / "d.csv"
    save_csv(ds, path)
    again = load_csv(path, provenance=Provenance.SYNTHETIC)
    assert again.tuples == ds.tuples
    save_csv(again, path)
    assert load_csv(path).tuples == ds.tuples


@settings(max_examples=50, deadline=None)
@given(
    rows=st.lists(
        st.tuples(
            st.floats(0, 1), st.floats(0, 1), st.integers(0, 1),
            st.floats(1, 400), st.floats(0, 1), st.floats(0, 1),
        ),
        min_size=1,
        max_size=20,
    )
)
def test_round_trip_property(rows):
    ds = Dataset(
        tuples=tuple(
            PracticeTuple("s", "p", p1, t1, PracticeMode(pm), bpm, p2, t2)
            for p1, t1, pm, bpm, p2, t2 in rows
        )
    )
    assert loads_csv(dumps_csv(ds)).tuples == ds.tuples


class TestSplit:
    def make(self, n, timing_every=2):
        return Dataset(
            tuples=tuple(
                make_tuple(
                    p_pre=0.1 + 0.001 * i,
                    pm=PracticeMode.TIMING if i % timing_every == 0 else PracticeMode.PITCH,
                )
                for i in range(n)
            )
        )

    def test_sizes(self):
        train, test = split(self.make(10), 0.2, seed=7)
        assert len(test) == 2
        assert len(train) == 8

    def test_same_seed_identical(self):
        ds = self.make(30)
        a = split(ds, 0.25, seed=5)
        b = split(ds, 0.25, seed=5)
        assert a[0].tuples == b[0].tuples and a[1].tuples == b[1].tuples

    def test_different_seed_differs(self):
        ds = self.make(40)
        a = split(ds, 0.25, seed=5)
        b = split(ds, 0.25, seed=6)
        assert a[1].tuples != b[1].tuples

    def test_stratified_both_modes_in_both_splits(self):
        train, test = split(self.make(100, timing_every=2), 0.2, seed=3)
        assert train.has_both_modes()
        assert test.has_both_modes()

    def test_partition(self):
        ds = self.make(25, timing_every=3)
        train, test = split(ds, 0.3, seed=9)
        combined = sorted(train.tuples + test.tuples, key=lambda t: t.p_pre)
        assert combined == sorted(ds.tuples, key=lambda t: t.p_pre)
        assert not set(train.tuples) & set(test.tuples)

    def test_unstratifiable_warns(self):
        # a single timing tuple cannot appear on both sides
        tuples = tuple(make_tuple(p_pre=0.1 + 0.01 * i) for i in range(7)) + (
            make_tuple(p_pre=0.9, pm=PracticeMode.TIMING),
        )
        with pytest.warns(UnstratifiedSplitWarning):
            train, test = split(Dataset(tuples=tuples), 0.25, seed=1)
        assert len(train) + len(test) == 8

    def test_too_small_rejected(self):
        with pytest.raises(ValueError):
            split(self.make(4), 0.5, seed=0)

    def test_bad_fraction_rejected(self):
        with pytest.raises(ValueError):
            split(self.make(10), 1.5, seed=0)

    def test_simulator_output_validates(self):
        ds = simulate_dataset(TeacherRule.reference(), ImprovementModel(), 200, seed=2)
        # constructing PracticeTuple validates each row; loads/dumps re-validates
        assert len(loads_csv(dumps_csv(ds))) == 200
