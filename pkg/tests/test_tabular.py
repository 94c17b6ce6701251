import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from robustde.errors import ConfigError, DataError
from robustde.tabular import (
    ColumnSpec,
    Dataset,
    SurveyDesign,
    expand_categorical,
    is_binary_focal,
    load_csv,
    write_csv,
)

SPEC = ColumnSpec(exposure="A", focal="W", outcome="Y", covariates=("X1", "X2"))


def _write(tmp_path, text, name="d.csv"):
    p = tmp_path / name
    p.write_text(text, encoding="utf-8")
    return p


def test_load_four_rows(tmp_path):
    p = _write(tmp_path, "A,W,Y,X1,X2\n0,1,2.5,0.1,3\n1,0,1.0,0.2,4\n1,1,0,0.3,5\n0,0,-1,0.4,6\n")
    d = load_csv(p, SPEC)
    assert d.n == 4
    assert d.n_dropped == 0
    np.testing.assert_array_equal(d.a, [0, 1, 1, 0])
    np.testing.assert_array_equal(d.x[:, 1], [3, 4, 5, 6])


def test_missing_outcome_row_dropped(tmp_path):
    p = _write(tmp_path, "A,W,Y,X1,X2\n0,1,2.5,0.1,3\n1,0,,0.2,4\n1,1,0,0.3,5\n")
    d = load_csv(p, SPEC)
    assert d.n == 2
    assert d.n_dropped == 1
    np.testing.assert_array_equal(d.y, [2.5, 0.0])


def test_nonbinary_exposure_is_data_error(tmp_path):
    p = _write(tmp_path, "A,W,Y,X1,X2\n0,1,2.5,0.1,3\n2,0,1,0.2,4\n")
    with pytest.raises(DataError):
        load_csv(p, SPEC)


def test_missing_column_is_config_error(tmp_path):
    p = _write(tmp_path, "A,W,Y,X1\n0,1,2.5,0.1\n")
    with pytest.raises(ConfigError, match="X2"):
        load_csv(p, SPEC)


def test_all_rows_missing(tmp_path):
    p = _write(tmp_path, "A,W,Y,X1,X2\n0,,2.5,0.1,3\n")
    with pytest.raises(DataError):
        load_csv(p, SPEC)


def test_unmapped_missing_cells_are_ignored(tmp_path):
    p = _write(tmp_path, "A,W,Y,X1,X2,Z\n0,1,2.5,0.1,3,\n1,0,1,0.2,4,\n")
    assert load_csv(p, SPEC).n == 2


def test_roles_must_be_disjoint():
    with pytest.raises(ConfigError):
        ColumnSpec(exposure="A", focal="A", outcome="Y")
    with pytest.raises(ConfigError):
        ColumnSpec(exposure="A", focal="W", outcome="Y", covariates=("Y",))


@pytest.mark.parametrize(
    "w, expected",
    [((0, 1, 1, 0), True), ((0.5, 1), False), ((1, 1, 1), True)],
)
def test_is_binary_focal(w, expected):
    n = len(w)
    d = Dataset(x=np.zeros((n, 0)), a=np.arange(n) % 2, w=w, y=np.zeros(n))
    assert is_binary_focal(d) is expected


def test_dataset_is_immutable():
    d = Dataset(x=np.zeros((2, 1)), a=[0, 1], w=[0, 1], y=[1.0, 2.0])
    with pytest.raises(ValueError):
        d.y[0] = 5.0


def test_survey_weights_positive():
    with pytest.raises(DataError):
        SurveyDesign([1.0, 0.0], [0, 0], [0, 1])


def test_survey_columns(tmp_path):
    spec = ColumnSpec("A", "W", "Y", ("X1",), weight="wt", stratum="h", psu="j")
    p = _write(tmp_path, "A,W,Y,X1,wt,h,j\n0,1,2,0.1,3.5,s1,1\n1,0,1,0.2,4,s1,2\n1,1,0,0.3,5,s2,1\n")
    d = load_csv(p, spec)
    np.testing.assert_array_equal(d.survey.weight, [3.5, 4, 5])
    s_code, c_code = d.survey.codes()
    assert list(s_code) == [0, 0, 1]
    # psu "1" in s1 and s2 are different clusters
    assert len(set(c_code)) == 3


finite = st.floats(-1e6, 1e6, allow_nan=False, allow_infinity=False)


@settings(max_examples=40, deadline=None)
@given(
    rows=st.lists(st.tuples(st.integers(0, 1), st.integers(0, 1), finite, finite, finite), min_size=1, max_size=30),
    with_survey=st.booleans(),
)
def test_csv_round_trip(tmp_path_factory, rows, with_survey):
    arr = np.array(rows, float)
    n = len(arr)
    survey = None
    spec = SPEC
    if with_survey:
        survey = SurveyDesign(np.abs(arr[:, 2]) + 0.5, np.arange(n) % 2, np.arange(n) // 2)
        spec = ColumnSpec("A", "W", "Y", ("X1", "X2"), weight="wt", stratum="h", psu="j")
    d = Dataset(x=arr[:, 3:5], a=arr[:, 0], w=arr[:, 1], y=arr[:, 2], survey=survey, x_names=("X1", "X2"))
    path = tmp_path_factory.mktemp("rt") / "d.csv"
    write_csv(d, path, spec)
    back = load_csv(path, spec)
    assert back == d
    # ingestion keeps row order
    np.testing.assert_array_equal(back.y, d.y)


def test_expand_categorical():
    header = ["A", "race", "Y"]
    rows = [["0", "b", "1"], ["1", "a", "2"], ["0", "c", "3"], ["1", "", "4"]]
    h, out = expand_categorical(header, rows, ["race"])
    assert h == ["A", "race_b", "race_c", "Y"]
    assert out == [["0", "1", "0", "1"], ["1", "0", "0", "2"], ["0", "0", "1", "3"], ["1", "", "", "4"]]
