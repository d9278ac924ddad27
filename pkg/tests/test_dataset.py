import io
import math

import pytest

from qloss.dataset import load_qubits, read_qubit_csv
from qloss.types import ValidationError


@pytest.fixture(scope="module")
def bundled():
    return load_qubits()


def test_bundled_has_38_rows(bundled):
    assert len(bundled) == 38
    assert [r.label for r in bundled][:3] == ["Q1", "Q2", "Q3"]


def test_excluded_flags(bundled):
    excluded = {r.label for r in bundled if not r.included}
    assert excluded == {"Q22", "Q38"}


def test_best_qubit_q_column(bundled):
    q27 = next(r for r in bundled if r.label == "Q27")
    assert q27.f_q == 3.016 and q27.t1_mean == 270
    q = 2 * math.pi * q27.f_q_hz * q27.t1_s
    assert q == pytest.approx(5.1e6, rel=0.05)


def test_absent_echo_is_none(bundled):
    q7 = next(r for r in bundled if r.label == "Q7")
    assert q7.t2echo_mean is None and q7.t2echo_std is None


def test_missing_column_rejected():
    with pytest.raises(ValidationError, match="missing columns"):
        read_qubit_csv(io.StringIO("label,f_q\nQ1,4.7\n"))


def test_bad_row_names_line_number():
    text = ("label,film_thickness,f_q,f_r,detuning,t1_mean,t1_std,"
            "t2echo_mean,t2echo_std,t_purcell,q_factor,included\n"
            "Q1,150,4.711,6.035,1.324,51,9,79,17,64,1.5,true\n"
            "Q2,150,not_a_number,6.173,1.511,58,14,100,25,155,1.7,true\n")
    with pytest.raises(ValidationError, match="line 3"):
        read_qubit_csv(io.StringIO(text))
