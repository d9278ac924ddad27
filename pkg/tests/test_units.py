import math

import pytest
from hypothesis import given, strategies as st

from qloss import units


def test_dbm_definition():
    assert units.dbm_to_watts(0.0) == pytest.approx(1e-3, rel=1e-15)
    assert units.dbm_to_watts(30.0) == pytest.approx(1.0, rel=1e-15)


@given(st.floats(min_value=-180.0, max_value=60.0))
def test_dbm_round_trip(p_dbm):
    back = units.watts_to_dbm(units.dbm_to_watts(p_dbm))
    assert math.isclose(back, p_dbm, rel_tol=1e-12, abs_tol=1e-12)


@given(st.floats(min_value=1e-18, max_value=1e3))
def test_watts_round_trip(p_w):
    back = units.dbm_to_watts(units.watts_to_dbm(p_w))
    assert math.isclose(back, p_w, rel_tol=1e-12)


def test_watts_to_dbm_rejects_nonpositive():
    with pytest.raises(ValueError):
        units.watts_to_dbm(0.0)


@pytest.mark.parametrize("fwd,back,value", [
    (units.ghz_to_hz, units.hz_to_ghz, 6.386),
    (units.us_to_s, units.s_to_us, 270.0),
    (units.nm_to_m, units.m_to_nm, 0.5),
])
def test_linear_round_trips(fwd, back, value):
    assert back(fwd(value)) == pytest.approx(value, rel=1e-15)
