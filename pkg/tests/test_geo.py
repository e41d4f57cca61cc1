import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from auvc2.geo import EnuPoint, GeoPoint, GeoValidationError, enu_to_latlon, latlon_to_enu

ORIGIN = GeoPoint(56.0, -5.0)


def test_projection_identity_at_origin():
    assert latlon_to_enu(ORIGIN, ORIGIN) == EnuPoint(0.0, 0.0)
    assert enu_to_latlon(ORIGIN, EnuPoint(0.0, 0.0)) == ORIGIN


def test_projection_north_step():
    e = latlon_to_enu(ORIGIN, GeoPoint(56.001, -5.0))
    assert e.x == pytest.approx(0.0, abs=1e-9)
    assert e.y == pytest.approx(111.32, abs=1e-6)


def test_projection_east_step():
    # 0.001 deg of longitude at 56 N: 111320 * cos(56 deg) * 0.001
    e = latlon_to_enu(ORIGIN, GeoPoint(56.0, -4.999))
    assert e.x == pytest.approx(111320 * math.cos(math.radians(56.0)) * 0.001, abs=1e-9)
    assert e.x == pytest.approx(62.25, abs=0.01)
    assert e.y == 0.0


def test_inverse_of_north_step():
    g = enu_to_latlon(ORIGIN, EnuPoint(0.0, 111.32))
    assert g.lat == pytest.approx(56.001, abs=1e-9)
    assert g.lon == pytest.approx(-5.0, abs=1e-9)


@given(
    st.floats(min_value=-0.17, max_value=0.17),
    st.floats(min_value=-0.3, max_value=0.3),
)
def test_round_trip_within_plan_bound(dlat, dlon):
    # ~20 km in every direction from the origin
    p = GeoPoint(ORIGIN.lat + dlat, ORIGIN.lon + dlon)
    back = enu_to_latlon(ORIGIN, latlon_to_enu(ORIGIN, p))
    assert back.lat == pytest.approx(p.lat, abs=1e-9)
    assert back.lon == pytest.approx(p.lon, abs=1e-9)


def test_latitude_range_rejected():
    with pytest.raises(GeoValidationError):
        GeoPoint(95.0, 0.0)
    with pytest.raises(GeoValidationError):
        GeoPoint(0.0, 181.0)


def test_projection_rejects_distant_point():
    with pytest.raises(GeoValidationError):
        latlon_to_enu(ORIGIN, GeoPoint(57.0, -5.0))


def test_enu_inverse_rejects_out_of_bound():
    with pytest.raises(GeoValidationError):
        enu_to_latlon(ORIGIN, EnuPoint(60_000.0, 0.0))


def test_enu_requires_finite():
    with pytest.raises(GeoValidationError):
        EnuPoint(float("nan"), 0.0)
