import io
import json
import math

import jsonschema
import numpy as np
import pytest

from coveropt.coverage import compute_field
from coveropt.errors import InvalidInputError
from coveropt.optimize import NetworkPlan
from coveropt.report import (
    COMPARISON_HEADER,
    FIELD_HEADER,
    GainsRow,
    compare_networks,
    comparison_rows,
    default_grid,
    emit_csv,
    emit_geojson,
    field_geojson,
    field_rows,
    fmt,
    quantile_curve,
    read_field_csv,
    sites_geojson,
)

from conftest import make_demand, make_facility

# Minimal FeatureCollection shape from the GeoJSON spec (RFC 7946).
GEOJSON_SCHEMA = {
    "type": "object",
    "required": ["type", "features"],
    "properties": {
        "type": {"const": "FeatureCollection"},
        "features": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["type", "geometry", "properties"],
                "properties": {
                    "type": {"const": "Feature"},
                    "geometry": {
                        "type": "object",
                        "required": ["type", "coordinates"],
                        "properties": {
                            "type": {"const": "Point"},
                            "coordinates": {
                                "type": "array",
                                "minItems": 2,
                                "maxItems": 2,
                                "items": {"type": "number"},
                            },
                        },
                    },
                    "properties": {"type": "object"},
                },
            },
        },
    },
}


def plan_of(sites):
    return NetworkPlan(sites=tuple(sorted(sites)), covered_population=0,
                       assignment={}, loads={})


class TestCompareNetworks:
    def test_identical_plans_zero_deltas(self):
        facilities = [make_facility("F1", 0, 0, zip_code="00001"),
                      make_facility("F2", 0, 1, zip_code="00002")]
        regions = {"00001": "R1", "00002": "R2"}
        rows = compare_networks(facilities, plan_of(["00001", "00002"]), regions)
        assert all(r.delta == 0 for r in rows)

    def test_moved_sites_show_up_as_deltas(self):
        facilities = [make_facility(f"F{i}", 0, 0, zip_code="00001") for i in range(3)]
        regions = {"00001": "A", "00002": "B"}
        rows = compare_networks(facilities, plan_of(["00002", "00002", "00002"][:1]), regions)
        by_region = {r.region_id: r for r in rows}
        assert by_region["A"].delta == -3
        assert by_region["B"].delta == 1

    def test_delta_sum_matches_size_difference(self):
        facilities = [make_facility(f"F{i}", 0, 0, zip_code="00001") for i in range(4)]
        regions = {"00001": "A", "00002": "B", "00003": "C"}
        optimal = plan_of(["00002", "00003"])
        rows = compare_networks(facilities, optimal, regions)
        assert sum(r.delta for r in rows) == len(optimal.sites) - len(facilities)

    def test_sorted_by_abs_delta(self):
        facilities = [make_facility(f"F{i}", 0, 0, zip_code="00001") for i in range(5)]
        regions = {"00001": "A", "00002": "B"}
        rows = compare_networks(facilities, plan_of(["00002"]), regions)
        assert [abs(r.delta) for r in rows] == sorted([abs(r.delta) for r in rows], reverse=True)


class TestQuantileCurve:
    def test_single_point_constant_curve(self):
        facilities = [make_facility("F1", 0.0, 0.0)]
        demand = [make_demand("00001", 0.0, 0.05, 3)]
        field = compute_field(demand, facilities, 12.0)
        d = float(field.distances[0])
        curve = quantile_curve(field, demand, [0.1, 0.5, 0.9])
        assert [m for _, m in curve] == [d, d, d]

    def test_two_point_hand_ecdf(self):
        deg1 = 1 / 69.093418985531
        deg9 = 9 / 69.093418985531
        facilities = [make_facility("F1", 0.0, 0.0)]
        demand = [make_demand("00001", 0.0, deg1, 5), make_demand("00002", 0.0, deg9, 5)]
        field = compute_field(demand, facilities, 12.0)
        curve = dict(quantile_curve(field, demand, [0.5, 0.51]))
        assert curve[0.5] == pytest.approx(1.0, rel=1e-9)
        assert curve[0.51] == pytest.approx(9.0, rel=1e-9)

    def test_non_decreasing(self):
        facilities = [make_facility("F1", 0.0, 0.0)]
        demand = [make_demand(f"{i + 1:05d}", 0.0, 0.01 * i, 1 + i) for i in range(20)]
        field = compute_field(demand, facilities, 12.0)
        curve = quantile_curve(field, demand, default_grid())
        miles = [m for _, m in curve]
        assert all(a <= b for a, b in zip(miles, miles[1:]))


class TestEmitters:
    def test_fmt_round_trip_floats(self):
        for v in [0.1, 1 / 3, 12436.815417395579, 1e-17]:
            assert float(fmt(v)) == v
        assert fmt(None) == ""
        assert fmt(True) == "1"
        assert fmt(12) == "12"

    def test_empty_table_is_header_only(self):
        buf = io.StringIO()
        emit_csv(buf, COMPARISON_HEADER, [])
        assert buf.getvalue() == "region_id,current,optimal,delta\n"

    def test_byte_stable(self):
        rows = [("a", 1, 0.5, True), ("b", 2, 1 / 3, False)]
        a, b = io.StringIO(), io.StringIO()
        emit_csv(a, ["w", "x", "y", "z"], rows)
        emit_csv(b, ["w", "x", "y", "z"], rows)
        assert a.getvalue() == b.getvalue()

    def test_field_csv_round_trip(self, three_point_fixture):
        facilities, demand = three_point_fixture
        field = compute_field(demand, facilities, 12.0)
        buf = io.StringIO()
        emit_csv(buf, FIELD_HEADER, field_rows(field))
        back = read_field_csv(buf.getvalue(), 12.0)
        assert back.zctas == field.zctas
        assert back.nearest_ids == field.nearest_ids
        assert np.array_equal(back.covered, field.covered)
        assert np.allclose(back.distances, field.distances, rtol=0, atol=0, equal_nan=True)

    def test_field_round_trip_with_no_facilities(self):
        demand = [make_demand("00001", 0.0, 0.0, 5)]
        field = compute_field(demand, [], 12.0)
        buf = io.StringIO()
        emit_csv(buf, FIELD_HEADER, field_rows(field))
        back = read_field_csv(buf.getvalue(), 12.0)
        assert back.nearest_ids == (None,)
        assert math.isnan(back.distances[0])

    def test_geojson_validates_and_is_lonlat(self, three_point_fixture):
        facilities, demand = three_point_fixture
        field = compute_field(demand, facilities, 12.0)
        col = field_geojson(field, demand)
        jsonschema.validate(col, GEOJSON_SCHEMA)
        coords = col["features"][0]["geometry"]["coordinates"]
        assert coords == [demand[0].centroid.lon, demand[0].centroid.lat]

    def test_sites_geojson_roles(self):
        col = sites_geojson([("F1", 1.0, 2.0, "existing"), ("00001", 3.0, 4.0, "added"),
                             ("00002", 5.0, 6.0, "rearranged")])
        jsonschema.validate(col, GEOJSON_SCHEMA)
        roles = [f["properties"]["role"] for f in col["features"]]
        assert roles == ["existing", "added", "rearranged"]
        with pytest.raises(InvalidInputError):
            sites_geojson([("x", 0.0, 0.0, "mystery")])

    def test_geojson_emission_deterministic(self, three_point_fixture):
        facilities, demand = three_point_fixture
        field = compute_field(demand, facilities, 12.0)
        a, b = io.StringIO(), io.StringIO()
        emit_geojson(a, field_geojson(field, demand))
        emit_geojson(b, field_geojson(field, demand))
        assert a.getvalue() == b.getvalue()
        json.loads(a.getvalue())


class TestGainsRow:
    def test_negative_gain_rejected(self):
        with pytest.raises(InvalidInputError):
            GainsRow("A", 10, -1, 0)

    def test_rows_shape(self):
        row = GainsRow("A", 10, 5, 7)
        assert comparison_rows([]) == []
        assert (row.region_id, row.gain_add_one) == ("A", 5)
