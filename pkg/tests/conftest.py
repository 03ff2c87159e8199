import numpy as np
import pytest

from coveropt.dataset import DemandPoint, FacilitySite
from coveropt.geo import GeoPoint


def make_facility(fid, lat, lon, name=None, state="CA", zip_code="90001", **flags):
    defaults = dict(src_directory=True, src_doj=False, src_referral=False,
                    src_manual=False, doj_recognized=False)
    defaults.update(flags)
    return FacilitySite(id=fid, name=name or f"Office {fid}", point=GeoPoint(lat, lon),
                        state=state, zip=zip_code, **defaults)


def make_demand(zcta, lat, lon, weight, state="CA"):
    return DemandPoint(zcta=zcta, centroid=GeoPoint(lat, lon), weight=weight, state=state)


def random_points(rng, n, lat_range=(25.0, 49.0), lon_range=(-124.0, -67.0)):
    lats = rng.uniform(*lat_range, n)
    lons = rng.uniform(*lon_range, n)
    return lats, lons


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


@pytest.fixture
def three_point_fixture():
    """Hand-checkable: facility at origin-ish; three demand points at known
    distances; weights 10/20/30; the middle point is beyond 12 miles."""
    facilities = [make_facility("F1", 40.0, -100.0, zip_code="00002")]
    demand = [
        make_demand("00001", 40.05, -100.0, 10),   # ~3.5 mi, covered
        make_demand("00002", 40.5, -100.0, 20),    # ~34.5 mi, uncovered
        make_demand("00003", 40.0, -100.1, 30),    # ~5.3 mi, covered
    ]
    return facilities, demand
