"""Coverage analysis and site-placement optimization for facility networks."""

from .coverage import (
    CoverageField,
    CoverageMatrix,
    RegionStats,
    aggregate,
    build_matrix,
    classify,
    compute_field,
    correlation,
    find_underserved,
    weighted_quantile,
)
from .dataset import (
    DemandPoint,
    FacilitySite,
    Region,
    assign_region,
    dedupe_by_location,
    ingest_demand,
    ingest_facilities,
)
from .errors import CoverOptError, InvalidInputError, SchemaError
from .geo import GeoPoint, SpatialIndex, build_index, haversine_miles, nearest, within_radius
from .optimize import (
    CapacityConstraint,
    NetworkPlan,
    Scope,
    assign_demand,
    brute_force_optimal,
    greedy_add,
    iterative_improve,
    optimize_states,
    plan_from_field,
    random_search,
)

__version__ = "0.1.0"
