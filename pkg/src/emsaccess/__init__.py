"""Intersection-aware emergency-service accessibility on road networks."""

__version__ = "0.1.0"

from .accessibility import (CoverageCurve, VulnerabilityReport, coverage_curve,
                            is_accessible, scenario_alpha_scale, vulnerability_report)
from .calibration import percentile_summary, ratio_table, trip_durations
from .density import DensityField, IntersectionSet, density_field, derive_intersections
from .network import (EdgeRecord, NodeRecord, RoadNetwork, build_network, generate_grid,
                      generate_random_planar)
from .population import (CensusTract, PopulationWeights, VoronoiPartition,
                         assign_population, effective_density, voronoi_partition)
from .traveltime import (UNREACHABLE, EdgeTimes, FacilitySet, TravelTimeField,
                         adjusted_times, baseline_times, edge_delays, snap_facilities,
                         travel_time_field)
from .config import RunConfig
from .pipeline import compute, run_pipeline
