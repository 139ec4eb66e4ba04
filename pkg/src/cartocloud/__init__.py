"""Context-predictive multi-interface car-to-cloud transmission simulator."""

from .channel import Interface, LinkModel, MetricRange, MetricSample, RadioEnvironment, RadioSite, SiteKind
from .engine import InterfaceMode, RunResult, RunStatistics, SimConfig, run
from .mobility import PredictorKind, VehicleState
from .scenario import Scenario, default_scenario
from .scheme import SchemeKind, SchemeParams
from .topology import Building, ConfigurationError, RoadNetwork, Route, Vec2

__version__ = "0.1.0"

__all__ = [
    "Building", "ConfigurationError", "Interface", "InterfaceMode", "LinkModel", "MetricRange",
    "MetricSample", "PredictorKind", "RadioEnvironment", "RadioSite", "RoadNetwork", "Route",
    "RunResult", "RunStatistics", "Scenario", "SchemeKind", "SchemeParams", "SimConfig", "SiteKind",
    "Vec2", "VehicleState", "default_scenario", "run",
]
