"""Batched polynomial homotopy continuation in double, double-double and quad-double precision."""

from .homotopy import HomotopyInstance, ListStarts, TotalDegreeStarts, make_homotopy, random_gamma, total_degree_start
from .polysys import PolySystem, cyclic_system, parse_system, system_stats
from .solver import HomotopySolver
from .tracker import SolutionSet, Status, TrackConfig, track_all
from .xprec import ExtComplex, ExtReal, Precision

__version__ = "0.1.0"

__all__ = [
    "HomotopySolver",
    "HomotopyInstance",
    "ListStarts",
    "TotalDegreeStarts",
    "make_homotopy",
    "random_gamma",
    "total_degree_start",
    "PolySystem",
    "cyclic_system",
    "parse_system",
    "system_stats",
    "SolutionSet",
    "Status",
    "TrackConfig",
    "track_all",
    "ExtComplex",
    "ExtReal",
    "Precision",
]
