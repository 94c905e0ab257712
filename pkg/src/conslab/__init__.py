"""Discrete-time multi-agent consensus on grounded networks."""

from .control import Dynamics, GainDesign, design_gain, is_consensusable, solve_mari
from .countermeasure import CountermeasurePlan, active_redesign, ground_more, passive_predesign
from .errors import ConslabError, NumericalError
from .graph import Graph, cheeger, ground, random_regular
from .sim import ClosedLoop, GroundingEvent, NetworkState, run
from .spectral import SpectralSummary, grounded_spectrum, laplacian_spectrum

__version__ = "0.1.0"

__all__ = [
    "ClosedLoop",
    "ConslabError",
    "CountermeasurePlan",
    "Dynamics",
    "GainDesign",
    "Graph",
    "GroundingEvent",
    "NetworkState",
    "NumericalError",
    "SpectralSummary",
    "active_redesign",
    "cheeger",
    "design_gain",
    "ground",
    "ground_more",
    "grounded_spectrum",
    "is_consensusable",
    "laplacian_spectrum",
    "passive_predesign",
    "random_regular",
    "run",
    "solve_mari",
]
