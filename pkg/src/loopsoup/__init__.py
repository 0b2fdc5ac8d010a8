"""Markov loop soups on finite weighted graphs: exact Green-function identities,
exact samplers (soups, bridges, Wilson's algorithm) and Monte Carlo verification."""

from .errors import (
    ConvergenceFailure,
    DimensionMismatch,
    LoopSoupError,
    ResourceLimit,
    SingularMatrix,
    ValidationError,
)
from .graph import DELTA, Current, GraphModel, build_graph, fixture, graph_from_dict, h_transform, path_graph
from .green import PotentialBundle, green_chi, potential_bundle, trace_model, twisted_green
from .loops import DiscreteLoopClass, MarkedLoop, enumerate_discrete_loops, mu_laplace, nontrivial_mass
from .permanent import alpha_permanent, alpha_permanent_nofix, qk_poly
from .report import Report, write_report
from .soup import LoopSoup, SoupBatch, SoupSampler, bridges, killed_paths, sample_soup, sample_soups
from .wilson import SpanningTree, enumerate_spanning_trees, loop_erase, wilson_batch, wilson_sample

__version__ = "0.1.0"

__all__ = [
    "ConvergenceFailure",
    "DimensionMismatch",
    "LoopSoupError",
    "ResourceLimit",
    "SingularMatrix",
    "ValidationError",
    "DELTA",
    "Current",
    "GraphModel",
    "build_graph",
    "fixture",
    "graph_from_dict",
    "h_transform",
    "path_graph",
    "PotentialBundle",
    "green_chi",
    "potential_bundle",
    "trace_model",
    "twisted_green",
    "DiscreteLoopClass",
    "MarkedLoop",
    "enumerate_discrete_loops",
    "mu_laplace",
    "nontrivial_mass",
    "alpha_permanent",
    "alpha_permanent_nofix",
    "qk_poly",
    "Report",
    "write_report",
    "LoopSoup",
    "SoupBatch",
    "SoupSampler",
    "bridges",
    "killed_paths",
    "sample_soup",
    "sample_soups",
    "SpanningTree",
    "enumerate_spanning_trees",
    "loop_erase",
    "wilson_batch",
    "wilson_sample",
]
