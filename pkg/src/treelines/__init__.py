"""Poisson line and road processes on the 3-regular tree."""

__version__ = "0.1.0"

from .tree import ROOT, Edge, Vertex, ball, distance, format_vertex, geodesic, meet, parse_vertex, sphere
from .measure import TruncatedLine, mu_hitting_connected, mu_pair, mu_through_set
from .lines import ALPHA_CRITICAL, expected_Z, gw_oracle, sample_line_process
from .roads import EdgeSpeeds, driving_distance, edge_speeds_layered, greedy_fast, greedy_geometric
from .bounds import bddp_chain_exact, bddp_kahn_upper, bddp_lower, nonexplosion_threshold

__all__ = [
    "ALPHA_CRITICAL",
    "ROOT",
    "Edge",
    "EdgeSpeeds",
    "TruncatedLine",
    "Vertex",
    "ball",
    "bddp_chain_exact",
    "bddp_kahn_upper",
    "bddp_lower",
    "distance",
    "driving_distance",
    "edge_speeds_layered",
    "expected_Z",
    "format_vertex",
    "geodesic",
    "greedy_fast",
    "greedy_geometric",
    "gw_oracle",
    "meet",
    "mu_hitting_connected",
    "mu_pair",
    "mu_through_set",
    "nonexplosion_threshold",
    "parse_vertex",
    "sample_line_process",
    "sphere",
]
