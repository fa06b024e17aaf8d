"""Zone-based vs. general training for last-mile routing.

A desk-scale library: hexagonal-grid zone generation, a GATv2 encoder and
GRU/pointer decoder trained with REINFORCE on its own reverse-mode autodiff
core, zone-stitched inference, classical baselines, and an evaluation
protocol with MAPE and grouped error reports.
"""

from .errors import DataError, DomainError, NumericError
from .hexgrid import GeoPoint, GridSpec, HexCellId, ProjectedPoint
from .routegraph import Route, RouteGraph, Stop, build_graph, tour_length
from .zoning import Zoning, clusters_visited, collect_cells, kmeans, zone_of_stop
from .model import DecodeResult, ModelConfig, ModelParams, decode, encode
from .pipeline import (TrainConfig, ZoneModelSet, infer_general, infer_zoned,
                       train_general, train_zone_models)

__version__ = "0.1.0"

__all__ = [
    "DataError", "DomainError", "NumericError",
    "GeoPoint", "GridSpec", "HexCellId", "ProjectedPoint",
    "Route", "RouteGraph", "Stop", "build_graph", "tour_length",
    "Zoning", "clusters_visited", "collect_cells", "kmeans", "zone_of_stop",
    "DecodeResult", "ModelConfig", "ModelParams", "decode", "encode",
    "TrainConfig", "ZoneModelSet", "infer_general", "infer_zoned",
    "train_general", "train_zone_models",
]
