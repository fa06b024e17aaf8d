import numpy as np
import pytest

from zoneroute.hexgrid import GeoPoint, GridSpec
from zoneroute.routegraph import Route, Stop


@pytest.fixture
def spec():
    return GridSpec(origin=GeoPoint(33.98, -118.25))


def make_route(route_id, coords, travel, start=0, zone_labels=None,
               actual_order=None):
    """Build a Route from (lat, lng) pairs and a travel matrix."""
    stops = []
    for i, (lat, lng) in enumerate(coords):
        label = zone_labels[i] if zone_labels else None
        stops.append(Stop(id=f"S{i}", geo=GeoPoint(lat, lng),
                          zone_label=label, is_start=(i == start)))
    return Route(id=route_id, stops=stops, travel=np.asarray(travel, dtype=float),
                 actual_order=actual_order)


def symmetric_travel(points_xy, speed=10.0):
    """Euclidean travel matrix from planar coordinates, seconds at `speed` m/s."""
    pts = np.asarray(points_xy, dtype=float)
    d = np.sqrt(((pts[:, None, :] - pts[None, :, :]) ** 2).sum(-1))
    return d / speed
