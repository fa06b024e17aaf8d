"""Route loading (challenge-style three-file layout), synthetic generation,
and fold splitting.

The on-disk layout mirrors the public last-mile challenge data so that real
files drop in unchanged: route_data.json (stops with coordinates, zone ids,
and a Station start), travel_times.json (complete asymmetric matrices), and
optionally actual_sequences.json (ground-truth visiting order).
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass

import numpy as np

from .autodiff import make_rng
from .baselines import nearest_neighbor, two_opt
from .errors import DataError, DomainError
from .hexgrid import GeoPoint, GridSpec, cell_of, format_cell_id, unproject, ProjectedPoint
from .routegraph import Route, Stop

# fold sizes of the real Los Angeles dataset this layout is compatible with
LA_TRAIN_ROUTES = 2888
LA_TEST_ROUTES = 1626

SYNTH_ORIGIN = GeoPoint(33.98, -118.25)
SYNTH_ZONE_RESOLUTION = 9


def load_routes(dir_path) -> list[Route]:
    """Parse the three-file layout into Route values with a deterministic
    (sorted stop id) index order."""
    route_path = os.path.join(dir_path, "route_data.json")
    travel_path = os.path.join(dir_path, "travel_times.json")
    seq_path = os.path.join(dir_path, "actual_sequences.json")
    if not os.path.isfile(route_path) or not os.path.isfile(travel_path):
        raise IOError(f"missing route_data.json or travel_times.json in {dir_path}")
    with open(route_path) as fh:
        route_data = json.load(fh)
    with open(travel_path) as fh:
        travel_data = json.load(fh)
    sequences = None
    if os.path.isfile(seq_path):
        with open(seq_path) as fh:
            sequences = json.load(fh)

    routes = []
    for route_id in sorted(route_data):
        entry = route_data[route_id]
        stops_raw = entry.get("stops")
        if not stops_raw:
            raise DataError(f"route {route_id}: no stops")
        stop_ids = sorted(stops_raw)
        stations = [sid for sid in stop_ids if stops_raw[sid].get("type") == "Station"]
        if len(stations) != 1:
            raise DataError(f"route {route_id}: expected exactly one Station stop, got {len(stations)}")
        stops = []
        for sid in stop_ids:
            raw = stops_raw[sid]
            try:
                geo = GeoPoint(float(raw["lat"]), float(raw["lng"]))
            except (KeyError, TypeError, DomainError) as exc:
                raise DataError(f"route {route_id}: bad coordinates for stop {sid}: {exc}") from exc
            stops.append(Stop(id=sid, geo=geo, zone_label=raw.get("zone_id"),
                              is_start=(sid == stations[0])))

        matrix_raw = travel_data.get(route_id)
        if matrix_raw is None:
            raise DataError(f"route {route_id}: no travel_times entry")
        n = len(stop_ids)
        travel = np.zeros((n, n))
        for i, a in enumerate(stop_ids):
            row = matrix_raw.get(a)
            if row is None:
                raise DataError(f"route {route_id}: missing travel_times row for stop {a}")
            for j, b in enumerate(stop_ids):
                if i == j:
                    continue
                if b not in row:
                    raise DataError(f"route {route_id}: missing travel time {a} -> {b}")
                travel[i, j] = float(row[b])

        actual_order = None
        if sequences is not None and route_id in sequences:
            order_map = sequences[route_id].get("actual", {})
            if sorted(order_map) != stop_ids:
                raise DataError(f"route {route_id}: actual sequence stop set mismatch")
            ranks = [int(order_map[sid]) for sid in stop_ids]
            if sorted(ranks) != list(range(n)):
                raise DataError(f"route {route_id}: duplicate or gapped sequence order")
            actual_order = [0] * n
            for idx, rank in enumerate(ranks):
                actual_order[rank] = idx

        routes.append(Route(id=route_id, stops=stops, travel=travel, actual_order=actual_order))
    return routes


def save_routes(routes: list[Route], dir_path) -> None:
    """Write routes back out in the same three-file layout."""
    os.makedirs(dir_path, exist_ok=True)
    route_data, travel_data, sequences = {}, {}, {}
    for route in routes:
        stops = {}
        for stop in route.stops:
            stops[stop.id] = {"lat": stop.geo.lat, "lng": stop.geo.lng,
                              "zone_id": stop.zone_label,
                              "type": "Station" if stop.is_start else "Dropoff"}
        route_data[route.id] = {"station_code": route.stops[route.start_index].id,
                                "stops": stops}
        matrix = {}
        for i, a in enumerate(route.stops):
            matrix[a.id] = {b.id: float(route.travel[i, j])
                            for j, b in enumerate(route.stops) if j != i}
        travel_data[route.id] = matrix
        if route.actual_order is not None:
            sequences[route.id] = {"actual": {route.stops[idx].id: rank
                                              for rank, idx in enumerate(route.actual_order)}}
    with open(os.path.join(dir_path, "route_data.json"), "w") as fh:
        json.dump(route_data, fh, sort_keys=True)
    with open(os.path.join(dir_path, "travel_times.json"), "w") as fh:
        json.dump(travel_data, fh, sort_keys=True)
    if sequences:
        with open(os.path.join(dir_path, "actual_sequences.json"), "w") as fh:
            json.dump(sequences, fh, sort_keys=True)


@dataclass
class SynthConfig:
    n_routes: int = 100
    stops_min: int = 8
    stops_max: int = 12
    n_neighborhoods: int = 6
    metro_radius_m: float = 8000.0
    speed_mps: float = 9.0
    asym: float = 0.2
    noise: float = 0.1
    seed: int = 0

    def __post_init__(self):
        if not (0.0 <= self.asym < 1.0 and 0.0 <= self.noise < 1.0):
            raise DomainError("asym and noise must lie in [0, 1)")
        if self.speed_mps <= 0:
            raise DomainError("speed_mps must be positive")
        if self.n_routes < 1 or self.stops_min < 1 or self.stops_max < self.stops_min:
            raise DomainError("bad synthetic size parameters")
        if self.n_neighborhoods < 1 or self.metro_radius_m <= 0:
            raise DomainError("bad neighborhood parameters")


def generate_synthetic(cfg: SynthConfig) -> list[Route]:
    """Seeded synthetic metro: Gaussian stop clusters around uniform-disk
    neighborhoods, a fixed depot, and controlled travel-time asymmetry.

    The ground-truth order is a strong classical construction
    (2-opt-improved nearest neighbor), standing in for driver trajectories.
    """
    rng = make_rng(cfg.seed)
    spec = GridSpec(origin=SYNTH_ORIGIN)

    angles = rng.uniform(0, 2 * math.pi, cfg.n_neighborhoods)
    radii = cfg.metro_radius_m * np.sqrt(rng.uniform(0, 1, cfg.n_neighborhoods))
    hoods = np.column_stack([radii * np.cos(angles), radii * np.sin(angles)])
    scatter = cfg.metro_radius_m / 20.0

    routes = []
    for ridx in range(cfg.n_routes):
        n_stops = int(rng.integers(cfg.stops_min, cfg.stops_max + 1))
        n_hoods = int(rng.integers(1, min(3, cfg.n_neighborhoods) + 1))
        picked = rng.choice(cfg.n_neighborhoods, size=n_hoods, replace=False)
        points = [np.zeros(2)]  # depot at the metro center
        for _ in range(n_stops):
            hood = hoods[picked[int(rng.integers(n_hoods))]]
            points.append(hood + rng.normal(0.0, scatter, 2))
        points = np.array(points)
        n = len(points)

        dist = np.sqrt(((points[:, None, :] - points[None, :, :]) ** 2).sum(axis=2))
        u = rng.uniform(0, 1, (n, n))
        s_upper = rng.uniform(-1, 1, (n, n))
        s = np.triu(s_upper, 1) - np.triu(s_upper, 1).T
        travel = (dist / cfg.speed_mps) * (1 + cfg.noise * u) * (1 + cfg.asym * s)
        np.fill_diagonal(travel, 0.0)

        stops = []
        for i, (x, y) in enumerate(points):
            geo = unproject(ProjectedPoint(float(x), float(y)), spec)
            cell = cell_of(ProjectedPoint(float(x), float(y)), SYNTH_ZONE_RESOLUTION, spec)
            stops.append(Stop(id=f"S{ridx:04d}_{i:03d}", geo=geo,
                              zone_label=format_cell_id(cell), is_start=(i == 0)))

        actual = two_opt(nearest_neighbor(travel, 0), travel)
        routes.append(Route(id=f"R{ridx:04d}", stops=stops, travel=travel,
                            actual_order=actual))
    return routes


def split(routes: list[Route], train_fraction: float, seed: int):
    """Seeded shuffle then disjoint, exhaustive train/test split."""
    if not 0.0 < train_fraction < 1.0:
        raise DomainError(f"train_fraction {train_fraction} out of (0, 1)")
    n_train = int(round(len(routes) * train_fraction))
    if n_train < 1 or n_train >= len(routes):
        raise DomainError("split: a fold would be empty")
    order = list(range(len(routes)))
    make_rng(seed).shuffle(order)
    train = [routes[i] for i in order[:n_train]]
    test = [routes[i] for i in order[n_train:]]
    return train, test
