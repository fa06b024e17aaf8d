"""Spatial zones: k-means over the hex cells that contain training stops.

Cells at a fixed resolution are collected from training routes and clustered
with seeded k-means++ / Lloyd iterations on their projected centroids.  Any
stop maps to a zone: by cell lookup when its cell was seen in training,
otherwise by nearest centroid.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .autodiff import make_rng
from .errors import DataError, DomainError
from .hexgrid import (GeoPoint, GridSpec, HexCellId, cell_of, centroid,
                      format_cell_id, parse_cell_id, project)
from .routegraph import Route, Stop

KMEANS_MAX_ITER = 300


@dataclass
class Zoning:
    spec: GridSpec
    resolution: int
    k: int
    seed: int
    centroids: np.ndarray              # k x 2 projected meters
    cell_to_zone: dict[HexCellId, int]

    def __post_init__(self):
        self.centroids = np.asarray(self.centroids, dtype=np.float64)
        if self.k < 1 or self.centroids.shape != (self.k, 2):
            raise DomainError(f"zoning: expected {self.k} x 2 centroids, got {self.centroids.shape}")
        if not np.all(np.isfinite(self.centroids)):
            raise DomainError("zoning: non-finite centroid")


def collect_cells(routes: list[Route], resolution: int, spec: GridSpec) -> set[HexCellId]:
    """All grid cells containing at least one stop of any training route."""
    if not routes:
        raise DomainError("collect_cells: no routes")
    cells = set()
    for route in routes:
        for stop in route.stops:
            cells.add(cell_of(project(stop.geo, spec), resolution, spec))
    return cells


def _nearest(points: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    """Index of the nearest centroid per point; ties go to the lowest index."""
    d2 = ((points[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
    return d2.argmin(axis=1)


def _kmeanspp_init(points: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = points.shape[0]
    chosen = [int(rng.integers(n))]
    d2 = ((points - points[chosen[0]]) ** 2).sum(axis=1)
    for _ in range(1, k):
        total = d2.sum()
        if total > 0:
            probs = d2 / total
            idx = int(rng.choice(n, p=probs))
        else:
            idx = int(rng.integers(n))
        chosen.append(idx)
        d2 = np.minimum(d2, ((points - points[idx]) ** 2).sum(axis=1))
    return points[chosen].copy()


def kmeans(cells: set[HexCellId], k: int, seed: int, spec: GridSpec,
           resolution: int | None = None) -> Zoning:
    """Lloyd's algorithm on cell centroids, deterministic per (cells, k, seed)."""
    if not cells:
        raise DomainError("kmeans: empty cell set")
    if k < 1 or k > len(cells):
        raise DomainError(f"kmeans: k={k} out of [1, {len(cells)}]")
    # sort for a deterministic point order regardless of set iteration order
    cell_list = sorted(cells, key=lambda c: (c.resolution, c.q, c.r))
    if resolution is None:
        resolution = cell_list[0].resolution
    points = np.array([[centroid(c, spec).x, centroid(c, spec).y] for c in cell_list])

    rng = make_rng(seed)
    centers = _kmeanspp_init(points, k, rng)
    assign = _nearest(points, centers)
    for _ in range(KMEANS_MAX_ITER):
        for z in range(k):
            members = points[assign == z]
            if len(members) == 0:
                # reseed the empty cluster with the point farthest from its centroid
                dist = np.sqrt(((points - centers[assign]) ** 2).sum(axis=1))
                far = int(dist.argmax())
                centers[z] = points[far]
                assign[far] = z
            else:
                centers[z] = members.mean(axis=0)
        new_assign = _nearest(points, centers)
        if np.array_equal(new_assign, assign):
            break
        assign = new_assign

    cell_to_zone = {c: int(z) for c, z in zip(cell_list, assign)}
    return Zoning(spec=spec, resolution=resolution, k=k, seed=seed,
                  centroids=centers, cell_to_zone=cell_to_zone)


def zone_of_point(x: float, y: float, z: Zoning) -> int:
    d2 = ((z.centroids - np.array([x, y])) ** 2).sum(axis=1)
    return int(d2.argmin())


def zone_of_stop(s: Stop, z: Zoning) -> int:
    """Zone of a stop: cell lookup, falling back to nearest centroid."""
    p = project(s.geo, z.spec)
    cell = cell_of(p, z.resolution, z.spec)
    if cell in z.cell_to_zone:
        return z.cell_to_zone[cell]
    return zone_of_point(p.x, p.y, z)


def clusters_visited(route: Route, z: Zoning) -> int:
    if not route.stops:
        raise DomainError("clusters_visited: empty route")
    return len({zone_of_stop(s, z) for s in route.stops})


def inertia(z: Zoning) -> float:
    """Sum of squared distances from mapped cell centroids to their zone centers."""
    total = 0.0
    for cell, zone in z.cell_to_zone.items():
        c = centroid(cell, z.spec)
        total += float((c.x - z.centroids[zone, 0]) ** 2 + (c.y - z.centroids[zone, 1]) ** 2)
    return total


def zone_sizes(z: Zoning) -> list[int]:
    sizes = [0] * z.k
    for zone in z.cell_to_zone.values():
        sizes[zone] += 1
    return sizes


# ---------------------------------------------------------------------------
# zones file

def save_zoning(z: Zoning, path) -> None:
    payload = {
        "grid": {
            "origin_lat": z.spec.origin.lat,
            "origin_lng": z.spec.origin.lng,
            "ref_resolution": z.spec.ref_resolution,
            "ref_edge_m": z.spec.ref_edge_m,
        },
        "resolution": z.resolution,
        "k": z.k,
        "seed": z.seed,
        "centroids": [[float(x), float(y)] for x, y in z.centroids],
        "cells": {format_cell_id(c): zone
                  for c, zone in sorted(z.cell_to_zone.items(),
                                        key=lambda kv: (kv[0].q, kv[0].r))},
    }
    with open(path, "w") as fh:
        json.dump(payload, fh)


def load_zoning(path) -> Zoning:
    with open(path) as fh:
        payload = json.load(fh)
    try:
        grid = payload["grid"]
        spec = GridSpec(origin=GeoPoint(grid["origin_lat"], grid["origin_lng"]),
                        ref_resolution=int(grid["ref_resolution"]),
                        ref_edge_m=float(grid["ref_edge_m"]))
        cells = {parse_cell_id(cid): int(zone) for cid, zone in payload["cells"].items()}
        return Zoning(spec=spec, resolution=int(payload["resolution"]),
                      k=int(payload["k"]), seed=int(payload["seed"]),
                      centroids=np.array(payload["centroids"], dtype=np.float64),
                      cell_to_zone=cells)
    except (KeyError, TypeError) as exc:
        raise DataError(f"malformed zones file {path}: {exc}") from exc
