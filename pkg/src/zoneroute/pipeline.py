"""Training strategies and inference.

General training fits one policy on whole routes.  Zone-based training fits
an independent policy per zone on the stop subsets falling inside it; at
inference the per-zone sub-tours are stitched: zones are visited in
nearest-stop-centroid order starting from the zone holding the route start,
entering each zone at its stop nearest the current position.
"""

from __future__ import annotations

import csv
import hashlib
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import autodiff as ad
from .autodiff import AdamState, Tensor, make_rng
from .baselines import nearest_neighbor
from .errors import DataError, DomainError
from .hexgrid import GeoPoint, GridSpec
from .model import (DecodeResult, ModelConfig, ModelParams, decode,
                    decode_tape, encode, reinforce_loss)
from .routegraph import Route, Stop, build_graph, project_stops, tour_length
from .zoning import Zoning, load_zoning, save_zoning, zone_of_stop


@dataclass
class TrainConfig:
    epochs: int = 10
    batch_size: int = 2
    lr: float = 2e-3
    hidden_dim: int = 64
    dropout: float = 0.1
    seed: int = 0
    baseline_decay: float = 0.9
    max_grad_norm: float = 1.0
    samples_per_route: int = 1

    def __post_init__(self):
        if self.epochs < 1 or self.batch_size < 1 or self.samples_per_route < 1:
            raise DomainError("epochs, batch_size and samples_per_route must be >= 1")
        if not 0.0 <= self.baseline_decay < 1.0:
            raise DomainError("baseline_decay must lie in [0, 1)")

    def model_config(self) -> ModelConfig:
        return ModelConfig(hidden_dim=self.hidden_dim, dropout=self.dropout)


def derive_seed(seed: int, token) -> int:
    """Stable 63-bit stream seed for a named sub-task."""
    digest = hashlib.sha256(f"{seed}:{token}".encode()).digest()
    return int.from_bytes(digest[:8], "big") >> 1


def default_grid_spec(routes: list[Route]) -> GridSpec:
    """Grid anchored at the mean stop location of the given routes."""
    lats = [s.geo.lat for r in routes for s in r.stops]
    lngs = [s.geo.lng for r in routes for s in r.stops]
    return GridSpec(origin=GeoPoint(float(np.mean(lats)), float(np.mean(lngs))))


LOG_COLUMNS = ("epoch", "mean_sampled_len", "greedy_eval_len", "baseline")


def write_log_csv(rows, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(LOG_COLUMNS)
        writer.writerows(rows)


# ---------------------------------------------------------------------------
# general training

def train_general(routes: list[Route], cfg: TrainConfig, spec: GridSpec,
                  random_start_ids: frozenset = frozenset()):
    """Minibatch REINFORCE with an EMA baseline and Adam; deterministic per seed.

    Routes whose ids appear in random_start_ids get a fresh uniformly random
    start node each epoch (used for zone sub-instances, which must be
    start-agnostic).  Returns (params, log_rows).
    """
    if not routes:
        raise DomainError("train_general: no routes")
    params = ModelParams.init(cfg.model_config(), seed=derive_seed(cfg.seed, "params"))
    rng = make_rng(derive_seed(cfg.seed, "train"))

    if len(routes) >= 10:
        n_eval = max(1, min(50, len(routes) // 10))
        train_routes, eval_routes = routes[:-n_eval], routes[-n_eval:]
    else:
        train_routes, eval_routes = routes, routes

    graphs = {r.id: build_graph(r, spec) for r in routes}
    plist = params.as_list()
    state = AdamState(plist)
    baseline = None
    log_rows = []

    for epoch in range(1, cfg.epochs + 1):
        order = np.arange(len(train_routes))
        rng.shuffle(order)
        sampled_lengths = []
        for chunk_start in range(0, len(order), cfg.batch_size):
            batch = order[chunk_start:chunk_start + cfg.batch_size]
            log_probs, lengths = [], []
            for idx in batch:
                route = train_routes[int(idx)]
                g = graphs[route.id]
                start = (int(rng.integers(route.n)) if route.id in random_start_ids
                         else route.start_index)
                E = encode(g, params, training=True, rng=rng)
                for _ in range(cfg.samples_per_route):
                    tour, logp = decode_tape(E, start, params, greedy=False, rng=rng)
                    log_probs.append(logp)
                    lengths.append(tour_length(tour, route.travel))
            batch_mean = float(np.mean(lengths))
            if baseline is None:
                baseline = batch_mean
            loss = reinforce_loss(log_probs, lengths, baseline)
            grads = ad.backward(loss, plist)
            ad.adam_step(plist, grads, state, cfg.lr, max_grad_norm=cfg.max_grad_norm)
            baseline = cfg.baseline_decay * baseline + (1 - cfg.baseline_decay) * batch_mean
            sampled_lengths.extend(lengths)

        greedy_lengths = []
        for route in eval_routes:
            E = encode(graphs[route.id], params, training=False)
            res = decode(E, route.start_index, route.travel, params, greedy=True)
            greedy_lengths.append(res.length)
        log_rows.append((epoch, float(np.mean(sampled_lengths)),
                         float(np.mean(greedy_lengths)), baseline))
    return params, log_rows


# ---------------------------------------------------------------------------
# zone sub-instances

@dataclass
class SubInstance:
    route: Route
    parent_id: str
    parent_indices: list[int]
    full: bool  # covers every stop of the parent route


def _sub_route(route: Route, indices: list[int], zone: int) -> Route:
    full = len(indices) == route.n
    stops = []
    start_idx = route.start_index
    nominal = start_idx if start_idx in indices else indices[0]
    for i in indices:
        s = route.stops[i]
        stops.append(Stop(id=s.id, geo=s.geo, zone_label=s.zone_label,
                          is_start=(i == nominal)))
    travel = route.travel[np.ix_(indices, indices)].copy()
    sub_id = route.id if full else f"{route.id}#z{zone}"
    sub = Route(id=sub_id, stops=stops, travel=travel)
    return sub


def extract_zone_subroutes(routes: list[Route], zoning: Zoning) -> dict[int, list[SubInstance]]:
    """Per-zone training sub-instances: for each route and each zone holding
    at least two of its stops, the stop subset with its travel submatrix."""
    out: dict[int, list[SubInstance]] = {}
    for route in routes:
        by_zone: dict[int, list[int]] = {}
        for i, stop in enumerate(route.stops):
            by_zone.setdefault(zone_of_stop(stop, zoning), []).append(i)
        for zone, indices in sorted(by_zone.items()):
            if len(indices) < 2:
                continue
            sub = _sub_route(route, indices, zone)
            out.setdefault(zone, []).append(
                SubInstance(route=sub, parent_id=route.id,
                            parent_indices=indices, full=len(indices) == route.n))
    return out


@dataclass
class ZoneModelSet:
    zoning: Zoning
    models: dict[int, ModelParams] = field(default_factory=dict)
    logs: dict[int, list] = field(default_factory=dict)


def _train_zone_worker(args):
    zone, routes, random_ids, cfg, spec = args
    params, log_rows = train_general(routes, cfg, spec, random_start_ids=random_ids)
    payload = {name: params[name].data for name in params.names()}
    return zone, payload, log_rows


def train_zone_models(routes: list[Route], zoning: Zoning, cfg: TrainConfig,
                      jobs: int = 1) -> ZoneModelSet:
    """Independent per-zone training with hashed per-zone seeds.

    Zone trainings share nothing mutable, so they are order-independent and
    may run in a process pool; results are identical for any jobs count.
    """
    subroutes = extract_zone_subroutes(routes, zoning)
    if not subroutes:
        raise DomainError("train_zone_models: no zone has a trainable sub-instance")
    tasks = []
    for zone in sorted(subroutes):
        subs = subroutes[zone]
        zone_routes = [s.route for s in subs]
        random_ids = frozenset(s.route.id for s in subs if not s.full)
        zone_cfg = replace(cfg, seed=derive_seed(cfg.seed, zone))
        tasks.append((zone, zone_routes, random_ids, zone_cfg, zoning.spec))

    results = []
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_train_zone_worker, tasks))
    else:
        results = [_train_zone_worker(t) for t in tasks]

    zms = ZoneModelSet(zoning=zoning)
    for zone, payload, log_rows in sorted(results):
        params = ModelParams.init(cfg.model_config(), seed=0)
        for name in params.names():
            params[name].data[...] = payload[name]
        zms.models[zone] = params
        zms.logs[zone] = log_rows
    return zms


# ---------------------------------------------------------------------------
# inference

def infer_general(route: Route, params: ModelParams, spec: GridSpec) -> DecodeResult:
    g = build_graph(route, spec)
    E = encode(g, params, training=False)
    return decode(E, route.start_index, route.travel, params, greedy=True)


def infer_zoned(route: Route, zms: ZoneModelSet) -> DecodeResult:
    """Greedy zone stitching: order zones by nearest stop centroid from the
    current position, decode each zone's sub-instance with its own model."""
    zoning = zms.zoning
    spec = zoning.spec
    points = project_stops(route, spec)

    by_zone: dict[int, list[int]] = {}
    for i, stop in enumerate(route.stops):
        by_zone.setdefault(zone_of_stop(stop, zoning), []).append(i)
    zone_centroids = {z: points[idx].mean(axis=0) for z, idx in by_zone.items()}

    start = route.start_index
    current_zone = zone_of_stop(route.stops[start], zoning)
    entry = start
    position = points[start]
    remaining = set(by_zone)
    order: list[int] = []
    total_log_prob = 0.0

    while True:
        indices = by_zone[current_zone]
        if len(indices) == 1:
            order.extend(indices)
        else:
            sub = _sub_route(route, indices, current_zone)
            entry_local = indices.index(entry)
            params = zms.models.get(current_zone)
            if params is None:
                sub_tour = nearest_neighbor(sub.travel, entry_local)
            else:
                g = build_graph(sub, spec)
                E = encode(g, params, training=False)
                res = decode(E, entry_local, sub.travel, params, greedy=True)
                sub_tour = res.tour
                total_log_prob += res.log_prob
            order.extend(indices[i] for i in sub_tour)
        remaining.discard(current_zone)
        if not remaining:
            break
        position = points[order[-1]]
        current_zone = min(remaining,
                           key=lambda z: (float(((zone_centroids[z] - position) ** 2).sum()), z))
        entry = min(by_zone[current_zone],
                    key=lambda i: (float(((points[i] - position) ** 2).sum()), i))

    return DecodeResult(tour=order, log_prob=total_log_prob,
                        length=tour_length(order, route.travel))


# ---------------------------------------------------------------------------
# checkpoint directory layout

GENERAL_CKPT = "general.ckpt.json"
GENERAL_LOG = "train_log.csv"
GENERAL_GRID = "grid.json"
ZONES_SUBDIR = "zones"
ZONES_FILE = "zones.json"


def _save_grid(spec: GridSpec, path) -> None:
    import json

    with open(path, "w") as fh:
        json.dump({"origin_lat": spec.origin.lat, "origin_lng": spec.origin.lng,
                   "ref_resolution": spec.ref_resolution,
                   "ref_edge_m": spec.ref_edge_m}, fh)


def _load_grid(path) -> GridSpec:
    import json

    with open(path) as fh:
        grid = json.load(fh)
    return GridSpec(origin=GeoPoint(grid["origin_lat"], grid["origin_lng"]),
                    ref_resolution=int(grid["ref_resolution"]),
                    ref_edge_m=float(grid["ref_edge_m"]))


def save_general(params: ModelParams, log_rows, ckpt_dir, spec: GridSpec) -> None:
    os.makedirs(ckpt_dir, exist_ok=True)
    params.save(os.path.join(ckpt_dir, GENERAL_CKPT))
    write_log_csv(log_rows, os.path.join(ckpt_dir, GENERAL_LOG))
    _save_grid(spec, os.path.join(ckpt_dir, GENERAL_GRID))


def load_general(ckpt_dir):
    """Returns (params, grid_spec) for a general checkpoint directory."""
    path = os.path.join(ckpt_dir, GENERAL_CKPT)
    if not os.path.isfile(path):
        raise DataError(f"no general checkpoint at {path}")
    return ModelParams.load(path), _load_grid(os.path.join(ckpt_dir, GENERAL_GRID))


def save_zoned(zms: ZoneModelSet, ckpt_dir) -> None:
    zone_dir = os.path.join(ckpt_dir, ZONES_SUBDIR)
    os.makedirs(zone_dir, exist_ok=True)
    save_zoning(zms.zoning, os.path.join(ckpt_dir, ZONES_FILE))
    for zone in sorted(zms.models):
        zms.models[zone].save(os.path.join(zone_dir, f"zone_{zone}.ckpt.json"))
        write_log_csv(zms.logs.get(zone, []),
                      os.path.join(zone_dir, f"zone_{zone}.log.csv"))


def load_zoned(ckpt_dir) -> ZoneModelSet:
    zones_path = os.path.join(ckpt_dir, ZONES_FILE)
    zone_dir = os.path.join(ckpt_dir, ZONES_SUBDIR)
    if not os.path.isfile(zones_path) or not os.path.isdir(zone_dir):
        raise DataError(f"no zoned checkpoint layout in {ckpt_dir}")
    zms = ZoneModelSet(zoning=load_zoning(zones_path))
    for name in sorted(os.listdir(zone_dir)):
        if name.startswith("zone_") and name.endswith(".ckpt.json"):
            zone = int(name[len("zone_"):-len(".ckpt.json")])
            zms.models[zone] = ModelParams.load(os.path.join(zone_dir, name))
    if not zms.models:
        raise DataError(f"no zone checkpoints in {zone_dir}")
    return zms
