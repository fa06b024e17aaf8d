"""Command-line entry point: synth / zones / train / infer / eval.

Exit codes: 0 success, 1 usage error, 2 data or domain error, 3 numeric
error.  All randomness flows from explicit seeds, so every subcommand is
byte-identical across repeated runs with the same inputs.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys

from . import dataio, metrics, pipeline
from .dataio import SynthConfig
from .errors import DataError, DomainError, NumericError
from .pipeline import TrainConfig
from .routegraph import tour_length
from .zoning import clusters_visited, collect_cells, kmeans, load_zoning, save_zoning

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERIC = 3


class UsageError(Exception):
    pass


def _parse_config_file(path, cls):
    """Flat `key = value` config; keys must match the dataclass fields."""
    fields = {f.name: f.type for f in dataclasses.fields(cls)}
    values = {}
    try:
        with open(path) as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise UsageError(f"cannot read config file {path}: {exc}") from exc
    for lineno, line in enumerate(lines, 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected 'key = value'")
        key, _, raw = line.partition("=")
        key, raw = key.strip(), raw.strip()
        if key not in fields:
            raise UsageError(f"{path}:{lineno}: unknown config key {key!r}")
        try:
            if fields[key] in ("int", int):
                values[key] = int(raw)
            else:
                values[key] = float(raw)
        except ValueError as exc:
            raise UsageError(f"{path}:{lineno}: bad value for {key}: {raw!r}") from exc
    return cls(**values)


def _load_tours(path) -> dict:
    with open(path) as fh:
        payload = json.load(fh)
    if "tours" not in payload:
        raise DataError(f"malformed tours file {path}")
    return payload["tours"]


def _grid_spec_for(routes, zones_path):
    if zones_path:
        return load_zoning(zones_path).spec
    return pipeline.default_grid_spec(routes)


# ---------------------------------------------------------------------------
# subcommands

def cmd_synth(args) -> int:
    cfg = _parse_config_file(args.config, SynthConfig)
    routes = dataio.generate_synthetic(cfg)
    dataio.save_routes(routes, args.out)
    print(f"wrote {len(routes)} synthetic routes to {args.out}")
    return EXIT_OK


def cmd_zones(args) -> int:
    routes = dataio.load_routes(args.routes)
    spec = pipeline.default_grid_spec(routes)
    cells = collect_cells(routes, args.resolution, spec)
    zoning = kmeans(cells, args.k, args.seed, spec, resolution=args.resolution)
    save_zoning(zoning, args.out)
    print(f"clustered {len(cells)} cells into {zoning.k} zones -> {args.out}")
    return EXIT_OK


def cmd_train(args) -> int:
    routes = dataio.load_routes(args.routes)
    cfg = _parse_config_file(args.config, TrainConfig)
    if args.strategy == "general":
        spec = _grid_spec_for(routes, args.zones)
        params, log_rows = pipeline.train_general(routes, cfg, spec)
        pipeline.save_general(params, log_rows, args.out, spec)
        print(f"general model trained for {cfg.epochs} epochs -> {args.out}")
    else:
        if not args.zones:
            raise UsageError("train --strategy zoned requires --zones")
        zoning = load_zoning(args.zones)
        zms = pipeline.train_zone_models(routes, zoning, cfg, jobs=args.jobs)
        pipeline.save_zoned(zms, args.out)
        print(f"trained {len(zms.models)} zone models -> {args.out}")
    return EXIT_OK


def cmd_infer(args) -> int:
    routes = dataio.load_routes(args.routes)
    tours = {}
    if args.strategy == "general":
        params, spec = pipeline.load_general(args.ckpt)
        for route in routes:
            res = pipeline.infer_general(route, params, spec)
            tours[route.id] = {"order": [route.stops[i].id for i in res.tour],
                               "length_s": res.length, "log_prob": res.log_prob}
    else:
        zms = pipeline.load_zoned(args.ckpt)
        for route in routes:
            res = pipeline.infer_zoned(route, zms)
            tours[route.id] = {"order": [route.stops[i].id for i in res.tour],
                               "length_s": res.length, "log_prob": res.log_prob}
    with open(args.out, "w") as fh:
        json.dump({"strategy": args.strategy, "tours": tours}, fh, sort_keys=True)
    print(f"inferred {len(tours)} tours -> {args.out}")
    return EXIT_OK


def cmd_eval(args) -> int:
    routes = dataio.load_routes(args.routes)
    zoning = load_zoning(args.zones)
    tours_general = _load_tours(args.tours_general)
    tours_zoned = _load_tours(args.tours_zoned)

    rows = []
    for route in routes:
        if route.actual_order is None:
            raise DataError(f"route {route.id}: no ground-truth sequence for evaluation")
        actual = tour_length(route.actual_order, route.travel)
        preds = {}
        index_of = {s.id: i for i, s in enumerate(route.stops)}
        for strategy, tours in (("general", tours_general), ("zoned", tours_zoned)):
            if route.id not in tours:
                raise DataError(f"route {route.id}: missing from {strategy} tours file")
            order = [index_of[sid] for sid in tours[route.id]["order"]]
            preds[strategy] = tour_length(order, route.travel)
        rows.append(metrics.RouteRow(route_id=route.id, n_stops=route.n,
                                     clusters_visited=clusters_visited(route, zoning),
                                     actual_s=actual,
                                     pred_general_s=preds["general"],
                                     pred_zoned_s=preds["zoned"]))

    report = metrics.build_report(rows)
    metrics.save_report_json(report, args.out)
    if args.csv:
        metrics.save_report_csv(rows, args.csv)
    if args.plot_data:
        metrics.save_plot_data_csv(rows, args.plot_data)
    print(f"evaluated {len(rows)} routes: "
          f"general MAPE {report['aggregates']['general']['mape']:.2f}% / "
          f"zoned MAPE {report['aggregates']['zoned']['mape']:.2f}% -> {args.out}")
    return EXIT_OK


# ---------------------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="zoneroute",
                     description="Zone-based vs. general route-policy training")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate synthetic route files")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("zones", help="collect hex cells and cluster into zones")
    p.add_argument("--routes", required=True)
    p.add_argument("--resolution", type=int, default=7)
    p.add_argument("--k", type=int, default=57)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_zones)

    p = sub.add_parser("train", help="train a general or zoned policy")
    p.add_argument("--strategy", choices=("general", "zoned"), required=True)
    p.add_argument("--routes", required=True)
    p.add_argument("--zones")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--jobs", type=int, default=os.cpu_count() or 1)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("infer", help="greedy inference over routes")
    p.add_argument("--strategy", choices=("general", "zoned"), required=True)
    p.add_argument("--routes", required=True)
    p.add_argument("--ckpt", required=True)
    p.add_argument("--zones")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_infer)

    p = sub.add_parser("eval", help="evaluate tours against ground truth")
    p.add_argument("--routes", required=True)
    p.add_argument("--tours-general", required=True)
    p.add_argument("--tours-zoned", required=True)
    p.add_argument("--zones", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--csv")
    p.add_argument("--plot-data")
    p.set_defaults(func=cmd_eval)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DomainError, DataError, IOError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericError as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
