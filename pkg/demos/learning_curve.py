#!/usr/bin/env python3
"""Watch the policy learn on fixed-size instances.

Trains the general policy on 100 synthetic 10-stop routes and prints the
per-epoch sampled and greedy tour lengths next to the random-tour and
nearest-neighbor baselines, so the learning signal is visible without any
plotting dependencies.

    python3 demos/learning_curve.py
"""

import numpy as np

from zoneroute import dataio, pipeline
from zoneroute.autodiff import make_rng
from zoneroute.baselines import nearest_neighbor, random_tour
from zoneroute.routegraph import tour_length

routes = dataio.generate_synthetic(dataio.SynthConfig(
    n_routes=100, stops_min=10, stops_max=10, seed=42))
spec = pipeline.default_grid_spec(routes)

rng = make_rng(1)
rand_mean = np.mean([tour_length(random_tour(r.n, r.start_index, rng), r.travel)
                     for r in routes for _ in range(5)])
nn_mean = np.mean([tour_length(nearest_neighbor(r.travel, r.start_index), r.travel)
                   for r in routes])
print(f"baselines: random tour {rand_mean:.1f}s, nearest neighbor {nn_mean:.1f}s")
print(f"{'epoch':>5}  {'sampled':>8}  {'greedy':>8}  {'vs random':>9}  {'vs NN':>6}")

params, log = pipeline.train_general(
    routes, pipeline.TrainConfig(epochs=15, seed=42), spec)
for epoch, sampled, greedy, _baseline in log:
    print(f"{epoch:>5}  {sampled:>8.1f}  {greedy:>8.1f}  "
          f"{greedy / rand_mean:>8.2f}x  {greedy / nn_mean:>5.2f}x")

final = np.mean([pipeline.infer_general(r, params, spec).length for r in routes])
print(f"\nfinal greedy mean over all routes: {final:.1f}s "
      f"({final / rand_mean:.2f}x random, {final / nn_mean:.2f}x NN)")
