"""Classical tour constructions used as references and test oracles.

All operate on an asymmetric travel-time matrix over an open path (no return
to the start), with the start stop pinned at position 0.
"""

from __future__ import annotations

import itertools

import numpy as np

from .autodiff import make_rng
from .errors import DomainError
from .routegraph import tour_length

BRUTE_FORCE_MAX_N = 10


def random_tour(n: int, start: int, rng: np.random.Generator) -> list[int]:
    """Start followed by a uniform shuffle of the remaining stops."""
    if n < 1 or not 0 <= start < n:
        raise DomainError(f"random_tour: bad n={n}, start={start}")
    rest = [i for i in range(n) if i != start]
    rng.shuffle(rest)
    return [start] + rest


def nearest_neighbor(travel: np.ndarray, start: int) -> list[int]:
    """Greedy construction; ties broken toward the lowest stop index."""
    travel = np.asarray(travel, dtype=np.float64)
    n = travel.shape[0]
    if not 0 <= start < n:
        raise DomainError(f"nearest_neighbor: start {start} out of range")
    unvisited = set(range(n))
    unvisited.discard(start)
    tour = [start]
    current = start
    while unvisited:
        nxt = min(unvisited, key=lambda j: (travel[current, j], j))
        tour.append(nxt)
        unvisited.discard(nxt)
        current = nxt
    return tour


def two_opt(order, travel: np.ndarray) -> list[int]:
    """Best-improvement 2-exchange local search on the open path.

    Candidate moves reverse order[i..j] for 1 <= i <= j < n, keeping the
    start pinned.  Costs are recomputed under the asymmetric matrix, so
    reversed arcs are re-priced rather than assumed symmetric.
    """
    travel = np.asarray(travel, dtype=np.float64)
    n = travel.shape[0]
    current = list(order)
    best_len = tour_length(current, travel)
    while True:
        best_move = None
        best_candidate_len = best_len
        for i in range(1, n):
            for j in range(i + 1, n):
                candidate = current[:i] + current[i:j + 1][::-1] + current[j + 1:]
                cand_len = tour_length(candidate, travel)
                if cand_len < best_candidate_len - 1e-12:
                    best_candidate_len = cand_len
                    best_move = candidate
        if best_move is None:
            return current
        current = best_move
        best_len = best_candidate_len


def brute_force_optimal(travel: np.ndarray, start: int, closed: bool = False):
    """Exhaustive optimum over all suffix permutations; n <= 10 only.

    Returns (tour, length); among ties, the lexicographically smallest tour.
    """
    travel = np.asarray(travel, dtype=np.float64)
    n = travel.shape[0]
    if n > BRUTE_FORCE_MAX_N:
        raise DomainError(f"brute_force_optimal: n={n} exceeds limit {BRUTE_FORCE_MAX_N}")
    if not 0 <= start < n:
        raise DomainError(f"brute_force_optimal: start {start} out of range")
    rest = [i for i in range(n) if i != start]
    best_tour = None
    best_len = np.inf
    for suffix in itertools.permutations(rest):
        tour = [start] + list(suffix)
        length = tour_length(tour, travel, closed=closed)
        if length < best_len:
            best_len = length
            best_tour = tour
    return best_tour, float(best_len)


def brute_force_optimal_dfs(travel: np.ndarray, start: int, closed: bool = False):
    """Independent second enumerator (recursive DFS) for oracle cross-checks."""
    travel = np.asarray(travel, dtype=np.float64)
    n = travel.shape[0]
    if n > BRUTE_FORCE_MAX_N:
        raise DomainError(f"brute_force_optimal_dfs: n={n} exceeds limit {BRUTE_FORCE_MAX_N}")
    best = {"tour": None, "len": np.inf}

    def visit(tour, remaining, acc):
        if not remaining:
            total = acc + (travel[tour[-1], tour[0]] if closed and n > 1 else 0.0)
            if total < best["len"]:
                best["len"] = total
                best["tour"] = list(tour)
            return
        for j in sorted(remaining):
            tour.append(j)
            visit(tour, remaining - {j}, acc + travel[tour[-2], j])
            tour.pop()

    visit([start], set(range(n)) - {start}, 0.0)
    return best["tour"], float(best["len"])
