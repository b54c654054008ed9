"""Fairness post-processing: switch boundary points between two clusters.

After K-means has settled, the two clusters whose sensitive-group balance
deviates most from the population (one too high, one too low) exchange
members. Candidates are ranked either by how close they sit to the other
cluster's centroid or by how mixed their neighborhood is; switching stops
as soon as both clusters fall within the balance tolerance.

By default a candidate is only switched when doing so strictly shrinks the
pair's combined relative imbalance, so a round can never overshoot past the
tolerance band it is aiming for. ``literal_switch=True`` removes that guard
and applies every candidate in rank order. In both modes a switch that
would empty its source cluster is skipped.

Scores, centroids and neighborhoods are frozen when a round starts; only
the group counts (and hence the balance ratios) track the switches inside
a round.
"""

from __future__ import annotations

import math
from collections import namedtuple
from dataclasses import dataclass

import numpy as np

from .core import Assignment, Dataset, RunConfig, ValidityError, group_count_matrix
from .metrics import _fairness_parts, gini
from .neighbors import knn_batch

Candidate = namedtuple("Candidate", "point source score")

REASONS = ("balanced", "candidates_exhausted", "round_cap")


@dataclass(frozen=True)
class SwitchRecord:
    """One accepted membership switch and the state it produced."""

    point: int
    source: int
    target: int
    score: float
    fairness_before: float
    fairness_after: float
    balance_a: float
    balance_b: float


@dataclass(frozen=True)
class AdjustmentTrace:
    """Accepted switches in order, the final assignment, and why we stopped."""

    switches: tuple
    assignment: Assignment
    reason: str


def balance_enough(beta_cluster: float, beta_population: float, beta0: float = 0.10) -> bool:
    """Is the cluster ratio within beta0 (relative) of the population ratio?"""
    if not (math.isfinite(beta_population) and beta_population > 0):
        raise ValidityError(f"population balance must be finite and positive, got {beta_population}")
    if math.isinf(beta_cluster):
        return False
    return abs(beta_cluster - beta_population) <= beta0 * beta_population


def _ratio(num: int, den: int) -> float:
    # same conventions as metrics.balance: x/0 is inf, 0/0 counts as 1
    if den == 0:
        return 1.0 if num == 0 else math.inf
    return num / den


def _deviation(beta: float, beta_pop: float) -> float:
    if math.isinf(beta):
        return math.inf
    return abs(beta - beta_pop) / beta_pop


def _group_pair(counts_row, size, pop_props):
    """The (most over-represented, most under-represented) group of one cluster.

    With two groups the pair is always (0, 1) so ratios stay comparable
    across clusters. Ties take the lower group id; a cluster that matches
    the population on every group falls back to (0, 1) as well.
    """
    G = pop_props.shape[0]
    if G == 2:
        return 0, 1
    ratios = (counts_row / size) / pop_props
    over = int(np.argmax(ratios))
    under = int(np.argmin(ratios))
    if over == under:
        return 0, 1
    return over, under


def _pair_state(counts, n):
    """Frozen per-cluster group pairs, balances and deviations."""
    K = counts.shape[0]
    sizes = counts.sum(axis=1)
    pop_counts = counts.sum(axis=0)
    pop_props = pop_counts / n
    pairs, betas, beta_pops, devs = [], [], [], []
    for i in range(K):
        a, b = _group_pair(counts[i], sizes[i], pop_props)
        beta = _ratio(int(counts[i, a]), int(counts[i, b]))
        beta_pop = int(pop_counts[a]) / int(pop_counts[b])
        pairs.append((a, b))
        betas.append(beta)
        beta_pops.append(beta_pop)
        devs.append(_deviation(beta, beta_pop))
    return pairs, betas, beta_pops, devs


def select_extreme_pair(data: Dataset, assignment: Assignment):
    """(most over-balanced cluster, most under-balanced cluster), or None.

    None means every cluster already matches the population ratio exactly
    on its own extreme group pair, so there is nothing to trade.
    """
    assignment.validate_nonempty()
    if assignment.K < 2:
        raise ValidityError("need at least 2 clusters to trade members")
    counts = group_count_matrix(data, assignment)
    pairs, betas, beta_pops, devs = _pair_state(counts, data.n)
    if all(d == 0.0 for d in devs):
        return None
    K = assignment.K

    def signed(i):
        # over-balanced clusters sort high, under-balanced low; inf ratios
        # are the most over-balanced state there is
        if math.isinf(betas[i]):
            return math.inf
        return (betas[i] - beta_pops[i]) / beta_pops[i]

    a = max(range(K), key=lambda i: (signed(i), -i))
    b = min((j for j in range(K) if j != a), key=lambda j: (signed(j), j))
    return a, b


def _near_foreign_candidates(data, labels, a, b):
    """Members of both clusters ranked by distance to the other centroid."""
    X = data.features
    in_a = np.flatnonzero(labels == a)
    in_b = np.flatnonzero(labels == b)
    centroid_a = X[in_a].mean(axis=0)
    centroid_b = X[in_b].mean(axis=0)
    d_a = np.sqrt(((X[in_a] - centroid_b) ** 2).sum(axis=1))
    d_b = np.sqrt(((X[in_b] - centroid_a) ** 2).sum(axis=1))
    cands = [Candidate(int(p), a, float(s)) for p, s in zip(in_a, d_a)]
    cands += [Candidate(int(p), b, float(s)) for p, s in zip(in_b, d_b)]
    cands.sort(key=lambda c: (c.score, c.point))
    return cands


def _gini_candidates(data, labels, a, b, knn_k, K):
    """Members of both clusters ranked by neighborhood impurity, highest first."""
    members = np.flatnonzero((labels == a) | (labels == b))
    neighbor_sets = knn_batch(data, members, knn_k)
    cands = []
    for p, ns in zip(members, neighbor_sets):
        props = np.bincount(labels[ns.indices], minlength=K) / knn_k
        cands.append(Candidate(int(p), int(labels[p]), gini(props)))
    cands.sort(key=lambda c: (-c.score, c.point))
    return cands


def _run_pair_round(data, assignment, a, b, candidates, beta0, literal_switch):
    """Walk the ranked candidates, switching until both clusters balance."""
    K = assignment.K
    n = data.n
    labels = assignment.cluster_of.copy()
    counts = group_count_matrix(data, assignment)
    sizes = counts.sum(axis=1)
    pairs, _, beta_pops, _ = _pair_state(counts, n)
    pair_a, pair_b = pairs[a], pairs[b]
    pop_a, pop_b = beta_pops[a], beta_pops[b]

    def beta_of(i, pair):
        return _ratio(int(counts[i, pair[0]]), int(counts[i, pair[1]]))

    fairness = _fairness_parts(counts, n)[0]
    records = []
    reason = "candidates_exhausted"
    for cand in candidates:
        beta_a = beta_of(a, pair_a)
        beta_b = beta_of(b, pair_b)
        if balance_enough(beta_a, pop_a, beta0) and balance_enough(beta_b, pop_b, beta0):
            reason = "balanced"
            break
        src = cand.source
        if sizes[src] <= 1:
            continue  # never empty a cluster
        tgt = b if src == a else a
        g = data.sensitive[cand.point]
        before = _deviation(beta_a, pop_a) + _deviation(beta_b, pop_b)
        counts[src, g] -= 1
        counts[tgt, g] += 1
        sizes[src] -= 1
        sizes[tgt] += 1
        after = _deviation(beta_of(a, pair_a), pop_a) + _deviation(beta_of(b, pair_b), pop_b)
        if literal_switch or after < before:
            labels[cand.point] = tgt
            new_fairness = _fairness_parts(counts, n)[0]
            records.append(
                SwitchRecord(
                    point=cand.point,
                    source=src,
                    target=tgt,
                    score=cand.score,
                    fairness_before=fairness,
                    fairness_after=new_fairness,
                    balance_a=beta_of(a, pair_a),
                    balance_b=beta_of(b, pair_b),
                )
            )
            fairness = new_fairness
        else:
            counts[src, g] += 1
            counts[tgt, g] -= 1
            sizes[src] += 1
            sizes[tgt] -= 1
    else:
        beta_a = beta_of(a, pair_a)
        beta_b = beta_of(b, pair_b)
        if balance_enough(beta_a, pop_a, beta0) and balance_enough(beta_b, pop_b, beta0):
            reason = "balanced"
    return AdjustmentTrace(tuple(records), Assignment(labels, K), reason)


def _prep(data, assignment):
    assignment.validate_nonempty()
    if assignment.K < 2:
        raise ValidityError("need at least 2 clusters to trade members")
    return select_extreme_pair(data, assignment)


def fc_near_foreign(data: Dataset, assignment: Assignment, beta0: float = 0.10,
                    literal_switch: bool = False) -> AdjustmentTrace:
    """One adjustment round ranking candidates by closeness to the foreign centroid."""
    pair = _prep(data, assignment)
    if pair is None:
        return AdjustmentTrace((), assignment, "balanced")
    a, b = pair
    cands = _near_foreign_candidates(data, assignment.cluster_of, a, b)
    return _run_pair_round(data, assignment, a, b, cands, beta0, literal_switch)


def fc_gini(data: Dataset, assignment: Assignment, knn_k: int = 10, beta0: float = 0.10,
            literal_switch: bool = False) -> AdjustmentTrace:
    """One adjustment round ranking candidates by neighborhood impurity."""
    if not 1 <= knn_k < data.n:
        raise ValidityError(f"neighborhood size must satisfy 1 <= knn_k < {data.n}, got {knn_k}")
    pair = _prep(data, assignment)
    if pair is None:
        return AdjustmentTrace((), assignment, "balanced")
    a, b = pair
    cands = _gini_candidates(data, assignment.cluster_of, a, b, knn_k, assignment.K)
    return _run_pair_round(data, assignment, a, b, cands, beta0, literal_switch)


def fair_adjust_multi(data: Dataset, assignment: Assignment, config: RunConfig) -> AdjustmentTrace:
    """Adjust the current extreme pair repeatedly until nothing is left to fix.

    Stops on the first of: no extreme pair / balanced at round entry, a round
    that accepts no switch, or the round cap (K*(K-1)/2 unless overridden).
    With two clusters this reduces to a single pair round, cap permitting.
    """
    config.validate_for(data.n)
    if config.heuristic == "none":
        raise ValidityError("heuristic 'none' disables adjustment; nothing to run")
    if config.heuristic == "near_foreign":
        def run_round(current):
            return fc_near_foreign(data, current, config.beta0, config.literal_switch)
    else:
        def run_round(current):
            return fc_gini(data, current, config.knn_k, config.beta0, config.literal_switch)

    cap = config.pair_rounds()
    current = assignment
    switches = []
    last_pair = None
    last_reason = None
    for _ in range(cap):
        pair = select_extreme_pair(data, current)
        if pair is None:
            return AdjustmentTrace(tuple(switches), current, "balanced")
        trace = run_round(current)
        current = trace.assignment
        switches.extend(trace.switches)
        if not trace.switches:
            return AdjustmentTrace(tuple(switches), current, trace.reason)
        last_pair = pair
        last_reason = trace.reason

    # cap reached; name the stop honestly instead of always blaming the cap
    pair = select_extreme_pair(data, current)
    if pair is None or last_reason == "balanced":
        reason = "balanced"
    elif last_pair is not None and set(pair) == set(last_pair) and last_reason == "candidates_exhausted":
        # the same two clusters are still the extremes and their candidate
        # list is spent, so the cap is not what actually stopped us
        reason = "candidates_exhausted"
    else:
        reason = "round_cap"
    return AdjustmentTrace(tuple(switches), current, reason)
