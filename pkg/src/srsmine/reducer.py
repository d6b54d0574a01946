"""Test-suite reduction by k-medoids clustering with coverage repair."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from .statemodel import StateMachine
from .suite import TestCase, TestSuite, check_digest, coverage

DEFAULT_WEIGHT = 0.7
STRATEGY = "k-medoids"
_EPS = 1e-12


@dataclass(frozen=True)
class FeatureVector:
    bits: Tuple[int, ...]
    inputs: Tuple[float, ...]

    @property
    def dims(self) -> Tuple[int, int]:
        return len(self.bits), len(self.inputs)


def featurize(case: TestCase, machine: StateMachine) -> FeatureVector:
    """Transition-coverage bits followed by the normalised I_out inputs."""
    covered = set(case.covered_transitions)
    bits = tuple(1 if t.id in covered else 0 for t in machine.transitions)
    inputs = []
    for v in machine.variables:
        span = v.hi - v.lo
        x = case.i_out[v.name]
        inputs.append(0.0 if span == 0 else min(1.0, max(0.0, (x - v.lo) / span)))
    return FeatureVector(bits, tuple(inputs))


def distance(a: FeatureVector, b: FeatureVector, weight: float = DEFAULT_WEIGHT) -> float:
    """``w * jaccard(bits) + (1 - w) * euclid(inputs) / sqrt(dims)``, in [0, 1]."""
    if a.dims != b.dims:
        raise ValueError(f"feature dimensionality mismatch: {a.dims} vs {b.dims}")
    if not 0.0 <= weight <= 1.0:
        raise ValueError("weight must lie in [0, 1]")
    union = sum(1 for x, y in zip(a.bits, b.bits) if x or y)
    inter = sum(1 for x, y in zip(a.bits, b.bits) if x and y)
    jaccard = 0.0 if union == 0 else 1.0 - inter / union
    n = len(a.inputs)
    euclid = 0.0
    if n:
        euclid = math.sqrt(sum((x - y) ** 2 for x, y in zip(a.inputs, b.inputs))) / math.sqrt(n)
    return weight * jaccard + (1.0 - weight) * euclid


def distance_matrix(vectors: Sequence[FeatureVector], weight: float = DEFAULT_WEIGHT) -> np.ndarray:
    n = len(vectors)
    D = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            D[i, j] = D[j, i] = distance(vectors[i], vectors[j], weight)
    return D


@dataclass(frozen=True)
class Clustering:
    k: int
    assignment: Dict[str, int]
    medoids: Tuple[str, ...]
    total_distance: float
    silhouette: Optional[float] = None

    def members(self, cluster: int) -> List[str]:
        return sorted(cid for cid, c in self.assignment.items() if c == cluster)


def _assign(D: np.ndarray, medoids: Sequence[int]) -> Tuple[np.ndarray, float]:
    sub = D[:, list(medoids)]
    # argmin returns the first minimum: ties go to the earlier medoid
    labels = np.argmin(sub, axis=1)
    return labels, float(sub[np.arange(len(D)), labels].sum())


def _farthest_first(D: np.ndarray, k: int) -> List[int]:
    medoids = [0]
    nearest = D[0].copy()
    while len(medoids) < k:
        candidates = [i for i in range(len(D)) if i not in medoids]
        best = max(candidates, key=lambda i: (nearest[i], -i))
        medoids.append(best)
        nearest = np.minimum(nearest, D[best])
    return medoids


def pam(D: np.ndarray, k: int) -> Tuple[List[int], np.ndarray, float]:
    """Partitioning around medoids with deterministic farthest-first seeding.

    Rows of ``D`` must already be in canonical order; every tie is broken
    toward the lower index.
    """
    n = len(D)
    medoids = _farthest_first(D, k)
    labels, cost = _assign(D, medoids)
    while True:
        best = None
        for mi in range(k):
            for o in range(n):
                if o in medoids:
                    continue
                trial = list(medoids)
                trial[mi] = o
                _, c = _assign(D, trial)
                if c < cost - _EPS and (best is None or c < best[0] - _EPS):
                    best = (c, trial)
        if best is None:
            break
        cost, medoids = best[0], best[1]
        labels, cost = _assign(D, medoids)
    return medoids, labels, cost


def silhouette(D: np.ndarray, labels: np.ndarray) -> float:
    n = len(D)
    clusters = sorted(set(int(l) for l in labels))
    if len(clusters) < 2:
        return 0.0
    scores = []
    for i in range(n):
        own = labels == labels[i]
        if own.sum() <= 1:
            scores.append(0.0)
            continue
        a = D[i, own].sum() / (own.sum() - 1)
        b = min(D[i, labels == c].mean() for c in clusters if c != labels[i])
        m = max(a, b)
        scores.append(0.0 if m == 0 else (b - a) / m)
    return float(np.mean(scores))


def _canonical(suite: TestSuite) -> List[TestCase]:
    return sorted(suite.cases, key=lambda c: c.id)


def cluster(
    suite: TestSuite,
    machine: StateMachine,
    k: Union[int, str] = "auto",
    weight: float = DEFAULT_WEIGHT,
) -> Clustering:
    """Cluster the suite's cases; the result does not depend on case order.

    ``k="auto"`` picks k in [2, min(10, n-1)] with the best mean
    silhouette, smaller k on ties.
    """
    check_digest(suite, machine)
    cases = _canonical(suite)
    n = len(cases)
    if n == 0:
        raise ValueError("cannot cluster an empty suite")
    D = distance_matrix([featurize(c, machine) for c in cases], weight)
    sil = None
    if k == "auto":
        candidates = list(range(2, min(10, n - 1) + 1))
        if not candidates:
            kk = 1
            medoids, labels, cost = pam(D, 1)
        else:
            best = None
            for trial_k in candidates:
                medoids, labels, cost = pam(D, trial_k)
                s = silhouette(D, labels)
                if best is None or s > best[0] + _EPS:
                    best = (s, trial_k, medoids, labels, cost)
            sil, kk, medoids, labels, cost = best
    else:
        kk = int(k)
        if kk < 1:
            raise ValueError("number of clusters must be positive")
        if kk > n:
            raise ValueError(f"k={kk} exceeds the number of test cases ({n})")
        medoids, labels, cost = pam(D, kk)
        if 1 < kk < n:
            sil = silhouette(D, labels)
    return Clustering(
        k=kk,
        assignment={c.id: int(labels[i]) for i, c in enumerate(cases)},
        medoids=tuple(cases[m].id for m in medoids),
        total_distance=cost,
        silhouette=sil,
    )


def _repair(original: List[TestCase], kept: Dict[str, TestCase]) -> List[str]:
    """Re-add the smallest-id case for every coverage item the kept set lost."""
    added = []
    for key in ("pairs", "transitions"):
        covered = set()
        for c in kept.values():
            covered.update([c.predicate] if key == "pairs" else c.covered_transitions)
        for case in original:
            items = [case.predicate] if key == "pairs" else case.covered_transitions
            missing = [x for x in items if x not in covered]
            if missing and case.id not in kept:
                kept[case.id] = case
                added.append(case.id)
                covered.update(items)
    return added


def reduce(
    suite: TestSuite,
    machine: StateMachine,
    k: Union[int, str] = "auto",
    weight: float = DEFAULT_WEIGHT,
    repair: bool = True,
) -> TestSuite:
    """Keep one medoid per cluster, then restore any lost coverage.

    The reduced suite lists cases in id order, so permuting the input
    cases gives an identical result.
    """
    if len(suite.cases) == 0:
        return suite.with_cases([], reduction=_metadata(suite, 0, weight, [], [], repair))
    clustering = cluster(suite, machine, k, weight)
    original = _canonical(suite)
    kept = {cid: suite.case(cid) for cid in clustering.medoids}
    added = _repair(original, kept) if repair else []
    cases = sorted(kept.values(), key=lambda c: c.id)
    meta = _metadata(suite, clustering.k, weight, clustering.medoids, added, repair)
    return suite.with_cases(cases, reduction=meta)


def _metadata(suite, k, weight, medoids, added, repair) -> Dict[str, object]:
    return {
        "strategy": STRATEGY,
        "k": k,
        "weight": weight,
        "repair": repair,
        "original_size": len(suite.cases),
        "medoids": sorted(medoids),
        "repaired": sorted(added),
    }


def coverage_loss(original: TestSuite, reduced: TestSuite, machine: StateMachine) -> Dict[str, list]:
    """Coverage items present in ``original`` but missing from ``reduced``."""
    before, after = coverage(original, machine), coverage(reduced, machine)
    return {
        "pairs": sorted(set(after.uncovered_pairs) - set(before.uncovered_pairs)),
        "transitions": sorted(set(after.uncovered_transitions) - set(before.uncovered_transitions)),
    }
