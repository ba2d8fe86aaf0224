"""Displacement-error metrics and dataset-level aggregation.

``min_ade_k``/``min_fde_k`` score the first ``k`` entries of a rank-ordered
candidate set (k-prefix convention), so one S=10 output can be scored at
k=1, 5 and 10.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from . import kernels
from .errors import HorizonMismatch, KExceedsSetSize, MissingGroundTruth
from .types import CandidateSet, Scenario


def _pair(reference, candidate):
    r = np.asarray(reference, dtype=np.float64)
    c = np.asarray(candidate, dtype=np.float64)
    if r.shape != c.shape:
        raise HorizonMismatch(f"shapes differ: {r.shape} vs {c.shape}")
    return r, c


def ade(reference, candidate) -> float:
    """Mean Euclidean distance between corresponding timesteps."""
    r, c = _pair(reference, candidate)
    return float(np.mean(np.hypot(*(r - c).T)))


def fde(reference, candidate) -> float:
    """Euclidean distance between the final points."""
    r, c = _pair(reference, candidate)
    return float(np.hypot(*(r[-1] - c[-1])))


def _candidates(candidates):
    if isinstance(candidates, CandidateSet):
        return candidates.trajectories
    return np.asarray(candidates, dtype=np.float64)


def _min_k(reference, candidates, k, final_only):
    cands = _candidates(candidates)
    ref = np.asarray(reference, dtype=np.float64)
    if k < 1 or k > cands.shape[0]:
        raise KExceedsSetSize(f"k={k} but candidate set has S={cands.shape[0]}")
    if cands.shape[1:] != ref.shape:
        raise HorizonMismatch(f"reference shape {ref.shape} vs candidates {cands.shape[1:]}")
    d = kernels.distance_matrix(ref[None], cands[:k], final_only)
    return float(d.min())


def min_ade_k(reference, candidates, k: int) -> float:
    """Smallest ADE between ``reference`` and the first ``k`` candidates."""
    return _min_k(reference, candidates, k, False)


def min_fde_k(reference, candidates, k: int) -> float:
    """Smallest FDE between ``reference`` and the first ``k`` candidates."""
    return _min_k(reference, candidates, k, True)


@dataclass(frozen=True)
class ScenarioScore:
    scenario_id: str
    min_ade: Mapping[int, float]
    min_fde: Mapping[int, float]


def score_scenario(scenario: Scenario, candidates, ks: Iterable[int]) -> ScenarioScore:
    if scenario.ground_truth is None:
        raise MissingGroundTruth(f"scenario {scenario.scenario_id!r} has no ground truth")
    ks = sorted(set(int(k) for k in ks))
    return ScenarioScore(
        scenario.scenario_id,
        {k: min_ade_k(scenario.ground_truth, candidates, k) for k in ks},
        {k: min_fde_k(scenario.ground_truth, candidates, k) for k in ks},
    )


@dataclass(frozen=True)
class MetricReport:
    """Per-scenario minADE_k/minFDE_k and their dataset means."""

    ks: tuple[int, ...]
    scenario_ids: tuple[str, ...]
    per_scenario_ade: Mapping[int, np.ndarray] = field(repr=False)
    per_scenario_fde: Mapping[int, np.ndarray] = field(repr=False)
    mean_ade: Mapping[int, float]
    mean_fde: Mapping[int, float]

    @property
    def count(self) -> int:
        return len(self.scenario_ids)


def aggregate(scores: Sequence[ScenarioScore], ks: Iterable[int]) -> MetricReport:
    """Arithmetic mean per k over scenario scores."""
    ks = tuple(sorted(set(int(k) for k in ks)))
    scores = list(scores)
    if not scores:
        raise ValueError("cannot aggregate an empty set of scenarios")
    for sc in scores:
        if sc is None:
            raise MissingGroundTruth("a scenario without ground truth cannot be aggregated")
        missing = [k for k in ks if k not in sc.min_ade]
        if missing:
            raise KeyError(f"scenario {sc.scenario_id!r} lacks k={missing}")
    ade_vals = {k: np.array([sc.min_ade[k] for sc in scores]) for k in ks}
    fde_vals = {k: np.array([sc.min_fde[k] for sc in scores]) for k in ks}
    return MetricReport(
        ks,
        tuple(sc.scenario_id for sc in scores),
        ade_vals,
        fde_vals,
        {k: float(np.mean(v)) for k, v in ade_vals.items()},
        {k: float(np.mean(v)) for k, v in fde_vals.items()},
    )
