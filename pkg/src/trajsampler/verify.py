"""Oracle checks of the optimizer on small scenarios.

Three independent references: central finite differences for the
subgradient, Weiszfeld's geometric median for k = S = 1, and exhaustive
subset search for the discrete optimum.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Optional, Sequence

import numpy as np

from . import kernels, oracles
from .optimizer import LossSpec, OptimizerConfig, optimize, risk, risk_subgradient
from .types import ProposalMixture, Scenario

GRAD_RTOL = 1e-4
ARGMIN_MARGIN = 1e-3
OBJECTIVE_TOL = 1e-6
MEDIAN_ADE_TOL = 1e-3


@dataclass(frozen=True)
class CheckResult:
    check: str
    scenario_id: str
    passed: bool
    value: float
    limit: float
    detail: str = ""


def argmin_margin(mixture: ProposalMixture, cands: np.ndarray, loss: LossSpec) -> float:
    """Smallest gap between the best and second-best candidate over proposals."""
    if loss.k < 2:
        return np.inf
    d = kernels.distance_matrix(mixture.points, cands[: loss.k], loss.final_only)
    part = np.sort(d, axis=1)
    return float(np.min(part[:, 1] - part[:, 0]))


def strict_candidates(mixture: ProposalMixture, S: int, loss: LossSpec, rng: np.random.Generator,
                      spread: float = 1.0, tries: int = 200) -> Optional[np.ndarray]:
    """Random candidates around the proposals whose argmins are all strict.

    Candidates also keep every coordinate more than the margin away from
    every proposal point so no norm sits on its kink.
    """
    P = mixture.num_proposals
    for _ in range(tries):
        idx = rng.choice(P, size=S, replace=S > P)
        cands = mixture.points[idx] + rng.normal(0.0, spread, size=(S,) + mixture.points.shape[1:])
        if argmin_margin(mixture, cands, loss) <= ARGMIN_MARGIN:
            continue
        gap = np.linalg.norm(cands[:, None] - mixture.points[None], axis=-1)
        if gap.min() <= ARGMIN_MARGIN:
            continue
        return cands
    return None


def gradient_error(mixture: ProposalMixture, cands: np.ndarray, loss: LossSpec, h: float = 1e-5) -> float:
    """Largest coordinate error of the analytic subgradient against central
    differences, relative to the largest finite-difference magnitude."""
    analytic = risk_subgradient(mixture, cands, loss)
    numeric = oracles.finite_difference_gradient(mixture, cands, loss, h)
    scale = max(float(np.max(np.abs(numeric))), 1e-12)
    return float(np.max(np.abs(analytic - numeric)) / scale)


def check_gradient(sc: Scenario, S: int, rng: np.random.Generator) -> CheckResult:
    loss = LossSpec("minade", S)
    cands = strict_candidates(sc.mixture, S, loss, rng)
    if cands is None:
        return CheckResult("gradient", sc.scenario_id, False, np.inf, GRAD_RTOL, "no strict-argmin instance found")
    err = gradient_error(sc.mixture, cands, loss)
    return CheckResult("gradient", sc.scenario_id, err <= GRAD_RTOL, err, GRAD_RTOL)


def median_is_unique(points: np.ndarray, weights: np.ndarray, tol: float = 1e-12) -> bool:
    """False when the weighted geometric median is a segment: all points
    collinear and some split along the line carries exactly half the weight."""
    keep = weights > 0
    pts, w = points[keep], weights[keep] / weights[keep].sum()
    if len(pts) < 2:
        return True
    centered = pts - pts[0]
    if np.linalg.matrix_rank(centered, tol=1e-9) > 1:
        return True
    direction = centered[np.argmax(np.linalg.norm(centered, axis=1))]
    direction = direction / np.linalg.norm(direction)
    proj = centered @ direction
    order = np.argsort(proj, kind="stable")
    proj, w = proj[order], w[order]
    cum = np.cumsum(w)
    for i in range(len(pts) - 1):
        if abs(cum[i] - 0.5) <= tol and proj[i + 1] - proj[i] > 1e-9:
            return False
    return True


def check_median(sc: Scenario, config: OptimizerConfig) -> list[CheckResult]:
    mix = sc.mixture
    loss = LossSpec("minade", 1)
    cands, _ = optimize(mix, 1, loss, config)
    ours = cands.trajectories[0]
    med = oracles.geometric_median_oracle(mix)
    T = mix.horizon
    ref_obj = sum(oracles.median_objective(mix.points[:, t], mix.weights, med[t]) for t in range(T)) / T
    our_obj = risk(mix, cands, loss)
    gap = our_obj - ref_obj
    out = [CheckResult("median_objective", sc.scenario_id, gap <= OBJECTIVE_TOL, gap, OBJECTIVE_TOL)]
    unique = all(median_is_unique(mix.points[:, t], mix.weights) for t in range(T))
    if unique:
        ade = float(np.mean(np.linalg.norm(ours - med, axis=-1)))
        out.append(CheckResult("median_position", sc.scenario_id, ade <= MEDIAN_ADE_TOL, ade, MEDIAN_ADE_TOL))
    return out


def check_dominance(sc: Scenario, S: int, config: OptimizerConfig) -> CheckResult:
    loss = LossSpec("minade", S)
    _, best = oracles.brute_force_subset_oracle(sc.mixture, S, loss)
    cands, _ = optimize(sc.mixture, S, loss, config)
    gap = risk(sc.mixture, cands, loss) - best
    return CheckResult("subset_dominance", sc.scenario_id, gap <= OBJECTIVE_TOL, gap, OBJECTIVE_TOL)


def run_oracle_suite(scenarios: Sequence[Scenario], seed: int = 0, S: int = 3,
                     config: Optional[OptimizerConfig] = None) -> list[CheckResult]:
    """Gradient, geometric-median and subset-dominance checks per scenario."""
    rng = np.random.default_rng(seed)
    results = []
    for i, sc in enumerate(scenarios):
        cfg = config or OptimizerConfig.thorough(seed=seed + i)
        s = min(S, sc.mixture.num_proposals)
        results.append(check_gradient(sc, s, rng))
        results.extend(check_median(sc, cfg))
        if sc.mixture.num_proposals <= oracles.MAX_ORACLE_PROPOSALS:
            results.append(check_dominance(sc, s, cfg))
    return results


def report(results: Sequence[CheckResult]) -> dict:
    rows = [asdict(r) for r in results]
    for r in rows:
        r["value"] = float(r["value"])
    return {
        "passed": all(r.passed for r in results),
        "checks": len(results),
        "failures": sum(not r.passed for r in results),
        "results": rows,
    }
