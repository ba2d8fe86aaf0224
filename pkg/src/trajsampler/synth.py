"""Synthetic scenes and an emulated heterogeneous ensemble.

A scene draws a posterior over maneuvers, samples the true maneuver from it
and rolls a unicycle forward to get the ground truth. Each emulated model
sees that posterior through its own noise and temperature, keeps only the
maneuvers it covers, and spends its N proposal slots on maneuver variants
(speed quantiles) in order of score::

    score(maneuver i, variant j) = belief_i * decay**j

Every covered maneuver gets its first variant before any maneuver gets a
second one. Weights are the scores renormalized over the emitted slots, so
a confident model keeps large top weights as N grows while an uncertain
model's weights are diluted, and agreeing models stack near-duplicates at
the top of the pooled ranking.
"""
from __future__ import annotations

import enum
import hashlib
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .types import ModelPrediction, Scenario, build_mixture


class Maneuver(str, enum.Enum):
    STRAIGHT = "straight"
    LEFT_TURN = "left_turn"
    RIGHT_TURN = "right_turn"
    LANE_CHANGE_LEFT = "lane_change_left"
    LANE_CHANGE_RIGHT = "lane_change_right"
    BRAKE = "brake"


ALL_MANEUVERS = tuple(Maneuver)


@dataclass(frozen=True)
class WorldConfig:
    horizon: int = 12
    dt: float = 0.5
    maneuvers: tuple[Maneuver, ...] = ALL_MANEUVERS
    prior: tuple[float, ...] = (0.35, 0.15, 0.15, 0.1, 0.1, 0.15)
    speed_range: tuple[float, float] = (4.0, 12.0)
    # relative spread of the future speed around the observed one
    speed_sigma: float = 0.12
    # relative spread of turn / lane-change intensity
    intensity_sigma: float = 0.1
    gt_noise_sigma: float = 0.05
    # total Dirichlet concentration of the per-scene maneuver posterior
    context_concentration: float = 3.0

    def __post_init__(self):
        object.__setattr__(self, "maneuvers", tuple(Maneuver(m) for m in self.maneuvers))
        prior = np.asarray(self.prior, dtype=np.float64)
        if prior.shape != (len(self.maneuvers),) or np.any(prior < 0) or abs(prior.sum() - 1) > 1e-9:
            raise ValueError("prior must be a simplex over the maneuvers")
        if self.horizon < 2:
            raise ValueError("horizon must be >= 2")
        lo, hi = self.speed_range
        if not 0 <= lo <= hi:
            raise ValueError("speed_range must satisfy 0 <= lo <= hi")
        if min(self.speed_sigma, self.intensity_sigma, self.gt_noise_sigma) < 0:
            raise ValueError("sigmas must be >= 0")
        if self.context_concentration <= 0:
            raise ValueError("context_concentration must be > 0")


@dataclass(frozen=True)
class ModelEmulation:
    name: str
    coverage: float = 1.0
    bias: tuple[float, float] = (0.0, 0.0)  # meters at the final step, grows linearly
    noise_sigma: float = 0.1  # smooth positional noise, meters
    temperature: float = 1.0
    belief_noise: float = 0.3  # std of log-belief perturbation
    speed_error: float = 0.03  # relative error of the observed speed

    def __post_init__(self):
        if not 0 <= self.coverage <= 1:
            raise ValueError("coverage must lie in [0, 1]")
        if min(self.noise_sigma, self.belief_noise, self.speed_error) < 0:
            raise ValueError("sigmas must be >= 0")
        if self.temperature <= 0:
            raise ValueError("temperature must be > 0")


@dataclass(frozen=True)
class EnsembleEmulation:
    models: tuple[ModelEmulation, ...] = field(default_factory=lambda: DEFAULT_MODELS)
    proposals_per_model: int = 10
    variant_decay: float = 0.5
    # spacing of speed variants, in units of the world's speed_sigma
    variant_spacing: float = 1.0

    def __post_init__(self):
        if not self.models:
            raise ValueError("an ensemble needs at least one model")
        if self.proposals_per_model < 1:
            raise ValueError("proposals_per_model must be >= 1")
        if not 0 < self.variant_decay <= 1:
            raise ValueError("variant_decay must lie in (0, 1]")


DEFAULT_MODELS = (
    ModelEmulation("calibrated", coverage=1.0, bias=(0.0, 0.0), noise_sigma=0.15, temperature=1.0),
    ModelEmulation("overconfident", coverage=0.8, bias=(0.6, 0.3), noise_sigma=0.1, temperature=0.4),
    ModelEmulation("uncertain", coverage=0.95, bias=(-0.3, -0.4), noise_sigma=0.3, temperature=1.8),
)


def rollout(maneuver: Maneuver, speed: float, intensity: float, horizon: int, dt: float) -> np.ndarray:
    """Unicycle rollout from the origin heading along +x, ``(horizon, 2)``."""
    duration = horizon * dt
    x = y = heading = 0.0
    v = speed
    out = np.empty((horizon, 2))
    for t in range(horizon):
        time = t * dt
        yaw_rate = 0.0
        accel = 0.0
        if maneuver is Maneuver.LEFT_TURN or maneuver is Maneuver.RIGHT_TURN:
            # a quarter turn spread over the horizon, scaled by intensity
            sign = 1.0 if maneuver is Maneuver.LEFT_TURN else -1.0
            yaw_rate = sign * intensity * (np.pi / 2) / duration
        elif maneuver is Maneuver.LANE_CHANGE_LEFT or maneuver is Maneuver.LANE_CHANGE_RIGHT:
            sign = 1.0 if maneuver is Maneuver.LANE_CHANGE_LEFT else -1.0
            tau = 0.75 * duration
            if time < tau and v > 0:
                # heading profile theta_max*sin(pi t/tau) gives ~3.5 m lateral offset
                theta_max = intensity * 3.5 * np.pi / (2.0 * max(v, 1.0) * tau)
                yaw_rate = sign * theta_max * (np.pi / tau) * np.cos(np.pi * time / tau)
        elif maneuver is Maneuver.BRAKE:
            accel = -3.0 * intensity
        x += v * np.cos(heading) * dt
        y += v * np.sin(heading) * dt
        heading += yaw_rate * dt
        v = max(v + accel * dt, 0.0)
        out[t] = (x, y)
    return out


def _smooth_noise(rng: np.random.Generator, sigma: float, horizon: int) -> np.ndarray:
    if sigma == 0:
        return np.zeros((horizon, 2))
    steps = rng.normal(0.0, sigma / np.sqrt(horizon), size=(horizon, 2))
    return np.cumsum(steps, axis=0)


def _variant_offsets(n: int) -> np.ndarray:
    # 0, +1, -1, +2, -2, ...
    j = np.arange(n)
    return np.where(j % 2 == 1, (j + 1) // 2, -(j // 2)).astype(np.float64)


def allocate_slots(belief: np.ndarray, n_slots: int, decay: float) -> list[tuple[int, int, float]]:
    """Choose (maneuver, variant, score) slots in descending score order.

    Maneuvers with positive belief get their first variant before anything
    gets a second one.
    """
    covered = [i for i in np.argsort(-belief, kind="stable") if belief[i] > 0]
    slots = [(int(i), 0, float(belief[i])) for i in covered[:n_slots]]
    nxt = {i: 1 for i in covered}
    while len(slots) < n_slots:
        i = max(covered, key=lambda c: (belief[c] * decay ** nxt[c], -c))
        slots.append((int(i), nxt[i], float(belief[i] * decay ** nxt[i])))
        nxt[i] += 1
    return slots


def _emulate_model(rng, world: WorldConfig, model: ModelEmulation, ens: EnsembleEmulation,
                   posterior: np.ndarray, speed: float) -> ModelPrediction:
    n_man = len(world.maneuvers)
    logits = np.log(np.maximum(posterior, 1e-12)) + rng.normal(0.0, model.belief_noise, n_man)
    logits = logits / model.temperature
    covered = rng.random(n_man) < model.coverage
    covered[int(np.argmax(logits))] = True
    belief = np.where(covered, np.exp(logits - logits.max()), 0.0)
    belief /= belief.sum()

    slots = allocate_slots(belief, ens.proposals_per_model, ens.variant_decay)
    offsets = _variant_offsets(max(j for _, j, _ in slots) + 1)
    observed = speed * (1.0 + model.speed_error * rng.standard_normal())
    ramp = (np.arange(1, world.horizon + 1) / world.horizon)[:, None]
    bias = ramp * np.asarray(model.bias)
    trajs, scores = [], []
    for i, j, score in slots:
        v = max(observed * (1.0 + ens.variant_spacing * world.speed_sigma * offsets[j]), 0.0)
        traj = rollout(world.maneuvers[i], v, 1.0, world.horizon, world.dt)
        trajs.append(traj + bias + _smooth_noise(rng, model.noise_sigma, world.horizon))
        scores.append(score)
    scores = np.asarray(scores)
    return ModelPrediction(model.name, scores / scores.sum(), np.stack(trajs))


def generate_scenario(world: WorldConfig, ensemble: EnsembleEmulation, seed, scenario_id=None) -> Scenario:
    """One synthetic scene with ground truth; deterministic given ``seed``."""
    rng = np.random.default_rng(seed)
    prior = np.asarray(world.prior)
    posterior = rng.dirichlet(world.context_concentration * np.maximum(prior, 1e-9))
    true_i = int(rng.choice(len(world.maneuvers), p=posterior))
    speed = rng.uniform(*world.speed_range)
    true_speed = max(speed * (1.0 + world.speed_sigma * rng.standard_normal()), 0.0)
    intensity = 1.0 + world.intensity_sigma * rng.standard_normal()
    gt = rollout(world.maneuvers[true_i], true_speed, intensity, world.horizon, world.dt)
    if world.gt_noise_sigma > 0:
        gt = gt + rng.normal(0.0, world.gt_noise_sigma, size=gt.shape)
    models = [_emulate_model(rng, world, m, ensemble, posterior, speed) for m in ensemble.models]
    sid = scenario_id if scenario_id is not None else f"synth-{_seed_tag(seed)}"
    return Scenario(sid, build_mixture(models), gt)


def _seed_tag(seed) -> str:
    return hashlib.blake2b(repr(seed).encode(), digest_size=6).hexdigest()


def scenario_seed(master_seed: int, index: int) -> int:
    """Seed of scenario ``index``; depends only on (master_seed, index)."""
    return int(np.random.SeedSequence([int(master_seed), int(index)]).generate_state(1, np.uint64)[0])


def generate_dataset(world: WorldConfig, ensemble: EnsembleEmulation, count: int,
                     master_seed: int) -> list[Scenario]:
    if count < 1:
        raise ValueError("count must be >= 1")
    return [
        generate_scenario(world, ensemble, scenario_seed(master_seed, i), scenario_id=f"s{i:05d}")
        for i in range(count)
    ]


DEFAULT_MASTER_SEED = 20240917
DEFAULT_SCENARIOS = 500


def default_benchmark(count: int = DEFAULT_SCENARIOS, proposals_per_model: int = 10,
                      master_seed: int = DEFAULT_MASTER_SEED) -> list[Scenario]:
    """The shipped benchmark: 3 emulated models x 10 proposals, 500 scenes."""
    return generate_dataset(WorldConfig(), EnsembleEmulation(proposals_per_model=proposals_per_model),
                            count, master_seed)


def duplicate_rate(scenarios: Sequence[Scenario], top: int = 3, radius: float = 0.5) -> float:
    """Fraction of pairs among each scene's ``top`` highest-weight proposals
    that lie within ``radius`` ADE of each other."""
    from .baselines import weight_order
    from .kernels import distance_matrix

    close = total = 0
    for sc in scenarios:
        idx = weight_order(sc.mixture)[:top]
        d = distance_matrix(sc.mixture.points[idx], sc.mixture.points[idx])
        iu = np.triu_indices(len(idx), 1)
        close += int(np.sum(d[iu] < radius))
        total += len(iu[0])
    return close / total if total else 0.0
