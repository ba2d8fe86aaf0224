import numpy as np
import pytest

from trajsampler import synth
from trajsampler.baselines import sample_topk
from trajsampler.metrics import min_ade_k


def test_perfect_ensemble_contains_ground_truth():
    world = synth.WorldConfig(speed_sigma=0.0, intensity_sigma=0.0, gt_noise_sigma=0.0)
    model = synth.ModelEmulation("perfect", coverage=1.0, noise_sigma=0.0, speed_error=0.0)
    ens = synth.EnsembleEmulation(models=(model,), proposals_per_model=len(world.maneuvers))
    for seed in range(20):
        sc = synth.generate_scenario(world, ens, seed)
        assert min_ade_k(sc.ground_truth, sc.mixture.points, sc.mixture.num_proposals) == 0.0


def test_same_seed_same_scenario():
    world, ens = synth.WorldConfig(), synth.EnsembleEmulation()
    assert synth.generate_scenario(world, ens, 11) == synth.generate_scenario(world, ens, 11)


def test_three_models_on_simplex():
    sc = synth.generate_scenario(synth.WorldConfig(), synth.EnsembleEmulation(proposals_per_model=7), 3)
    assert sc.mixture.num_proposals == 21 and sc.mixture.num_models == 3
    for m in sc.mixture.models:
        assert m.weights.shape == (7,) and abs(m.weights.sum() - 1) <= 1e-9
    assert len({m.model_id for m in sc.mixture.models}) == 3


def test_dataset_seeding():
    world, ens = synth.WorldConfig(), synth.EnsembleEmulation()
    one = synth.generate_dataset(world, ens, 1, 5)
    direct = synth.generate_scenario(world, ens, synth.scenario_seed(5, 0), scenario_id="s00000")
    assert one[0] == direct
    assert synth.generate_dataset(world, ens, 4, 5) == synth.generate_dataset(world, ens, 4, 5)
    other = synth.generate_dataset(world, ens, 4, 6)
    assert all(a != b for a, b in zip(synth.generate_dataset(world, ens, 4, 5), other))
    with pytest.raises(ValueError):
        synth.generate_dataset(world, ens, 0, 5)


def test_ground_truth_continuity():
    world = synth.WorldConfig()
    vmax = world.speed_range[1] * (1 + 4 * world.speed_sigma)
    for sc in synth.default_benchmark(count=100):
        gt = np.vstack([[0.0, 0.0], sc.ground_truth])
        steps = np.linalg.norm(np.diff(gt, axis=0), axis=1)
        assert np.all(steps <= vmax * world.dt + 4 * world.gt_noise_sigma * 2)


def test_agreeing_models_make_topk_redundant():
    world = synth.WorldConfig()
    models = tuple(synth.ModelEmulation(f"m{i}", coverage=1.0, noise_sigma=0.02, belief_noise=0.05,
                                        speed_error=0.005) for i in range(3))
    ens = synth.EnsembleEmulation(models=models)
    data = synth.generate_dataset(world, ens, 200, 1)
    assert synth.duplicate_rate(data, top=3, radius=0.5) > 0.5


def test_overconfident_model_dominates_topk():
    data = synth.default_benchmark(count=200)
    names = [m.name for m in synth.DEFAULT_MODELS]
    top1 = np.zeros(3)
    top5 = np.zeros(3)
    for sc in data:
        top1 += np.bincount(sc.mixture.model_index[sample_topk(sc.mixture, 1).source_indices], minlength=3)
        top5 += np.bincount(sc.mixture.model_index[sample_topk(sc.mixture, 5).source_indices], minlength=3)
    assert top1[names.index("overconfident")] / top1.sum() > 0.5
    assert names[int(np.argmax(top5))] == "overconfident"


def test_config_validation():
    with pytest.raises(ValueError):
        synth.WorldConfig(prior=(1.0,))
    with pytest.raises(ValueError):
        synth.WorldConfig(horizon=1)
    with pytest.raises(ValueError):
        synth.ModelEmulation("x", coverage=1.5)
    with pytest.raises(ValueError):
        synth.EnsembleEmulation(proposals_per_model=0)


def test_slot_allocation_covers_maneuvers_first():
    slots = synth.allocate_slots(np.array([0.7, 0.2, 0.1, 0.0]), 5, 0.5)
    assert [s[:2] for s in slots[:3]] == [(0, 0), (1, 0), (2, 0)]
    assert all(i != 3 for i, _, _ in slots)
    assert slots[3][:2] == (0, 1)
