from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from trajsampler import oracles
from trajsampler.errors import HorizonMismatch, KExceedsSetSize
from trajsampler.optimizer import (AdamState, LossSpec, OptimizerConfig, adam_update, learning_rates, optimize,
                                   random_init, rank_by_contribution, risk, risk_subgradient)
from trajsampler.types import CandidateSet, ModelPrediction, build_mixture

from conftest import make_mixture, mixture_from

ADE1 = LossSpec("minade", 1)


def line(T, y=0.0):
    return np.column_stack([np.arange(T, dtype=float), np.full(T, y)])


def test_risk_examples():
    rng = np.random.default_rng(0)
    mix = make_mixture(rng, M=2, N=3)
    assert risk(mix, mix.points, LossSpec("minade", 6)) == 0.0
    one = mixture_from([[1.0]], [[line(4)]])
    assert risk(one, [line(4, 2.0)], ADE1) == 2.0
    two = mixture_from([[1.0], [1.0]], [[line(4, 1.0)], [line(4, -3.0)]])
    assert risk(two, [line(4, 0.0)], ADE1) == 2.0


def test_risk_errors():
    mix = mixture_from([[1.0]], [[line(4)]])
    with pytest.raises(KExceedsSetSize):
        risk(mix, [line(4)], LossSpec("minade", 2))
    with pytest.raises(HorizonMismatch):
        risk(mix, [line(5)], ADE1)


def test_subgradient_examples():
    T = 5
    mix = mixture_from([[1.0]], [[line(T)]])
    assert np.all(risk_subgradient(mix, [line(T)], ADE1) == 0.0)
    cand = line(T) + [1.0, 0.0]
    g = risk_subgradient(mix, [cand], ADE1)
    assert np.allclose(g, np.tile([1.0 / T, 0.0], (T, 1)), rtol=0, atol=1e-15)
    fd = oracles.finite_difference_gradient(mix, [cand], ADE1)
    assert np.max(np.abs(g - fd)) <= 1e-4 * np.max(np.abs(fd))
    g2 = risk_subgradient(mix, [cand, cand + 5.0], ADE1)
    assert np.all(g2[1] == 0.0)


def test_minfde_subgradient_final_step_only():
    T = 4
    mix = mixture_from([[1.0]], [[line(T)]])
    g = risk_subgradient(mix, [line(T) + [0.0, 2.0]], LossSpec("minfde", 1))
    assert np.all(g[0, :-1] == 0.0)
    assert np.allclose(g[0, -1], [0.0, 1.0])


def test_adam_examples():
    cfg = OptimizerConfig()
    s = AdamState.fresh(np.array([1.0, -2.0]))
    assert np.array_equal(adam_update(s, [0.0, 0.0], cfg).params, s.params)
    step = adam_update(s, [3.0, -0.5], cfg).params - s.params
    assert np.allclose(step, [-0.1, 0.1], rtol=1e-6)
    sym = adam_update(AdamState.fresh([0.0, 0.0]), [0.7, -0.7], cfg).params
    assert sym[0] == -sym[1]
    with pytest.raises(ValueError):
        adam_update(s, [1.0], cfg)


def test_random_init_examples():
    rng = np.random.default_rng(1)
    mix = make_mixture(rng, M=2, N=3)
    cfg = OptimizerConfig(jitter_sigma=0.0)
    full = random_init(mix, 6, cfg).trajectories
    assert sorted(map(bytes, full)) == sorted(map(bytes, np.ascontiguousarray(mix.points)))
    assert random_init(mix, 4, OptimizerConfig(seed=9)) == random_init(mix, 4, OptimizerConfig(seed=9))
    one = mixture_from([[1.0]], [[line(3)]])
    assert np.array_equal(random_init(one, 1, cfg).trajectories[0], line(3))
    assert random_init(mix, 9, cfg).size == 9  # with replacement beyond MN


@pytest.mark.parametrize("init", ["uniform", "gaussian"])
def test_other_inits(init):
    mix = make_mixture(np.random.default_rng(2))
    out = random_init(mix, 4, OptimizerConfig(init=init))
    assert out.trajectories.shape == (4,) + mix.points.shape[1:]


def test_single_proposal_converges():
    y = np.random.default_rng(5).normal(0, 4, size=(12, 2)).cumsum(axis=0)
    mix = mixture_from([[1.0]], [[y]])
    out, trace = optimize(mix, 1, ADE1, OptimizerConfig())
    assert np.mean(np.linalg.norm(out.trajectories[0] - y, axis=-1)) <= 1e-3
    assert trace.best_risk <= trace.initial_risk


def test_runs_exact_step_count_and_keeps_best():
    mix = make_mixture(np.random.default_rng(6), M=3, N=4)
    cfg = OptimizerConfig(steps=50)
    out, trace = optimize(mix, 3, None, cfg)
    assert trace.risks.shape == (51,)
    assert trace.best_risk == trace.risks.min() <= trace.initial_risk
    assert risk(mix, out, LossSpec("minade", 3)) == pytest.approx(trace.best_risk, abs=1e-12)
    last, tr2 = optimize(mix, 3, None, replace(cfg, keep_best_iterate=False))
    assert risk(mix, last, LossSpec("minade", 3)) == pytest.approx(tr2.final_risk, abs=1e-12)


def test_deterministic():
    mix = make_mixture(np.random.default_rng(7), M=3, N=5)
    a, ta = optimize(mix, 4, None, OptimizerConfig(seed=3, restarts=2))
    b, tb = optimize(mix, 4, None, OptimizerConfig(seed=3, restarts=2))
    assert a == b and np.array_equal(ta.risks, tb.risks)


def test_restarts_never_worse_than_first_run():
    mix = make_mixture(np.random.default_rng(8), M=3, N=5)
    _, one = optimize(mix, 4, None, OptimizerConfig(seed=1))
    _, many = optimize(mix, 4, None, OptimizerConfig(seed=1, restarts=4))
    assert many.best_risk <= one.best_risk


def test_early_stop_option():
    mix = make_mixture(np.random.default_rng(9))
    _, trace = optimize(mix, 2, None, OptimizerConfig(steps=2000, schedule="constant", stop_tol=1e-7))
    assert len(trace.risks) < 2001


def test_learning_rate_schedule():
    lrs, resets = learning_rates(OptimizerConfig(steps=100))
    hold = int(0.3 * 100)
    assert np.all(lrs[:hold + 1] == 0.1)
    assert lrs[-1] == pytest.approx(0.1 * 1e-6)
    assert np.all(np.diff(lrs) <= 0) and resets.sum() == 6 and not resets[:hold].any()
    c, r = learning_rates(OptimizerConfig(steps=10, schedule="constant"))
    assert np.all(c == 0.1) and not r.any()


def test_ranking_by_drop_one_increase():
    T = 3
    # candidate 1 carries most of the mass, candidate 2 is useless
    mix = mixture_from([[0.7, 0.3]], [[line(T, 0.0), line(T, 10.0)]])
    cands = np.stack([line(T, 10.0), line(T, 0.0), line(T, 50.0)])
    order = rank_by_contribution(mix, cands, LossSpec("minade", 3))
    assert order.tolist() == [1, 0, 2]
    out = rank_by_contribution(mix, cands, LossSpec("minade", 2))
    assert out.tolist() == [1, 0, 2]


def test_config_validation():
    for bad in [dict(learning_rate=0), dict(beta1=1.0), dict(steps=-1), dict(restarts=0), dict(init="nope")]:
        with pytest.raises(ValueError):
            OptimizerConfig(**bad)


@given(st.integers(0, 1000), st.permutations(range(4)))
def test_risk_permutation_invariant(seed, perm):
    mix = make_mixture(np.random.default_rng(seed))
    cands = np.random.default_rng(seed + 1).normal(0, 3, size=(4, 6, 2)).cumsum(axis=1)
    loss = LossSpec("minade", 4)
    assert risk(mix, cands[list(perm)], loss) == pytest.approx(risk(mix, cands, loss), rel=1e-12)
    g = risk_subgradient(mix, cands, loss)
    gp = risk_subgradient(mix, cands[list(perm)], loss)
    assert np.allclose(gp, g[list(perm)], atol=1e-14)


@given(st.integers(0, 1000))
def test_risk_invariant_to_regrouping(seed):
    rng = np.random.default_rng(seed)
    mix = make_mixture(rng, M=2, N=3)
    cands = rng.normal(0, 3, size=(2, 6, 2)).cumsum(axis=1)
    loss = LossSpec("minade", 2)
    # same weighted points as a single model, shuffled
    perm = rng.permutation(mix.num_proposals)
    pooled = build_mixture([ModelPrediction("all", mix.weights[perm], mix.points[perm])])
    assert risk(pooled, cands, loss) == pytest.approx(risk(mix, cands, loss), rel=1e-12)


@given(st.integers(0, 1000), st.sampled_from([(8.0, -4.0), (-16.0, 32.0), (0.5, 0.25)]))
def test_translation_equivariance(seed, shift):
    rng = np.random.default_rng(seed)
    mix = make_mixture(rng, M=2, N=3)
    shift = np.asarray(shift)
    moved = build_mixture(ModelPrediction(m.model_id, m.weights, m.trajectories + shift) for m in mix.models)
    init = random_init(mix, 2, OptimizerConfig(seed=seed))
    cfg = OptimizerConfig(steps=128)
    a, ta = optimize(mix, 2, None, cfg, init=init)
    b, tb = optimize(moved, 2, None, cfg, init=CandidateSet(init.trajectories + shift))
    assert tb.best_risk == pytest.approx(ta.best_risk, abs=1e-6)
    assert np.allclose(b.trajectories - shift, a.trajectories, atol=1e-4)
