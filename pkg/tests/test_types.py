import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from trajsampler.errors import AllZeroWeights, EmptyEnsemble, InconsistentHorizon
from trajsampler.types import (CandidateSet, ModelPrediction, Scenario, WeightedProposal,
                               as_trajectory, build_mixture, normalize_model_weights)

from conftest import make_mixture


def pred(weights, T=3, model_id="a"):
    n = len(weights)
    return ModelPrediction(model_id, np.array(weights, float), np.zeros((n, T, 2)))


@pytest.mark.parametrize("raw, expected", [([2, 2], [0.5, 0.5]), ([1, 3], [0.25, 0.75])])
def test_normalize_examples(raw, expected):
    assert normalize_model_weights(pred(raw)).weights.tolist() == expected


def test_normalize_all_zero():
    with pytest.raises(AllZeroWeights):
        normalize_model_weights(pred([0, 0]))


def test_normalize_leaves_input_and_sets_flag():
    p = pred([1, 3])
    out = normalize_model_weights(p)
    assert p.weights.tolist() == [1, 3]
    assert out.renormalized and not p.renormalized
    assert not normalize_model_weights(pred([0.25, 0.75])).renormalized


def test_build_examples():
    assert build_mixture([pred([0.5, 0.5])]).weights.tolist() == [0.5, 0.5]
    two = build_mixture([pred([1.0], model_id="a"), pred([1.0], model_id="b")])
    assert two.weights.tolist() == [0.5, 0.5]
    rng = np.random.default_rng(0)
    mix = make_mixture(rng, M=3, N=10)
    assert mix.weights.shape == (30,)
    assert abs(mix.weights.sum() - 1.0) <= 1e-9


def test_build_errors():
    with pytest.raises(EmptyEnsemble):
        build_mixture([])
    with pytest.raises(InconsistentHorizon):
        build_mixture([pred([1.0], T=3), pred([1.0], T=4)])


def test_zero_weight_rows_kept():
    mix = build_mixture([pred([0.0, 1.0, 0.0])])
    assert mix.num_proposals == 3
    assert mix.weights.tolist() == [0.0, 1.0, 0.0]
    assert mix.proposal_index.tolist() == [0, 1, 2]


def test_arrays_read_only():
    mix = build_mixture([pred([1.0, 2.0])])
    with pytest.raises(ValueError):
        mix.points[0, 0, 0] = 1.0
    with pytest.raises(ValueError):
        mix.weights[0] = 1.0


def test_trajectory_validation():
    with pytest.raises(ValueError):
        as_trajectory([[0.0, np.nan]])
    with pytest.raises(ValueError):
        as_trajectory([[0.0, 1.0, 2.0]])
    with pytest.raises(ValueError):
        WeightedProposal(-1.0, [[0.0, 0.0]])
    with pytest.raises(ValueError):
        WeightedProposal(np.inf, [[0.0, 0.0]])


def test_scenario_horizon_check():
    mix = build_mixture([pred([1.0], T=3)])
    with pytest.raises(InconsistentHorizon):
        Scenario("x", mix, np.zeros((4, 2)))


def test_from_proposals_roundtrip():
    props = [WeightedProposal(0.2, np.ones((3, 2))), WeightedProposal(0.8, np.zeros((3, 2)))]
    p = ModelPrediction.from_proposals("m", props)
    assert p.proposals[1].weight == 0.8
    with pytest.raises(InconsistentHorizon):
        ModelPrediction.from_proposals("m", [WeightedProposal(1, np.ones((3, 2))),
                                             WeightedProposal(1, np.ones((2, 2)))])


def test_candidate_set_from_indices():
    mix = make_mixture(np.random.default_rng(0))
    cs = CandidateSet.from_indices(mix, [2, 0])
    assert np.array_equal(cs.trajectories, mix.points[[2, 0]])
    assert cs.source_indices.tolist() == [2, 0]


weight_lists = st.lists(st.floats(0.0, 100.0, allow_nan=False), min_size=1, max_size=6).filter(
    lambda w: sum(w) > 1e-3)


@given(st.lists(weight_lists, min_size=1, max_size=4))
def test_total_mass_is_one(ws):
    mix = build_mixture(pred(w, model_id=str(i)) for i, w in enumerate(ws))
    assert abs(mix.weights.sum() - 1.0) <= 1e-9
    for m, w in enumerate(ws):
        got = mix.weights[mix.model_index == m] * len(ws)
        assert np.allclose(got, np.array(w) / sum(w), atol=1e-12)


@given(st.lists(weight_lists, min_size=1, max_size=4))
def test_normalize_then_build_commutes(ws):
    raw = [pred(w, model_id=str(i)) for i, w in enumerate(ws)]
    a = build_mixture(raw)
    b = build_mixture(normalize_model_weights(p) for p in raw)
    assert np.allclose(a.weights, b.weights, atol=1e-12, rtol=0)


def test_build_is_pure():
    rng = np.random.default_rng(3)
    mix = make_mixture(rng)
    again = build_mixture(mix.models)
    assert again == mix and np.array_equal(again.weights, mix.weights)
