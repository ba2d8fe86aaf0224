import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from trajsampler import oracles
from trajsampler.errors import TooManyProposals
from trajsampler.optimizer import LossSpec, risk, risk_subgradient
from trajsampler.types import ModelPrediction, build_mixture
from trajsampler.verify import median_is_unique

from conftest import make_mixture


@given(st.integers(0, 10_000), st.integers(2, 9))
def test_weiszfeld_beats_every_data_point(seed, n):
    rng = np.random.default_rng(seed)
    pts = rng.normal(0, 5, size=(n, 2))
    w = rng.random(n) + 0.01
    med = oracles.weiszfeld(pts, w)
    best = oracles.median_objective(pts, w, med)
    assert all(best <= oracles.median_objective(pts, w, p) + 1e-9 for p in pts)


def test_weiszfeld_known_cases():
    # dominant weight pins the median to that point
    pts = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    assert np.allclose(oracles.weiszfeld(pts, [5.0, 1.0, 1.0]), [0.0, 0.0])
    # equilateral triangle with equal weights: the centroid
    tri = np.array([[0.0, 0.0], [2.0, 0.0], [1.0, np.sqrt(3.0)]])
    assert np.allclose(oracles.weiszfeld(tri, [1, 1, 1]), tri.mean(axis=0), atol=1e-8)
    assert np.allclose(oracles.weiszfeld([[3.0, 4.0]], [1.0]), [3.0, 4.0])


def test_median_oracle_is_optimal_per_timestep():
    mix = make_mixture(np.random.default_rng(4), M=3, N=3)
    med = oracles.geometric_median_oracle(mix)
    r = risk(mix, med[None], LossSpec("minade", 1))
    for p in mix.points:
        assert r <= risk(mix, p[None], LossSpec("minade", 1)) + 1e-9


def test_brute_force_small_case():
    T = 2
    base = np.column_stack([np.arange(T, dtype=float), np.zeros(T)])
    pts = np.stack([base, base + [0, 1.0], base + [0, 10.0]])
    mix = build_mixture([ModelPrediction("m", [0.4, 0.4, 0.2], pts)])
    idx, best = oracles.brute_force_subset_oracle(mix, 2, LossSpec("minade", 2))
    assert sorted(idx.tolist()) in ([0, 2], [1, 2])
    assert best == pytest.approx(0.4)
    assert oracles.subset_count(8, 3) == 56


def test_brute_force_guard():
    mix = make_mixture(np.random.default_rng(0), M=1, N=17)
    with pytest.raises(TooManyProposals):
        oracles.brute_force_subset_oracle(mix, 2, LossSpec("minade", 2))


def test_finite_difference_examples():
    mix = make_mixture(np.random.default_rng(1), M=1, N=1)
    fd = oracles.finite_difference_gradient(mix, mix.points, LossSpec("minade", 1))
    # zero risk at the proposal: central differences of |x| vanish
    assert np.allclose(fd, 0.0, atol=1e-9)
    with pytest.raises(ValueError):
        oracles.finite_difference_gradient(mix, mix.points, LossSpec("minade", 1), h=0)


def test_doubling_weights_doubles_both_oracles():
    rng = np.random.default_rng(2)
    pts = rng.normal(0, 3, size=(5, 4, 2))
    w = rng.random(5)
    cands = rng.normal(0, 3, size=(2, 4, 2))
    r1 = oracles.direct_risk(pts, w, cands, 2)
    r2 = oracles.direct_risk(pts, 2 * w, cands, 2)
    assert r2 == pytest.approx(2 * r1, rel=1e-12)

    class Raw:  # the finite-difference oracle only needs points and weights
        def __init__(self, weights):
            self.points, self.weights = pts, weights

    g1 = oracles.finite_difference_gradient(Raw(w), cands, LossSpec("minade", 2))
    g2 = oracles.finite_difference_gradient(Raw(2 * w), cands, LossSpec("minade", 2))
    assert np.allclose(g2, 2 * g1, rtol=1e-6, atol=1e-9)


def test_direct_risk_matches_kernel():
    mix = make_mixture(np.random.default_rng(3), M=2, N=4)
    cands = np.random.default_rng(4).normal(0, 3, size=(3, 6, 2)).cumsum(axis=1)
    for kind in ("minade", "minfde"):
        loss = LossSpec(kind, 3)
        assert risk(mix, cands, loss) == pytest.approx(
            oracles.direct_risk(mix.points, mix.weights, cands, 3, loss.final_only), rel=1e-12)


def test_zero_risk_near_zero_gradient():
    mix = make_mixture(np.random.default_rng(5), M=1, N=2)
    g = risk_subgradient(mix, mix.points, LossSpec("minade", 2))
    assert np.all(g == 0.0)


def test_median_uniqueness_rule():
    assert not median_is_unique(np.array([[0.0, 0.0], [1.0, 0.0]]), np.array([1.0, 1.0]))
    assert median_is_unique(np.array([[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]]), np.ones(3))
    assert median_is_unique(np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]), np.ones(3))
    assert not median_is_unique(np.array([[0.0, 0.0], [1.0, 1.0], [2.0, 2.0], [3.0, 3.0]]), np.ones(4))
