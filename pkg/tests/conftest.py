import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from trajsampler.types import ModelPrediction, Scenario, build_mixture

settings.register_profile("default", max_examples=60, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def make_mixture(rng, M=2, N=3, T=6, scale=3.0, weights=None):
    models = []
    for m in range(M):
        w = rng.random(N) + 0.05 if weights is None else np.asarray(weights[m], dtype=float)
        y = rng.normal(0.0, scale, size=(N, T, 2)).cumsum(axis=1)
        models.append(ModelPrediction(f"m{m}", w, y))
    return build_mixture(models)


def mixture_from(weights_per_model, trajs_per_model):
    return build_mixture(
        ModelPrediction(f"m{i}", np.asarray(w, float), np.asarray(y, float))
        for i, (w, y) in enumerate(zip(weights_per_model, trajs_per_model))
    )


def scenario(mixture, gt=None, sid="s0"):
    return Scenario(sid, mixture, gt)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
