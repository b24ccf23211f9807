import numpy as np
import pytest

from iforest_dpg.cli import _run_explain
from iforest_dpg.forest import Contamination, Dataset, ForestParams, fit
from iforest_dpg.synth import DEFAULT_FIXTURE_SEED, fixture_one


@pytest.fixture
def small_data() -> Dataset:
    """40 x 3 Gaussian cluster with one far-out sample at index 0."""
    rng = np.random.default_rng(42)
    X = rng.standard_normal((40, 3))
    X[0] = (6.0, -6.0, 6.0)
    return Dataset(features=X, feature_names=["F0", "F1", "F2"])


@pytest.fixture
def small_model(small_data) -> tuple:
    params = ForestParams(n_trees=25, seed=11, label_rule=Contamination(0.05))
    return small_data, fit(small_data, params)


@pytest.fixture(scope="session")
def fixture_one_run():
    """Full pipeline on reference dataset one at the default seed."""
    data, log = fixture_one(seed=DEFAULT_FIXTURE_SEED)
    params = ForestParams(
        n_trees=200, seed=DEFAULT_FIXTURE_SEED, label_rule=Contamination(1 / 200)
    )
    model, graph, report = _run_explain(data, params)
    return data, log, model, graph, report
