import json
import os

import pytest

from hot_tuner.config import RunConfig

REFERENCE_PATH = os.path.join(os.path.dirname(__file__), "..", "configs",
                              "reference.json")


def reference_dict(**overrides):
    with open(REFERENCE_PATH, "r", encoding="utf-8") as fh:
        d = json.load(fh)
    d.update(overrides)
    return d


@pytest.fixture
def reference_config():
    return RunConfig.from_dict(reference_dict())


@pytest.fixture
def small_config():
    """Reference config shrunk for fast unit tests."""
    return RunConfig.from_dict(reference_dict(horizon=200, ensemble=8,
                                              resamples=500))


@pytest.fixture
def zero_noise_config():
    d = reference_dict(horizon=200, ensemble=4, resamples=500,
                       noise={"kind": "zero"}, d_max=0.0, sigma_max=0.0)
    return RunConfig.from_dict(d)
