import numpy as np
import pytest
import torch


@pytest.fixture(autouse=True)
def _fixed_seeds():
    np.random.seed(0)
    torch.manual_seed(0)


def rng(seed: int = 0) -> np.random.Generator:
    return np.random.default_rng(seed)
