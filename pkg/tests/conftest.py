"""
Shared fixtures: a small synthetic dataset and one short smoke training run,
both built once per session.
"""
import sys
from pathlib import Path

import numpy as np
import pytest

ROOT = Path(__file__).parent.parent
sys.path.insert(0, str(ROOT))

from src.config import GeneratorConfig, load_preset, resolve_train_config
from src.data.dataset import generate_dataset
from src.models.trainer import train

SMOKE_BATCHES = 6


@pytest.fixture
def rng():
    return np.random.default_rng(0)


@pytest.fixture(scope="session")
def dataset_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("dataset") / "data"
    generate_dataset(7, 20, out, GeneratorConfig(min_bases=250, max_bases=300))
    return out


@pytest.fixture(scope="session")
def small_dataset_dir(tmp_path_factory):
    """Short reads for workflows that only need references."""
    out = tmp_path_factory.mktemp("small") / "data"
    generate_dataset(3, 10, out, GeneratorConfig(min_bases=20, max_bases=40))
    return out


@pytest.fixture(scope="session")
def smoke_run(tmp_path_factory, dataset_dir):
    out = tmp_path_factory.mktemp("smoke")
    recipe = resolve_train_config("smoke", {"max_batches": SMOKE_BATCHES})
    result = train(load_preset("smoke"), dataset_dir, out, recipe)
    result["out_dir"] = out
    return result
