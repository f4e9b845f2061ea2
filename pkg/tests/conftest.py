"""
Shared fixtures: tiny generator settings and run configs that train in a
few seconds.
"""

import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).resolve().parent.parent))

from config.settings import RunConfig, build_config  # noqa: E402
from dataset import gen_dataset  # noqa: E402
from dataset.models import Dataset, GenConfig, SceneInstance  # noqa: E402


TINY_GEN = {
    "num_scenes": 40,
    "objects_min": 3,
    "objects_max": 5,
    "num_object_classes": 4,
    "num_predicate_classes": 5,
    "relations_min": 1,
    "relations_max": 2,
    "visual_dim": 4,
    "seed": 3,
}


def tiny_config_data(output_dir: Path, **sections) -> dict:
    data = {
        "seed": 0,
        "output_dir": str(output_dir),
        "data": {"gen": dict(TINY_GEN)},
        "model": {"hidden_dim": 8},
        "scm": {"d_model": 8, "heads": 2, "layers": 1},
        "optim": {"total_iters": 6, "eval_interval": 3, "log_interval": 1, "batch_size": 2},
        "ablate": {"seeds": 1},
        "logging": {"to_file": False, "colorize": False},
    }
    for name, update in sections.items():
        if isinstance(update, dict):
            data[name] = {**data.get(name, {}), **update}
        else:
            data[name] = update
    return data


@pytest.fixture
def tiny_gen() -> GenConfig:
    return GenConfig(**TINY_GEN)


@pytest.fixture
def tiny_dataset(tiny_gen) -> Dataset:
    return gen_dataset(tiny_gen)


@pytest.fixture
def tiny_cfg(tmp_path) -> RunConfig:
    return build_config(tiny_config_data(tmp_path / "run"))


@pytest.fixture
def make_cfg(tmp_path):
    def factory(**sections) -> RunConfig:
        return build_config(tiny_config_data(tmp_path / "run", **sections))

    return factory


def make_scene(labels, relations, visual_dim: int = 4, seed: int = 0) -> SceneInstance:
    """Hand-built scene with random valid boxes."""
    rng = np.random.default_rng(seed)
    n = len(labels)
    corners = rng.uniform(0.05, 0.45, size=(n, 2))
    sizes = rng.uniform(0.1, 0.4, size=(n, 2))
    boxes = np.concatenate([corners, corners + sizes], axis=1)
    relations = np.asarray(relations, dtype=np.int64).reshape(-1, 3)
    return SceneInstance(
        boxes=boxes,
        visuals=rng.standard_normal((n, visual_dim)),
        labels=np.asarray(labels, dtype=np.int64),
        relations=relations,
    )
