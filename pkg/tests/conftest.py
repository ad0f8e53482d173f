"""Shared fixtures: seeded generators and small networks that train in milliseconds."""

import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..'))

from omad.trainer.config import TrainerConfig  # noqa: E402


def _numeric_grad(f, param, eps=1e-5):
    """Central finite differences of the scalar ``f()`` with respect to ``param.data``."""
    grad = np.zeros_like(param.data)
    for idx in np.ndindex(param.data.shape):
        original = param.data[idx]
        param.data[idx] = original + eps
        plus = f().item()
        param.data[idx] = original - eps
        minus = f().item()
        param.data[idx] = original
        grad[idx] = (plus - minus) / (2.0 * eps)
    return grad


def _relative_error(analytic, numeric):
    scale = max(np.linalg.norm(analytic) + np.linalg.norm(numeric), 1e-12)
    return np.linalg.norm(analytic - numeric) / scale


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def tiny_config():
    return TrainerConfig(
        warmup_steps=0,
        learning_starts=0,
        buffer_size=500,
        batch_size=8,
        denoise_steps=2,
        actor_hidden=(8,),
        critic_hidden=(8,),
        time_embedding_dim=4,
        n_atoms=11,
        v_max=10.0,
        learning_rate=1e-3,
        bn_warmup_steps=10,
    )


@pytest.fixture
def numeric_grad():
    return _numeric_grad


@pytest.fixture
def relative_error():
    return _relative_error
