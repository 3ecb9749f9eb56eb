import numpy as np
import pytest


def smooth_texture(height, width, seed=42, passes=2, k=9):
    """Non-repeating smooth random texture for registration tests."""
    rng = np.random.default_rng(seed)
    field = rng.random((height, width))
    for _ in range(passes):
        field = np.cumsum(field, axis=0)
        field[k:] -= field[:-k].copy()
        field = np.cumsum(field, axis=1)
        field[:, k:] -= field[:, :-k].copy()
    field = (field - field.min()) / (field.max() - field.min())
    return (field * 255).astype(np.uint8)


@pytest.fixture
def texture():
    return smooth_texture
