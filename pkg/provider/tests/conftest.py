import numpy as np
import pytest
from PIL import Image


@pytest.fixture(scope="session")
def image_dir(tmp_path_factory):
    """Ten distinct small RGB images."""
    root = tmp_path_factory.mktemp("images")
    for i in range(10):
        rng = np.random.default_rng(1000 + i)
        arr = (0.4 * rng.uniform(0, 255, (8, 8, 3)).repeat(12, 0).repeat(12, 1)
               + 0.6 * rng.uniform(0, 255, (96, 96, 3))).astype(np.uint8)
        Image.fromarray(arr).save(root / f"sample{i:02d}.png")
    return root
