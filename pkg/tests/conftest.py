from pathlib import Path

import numpy as np
import pytest

from provenance.interchange import Label, RecordMeta, write_embedding_file
from provenance.pipeline import Engine, FrameworkMode
from provenance.vecstore import Store


def make_corpus(n: int, size: int = 512, seed: int = 1234, gray: bool = False) -> dict[str, np.ndarray]:
    """Synthetic corpus with structure at three spatial scales.

    All images share one coarse base; identity lives in the medium and fine
    layers, so strong blurs genuinely erode it while mild perturbations stay
    recoverable.
    """
    shape = (size, size) if gray else (size, size, 3)

    def scaled_noise(rng, block):
        rep = -(-size // block)  # ceil
        base = rng.uniform(0, 255, (block, block) if gray else (block, block, 3))
        return base.repeat(rep, 0).repeat(rep, 1)[:size, :size]

    shared_coarse = scaled_noise(np.random.default_rng(np.random.SeedSequence([seed])), 8)
    images = {}
    for i in range(n):
        rng = np.random.default_rng(np.random.SeedSequence([seed, i]))
        img = (0.30 * shared_coarse
               + 0.35 * scaled_noise(rng, 64)
               + 0.35 * rng.uniform(0, 255, shape))
        images[f"img{i:04d}.png"] = np.clip(img, 0, 255).astype(np.uint8)
    return images


def random_unit_vectors(n: int, dim: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    m = rng.standard_normal((n, dim)).astype(np.float32)
    return m / np.linalg.norm(m, axis=1, keepdims=True)


@pytest.fixture
def corpus10():
    return make_corpus(10, size=256, seed=77)


def build_engine_root(base: "Path", n: int = 20, dim: int = 64):
    """Data root with n AI + n human records ingested in hybrid mode.

    Returns (root, ai_vectors, human_vectors); reopen with any mode.
    """
    root = base / "engine-root"
    ai_vecs = random_unit_vectors(n, dim, seed=301)
    hu_vecs = random_unit_vectors(n, dim, seed=402)
    ai_path = base / "ai.emb"
    hu_path = base / "human.emb"
    write_embedding_file(
        [(RecordMeta(f"ai{i:03d}", f"ai{i:03d}.png", Label.AI, "train"), ai_vecs[i]) for i in range(n)],
        ai_path,
    )
    write_embedding_file(
        [(RecordMeta(f"hu{i:03d}", f"hu{i:03d}.png", Label.HUMAN, "train"), hu_vecs[i]) for i in range(n)],
        hu_path,
    )
    engine = Engine(root, FrameworkMode.HYBRID, gas_seed=0)
    engine.ingest(ai_path, "ai")
    engine.ingest(hu_path, "human")
    return root, ai_vecs, hu_vecs


@pytest.fixture
def engine_root(tmp_path):
    return build_engine_root(tmp_path)


@pytest.fixture
def fixture_store(tmp_path):
    """Store with 20 AI + 20 human dim-64 records in namespace 'train'."""
    store = Store(tmp_path / "store")
    ai = store.create_collection("ai", Label.AI, 64)
    human = store.create_collection("human", Label.HUMAN, 64)
    ai_vecs = random_unit_vectors(20, 64, seed=101)
    hu_vecs = random_unit_vectors(20, 64, seed=202)
    ai.upsert_many(
        "train",
        [
            (RecordMeta(f"ai{i:03d}", f"ai{i:03d}.png", Label.AI, "train"), ai_vecs[i])
            for i in range(20)
        ],
    )
    human.upsert_many(
        "train",
        [
            (RecordMeta(f"hu{i:03d}", f"hu{i:03d}.png", Label.HUMAN, "train"), hu_vecs[i])
            for i in range(20)
        ],
    )
    ai.save()
    human.save()
    return store, ai, human, ai_vecs, hu_vecs
