import os
from pathlib import Path

import numpy as np
import pytest

from karelsynth import dsl
from karelsynth.datagen import GenConfig, sample_program


@pytest.fixture
def rng():
    return np.random.default_rng(0)


def random_programs(n: int, seed: int = 0, max_tokens: int = 44):
    """Generator-produced ASTs for fuzzing."""
    cfg = GenConfig(max_program_tokens=max_tokens)
    gen = np.random.default_rng(seed)
    return [sample_program(cfg, gen) for _ in range(n)]


def corpus_dir() -> Path:
    return Path(__file__).resolve().parents[1] / "src" / "karelsynth" / "data" / "programs"


def corpus_programs() -> dict[str, str]:
    return {p.stem: p.read_text().strip() for p in sorted(corpus_dir().glob("*.txt"))}


def load_corpus(name: str) -> dsl.Program:
    return dsl.parse(corpus_programs()[name])


@pytest.fixture(scope="session")
def desk_run(tmp_path_factory):
    """Desk-scale dataset + trained checkpoint, built once per session.

    Set KARELSYNTH_TEST_CACHE to persist across sessions while iterating.
    """
    from karelsynth.datagen import build_dataset, load_split
    from karelsynth.model.training import TrainConfig, train

    cache = os.environ.get("KARELSYNTH_TEST_CACHE")
    root = Path(cache) if cache else tmp_path_factory.mktemp("desk")
    data_dir = root / "data"
    run_dir = root / "run"
    checkpoint = run_dir / "checkpoint.ks"
    if not checkpoint.exists():
        if not (data_dir / "manifest.json").exists():
            build_dataset(GenConfig(), seed=11, outdir=data_dir,
                          n_jobs=os.cpu_count() or 1)
        cfg = TrainConfig(seed=11)
        train(cfg, load_split(data_dir, "train"), load_split(data_dir, "val"),
              run_dir)
    return {"data": data_dir, "run": run_dir, "checkpoint": checkpoint}
