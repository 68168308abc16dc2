import pytest
import os
import logging

from dotenv import load_dotenv

from panopyr.workbench import SceneSpec
from panopyr.workbench.scenes import synth_scene

load_dotenv()

LOGGER = logging.getLogger(__name__)

SCENE_COUNT = int(os.getenv("PANOPYR_SCENE_COUNT", "50"))
SCENE_SIZE = int(os.getenv("PANOPYR_SCENE_SIZE", "128"))
THREAD_SEEDS = int(os.getenv("PANOPYR_THREAD_SEEDS", "10"))
POSTPROCESS_BUDGET = float(os.getenv("PANOPYR_POSTPROCESS_BUDGET", "5.0"))


@pytest.fixture(scope="session")
def scenes():
    LOGGER.info(f"Synthesizing {SCENE_COUNT} scenes of {SCENE_SIZE}x{SCENE_SIZE}")
    return [
        synth_scene(SceneSpec(seed=seed, height=SCENE_SIZE, width=SCENE_SIZE))
        for seed in range(SCENE_COUNT)
    ]


@pytest.fixture(scope="session")
def thread_seeds():
    return range(THREAD_SEEDS)


@pytest.fixture(scope="session")
def postprocess_budget():
    return POSTPROCESS_BUDGET
