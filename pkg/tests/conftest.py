import numpy as np
import pytest

from courtside.ingest import FrameSequence

# channel means 93, 80, 50 and 227: distinct for the intensity-based descriptor
SCENE_COLORS = [(200, 40, 40), (40, 160, 40), (30, 30, 90), (240, 240, 200)]


def scene_video(colors=SCENE_COLORS, per_scene=10, size=32):
    frames = []
    for c in colors:
        frames += [np.full((size, size, 3), c, dtype=np.float64)] * per_scene
    return FrameSequence.from_arrays(frames, clip_id="four_scene")


def moving_block_video(n=16, size=64, block=12, step=3, bg=40.0, fg=220.0):
    frames = []
    for i in range(n):
        a = np.full((size, size, 3), bg)
        x = (4 + i * step) % (size - block)
        a[20:20 + block, x:x + block] = fg
        frames.append(a)
    return FrameSequence.from_arrays(frames, clip_id="moving_block")


@pytest.fixture
def four_scene():
    return scene_video()


@pytest.fixture
def moving_block():
    return moving_block_video()
