import numpy as np
import pytest

from chasecam.geom import RgbPointCloud
from chasecam.rhp import ActorPath, PlannerConfig, Scenario
from chasecam.scenes import BRICK, SNOW, actor_model


def small_world(seed=0):
    """Sparse ground plus a brick wall north and a snow wall south; cheap to render."""
    rng = np.random.default_rng(seed)
    gx, gy = np.meshgrid(np.arange(-20, 20, 0.5), np.arange(-8, 8, 0.5), indexing="ij")
    ground = np.column_stack([gx.ravel(), gy.ravel(), np.zeros(gx.size)])
    wx, wz = np.meshgrid(np.arange(-20, 20, 0.3), np.arange(0, 4, 0.3), indexing="ij")
    north = np.column_stack([wx.ravel(), np.full(wx.size, 8.0), wz.ravel()])
    south = np.column_stack([wx.ravel(), np.full(wx.size, -8.0), wz.ravel()])
    cols = np.vstack([
        np.clip(rng.normal(105, 8, (len(ground), 3)), 0, 255),
        np.tile(BRICK, (len(north), 1)),
        np.tile(SNOW, (len(south), 1)),
    ]).astype(np.uint8)
    return actor_model(seed, spacing=0.08), RgbPointCloud(np.vstack([ground, north, south]), cols)


@pytest.fixture(scope="session")
def world():
    return small_world()


@pytest.fixture
def small_scenario(world):
    actor, bg = world

    def make(duration=6.0, **cfg):
        base = dict(image_width=48, image_height=36, score_every=4, threads=1)
        base.update(cfg)
        return Scenario(
            background=bg, actor=actor,
            actor_path=ActorPath([[0, -10, 0, 0.85], [20, 10, 0, 0.85]]),
            duration_s=duration, tick_hz=10.0, drone_start=np.array([-14.7, 0.0, 2.56]),
            config=PlannerConfig(**base),
        )

    return make


def pytest_terminal_summary(terminalreporter):
    import acceptance_log

    if acceptance_log.LINES:
        terminalreporter.section("acceptance criteria")
        for n in sorted(acceptance_log.LINES):
            terminalreporter.write_line(acceptance_log.LINES[n])
