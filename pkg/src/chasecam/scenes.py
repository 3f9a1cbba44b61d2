"""Procedural test scenes.

``desk_scene`` is the bundled chase scene: a white-clad actor walking over
snow with a brick wall along one side, so that half the viewing directions
see the actor against white and half against brick. ``two_camera_scene``
places a sky-blue box between a brick wall and a sky-blue wall.
"""

from __future__ import annotations

import os
from pathlib import Path

import numpy as np

from chasecam.geom import RgbPointCloud, write_ply

SNOW = (236, 238, 242)
WHITE_CLOTH = (244, 244, 246)
SKIN = (214, 160, 120)
HAIR = (52, 36, 28)
BRICK = (150, 62, 44)
MORTAR = (196, 188, 176)
SKY_BLUE = (120, 190, 235)


def _jitter(rng: np.random.Generator, base, n: int, spread: int = 6) -> np.ndarray:
    c = np.asarray(base, dtype=np.int64) + rng.integers(-spread, spread + 1, size=(n, 3))
    return np.clip(c, 0, 255).astype(np.uint8)


def box_surface(lo, hi, spacing: float) -> np.ndarray:
    """Points on the six faces of an axis-aligned box."""
    lo, hi = np.asarray(lo, float), np.asarray(hi, float)
    pts = []
    for axis in range(3):
        a, b = [k for k in range(3) if k != axis]
        ga = np.arange(lo[a], hi[a] + 1e-9, spacing)
        gb = np.arange(lo[b], hi[b] + 1e-9, spacing)
        A, B = np.meshgrid(ga, gb, indexing="ij")
        for side in (lo[axis], hi[axis]):
            p = np.empty((A.size, 3))
            p[:, axis] = side
            p[:, a] = A.ravel()
            p[:, b] = B.ravel()
            pts.append(p)
    return np.unique(np.round(np.vstack(pts), 9), axis=0)


def actor_model(seed: int = 0, spacing: float = 0.04) -> RgbPointCloud:
    """1.7 m white-clad figure centered on its body frame origin."""
    rng = np.random.default_rng(seed)
    body = box_surface((-0.15, -0.25, -0.85), (0.15, 0.25, 0.55), spacing)
    head = box_surface((-0.11, -0.1, 0.57), (0.11, 0.1, 0.85), spacing)
    hair = head[head[:, 2] > 0.76]
    face = head[head[:, 2] <= 0.76]
    pos = np.vstack([body, face, hair])
    col = np.vstack([
        _jitter(rng, WHITE_CLOTH, len(body), 4),
        _jitter(rng, SKIN, len(face)),
        _jitter(rng, HAIR, len(hair)),
    ])
    return RgbPointCloud(pos, col)


def brick_colors(rng: np.random.Generator, u: np.ndarray, z: np.ndarray) -> np.ndarray:
    """Running-bond brick pattern over wall coordinates (u along, z up)."""
    course = np.floor(z / 0.075).astype(int)
    shift = (course % 2) * 0.125
    mortar = ((z % 0.075) < 0.012) | (((u + shift) % 0.25) < 0.02)
    out = _jitter(rng, BRICK, len(u), 14)
    out[mortar] = _jitter(rng, MORTAR, int(mortar.sum()), 6)
    return out


STONE = (104, 108, 112)


def desk_scene(seed: int = 0, snow_patch_fraction: float = 0.05) -> tuple[RgbPointCloud, RgbPointCloud]:
    """Actor model and background.

    Stone ground sprinkled with snow patches, a brick wall closing the north
    side (y = 8 m) and a snow bank closing the south side (y = -8 m). Looking
    north the actor stands against brick; looking south, against snow.
    """
    rng = np.random.default_rng(seed)
    gx, gy = np.meshgrid(np.arange(-40.0, 40.0, 0.25), np.arange(-8.0, 8.0, 0.25), indexing="ij")
    ground = np.column_stack([gx.ravel(), gy.ravel(), np.zeros(gx.size)])
    # snow patches on a coarse 1 m grid
    cell = np.floor(ground[:, :2]).astype(np.int64)
    cell_rng = np.random.default_rng([seed, 1])
    patch = cell_rng.random((80, 16)) < snow_patch_fraction
    snow = patch[cell[:, 0] + 40, cell[:, 1] + 8]
    ground_c = _jitter(rng, STONE, len(ground), 10)
    ground_c[snow] = _jitter(rng, SNOW, int(snow.sum()), 8)

    wx, wz = np.meshgrid(np.arange(-40.0, 40.0, 0.2), np.arange(0.0, 4.0, 0.2), indexing="ij")
    wx, wz = wx.ravel(), wz.ravel()
    north = np.column_stack([wx, np.full(wx.size, 8.0), wz])
    south = np.column_stack([wx, np.full(wx.size, -8.0), wz])
    bg = RgbPointCloud(
        np.vstack([ground, north, south]),
        np.vstack([ground_c, brick_colors(rng, wx, wz), _jitter(rng, SNOW, wx.size, 8)]),
    )
    return actor_model(seed), bg


# t, x, y, z of the actor's body center; walks east along the wall
DESK_PATH = [
    [0.0, -28.0, 0.5, 0.85],
    [15.0, -14.0, 0.0, 0.85],
    [30.0, 0.0, 0.6, 0.85],
    [45.0, 14.0, 0.0, 0.85],
    [60.0, 28.0, 0.5, 0.85],
]


def two_camera_scene(seed: int = 0) -> tuple[RgbPointCloud, RgbPointCloud, dict]:
    """Sky-blue box between a brick wall (x = -6 m) and a sky-blue wall (x = +6 m).

    Returns ``(actor, background, cameras)``. ``cameras["distinct"]`` looks at
    the box with the brick wall behind it, ``cameras["ambiguous"]`` with the
    sky-blue wall behind it; ``cameras["target"]`` is the box center.
    """
    rng = np.random.default_rng(seed)
    actor_pts = box_surface((-0.4, -0.4, -0.4), (0.4, 0.4, 0.4), 0.04)
    actor = RgbPointCloud(actor_pts, _jitter(rng, SKY_BLUE, len(actor_pts), 5))

    wy, wz = np.meshgrid(np.arange(-20.0, 20.0, 0.1), np.arange(-6.0, 8.0, 0.1), indexing="ij")
    wy, wz = wy.ravel(), wz.ravel()
    brick = np.column_stack([np.full(wy.size, -6.0), wy, wz])
    blue = np.column_stack([np.full(wy.size, 6.0), wy, wz])
    bg = RgbPointCloud(
        np.vstack([brick, blue]),
        np.vstack([brick_colors(rng, wy, wz), _jitter(rng, SKY_BLUE, wy.size, 8)]),
    )
    target = np.array([0.0, 0.0, 1.0])
    cams = {
        "target": target,
        "distinct": target + np.array([4.0, 0.0, 0.5]),
        "ambiguous": target + np.array([-4.0, 0.0, 0.5]),
    }
    return actor, bg, cams


def write_desk_bundle(directory: str | os.PathLike, seed: int = 0) -> Path:
    """Write ``actor.ply``, ``background.ply`` and ``scenario.yaml`` for the desk scene."""
    import yaml

    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    actor, bg = desk_scene(seed)
    write_ply(actor, d / "actor.ply")
    write_ply(bg, d / "background.ply")
    scenario = {
        "background_ply": "background.ply",
        "actor_ply": "actor.ply",
        "actor_path": DESK_PATH,
        "duration_s": 60.0,
        "tick_hz": 20.0,
        "drone_start": [-32.7, 0.5, 2.56],
        "lam": 20.0,
    }
    with open(d / "scenario.yaml", "w") as fh:
        yaml.safe_dump(scenario, fh, sort_keys=False, default_flow_style=None)
    return d / "scenario.yaml"
