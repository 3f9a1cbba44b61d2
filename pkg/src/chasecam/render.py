"""Point-cloud renderer producing color, depth and actor/background labels.

Points are projected with an ideal pinhole camera and splatted as small
squares; a z-buffer keeps the nearest point per pixel, with depth ties (1e-9 m)
going to the lower point index (actor points are indexed before background
points).
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike, NDArray

from chasecam._io import atomic_write_bytes
from chasecam.geom import Pose, RgbPointCloud, as_vec3

EMPTY = 0
BACKGROUND = 1
ACTOR = 2

# PGM gray level per label
LABEL_GRAY = {ACTOR: 255, BACKGROUND: 128, EMPTY: 0}

DEFAULT_CLEAR = (128, 128, 128)


@dataclass(frozen=True)
class CameraIntrinsics:
    width: int = 96
    height: int = 72
    fx: float = 27.712812921102035
    fy: float = 27.712812921102035
    cx: float = 47.5
    cy: float = 35.5
    near_clip: float = 0.05

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ValueError("image size must be at least 1x1")
        if not (self.fx > 0 and self.fy > 0):
            raise ValueError("focal lengths must be positive")
        if not self.near_clip > 0:
            raise ValueError("near_clip must be positive")

    @classmethod
    def from_hfov(cls, width: int = 96, height: int = 72, hfov_deg: float = 120.0, near_clip: float = 0.05):
        """Square-pixel intrinsics with the principal point at the image center."""
        f = (width / 2.0) / math.tan(math.radians(hfov_deg) / 2.0)
        return cls(width, height, f, f, (width - 1) / 2.0, (height - 1) / 2.0, near_clip)

    @property
    def diagonal(self) -> float:
        return math.hypot(self.width, self.height)


@dataclass(frozen=True)
class LabeledImage:
    """Rendered view. Arrays are indexed ``[row, col]`` i.e. ``[v, u]``.

    ``depth`` is NaN wherever ``label`` is EMPTY.
    """

    color: NDArray[np.uint8]  # (h, w, 3)
    depth: NDArray[np.float64]  # (h, w)
    label: NDArray[np.uint8]  # (h, w)

    @property
    def shape(self) -> tuple[int, int]:
        return self.label.shape

    def mask(self, which: int) -> NDArray[np.bool_]:
        return self.label == which

    @classmethod
    def from_arrays(cls, color, label, depth=None, clear_color=DEFAULT_CLEAR) -> LabeledImage:
        """Build an image directly from color and label arrays (used for synthetic tests)."""
        label = np.asarray(label, dtype=np.uint8)
        color = np.array(color, dtype=np.uint8).reshape(label.shape + (3,))
        if depth is None:
            depth = np.where(label != EMPTY, 1.0, np.nan)
        color[label == EMPTY] = clear_color
        return cls(color, np.asarray(depth, dtype=np.float64), label)


def camera_frame(camera_pose: Pose, points: ArrayLike) -> NDArray[np.float64]:
    p = np.asarray(points, dtype=np.float64)
    return (p - camera_pose.translation) @ camera_pose.rotation


def project_point(intrinsics: CameraIntrinsics, camera_pose: Pose, point: ArrayLike):
    """Pixel ``(u, v)`` and camera depth of a world point, or None when clipped.

    Pixel coordinates round half up.
    """
    X, Y, Z = camera_frame(camera_pose, as_vec3(point)[None, :])[0]
    if Z < intrinsics.near_clip:
        return None
    u = _round_half_up(intrinsics.fx * X / Z + intrinsics.cx)
    v = _round_half_up(intrinsics.fy * Y / Z + intrinsics.cy)
    if not (0 <= u < intrinsics.width and 0 <= v < intrinsics.height):
        return None
    return (int(u), int(v)), float(Z)


def _round_half_up(x):
    return np.floor(np.asarray(x) + 0.5).astype(np.int64)


def _project_all(intrinsics: CameraIntrinsics, camera_pose: Pose, positions: NDArray[np.float64]):
    cam = camera_frame(camera_pose, positions)
    z = cam[:, 2]
    front = z >= intrinsics.near_clip
    idx = np.flatnonzero(front)
    cam = cam[idx]
    z = z[idx]
    u = _round_half_up(intrinsics.fx * cam[:, 0] / z + intrinsics.cx)
    v = _round_half_up(intrinsics.fy * cam[:, 1] / z + intrinsics.cy)
    return idx, u, v, z


def synthesize_view(
    actor: RgbPointCloud,
    background: RgbPointCloud,
    camera_pose: Pose,
    intrinsics: CameraIntrinsics,
    splat_radius: int = 1,
    clear_color=DEFAULT_CLEAR,
) -> LabeledImage:
    """Render the fused actor and background clouds from ``camera_pose``.

    Each projected point covers a ``(2r+1) x (2r+1)`` pixel square. The
    projected center may lie off-image as long as part of its square lands
    inside.
    """
    if splat_radius < 0:
        raise ValueError("splat_radius must be >= 0")
    w, h = intrinsics.width, intrinsics.height
    n_a = len(actor)
    positions = np.vstack([actor.positions, background.positions])
    colors = np.vstack([actor.colors, background.colors])

    color = np.empty((h, w, 3), dtype=np.uint8)
    color[:] = np.asarray(clear_color, dtype=np.uint8)
    depth = np.full((h, w), np.nan)
    label = np.full((h, w), EMPTY, dtype=np.uint8)
    if len(positions) == 0:
        return LabeledImage(color, depth, label)

    idx, u, v, z = _project_all(intrinsics, camera_pose, positions)
    r = splat_radius
    keep = (u >= -r) & (u < w + r) & (v >= -r) & (v < h + r)
    idx, u, v, z = idx[keep], u[keep], v[keep], z[keep]
    if len(idx) == 0:
        return LabeledImage(color, depth, label)

    # rank by (depth on a 1e-9 m grid, point index)
    order = np.lexsort((idx, np.rint(z * 1e9).astype(np.int64)))
    rank = np.empty(len(idx), dtype=np.int64)
    rank[order] = np.arange(len(idx))

    sentinel = len(idx)
    best = np.full(h * w, sentinel, dtype=np.int64)
    for dv in range(-r, r + 1):
        vv = v + dv
        ok_v = (vv >= 0) & (vv < h)
        for du in range(-r, r + 1):
            uu = u + du
            ok = ok_v & (uu >= 0) & (uu < w)
            np.minimum.at(best, vv[ok] * w + uu[ok], rank[ok])

    hit = np.flatnonzero(best < sentinel)
    winner = order[best[hit]]  # position within the kept arrays
    src = idx[winner]  # index into fused cloud
    rows, cols = np.divmod(hit, w)
    color[rows, cols] = colors[src]
    depth[rows, cols] = z[winner]
    label[rows, cols] = np.where(src < n_a, ACTOR, BACKGROUND)
    return LabeledImage(color, depth, label)


def encode_ppm(color: NDArray[np.uint8]) -> bytes:
    h, w, _ = color.shape
    return f"P6\n{w} {h}\n255\n".encode("ascii") + np.ascontiguousarray(color, dtype=np.uint8).tobytes()


def encode_pgm(gray: NDArray[np.uint8]) -> bytes:
    h, w = gray.shape
    return f"P5\n{w} {h}\n255\n".encode("ascii") + np.ascontiguousarray(gray, dtype=np.uint8).tobytes()


def label_to_gray(label: NDArray[np.uint8]) -> NDArray[np.uint8]:
    lut = np.zeros(256, dtype=np.uint8)
    for k, g in LABEL_GRAY.items():
        lut[k] = g
    return lut[label]


def write_ppm(path: str | os.PathLike, color: NDArray[np.uint8]) -> None:
    atomic_write_bytes(path, encode_ppm(color))


def write_pgm(path: str | os.PathLike, gray: NDArray[np.uint8]) -> None:
    atomic_write_bytes(path, encode_pgm(gray))


def read_pnm(path: str | os.PathLike) -> NDArray[np.uint8]:
    """Minimal reader for the binary P5/P6 files this module writes."""
    with open(path, "rb") as fh:
        data = fh.read()
    tokens = []
    pos = 0
    while len(tokens) < 4:
        while data[pos:pos + 1].isspace():
            pos += 1
        if data[pos:pos + 1] == b"#":
            pos = data.index(b"\n", pos) + 1
            continue
        start = pos
        while not data[pos:pos + 1].isspace():
            pos += 1
        tokens.append(data[start:pos])
    pos += 1
    magic, w, h, maxval = tokens[0], int(tokens[1]), int(tokens[2]), int(tokens[3])
    if maxval != 255:
        raise ValueError("only 8-bit PNM supported")
    if magic == b"P6":
        return np.frombuffer(data, dtype=np.uint8, count=w * h * 3, offset=pos).reshape(h, w, 3)
    if magic == b"P5":
        return np.frombuffer(data, dtype=np.uint8, count=w * h, offset=pos).reshape(h, w)
    raise ValueError(f"unsupported PNM magic {magic!r}")
