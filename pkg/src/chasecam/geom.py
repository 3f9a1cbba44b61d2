"""Rigid transforms, camera framing and RGB point clouds."""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import ArrayLike, NDArray

from chasecam._io import atomic_write_text

ORTHO_TOL = 1e-9


class PlyError(ValueError):
    """Malformed or unsupported PLY input."""


class DegenerateGeometryError(ValueError):
    """Raised when a requested frame cannot be constructed."""


def as_vec3(v: ArrayLike) -> NDArray[np.float64]:
    a = np.asarray(v, dtype=np.float64).reshape(3)
    if not np.all(np.isfinite(a)):
        raise ValueError(f"non-finite vector {a}")
    return a


@dataclass(frozen=True)
class Pose:
    """Rigid transform mapping body coordinates to world coordinates.

    ``rotation`` is a proper 3x3 rotation matrix; it is validated on
    construction and stored read-only.
    """

    rotation: NDArray[np.float64] = field(default_factory=lambda: np.eye(3))
    translation: NDArray[np.float64] = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        r = np.array(self.rotation, dtype=np.float64).reshape(3, 3)
        t = as_vec3(self.translation).copy()
        if not np.allclose(r.T @ r, np.eye(3), atol=ORTHO_TOL, rtol=0):
            raise ValueError("rotation is not orthonormal")
        if abs(np.linalg.det(r) - 1.0) > ORTHO_TOL:
            raise ValueError("rotation determinant is not +1")
        r.setflags(write=False)
        t.setflags(write=False)
        object.__setattr__(self, "rotation", r)
        object.__setattr__(self, "translation", t)

    @classmethod
    def identity(cls) -> Pose:
        return cls()

    @classmethod
    def from_translation(cls, t: ArrayLike) -> Pose:
        return cls(np.eye(3), t)

    @classmethod
    def from_yaw(cls, yaw: float, t: ArrayLike = (0.0, 0.0, 0.0)) -> Pose:
        c, s = np.cos(yaw), np.sin(yaw)
        return cls(np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]]), t)

    def apply(self, points: ArrayLike) -> NDArray[np.float64]:
        p = np.asarray(points, dtype=np.float64)
        return p @ self.rotation.T + self.translation

    def inverse(self) -> Pose:
        rt = self.rotation.T
        return Pose(rt, -rt @ self.translation)

    def compose(self, other: Pose) -> Pose:
        """Return ``self * other`` (apply ``other`` first)."""
        return Pose(self.rotation @ other.rotation, self.rotation @ other.translation + self.translation)

    __matmul__ = compose


@dataclass(frozen=True)
class RgbPointCloud:
    """Points with uint8 RGB colors. ``positions`` is (n, 3), ``colors`` (n, 3)."""

    positions: NDArray[np.float64]
    colors: NDArray[np.uint8]

    def __post_init__(self):
        p = np.array(self.positions, dtype=np.float64).reshape(-1, 3)
        c_raw = np.asarray(self.colors).reshape(-1, 3)
        if len(p) != len(c_raw):
            raise ValueError("positions and colors differ in length")
        if c_raw.size and (c_raw.min() < 0 or c_raw.max() > 255):
            raise ValueError("color channel outside [0, 255]")
        if not np.all(np.isfinite(p)):
            raise ValueError("non-finite point position")
        c = c_raw.astype(np.uint8)
        p.setflags(write=False)
        c.setflags(write=False)
        object.__setattr__(self, "positions", p)
        object.__setattr__(self, "colors", c)

    @classmethod
    def empty(cls) -> RgbPointCloud:
        return cls(np.zeros((0, 3)), np.zeros((0, 3), dtype=np.uint8))

    def __len__(self) -> int:
        return len(self.positions)

    def concat(self, other: RgbPointCloud) -> RgbPointCloud:
        return RgbPointCloud(
            np.vstack([self.positions, other.positions]),
            np.vstack([self.colors, other.colors]),
        )


def transform_cloud(cloud: RgbPointCloud, pose: Pose) -> RgbPointCloud:
    return RgbPointCloud(pose.apply(cloud.positions), cloud.colors)


def look_at_pose(center: ArrayLike, target: ArrayLike, up_hint: ArrayLike = (0.0, 0.0, 1.0)) -> Pose:
    """Camera pose at ``center`` whose +z optical axis points at ``target``.

    Camera axes follow the image convention: +x to the right (orthogonal to
    ``up_hint``), +y down the image.
    """
    center = as_vec3(center)
    forward = as_vec3(target) - center
    n = np.linalg.norm(forward)
    if n < 1e-12:
        raise DegenerateGeometryError("camera center coincides with target")
    forward = forward / n
    right = np.cross(forward, as_vec3(up_hint))
    rn = np.linalg.norm(right)
    if rn < 1e-9:
        raise DegenerateGeometryError("up hint is parallel to the viewing direction")
    right = right / rn
    down = np.cross(forward, right)
    return Pose(np.column_stack([right, down, forward]), center)


_PLY_PROPS = ("x", "y", "z", "red", "green", "blue")


def load_ply(path: str | os.PathLike) -> RgbPointCloud:
    """Read an ASCII PLY file holding ``x y z red green blue`` vertices.

    Extra vertex properties are tolerated and ignored. Errors carry the
    1-based line number of the offending line.
    """
    with open(path, "r", encoding="ascii") as fh:
        lines = fh.read().splitlines()

    def fail(lineno: int, msg: str):
        raise PlyError(f"{path}:{lineno}: {msg}")

    if not lines or lines[0].strip() != "ply":
        fail(1, "missing 'ply' magic")
    n_vertex = None
    props: list[str] = []
    in_vertex = False
    header_end = None
    for i, raw in enumerate(lines[1:], start=2):
        tok = raw.split()
        if not tok or tok[0] in ("comment", "obj_info"):
            continue
        if tok[0] == "format":
            if tok[1:] != ["ascii", "1.0"]:
                fail(i, f"unsupported format {' '.join(tok[1:])!r}")
        elif tok[0] == "element":
            if len(tok) != 3:
                fail(i, "bad element line")
            in_vertex = tok[1] == "vertex"
            if in_vertex:
                try:
                    n_vertex = int(tok[2])
                except ValueError:
                    fail(i, f"bad vertex count {tok[2]!r}")
                if n_vertex < 0:
                    fail(i, "negative vertex count")
            elif int(tok[2]) != 0:
                fail(i, f"unsupported element {tok[1]!r}")
        elif tok[0] == "property":
            if in_vertex:
                if len(tok) != 3:
                    fail(i, "unsupported property declaration")
                props.append(tok[2])
        elif tok[0] == "end_header":
            header_end = i
            break
        else:
            fail(i, f"unexpected header keyword {tok[0]!r}")
    if header_end is None:
        fail(len(lines), "missing end_header")
    if n_vertex is None:
        fail(header_end, "no vertex element")
    for name in _PLY_PROPS:
        if name not in props:
            fail(header_end, f"missing vertex property {name!r}")
    cols = [props.index(name) for name in _PLY_PROPS]

    body = lines[header_end:header_end + n_vertex]
    if len(body) < n_vertex:
        fail(len(lines), f"expected {n_vertex} vertex rows, found {len(body)}")
    pos = np.empty((n_vertex, 3))
    col = np.empty((n_vertex, 3), dtype=np.int64)
    for k, raw in enumerate(body):
        tok = raw.split()
        lineno = header_end + 1 + k
        if len(tok) != len(props):
            fail(lineno, f"expected {len(props)} values, got {len(tok)}")
        try:
            pos[k] = [float(tok[c]) for c in cols[:3]]
            col[k] = [int(tok[c]) for c in cols[3:]]
        except ValueError as exc:
            fail(lineno, str(exc))
        if col[k].min() < 0 or col[k].max() > 255:
            fail(lineno, "color value outside [0, 255]")
    return RgbPointCloud(pos, col)


def format_ply(cloud: RgbPointCloud) -> str:
    head = [
        "ply",
        "format ascii 1.0",
        f"element vertex {len(cloud)}",
        "property float x",
        "property float y",
        "property float z",
        "property uchar red",
        "property uchar green",
        "property uchar blue",
        "end_header",
    ]
    rows = [
        f"{x!r} {y!r} {z!r} {r} {g} {b}"
        for (x, y, z), (r, g, b) in zip(cloud.positions.tolist(), cloud.colors.tolist())
    ]
    return "\n".join(head + rows) + "\n"


def write_ply(cloud: RgbPointCloud, path: str | os.PathLike) -> None:
    """Write ``cloud`` as ASCII PLY; positions use shortest round-trip repr."""
    atomic_write_text(path, format_ply(cloud))
