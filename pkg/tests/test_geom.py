import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from chasecam.geom import (
    DegenerateGeometryError,
    PlyError,
    Pose,
    RgbPointCloud,
    format_ply,
    load_ply,
    look_at_pose,
    transform_cloud,
    write_ply,
)

finite = st.floats(-100, 100, allow_nan=False, allow_infinity=False)
vec3 = st.tuples(finite, finite, finite)


def random_rotation(rng):
    q, r = np.linalg.qr(rng.normal(size=(3, 3)))
    q = q * np.sign(np.diag(r))
    if np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    return q


@st.composite
def poses(draw):
    seed = draw(st.integers(0, 2**32 - 1))
    rng = np.random.default_rng(seed)
    return Pose(random_rotation(rng), np.array(draw(vec3)))


def test_pose_rejects_non_rotation():
    with pytest.raises(ValueError):
        Pose(np.diag([1.0, 1.0, -1.0]), np.zeros(3))
    with pytest.raises(ValueError):
        Pose(2 * np.eye(3), np.zeros(3))


def test_pose_compose_inverse_is_identity():
    rng = np.random.default_rng(3)
    T = Pose(random_rotation(rng), rng.normal(size=3))
    I = T @ T.inverse()
    np.testing.assert_allclose(I.rotation, np.eye(3), atol=1e-12)
    np.testing.assert_allclose(I.translation, 0, atol=1e-12)


@settings(max_examples=60, deadline=None)
@given(poses(), st.integers(0, 40))
def test_transform_roundtrip(T, n):
    rng = np.random.default_rng(n)
    c = RgbPointCloud(rng.uniform(-50, 50, (n, 3)), rng.integers(0, 256, (n, 3), dtype=np.uint8))
    back = transform_cloud(transform_cloud(c, T), T.inverse())
    np.testing.assert_allclose(back.positions, c.positions, atol=1e-9)
    np.testing.assert_array_equal(back.colors, c.colors)


@settings(max_examples=60, deadline=None)
@given(poses(), vec3)
def test_rotation_is_isometry(T, v):
    v = np.array(v)
    assert abs(np.linalg.norm(T.rotation @ v) - np.linalg.norm(v)) <= 1e-9 * max(1.0, np.linalg.norm(v))


def test_look_at_straight_down():
    T = look_at_pose((0, 0, 1), (0, 0, 0), up_hint=(0, 1, 0))
    np.testing.assert_allclose(T.rotation[:, 2], [0, 0, -1], atol=1e-12)


def test_look_at_hand_built_frame():
    T = look_at_pose((5, 0, 1), (0, 0, 1), (0, 0, 1))
    R = T.rotation
    np.testing.assert_allclose(R[:, 2], [-1, 0, 0], atol=1e-12)
    # x horizontal, y points down, frame right-handed
    assert abs(R[2, 0]) < 1e-12
    np.testing.assert_allclose(R[:, 0], [0, 1, 0], atol=1e-12)
    np.testing.assert_allclose(R[:, 1], [0, 0, -1], atol=1e-12)
    np.testing.assert_allclose(T.translation, [5, 0, 1])


def test_look_at_degenerate():
    with pytest.raises(DegenerateGeometryError):
        look_at_pose((1, 2, 3), (1, 2, 3))
    with pytest.raises(DegenerateGeometryError):
        look_at_pose((0, 0, 5), (0, 0, 0), (0, 0, 1))


@settings(max_examples=60, deadline=None)
@given(vec3, vec3)
def test_look_at_axis_and_orthogonality(c, t):
    c, t = np.array(c), np.array(t)
    d = t - c
    if np.linalg.norm(d) < 1e-3 or np.linalg.norm(d[:2]) < 1e-3 * np.linalg.norm(d):
        return
    R = look_at_pose(c, t).rotation
    np.testing.assert_allclose(R[:, 2], d / np.linalg.norm(d), atol=1e-9)
    assert abs(R[:, 0] @ np.array([0, 0, 1.0])) < 1e-9
    np.testing.assert_allclose(R.T @ R, np.eye(3), atol=1e-9)


PLY_TWO = """ply
format ascii 1.0
element vertex 2
property float x
property float y
property float z
property uchar red
property uchar green
property uchar blue
end_header
0 0 0 255 0 0
1 2 3 0 128 255
"""


def test_load_two_points(tmp_path):
    p = tmp_path / "a.ply"
    p.write_text(PLY_TWO)
    c = load_ply(p)
    assert len(c) == 2
    np.testing.assert_array_equal(c.positions, [[0, 0, 0], [1, 2, 3]])
    np.testing.assert_array_equal(c.colors, [[255, 0, 0], [0, 128, 255]])
    assert c.colors.dtype == np.uint8


def test_load_empty(tmp_path):
    p = tmp_path / "e.ply"
    p.write_text(PLY_TWO.replace("vertex 2", "vertex 0").split("end_header")[0] + "end_header\n")
    assert len(load_ply(p)) == 0


def test_missing_blue_named(tmp_path):
    p = tmp_path / "m.ply"
    p.write_text(PLY_TWO.replace("property uchar blue\n", "").replace(" 0 0 255 0 0", " 0 0 255 0")
                 .replace("0 128 255", "0 128"))
    with pytest.raises(PlyError, match="blue"):
        load_ply(p)


@pytest.mark.parametrize("bad, where", [
    (PLY_TWO.replace("ascii", "binary_little_endian"), "format"),
    (PLY_TWO.replace("1 2 3 0 128 255", "1 2 3 0 128 300"), "12"),
    (PLY_TWO.replace("1 2 3 0 128 255\n", ""), "vertex"),
    (PLY_TWO.replace("1 2 3", "1 x 3"), "12"),
])
def test_malformed_reports_line(tmp_path, bad, where):
    p = tmp_path / "bad.ply"
    p.write_text(bad)
    with pytest.raises(PlyError) as e:
        load_ply(p)
    assert str(p) in str(e.value)
    assert where in str(e.value)


def test_extra_properties_ignored(tmp_path):
    txt = PLY_TWO.replace("property uchar blue\n", "property uchar blue\nproperty uchar alpha\n")
    txt = txt.replace("0 0 0 255 0 0", "0 0 0 255 0 0 9").replace("1 2 3 0 128 255", "1 2 3 0 128 255 9")
    p = tmp_path / "x.ply"
    p.write_text(txt)
    assert len(load_ply(p)) == 2


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(0, 30))
def test_ply_roundtrip_bit_identical(tmp_path_factory, seed, n):
    rng = np.random.default_rng(seed)
    c = RgbPointCloud(rng.normal(scale=10, size=(n, 3)).astype(np.float32).astype(np.float64),
                      rng.integers(0, 256, (n, 3), dtype=np.uint8))
    d = tmp_path_factory.mktemp("ply")
    write_ply(c, d / "a.ply")
    c2 = load_ply(d / "a.ply")
    assert c2.positions.tobytes() == c.positions.tobytes()
    assert c2.colors.tobytes() == c.colors.tobytes()
    assert format_ply(c2) == (d / "a.ply").read_text()


def test_cloud_validation():
    with pytest.raises(ValueError):
        RgbPointCloud(np.zeros((2, 3)), np.zeros((3, 3), np.uint8))
    with pytest.raises(ValueError):
        RgbPointCloud(np.array([[0, 0, math.nan]]), np.zeros((1, 3), np.uint8))
