import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from chasecam.geom import Pose, RgbPointCloud, look_at_pose
from chasecam.render import (
    ACTOR,
    BACKGROUND,
    EMPTY,
    CameraIntrinsics,
    LabeledImage,
    encode_pgm,
    encode_ppm,
    label_to_gray,
    project_point,
    read_pnm,
    synthesize_view,
    write_pgm,
    write_ppm,
)
from chasecam.scenes import two_camera_scene

import oracles

EYE = Pose.identity()  # camera at origin looking along +z


def small(w=8, h=6, f=5.0):
    return CameraIntrinsics(w, h, f, f, (w - 1) / 2, (h - 1) / 2, 0.05)


def cloud(points, color):
    points = np.asarray(points, float).reshape(-1, 3)
    return RgbPointCloud(points, np.tile(np.asarray(color, np.uint8), (len(points), 1)))


def test_intrinsics_validation():
    with pytest.raises(ValueError):
        CameraIntrinsics(0, 4, 1, 1, 0, 0, 0.1)
    with pytest.raises(ValueError):
        CameraIntrinsics(4, 4, -1, 1, 0, 0, 0.1)
    with pytest.raises(ValueError):
        CameraIntrinsics(4, 4, 1, 1, 0, 0, 0.0)


def test_default_intrinsics_fov():
    K = CameraIntrinsics.from_hfov(96, 72, 120.0)
    assert K.fx == pytest.approx(48 / np.tan(np.radians(60)))
    assert (K.cx, K.cy) == (47.5, 35.5)


def test_project_on_axis():
    K = CameraIntrinsics(101, 101, 100, 100, 50, 50, 0.1)
    assert project_point(K, EYE, (0, 0, 2)) == ((50, 50), 2.0)


def test_project_behind_and_off_image():
    K = CameraIntrinsics(101, 101, 100, 100, 50, 50, 0.1)
    assert project_point(K, EYE, (0, 0, -1)) is None
    assert project_point(K, EYE, (0, 0, 0.05)) is None
    assert project_point(K, EYE, (5, 0, 1)) is None


def test_project_hand_arithmetic():
    K = CameraIntrinsics(200, 101, 100, 100, 50, 50, 0.1)
    assert project_point(K, EYE, (0.5, 0, 1)) == ((100, 50), 1.0)


def test_project_rounds_half_up():
    K = CameraIntrinsics(10, 10, 1, 1, 2.5, 2.5, 0.1)
    assert project_point(K, EYE, (0, 0, 1))[0] == (3, 3)


def test_project_through_posed_camera():
    cam = look_at_pose((5, 0, 1), (0, 0, 1))
    K = small(9, 9)
    (u, v), z = project_point(K, cam, (0, 0, 1))
    assert (u, v) == (4, 4) and z == pytest.approx(5.0)
    # +y world is on the camera's right when looking along -x
    (u2, _), _ = project_point(K, cam, (0, 1, 1))
    assert u2 > u


def test_empty_scene_all_empty():
    K = small()
    im = synthesize_view(RgbPointCloud.empty(), RgbPointCloud.empty(), EYE, K)
    assert (im.label == EMPTY).all()
    assert np.isnan(im.depth).all()
    assert (im.color == 128).all()


def test_actor_in_front_wins():
    K = small()
    a = cloud([(0, 0, 1)], (255, 0, 0))
    b = cloud([(0, 0, 2)], (0, 0, 255))
    im = synthesize_view(a, b, EYE, K, splat_radius=0)
    r, c = 3, 4  # round-half-up of (2.5, 3.5)
    assert im.label[r, c] == ACTOR
    assert tuple(im.color[r, c]) == (255, 0, 0)
    im2 = synthesize_view(cloud([(0, 0, 3)], (255, 0, 0)), b, EYE, K, splat_radius=0)
    assert im2.label[r, c] == BACKGROUND


def test_depth_tie_goes_to_lower_index():
    K = small()
    a = cloud([(0, 0, 2)], (255, 0, 0))
    b = cloud([(0, 0, 2 + 1e-12)], (0, 0, 255))
    im = synthesize_view(a, b, EYE, K, splat_radius=0)
    assert im.label[3, 4] == ACTOR
    both = RgbPointCloud(np.array([[0, 0, 2.0], [0, 0, 2.0]]), np.array([[1, 1, 1], [2, 2, 2]], np.uint8))
    im = synthesize_view(RgbPointCloud.empty(), both, EYE, K, splat_radius=0)
    assert tuple(im.color[3, 4]) == (1, 1, 1)


def test_splat_square_and_clear_color():
    K = CameraIntrinsics(5, 5, 1, 1, 2, 2, 0.05)
    im = synthesize_view(cloud([(0, 0, 1)], (10, 20, 30)), RgbPointCloud.empty(), EYE, K, splat_radius=1,
                         clear_color=(0, 0, 0))
    expected = np.zeros((5, 5), np.uint8)
    expected[1:4, 1:4] = ACTOR
    np.testing.assert_array_equal(im.label, expected)
    with pytest.raises(ValueError):
        synthesize_view(RgbPointCloud.empty(), RgbPointCloud.empty(), EYE, K, splat_radius=-1)


def test_splat_from_off_image_center_bleeds_in():
    K = CameraIntrinsics(5, 5, 1, 1, 2, 2, 0.05)
    # projects to u = -1, its 3x3 square covers column 0
    im = synthesize_view(cloud([(-3, 0, 1)], (9, 9, 9)), RgbPointCloud.empty(), EYE, K, splat_radius=1)
    assert (im.label[1:4, 0] == ACTOR).all() and (im.label[:, 1:] == EMPTY).all()


def random_scene(seed, n):
    rng = np.random.default_rng(seed)
    n_a = rng.integers(0, n + 1)
    pts = rng.uniform([-2, -2, -0.5], [2, 2, 6], size=(n, 3))
    col = rng.integers(0, 256, (n, 3), dtype=np.uint8)
    return RgbPointCloud(pts[:n_a], col[:n_a]), RgbPointCloud(pts[n_a:], col[n_a:])


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10**6), st.integers(0, 60), st.integers(0, 2))
def test_zbuffer_matches_exhaustive_scan(seed, n, radius):
    a, b = random_scene(seed, n)
    K = small(10, 8, 4.0)
    im = synthesize_view(a, b, EYE, K, splat_radius=radius)
    labels = [ACTOR] * len(a) + [BACKGROUND] * len(b)
    depth, lab = oracles.zbuffer_scan(np.vstack([a.positions, b.positions]), labels, EYE, K.fx, K.fy, K.cx, K.cy,
                                      K.width, K.height, K.near_clip, radius)
    got = np.where(np.isnan(im.depth), np.inf, im.depth)
    np.testing.assert_array_equal(got, depth)
    np.testing.assert_array_equal(im.label, lab)


def test_zbuffer_oracle_thousand_points():
    a, b = random_scene(11, 1000)
    K = small(12, 10, 5.0)
    cam = look_at_pose((0, -1, -1), (0, 0, 3))
    im = synthesize_view(a, b, cam, K)
    labels = [ACTOR] * len(a) + [BACKGROUND] * len(b)
    depth, lab = oracles.zbuffer_scan(np.vstack([a.positions, b.positions]), labels, cam, K.fx, K.fy, K.cx, K.cy,
                                      K.width, K.height, K.near_clip, 1)
    np.testing.assert_array_equal(np.where(np.isnan(im.depth), np.inf, im.depth), depth)
    np.testing.assert_array_equal(im.label, lab)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10**6), st.integers(0, 200))
def test_label_composition(seed, n):
    a, b = random_scene(seed, n)
    K = small(16, 12, 6.0)
    fused = synthesize_view(a, b, EYE, K)
    only_a = synthesize_view(a, RgbPointCloud.empty(), EYE, K)
    only_b = synthesize_view(RgbPointCloud.empty(), b, EYE, K)
    da = np.where(np.isnan(only_a.depth), np.inf, only_a.depth)
    db = np.where(np.isnan(only_b.depth), np.inf, only_b.depth)
    composed = np.where(np.isinf(da) & np.isinf(db), EMPTY,
                        np.where(np.rint(da * 1e9) <= np.rint(db * 1e9), ACTOR, BACKGROUND))
    np.testing.assert_array_equal(fused.label, composed)


def test_render_is_deterministic():
    a, b = random_scene(5, 500)
    K = small(32, 24, 12.0)
    im1 = synthesize_view(a, b, EYE, K)
    im2 = synthesize_view(a, b, EYE, K)
    assert im1.color.tobytes() == im2.color.tobytes()
    assert im1.label.tobytes() == im2.label.tobytes()
    assert np.array_equal(im1.depth, im2.depth, equal_nan=True)


def test_label_depth_invariant():
    a, b = random_scene(8, 300)
    im = synthesize_view(a, b, EYE, small(20, 16, 8.0))
    assert np.array_equal(im.label != EMPTY, ~np.isnan(im.depth))


def test_ppm_golden_bytes():
    color = np.array([[[255, 0, 0], [0, 255, 0]], [[0, 0, 255], [1, 2, 3]]], np.uint8)
    assert encode_ppm(color) == b"P6\n2 2\n255\n\xff\x00\x00\x00\xff\x00\x00\x00\xff\x01\x02\x03"


def test_pgm_golden_bytes():
    label = np.array([[ACTOR, BACKGROUND, EMPTY]], np.uint8)
    assert encode_pgm(label_to_gray(label)) == b"P5\n3 1\n255\n\xff\x80\x00"


def test_rendered_golden_file(tmp_path):
    K = CameraIntrinsics(3, 3, 1, 1, 1, 1, 0.05)
    im = synthesize_view(cloud([(0, 0, 1)], (200, 100, 50)), cloud([(1, 1, 1)], (7, 8, 9)), EYE, K,
                         splat_radius=0, clear_color=(0, 0, 0))
    write_ppm(tmp_path / "v.ppm", im.color)
    write_pgm(tmp_path / "l.pgm", label_to_gray(im.label))
    px = b"\x00\x00\x00" * 4 + b"\xc8\x64\x32" + b"\x00\x00\x00" * 3 + b"\x07\x08\x09"
    assert (tmp_path / "v.ppm").read_bytes() == b"P6\n3 3\n255\n" + px
    assert (tmp_path / "l.pgm").read_bytes() == b"P5\n3 3\n255\n" + b"\x00" * 4 + b"\xff" + b"\x00" * 3 + b"\x80"
    np.testing.assert_array_equal(read_pnm(tmp_path / "v.ppm"), im.color)


def test_from_arrays_sets_clear_color_and_depth():
    label = np.array([[ACTOR, EMPTY]], np.uint8)
    im = LabeledImage.from_arrays(np.full((1, 2, 3), 9, np.uint8), label)
    assert tuple(im.color[0, 1]) == (128, 128, 128)
    assert not np.isnan(im.depth[0, 0]) and np.isnan(im.depth[0, 1])


def test_two_camera_backgrounds_differ():
    actor, bg, cams = two_camera_scene()
    K = CameraIntrinsics()
    placed = RgbPointCloud(actor.positions + cams["target"], actor.colors)
    imgs = [synthesize_view(placed, bg, look_at_pose(cams[k], cams["target"]), K) for k in ("distinct", "ambiguous")]
    for im in imgs:
        assert im.mask(ACTOR).any() and im.mask(BACKGROUND).any()
    mean_bg = [im.color[im.mask(BACKGROUND)].mean(axis=0) for im in imgs]
    assert np.abs(mean_bg[0] - mean_bg[1]).max() > 30
