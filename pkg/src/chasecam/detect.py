"""Color detectability of an actor against its background in a rendered view.

The score follows the variance-ratio idea: colors are binned in RGB, each
labeled pixel is mapped to the log ratio of actor versus background color
density, and the separation of the two resulting 1D distributions is measured
as between-class over within-class variance. Background pixels close to the
actor's image centroid are up-weighted so that ambiguous colors right next to
the actor hurt more than the same colors far away.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

import numpy as np
from numpy.typing import NDArray

from chasecam.geom import Pose, RgbPointCloud, as_vec3, look_at_pose, transform_cloud
from chasecam.render import (
    ACTOR,
    BACKGROUND,
    DEFAULT_CLEAR,
    CameraIntrinsics,
    LabeledImage,
    synthesize_view,
)


class EmptyPixelSetError(ValueError):
    """The selected pixel set has no members, so color densities are undefined."""


class Status(str, Enum):
    OK = "OK"
    OCCLUDED = "OCCLUDED"
    NO_BACKGROUND = "NO_BACKGROUND"


@dataclass(frozen=True)
class DetectParams:
    bins_per_channel: int = 8
    bin_count: int = 32
    eps: float = 1e-6
    eps_den: float = 1e-9
    eps_R: float = 1e-3
    w_max: float = 5.0
    d_c: Optional[float] = None  # pixels; None -> half the image diagonal
    weighted: bool = True
    splat_radius: int = 1
    clear_color: tuple = DEFAULT_CLEAR

    def resolved_d_c(self, intrinsics: CameraIntrinsics) -> float:
        return self.d_c if self.d_c is not None else 0.5 * intrinsics.diagonal


@dataclass(frozen=True)
class RgbBin:
    bins_per_channel: int
    counts: NDArray[np.int64]  # flat, length bins_per_channel**3
    total: int

    def index(self, colors) -> NDArray[np.int64]:
        return rgb_bin_index(colors, self.bins_per_channel)

    def density(self, colors) -> NDArray[np.float64]:
        """phi(c | U) for one color or an (..., 3) array of colors."""
        return self.counts[self.index(colors)] / self.total


def rgb_bin_index(colors, bins_per_channel: int) -> NDArray[np.int64]:
    c = np.asarray(colors, dtype=np.int64)
    width = 256 // bins_per_channel
    q = c // width
    return (q[..., 0] * bins_per_channel + q[..., 1]) * bins_per_channel + q[..., 2]


def _check_bins(bins_per_channel: int) -> None:
    if bins_per_channel < 2 or 256 % bins_per_channel:
        raise ValueError(f"bins_per_channel must be >= 2 and divide 256, got {bins_per_channel}")


def rgb_bin_from_colors(colors, bins_per_channel: int = 8) -> RgbBin:
    _check_bins(bins_per_channel)
    colors = np.asarray(colors).reshape(-1, 3)
    if len(colors) == 0:
        raise EmptyPixelSetError("cannot bin an empty pixel set")
    counts = np.bincount(rgb_bin_index(colors, bins_per_channel), minlength=bins_per_channel**3)
    return RgbBin(bins_per_channel, counts.astype(np.int64), int(len(colors)))


def build_rgb_bin(image: LabeledImage, pixel_set: int, bins_per_channel: int = 8) -> RgbBin:
    if pixel_set not in (ACTOR, BACKGROUND):
        raise ValueError("pixel_set must be ACTOR or BACKGROUND")
    return rgb_bin_from_colors(image.color[image.mask(pixel_set)], bins_per_channel)


@dataclass(frozen=True)
class LikelihoodImage:
    """Per-pixel log density ratio; NaN off the actor and background pixels."""

    values: NDArray[np.float64]
    eps: float

    @property
    def bounds(self) -> tuple[float, float]:
        return math.log(self.eps), -math.log(self.eps)


def log_ratio(phi_a, phi_b, eps: float):
    return np.log(np.maximum(phi_a, eps)) - np.log(np.maximum(phi_b, eps))


def likelihood_image(image: LabeledImage, bin_a: RgbBin, bin_b: RgbBin, eps: float = 1e-6) -> LikelihoodImage:
    if not eps > 0:
        raise ValueError("eps must be positive")
    values = np.full(image.shape, np.nan)
    sel = image.mask(ACTOR) | image.mask(BACKGROUND)
    c = image.color[sel]
    values[sel] = log_ratio(bin_a.density(c), bin_b.density(c), eps)
    return LikelihoodImage(values, eps)


def pixel_weight(pixel, actor_centroid, d_c: float, w_max: float):
    """Background weight decaying linearly from ``w_max`` at the centroid to 1 at ``d_c``.

    Vectorized over leading axes of ``pixel``.
    """
    d = np.linalg.norm(np.asarray(pixel, dtype=np.float64) - np.asarray(actor_centroid, dtype=np.float64), axis=-1)
    s = d / d_c
    return np.where(d <= d_c, w_max * (1.0 - s) + s, 1.0)


@dataclass(frozen=True)
class Histogram1D:
    lo: float
    hi: float
    weights: NDArray[np.float64]

    @property
    def bin_count(self) -> int:
        return len(self.weights)

    @property
    def centers(self) -> NDArray[np.float64]:
        width = (self.hi - self.lo) / self.bin_count
        return self.lo + width * (np.arange(self.bin_count) + 0.5)


def histogram(values, weights, lo: float, hi: float, bin_count: int) -> Histogram1D:
    values = np.asarray(values, dtype=np.float64)
    weights = np.asarray(weights, dtype=np.float64)
    if len(values) == 0:
        raise EmptyPixelSetError("histogram of an empty pixel set")
    k = np.floor((values - lo) / (hi - lo) * bin_count).astype(np.int64)
    np.clip(k, 0, bin_count - 1, out=k)
    mass = np.bincount(k, weights=weights, minlength=bin_count)
    return Histogram1D(lo, hi, mass / mass.sum())


def build_histograms(
    lik: LikelihoodImage,
    image: LabeledImage,
    bin_count: int = 32,
    d_c: float = 60.0,
    w_max: float = 5.0,
    weighted: bool = True,
) -> tuple[Histogram1D, Histogram1D]:
    """Actor histogram (unit weights) and background histogram (proximity weights)."""
    ma, mb = image.mask(ACTOR), image.mask(BACKGROUND)
    if not ma.any() or not mb.any():
        raise EmptyPixelSetError("actor and background pixel sets must both be nonempty")
    lo, hi = lik.bounds
    rows_a, cols_a = np.nonzero(ma)
    centroid = np.array([cols_a.mean(), rows_a.mean()])
    rows_b, cols_b = np.nonzero(mb)
    if weighted:
        wb = pixel_weight(np.column_stack([cols_b, rows_b]), centroid, d_c, w_max)
    else:
        wb = np.ones(len(rows_b))
    p_a = histogram(lik.values[ma], np.ones(len(rows_a)), lo, hi, bin_count)
    p_b = histogram(lik.values[rows_b, cols_b], wb, lo, hi, bin_count)
    return p_a, p_b


def weighted_variance(values, p) -> float:
    values = np.asarray(values, dtype=np.float64)
    p = np.asarray(p, dtype=np.float64)
    mean = np.dot(p, values)
    return float(max(np.dot(p, (values - mean) ** 2), 0.0))


def variance_ratio(p_a: Histogram1D, p_b: Histogram1D, eps_den: float = 1e-9) -> float:
    if p_a.bin_count != p_b.bin_count or p_a.lo != p_b.lo or p_a.hi != p_b.hi:
        raise ValueError("histograms must share bins")
    h = p_a.centers
    between = weighted_variance(h, 0.5 * (p_a.weights + p_b.weights))
    within = weighted_variance(h, p_a.weights) + weighted_variance(h, p_b.weights)
    return between / (within + eps_den)


def detectability_cost(R: float, eps_R: float = 1e-3) -> float:
    if R < 0:
        raise ValueError("R must be nonnegative")
    return 1.0 / (R + eps_R)


@dataclass
class DetectabilityReport:
    status: Status
    R: float
    L: float
    actor_pixel_count: int
    background_pixel_count: int
    image: Optional[LabeledImage] = field(default=None, repr=False)
    likelihood: Optional[LikelihoodImage] = field(default=None, repr=False)
    p_a: Optional[Histogram1D] = field(default=None, repr=False)
    p_b: Optional[Histogram1D] = field(default=None, repr=False)

    @property
    def occluded(self) -> bool:
        return self.status is Status.OCCLUDED


def score_image(image: LabeledImage, params: DetectParams = DetectParams(), d_c: Optional[float] = None,
                keep: bool = False) -> DetectabilityReport:
    """Score an already-rendered image.

    An image without actor pixels is OCCLUDED (infinite cost). An image
    without background pixels is scored against a background made of the
    clear color alone and flagged NO_BACKGROUND.
    """
    h, w = image.shape
    if d_c is None:
        d_c = params.d_c if params.d_c is not None else 0.5 * math.hypot(w, h)
    n_a = int(image.mask(ACTOR).sum())
    n_b = int(image.mask(BACKGROUND).sum())
    if n_a == 0:
        return DetectabilityReport(Status.OCCLUDED, 0.0, math.inf, 0, n_b, image=image if keep else None)

    bin_a = build_rgb_bin(image, ACTOR, params.bins_per_channel)
    if n_b == 0:
        clear = np.asarray(params.clear_color, dtype=np.uint8)
        bin_b = rgb_bin_from_colors(clear[None, :], params.bins_per_channel)
        lik = likelihood_image(image, bin_a, bin_b, params.eps)
        lo, hi = lik.bounds
        ma = image.mask(ACTOR)
        p_a = histogram(lik.values[ma], np.ones(n_a), lo, hi, params.bin_count)
        h_clear = log_ratio(bin_a.density(clear), 1.0, params.eps)
        p_b = histogram([h_clear], [1.0], lo, hi, params.bin_count)
        status = Status.NO_BACKGROUND
    else:
        bin_b = build_rgb_bin(image, BACKGROUND, params.bins_per_channel)
        lik = likelihood_image(image, bin_a, bin_b, params.eps)
        p_a, p_b = build_histograms(lik, image, params.bin_count, d_c, params.w_max, params.weighted)
        status = Status.OK
    R = variance_ratio(p_a, p_b, params.eps_den)
    report = DetectabilityReport(status, R, detectability_cost(R, params.eps_R), n_a, n_b)
    if keep:
        report.image, report.likelihood, report.p_a, report.p_b = image, lik, p_a, p_b
    return report


def evaluate_viewpoint(
    actor_pose: Pose,
    clouds: tuple[RgbPointCloud, RgbPointCloud],
    camera_center,
    intrinsics: CameraIntrinsics = CameraIntrinsics(),
    params: DetectParams = DetectParams(),
    keep: bool = False,
) -> DetectabilityReport:
    """Render the actor at ``actor_pose`` from ``camera_center`` (looking at the
    actor origin) and score the view. ``clouds`` is ``(actor_model, background)``
    with the actor in its body frame.
    """
    actor_model, background = clouds
    target = actor_pose.translation
    cam = look_at_pose(as_vec3(camera_center), target)
    image = synthesize_view(
        transform_cloud(actor_model, actor_pose), background, cam, intrinsics,
        params.splat_radius, params.clear_color,
    )
    return score_image(image, params, params.resolved_d_c(intrinsics), keep=keep)
