"""
Why background pixels near the actor count more
===============================================

Three synthetic frames: a clean brick background, a white patch touching the
actor and the same patch far away. Distance weighting separates the last two.
"""

import numpy as np

from chasecam.detect import DetectParams, build_rgb_bin, likelihood_image, score_image
from chasecam.render import ACTOR, BACKGROUND, LabeledImage

W, H = 96, 72
WHITE, BRICK = (240, 240, 244), (150, 62, 44)


def frame(patch_cols):
    color = np.tile(np.array(BRICK, np.uint8), (H, W, 1))
    label = np.full((H, W), BACKGROUND, np.uint8)
    rows = slice(H // 2 - 10, H // 2 + 10)
    color[rows, 6:20], label[rows, 6:20] = WHITE, ACTOR
    if patch_cols is not None:
        color[rows, patch_cols] = WHITE
    return LabeledImage.from_arrays(color, label)


scenes = {"clean": frame(None), "near": frame(slice(20, 26)), "far": frame(slice(W - 8, W - 2))}

for name, im in scenes.items():
    w = score_image(im).R
    u = score_image(im, DetectParams(weighted=False)).R
    print(f"{name:5s}  weighted R={w:14.4f}  unweighted R={u:10.4f}")

# the likelihood image is log(p_actor / p_background) per pixel; white is ambiguous in "near"
im = scenes["near"]
lik = likelihood_image(im, build_rgb_bin(im, ACTOR), build_rgb_bin(im, BACKGROUND))
print("likelihood range on the near frame:", np.nanmin(lik.values).round(2), np.nanmax(lik.values).round(2))
