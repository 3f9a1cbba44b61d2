"""
Rendering a view and scoring how well the actor stands out
==========================================================

A white box sits between a brick wall and a sky-blue wall. We look at it
from both sides, save the images and compare the variance ratios.
"""

from pathlib import Path

from chasecam import CameraIntrinsics, RgbPointCloud, look_at_pose, synthesize_view
from chasecam.detect import score_image
from chasecam.render import label_to_gray, write_pgm, write_ppm
from chasecam.scenes import two_camera_scene

out = Path("demo_out/render")
out.mkdir(parents=True, exist_ok=True)

# the actor model is centered on the origin, so move it onto the target first
actor, background, cams = two_camera_scene()
actor = RgbPointCloud(actor.positions + cams["target"], actor.colors)
K = CameraIntrinsics()  # 96 x 72, 120 degree field of view

for name in ("distinct", "ambiguous"):
    pose = look_at_pose(cams[name], cams["target"])
    image = synthesize_view(actor, background, pose, K)
    write_ppm(out / f"{name}.ppm", image.color)
    write_pgm(out / f"{name}_labels.pgm", label_to_gray(image.label))
    report = score_image(image)
    print(f"{name:9s}  status={report.status.value}  R={report.R:8.3f}  L={report.L:.4f}")

# the camera facing the brick wall sees a backdrop unlike the actor, so R is far larger
