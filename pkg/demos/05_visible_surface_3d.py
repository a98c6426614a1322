"""
Visible-surface overlap for 3D scenes
=====================================

When full camera poses and a scene point cloud are available, pair
similarity can be grounded in 3D instead of planar geometry: project the
cloud through each camera, keep the points that land inside the image,
and compare the visible index sets. The overlap is the IoU of those
sets, an exact rational number on a hand-built scene.
"""

import numpy as np

from gvpr import Intrinsics, PointCloud, Pose6DOF, project_points, surface_overlap

# Four points in a row on the plane z=1, a quarter unit apart.
cloud = PointCloud(np.array([
    [0.00, 0.0, 1.0],
    [0.25, 0.0, 1.0],
    [0.50, 0.0, 1.0],
    [0.75, 0.0, 1.0],
]))

# A 1x1-pixel pinhole camera whose window spans half a unit at z=1.
intrinsics = Intrinsics(fx=2.0, fy=2.0, cx=0.5, cy=0.5, width=1.0, height=1.0)

def camera_at(x):
    # identity rotation, looking down +z, centered on (x, 0, 0)
    return Pose6DOF(np.eye(3), np.array([-x, 0.0, 0.0]))

views = {}
for name, x in (("A", 0.125), ("B", 0.5), ("C", 0.875)):
    views[name] = project_points(cloud, camera_at(x), intrinsics, image_id=name)
    print(f"camera {name} at x={x:5.3f} sees points {views[name].indices}")

# Pairwise visible-surface overlap. A and B share point 1 out of {0,1,2}.
print("\npair  overlap")
for a, b in (("A", "B"), ("A", "C"), ("B", "C")):
    psi = surface_overlap(views[a], views[b])
    print(f"{a}-{b}   {psi:.6f}")

assert surface_overlap(views["A"], views["B"]) == 1.0 / 3.0
print("\nIoU(A,B) equals 1/3 exactly")
