#pragma once

#include "irmesh/camera.hpp"

namespace irmesh {

// Joint-bilateral smoothing of a sensor depth map, guided by the registered
// IR image. Weights combine a spatial Gaussian, a Gaussian on guide-intensity
// difference, and a Gaussian on depth difference; a non-positive or
// non-finite range/depth sigma disables that term. Invalid input pixels stay
// invalid and contribute nothing. Throws on resolution mismatch or
// non-positive spatial sigma.
DepthMap joint_bilateral_depth_filter(const DepthMap& depth, const ShadingImage& guide,
                                      double spatial_sigma, double range_sigma,
                                      double depth_sigma);

// Back-projects every valid pixel (planar z) into a camera-frame mesh.
// Triangles connecting pixels whose depths differ by more than
// `discontinuity_mm` are omitted, so silhouette edges do not get bridged.
// Throws when fewer than 3 pixels are valid.
TriangleMesh depth_map_to_mesh(const DepthMap& depth, const CameraIntrinsics& intrinsics,
                               double discontinuity_mm = 50.0);

}  // namespace irmesh
