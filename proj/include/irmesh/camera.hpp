#pragma once

#include "irmesh/geometry.hpp"
#include "irmesh/shading.hpp"

#include <optional>

namespace irmesh {

struct CameraIntrinsics {
    double fx = 0.0, fy = 0.0;
    double cx = 0.0, cy = 0.0;
    int width = 0, height = 0;

    void validate() const;
};

// World-to-camera rigid transform: X_cam = rotation * X_world + translation.
struct CameraPose {
    Mat3 rotation = Mat3::Identity();
    Vec3 translation = Vec3::Zero();

    // Throws if rotation is not orthonormal with determinant +1 (within 1e-9).
    void validate() const;

    Vec3 to_camera(const Vec3& x_world) const { return rotation * x_world + translation; }
    Vec3 to_world(const Vec3& x_cam) const { return rotation.transpose() * (x_cam - translation); }
    Vec3 camera_center() const { return -(rotation.transpose() * translation); }
};

// One capture: camera, its rigidly attached light, and the shading image.
struct View {
    CameraIntrinsics intrinsics;
    CameraPose pose;
    Vec3 light_offset = Vec3::Zero();  // light position in the camera frame, mm
    ShadingImage image;

    Vec3 light_position_world() const { return pose.to_world(light_offset); }
    void validate() const;
};

struct Projection {
    Vec2 pixel;       // continuous pixel coordinates, pixel centers at integers
    double distance;  // Euclidean distance from the camera center, mm
    double z;         // camera-space depth, mm
};

// Perspective projection. Throws std::domain_error when the point is at or
// behind the camera plane (z <= 0).
Projection project_vertex(const Vec3& x_world, const View& view);

// Non-throwing variant for bulk loops.
std::optional<Projection> try_project(const Vec3& x_world, const View& view);

// Inverts project_vertex: pixel + Euclidean camera distance back to world.
Vec3 backproject_distance(const Vec2& pixel, double distance, const View& view);

// Pixel + planar camera-space z back to a camera-frame point (depth maps
// store planar z).
Vec3 backproject_planar_z(const Vec2& pixel, double z, const CameraIntrinsics& intr);

// World->camera pose looking from `eye` toward `target`: camera z is the
// viewing direction, x is right-handed against the `up` hint. Throws when
// eye == target or the viewing direction is parallel to `up`.
CameraPose look_at(const Vec3& eye, const Vec3& target, const Vec3& up = Vec3(0, 1, 0));

}  // namespace irmesh
