#include "irmesh/camera.hpp"

#include <cmath>
#include <stdexcept>

namespace irmesh {

void CameraIntrinsics::validate() const {
    if (!(fx > 0.0) || !(fy > 0.0)) throw std::invalid_argument("focal lengths must be positive");
    if (width <= 0 || height <= 0) throw std::invalid_argument("image size must be positive");
    if (cx < 0.0 || cx >= width || cy < 0.0 || cy >= height)
        throw std::invalid_argument("principal point outside image");
}

void CameraPose::validate() const {
    const Mat3 rtr = rotation.transpose() * rotation;
    if ((rtr - Mat3::Identity()).cwiseAbs().maxCoeff() > 1e-9)
        throw std::invalid_argument("camera rotation is not orthonormal");
    if (std::abs(rotation.determinant() - 1.0) > 1e-9)
        throw std::invalid_argument("camera rotation determinant is not +1");
}

void View::validate() const {
    intrinsics.validate();
    pose.validate();
    if (image.width != intrinsics.width || image.height != intrinsics.height)
        throw std::invalid_argument("shading image resolution does not match intrinsics");
}

std::optional<Projection> try_project(const Vec3& x_world, const View& view) {
    const Vec3 xc = view.pose.to_camera(x_world);
    if (!(xc.z() > 0.0)) return std::nullopt;
    Projection p;
    p.z = xc.z();
    p.distance = xc.norm();
    p.pixel = Vec2(view.intrinsics.fx * xc.x() / xc.z() + view.intrinsics.cx,
                   view.intrinsics.fy * xc.y() / xc.z() + view.intrinsics.cy);
    return p;
}

Projection project_vertex(const Vec3& x_world, const View& view) {
    auto p = try_project(x_world, view);
    if (!p) throw std::domain_error("project_vertex: point at or behind the camera");
    return *p;
}

Vec3 backproject_distance(const Vec2& pixel, double distance, const View& view) {
    const Vec3 ray((pixel.x() - view.intrinsics.cx) / view.intrinsics.fx,
                   (pixel.y() - view.intrinsics.cy) / view.intrinsics.fy, 1.0);
    const Vec3 xc = ray * (distance / ray.norm());
    return view.pose.to_world(xc);
}

Vec3 backproject_planar_z(const Vec2& pixel, double z, const CameraIntrinsics& intr) {
    return Vec3((pixel.x() - intr.cx) / intr.fx * z, (pixel.y() - intr.cy) / intr.fy * z, z);
}

CameraPose look_at(const Vec3& eye, const Vec3& target, const Vec3& up) {
    const Vec3 forward = target - eye;
    if (forward.norm() < 1e-12) throw std::invalid_argument("look_at: eye equals target");
    const Vec3 z = forward.normalized();
    Vec3 x = up.cross(z);
    if (x.norm() < 1e-9) throw std::invalid_argument("look_at: view direction parallel to up");
    x.normalize();
    const Vec3 y = z.cross(x);

    CameraPose pose;
    pose.rotation.row(0) = x;
    pose.rotation.row(1) = y;
    pose.rotation.row(2) = z;
    pose.translation = -(pose.rotation * eye);
    return pose;
}

}  // namespace irmesh
