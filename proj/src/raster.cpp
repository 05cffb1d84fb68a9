#include "irmesh/raster.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace irmesh {

Vec3 RasterBuffers::surface_point(int x, int y, const TriangleMesh& mesh) const {
    const size_t i = index(x, y);
    const auto& f = mesh.faces[face[i]];
    return bary[3 * i + 0] * mesh.vertices[f[0]] + bary[3 * i + 1] * mesh.vertices[f[1]] +
           bary[3 * i + 2] * mesh.vertices[f[2]];
}

RasterBuffers rasterize_mesh(const TriangleMesh& mesh, const View& view) {
    const int w = view.intrinsics.width;
    const int h = view.intrinsics.height;
    RasterBuffers buf;
    buf.width = w;
    buf.height = h;
    buf.distance.assign(static_cast<size_t>(w) * h, std::numeric_limits<double>::infinity());
    buf.face.assign(static_cast<size_t>(w) * h, -1);
    buf.bary.assign(static_cast<size_t>(w) * h * 3, 0.0);

    std::vector<std::optional<Projection>> proj(mesh.vertices.size());
    for (size_t i = 0; i < mesh.vertices.size(); ++i) proj[i] = try_project(mesh.vertices[i], view);

    // Per-pixel ray norms turn interpolated planar z into Euclidean distance.
    std::vector<double> ray_norm(static_cast<size_t>(w) * h);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const double rx = (x - view.intrinsics.cx) / view.intrinsics.fx;
            const double ry = (y - view.intrinsics.cy) / view.intrinsics.fy;
            ray_norm[static_cast<size_t>(y) * w + x] = std::sqrt(rx * rx + ry * ry + 1.0);
        }

    for (int fi = 0; fi < mesh.face_count(); ++fi) {
        const auto& f = mesh.faces[fi];
        const auto& p0 = proj[f[0]];
        const auto& p1 = proj[f[1]];
        const auto& p2 = proj[f[2]];
        if (!p0 || !p1 || !p2) continue;

        const Vec2 s0 = p0->pixel, s1 = p1->pixel, s2 = p2->pixel;
        const double area2 = (s1.x() - s0.x()) * (s2.y() - s0.y()) - (s1.y() - s0.y()) * (s2.x() - s0.x());
        if (std::abs(area2) < 1e-12) continue;

        const int x_min = std::max(0, static_cast<int>(std::ceil(std::min({s0.x(), s1.x(), s2.x()}))));
        const int x_max = std::min(w - 1, static_cast<int>(std::floor(std::max({s0.x(), s1.x(), s2.x()}))));
        const int y_min = std::max(0, static_cast<int>(std::ceil(std::min({s0.y(), s1.y(), s2.y()}))));
        const int y_max = std::min(h - 1, static_cast<int>(std::floor(std::max({s0.y(), s1.y(), s2.y()}))));

        const double inv_z0 = 1.0 / p0->z, inv_z1 = 1.0 / p1->z, inv_z2 = 1.0 / p2->z;
        for (int y = y_min; y <= y_max; ++y) {
            for (int x = x_min; x <= x_max; ++x) {
                // Edge functions opposite each vertex; same sign as area2
                // inside the triangle regardless of winding on screen.
                const double e0 = (s2.x() - s1.x()) * (y - s1.y()) - (s2.y() - s1.y()) * (x - s1.x());
                const double e1 = (s0.x() - s2.x()) * (y - s2.y()) - (s0.y() - s2.y()) * (x - s2.x());
                const double e2 = (s1.x() - s0.x()) * (y - s0.y()) - (s1.y() - s0.y()) * (x - s0.x());
                const double l0 = e0 / area2, l1 = e1 / area2, l2 = e2 / area2;
                if (l0 < 0.0 || l1 < 0.0 || l2 < 0.0) continue;

                const double inv_z = l0 * inv_z0 + l1 * inv_z1 + l2 * inv_z2;
                const double z = 1.0 / inv_z;
                const size_t idx = static_cast<size_t>(y) * w + x;
                const double dist = z * ray_norm[idx];
                if (dist >= buf.distance[idx]) continue;

                buf.distance[idx] = dist;
                buf.face[idx] = fi;
                buf.bary[3 * idx + 0] = l0 * inv_z0 * z;
                buf.bary[3 * idx + 1] = l1 * inv_z1 * z;
                buf.bary[3 * idx + 2] = l2 * inv_z2 * z;
            }
        }
    }
    return buf;
}

DepthMap rasterize_depth(const TriangleMesh& mesh, const View& view) {
    const RasterBuffers buf = rasterize_mesh(mesh, view);
    DepthMap depth = DepthMap::zeros(buf.width, buf.height);
    for (int y = 0; y < buf.height; ++y)
        for (int x = 0; x < buf.width; ++x)
            if (buf.covered(x, y)) depth.at(x, y) = buf.distance[buf.index(x, y)];
    return depth;
}

int VisibilityMap::count() const {
    int n = 0;
    for (uint8_t v : visible) n += v;
    return n;
}

double default_visibility_bias(const TriangleMesh& mesh) { return 2.0 * mean_edge_length(mesh); }

VisibilityMap compute_visibility(const TriangleMesh& mesh, const View& view, double bias_mm) {
    if (!mesh.has_normals()) throw std::invalid_argument("compute_visibility: mesh normals missing");
    VisibilityMap vis;
    vis.depth = rasterize_depth(mesh, view);
    vis.visible.assign(mesh.vertices.size(), 0);

    const Vec3 center = view.pose.camera_center();
    for (size_t i = 0; i < mesh.vertices.size(); ++i) {
        const auto p = try_project(mesh.vertices[i], view);
        if (!p) continue;
        const int px = static_cast<int>(std::lround(p->pixel.x()));
        const int py = static_cast<int>(std::lround(p->pixel.y()));
        if (px < 0 || px >= vis.depth.width || py < 0 || py >= vis.depth.height) continue;
        if (mesh.normals[i].dot(center - mesh.vertices[i]) <= 0.0) continue;
        if (!vis.depth.valid(px, py)) continue;
        if (p->distance <= vis.depth.at(px, py) + bias_mm) vis.visible[i] = 1;
    }
    return vis;
}

RenderResult render_shading_image(const TriangleMesh& mesh, const View& view,
                                  const std::vector<double>& vertex_albedo,
                                  const LightModel& light) {
    if (!mesh.has_normals()) throw std::invalid_argument("render_shading_image: mesh normals missing");
    if (vertex_albedo.size() != mesh.vertices.size())
        throw std::invalid_argument("render_shading_image: albedo count does not match vertices");
    light.validate();

    RenderResult out;
    out.raster = rasterize_mesh(mesh, view);
    out.image = ShadingImage::zeros(out.raster.width, out.raster.height);
    out.image.gamma_applied = light.gamma != 1.0;
    out.saturated.assign(out.image.intensity.size(), 0);

    const Vec3 light_pos = view.light_position_world();
    for (int y = 0; y < out.raster.height; ++y) {
        for (int x = 0; x < out.raster.width; ++x) {
            if (!out.raster.covered(x, y)) continue;
            const size_t idx = out.raster.index(x, y);
            const auto& f = mesh.faces[out.raster.face[idx]];
            const double* b = &out.raster.bary[3 * idx];

            const Vec3 point = b[0] * mesh.vertices[f[0]] + b[1] * mesh.vertices[f[1]] +
                               b[2] * mesh.vertices[f[2]];
            Vec3 normal = b[0] * mesh.normals[f[0]] + b[1] * mesh.normals[f[1]] +
                          b[2] * mesh.normals[f[2]];
            const double norm = normal.norm();
            if (norm < 1e-12) continue;
            normal /= norm;
            const double albedo =
                b[0] * vertex_albedo[f[0]] + b[1] * vertex_albedo[f[1]] + b[2] * vertex_albedo[f[2]];

            Vec3 to_light = light_pos - point;
            const double d = to_light.norm();
            if (d <= 0.0) continue;
            to_light /= d;

            const double lambert = std::max(normal.dot(to_light), 0.0);
            const double linear = light.brightness_c * albedo / (d * d) * lambert + light.ambient;
            if (linear > 1.0) out.saturated[idx] = 1;
            const double clamped = std::min(linear, 1.0);
            out.image.intensity[idx] =
                light.gamma == 1.0 ? clamped : std::pow(clamped, light.gamma);
        }
    }
    return out;
}

}  // namespace irmesh
