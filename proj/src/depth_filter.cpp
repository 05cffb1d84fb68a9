#include "irmesh/depth_filter.hpp"

#include <cmath>
#include <stdexcept>

namespace irmesh {

DepthMap joint_bilateral_depth_filter(const DepthMap& depth, const ShadingImage& guide,
                                      double spatial_sigma, double range_sigma,
                                      double depth_sigma) {
    if (depth.width != guide.width || depth.height != guide.height)
        throw std::invalid_argument("joint_bilateral_depth_filter: depth/guide resolution mismatch");
    if (!(spatial_sigma > 0.0) || !std::isfinite(spatial_sigma))
        throw std::invalid_argument("joint_bilateral_depth_filter: spatial sigma must be positive");

    const bool use_range = range_sigma > 0.0 && std::isfinite(range_sigma);
    const bool use_depth = depth_sigma > 0.0 && std::isfinite(depth_sigma);
    const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * spatial_sigma)));
    const double inv_2ss = 1.0 / (2.0 * spatial_sigma * spatial_sigma);
    const double inv_2rs = use_range ? 1.0 / (2.0 * range_sigma * range_sigma) : 0.0;
    const double inv_2ds = use_depth ? 1.0 / (2.0 * depth_sigma * depth_sigma) : 0.0;

    DepthMap out = DepthMap::zeros(depth.width, depth.height);
    for (int y = 0; y < depth.height; ++y) {
        for (int x = 0; x < depth.width; ++x) {
            if (!depth.valid(x, y)) continue;
            const double d0 = depth.at(x, y);
            const double g0 = guide.at(x, y);

            double num = 0.0, den = 0.0;
            for (int dy = -radius; dy <= radius; ++dy) {
                const int ny = y + dy;
                if (ny < 0 || ny >= depth.height) continue;
                for (int dx = -radius; dx <= radius; ++dx) {
                    const int nx = x + dx;
                    if (nx < 0 || nx >= depth.width) continue;
                    if (!depth.valid(nx, ny)) continue;
                    const double d = depth.at(nx, ny);
                    double logw = -(dx * dx + dy * dy) * inv_2ss;
                    if (use_range) {
                        const double dg = guide.at(nx, ny) - g0;
                        logw -= dg * dg * inv_2rs;
                    }
                    if (use_depth) {
                        const double dd = d - d0;
                        logw -= dd * dd * inv_2ds;
                    }
                    const double wgt = std::exp(logw);
                    num += wgt * d;
                    den += wgt;
                }
            }
            out.at(x, y) = num / den;  // den >= the center weight > 0
        }
    }
    return out;
}

TriangleMesh depth_map_to_mesh(const DepthMap& depth, const CameraIntrinsics& intrinsics,
                               double discontinuity_mm) {
    intrinsics.validate();
    if (depth.width != intrinsics.width || depth.height != intrinsics.height)
        throw std::invalid_argument("depth_map_to_mesh: depth/intrinsics resolution mismatch");

    TriangleMesh mesh;
    std::vector<int> index(static_cast<size_t>(depth.width) * depth.height, -1);
    for (int y = 0; y < depth.height; ++y) {
        for (int x = 0; x < depth.width; ++x) {
            if (!depth.valid(x, y)) continue;
            index[static_cast<size_t>(y) * depth.width + x] = mesh.vertex_count();
            mesh.vertices.push_back(backproject_planar_z(Vec2(x, y), depth.at(x, y), intrinsics));
        }
    }
    if (mesh.vertex_count() < 3)
        throw std::invalid_argument("depth_map_to_mesh: fewer than 3 valid pixels");

    auto vert = [&](int x, int y) { return index[static_cast<size_t>(y) * depth.width + x]; };
    auto close = [&](int xa, int ya, int xb, int yb) {
        return std::abs(depth.at(xa, ya) - depth.at(xb, yb)) <= discontinuity_mm;
    };
    // wound so normals face the camera (-z); image y grows downward
    auto add_face = [&](int x0, int y0, int x1, int y1, int x2, int y2) {
        if (vert(x0, y0) < 0 || vert(x1, y1) < 0 || vert(x2, y2) < 0) return;
        if (!close(x0, y0, x1, y1) || !close(x1, y1, x2, y2) || !close(x0, y0, x2, y2)) return;
        mesh.faces.push_back({vert(x0, y0), vert(x1, y1), vert(x2, y2)});
    };
    for (int y = 0; y + 1 < depth.height; ++y) {
        for (int x = 0; x + 1 < depth.width; ++x) {
            add_face(x, y, x, y + 1, x + 1, y);
            add_face(x + 1, y, x, y + 1, x + 1, y + 1);
        }
    }
    build_adjacency(mesh);
    compute_vertex_normals(mesh);
    return mesh;
}

}  // namespace irmesh
