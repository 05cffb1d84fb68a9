#pragma once

#include "irmesh/camera.hpp"

#include <limits>
#include <vector>

namespace irmesh {

// Per-pixel rasterization output for one view. `distance` is the Euclidean
// distance from the camera center along the pixel ray (not planar z), so it
// can be compared directly against projected vertex distances and fed into
// the inverse-square shading term. `bary` holds perspective-correct
// barycentric weights of the covering face.
struct RasterBuffers {
    int width = 0;
    int height = 0;
    std::vector<double> distance;  // +inf where no surface
    std::vector<int> face;         // -1 where no surface
    std::vector<double> bary;      // 3 per pixel

    size_t index(int x, int y) const { return static_cast<size_t>(y) * width + x; }
    bool covered(int x, int y) const { return face[index(x, y)] >= 0; }

    // World-space surface point of a covered pixel, reconstructed from the
    // stored barycentric weights.
    Vec3 surface_point(int x, int y, const TriangleMesh& mesh) const;
};

// Z-buffered triangle rasterization. Pixel centers sit at integer
// coordinates. Faces with any vertex at or behind the camera are skipped
// (inputs are expected to lie fully in front of the camera).
RasterBuffers rasterize_mesh(const TriangleMesh& mesh, const View& view);

// Depth buffer only: Euclidean camera-ray distance per covered pixel,
// 0 where the background shows through.
DepthMap rasterize_depth(const TriangleMesh& mesh, const View& view);

// Per-vertex visibility for one view plus the depth buffer that backs it.
struct VisibilityMap {
    std::vector<uint8_t> visible;  // one flag per vertex
    DepthMap depth;                // ray distances from rasterize_depth

    int count() const;
};

// Default occlusion bias: 2x mean edge length, which absorbs rasterization
// quantization at the scales we work at.
double default_visibility_bias(const TriangleMesh& mesh);

// A vertex is visible when it projects inside the image, faces the camera
// (n . (camera center - x) > 0), and its ray distance is within `bias_mm`
// of the depth buffer at its pixel. Requires mesh normals.
VisibilityMap compute_visibility(const TriangleMesh& mesh, const View& view, double bias_mm);

// Shaded render plus the mask of pixels whose pre-gamma intensity clipped
// at 1; downstream estimators skip those.
struct RenderResult {
    ShadingImage image;
    std::vector<uint8_t> saturated;
    RasterBuffers raster;
};

// Synthesizes the view's IR image from the mesh under the near-point-light
// model. Position, normal, and albedo are interpolated per pixel from the
// rasterization (normals renormalized), the light direction and falloff
// distance are taken from the interpolated surface point to
// view.light_position_world(). Background pixels are 0.
RenderResult render_shading_image(const TriangleMesh& mesh, const View& view,
                                  const std::vector<double>& vertex_albedo,
                                  const LightModel& light);

}  // namespace irmesh
