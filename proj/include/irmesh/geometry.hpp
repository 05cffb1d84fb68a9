#pragma once

#include <Eigen/Dense>

#include <array>
#include <string>
#include <vector>

namespace irmesh {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

// Triangle mesh in world millimeters. Faces are counter-clockwise when seen
// from outside, so accumulated cross products point outward.
struct TriangleMesh {
    std::vector<Vec3> vertices;
    std::vector<std::array<int, 3>> faces;
    std::vector<Vec3> normals;  // per-vertex unit normals, empty until computed

    // Adjacency, built by build_adjacency(). neighbors[v] is the one-ring in
    // winding order for manifold vertices, sorted ascending otherwise.
    std::vector<std::vector<int>> neighbors;
    std::vector<std::vector<int>> incident_faces;

    int vertex_count() const { return static_cast<int>(vertices.size()); }
    int face_count() const { return static_cast<int>(faces.size()); }
    bool has_adjacency() const { return neighbors.size() == vertices.size(); }
    bool has_normals() const { return normals.size() == vertices.size(); }
};

// Single-view depth map in millimeters, 0 marks invalid pixels. Whether a
// value is planar z (sensor convention) or Euclidean ray distance
// (rasterize_depth) is documented at each producer.
struct DepthMap {
    int width = 0;
    int height = 0;
    std::vector<double> depth;

    double at(int x, int y) const { return depth[static_cast<size_t>(y) * width + x]; }
    double& at(int x, int y) { return depth[static_cast<size_t>(y) * width + x]; }
    bool valid(int x, int y) const { return at(x, y) > 0.0; }
    static DepthMap zeros(int w, int h) { return DepthMap{w, h, std::vector<double>(static_cast<size_t>(w) * h, 0.0)}; }
};

// Throws std::invalid_argument if face indices are out of range or degenerate.
void validate_faces(const TriangleMesh& mesh);

// Populates neighbors / incident_faces. One-rings are ordered by walking
// directed edges where the vertex is manifold.
void build_adjacency(TriangleMesh& mesh);

// Area-weighted per-vertex normals, oriented by face winding. Returns the
// indices of vertices whose incident faces all have zero area; their normal
// is set to +z as a placeholder.
std::vector<int> compute_vertex_normals(TriangleMesh& mesh);

// Interior edges with other than two incident faces (or inconsistent
// winding). Empty result means the mesh is manifold enough to remesh.
std::vector<std::pair<int, int>> nonmanifold_edges(const TriangleMesh& mesh);

double mean_edge_length(const TriangleMesh& mesh);
// Coefficient of variation (stddev / mean) of edge lengths.
double edge_length_cv(const TriangleMesh& mesh);
double bounding_box_diagonal(const TriangleMesh& mesh);
double surface_area(const TriangleMesh& mesh);

// Uniform-weight Laplacian smoothing: v += lambda * (ring centroid - v),
// repeated `iterations` times. Topology is untouched.
void laplacian_smooth(TriangleMesh& mesh, int iterations, double lambda = 0.5);

// Convenience constructors used by tests and synthetic scenes.
TriangleMesh make_icosphere(double radius, int subdivisions, const Vec3& center = Vec3::Zero());
TriangleMesh make_grid_plane(double width_mm, double height_mm, int nx, int ny, const Vec3& origin = Vec3::Zero());

}  // namespace irmesh
