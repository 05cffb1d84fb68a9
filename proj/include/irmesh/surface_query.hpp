#pragma once

#include "irmesh/geometry.hpp"

namespace irmesh {

// Axis-aligned BVH over the triangles of a fixed mesh, answering nearest
// point-on-surface queries. The mesh must outlive the query structure.
class SurfaceQuery {
public:
    explicit SurfaceQuery(const TriangleMesh& mesh);

    struct Hit {
        Vec3 point;      // closest point on the surface
        int face = -1;
        double distance = 0.0;
    };

    Hit closest_point(const Vec3& query) const;
    double distance(const Vec3& query) const { return closest_point(query).distance; }

private:
    struct Node {
        Vec3 lo, hi;
        int left = -1, right = -1;   // children, -1 for leaves
        int begin = 0, end = 0;      // triangle range for leaves
    };

    int build(int begin, int end);
    void query_node(int node, const Vec3& p, Hit& best) const;

    const TriangleMesh& mesh_;
    std::vector<int> tri_order_;
    std::vector<Vec3> centroids_;
    std::vector<Node> nodes_;
};

// Closest point on triangle (a, b, c) to p.
Vec3 closest_point_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c);

}  // namespace irmesh
