#include "irmesh/surface_query.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace irmesh {

// Ericson, Real-Time Collision Detection, 5.1.5.
Vec3 closest_point_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c) {
    const Vec3 ab = b - a, ac = c - a, ap = p - a;
    const double d1 = ab.dot(ap), d2 = ac.dot(ap);
    if (d1 <= 0.0 && d2 <= 0.0) return a;

    const Vec3 bp = p - b;
    const double d3 = ab.dot(bp), d4 = ac.dot(bp);
    if (d3 >= 0.0 && d4 <= d3) return b;

    const double vc = d1 * d4 - d3 * d2;
    if (vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0) return a + (d1 / (d1 - d3)) * ab;

    const Vec3 cp = p - c;
    const double d5 = ab.dot(cp), d6 = ac.dot(cp);
    if (d6 >= 0.0 && d5 <= d6) return c;

    const double vb = d5 * d2 - d1 * d6;
    if (vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0) return a + (d2 / (d2 - d6)) * ac;

    const double va = d3 * d6 - d5 * d4;
    if (va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0) {
        const double w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return b + w * (c - b);
    }

    const double denom = 1.0 / (va + vb + vc);
    return a + ab * (vb * denom) + ac * (vc * denom);
}

SurfaceQuery::SurfaceQuery(const TriangleMesh& mesh) : mesh_(mesh) {
    const int nf = mesh.face_count();
    tri_order_.resize(nf);
    std::iota(tri_order_.begin(), tri_order_.end(), 0);
    centroids_.resize(nf);
    for (int f = 0; f < nf; ++f) {
        const auto& [a, b, c] = mesh.faces[f];
        centroids_[f] = (mesh.vertices[a] + mesh.vertices[b] + mesh.vertices[c]) / 3.0;
    }
    nodes_.reserve(2 * std::max(nf, 1));
    if (nf > 0) build(0, nf);
}

int SurfaceQuery::build(int begin, int end) {
    const int idx = static_cast<int>(nodes_.size());
    nodes_.push_back({});
    Vec3 lo = Vec3::Constant(std::numeric_limits<double>::max());
    Vec3 hi = Vec3::Constant(std::numeric_limits<double>::lowest());
    for (int i = begin; i < end; ++i) {
        for (int vi : mesh_.faces[tri_order_[i]]) {
            lo = lo.cwiseMin(mesh_.vertices[vi]);
            hi = hi.cwiseMax(mesh_.vertices[vi]);
        }
    }
    nodes_[idx].lo = lo;
    nodes_[idx].hi = hi;

    constexpr int kLeafSize = 8;
    if (end - begin <= kLeafSize) {
        nodes_[idx].begin = begin;
        nodes_[idx].end = end;
        return idx;
    }

    int axis;
    (hi - lo).maxCoeff(&axis);
    const int mid = (begin + end) / 2;
    std::nth_element(tri_order_.begin() + begin, tri_order_.begin() + mid, tri_order_.begin() + end,
                     [&](int a, int b) { return centroids_[a][axis] < centroids_[b][axis]; });

    const int left = build(begin, mid);
    const int right = build(mid, end);
    nodes_[idx].left = left;
    nodes_[idx].right = right;
    return idx;
}

namespace {

inline double box_distance_sq(const Vec3& p, const Vec3& lo, const Vec3& hi) {
    double d2 = 0.0;
    for (int k = 0; k < 3; ++k) {
        const double d = std::max({lo[k] - p[k], 0.0, p[k] - hi[k]});
        d2 += d * d;
    }
    return d2;
}

}  // namespace

void SurfaceQuery::query_node(int node, const Vec3& p, Hit& best) const {
    const Node& n = nodes_[node];
    if (n.left < 0) {
        for (int i = n.begin; i < n.end; ++i) {
            const int f = tri_order_[i];
            const auto& [a, b, c] = mesh_.faces[f];
            const Vec3 q = closest_point_on_triangle(p, mesh_.vertices[a], mesh_.vertices[b], mesh_.vertices[c]);
            const double d = (q - p).norm();
            if (d < best.distance) {
                best.distance = d;
                best.point = q;
                best.face = f;
            }
        }
        return;
    }
    const double dl = box_distance_sq(p, nodes_[n.left].lo, nodes_[n.left].hi);
    const double dr = box_distance_sq(p, nodes_[n.right].lo, nodes_[n.right].hi);
    const int first = dl <= dr ? n.left : n.right;
    const int second = dl <= dr ? n.right : n.left;
    const double dfirst = std::min(dl, dr), dsecond = std::max(dl, dr);
    if (dfirst < best.distance * best.distance) query_node(first, p, best);
    if (dsecond < best.distance * best.distance) query_node(second, p, best);
}

SurfaceQuery::Hit SurfaceQuery::closest_point(const Vec3& query) const {
    Hit best;
    best.distance = std::numeric_limits<double>::max();
    best.point = query;
    if (!nodes_.empty()) query_node(0, query, best);
    return best;
}

}  // namespace irmesh
