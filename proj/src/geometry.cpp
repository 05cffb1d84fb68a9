#include "irmesh/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>
#include <stdexcept>
#include <unordered_map>

namespace irmesh {

void validate_faces(const TriangleMesh& mesh) {
    const int n = mesh.vertex_count();
    for (size_t f = 0; f < mesh.faces.size(); ++f) {
        const auto& [a, b, c] = mesh.faces[f];
        if (a < 0 || b < 0 || c < 0 || a >= n || b >= n || c >= n)
            throw std::invalid_argument("face " + std::to_string(f) + " has vertex index out of range");
        if (a == b || b == c || a == c)
            throw std::invalid_argument("face " + std::to_string(f) + " is degenerate");
    }
}

namespace {

// Key for a directed edge a->b.
inline uint64_t dir_edge_key(int a, int b) {
    return (static_cast<uint64_t>(static_cast<uint32_t>(a)) << 32) | static_cast<uint32_t>(b);
}

}  // namespace

void build_adjacency(TriangleMesh& mesh) {
    validate_faces(mesh);
    const int n = mesh.vertex_count();
    mesh.neighbors.assign(n, {});
    mesh.incident_faces.assign(n, {});

    // Directed edge v->a  ->  third vertex of the face (v, a, b).
    std::unordered_map<uint64_t, int> next_in_face;
    next_in_face.reserve(mesh.faces.size() * 3);
    std::unordered_map<uint64_t, int> reverse_count;
    reverse_count.reserve(mesh.faces.size() * 3);

    for (size_t f = 0; f < mesh.faces.size(); ++f) {
        const auto& fc = mesh.faces[f];
        for (int k = 0; k < 3; ++k) {
            const int v = fc[k], a = fc[(k + 1) % 3], b = fc[(k + 2) % 3];
            mesh.incident_faces[v].push_back(static_cast<int>(f));
            next_in_face[dir_edge_key(v, a)] = b;
            reverse_count[dir_edge_key(v, a)] += 1;
        }
    }

    std::vector<int> unordered;
    for (int v = 0; v < n; ++v) {
        // Collect the ring; try the ordered walk first.
        unordered.clear();
        for (int f : mesh.incident_faces[v]) {
            for (int vi : mesh.faces[f]) {
                if (vi != v) unordered.push_back(vi);
            }
        }
        std::sort(unordered.begin(), unordered.end());
        unordered.erase(std::unique(unordered.begin(), unordered.end()), unordered.end());
        if (unordered.empty()) continue;

        // A duplicated directed edge means a non-manifold fan; fall back.
        bool walkable = true;
        for (int u : unordered) {
            auto it = reverse_count.find(dir_edge_key(v, u));
            if (it != reverse_count.end() && it->second > 1) walkable = false;
        }

        std::vector<int> ring;
        if (walkable) {
            // Start at a boundary neighbor if one exists: u such that v->u has
            // a face but u->v does not.
            int start = -1;
            for (int u : unordered) {
                const bool out = next_in_face.count(dir_edge_key(v, u)) > 0;
                const bool in = next_in_face.count(dir_edge_key(u, v)) > 0;
                if (out && !in) { start = u; break; }
            }
            if (start < 0) start = unordered.front();
            int cur = start;
            while (ring.size() < unordered.size()) {
                ring.push_back(cur);
                auto it = next_in_face.find(dir_edge_key(v, cur));
                if (it == next_in_face.end()) break;
                cur = it->second;
                if (cur == start) break;
            }
        }
        if (ring.size() == unordered.size()) {
            mesh.neighbors[v] = std::move(ring);
        } else {
            mesh.neighbors[v] = unordered;  // sorted fallback
        }
    }
}

std::vector<int> compute_vertex_normals(TriangleMesh& mesh) {
    validate_faces(mesh);
    const int n = mesh.vertex_count();
    mesh.normals.assign(n, Vec3::Zero());
    for (const auto& [a, b, c] : mesh.faces) {
        const Vec3 fn = (mesh.vertices[b] - mesh.vertices[a]).cross(mesh.vertices[c] - mesh.vertices[a]);
        mesh.normals[a] += fn;
        mesh.normals[b] += fn;
        mesh.normals[c] += fn;
    }
    std::vector<int> degenerate;
    for (int v = 0; v < n; ++v) {
        const double len = mesh.normals[v].norm();
        if (len > 0.0) {
            mesh.normals[v] /= len;
        } else {
            mesh.normals[v] = Vec3::UnitZ();
            degenerate.push_back(v);
        }
    }
    return degenerate;
}

std::vector<std::pair<int, int>> nonmanifold_edges(const TriangleMesh& mesh) {
    std::map<std::pair<int, int>, int> count;
    for (const auto& fc : mesh.faces) {
        for (int k = 0; k < 3; ++k) {
            int a = fc[k], b = fc[(k + 1) % 3];
            if (a > b) std::swap(a, b);
            count[{a, b}] += 1;
        }
    }
    std::vector<std::pair<int, int>> bad;
    for (const auto& [edge, c] : count) {
        if (c > 2) bad.push_back(edge);
    }
    return bad;
}

namespace {

std::vector<double> unique_edge_lengths(const TriangleMesh& mesh) {
    std::set<std::pair<int, int>> seen;
    std::vector<double> lengths;
    for (const auto& fc : mesh.faces) {
        for (int k = 0; k < 3; ++k) {
            int a = fc[k], b = fc[(k + 1) % 3];
            if (a > b) std::swap(a, b);
            if (seen.insert({a, b}).second)
                lengths.push_back((mesh.vertices[a] - mesh.vertices[b]).norm());
        }
    }
    return lengths;
}

}  // namespace

double mean_edge_length(const TriangleMesh& mesh) {
    const auto lengths = unique_edge_lengths(mesh);
    if (lengths.empty()) return 0.0;
    return std::accumulate(lengths.begin(), lengths.end(), 0.0) / static_cast<double>(lengths.size());
}

double edge_length_cv(const TriangleMesh& mesh) {
    const auto lengths = unique_edge_lengths(mesh);
    if (lengths.empty()) return 0.0;
    const double mean = std::accumulate(lengths.begin(), lengths.end(), 0.0) / lengths.size();
    double var = 0.0;
    for (double l : lengths) var += (l - mean) * (l - mean);
    var /= lengths.size();
    return mean > 0.0 ? std::sqrt(var) / mean : 0.0;
}

double bounding_box_diagonal(const TriangleMesh& mesh) {
    if (mesh.vertices.empty()) return 0.0;
    Vec3 lo = mesh.vertices.front(), hi = mesh.vertices.front();
    for (const Vec3& v : mesh.vertices) {
        lo = lo.cwiseMin(v);
        hi = hi.cwiseMax(v);
    }
    return (hi - lo).norm();
}

double surface_area(const TriangleMesh& mesh) {
    double area = 0.0;
    for (const auto& [a, b, c] : mesh.faces)
        area += 0.5 * (mesh.vertices[b] - mesh.vertices[a]).cross(mesh.vertices[c] - mesh.vertices[a]).norm();
    return area;
}

void laplacian_smooth(TriangleMesh& mesh, int iterations, double lambda) {
    if (!mesh.has_adjacency()) build_adjacency(mesh);
    std::vector<Vec3> next(mesh.vertices.size());
    for (int it = 0; it < iterations; ++it) {
        for (int v = 0; v < mesh.vertex_count(); ++v) {
            const auto& ring = mesh.neighbors[v];
            if (ring.empty()) {
                next[v] = mesh.vertices[v];
                continue;
            }
            Vec3 centroid = Vec3::Zero();
            for (int u : ring) centroid += mesh.vertices[u];
            centroid /= static_cast<double>(ring.size());
            next[v] = mesh.vertices[v] + lambda * (centroid - mesh.vertices[v]);
        }
        mesh.vertices.swap(next);
    }
}

TriangleMesh make_icosphere(double radius, int subdivisions, const Vec3& center) {
    const double t = (1.0 + std::sqrt(5.0)) / 2.0;
    std::vector<Vec3> verts = {
        {-1, t, 0}, {1, t, 0}, {-1, -t, 0}, {1, -t, 0},
        {0, -1, t}, {0, 1, t}, {0, -1, -t}, {0, 1, -t},
        {t, 0, -1}, {t, 0, 1}, {-t, 0, -1}, {-t, 0, 1},
    };
    for (auto& v : verts) v.normalize();
    std::vector<std::array<int, 3>> faces = {
        {0, 11, 5}, {0, 5, 1}, {0, 1, 7}, {0, 7, 10}, {0, 10, 11},
        {1, 5, 9}, {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
        {3, 9, 4}, {3, 4, 2}, {3, 2, 6}, {3, 6, 8}, {3, 8, 9},
        {4, 9, 5}, {2, 4, 11}, {6, 2, 10}, {8, 6, 7}, {9, 8, 1},
    };
    for (int s = 0; s < subdivisions; ++s) {
        std::map<std::pair<int, int>, int> midpoint;
        auto mid = [&](int a, int b) {
            const auto key = std::minmax(a, b);
            auto it = midpoint.find(key);
            if (it != midpoint.end()) return it->second;
            const int idx = static_cast<int>(verts.size());
            verts.push_back((verts[a] + verts[b]).normalized());
            midpoint[key] = idx;
            return idx;
        };
        std::vector<std::array<int, 3>> out;
        out.reserve(faces.size() * 4);
        for (const auto& [a, b, c] : faces) {
            const int ab = mid(a, b), bc = mid(b, c), ca = mid(c, a);
            out.push_back({a, ab, ca});
            out.push_back({b, bc, ab});
            out.push_back({c, ca, bc});
            out.push_back({ab, bc, ca});
        }
        faces = std::move(out);
    }
    TriangleMesh mesh;
    mesh.faces = std::move(faces);
    mesh.vertices.reserve(verts.size());
    for (const auto& v : verts) mesh.vertices.push_back(center + radius * v);
    build_adjacency(mesh);
    compute_vertex_normals(mesh);
    return mesh;
}

TriangleMesh make_grid_plane(double width_mm, double height_mm, int nx, int ny, const Vec3& origin) {
    TriangleMesh mesh;
    mesh.vertices.reserve(static_cast<size_t>(nx) * ny);
    for (int j = 0; j < ny; ++j) {
        for (int i = 0; i < nx; ++i) {
            const double x = width_mm * (static_cast<double>(i) / (nx - 1) - 0.5);
            const double y = height_mm * (static_cast<double>(j) / (ny - 1) - 0.5);
            mesh.vertices.push_back(origin + Vec3(x, y, 0.0));
        }
    }
    auto idx = [nx](int i, int j) { return j * nx + i; };
    for (int j = 0; j + 1 < ny; ++j) {
        for (int i = 0; i + 1 < nx; ++i) {
            // wound so normals point along +z
            mesh.faces.push_back({idx(i, j), idx(i + 1, j), idx(i, j + 1)});
            mesh.faces.push_back({idx(i + 1, j), idx(i + 1, j + 1), idx(i, j + 1)});
        }
    }
    build_adjacency(mesh);
    compute_vertex_normals(mesh);
    return mesh;
}

}  // namespace irmesh
