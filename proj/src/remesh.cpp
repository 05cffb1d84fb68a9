#include "irmesh/remesh.hpp"

#include "irmesh/surface_query.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

namespace irmesh {

namespace {

// Mutable working copy. Faces and vertices are tombstoned rather than erased
// so indices stay stable within a pass.
struct Work {
    std::vector<Vec3> pos;
    std::vector<std::array<int, 3>> faces;
    std::vector<char> face_alive;
    std::vector<char> vert_alive;

    int alive_vertices() const {
        int n = 0;
        for (char a : vert_alive) n += a;
        return n;
    }
};

// One undirected edge of the alive faces. Passes scan these in ascending
// (a, b) order, which keeps the whole remesh deterministic.
struct EdgeRec {
    int a, b;    // a < b
    int f0, f1;  // incident faces in ascending order, f1 = -1 on boundary
    int extra;   // incident faces beyond two (0 on a manifold mesh)

    double length(const Work& w) const { return (w.pos[a] - w.pos[b]).norm(); }
};

uint64_t key64(int a, int b) {
    if (a > b) std::swap(a, b);
    return (static_cast<uint64_t>(a) << 32) | static_cast<uint32_t>(b);
}

std::vector<EdgeRec> build_edges(const Work& w) {
    std::vector<std::pair<uint64_t, int>> items;
    items.reserve(3 * w.faces.size());
    for (size_t f = 0; f < w.faces.size(); ++f) {
        if (!w.face_alive[f]) continue;
        const auto& fc = w.faces[f];
        for (int k = 0; k < 3; ++k) items.emplace_back(key64(fc[k], fc[(k + 1) % 3]), static_cast<int>(f));
    }
    std::sort(items.begin(), items.end());

    std::vector<EdgeRec> edges;
    edges.reserve(items.size() / 2 + 1);
    size_t i = 0;
    while (i < items.size()) {
        EdgeRec rec{static_cast<int>(items[i].first >> 32), static_cast<int>(items[i].first & 0xffffffffu),
                    -1, -1, 0};
        for (; i < items.size() && (items[i].first >> 32) == static_cast<uint64_t>(rec.a) &&
               static_cast<int>(items[i].first & 0xffffffffu) == rec.b;
             ++i) {
            if (rec.f0 < 0)
                rec.f0 = items[i].second;
            else if (rec.f1 < 0)
                rec.f1 = items[i].second;
            else
                ++rec.extra;
        }
        edges.push_back(rec);
    }
    return edges;
}

std::vector<char> boundary_flags(const Work& w, const std::vector<EdgeRec>& edges) {
    std::vector<char> boundary(w.pos.size(), 0);
    for (const auto& e : edges) {
        if (e.f1 < 0) {
            boundary[e.a] = 1;
            boundary[e.b] = 1;
        }
    }
    return boundary;
}

// Per-vertex one-rings in ascending order, straight off the sorted edge list.
std::vector<std::vector<int>> neighbor_lists(const Work& w, const std::vector<EdgeRec>& edges) {
    std::vector<std::vector<int>> nb(w.pos.size());
    for (const auto& e : edges) {
        nb[e.a].push_back(e.b);
        nb[e.b].push_back(e.a);
    }
    return nb;
}

// Small sorted-vector set operations; rings are a handful of entries, so
// these beat node-based containers by a wide margin.
bool sv_contains(const std::vector<int>& v, int x) { return std::binary_search(v.begin(), v.end(), x); }

void sv_insert(std::vector<int>& v, int x) {
    const auto it = std::lower_bound(v.begin(), v.end(), x);
    if (it == v.end() || *it != x) v.insert(it, x);
}

void sv_erase(std::vector<int>& v, int x) {
    const auto it = std::lower_bound(v.begin(), v.end(), x);
    if (it != v.end() && *it == x) v.erase(it);
}

Vec3 face_normal(const Work& w, const std::array<int, 3>& fc) {
    return (w.pos[fc[1]] - w.pos[fc[0]]).cross(w.pos[fc[2]] - w.pos[fc[0]]);
}

// Rotation of `fc` so the directed edge a->b leads; returns false when the
// face does not contain that directed edge.
bool rotate_to_edge(const std::array<int, 3>& fc, int a, int b, std::array<int, 3>& out) {
    for (int k = 0; k < 3; ++k) {
        if (fc[k] == a && fc[(k + 1) % 3] == b) {
            out = {a, b, fc[(k + 2) % 3]};
            return true;
        }
    }
    return false;
}

void split_long_edges(Work& w, double l_max) {
    for (int round = 0; round < 10; ++round) {
        const std::vector<EdgeRec> edges = build_edges(w);
        std::vector<const EdgeRec*> longs;
        for (const auto& e : edges)
            if (e.length(w) > l_max) longs.push_back(&e);
        if (longs.empty()) return;

        for (const EdgeRec* e : longs) {
            // splitting against a face another split already replaced would
            // leave a T-junction; defer such edges to the next round
            if (!w.face_alive[e->f0] || (e->f1 >= 0 && !w.face_alive[e->f1])) continue;

            const int m = static_cast<int>(w.pos.size());
            w.pos.push_back(0.5 * (w.pos[e->a] + w.pos[e->b]));
            w.vert_alive.push_back(1);
            for (int f : {e->f0, e->f1}) {
                if (f < 0) continue;
                std::array<int, 3> rot;
                if (!rotate_to_edge(w.faces[f], e->a, e->b, rot) &&
                    !rotate_to_edge(w.faces[f], e->b, e->a, rot))
                    continue;
                // rot = (u, v, x) with (u,v) the directed edge in this face
                w.face_alive[f] = 0;
                w.faces.push_back({rot[0], m, rot[2]});
                w.face_alive.push_back(1);
                w.faces.push_back({m, rot[1], rot[2]});
                w.face_alive.push_back(1);
            }
        }
    }
}

void collapse_short_edges(Work& w, double l_min, double l_max) {
    const std::vector<EdgeRec> edges = build_edges(w);
    const std::vector<char> boundary = boundary_flags(w, edges);
    std::vector<std::vector<int>> nb = neighbor_lists(w, edges);

    // alive faces per vertex, kept current through collapses
    std::vector<std::vector<int>> vfaces(w.pos.size());
    for (size_t f = 0; f < w.faces.size(); ++f) {
        if (!w.face_alive[f]) continue;
        for (int v : w.faces[f]) vfaces[v].push_back(static_cast<int>(f));
    }

    for (const auto& e : edges) {
        const int a = e.a, b = e.b;
        if (!w.vert_alive[a] || !w.vert_alive[b]) continue;
        if (boundary[a] || boundary[b]) continue;
        if (!sv_contains(nb[a], b)) continue;  // edge vanished in an earlier collapse
        if ((w.pos[a] - w.pos[b]).norm() >= l_min) continue;  // may have moved

        // shared faces and their opposite vertices, from current connectivity
        std::vector<int> shared;
        std::vector<int> opposite;
        for (int f : vfaces[a]) {
            if (!sv_contains(vfaces[b], f)) continue;
            shared.push_back(f);
            for (int v : w.faces[f])
                if (v != a && v != b) opposite.push_back(v);
        }
        if (shared.size() != 2) continue;
        std::sort(opposite.begin(), opposite.end());
        opposite.erase(std::unique(opposite.begin(), opposite.end()), opposite.end());

        // link condition: ring intersection must be exactly the two opposite
        // vertices, otherwise the collapse pinches the surface
        std::vector<int> common;
        std::set_intersection(nb[a].begin(), nb[a].end(), nb[b].begin(), nb[b].end(),
                              std::back_inserter(common));
        if (common != opposite) continue;

        const Vec3 mid = 0.5 * (w.pos[a] + w.pos[b]);
        // do not create edges the split pass would immediately cut again
        bool too_long = false;
        for (int u : nb[a])
            if (u != b && (mid - w.pos[u]).norm() > l_max) too_long = true;
        for (int u : nb[b])
            if (u != a && (mid - w.pos[u]).norm() > l_max) too_long = true;
        if (too_long) continue;

        // no surviving face may flip its normal
        bool flips = false;
        const Vec3 old_a = w.pos[a];
        for (const auto& incident : {vfaces[a], vfaces[b]}) {
            for (int f : incident) {
                auto fc = w.faces[f];
                const bool has_a = fc[0] == a || fc[1] == a || fc[2] == a;
                const bool has_b = fc[0] == b || fc[1] == b || fc[2] == b;
                if (has_a && has_b) continue;  // dies with the collapse
                const Vec3 before = face_normal(w, fc);
                for (int& v : fc)
                    if (v == b) v = a;
                w.pos[a] = mid;
                const Vec3 after = face_normal(w, fc);
                w.pos[a] = old_a;
                if (before.dot(after) <= 0.0) flips = true;
            }
        }
        if (flips) continue;

        // commit: b merges into a at the midpoint
        w.pos[a] = mid;
        const std::vector<int> b_faces = vfaces[b];
        for (int f : b_faces) {
            if (sv_contains(vfaces[a], f)) {
                w.face_alive[f] = 0;  // shared face collapses away
                for (int v : w.faces[f]) sv_erase(vfaces[v], f);
            } else {
                for (int& v : w.faces[f])
                    if (v == b) v = a;
                sv_insert(vfaces[a], f);
            }
        }
        vfaces[b].clear();
        w.vert_alive[b] = 0;

        // patch the neighbor lists we keep using
        sv_erase(nb[a], b);
        for (int u : nb[b]) {
            if (u == a) continue;
            sv_erase(nb[u], b);
            sv_insert(nb[u], a);
            sv_insert(nb[a], u);
        }
        nb[b].clear();
    }
}

void equalize_valences(Work& w) {
    const std::vector<EdgeRec> edges = build_edges(w);
    const std::vector<char> boundary = boundary_flags(w, edges);

    std::vector<int> degree(w.pos.size(), 0);
    for (const auto& e : edges) {
        ++degree[e.a];
        ++degree[e.b];
    }
    std::unordered_set<uint64_t> edge_set;
    edge_set.reserve(2 * edges.size());
    for (const auto& e : edges) edge_set.insert(key64(e.a, e.b));

    auto deviation = [&](int v, int deg) {
        const int target = boundary[v] ? 4 : 6;
        return (deg - target) * (deg - target);
    };

    for (const auto& e : edges) {
        if (e.f1 < 0 || e.extra > 0) continue;  // boundary or non-manifold
        const int a = e.a, b = e.b;
        if (!edge_set.count(key64(a, b))) continue;  // removed by an earlier flip
        const int f1 = e.f0, f2 = e.f1;
        if (!w.face_alive[f1] || !w.face_alive[f2]) continue;

        // orient: fa carries the directed edge a->b, fb carries b->a
        std::array<int, 3> r1, r2;
        int fa = -1, fb = -1;
        if (rotate_to_edge(w.faces[f1], a, b, r1) && rotate_to_edge(w.faces[f2], b, a, r2)) {
            fa = f1;
            fb = f2;
        } else if (rotate_to_edge(w.faces[f2], a, b, r1) && rotate_to_edge(w.faces[f1], b, a, r2)) {
            fa = f2;
            fb = f1;
        } else {
            continue;
        }
        const int c = r1[2], d = r2[2];  // r1 = (a, b, c), r2 = (b, a, d)
        if (c == d || edge_set.count(key64(c, d))) continue;

        const int before = deviation(a, degree[a]) + deviation(b, degree[b]) +
                           deviation(c, degree[c]) + deviation(d, degree[d]);
        const int after = deviation(a, degree[a] - 1) + deviation(b, degree[b] - 1) +
                          deviation(c, degree[c] + 1) + deviation(d, degree[d] + 1);
        if (after >= before) continue;

        // keep the flip from folding the quad
        const std::array<int, 3> n1 = {c, a, d}, n2 = {d, b, c};
        const Vec3 old_orientation = face_normal(w, r1) + face_normal(w, r2);
        if (face_normal(w, n1).dot(old_orientation) <= 0.0) continue;
        if (face_normal(w, n2).dot(old_orientation) <= 0.0) continue;

        w.faces[fa] = n1;
        w.faces[fb] = n2;
        edge_set.erase(key64(a, b));
        edge_set.insert(key64(c, d));
        degree[a] -= 1;
        degree[b] -= 1;
        degree[c] += 1;
        degree[d] += 1;
    }
}

void relax_and_project(Work& w, const SurfaceQuery& surface) {
    const std::vector<EdgeRec> edges = build_edges(w);
    const std::vector<char> boundary = boundary_flags(w, edges);
    const std::vector<std::vector<int>> nb = neighbor_lists(w, edges);

    // area-weighted vertex normals of the working mesh
    std::vector<Vec3> normals(w.pos.size(), Vec3::Zero());
    for (size_t f = 0; f < w.faces.size(); ++f) {
        if (!w.face_alive[f]) continue;
        const Vec3 n = face_normal(w, w.faces[f]);
        for (int v : w.faces[f]) normals[v] += n;
    }

    std::vector<Vec3> next = w.pos;
    for (size_t v = 0; v < w.pos.size(); ++v) {
        if (!w.vert_alive[v] || boundary[v] || nb[v].empty()) continue;
        Vec3 centroid = Vec3::Zero();
        for (int u : nb[v]) centroid += w.pos[u];
        centroid /= static_cast<double>(nb[v].size());

        Vec3 n = normals[v];
        const double len = n.norm();
        Vec3 moved;
        if (len > 1e-12) {
            n /= len;
            moved = w.pos[v] + (centroid - w.pos[v]) - n * n.dot(centroid - w.pos[v]);
        } else {
            moved = centroid;
        }
        next[v] = surface.closest_point(moved).point;
    }
    w.pos = std::move(next);
}

}  // namespace

TriangleMesh isotropic_remesh(const TriangleMesh& mesh, int target_vertex_count, int iterations) {
    if (mesh.faces.empty() || target_vertex_count < 4)
        throw std::invalid_argument("isotropic_remesh: empty mesh or degenerate target");
    validate_faces(mesh);
    const auto bad = nonmanifold_edges(mesh);
    if (!bad.empty()) {
        std::ostringstream msg;
        msg << "isotropic_remesh: input is not edge-manifold; offending edges:";
        for (size_t i = 0; i < bad.size() && i < 20; ++i)
            msg << " (" << bad[i].first << "," << bad[i].second << ")";
        if (bad.size() > 20) msg << " ... " << bad.size() << " total";
        throw std::invalid_argument(msg.str());
    }

    const SurfaceQuery surface(mesh);

    Work w;
    w.pos = mesh.vertices;
    w.faces = mesh.faces;
    w.face_alive.assign(mesh.faces.size(), 1);
    w.vert_alive.assign(mesh.vertices.size(), 1);

    // edge length giving the requested count on a uniform equilateral mesh:
    // V ~ 2A / (sqrt(3) L^2)
    const double area = surface_area(mesh);
    double target_l = std::sqrt(2.0 * area / (std::sqrt(3.0) * target_vertex_count));

    for (int it = 0; it < iterations; ++it) {
        split_long_edges(w, 4.0 / 3.0 * target_l);
        collapse_short_edges(w, 4.0 / 5.0 * target_l, 4.0 / 3.0 * target_l);
        equalize_valences(w);
        relax_and_project(w, surface);

        // steer the edge length toward the requested vertex count
        const double ratio = static_cast<double>(w.alive_vertices()) / target_vertex_count;
        if (ratio > 0.95 && ratio < 1.05) continue;
        target_l *= std::clamp(std::sqrt(ratio), 0.8, 1.25);
    }

    // compact
    TriangleMesh out;
    std::vector<int> remap(w.pos.size(), -1);
    for (size_t f = 0; f < w.faces.size(); ++f) {
        if (!w.face_alive[f]) continue;
        for (int v : w.faces[f]) {
            if (remap[v] < 0) {
                remap[v] = out.vertex_count();
                out.vertices.push_back(w.pos[v]);
            }
        }
        out.faces.push_back({remap[w.faces[f][0]], remap[w.faces[f][1]], remap[w.faces[f][2]]});
    }
    build_adjacency(out);
    compute_vertex_normals(out);
    return out;
}

}  // namespace irmesh
