#include "irmesh/surface_query.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace irmesh;

TEST_CASE("closest point on a single triangle: face, edge, vertex regions") {
    TriangleMesh mesh;
    mesh.vertices = {{0, 0, 0}, {2, 0, 0}, {0, 2, 0}};
    mesh.faces = {{0, 1, 2}};
    const SurfaceQuery query(mesh);

    // above the interior: foot of the perpendicular
    auto hit = query.closest_point(Vec3(0.5, 0.5, 3.0));
    CHECK((hit.point - Vec3(0.5, 0.5, 0.0)).norm() == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(hit.distance == doctest::Approx(3.0).epsilon(1e-12));

    // beyond an edge: projects onto the edge
    hit = query.closest_point(Vec3(1.0, -2.0, 0.0));
    CHECK((hit.point - Vec3(1.0, 0.0, 0.0)).norm() == doctest::Approx(0.0).epsilon(1e-12));

    // beyond a vertex: snaps to the vertex
    hit = query.closest_point(Vec3(5.0, -1.0, 0.0));
    CHECK((hit.point - Vec3(2.0, 0.0, 0.0)).norm() == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("BVH query matches brute force over all faces") {
    const TriangleMesh mesh = make_icosphere(40.0, 3, Vec3(5, -3, 12));
    const SurfaceQuery query(mesh);

    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> coord(-80.0, 80.0);
    for (int trial = 0; trial < 200; ++trial) {
        const Vec3 p(5 + coord(rng), -3 + coord(rng), 12 + coord(rng));
        const auto hit = query.closest_point(p);

        double best = std::numeric_limits<double>::infinity();
        for (const auto& [a, b, c] : mesh.faces) {
            const Vec3 q = closest_point_on_triangle(p, mesh.vertices[a], mesh.vertices[b], mesh.vertices[c]);
            best = std::min(best, (p - q).norm());
        }
        CHECK(hit.distance == doctest::Approx(best).epsilon(1e-12));
        CHECK((p - hit.point).norm() == doctest::Approx(hit.distance).epsilon(1e-12));
        CHECK(hit.face >= 0);
        CHECK(hit.face < mesh.face_count());
    }
}

TEST_CASE("points on the sphere surface are (nearly) at distance zero") {
    const TriangleMesh mesh = make_icosphere(100.0, 4);
    const SurfaceQuery query(mesh);
    std::mt19937_64 rng(3);
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (int trial = 0; trial < 100; ++trial) {
        Vec3 dir(gauss(rng), gauss(rng), gauss(rng));
        dir.normalize();
        // vertices lie on the sphere; faces are chords, so true distance is
        // at most the sagitta of one face (well under 0.2mm at this density)
        CHECK(query.closest_point(100.0 * dir).distance < 0.2);
    }
}
