#include "irmesh/refine.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <random>

#include "irmesh/surface_query.hpp"

using namespace irmesh;

namespace {

// Smooth radial bump field. The frequency (radians per mm along each axis)
// must stay low relative to both the edge length and the pixel footprint for
// the displaced sphere to be recoverable from its renders.
TriangleMesh bumpy_sphere(double radius, int subdivisions, const Vec3& center, double amplitude,
                          double frequency = 0.11) {
    TriangleMesh mesh = make_icosphere(radius, subdivisions, center);
    for (auto& v : mesh.vertices) {
        const Vec3 r = v - center;
        const double bump = std::sin(frequency * r.x()) * std::sin(0.82 * frequency * r.y() + 0.4) *
                            std::sin(1.18 * frequency * r.z() + 1.1);
        v += amplitude * bump * r.normalized();
    }
    build_adjacency(mesh);
    compute_vertex_normals(mesh);
    return mesh;
}

// Cameras on a ring around the target, each carrying the light slightly off
// its center.
std::vector<View> ring_views(const Vec3& target, double distance, int count,
                             const CameraIntrinsics& intrinsics) {
    std::vector<View> views;
    for (int k = 0; k < count; ++k) {
        const double a = 2.0 * M_PI * k / count;
        const Vec3 eye = target + Vec3(distance * std::sin(a), 0.35 * distance * std::sin(2.0 * a),
                                       distance * std::cos(a));
        View view;
        view.intrinsics = intrinsics;
        view.pose = look_at(eye, target);
        view.light_offset = Vec3(30.0, -12.0, 0.0);
        views.push_back(view);
    }
    return views;
}

void render_observations(std::vector<View>& views, const TriangleMesh& truth, double albedo,
                         const LightModel& light) {
    for (View& view : views)
        view.image =
            render_shading_image(truth, view, std::vector<double>(truth.vertices.size(), albedo), light)
                .image;
}

std::vector<VisibilityMap> visibility_of(const TriangleMesh& mesh, const std::vector<View>& views) {
    std::vector<VisibilityMap> vis;
    for (const View& view : views)
        vis.push_back(compute_visibility(mesh, view, default_visibility_bias(mesh)));
    return vis;
}

double mean_distance_to(const TriangleMesh& probe, const SurfaceQuery& surface) {
    double sum = 0.0;
    for (const auto& v : probe.vertices) sum += surface.distance(v);
    return sum / probe.vertices.size();
}

// Fronto-parallel plane rig where the shading constants can be written in
// closed form at every vertex.
struct PlaneRig {
    TriangleMesh mesh = make_grid_plane(200.0, 200.0, 21, 21);
    View view;
    LightModel light;  // light rides at the camera center

    explicit PlaneRig(double image_value) {
        view.intrinsics = {900.0, 900.0, 159.5, 119.5, 320, 240};
        view.pose = look_at(Vec3(0, 0, 900), Vec3(0, 0, 0));
        view.image = ShadingImage::zeros(320, 240);
        for (double& v : view.image.intensity) v = image_value;
    }

    AlbedoModel exact_albedo(double image_value) const {
        // n.l = z/d for the flat plane with the light at the camera, so the
        // inversion of a constant image is I d^3 / z per vertex
        AlbedoModel model;
        model.mode = AlbedoMode::Grouped;
        for (int i = 0; i < mesh.vertex_count(); ++i) {
            const double d = (Vec3(0, 0, 900) - mesh.vertices[i]).norm();
            model.labels.push_back(i);
            model.group_values.push_back(image_value * d * d * d / 900.0);
        }
        return model;
    }
};

}  // namespace

TEST_CASE("refinement config rejects bad values") {
    RefinementConfig config;
    config.lambda1 = -1.0;
    CHECK_THROWS_AS(config.validate(), std::invalid_argument);
    config = {};
    config.outer_iterations = 0;
    CHECK_THROWS_AS(config.validate(), std::invalid_argument);
    config = {};
    config.lm_initial_damping = 0.0;
    CHECK_THROWS_AS(config.validate(), std::invalid_argument);
}

TEST_CASE("data residuals vanish when observations match the model exactly") {
    PlaneRig rig(0.35);
    const std::vector<View> views{rig.view};
    const auto vis = visibility_of(rig.mesh, views);
    const RefinementState state = freeze_refinement_state(rig.mesh, views, vis, rig.light);

    const ResidualBlock data = build_data_residuals(rig.mesh, rig.exact_albedo(0.35), state);
    REQUIRE(data.rows() > 300);  // interior vertices of the 21x21 grid
    double worst = 0.0;
    for (double r : data.residual) worst = std::max(worst, std::abs(r));
    CHECK(worst < 1e-6);
}

TEST_CASE("observations at or below the confidence floor are dropped") {
    PlaneRig rig(0.35);
    // move the light below the plane: every n.l goes negative
    rig.view.light_offset = rig.view.pose.to_camera(Vec3(0, 0, -500));
    const std::vector<View> views{rig.view};
    const auto vis = visibility_of(rig.mesh, views);
    const RefinementState state = freeze_refinement_state(rig.mesh, views, vis, rig.light);

    for (const auto& samples : state.views)
        for (double w : samples.weight) CHECK(w == 0.0);
    CHECK(build_data_residuals(rig.mesh, rig.exact_albedo(0.35), state).rows() == 0);

    AlbedoModel global;
    global.global_value = 1e5;
    CHECK_THROWS_AS(refine(rig.mesh, views, global, rig.light), std::invalid_argument);
}

TEST_CASE("smoothness residuals follow the directed-edge form") {
    TriangleMesh mesh;
    mesh.vertices = {{0, 0, 0}, {10, 0, 0}, {0, 10, 0}};
    mesh.faces = {{0, 1, 2}};
    build_adjacency(mesh);
    compute_vertex_normals(mesh);

    RefinementState state;
    state.delta = {1.0, 0.0, 0.0};
    state.frozen_normals = mesh.normals;

    const ResidualBlock block = build_smoothness_residuals(mesh, state, 4.0);
    REQUIRE(block.rows() == 6);  // both directions of all three edges
    CHECK(block.cost() == doctest::Approx(16.0).epsilon(1e-12));
    int twos = 0, zeros = 0;
    for (double r : block.residual) {
        if (std::abs(std::abs(r) - 2.0) < 1e-12) ++twos;
        if (std::abs(r) < 1e-12) ++zeros;
    }
    CHECK(twos == 4);
    CHECK(zeros == 2);

    state.delta = {0.7, 0.7, 0.7};
    for (double r : build_smoothness_residuals(mesh, state, 4.0).residual) CHECK(r == 0.0);
}

TEST_CASE("regularization residuals scale displacements by sqrt lambda") {
    RefinementState state;
    state.delta = {3.0, 0.0, -2.0};
    const ResidualBlock block = build_regularization_residuals(state, 1.0);
    REQUIRE(block.rows() == 3);
    CHECK(block.residual[0] == doctest::Approx(3.0).epsilon(1e-15));
    CHECK(block.residual[1] == 0.0);
    CHECK(block.residual[2] == doctest::Approx(-2.0).epsilon(1e-15));
    for (const auto& t : block.jacobian) {
        CHECK(t.row() == t.col());
        CHECK(t.value() == doctest::Approx(1.0).epsilon(1e-15));
    }
}

TEST_CASE("stacked analytic Jacobian matches central finite differences") {
    // a bumpy 200-vertex patch observed from three views, with nonzero
    // displacements so the normal derivatives are exercised off the rest state
    TriangleMesh truth = make_grid_plane(120.0, 60.0, 20, 10);
    for (auto& v : truth.vertices)
        v.z() += 5.0 * std::sin(0.07 * v.x()) * std::cos(0.09 * v.y());
    build_adjacency(truth);
    compute_vertex_normals(truth);

    TriangleMesh mesh = make_grid_plane(120.0, 60.0, 20, 10);
    for (auto& v : mesh.vertices)
        v.z() += 4.0 * std::sin(0.07 * v.x()) * std::cos(0.09 * v.y());
    build_adjacency(mesh);
    compute_vertex_normals(mesh);
    REQUIRE(mesh.vertex_count() == 200);

    LightModel light;
    light.brightness_c = 9e5;
    light.ambient = 0.01;
    std::vector<View> views;
    const Vec3 eyes[3] = {{0, 0, 700}, {150, 80, 650}, {-120, -60, 680}};
    for (const Vec3& eye : eyes) {
        View view;
        view.intrinsics = {800.0, 800.0, 159.5, 119.5, 320, 240};
        view.pose = look_at(eye, Vec3(0, 0, 0));
        view.light_offset = Vec3(20.0, -10.0, 0.0);
        view.image =
            render_shading_image(truth, view, std::vector<double>(truth.vertices.size(), 0.8), light)
                .image;
        views.push_back(view);
    }

    RefinementState state = freeze_refinement_state(mesh, views, visibility_of(mesh, views), light);
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> jitter(-0.5, 0.5);
    for (double& d : state.delta) d = jitter(rng);

    AlbedoModel albedo;
    albedo.global_value = 9e5 * 0.8;
    const double lambda1 = 3.7, lambda2 = 1.3;
    auto stacked = [&](const RefinementState& s) {
        return assemble_system(build_data_residuals(mesh, albedo, s),
                               build_smoothness_residuals(mesh, s, lambda1),
                               build_regularization_residuals(s, lambda2), mesh.vertex_count());
    };

    const ResidualSystem system = stacked(state);
    REQUIRE(system.data_rows > 300);

    const double h = 1e-4;
    // differencing residuals of this size leaves cancellation noise around
    // eps * |r| / h, so the dead band scales with the residual magnitude
    const double dead_band = 1e-8 * std::max(1.0, system.residual.lpNorm<Eigen::Infinity>());
    double worst = 0.0;
    RefinementState probe = state;
    for (int c = 0; c < mesh.vertex_count(); ++c) {
        probe.delta[c] = state.delta[c] + h;
        const Eigen::VectorXd plus = stacked(probe).residual;
        probe.delta[c] = state.delta[c] - h;
        const Eigen::VectorXd minus = stacked(probe).residual;
        probe.delta[c] = state.delta[c];

        const Eigen::VectorXd fd = (plus - minus) / (2.0 * h);
        const Eigen::VectorXd analytic = system.jacobian.col(c);
        for (int r = 0; r < fd.size(); ++r) {
            const double mag = std::max(std::abs(fd[r]), std::abs(analytic[r]));
            if (mag <= dead_band) continue;
            worst = std::max(worst, std::abs(fd[r] - analytic[r]) / mag);
        }
    }
    CHECK(worst < 1e-5);
}

TEST_CASE("solver reaches the least-squares optimum of a linear system") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> coef(-2.0, 2.0);
    const int n = 20, rows = 50;

    ResidualBlock data;
    for (int r = 0; r < rows; ++r) {
        data.residual.push_back(coef(rng));
        for (int c = 0; c < n; ++c)
            if (c % 5 == r % 5 || c == r % n) data.jacobian.emplace_back(r, c, coef(rng));
    }
    const ResidualSystem system = assemble_system(data, ResidualBlock{}, ResidualBlock{}, n);

    RefinementConfig config;
    config.lm_max_inner = 80;
    SolveReport report;
    const std::vector<double> h = solve_displacements(system, config, &report);
    CHECK(!report.singular);
    for (size_t i = 1; i < report.cost_history.size(); ++i)
        CHECK(report.cost_history[i] <= report.cost_history[i - 1]);

    const Eigen::MatrixXd dense = Eigen::MatrixXd(system.jacobian);
    const Eigen::VectorXd exact =
        (dense.transpose() * dense).ldlt().solve(-dense.transpose() * system.residual);
    double err = 0.0;
    for (int i = 0; i < n; ++i) err = std::max(err, std::abs(h[i] - exact[i]));
    CHECK(err < 1e-9 * (1.0 + exact.lpNorm<Eigen::Infinity>()));
}

TEST_CASE("pure regularization keeps the displacement at zero") {
    RefinementState state;
    state.delta.assign(40, 0.0);
    const ResidualSystem system = assemble_system(
        ResidualBlock{}, ResidualBlock{}, build_regularization_residuals(state, 2.5), 40);
    const std::vector<double> h = solve_displacements(system, RefinementConfig{});
    for (double v : h) CHECK(v == 0.0);
}

TEST_CASE("refining a mesh against its own renders leaves it in place") {
    // Grid vertices 10 mm apart viewed from 900 mm with f = 900 land on
    // exact pixel centers, and those pixel rays hit the vertices exactly, so
    // sampling the render returns each vertex's own shading: the input mesh
    // is already the optimum and the first proposed step is sub-tolerance.
    TriangleMesh mesh = make_grid_plane(200.0, 200.0, 21, 21);
    build_adjacency(mesh);
    compute_vertex_normals(mesh);
    View view;
    view.intrinsics = {900.0, 900.0, 160.0, 120.0, 320, 240};
    view.pose = look_at(Vec3(0, 0, 900), Vec3(0, 0, 0));
    LightModel light;  // light rides at the camera center

    AlbedoModel albedo;
    albedo.mode = AlbedoMode::Grouped;
    std::vector<double> rho(mesh.vertex_count());
    for (int i = 0; i < mesh.vertex_count(); ++i) {
        // n.l = z/d for the flat plane with the light at the camera, so a
        // constant image value of 0.35 inverts to I d^3 / z per vertex
        const double d = (Vec3(0, 0, 900) - mesh.vertices[i]).norm();
        albedo.labels.push_back(i);
        albedo.group_values.push_back(0.35 * d * d * d / 900.0);
        rho[i] = albedo.group_values[i] / light.brightness_c;
    }
    view.image = render_shading_image(mesh, view, rho, light).image;

    const std::vector<View> views{view};
    const RefineResult result = refine(mesh, views, albedo, light);

    CHECK(result.diagnostics.converged);
    CHECK(result.diagnostics.iterations_run == 1);
    double moved = 0.0;
    for (int i = 0; i < mesh.vertex_count(); ++i)
        moved = std::max(moved, (result.mesh.vertices[i] - mesh.vertices[i]).norm());
    CHECK(moved <= 1e-6);
    CHECK(moved == 0.0);  // the sub-tolerance step is never applied

    SUBCASE("two runs agree bit for bit") {
        const RefineResult again = refine(mesh, views, albedo, light);
        REQUIRE(again.mesh.vertices.size() == result.mesh.vertices.size());
        CHECK(std::memcmp(again.mesh.vertices.data(), result.mesh.vertices.data(),
                          result.mesh.vertices.size() * sizeof(Vec3)) == 0);
    }
}

TEST_CASE("refinement recovers smoothed-away relief") {
    // Bumps of ~40 mm wavelength on a 10K-vertex sphere: coarse enough for
    // the mesh and the pixel grid to resolve, fine enough for Laplacian
    // smoothing to erase. The smoothing's uniform radial shrinkage — an
    // artifact a shading term cannot see — is measured on an identically
    // smoothed bald sphere and compensated, leaving a detail-only gap.
    const Vec3 center(0, 0, 1300);
    const TriangleMesh truth = bumpy_sphere(100.0, 5, center, 2.0, 0.157);
    LightModel light;
    light.brightness_c = 9e5;
    light.ambient = 0.005;
    std::vector<View> views = ring_views(center, 1300.0, 6, {1000.0, 1000.0, 319.5, 239.5, 640, 480});
    render_observations(views, truth, 1.0, light);

    TriangleMesh degraded = truth;
    laplacian_smooth(degraded, 25, 0.5);
    {
        TriangleMesh bald = make_icosphere(100.0, 5, center);
        TriangleMesh bald_smoothed = bald;
        laplacian_smooth(bald_smoothed, 25, 0.5);
        double deficit = 0.0;
        for (int i = 0; i < bald.vertex_count(); ++i)
            deficit += (bald.vertices[i] - bald_smoothed.vertices[i])
                           .dot((bald.vertices[i] - center).normalized());
        deficit /= bald.vertex_count();
        for (auto& v : degraded.vertices) v += deficit * (v - center).normalized();
    }
    compute_vertex_normals(degraded);

    const SurfaceQuery surface(truth);
    const double before = mean_distance_to(degraded, surface);
    REQUIRE(before > 0.3);  // the smoothing must actually erase the bumps

    AlbedoModel albedo;
    albedo.global_value = 9e5;
    RefinementConfig config;
    config.outer_iterations = 6;
    const RefineResult result = refine(degraded, views, albedo, light, config);

    const double after = mean_distance_to(result.mesh, surface);
    CHECK(after < 0.4 * before);

    // per-iteration records line up with the number of iterations taken
    REQUIRE(result.diagnostics.data_cost.size() ==
            static_cast<size_t>(result.diagnostics.iterations_run));
    REQUIRE(result.diagnostics.max_step_mm.size() == result.diagnostics.data_cost.size());
    REQUIRE(result.diagnostics.lm_cost_history.size() == result.diagnostics.data_cost.size());
    // every solve only ever accepted cost-decreasing steps
    for (const auto& history : result.diagnostics.lm_cost_history)
        for (size_t k = 1; k < history.size(); ++k) CHECK(history[k] <= history[k - 1]);
}

TEST_CASE("update steps stay on the frozen normals and under the cap") {
    const Vec3 center(0, 0, 1300);
    const TriangleMesh truth = bumpy_sphere(100.0, 3, center, 2.0);
    LightModel light;
    light.brightness_c = 9e5;
    std::vector<View> views = ring_views(center, 1300.0, 4, {1000.0, 1000.0, 319.5, 239.5, 640, 480});
    render_observations(views, truth, 1.0, light);

    TriangleMesh degraded = truth;
    laplacian_smooth(degraded, 5, 0.5);
    compute_vertex_normals(degraded);

    AlbedoModel albedo;
    albedo.global_value = 9e5;
    // one iteration so the single update is attributable to one normal set
    RefinementConfig one;
    one.outer_iterations = 1;
    const std::vector<Vec3> normals = degraded.normals;
    const RefineResult stepped = refine(degraded, views, albedo, light, one);
    for (int i = 0; i < degraded.vertex_count(); ++i) {
        const Vec3 move = stepped.mesh.vertices[i] - degraded.vertices[i];
        CHECK(move.cross(normals[i]).norm() <= 1e-12 * (1.0 + move.norm()));
    }

    RefinementConfig capped = one;
    capped.displacement_cap_mm = 0.05;
    const RefineResult small = refine(degraded, views, albedo, light, capped);
    for (int i = 0; i < degraded.vertex_count(); ++i)
        CHECK((small.mesh.vertices[i] - degraded.vertices[i]).norm() <= 0.05 + 1e-12);
}

TEST_CASE("heavy regularization pins the mesh and none frees it") {
    const Vec3 center(0, 0, 1300);
    const TriangleMesh truth = bumpy_sphere(100.0, 2, center, 2.0);
    LightModel light;
    light.brightness_c = 9e5;
    std::vector<View> views = ring_views(center, 1300.0, 4, {800.0, 800.0, 319.5, 239.5, 640, 480});
    render_observations(views, truth, 1.0, light);

    TriangleMesh degraded = truth;
    laplacian_smooth(degraded, 4, 0.5);
    compute_vertex_normals(degraded);

    AlbedoModel albedo;
    albedo.global_value = 9e5;

    auto total_movement = [&](double lambda2, int iterations) {
        RefinementConfig config;
        config.lambda2 = lambda2;
        config.outer_iterations = iterations;
        const RefineResult result = refine(degraded, views, albedo, light, config);
        double sum = 0.0;
        for (int i = 0; i < degraded.vertex_count(); ++i)
            sum += (result.mesh.vertices[i] - degraded.vertices[i]).norm();
        return sum;
    };

    const double pinned = total_movement(1e9, 3);
    const double regular = total_movement(0.1, 3);
    const double free_run = total_movement(0.0, 3);
    CHECK(pinned < 1e-3 * regular);
    CHECK(free_run >= regular);
}
