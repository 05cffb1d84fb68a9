#include "irmesh/synth_eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <random>
#include <stdexcept>
#include <utility>

#include <Eigen/Dense>

#include "irmesh/raster.hpp"
#include "irmesh/surface_query.hpp"

namespace irmesh {

namespace {

constexpr double kPi = 3.14159265358979323846;

void require(bool ok, const char* message) {
    if (!ok) throw std::invalid_argument(message);
}

// Vertices that lie on an edge used by only one face.
std::vector<std::uint8_t> boundary_vertices(const TriangleMesh& mesh) {
    std::map<std::pair<int, int>, int> edge_count;
    for (const auto& f : mesh.faces) {
        for (int e = 0; e < 3; ++e) {
            int a = f[e], b = f[(e + 1) % 3];
            if (a > b) std::swap(a, b);
            edge_count[{a, b}] += 1;
        }
    }
    std::vector<std::uint8_t> on_boundary(mesh.vertices.size(), 0);
    for (const auto& [edge, count] : edge_count) {
        if (count == 1) {
            on_boundary[edge.first] = 1;
            on_boundary[edge.second] = 1;
        }
    }
    return on_boundary;
}

// Smooths while holding boundary vertices in place, so an open mesh does not
// curl toward its own interior.
void smooth_pinned(TriangleMesh& mesh, int iterations, double factor) {
    const std::vector<std::uint8_t> pinned = boundary_vertices(mesh);
    const std::vector<Vec3> original = mesh.vertices;
    for (int it = 0; it < iterations; ++it) {
        laplacian_smooth(mesh, 1, factor);
        for (size_t v = 0; v < mesh.vertices.size(); ++v) {
            if (pinned[v]) mesh.vertices[v] = original[v];
        }
    }
}

// Smooths a closed sphere-like mesh, then re-inflates it by the mean radial
// shrinkage the same smoothing causes on a plain sphere of the same layout.
// The smoothing's bulk contraction carries no detail, so removing it leaves a
// degraded mesh that differs from the truth by the lost relief alone.
void smooth_compensated(TriangleMesh& mesh, const SceneParams& p) {
    laplacian_smooth(mesh, p.smoothing_iterations, p.smoothing_factor);

    TriangleMesh bald = make_icosphere(p.sphere_radius_mm, p.sphere_subdivisions, p.sphere_center);
    TriangleMesh bald_smoothed = bald;
    laplacian_smooth(bald_smoothed, p.smoothing_iterations, p.smoothing_factor);
    double deficit = 0.0;
    for (int v = 0; v < bald.vertex_count(); ++v) {
        const Vec3 radial = (bald.vertices[v] - p.sphere_center).normalized();
        deficit += (bald.vertices[v] - bald_smoothed.vertices[v]).dot(radial);
    }
    deficit /= bald.vertex_count();

    for (auto& v : mesh.vertices) v += deficit * (v - p.sphere_center).normalized();
}

TriangleMesh build_ground_truth(SceneKind kind, const SceneParams& p, std::vector<int>& labels) {
    switch (kind) {
        case SceneKind::Sphere: {
            TriangleMesh mesh = make_icosphere(p.sphere_radius_mm, p.sphere_subdivisions, p.sphere_center);
            labels.assign(mesh.vertices.size(), 0);
            return mesh;
        }
        case SceneKind::BumpySphere: {
            TriangleMesh mesh = make_icosphere(p.sphere_radius_mm, p.sphere_subdivisions, p.sphere_center);
            const double f = p.bump_frequency;
            for (auto& v : mesh.vertices) {
                const Vec3 local = v - p.sphere_center;
                const double bump = p.bump_amplitude_mm * std::sin(f * local.x()) *
                                    std::sin(0.82 * f * local.y() + 0.4) *
                                    std::sin(1.18 * f * local.z() + 1.1);
                v += bump * local.normalized();
            }
            build_adjacency(mesh);
            compute_vertex_normals(mesh);
            labels.assign(mesh.vertices.size(), 0);
            return mesh;
        }
        case SceneKind::ReliefPlane: {
            TriangleMesh mesh =
                make_grid_plane(p.plane_size_mm, p.plane_size_mm, p.plane_resolution, p.plane_resolution);
            // Stripes phased so grid columns sample the crests, tapered to
            // zero over the outer 15% so the border stays flat.
            const double half = 0.5 * p.plane_size_mm;
            const double taper = 0.15 * p.plane_size_mm;
            auto window = [&](double u) {
                const double edge = half - std::abs(u);
                if (edge >= taper) return 1.0;
                const double s = std::sin(0.5 * kPi * edge / taper);
                return s * s;
            };
            for (auto& v : mesh.vertices) {
                const double phase = 2.0 * kPi * (v.x() + 0.25 * p.stripe_period_mm) / p.stripe_period_mm;
                v.z() += 0.5 * p.stripe_depth_mm * std::sin(phase) * window(v.x()) * window(v.y());
            }
            build_adjacency(mesh);
            compute_vertex_normals(mesh);
            labels.assign(mesh.vertices.size(), 0);
            return mesh;
        }
        case SceneKind::TwoMaterialPlane: {
            TriangleMesh mesh =
                make_grid_plane(p.plane_size_mm, p.plane_size_mm, p.plane_resolution, p.plane_resolution);
            labels.resize(mesh.vertices.size());
            for (size_t v = 0; v < mesh.vertices.size(); ++v) {
                labels[v] = mesh.vertices[v].x() < 0.0 ? 0 : 1;
            }
            return mesh;
        }
    }
    throw std::invalid_argument("generate_scene: unknown scene kind");
}

bool is_sphere_kind(SceneKind kind) {
    return kind == SceneKind::Sphere || kind == SceneKind::BumpySphere;
}

}  // namespace

void SceneParams::validate() const {
    require(view_count >= 1, "SceneParams: view_count must be at least 1");
    require(sphere_radius_mm > 0.0, "SceneParams: sphere_radius_mm must be positive");
    require(sphere_subdivisions >= 0 && sphere_subdivisions <= 7,
            "SceneParams: sphere_subdivisions out of range");
    require(bump_amplitude_mm >= 0.0 && bump_frequency > 0.0, "SceneParams: invalid bump shape");
    require(plane_size_mm > 0.0 && plane_resolution >= 2, "SceneParams: invalid plane size");
    require(stripe_depth_mm >= 0.0 && stripe_period_mm > 0.0, "SceneParams: invalid stripe shape");
    require(albedo > 0.0 && albedo <= 1.0, "SceneParams: albedo must be in (0, 1]");
    require(albedo_ratio >= 1.0, "SceneParams: albedo_ratio must be at least 1");
    intrinsics.validate();
    require(camera_distance_mm >= 0.0, "SceneParams: camera_distance_mm must be non-negative");
    require(brightness_c > 0.0, "SceneParams: brightness_c must be positive");
    require(ambient >= 0.0 && ambient < 1.0, "SceneParams: ambient must be in [0, 1)");
    require(smoothing_iterations >= 0, "SceneParams: smoothing_iterations must be non-negative");
    require(smoothing_factor > 0.0 && smoothing_factor < 1.0,
            "SceneParams: smoothing_factor must be in (0, 1)");
    require(intensity_noise_sigma >= 0.0 && pose_jitter_mm >= 0.0, "SceneParams: negative noise level");
}

SyntheticScene generate_scene(SceneKind kind, const SceneParams& params, std::uint64_t seed) {
    params.validate();

    SyntheticScene scene;
    scene.ground_truth = build_ground_truth(kind, params, scene.material_labels);

    scene.light.brightness_c = params.brightness_c;
    scene.light.ambient = params.ambient;
    scene.light.gamma = 1.0;

    if (kind == SceneKind::TwoMaterialPlane) {
        scene.albedo.mode = AlbedoMode::Grouped;
        scene.albedo.labels = scene.material_labels;
        scene.albedo.group_values = {params.brightness_c * params.albedo,
                                     params.brightness_c * params.albedo / params.albedo_ratio};
    } else {
        scene.albedo.mode = AlbedoMode::Global;
        scene.albedo.global_value = params.brightness_c * params.albedo;
    }

    // Degraded starting mesh: identical topology, relief smoothed away.
    scene.degraded = scene.ground_truth;
    if (params.smoothing_iterations > 0) {
        if (is_sphere_kind(kind)) {
            smooth_compensated(scene.degraded, params);
        } else {
            smooth_pinned(scene.degraded, params.smoothing_iterations, params.smoothing_factor);
        }
    }
    compute_vertex_normals(scene.degraded);

    // Capture rig: a circle of cameras aimed at the subject. Sphere rigs orbit
    // the full equator with a small elevation wobble that breaks symmetry;
    // plane rigs sit on a 15-degree cone about the surface normal.
    const Vec3 subject = is_sphere_kind(kind) ? params.sphere_center : Vec3::Zero();
    const double distance = params.camera_distance_mm > 0.0 ? params.camera_distance_mm
                            : is_sphere_kind(kind)          ? 1300.0
                                                            : 1100.0;

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);

    const std::vector<double> reflectance = [&] {
        std::vector<double> rho = scene.albedo.expand(scene.ground_truth.vertex_count());
        for (double& r : rho) r /= params.brightness_c;
        return rho;
    }();

    scene.views.reserve(params.view_count);
    for (int k = 0; k < params.view_count; ++k) {
        const double azimuth = 2.0 * kPi * k / params.view_count;
        Vec3 dir;
        if (is_sphere_kind(kind)) {
            const double elevation = 0.15 * std::sin(3.0 * azimuth + 0.5);
            dir = Vec3(std::cos(elevation) * std::sin(azimuth), std::sin(elevation),
                       std::cos(elevation) * std::cos(azimuth));
        } else {
            const double tilt = 0.26;
            dir = Vec3(std::sin(tilt) * std::cos(azimuth + 0.3), std::sin(tilt) * std::sin(azimuth + 0.3),
                       std::cos(tilt));
        }
        Vec3 eye = subject + distance * dir;
        if (params.pose_jitter_mm > 0.0) {
            eye += params.pose_jitter_mm * Vec3(gauss(rng), gauss(rng), gauss(rng));
        }

        View view;
        view.intrinsics = params.intrinsics;
        view.pose = look_at(eye, subject);
        view.light_offset = params.light_offset;
        view.image = render_shading_image(scene.ground_truth, view, reflectance, scene.light).image;
        if (params.intensity_noise_sigma > 0.0) {
            for (double& value : view.image.intensity) {
                value = std::clamp(value + params.intensity_noise_sigma * gauss(rng), 0.0, 1.0);
            }
        }
        scene.views.push_back(std::move(view));
    }
    return scene;
}

// ---------------------------------------------------------------------------
// Image error metrics
// ---------------------------------------------------------------------------

namespace {

void check_comparable(const ShadingImage& a, const ShadingImage& b, const std::vector<std::uint8_t>& mask) {
    require(a.width == b.width && a.height == b.height, "image metric: image dimensions differ");
    require(a.gamma_applied == b.gamma_applied, "image metric: images are in different gamma states");
    require(mask.size() == a.intensity.size(), "image metric: mask size does not match the images");
}

}  // namespace

double image_rmse(const ShadingImage& a, const ShadingImage& b, const std::vector<std::uint8_t>& mask) {
    check_comparable(a, b, mask);
    double sum = 0.0;
    std::int64_t count = 0;
    for (size_t i = 0; i < mask.size(); ++i) {
        if (!mask[i]) continue;
        const double d = a.intensity[i] - b.intensity[i];
        sum += d * d;
        ++count;
    }
    require(count > 0, "image_rmse: mask selects no pixels");
    return std::sqrt(sum / static_cast<double>(count));
}

double gradient_rmse(const ShadingImage& a, const ShadingImage& b, const std::vector<std::uint8_t>& mask) {
    check_comparable(a, b, mask);
    const int w = a.width, h = a.height;
    auto masked = [&](int x, int y) { return mask[static_cast<size_t>(y) * w + x] != 0; };
    auto eroded = [&](int x, int y) {
        for (int dy = -1; dy <= 1; ++dy) {
            for (int dx = -1; dx <= 1; ++dx) {
                const int nx = x + dx, ny = y + dy;
                if (nx < 0 || ny < 0 || nx >= w || ny >= h || !masked(nx, ny)) return false;
            }
        }
        return true;
    };
    auto magnitude = [&](const ShadingImage& img, int x, int y) {
        const double gx = img.at(x + 1, y) - img.at(x, y);
        const double gy = img.at(x, y + 1) - img.at(x, y);
        return std::sqrt(gx * gx + gy * gy);
    };

    double sum = 0.0;
    std::int64_t count = 0;
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            if (!eroded(x, y)) continue;
            const double d = magnitude(a, x, y) - magnitude(b, x, y);
            sum += d * d;
            ++count;
        }
    }
    require(count > 0, "gradient_rmse: eroded mask selects no pixels");
    return std::sqrt(sum / static_cast<double>(count));
}

// ---------------------------------------------------------------------------
// Mesh alignment and distance
// ---------------------------------------------------------------------------

RigidTransform RigidTransform::inverse() const {
    RigidTransform inv;
    inv.rotation = rotation.transpose();
    inv.translation = -(rotation.transpose() * translation);
    return inv;
}

RigidTransform RigidTransform::compose(const RigidTransform& other) const {
    RigidTransform out;
    out.rotation = rotation * other.rotation;
    out.translation = rotation * other.translation + translation;
    return out;
}

namespace {

std::vector<Vec3> face_normals_of(const TriangleMesh& mesh) {
    std::vector<Vec3> normals(mesh.faces.size(), Vec3::UnitZ());
    for (size_t f = 0; f < mesh.faces.size(); ++f) {
        const auto& face = mesh.faces[f];
        const Vec3 n = (mesh.vertices[face[1]] - mesh.vertices[face[0]])
                           .cross(mesh.vertices[face[2]] - mesh.vertices[face[0]]);
        const double len = n.norm();
        if (len > 0.0) normals[f] = n / len;
    }
    return normals;
}

struct Correspondences {
    std::vector<Vec3> points;   // transformed source vertices
    std::vector<Vec3> targets;  // closest points on the target surface
    std::vector<Vec3> normals;  // target face normals at those points
    double rms = 0.0;
};

Correspondences pair_up(const TriangleMesh& source, const SurfaceQuery& query,
                        const std::vector<Vec3>& face_normals, const RigidTransform& transform,
                        double search_radius) {
    Correspondences c;
    double sum = 0.0;
    for (const Vec3& v : source.vertices) {
        const Vec3 p = transform.apply(v);
        const SurfaceQuery::Hit hit = query.closest_point(p);
        if (search_radius > 0.0 && hit.distance > search_radius) continue;
        const Vec3& n = face_normals[hit.face];
        c.points.push_back(p);
        c.targets.push_back(hit.point);
        c.normals.push_back(n);
        const double r = (p - hit.point).dot(n);
        sum += r * r;
    }
    if (c.points.empty()) {
        throw std::runtime_error("align_icp: no correspondences within the search radius");
    }
    c.rms = std::sqrt(sum / static_cast<double>(c.points.size()));
    return c;
}

}  // namespace

IcpResult align_icp(const TriangleMesh& source, const TriangleMesh& target, const IcpOptions& options) {
    require(!source.vertices.empty(), "align_icp: source mesh has no vertices");
    require(!target.faces.empty(), "align_icp: target mesh has no faces");
    require(options.max_iterations >= 0, "align_icp: max_iterations must be non-negative");
    require(options.search_radius_mm >= 0.0, "align_icp: search_radius_mm must be non-negative");

    const SurfaceQuery query(target);
    const std::vector<Vec3> face_normals = face_normals_of(target);

    IcpResult result;
    Correspondences cur = pair_up(source, query, face_normals, result.transform, options.search_radius_mm);
    result.residuals.push_back(cur.rms);

    for (int iter = 0; iter < options.max_iterations; ++iter) {
        // Linearized point-to-plane update: rows (p x n, n) | -(p - q) . n.
        Eigen::Matrix<double, 6, 6> ata = Eigen::Matrix<double, 6, 6>::Zero();
        Eigen::Matrix<double, 6, 1> atb = Eigen::Matrix<double, 6, 1>::Zero();
        for (size_t i = 0; i < cur.points.size(); ++i) {
            Eigen::Matrix<double, 6, 1> row;
            row.head<3>() = cur.points[i].cross(cur.normals[i]);
            row.tail<3>() = cur.normals[i];
            const double r = (cur.points[i] - cur.targets[i]).dot(cur.normals[i]);
            ata += row * row.transpose();
            atb -= row * r;
        }
        if (atb.lpNorm<Eigen::Infinity>() == 0.0) break;  // already at a stationary point

        const Eigen::Matrix<double, 6, 1> x = ata.ldlt().solve(atb);
        if (!x.allFinite()) break;

        RigidTransform delta;
        const Vec3 omega = x.head<3>();
        if (omega.norm() > 0.0) {
            delta.rotation = Eigen::AngleAxisd(omega.norm(), omega.normalized()).toRotationMatrix();
        }
        delta.translation = x.tail<3>();
        const RigidTransform candidate = delta.compose(result.transform);

        Correspondences next = pair_up(source, query, face_normals, candidate, options.search_radius_mm);
        if (next.rms > cur.rms) break;  // keep the last non-increasing state

        result.transform = candidate;
        cur = std::move(next);
        result.residuals.push_back(cur.rms);
        result.iterations_run = iter + 1;
        if (x.lpNorm<Eigen::Infinity>() < 1e-12 || cur.rms == 0.0) break;
    }
    return result;
}

DistanceStats mesh_distance(const TriangleMesh& source, const TriangleMesh& target) {
    require(!source.vertices.empty(), "mesh_distance: source mesh has no vertices");
    require(!target.faces.empty(), "mesh_distance: target mesh has no faces");
    const SurfaceQuery query(target);
    DistanceStats stats;
    for (const Vec3& v : source.vertices) {
        const double d = query.distance(v);
        stats.mean_mm += d;
        stats.max_mm = std::max(stats.max_mm, d);
    }
    stats.mean_mm /= static_cast<double>(source.vertices.size());
    return stats;
}

// ---------------------------------------------------------------------------
// Leave-one-out evaluation
// ---------------------------------------------------------------------------

std::vector<ErrorReport> leave_one_out_eval(const SyntheticScene& scene, const RefinementConfig& config) {
    const int n_views = static_cast<int>(scene.views.size());
    require(n_views >= 3, "leave_one_out_eval: need at least three views");
    const int n_vertices = scene.degraded.vertex_count();
    scene.albedo.validate(n_vertices);
    require(scene.ground_truth.vertex_count() == n_vertices,
            "leave_one_out_eval: degraded and ground-truth meshes differ in size");

    std::vector<double> reflectance = scene.albedo.expand(n_vertices);
    for (double& r : reflectance) r /= scene.light.brightness_c;

    std::vector<ErrorReport> reports;
    reports.reserve(n_views);
    for (int k = 0; k < n_views; ++k) {
        ErrorReport report;
        report.held_out_view = k;

        std::vector<View> training;
        training.reserve(n_views - 1);
        for (int j = 0; j < n_views; ++j) {
            if (j != k) training.push_back(scene.views[j]);
        }

        TriangleMesh refined;
        try {
            refined = refine(scene.degraded, training, scene.albedo, scene.light, config).mesh;
        } catch (const std::exception& error) {
            report.refinement_failed = true;
            report.diagnostic = error.what();
        }

        // Score renders of the held-out view against its observed image over
        // the pixels covered by every render involved. Observed coverage is
        // taken from the image itself: background renders to exactly zero
        // while covered pixels stay positive under the scene's ambient term.
        const View& held_out = scene.views[k];
        const RenderResult from_degraded =
            render_shading_image(scene.degraded, held_out, reflectance, scene.light);

        std::vector<std::uint8_t> mask(held_out.image.intensity.size(), 0);
        RenderResult from_refined;
        if (!report.refinement_failed) {
            from_refined = render_shading_image(refined, held_out, reflectance, scene.light);
        }
        for (int y = 0; y < held_out.image.height; ++y) {
            for (int x = 0; x < held_out.image.width; ++x) {
                bool ok = held_out.image.at(x, y) > 0.0 && from_degraded.raster.covered(x, y);
                if (!report.refinement_failed) ok = ok && from_refined.raster.covered(x, y);
                mask[static_cast<size_t>(y) * held_out.image.width + x] = ok ? 1 : 0;
            }
        }

        report.degraded_rmse = image_rmse(from_degraded.image, held_out.image, mask);
        report.degraded_gradient_rmse = gradient_rmse(from_degraded.image, held_out.image, mask);
        if (!report.refinement_failed) {
            report.refined_rmse = image_rmse(from_refined.image, held_out.image, mask);
            report.refined_gradient_rmse = gradient_rmse(from_refined.image, held_out.image, mask);
            const DistanceStats distance = mesh_distance(refined, scene.ground_truth);
            report.mean_distance_mm = distance.mean_mm;
            report.max_distance_mm = distance.max_mm;
        }
        reports.push_back(std::move(report));
    }
    return reports;
}

}  // namespace irmesh
