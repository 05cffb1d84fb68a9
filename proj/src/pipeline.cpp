#include "irmesh/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "irmesh/raster.hpp"
#include "irmesh/remesh.hpp"
#include "irmesh/synth_eval.hpp"

namespace irmesh {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void require(bool condition, const std::string& message) {
    if (!condition) throw std::invalid_argument("ProjectConfig: " + message);
}

}  // namespace

void ProjectConfig::validate() const {
    require(!paths.mesh.empty(), "paths.mesh is required");
    require(!paths.views.empty(), "paths.views is required");
    require(!paths.output.empty(), "paths.output is required");

    require(std::isfinite(light.value) && light.value >= 0.0, "light.value must be >= 0");
    require(std::isfinite(light.ambient) && light.ambient >= 0.0 && light.ambient < 1.0,
            "light.ambient must be in [0, 1)");
    require(std::isfinite(light.gamma) && light.gamma >= 0.0, "light.gamma must be >= 0");

    require(albedo.mode == "global" || albedo.mode == "grouped" || albedo.mode == "file",
            "albedo.mode must be 'global', 'grouped', or 'file'");
    require(albedo.mode != "file" || !paths.albedo.empty(),
            "albedo.mode 'file' needs paths.albedo");
    require(albedo.low_clip >= 0.0 && albedo.low_clip < albedo.high_clip && albedo.high_clip <= 1.0,
            "albedo clips must satisfy 0 <= low < high <= 1");
    require(albedo.min_ndotl >= 0.0 && albedo.min_ndotl < 1.0, "albedo.min_ndotl must be in [0, 1)");
    require(albedo.variance_target > 0.0 && albedo.variance_target <= 1.0,
            "albedo.variance_target must be in (0, 1]");
    require(albedo.position_weight > 0.0, "albedo.position_weight must be > 0");
    require(albedo.mrf_lambda >= 0.0, "albedo.mrf_lambda must be >= 0");

    refinement.validate();

    require(preprocess.target_vertex_count >= 0, "preprocess.target_vertex_count must be >= 0");
    require(preprocess.spatial_sigma >= 0.0 && preprocess.range_sigma >= 0.0 &&
                preprocess.depth_sigma >= 0.0,
            "preprocess sigmas must be >= 0");
}

// ---------------------------------------------------------------------------
// Config file I/O
// ---------------------------------------------------------------------------

namespace {

void check_keys(const json& object, const fs::path& file, const std::string& section,
                std::initializer_list<const char*> allowed) {
    for (const auto& item : object.items()) {
        const bool known = std::any_of(allowed.begin(), allowed.end(),
                                       [&](const char* k) { return item.key() == k; });
        if (!known)
            throw std::runtime_error(file.string() + ": unknown key '" + item.key() + "' in " +
                                     section);
    }
}

template <typename T>
void read_field(const json& object, const char* key, T& out) {
    if (object.contains(key)) out = object.at(key).get<T>();
}

std::string resolve_path(const std::string& value, const fs::path& base, const fs::path& file,
                         bool must_exist) {
    if (value.empty()) return value;
    fs::path full = fs::path(value).is_absolute() ? fs::path(value) : base / value;
    full = full.lexically_normal();
    if (must_exist && !fs::exists(full))
        throw std::runtime_error(file.string() + ": referenced path does not exist: " +
                                 full.string());
    return full.string();
}

}  // namespace

ProjectConfig load_config(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error(path.string() + ": cannot open for reading");
    json root;
    try {
        root = json::parse(in);
    } catch (const json::parse_error& error) {
        throw std::runtime_error(path.string() + ": " + error.what());
    }

    ProjectConfig config;
    check_keys(root, path, "the config",
               {"paths", "light", "albedo", "refinement", "preprocess", "seed"});

    if (root.contains("paths")) {
        const json& section = root.at("paths");
        check_keys(section, path, "'paths'", {"mesh", "views", "albedo", "truth", "output"});
        read_field(section, "mesh", config.paths.mesh);
        read_field(section, "views", config.paths.views);
        read_field(section, "albedo", config.paths.albedo);
        read_field(section, "truth", config.paths.truth);
        read_field(section, "output", config.paths.output);
    }
    if (root.contains("light")) {
        const json& section = root.at("light");
        check_keys(section, path, "'light'", {"value", "ambient", "gamma", "light_offset"});
        read_field(section, "value", config.light.value);
        read_field(section, "ambient", config.light.ambient);
        read_field(section, "gamma", config.light.gamma);
        if (section.contains("light_offset")) {
            const json& offset = section.at("light_offset");
            if (!offset.is_array() || offset.size() != 3)
                throw std::runtime_error(path.string() + ": light_offset must be [x, y, z]");
            config.light.override_light_offset = true;
            for (int i = 0; i < 3; ++i) config.light.light_offset[i] = offset.at(i).get<double>();
        }
    }
    if (root.contains("albedo")) {
        const json& section = root.at("albedo");
        check_keys(section, path, "'albedo'",
                   {"mode", "low_clip", "high_clip", "min_ndotl", "variance_target",
                    "position_weight", "mrf_lambda"});
        read_field(section, "mode", config.albedo.mode);
        read_field(section, "low_clip", config.albedo.low_clip);
        read_field(section, "high_clip", config.albedo.high_clip);
        read_field(section, "min_ndotl", config.albedo.min_ndotl);
        read_field(section, "variance_target", config.albedo.variance_target);
        read_field(section, "position_weight", config.albedo.position_weight);
        read_field(section, "mrf_lambda", config.albedo.mrf_lambda);
    }
    if (root.contains("refinement")) {
        const json& section = root.at("refinement");
        check_keys(section, path, "'refinement'",
                   {"lambda1", "lambda2", "outer_iterations", "lm_initial_damping", "lm_max_inner",
                    "nl_floor", "convergence_tol_mm", "displacement_cap_mm"});
        read_field(section, "lambda1", config.refinement.lambda1);
        read_field(section, "lambda2", config.refinement.lambda2);
        read_field(section, "outer_iterations", config.refinement.outer_iterations);
        read_field(section, "lm_initial_damping", config.refinement.lm_initial_damping);
        read_field(section, "lm_max_inner", config.refinement.lm_max_inner);
        read_field(section, "nl_floor", config.refinement.nl_floor);
        read_field(section, "convergence_tol_mm", config.refinement.convergence_tol_mm);
        read_field(section, "displacement_cap_mm", config.refinement.displacement_cap_mm);
    }
    if (root.contains("preprocess")) {
        const json& section = root.at("preprocess");
        check_keys(section, path, "'preprocess'",
                   {"target_vertex_count", "spatial_sigma", "range_sigma", "depth_sigma"});
        read_field(section, "target_vertex_count", config.preprocess.target_vertex_count);
        read_field(section, "spatial_sigma", config.preprocess.spatial_sigma);
        read_field(section, "range_sigma", config.preprocess.range_sigma);
        read_field(section, "depth_sigma", config.preprocess.depth_sigma);
    }
    read_field(root, "seed", config.seed);

    const fs::path base = path.has_parent_path() ? path.parent_path() : fs::path(".");
    config.paths.mesh = resolve_path(config.paths.mesh, base, path, true);
    config.paths.views = resolve_path(config.paths.views, base, path, true);
    config.paths.albedo = resolve_path(config.paths.albedo, base, path, true);
    config.paths.truth = resolve_path(config.paths.truth, base, path, true);
    config.paths.output = resolve_path(config.paths.output, base, path, false);

    config.validate();
    return config;
}

void save_config(const ProjectConfig& config, const fs::path& path) {
    json root;
    root["paths"] = {{"mesh", config.paths.mesh},
                     {"views", config.paths.views},
                     {"output", config.paths.output}};
    if (!config.paths.albedo.empty()) root["paths"]["albedo"] = config.paths.albedo;
    if (!config.paths.truth.empty()) root["paths"]["truth"] = config.paths.truth;

    root["light"] = {{"value", config.light.value},
                     {"ambient", config.light.ambient},
                     {"gamma", config.light.gamma}};
    if (config.light.override_light_offset)
        root["light"]["light_offset"] = {config.light.light_offset.x(),
                                         config.light.light_offset.y(),
                                         config.light.light_offset.z()};

    root["albedo"] = {{"mode", config.albedo.mode},
                      {"low_clip", config.albedo.low_clip},
                      {"high_clip", config.albedo.high_clip},
                      {"min_ndotl", config.albedo.min_ndotl},
                      {"variance_target", config.albedo.variance_target},
                      {"position_weight", config.albedo.position_weight},
                      {"mrf_lambda", config.albedo.mrf_lambda}};

    root["refinement"] = {{"lambda1", config.refinement.lambda1},
                          {"lambda2", config.refinement.lambda2},
                          {"outer_iterations", config.refinement.outer_iterations},
                          {"lm_initial_damping", config.refinement.lm_initial_damping},
                          {"lm_max_inner", config.refinement.lm_max_inner},
                          {"nl_floor", config.refinement.nl_floor},
                          {"convergence_tol_mm", config.refinement.convergence_tol_mm},
                          {"displacement_cap_mm", config.refinement.displacement_cap_mm}};

    root["preprocess"] = {{"target_vertex_count", config.preprocess.target_vertex_count},
                          {"spatial_sigma", config.preprocess.spatial_sigma},
                          {"range_sigma", config.preprocess.range_sigma},
                          {"depth_sigma", config.preprocess.depth_sigma}};

    root["seed"] = config.seed;

    std::ofstream out(path);
    if (!out) throw std::runtime_error(path.string() + ": cannot open for writing");
    out << root.dump(2) << "\n";
    if (!out) throw std::runtime_error(path.string() + ": write failed");
}

// ---------------------------------------------------------------------------
// Scoring and CSV output
// ---------------------------------------------------------------------------

std::vector<ErrorReport> score_views(const TriangleMesh& baseline, const TriangleMesh& mesh,
                                     const std::vector<View>& views, const AlbedoModel& albedo,
                                     const LightModel& light, const TriangleMesh* truth) {
    DistanceStats distance;
    RigidTransform alignment;
    if (truth != nullptr) {
        const IcpResult icp = align_icp(mesh, *truth);
        alignment = icp.transform;
        TriangleMesh aligned = mesh;
        for (auto& v : aligned.vertices) v = alignment.apply(v);
        distance = mesh_distance(aligned, *truth);
    }

    std::vector<ErrorReport> reports;
    reports.reserve(views.size());
    for (size_t k = 0; k < views.size(); ++k) {
        const View& view = views[k];
        const RenderResult from_baseline = render_shading_image(baseline, view, albedo, light);
        const RenderResult from_mesh = render_shading_image(mesh, view, albedo, light);

        std::vector<std::uint8_t> mask(static_cast<size_t>(view.image.width) * view.image.height, 0);
        for (int y = 0; y < view.image.height; ++y)
            for (int x = 0; x < view.image.width; ++x)
                mask[static_cast<size_t>(y) * view.image.width + x] =
                    view.image.at(x, y) > 0.0 && from_baseline.raster.covered(x, y) &&
                    from_mesh.raster.covered(x, y);

        ErrorReport report;
        report.held_out_view = static_cast<int>(k);
        report.degraded_rmse = image_rmse(from_baseline.image, view.image, mask);
        report.refined_rmse = image_rmse(from_mesh.image, view.image, mask);
        report.degraded_gradient_rmse = gradient_rmse(from_baseline.image, view.image, mask);
        report.refined_gradient_rmse = gradient_rmse(from_mesh.image, view.image, mask);
        if (truth != nullptr) {
            report.mean_distance_mm = distance.mean_mm;
            report.max_distance_mm = distance.max_mm;
            report.alignment = alignment;
        }
        reports.push_back(std::move(report));
    }
    return reports;
}

namespace {

std::string csv_quote(const std::string& text) {
    std::string out = "\"";
    for (char c : text) {
        out.push_back(c);
        if (c == '"') out.push_back('"');
    }
    out.push_back('"');
    return out;
}

}  // namespace

void save_reports_csv(const std::vector<ErrorReport>& reports, const fs::path& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error(path.string() + ": cannot open for writing");
    out << std::setprecision(17);
    out << "view,degraded_rmse,refined_rmse,degraded_gradient_rmse,refined_gradient_rmse,"
           "mean_distance_mm,max_distance_mm,refinement_failed,diagnostic\n";
    for (const ErrorReport& r : reports) {
        out << r.held_out_view << "," << r.degraded_rmse << "," << r.refined_rmse << ","
            << r.degraded_gradient_rmse << "," << r.refined_gradient_rmse << ","
            << r.mean_distance_mm << "," << r.max_distance_mm << "," << (r.refinement_failed ? 1 : 0)
            << "," << csv_quote(r.diagnostic) << "\n";
    }
    if (!out) throw std::runtime_error(path.string() + ": write failed");
}

void save_diagnostics_csv(const RefinementDiagnostics& diagnostics, const fs::path& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error(path.string() + ": cannot open for writing");
    out << std::setprecision(17);
    out << "iteration,data_cost,smooth_cost,reg_cost,max_step_mm,lm_accepted_steps\n";
    for (size_t i = 0; i < diagnostics.data_cost.size(); ++i) {
        out << i << "," << diagnostics.data_cost[i] << "," << diagnostics.smooth_cost[i] << ","
            << diagnostics.reg_cost[i] << "," << diagnostics.max_step_mm[i] << ","
            << (i < diagnostics.lm_cost_history.size() ? diagnostics.lm_cost_history[i].size() : 0)
            << "\n";
    }
    if (!out) throw std::runtime_error(path.string() + ": write failed");
}

// ---------------------------------------------------------------------------
// Pipeline
// ---------------------------------------------------------------------------

namespace {

template <typename F>
auto stage(const char* name, F&& body) {
    try {
        return body();
    } catch (const std::exception& error) {
        throw std::runtime_error(std::string(name) + " stage: " + error.what());
    }
}

AlbedoModel solve_albedo_with_visibility(const ProjectConfig& config, const TriangleMesh& mesh,
                                         const std::vector<View>& views,
                                         const std::vector<VisibilityMap>& visibility,
                                         const LightModel& light) {
    AlbedoModel model;
    if (config.albedo.mode == "file") {
        model = load_albedo(config.paths.albedo);
        model.validate(mesh.vertex_count());
        return model;
    }

    AlbedoEstimationConfig estimation;
    estimation.low_clip = config.albedo.low_clip;
    estimation.high_clip = config.albedo.high_clip;
    estimation.min_ndotl = config.albedo.min_ndotl;

    if (config.albedo.mode == "global") {
        model.mode = AlbedoMode::Global;
        model.global_value = config.light.value > 0.0
                                 ? config.light.value
                                 : estimate_global_albedo(mesh, views, visibility, light, estimation);
    } else {
        const VertexAlbedoEstimate estimate =
            estimate_vertex_albedo(mesh, views, visibility, light, estimation);
        AlbedoFeatures features = build_albedo_features(mesh, estimate.value);
        for (auto& row : features.rows) row.head<3>() *= config.albedo.position_weight;
        features.kappa *= config.albedo.position_weight;
        const int k = select_group_count(features, config.albedo.variance_target);
        std::vector<int> labels = kmeans_cluster(features, k, config.seed);
        labels = smooth_labels_mrf(mesh, labels, features, config.albedo.mrf_lambda);
        model.mode = AlbedoMode::Grouped;
        model.labels = std::move(labels);
        model.group_values = group_values(model.labels, estimate.value);
    }
    model.validate(mesh.vertex_count());
    return model;
}

}  // namespace

AlbedoModel solve_albedo(const ProjectConfig& config, const TriangleMesh& mesh,
                         const std::vector<View>& views, const LightModel& light) {
    const double bias = default_visibility_bias(mesh);
    std::vector<VisibilityMap> visibility;
    visibility.reserve(views.size());
    for (const View& view : views) visibility.push_back(compute_visibility(mesh, view, bias));
    return solve_albedo_with_visibility(config, mesh, views, visibility, light);
}

PipelineResult run_pipeline(const ProjectConfig& config) {
    config.validate();
    const fs::path output = config.paths.output;
    fs::create_directories(output);

    PipelineResult result;
    auto emit = [&](const fs::path& name) { result.artifacts.push_back(name); };

    try {
        // Snapshot of the resolved job, for provenance.
        stage("load", [&] { save_config(config, output / "config.json"); });
        emit("config.json");

        TriangleMesh mesh;
        std::vector<View> views;
        TriangleMesh truth;
        bool have_truth = false;
        stage("load", [&] {
            mesh = load_mesh(config.paths.mesh);
            views = load_views(config.paths.views);
            if (views.empty()) throw std::runtime_error("views file contains no views");
            if (config.light.override_light_offset)
                for (View& view : views) view.light_offset = config.light.light_offset;
            if (!config.paths.truth.empty()) {
                truth = load_mesh(config.paths.truth);
                have_truth = true;
            }
        });

        stage("preprocess", [&] {
            if (config.preprocess.target_vertex_count > 0) {
                mesh = isotropic_remesh(mesh, config.preprocess.target_vertex_count);
                build_adjacency(mesh);
                compute_vertex_normals(mesh);
            }
        });

        bool linearized = false;
        stage("linearize", [&] {
            for (View& view : views) {
                if (!view.image.gamma_applied) continue;
                if (config.light.gamma <= 0.0)
                    throw std::runtime_error(
                        "images are gamma-encoded but light.gamma is unknown; run 'calibrate "
                        "gamma' and set light.gamma in the config");
                if (config.light.gamma != 1.0) {
                    view.image = linearize(view.image, config.light.gamma);
                } else {
                    view.image.gamma_applied = false;
                }
                linearized = true;
            }
        });
        if (linearized) {
            stage("linearize", [&] { save_views(views, output / "views_linear.txt"); });
            emit("views_linear.txt");
            for (size_t k = 0; k < views.size(); ++k) {
                char name[40];
                std::snprintf(name, sizeof name, "views_linear_%03zu.pfm", k);
                emit(name);
            }
        }

        LightModel light;
        light.brightness_c = 1.0;  // albedo values carry the brightness product
        light.ambient = config.light.ambient;
        light.gamma = 1.0;

        stage("albedo", [&] {
            result.albedo = solve_albedo(config, mesh, views, light);
            save_albedo(result.albedo, output / "albedo.txt");
        });
        emit("albedo.txt");

        stage("refine", [&] {
            RefineResult refined = refine(mesh, views, result.albedo, light, config.refinement);
            result.mesh = std::move(refined.mesh);
            result.diagnostics = std::move(refined.diagnostics);
            save_mesh(result.mesh, output / "refined.ply");
            save_diagnostics_csv(result.diagnostics, output / "diagnostics.csv");
        });
        emit("refined.ply");
        emit("diagnostics.csv");

        stage("evaluate", [&] {
            result.reports = score_views(mesh, result.mesh, views, result.albedo, light,
                                         have_truth ? &truth : nullptr);
            save_reports_csv(result.reports, output / "report.csv");
        });
        emit("report.csv");

        write_manifest(output, result.artifacts);
        result.artifacts.emplace_back("manifest.json");
        return result;
    } catch (...) {
        // Keep whatever was produced, with checksums, for post-mortem use.
        try {
            write_manifest(output, result.artifacts);
        } catch (...) {
        }
        throw;
    }
}

}  // namespace irmesh
