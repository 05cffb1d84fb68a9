#include "irmesh/cli.hpp"

#include <chrono>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "irmesh/calibration.hpp"
#include "irmesh/io.hpp"
#include "irmesh/pipeline.hpp"
#include "irmesh/raster.hpp"
#include "irmesh/synth_eval.hpp"

namespace irmesh {

namespace {

namespace fs = std::filesystem;

// Two-column numeric CSV: any line whose first field does not parse (e.g. a
// header) is skipped.
std::vector<std::pair<double, double>> load_pair_csv(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error(path.string() + ": cannot open for reading");
    std::vector<std::pair<double, double>> pairs;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        for (char& c : line)
            if (c == ',' || c == ';' || c == '\t') c = ' ';
        std::istringstream ls(line);
        double a = 0.0, b = 0.0;
        if (!(ls >> a)) continue;
        if (!(ls >> b))
            throw std::runtime_error(path.string() + ": line " + std::to_string(line_no) +
                                     ": expected two numeric columns");
        pairs.emplace_back(a, b);
    }
    return pairs;
}

std::uint64_t time_seed() {
    return static_cast<std::uint64_t>(
        std::chrono::steady_clock::now().time_since_epoch().count());
}

int command_calibrate_gamma(const std::string& samples_path, int subset, int iterations,
                            double threshold, std::uint64_t seed) {
    CalibrationSamples samples;
    for (const auto& [rendered, observed] : load_pair_csv(samples_path)) {
        samples.rendered.push_back(rendered);
        samples.observed.push_back(observed);
    }
    const GammaFit fit = fit_gamma_ransac(samples, subset, iterations, threshold, seed);
    std::cout << std::setprecision(17) << "gamma " << fit.gamma << "\n"
              << "inlier_ratio " << fit.inlier_ratio << "\n"
              << "inlier_count " << fit.inlier_count << "\n";
    return 0;
}

int command_calibrate_falloff(const std::string& samples_path) {
    FalloffSamples samples;
    for (const auto& [distance, intensity] : load_pair_csv(samples_path)) {
        samples.distance_mm.push_back(distance);
        samples.intensity.push_back(intensity);
    }
    const FalloffFit fit = fit_falloff_exponent(samples);
    std::cout << std::setprecision(17) << "exponent " << fit.exponent << "\n"
              << "scale " << fit.scale << "\n";
    return 0;
}

// Loads a config's mesh and views and linearizes the images, mirroring the
// pipeline's load/linearize stages, for subcommands that stop early.
void load_job_inputs(const ProjectConfig& config, TriangleMesh& mesh, std::vector<View>& views) {
    mesh = load_mesh(config.paths.mesh);
    views = load_views(config.paths.views);
    if (views.empty()) throw std::runtime_error(config.paths.views + ": no views");
    if (config.light.override_light_offset)
        for (View& view : views) view.light_offset = config.light.light_offset;
    for (View& view : views) {
        if (!view.image.gamma_applied) continue;
        if (config.light.gamma <= 0.0)
            throw std::runtime_error(
                "images are gamma-encoded but light.gamma is unknown; run 'calibrate gamma' and "
                "set light.gamma in the config");
        if (config.light.gamma != 1.0) view.image = linearize(view.image, config.light.gamma);
        else view.image.gamma_applied = false;
    }
}

int command_albedo(const ProjectConfig& config) {
    TriangleMesh mesh;
    std::vector<View> views;
    load_job_inputs(config, mesh, views);

    LightModel light;
    light.brightness_c = 1.0;
    light.ambient = config.light.ambient;
    const AlbedoModel model = solve_albedo(config, mesh, views, light);

    fs::create_directories(config.paths.output);
    const fs::path out = fs::path(config.paths.output) / "albedo.txt";
    save_albedo(model, out);
    if (model.mode == AlbedoMode::Global) {
        std::cout << std::setprecision(17) << "mode global\nvalue " << model.global_value << "\n";
    } else {
        std::cout << "mode grouped\ngroups " << model.group_values.size() << "\nvalues";
        std::cout << std::setprecision(17);
        for (double v : model.group_values) std::cout << " " << v;
        std::cout << "\n";
    }
    std::cout << "saved " << out.string() << "\n";
    return 0;
}

int command_refine(const ProjectConfig& config) {
    const PipelineResult result = run_pipeline(config);
    std::cout << "vertices " << result.mesh.vertex_count() << "\n"
              << "iterations " << result.diagnostics.iterations_run << "\n"
              << "converged " << (result.diagnostics.converged ? 1 : 0) << "\n";
    if (!result.diagnostics.data_cost.empty())
        std::cout << std::setprecision(17) << "final_data_cost "
                  << result.diagnostics.data_cost.back() << "\n";
    if (!result.reports.empty()) {
        double baseline = 0.0, refined = 0.0;
        for (const ErrorReport& r : result.reports) {
            baseline += r.degraded_rmse;
            refined += r.refined_rmse;
        }
        std::cout << std::setprecision(17) << "mean_view_rmse_before "
                  << baseline / result.reports.size() << "\n"
                  << "mean_view_rmse_after " << refined / result.reports.size() << "\n";
        if (!config.paths.truth.empty())
            std::cout << "mean_distance_mm " << result.reports.front().mean_distance_mm << "\n"
                      << "max_distance_mm " << result.reports.front().max_distance_mm << "\n";
    }
    for (const fs::path& artifact : result.artifacts)
        std::cout << "artifact " << (fs::path(config.paths.output) / artifact).string() << "\n";
    return 0;
}

int command_render(const std::string& mesh_path, const std::string& views_path,
                   const std::string& albedo_path, double ambient, const std::string& out_dir,
                   const std::string& format) {
    if (format != ".pfm" && format != ".png")
        throw std::runtime_error("unsupported --format '" + format + "' (use .pfm or .png)");
    const TriangleMesh mesh = load_mesh(mesh_path);
    const std::vector<View> views = load_views(views_path);
    const AlbedoModel albedo = load_albedo(albedo_path);
    albedo.validate(mesh.vertex_count());

    LightModel light;
    light.brightness_c = 1.0;  // albedo values carry the brightness product
    light.ambient = ambient;

    fs::create_directories(out_dir);
    std::vector<fs::path> files;
    for (size_t k = 0; k < views.size(); ++k) {
        const RenderResult rendered = render_shading_image(mesh, views[k], albedo, light);
        char name[32];
        std::snprintf(name, sizeof name, "render_%03zu%s", k, format.c_str());
        save_image(rendered.image, fs::path(out_dir) / name);
        files.emplace_back(name);
        std::cout << "wrote " << (fs::path(out_dir) / name).string() << "\n";
    }
    write_manifest(out_dir, files);
    return 0;
}

int command_synth(const std::string& kind_name, const SceneParams& params, std::uint64_t seed,
                  const std::string& out_dir) {
    static const std::map<std::string, SceneKind> kinds = {
        {"sphere", SceneKind::Sphere},
        {"bumpy_sphere", SceneKind::BumpySphere},
        {"relief_plane", SceneKind::ReliefPlane},
        {"two_material_plane", SceneKind::TwoMaterialPlane},
    };
    const auto found = kinds.find(kind_name);
    if (found == kinds.end())
        throw std::runtime_error("unknown scene kind '" + kind_name +
                                 "' (sphere, bumpy_sphere, relief_plane, two_material_plane)");
    const SyntheticScene scene = generate_scene(found->second, params, seed);
    save_scene(scene, out_dir);
    std::cout << "kind " << kind_name << "\n"
              << "views " << scene.views.size() << "\n"
              << "vertices " << scene.ground_truth.vertex_count() << "\n"
              << "scene " << out_dir << "\n";
    return 0;
}

int command_eval_loo(const std::string& scene_dir, const RefinementConfig& config,
                     const std::string& out_csv) {
    const SyntheticScene scene = load_scene(scene_dir);
    const std::vector<ErrorReport> reports = leave_one_out_eval(scene, config);
    if (!out_csv.empty()) save_reports_csv(reports, out_csv);

    int improved = 0, failed = 0;
    for (const ErrorReport& r : reports) {
        if (r.refinement_failed) ++failed;
        else if (r.refined_rmse < r.degraded_rmse) ++improved;
        std::cout << std::setprecision(17) << "fold " << r.held_out_view << " degraded_rmse "
                  << r.degraded_rmse << " refined_rmse " << r.refined_rmse;
        if (r.refinement_failed) std::cout << " failed " << r.diagnostic;
        std::cout << "\n";
    }
    std::cout << "improved " << improved << "/" << reports.size() << "\n";
    if (failed > 0) {
        std::cout << "failed_folds " << failed << "\n";
        return 1;
    }
    return 0;
}

int command_eval_dist(const std::string& mesh_path, const std::string& truth_path, bool use_icp) {
    TriangleMesh mesh = load_mesh(mesh_path);
    const TriangleMesh truth = load_mesh(truth_path);
    if (use_icp) {
        const IcpResult icp = align_icp(mesh, truth);
        for (auto& v : mesh.vertices) v = icp.transform.apply(v);
        std::cout << std::setprecision(17) << "icp_rms_mm "
                  << (icp.residuals.empty() ? 0.0 : icp.residuals.back()) << "\n";
    }
    const DistanceStats stats = mesh_distance(mesh, truth);
    std::cout << std::setprecision(17) << "mean_distance_mm " << stats.mean_mm << "\n"
              << "max_distance_mm " << stats.max_mm << "\n";
    return 0;
}

void add_refinement_flags(CLI::App* cmd, RefinementConfig& config) {
    cmd->add_option("--lambda1", config.lambda1, "Neighbor-smoothness weight");
    cmd->add_option("--lambda2", config.lambda2, "Displacement-magnitude weight");
    cmd->add_option("--iterations", config.outer_iterations, "Outer iterations");
    cmd->add_option("--nl-floor", config.nl_floor, "Minimum n.l for data rows");
    cmd->add_option("--tolerance", config.convergence_tol_mm, "Convergence step tolerance (mm)");
    cmd->add_option("--cap", config.displacement_cap_mm, "Per-iteration displacement cap (mm)");
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
    CLI::App app{"irmesh: recovers fine surface detail on a coarse mesh from IR shading images"};
    app.require_subcommand(1);

    // ---- calibrate ----
    CLI::App* calibrate = app.add_subcommand("calibrate", "Fit the sensor response or falloff");
    calibrate->require_subcommand(1);

    std::string gamma_samples;
    int gamma_subset = 1000;
    int gamma_iterations = 200;
    double gamma_threshold = 0.05;
    std::uint64_t gamma_seed = 0;
    CLI::App* gamma_cmd = calibrate->add_subcommand(
        "gamma", "Fit the response curve from rendered,observed intensity pairs");
    gamma_cmd->add_option("--samples", gamma_samples, "CSV of rendered,observed pairs")->required();
    gamma_cmd->add_option("--subset", gamma_subset, "Consensus subset size");
    gamma_cmd->add_option("--iterations", gamma_iterations, "Hypothesis count");
    gamma_cmd->add_option("--threshold", gamma_threshold, "Inlier threshold");
    gamma_cmd->add_option("--seed", gamma_seed, "Random seed");

    std::string falloff_samples;
    CLI::App* falloff_cmd = calibrate->add_subcommand(
        "falloff", "Fit the distance falloff exponent from distance,intensity pairs");
    falloff_cmd->add_option("--samples", falloff_samples, "CSV of distance_mm,intensity pairs")
        ->required();

    // ---- config-driven subcommands (albedo, refine) ----
    std::string albedo_config_path;
    CLI::App* albedo_cmd =
        app.add_subcommand("albedo", "Estimate the reflectance model for a job");
    albedo_cmd->add_option("--config", albedo_config_path, "Job config (JSON)")->required();
    std::string albedo_mode_override;
    albedo_cmd->add_option("--mode", albedo_mode_override, "Override albedo mode");

    std::string refine_config_path;
    CLI::App* refine_cmd = app.add_subcommand("refine", "Run the full refinement pipeline");
    refine_cmd->add_option("--config", refine_config_path, "Job config (JSON)")->required();
    std::string refine_output_override, refine_albedo_mode_override;
    double refine_gamma_override = -1.0, refine_ambient_override = -1.0;
    std::uint64_t refine_seed_override = 0;
    bool refine_seed_given = false, refine_time_seed = false;
    RefinementConfig refine_flag_values;
    refine_cmd->add_option("--output", refine_output_override, "Override the output directory");
    refine_cmd->add_option("--mode", refine_albedo_mode_override, "Override albedo mode");
    refine_cmd->add_option("--gamma", refine_gamma_override, "Override light.gamma");
    refine_cmd->add_option("--ambient", refine_ambient_override, "Override light.ambient");
    refine_cmd->add_option("--seed", refine_seed_override, "Override the seed")
        ->each([&](const std::string&) { refine_seed_given = true; });
    refine_cmd->add_flag("--time-seed", refine_time_seed,
                         "Seed from the clock instead of the config (non-deterministic)");
    add_refinement_flags(refine_cmd, refine_flag_values);

    // ---- render ----
    std::string render_mesh, render_views, render_albedo, render_out, render_format = ".pfm";
    double render_ambient = 0.0;
    CLI::App* render_cmd = app.add_subcommand("render", "Render shading images of a mesh");
    render_cmd->add_option("--mesh", render_mesh, "Mesh (.ply/.obj)")->required();
    render_cmd->add_option("--views", render_views, "Views file")->required();
    render_cmd->add_option("--albedo", render_albedo, "Albedo model file")->required();
    render_cmd->add_option("--out", render_out, "Output directory")->required();
    render_cmd->add_option("--ambient", render_ambient, "Ambient term");
    render_cmd->add_option("--format", render_format, "Image format (.pfm or .png)");

    // ---- synth ----
    std::string synth_kind, synth_out;
    std::uint64_t synth_seed = 0;
    bool synth_time_seed = false;
    SceneParams synth_params;
    CLI::App* synth_cmd = app.add_subcommand("synth", "Generate a synthetic scene directory");
    synth_cmd->add_option("--kind", synth_kind,
                          "sphere | bumpy_sphere | relief_plane | two_material_plane")
        ->required();
    synth_cmd->add_option("--out", synth_out, "Scene directory to create")->required();
    synth_cmd->add_option("--views", synth_params.view_count, "Number of views");
    synth_cmd->add_option("--seed", synth_seed, "Random seed");
    synth_cmd->add_flag("--time-seed", synth_time_seed,
                        "Seed from the clock instead of --seed (non-deterministic)");
    synth_cmd->add_option("--subdivisions", synth_params.sphere_subdivisions,
                          "Sphere subdivision level");
    synth_cmd->add_option("--bump-amplitude", synth_params.bump_amplitude_mm,
                          "Bump amplitude (mm)");
    synth_cmd->add_option("--bump-frequency", synth_params.bump_frequency,
                          "Bump frequency (rad/mm)");
    synth_cmd->add_option("--plane-resolution", synth_params.plane_resolution,
                          "Plane grid resolution");
    synth_cmd->add_option("--albedo-value", synth_params.albedo, "Base reflectance");
    synth_cmd->add_option("--albedo-ratio", synth_params.albedo_ratio,
                          "Two-material reflectance ratio");
    synth_cmd->add_option("--noise", synth_params.intensity_noise_sigma,
                          "Intensity noise sigma");
    synth_cmd->add_option("--smoothing-iterations", synth_params.smoothing_iterations,
                          "Degradation smoothing iterations");

    // ---- eval ----
    CLI::App* eval_cmd = app.add_subcommand("eval", "Evaluate refinement quality");
    eval_cmd->require_subcommand(1);

    std::string loo_scene, loo_csv;
    RefinementConfig loo_config;
    CLI::App* loo_cmd =
        eval_cmd->add_subcommand("loo", "Leave-one-out scoring over a scene's views");
    loo_cmd->add_option("--scene", loo_scene, "Scene directory from 'synth'")->required();
    loo_cmd->add_option("--csv", loo_csv, "Write per-fold rows to this CSV");
    add_refinement_flags(loo_cmd, loo_config);

    std::string dist_mesh, dist_truth;
    bool dist_no_icp = false;
    CLI::App* dist_cmd = eval_cmd->add_subcommand("dist", "Mesh-to-mesh distance");
    dist_cmd->add_option("--mesh", dist_mesh, "Mesh to measure")->required();
    dist_cmd->add_option("--truth", dist_truth, "Reference mesh")->required();
    dist_cmd->add_flag("--no-icp", dist_no_icp, "Skip rigid alignment before measuring");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& error) {
        return app.exit(error);
    }

    try {
        if (gamma_cmd->parsed())
            return command_calibrate_gamma(gamma_samples, gamma_subset, gamma_iterations,
                                           gamma_threshold, gamma_seed);
        if (falloff_cmd->parsed()) return command_calibrate_falloff(falloff_samples);
        if (albedo_cmd->parsed()) {
            ProjectConfig config = load_config(albedo_config_path);
            if (!albedo_mode_override.empty()) config.albedo.mode = albedo_mode_override;
            config.validate();
            return command_albedo(config);
        }
        if (refine_cmd->parsed()) {
            ProjectConfig config = load_config(refine_config_path);
            if (!refine_output_override.empty()) config.paths.output = refine_output_override;
            if (!refine_albedo_mode_override.empty())
                config.albedo.mode = refine_albedo_mode_override;
            if (refine_gamma_override >= 0.0) config.light.gamma = refine_gamma_override;
            if (refine_ambient_override >= 0.0) config.light.ambient = refine_ambient_override;
            if (refine_seed_given) config.seed = refine_seed_override;
            if (refine_time_seed) config.seed = time_seed();
            for (const std::string& flag :
                 {"--lambda1", "--lambda2", "--iterations", "--nl-floor", "--tolerance", "--cap"}) {
                if (refine_cmd->count(flag) == 0) continue;
                if (flag == "--lambda1") config.refinement.lambda1 = refine_flag_values.lambda1;
                if (flag == "--lambda2") config.refinement.lambda2 = refine_flag_values.lambda2;
                if (flag == "--iterations")
                    config.refinement.outer_iterations = refine_flag_values.outer_iterations;
                if (flag == "--nl-floor") config.refinement.nl_floor = refine_flag_values.nl_floor;
                if (flag == "--tolerance")
                    config.refinement.convergence_tol_mm = refine_flag_values.convergence_tol_mm;
                if (flag == "--cap")
                    config.refinement.displacement_cap_mm = refine_flag_values.displacement_cap_mm;
            }
            config.validate();
            return command_refine(config);
        }
        if (render_cmd->parsed())
            return command_render(render_mesh, render_views, render_albedo, render_ambient,
                                  render_out, render_format);
        if (synth_cmd->parsed()) {
            if (synth_time_seed) synth_seed = time_seed();
            return command_synth(synth_kind, synth_params, synth_seed, synth_out);
        }
        if (loo_cmd->parsed()) return command_eval_loo(loo_scene, loo_config, loo_csv);
        if (dist_cmd->parsed()) return command_eval_dist(dist_mesh, dist_truth, !dist_no_icp);
        std::cerr << "error: no subcommand selected\n";
        return 1;
    } catch (const std::exception& error) {
        std::cerr << "error: " << error.what() << "\n";
        return 1;
    }
}

}  // namespace irmesh
