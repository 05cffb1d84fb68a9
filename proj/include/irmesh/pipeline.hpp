#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "irmesh/io.hpp"
#include "irmesh/refine.hpp"

namespace irmesh {

// Full job description for the refinement pipeline. Loaded from a JSON file;
// every path is resolved against the file's directory and must exist (the
// output directory is created on demand).
struct ProjectConfig {
    struct Paths {
        std::string mesh;    // starting mesh (.ply/.obj)
        std::string views;   // views file
        std::string albedo;  // optional: saved albedo model to use as-is
        std::string truth;   // optional: ground-truth mesh, enables distance checks
        std::string output;  // artifact directory
    } paths;

    // Shading model of the capture. `value` is the global brightness-albedo
    // product; 0 means estimate it from the data. `gamma` describes the
    // stored images: 1 = already linear, 0 = unknown (an error if any image
    // needs linearizing). light_offset, when enabled, overrides the per-view
    // offsets from the views file.
    struct Light {
        double value = 0.0;
        double ambient = 0.0;
        double gamma = 1.0;
        bool override_light_offset = false;
        Vec3 light_offset = Vec3::Zero();
    } light;

    // Albedo estimation: "global" (one value), "grouped" (cluster + MRF), or
    // "file" (use paths.albedo verbatim).
    struct Albedo {
        std::string mode = "global";
        double low_clip = 0.02;
        double high_clip = 0.98;
        double min_ndotl = 0.1;
        double variance_target = 0.95;  // PCA rule for the group count
        double position_weight = 0.1;   // position-column scale in the feature space
        double mrf_lambda = 1.0;        // label-smoothing strength
    } albedo;

    RefinementConfig refinement;

    // target_vertex_count > 0 remeshes the input before refinement. The
    // sigmas parameterize the depth-map prefilter and only apply when the
    // job starts from sensor depth rather than a mesh.
    struct Preprocess {
        int target_vertex_count = 0;
        double spatial_sigma = 0.0;
        double range_sigma = 0.0;
        double depth_sigma = 0.0;
    } preprocess;

    std::uint64_t seed = 0;

    void validate() const;
};

ProjectConfig load_config(const std::filesystem::path& path);
void save_config(const ProjectConfig& config, const std::filesystem::path& path);

struct PipelineResult {
    TriangleMesh mesh;
    AlbedoModel albedo;
    RefinementDiagnostics diagnostics;
    std::vector<ErrorReport> reports;             // per-view scores of the refined mesh
    std::vector<std::filesystem::path> artifacts; // files written, manifest last
};

// Runs load -> preprocess -> linearize -> albedo -> refine -> evaluate and
// writes every artifact plus a checksum manifest to the output directory.
// Stage failures raise std::runtime_error prefixed with the stage name;
// artifacts written before the failure are kept.
PipelineResult run_pipeline(const ProjectConfig& config);

// The albedo stage alone: computes per-view visibility and estimates the
// model per config.albedo.mode ("file" loads paths.albedo verbatim). Views
// must already be linear.
AlbedoModel solve_albedo(const ProjectConfig& config, const TriangleMesh& mesh,
                         const std::vector<View>& views, const LightModel& light);

// Scores a mesh against each view: renders it and compares with the observed
// image over their common coverage (degraded fields describe `baseline`,
// refined fields describe `mesh`). Distances are filled when `truth` is
// non-null.
std::vector<ErrorReport> score_views(const TriangleMesh& baseline, const TriangleMesh& mesh,
                                     const std::vector<View>& views, const AlbedoModel& albedo,
                                     const LightModel& light, const TriangleMesh* truth);

// CSV writers for the diagnostics the CLI emits.
void save_reports_csv(const std::vector<ErrorReport>& reports, const std::filesystem::path& path);
void save_diagnostics_csv(const RefinementDiagnostics& diagnostics, const std::filesystem::path& path);

}  // namespace irmesh
