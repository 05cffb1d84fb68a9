#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "irmesh/albedo.hpp"
#include "irmesh/camera.hpp"
#include "irmesh/geometry.hpp"
#include "irmesh/refine.hpp"
#include "irmesh/shading.hpp"

namespace irmesh {

// ---------------------------------------------------------------------------
// Synthetic scenes
// ---------------------------------------------------------------------------

enum class SceneKind {
    Sphere,            // plain sphere
    BumpySphere,       // sphere with low-amplitude sinusoidal relief
    ReliefPlane,       // plane with raised stripes, tapered to a flat border
    TwoMaterialPlane,  // flat plane split into two albedo groups
};

struct SceneParams {
    int view_count = 12;

    // Sphere geometry.
    double sphere_radius_mm = 100.0;
    int sphere_subdivisions = 5;
    Vec3 sphere_center = Vec3(0.0, 0.0, 1300.0);
    double bump_amplitude_mm = 2.0;
    double bump_frequency = 0.157;  // radians per mm along each axis

    // Plane geometry (centered at the origin, normal +z).
    double plane_size_mm = 200.0;
    int plane_resolution = 81;      // vertices per side
    double stripe_depth_mm = 0.8;   // peak-to-trough stripe height
    double stripe_period_mm = 25.0;

    // Materials. Albedo values are reflectances in (0, 1]; the scene's
    // AlbedoModel stores brightness_c * reflectance, matching the product
    // the estimators recover.
    double albedo = 0.8;        // single-material scenes
    double albedo_ratio = 2.0;  // TwoMaterialPlane: first / second material

    // Capture rig: cameras on a circle around the subject, all aimed at its
    // center, each with a rigidly attached light. 0 distance picks a default
    // per kind (1300 mm for spheres, 1100 mm for planes).
    CameraIntrinsics intrinsics{1000.0, 1000.0, 319.5, 239.5, 640, 480};
    double camera_distance_mm = 0.0;
    Vec3 light_offset = Vec3(30.0, -12.0, 0.0);
    double brightness_c = 9.0e5;
    double ambient = 0.005;

    // Degradation: uniform-weight Laplacian smoothing. Spheres are re-inflated
    // by the mean radial shrinkage of an identically smoothed plain sphere, so
    // the degraded mesh differs from the truth by lost detail rather than by a
    // bulk contraction; plane borders are pinned for the same reason.
    int smoothing_iterations = 25;
    double smoothing_factor = 0.5;

    // Optional corruption, off by default. Intensity noise is i.i.d. Gaussian
    // per pixel (clamped to [0, 1]); pose jitter displaces each camera center
    // by a Gaussian offset before aiming it.
    double intensity_noise_sigma = 0.0;
    double pose_jitter_mm = 0.0;

    void validate() const;
};

// A rendered test scene with known ground truth. `views` hold the images
// rendered from `ground_truth`; `degraded` is the smoothed starting mesh with
// identical topology. `material_labels` give the per-vertex material group.
struct SyntheticScene {
    TriangleMesh ground_truth;
    TriangleMesh degraded;
    std::vector<View> views;
    LightModel light;
    AlbedoModel albedo;
    std::vector<int> material_labels;
};

// Builds a scene deterministically: the same kind, parameters, and seed
// produce bit-identical meshes and images. The seed only feeds the optional
// noise; noise-free scenes do not consume randomness at all.
SyntheticScene generate_scene(SceneKind kind, const SceneParams& params, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Image error metrics
// ---------------------------------------------------------------------------

// Root-mean-square intensity difference over the pixels where `mask` is
// nonzero. Images must share dimensions and gamma state, and the mask must
// select at least one pixel.
double image_rmse(const ShadingImage& a, const ShadingImage& b, const std::vector<std::uint8_t>& mask);

// RMSE between the forward-difference gradient magnitudes of the two images,
// evaluated where the mask, eroded by one pixel (3x3), is nonzero. Erosion
// keeps both differences inside the masked region, so images differing by a
// constant offset score exactly zero.
double gradient_rmse(const ShadingImage& a, const ShadingImage& b, const std::vector<std::uint8_t>& mask);

// ---------------------------------------------------------------------------
// Mesh alignment and distance
// ---------------------------------------------------------------------------

struct RigidTransform {
    Mat3 rotation = Mat3::Identity();
    Vec3 translation = Vec3::Zero();

    Vec3 apply(const Vec3& p) const { return rotation * p + translation; }
    RigidTransform inverse() const;
    // this * other: apply `other` first, then this.
    RigidTransform compose(const RigidTransform& other) const;
};

struct IcpOptions {
    int max_iterations = 30;
    // Pairs farther than this from the target surface are discarded;
    // 0 disables the cutoff. Throws if no correspondence survives.
    double search_radius_mm = 0.0;
};

struct IcpResult {
    RigidTransform transform;       // maps source points onto the target
    std::vector<double> residuals;  // point-to-plane RMS after each accepted update
    int iterations_run = 0;
};

// Point-to-plane ICP from source vertices to the target surface. Each sweep
// pairs every transformed source vertex with its closest point on the target,
// solves the linearized rigid update, and keeps it only if the RMS
// point-to-plane residual does not increase, so `residuals` is non-increasing.
IcpResult align_icp(const TriangleMesh& source, const TriangleMesh& target, const IcpOptions& options = {});

struct DistanceStats {
    double mean_mm = 0.0;
    double max_mm = 0.0;
};

// Mean and maximum distance from each source vertex to the closest point on
// the target surface.
DistanceStats mesh_distance(const TriangleMesh& source, const TriangleMesh& target);

// ---------------------------------------------------------------------------
// Leave-one-out evaluation
// ---------------------------------------------------------------------------

// Per-fold result: the held-out view is re-rendered from the degraded mesh
// and from the mesh refined on the remaining views, and both renders are
// scored against the observed image over their common coverage.
struct ErrorReport {
    int held_out_view = -1;
    double degraded_rmse = 0.0;
    double refined_rmse = 0.0;
    double degraded_gradient_rmse = 0.0;
    double refined_gradient_rmse = 0.0;
    double mean_distance_mm = 0.0;  // refined mesh vs. ground truth
    double max_distance_mm = 0.0;
    RigidTransform alignment;  // transform applied before measuring distance
    bool refinement_failed = false;
    std::string diagnostic;  // failure reason when refinement_failed
};

// Runs one refinement per view with that view withheld. A failed fold is
// reported with `refinement_failed` set and its refined metrics zeroed rather
// than aborting the sweep. Requires at least three views, so every fold still
// refines on at least two.
std::vector<ErrorReport> leave_one_out_eval(const SyntheticScene& scene, const RefinementConfig& config);

}  // namespace irmesh
