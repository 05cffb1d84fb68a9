#pragma once

#include <Eigen/Sparse>

#include <functional>
#include <vector>

#include "irmesh/albedo.hpp"
#include "irmesh/camera.hpp"
#include "irmesh/raster.hpp"
#include "irmesh/shading.hpp"

namespace irmesh {

// Tuning for the displacement optimizer. lambda1/lambda2 are dimensionless:
// they are multiplied by the mean squared data residual of the first
// iteration, so the same values behave consistently across scene scales.
struct RefinementConfig {
    double lambda1 = 1.0;  // neighbor displacement smoothness
    double lambda2 = 0.1;  // displacement magnitude regularization
    int outer_iterations = 10;
    double lm_initial_damping = 1e-4;
    int lm_max_inner = 30;
    double nl_floor = 0.1;             // data rows require n.l strictly above this
    double convergence_tol_mm = 0.0;   // 0 picks 1e-3 x mean edge length
    double displacement_cap_mm = 0.0;  // 0 picks 5 x mean edge length

    void validate() const;
};

// Per-view observation constants, frozen for one outer iteration. Arrays are
// indexed by vertex; weight == 0 marks pairs that contribute no residual.
struct ViewSamples {
    std::vector<double> distance;   // vertex-to-light distance (mm)
    std::vector<double> observed;   // (I - ambient) * d^2 at the frozen projection
    std::vector<Vec3> light_dir;    // unit vertex-to-light direction
    std::vector<double> weight;     // confidence n.l, clamped at 0
};

// Everything the residual builders treat as constant while delta varies.
struct RefinementState {
    std::vector<double> delta;         // displacement along frozen normals (mm)
    std::vector<Vec3> frozen_normals;  // unit update directions
    std::vector<ViewSamples> views;
    std::vector<int> excluded;  // vertices whose one-ring is too small for a normal
};

// Samples each visible vertex in each view: bilinear intensity restricted to
// pixels the surface covers (silhouette-straddling supports are dropped),
// light distance/direction from the current vertex position, and the n.l
// confidence weight from the current vertex normal. Throws if a view's image
// is still in gamma space.
RefinementState freeze_refinement_state(const TriangleMesh& mesh, const std::vector<View>& views,
                                        const std::vector<VisibilityMap>& visibility,
                                        const LightModel& light, double nl_floor = 0.0);

// One group of residual rows with its Jacobian entries; rows are local to
// the block, columns are vertex indices.
struct ResidualBlock {
    std::vector<double> residual;
    std::vector<Eigen::Triplet<double>> jacobian;

    int rows() const { return static_cast<int>(residual.size()); }
    double cost() const;  // sum of squared residuals
};

// Shading rows: r = sqrt(w) * (observed - albedo_i * (n_i(delta) . l)) per
// kept vertex-view pair, where n_i(delta) is the normalized sum of one-ring
// wedge cross products after displacing every vertex along its frozen
// normal. The row depends on delta at the vertex and its one-ring only.
// Albedo values carry the brightness product, as produced by the estimators.
ResidualBlock build_data_residuals(const TriangleMesh& mesh, const AlbedoModel& albedo,
                                   const RefinementState& state);

// r = sqrt(lambda1) * (delta_i - delta_j) for every directed edge.
ResidualBlock build_smoothness_residuals(const TriangleMesh& mesh, const RefinementState& state,
                                         double lambda1);

// r = sqrt(lambda2) * delta_i for every vertex.
ResidualBlock build_regularization_residuals(const RefinementState& state, double lambda2);

// The stacked least-squares problem over all three blocks.
struct ResidualSystem {
    Eigen::VectorXd residual;
    Eigen::SparseMatrix<double> jacobian;  // rows x vertex_count
    int data_rows = 0;
    int smooth_rows = 0;
    int reg_rows = 0;
};

ResidualSystem assemble_system(const ResidualBlock& data, const ResidualBlock& smooth,
                               const ResidualBlock& reg, int vertex_count);

struct SolveReport {
    bool singular = false;  // normal equations unsolvable even at maximum damping
    int accepted_steps = 0;
    std::vector<double> cost_history;  // cost after each accepted step
};

// Re-evaluates the stacked system at a trial displacement, using the same
// frozen observations and row layout as the system being solved. Lets the
// solver accept steps against the true cost instead of the local model.
using SystemEvaluator = std::function<ResidualSystem(const std::vector<double>& delta)>;

// Damped least-squares steps on the stacked system: solves
// (J^T J + mu I) s = -J^T r around the current step, accepting only strict
// cost decreases, raising mu on rejection and lowering it on success. With
// an evaluator, trial steps are scored by re-evaluating the true residual
// and the Jacobian is refreshed at each accepted point; without one the
// system is treated as linear and the model cost |r + J h|^2 decides.
// Returns the accumulated step; a system that cannot be factored even at
// maximum damping yields all zeros and sets the report's singular flag.
std::vector<double> solve_displacements(const ResidualSystem& system, const RefinementConfig& config,
                                        SolveReport* report = nullptr,
                                        const SystemEvaluator& evaluate = {});

struct RefinementDiagnostics {
    // one entry per outer iteration, evaluated at the applied displacement
    std::vector<double> data_cost;
    std::vector<double> smooth_cost;
    std::vector<double> reg_cost;
    std::vector<double> max_step_mm;
    // accepted-step cost sequence of each outer iteration's solve
    std::vector<std::vector<double>> lm_cost_history;
    std::vector<int> excluded_vertices;  // too few neighbors for a wedge normal
    int iterations_run = 0;
    bool converged = false;        // stopped on a sub-tolerance step
    bool singular_solve = false;   // some iteration fell back to a zero step
    bool aborted_on_flip = false;  // halving could not clear reversed faces
};

struct RefineResult {
    TriangleMesh mesh;
    RefinementDiagnostics diagnostics;
};

// Outer loop: recompute normals and visibility, freeze the per-view
// observation constants, assemble and solve for displacements, then move
// each vertex along its frozen normal. Steps are capped, checked against
// face reversal (offending vertices are halved and retried), and the loop
// stops early once the largest proposed step drops below tolerance — in
// that case the step is not applied, so a mesh already matching its
// observations is returned unchanged.
RefineResult refine(const TriangleMesh& mesh, const std::vector<View>& views,
                    const AlbedoModel& albedo, const LightModel& light,
                    const RefinementConfig& config = {});

}  // namespace irmesh
