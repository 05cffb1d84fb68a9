#include "irmesh/refine.hpp"

#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace irmesh {

namespace {

constexpr double kTinyNormal = 1e-12;  // squared-length floor for wedge sums

// Displaced position of vertex v under the frozen update directions.
Vec3 displaced(const TriangleMesh& mesh, const RefinementState& state, int v) {
    return mesh.vertices[v] + state.delta[v] * state.frozen_normals[v];
}

// Rotates face (a,b,c) so it reads (center, p, q) with the winding intact;
// returns false when the face does not contain center.
bool wedge_of(const std::array<int, 3>& face, int center, int& p, int& q) {
    if (face[0] == center) {
        p = face[1];
        q = face[2];
    } else if (face[1] == center) {
        p = face[2];
        q = face[0];
    } else if (face[2] == center) {
        p = face[0];
        q = face[1];
    } else {
        return false;
    }
    return true;
}

}  // namespace

void RefinementConfig::validate() const {
    if (!(lambda1 >= 0.0) || !(lambda2 >= 0.0))
        throw std::invalid_argument("RefinementConfig: weights must be non-negative");
    if (outer_iterations < 1 || lm_max_inner < 1)
        throw std::invalid_argument("RefinementConfig: iteration counts must be at least 1");
    if (!(lm_initial_damping > 0.0))
        throw std::invalid_argument("RefinementConfig: damping must be positive");
    if (!(nl_floor >= 0.0) || !(convergence_tol_mm >= 0.0) || !(displacement_cap_mm >= 0.0))
        throw std::invalid_argument("RefinementConfig: thresholds must be non-negative");
}

RefinementState freeze_refinement_state(const TriangleMesh& mesh, const std::vector<View>& views,
                                        const std::vector<VisibilityMap>& visibility,
                                        const LightModel& light, double nl_floor) {
    if (!mesh.has_normals()) throw std::invalid_argument("freeze_refinement_state: normals missing");
    if (!mesh.has_adjacency()) throw std::invalid_argument("freeze_refinement_state: adjacency missing");
    if (views.empty() || views.size() != visibility.size())
        throw std::invalid_argument("freeze_refinement_state: views/visibility mismatch");
    light.validate();

    const int n = mesh.vertex_count();
    RefinementState state;
    state.delta.assign(n, 0.0);
    state.frozen_normals = mesh.normals;
    for (int i = 0; i < n; ++i)
        if (mesh.incident_faces[i].empty() || mesh.neighbors[i].size() < 2) state.excluded.push_back(i);
    std::vector<uint8_t> is_excluded(n, 0);
    for (int i : state.excluded) is_excluded[i] = 1;

    state.views.resize(views.size());
    for (size_t v = 0; v < views.size(); ++v) {
        views[v].validate();
        if (views[v].image.gamma_applied)
            throw std::invalid_argument("freeze_refinement_state: images must be linearized first");
        if (visibility[v].visible.size() != static_cast<size_t>(n))
            throw std::invalid_argument("freeze_refinement_state: visibility size mismatch");
        const DepthMap& depth = visibility[v].depth;
        if (depth.width != views[v].intrinsics.width || depth.height != views[v].intrinsics.height)
            throw std::invalid_argument("freeze_refinement_state: visibility depth resolution mismatch");

        std::vector<uint8_t> covered(depth.depth.size());
        for (size_t p = 0; p < covered.size(); ++p) covered[p] = depth.depth[p] > 0.0;

        ViewSamples& samples = state.views[v];
        samples.distance.assign(n, 0.0);
        samples.observed.assign(n, 0.0);
        samples.light_dir.assign(n, Vec3::Zero());
        samples.weight.assign(n, 0.0);

        const Vec3 light_pos = views[v].light_position_world();
        for (int i = 0; i < n; ++i) {
            if (is_excluded[i] || !visibility[v].visible[i]) continue;
            const auto proj = try_project(mesh.vertices[i], views[v]);
            if (!proj) continue;
            double intensity = 0.0;
            if (!sample_bilinear(views[v].image.intensity, views[v].image.width,
                                 views[v].image.height, proj->pixel, &covered, intensity))
                continue;
            const Vec3 to_light = light_pos - mesh.vertices[i];
            const double d = to_light.norm();
            if (d <= 0.0) continue;
            const Vec3 l = to_light / d;
            const double ndotl = mesh.normals[i].dot(l);
            if (!(ndotl > nl_floor)) continue;
            samples.distance[i] = d;
            samples.observed[i] = (intensity - light.ambient) * d * d;
            samples.light_dir[i] = l;
            samples.weight[i] = ndotl;
        }
    }
    return state;
}

double ResidualBlock::cost() const {
    double sum = 0.0;
    for (double r : residual) sum += r * r;
    return sum;
}

ResidualBlock build_data_residuals(const TriangleMesh& mesh, const AlbedoModel& albedo,
                                   const RefinementState& state) {
    const int n = mesh.vertex_count();
    albedo.validate(n);
    if (!mesh.has_adjacency()) throw std::invalid_argument("build_data_residuals: adjacency missing");
    if (static_cast<int>(state.delta.size()) != n ||
        static_cast<int>(state.frozen_normals.size()) != n)
        throw std::invalid_argument("build_data_residuals: state does not match the mesh");

    std::vector<uint8_t> is_excluded(n, 0);
    for (int i : state.excluded) is_excluded[i] = 1;

    ResidualBlock block;
    std::vector<int> cols;          // one-ring columns of the current vertex
    std::vector<Vec3> dg;           // d g / d delta_col, same order as cols
    for (int i = 0; i < n; ++i) {
        if (is_excluded[i]) continue;
        bool seen = false;
        for (const ViewSamples& samples : state.views) seen |= samples.weight[i] > 0.0;
        if (!seen) continue;

        // wedge sum g and its derivatives with respect to the vertex and ring
        cols.assign(1, i);
        dg.assign(1, Vec3::Zero());
        const Vec3 yi = displaced(mesh, state, i);
        Vec3 g = Vec3::Zero();
        for (int f : mesh.incident_faces[i]) {
            int p = 0, q = 0;
            if (!wedge_of(mesh.faces[f], i, p, q)) continue;
            const Vec3 ep = displaced(mesh, state, p) - yi;
            const Vec3 eq = displaced(mesh, state, q) - yi;
            g += ep.cross(eq);
            dg[0] += state.frozen_normals[i].cross(ep - eq);
            auto column = [&](int c) -> Vec3& {
                for (size_t k = 1; k < cols.size(); ++k)
                    if (cols[k] == c) return dg[k];
                cols.push_back(c);
                dg.emplace_back(Vec3::Zero());
                return dg.back();
            };
            column(p) += state.frozen_normals[p].cross(eq);
            column(q) += ep.cross(state.frozen_normals[q]);
        }
        const double len = g.norm();
        if (len * len < kTinyNormal) continue;  // degenerate ring this iteration
        const Vec3 normal = g / len;

        // project the derivatives through the normalization once per vertex
        for (Vec3& d : dg) d = (d - normal * normal.dot(d)) / len;

        const double crho = albedo.value_at(i);
        for (const ViewSamples& samples : state.views) {
            const double w = samples.weight[i];
            if (!(w > 0.0)) continue;
            const double sw = std::sqrt(w);
            const int row = block.rows();
            block.residual.push_back(sw * (samples.observed[i] - crho * normal.dot(samples.light_dir[i])));
            for (size_t k = 0; k < cols.size(); ++k)
                block.jacobian.emplace_back(row, cols[k], -sw * crho * samples.light_dir[i].dot(dg[k]));
        }
    }
    return block;
}

ResidualBlock build_smoothness_residuals(const TriangleMesh& mesh, const RefinementState& state,
                                         double lambda1) {
    if (!mesh.has_adjacency())
        throw std::invalid_argument("build_smoothness_residuals: adjacency missing");
    if (state.delta.size() != mesh.vertices.size())
        throw std::invalid_argument("build_smoothness_residuals: state does not match the mesh");
    if (!(lambda1 >= 0.0)) throw std::invalid_argument("build_smoothness_residuals: negative weight");

    ResidualBlock block;
    const double s = std::sqrt(lambda1);
    for (int i = 0; i < mesh.vertex_count(); ++i) {
        for (int j : mesh.neighbors[i]) {
            const int row = block.rows();
            block.residual.push_back(s * (state.delta[i] - state.delta[j]));
            block.jacobian.emplace_back(row, i, s);
            block.jacobian.emplace_back(row, j, -s);
        }
    }
    return block;
}

ResidualBlock build_regularization_residuals(const RefinementState& state, double lambda2) {
    if (!(lambda2 >= 0.0))
        throw std::invalid_argument("build_regularization_residuals: negative weight");
    ResidualBlock block;
    const double s = std::sqrt(lambda2);
    for (size_t i = 0; i < state.delta.size(); ++i) {
        block.residual.push_back(s * state.delta[i]);
        block.jacobian.emplace_back(static_cast<int>(i), static_cast<int>(i), s);
    }
    return block;
}

ResidualSystem assemble_system(const ResidualBlock& data, const ResidualBlock& smooth,
                               const ResidualBlock& reg, int vertex_count) {
    ResidualSystem system;
    system.data_rows = data.rows();
    system.smooth_rows = smooth.rows();
    system.reg_rows = reg.rows();
    const int rows = system.data_rows + system.smooth_rows + system.reg_rows;

    system.residual.resize(rows);
    int at = 0;
    for (double r : data.residual) system.residual[at++] = r;
    for (double r : smooth.residual) system.residual[at++] = r;
    for (double r : reg.residual) system.residual[at++] = r;

    std::vector<Eigen::Triplet<double>> triplets;
    triplets.reserve(data.jacobian.size() + smooth.jacobian.size() + reg.jacobian.size());
    for (const auto& t : data.jacobian) triplets.emplace_back(t.row(), t.col(), t.value());
    for (const auto& t : smooth.jacobian)
        triplets.emplace_back(t.row() + system.data_rows, t.col(), t.value());
    for (const auto& t : reg.jacobian)
        triplets.emplace_back(t.row() + system.data_rows + system.smooth_rows, t.col(), t.value());

    system.jacobian.resize(rows, vertex_count);
    system.jacobian.setFromTriplets(triplets.begin(), triplets.end());
    return system;
}

std::vector<double> solve_displacements(const ResidualSystem& system, const RefinementConfig& config,
                                        SolveReport* report, const SystemEvaluator& evaluate) {
    config.validate();
    const int n = static_cast<int>(system.jacobian.cols());
    SolveReport local;
    SolveReport& rep = report ? *report : local;
    rep = SolveReport{};

    std::vector<double> out(n, 0.0);
    if (system.jacobian.rows() == 0 || n == 0) return out;

    Eigen::SparseMatrix<double> jacobian = system.jacobian;
    Eigen::SparseMatrix<double> jt = jacobian.transpose();
    Eigen::SparseMatrix<double> jtj = jt * jacobian;
    Eigen::SparseMatrix<double> identity(n, n);
    identity.setIdentity();

    Eigen::VectorXd h = Eigen::VectorXd::Zero(n);
    Eigen::VectorXd r_cur = system.residual;
    double cost_cur = r_cur.squaredNorm();
    const double r_scale = 1.0 + std::sqrt(cost_cur);

    double diag_max = 0.0;
    for (int c = 0; c < n; ++c) diag_max = std::max(diag_max, jtj.coeff(c, c));
    const double mu_max = 1e12 * (1.0 + diag_max);
    double mu = config.lm_initial_damping;

    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver;
    for (int iter = 0; iter < config.lm_max_inner; ++iter) {
        const Eigen::VectorXd gradient = jt * r_cur;
        if (gradient.lpNorm<Eigen::Infinity>() <= 1e-14 * r_scale) break;

        solver.compute(jtj + mu * identity);
        if (solver.info() != Eigen::Success) {
            mu = std::max(mu * 10.0, 1e-8);
            if (mu > mu_max) {
                rep.singular = true;
                return std::vector<double>(n, 0.0);
            }
            continue;
        }
        const Eigen::VectorXd step = solver.solve(-gradient);
        if (solver.info() != Eigen::Success || !step.allFinite()) {
            mu = std::max(mu * 10.0, 1e-8);
            if (mu > mu_max) {
                rep.singular = true;
                return std::vector<double>(n, 0.0);
            }
            continue;
        }

        const Eigen::VectorXd trial_h = h + step;
        double trial_cost;
        ResidualSystem trial_system;
        if (evaluate) {
            std::vector<double> trial_delta(trial_h.data(), trial_h.data() + n);
            trial_system = evaluate(trial_delta);
            trial_cost = trial_system.residual.squaredNorm();
        } else {
            trial_cost = (system.residual + system.jacobian * trial_h).squaredNorm();
        }
        if (trial_cost < cost_cur) {
            h = trial_h;
            cost_cur = trial_cost;
            if (evaluate) {
                r_cur = trial_system.residual;
                jacobian = trial_system.jacobian;
                jt = jacobian.transpose();
                jtj = jt * jacobian;
            } else {
                r_cur = system.residual + system.jacobian * h;
            }
            mu /= 3.0;
            rep.accepted_steps += 1;
            rep.cost_history.push_back(cost_cur);
            if (step.lpNorm<Eigen::Infinity>() <= 1e-14 * (1.0 + h.lpNorm<Eigen::Infinity>())) break;
        } else {
            mu *= 10.0;
            if (mu > mu_max) break;  // no further progress available
        }
    }

    for (int i = 0; i < n; ++i) out[i] = h[i];
    return out;
}

RefineResult refine(const TriangleMesh& mesh, const std::vector<View>& views,
                    const AlbedoModel& albedo, const LightModel& light,
                    const RefinementConfig& config) {
    config.validate();
    albedo.validate(mesh.vertex_count());
    light.validate();
    if (views.empty()) throw std::invalid_argument("refine: no views");

    RefineResult result;
    TriangleMesh& work = result.mesh;
    work = mesh;
    if (!work.has_adjacency()) build_adjacency(work);

    const double mean_edge = mean_edge_length(work);
    const double cap =
        config.displacement_cap_mm > 0.0 ? config.displacement_cap_mm : 5.0 * mean_edge;
    const double tol =
        config.convergence_tol_mm > 0.0 ? config.convergence_tol_mm : 1e-3 * mean_edge;

    RefinementDiagnostics& diag = result.diagnostics;
    double lambda_scale = -1.0;  // mean squared data residual of the first iteration

    for (int iteration = 0; iteration < config.outer_iterations; ++iteration) {
        compute_vertex_normals(work);
        std::vector<VisibilityMap> visibility;
        visibility.reserve(views.size());
        for (const View& view : views)
            visibility.push_back(compute_visibility(work, view, default_visibility_bias(work)));

        RefinementState state =
            freeze_refinement_state(work, views, visibility, light, config.nl_floor);
        if (iteration == 0) diag.excluded_vertices = state.excluded;

        const ResidualBlock data0 = build_data_residuals(work, albedo, state);
        if (data0.rows() == 0) throw std::invalid_argument("refine: no usable observations");
        if (lambda_scale < 0.0) {
            lambda_scale = data0.cost() / data0.rows();
            if (!(lambda_scale > 0.0)) lambda_scale = 1.0;
        }
        const double l1 = config.lambda1 * lambda_scale;
        const double l2 = config.lambda2 * lambda_scale;

        const ResidualSystem system =
            assemble_system(data0, build_smoothness_residuals(work, state, l1),
                            build_regularization_residuals(state, l2), work.vertex_count());
        const SystemEvaluator evaluate = [&](const std::vector<double>& trial) {
            state.delta = trial;
            return assemble_system(build_data_residuals(work, albedo, state),
                                   build_smoothness_residuals(work, state, l1),
                                   build_regularization_residuals(state, l2),
                                   work.vertex_count());
        };
        SolveReport report;
        std::vector<double> delta = solve_displacements(system, config, &report, evaluate);
        diag.lm_cost_history.push_back(report.cost_history);
        if (report.singular) {
            diag.singular_solve = true;
            std::fill(delta.begin(), delta.end(), 0.0);
        }
        for (double& d : delta) d = std::clamp(d, -cap, cap);

        double max_step = 0.0;
        for (double d : delta) max_step = std::max(max_step, std::abs(d));
        diag.iterations_run = iteration + 1;
        if (max_step < tol) {
            // sub-tolerance step: leave the mesh untouched and report the
            // costs of the configuration we are keeping
            diag.data_cost.push_back(data0.cost());
            diag.smooth_cost.push_back(0.0);
            diag.reg_cost.push_back(0.0);
            diag.max_step_mm.push_back(max_step);
            diag.converged = true;
            break;
        }

        // move along frozen normals, backing off vertices that reverse a face
        std::vector<Vec3> old_cross(work.face_count());
        for (int f = 0; f < work.face_count(); ++f) {
            const auto& face = work.faces[f];
            old_cross[f] = (work.vertices[face[1]] - work.vertices[face[0]])
                               .cross(work.vertices[face[2]] - work.vertices[face[0]]);
        }
        std::vector<Vec3> candidate(work.vertices.size());
        std::vector<uint8_t> offender(work.vertex_count());
        bool clean = false;
        for (int attempt = 0; attempt < 8 && !clean; ++attempt) {
            for (int i = 0; i < work.vertex_count(); ++i)
                candidate[i] = work.vertices[i] + delta[i] * state.frozen_normals[i];
            clean = true;
            std::fill(offender.begin(), offender.end(), 0);
            for (int f = 0; f < work.face_count(); ++f) {
                if (old_cross[f].squaredNorm() < kTinyNormal) continue;
                const auto& face = work.faces[f];
                const Vec3 now = (candidate[face[1]] - candidate[face[0]])
                                     .cross(candidate[face[2]] - candidate[face[0]]);
                if (old_cross[f].dot(now) < 0.0) {
                    clean = false;
                    for (int v : face) offender[v] = 1;
                }
            }
            for (int i = 0; i < work.vertex_count(); ++i)
                if (offender[i]) delta[i] *= 0.5;
        }
        if (!clean) {
            diag.aborted_on_flip = true;
            break;
        }

        // record the objective at the step we are about to apply, evaluated
        // against the pre-update configuration the solve linearized around
        max_step = 0.0;
        for (double d : delta) max_step = std::max(max_step, std::abs(d));
        state.delta = delta;
        diag.data_cost.push_back(build_data_residuals(work, albedo, state).cost());
        diag.smooth_cost.push_back(build_smoothness_residuals(work, state, l1).cost());
        diag.reg_cost.push_back(build_regularization_residuals(state, l2).cost());
        diag.max_step_mm.push_back(max_step);
        work.vertices = candidate;
    }

    compute_vertex_normals(work);
    return result;
}

}  // namespace irmesh
