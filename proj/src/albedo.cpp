#include "irmesh/albedo.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

namespace irmesh {

namespace {

double median_of(std::vector<double> v) {
    const size_t mid = v.size() / 2;
    std::nth_element(v.begin(), v.begin() + mid, v.end());
    double m = v[mid];
    if (v.size() % 2 == 0) {
        const double lower = *std::max_element(v.begin(), v.begin() + mid);
        m = 0.5 * (m + lower);
    }
    return m;
}

void check_estimation_inputs(const TriangleMesh& mesh, const std::vector<View>& views,
                             const std::vector<VisibilityMap>& visibility, const LightModel& light,
                             const AlbedoEstimationConfig& config) {
    if (!mesh.has_normals()) throw std::invalid_argument("albedo estimation: mesh normals missing");
    if (views.empty() || views.size() != visibility.size())
        throw std::invalid_argument("albedo estimation: views/visibility mismatch");
    light.validate();
    if (!(config.low_clip >= 0.0 && config.high_clip <= 1.0 && config.low_clip < config.high_clip) ||
        !(config.min_ndotl > 0.0))
        throw std::invalid_argument("albedo estimation: bad clipping configuration");
    for (size_t v = 0; v < views.size(); ++v) {
        views[v].validate();
        if (views[v].image.gamma_applied)
            throw std::invalid_argument("albedo estimation: images must be linearized first");
        if (visibility[v].visible.size() != mesh.vertices.size())
            throw std::invalid_argument("albedo estimation: visibility size mismatch");
        if (visibility[v].depth.width != views[v].intrinsics.width ||
            visibility[v].depth.height != views[v].intrinsics.height)
            throw std::invalid_argument("albedo estimation: visibility depth resolution mismatch");
    }
}

// Applies `emit(vertex, d^2 (I - ambient) / (n.l))` for every observation
// that passes the visibility and clipping filters. Vertex-major order keeps
// the global and per-vertex estimators numerically consistent.
//
// Sampling is restricted to pixels the surface actually covers (taken from
// the visibility depth buffers): near the silhouette a vertex projects next
// to background pixels, and blending those into the bilinear support would
// bias the intensity low. Such observations are dropped; the affected
// vertices are recovered by the ring-fill stage instead.
template <typename F>
void for_each_observation(const TriangleMesh& mesh, const std::vector<View>& views,
                          const std::vector<VisibilityMap>& visibility, const LightModel& light,
                          const AlbedoEstimationConfig& config, F&& emit) {
    std::vector<std::vector<uint8_t>> covered(views.size());
    for (size_t v = 0; v < views.size(); ++v) {
        const DepthMap& depth = visibility[v].depth;
        covered[v].resize(depth.depth.size());
        for (size_t p = 0; p < covered[v].size(); ++p) covered[v][p] = depth.depth[p] > 0.0;
    }
    for (int i = 0; i < mesh.vertex_count(); ++i) {
        for (size_t v = 0; v < views.size(); ++v) {
            if (!visibility[v].visible[i]) continue;
            const auto proj = try_project(mesh.vertices[i], views[v]);
            if (!proj) continue;
            double intensity = 0.0;
            if (!sample_bilinear(views[v].image.intensity, views[v].image.width,
                                 views[v].image.height, proj->pixel, &covered[v], intensity))
                continue;
            if (intensity < config.low_clip || intensity > config.high_clip) continue;

            const Vec3 light_pos = views[v].light_position_world();
            const Vec3 to_light = light_pos - mesh.vertices[i];
            const double d = to_light.norm();
            if (d <= 0.0) continue;
            const double ndotl = mesh.normals[i].dot(to_light / d);
            if (ndotl < config.min_ndotl) continue;

            emit(i, d * d * (intensity - light.ambient) / ndotl);
        }
    }
}

}  // namespace

void AlbedoModel::validate(int vertex_count) const {
    if (mode == AlbedoMode::Global) {
        if (!(global_value > 0.0) || !std::isfinite(global_value))
            throw std::invalid_argument("AlbedoModel: global value must be positive and finite");
        return;
    }
    if (group_values.empty()) throw std::invalid_argument("AlbedoModel: no groups");
    for (double g : group_values)
        if (!(g > 0.0) || !std::isfinite(g))
            throw std::invalid_argument("AlbedoModel: group values must be positive and finite");
    if (static_cast<int>(labels.size()) != vertex_count)
        throw std::invalid_argument("AlbedoModel: one label per vertex required");
    for (int l : labels)
        if (l < 0 || l >= static_cast<int>(group_values.size()))
            throw std::invalid_argument("AlbedoModel: label out of range");
}

double AlbedoModel::value_at(int vertex) const {
    return mode == AlbedoMode::Global ? global_value : group_values[labels[vertex]];
}

std::vector<double> AlbedoModel::expand(int vertex_count) const {
    validate(vertex_count);
    std::vector<double> out(vertex_count);
    for (int i = 0; i < vertex_count; ++i) out[i] = value_at(i);
    return out;
}

double estimate_global_albedo(const TriangleMesh& mesh, const std::vector<View>& views,
                              const std::vector<VisibilityMap>& visibility, const LightModel& light,
                              const AlbedoEstimationConfig& config) {
    check_estimation_inputs(mesh, views, visibility, light, config);
    double sum = 0.0;
    long long count = 0;
    for_each_observation(mesh, views, visibility, light, config, [&](int, double value) {
        sum += value;
        ++count;
    });
    if (count == 0) throw std::invalid_argument("estimate_global_albedo: no contributing observations");
    return sum / static_cast<double>(count);
}

VertexAlbedoEstimate estimate_vertex_albedo(const TriangleMesh& mesh, const std::vector<View>& views,
                                            const std::vector<VisibilityMap>& visibility,
                                            const LightModel& light,
                                            const AlbedoEstimationConfig& config) {
    check_estimation_inputs(mesh, views, visibility, light, config);
    if (!mesh.has_adjacency())
        throw std::invalid_argument("estimate_vertex_albedo: mesh adjacency missing");

    const int n = mesh.vertex_count();
    VertexAlbedoEstimate est;
    est.value.assign(n, 0.0);
    est.observation_count.assign(n, 0);
    for_each_observation(mesh, views, visibility, light, config, [&](int i, double value) {
        est.value[i] += value;
        est.observation_count[i] += 1;
    });

    std::vector<double> observed_values;
    for (int i = 0; i < n; ++i) {
        if (est.observation_count[i] > 0) {
            est.value[i] /= est.observation_count[i];
            observed_values.push_back(est.value[i]);
        }
    }
    if (observed_values.empty())
        throw std::invalid_argument("estimate_vertex_albedo: no contributing observations");

    // flood the unobserved vertices with one-ring medians, sweeping so each
    // pass only reads the previous pass's fills
    std::vector<uint8_t> has(n);
    for (int i = 0; i < n; ++i) has[i] = est.observation_count[i] > 0;
    bool progress = true;
    while (progress) {
        progress = false;
        std::vector<std::pair<int, double>> stage;
        for (int i = 0; i < n; ++i) {
            if (has[i]) continue;
            std::vector<double> ring;
            for (int u : mesh.neighbors[i])
                if (has[u]) ring.push_back(est.value[u]);
            if (ring.empty()) continue;
            stage.emplace_back(i, median_of(std::move(ring)));
        }
        for (const auto& [i, v] : stage) {
            est.value[i] = v;
            has[i] = 1;
            progress = true;
        }
    }
    const double fallback = median_of(observed_values);
    for (int i = 0; i < n; ++i)
        if (!has[i]) est.value[i] = fallback;  // islands with no observed vertex at all
    return est;
}

AlbedoFeatures build_albedo_features(const TriangleMesh& mesh, const std::vector<double>& vertex_albedo) {
    if (vertex_albedo.size() != mesh.vertices.size())
        throw std::invalid_argument("build_albedo_features: one albedo per vertex required");
    for (double a : vertex_albedo)
        if (!std::isfinite(a)) throw std::invalid_argument("build_albedo_features: albedo not finite");

    const int n = mesh.vertex_count();
    Vec3 mean_pos = Vec3::Zero();
    double mean_alb = 0.0;
    for (int i = 0; i < n; ++i) {
        mean_pos += mesh.vertices[i];
        mean_alb += vertex_albedo[i];
    }
    mean_pos /= n;
    mean_alb /= n;
    double var_pos = 0.0, var_alb = 0.0;  // var_pos pooled over the three axes
    for (int i = 0; i < n; ++i) {
        var_pos += (mesh.vertices[i] - mean_pos).squaredNorm() / 3.0;
        var_alb += (vertex_albedo[i] - mean_alb) * (vertex_albedo[i] - mean_alb);
    }
    var_pos /= n;
    var_alb /= n;

    AlbedoFeatures features;
    features.kappa = (var_pos > 0.0 && var_alb > 0.0) ? std::sqrt(var_alb / var_pos) : 1.0;
    features.rows.reserve(n);
    for (int i = 0; i < n; ++i) {
        const Vec3 p = features.kappa * mesh.vertices[i];
        features.rows.push_back(Eigen::Vector4d(p.x(), p.y(), p.z(), vertex_albedo[i]));
    }
    return features;
}

int select_group_count(const AlbedoFeatures& features, double variance_target) {
    const int n = static_cast<int>(features.rows.size());
    if (n < 2) throw std::invalid_argument("select_group_count: needs at least 2 vertices");
    if (!(variance_target > 0.0 && variance_target <= 1.0))
        throw std::invalid_argument("select_group_count: variance target outside (0, 1]");

    Eigen::Vector4d mean = Eigen::Vector4d::Zero();
    for (const auto& r : features.rows) mean += r;
    mean /= n;
    Eigen::Matrix4d cov = Eigen::Matrix4d::Zero();
    for (const auto& r : features.rows) cov += (r - mean) * (r - mean).transpose();
    cov /= n;

    Eigen::SelfAdjointEigenSolver<Eigen::Matrix4d> eig(cov);
    Eigen::Vector4d ev = eig.eigenvalues().reverse();  // descending
    double total = 0.0;
    for (int i = 0; i < 4; ++i) {
        ev[i] = std::max(ev[i], 0.0);
        total += ev[i];
    }
    if (total <= 0.0) return 1;

    double cum = 0.0;
    for (int k = 1; k <= 4; ++k) {
        cum += ev[k - 1];
        if (cum / total >= variance_target) return std::clamp(k, 1, 8);
    }
    return 4;
}

std::vector<int> kmeans_cluster(const AlbedoFeatures& features, int k, uint64_t seed) {
    const int n = static_cast<int>(features.rows.size());
    if (k < 1 || k > n) throw std::invalid_argument("kmeans_cluster: k outside [1, vertex count]");
    const auto& rows = features.rows;

    // canonical scan order: all reductions run over the value-sorted rows so
    // the result is independent of the caller's vertex order
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        for (int c = 0; c < 4; ++c) {
            if (rows[a][c] < rows[b][c]) return true;
            if (rows[a][c] > rows[b][c]) return false;
        }
        return false;
    });

    std::mt19937_64 rng(seed);
    auto uniform01 = [&] { return (rng() >> 11) * 0x1.0p-53; };

    // k-means++ seeding over the sorted rows
    std::vector<Eigen::Vector4d> centroids;
    centroids.push_back(rows[order[rng() % n]]);
    std::vector<double> d2(n);
    while (static_cast<int>(centroids.size()) < k) {
        double total = 0.0;
        for (int s = 0; s < n; ++s) {
            double best = std::numeric_limits<double>::infinity();
            for (const auto& c : centroids) best = std::min(best, (rows[order[s]] - c).squaredNorm());
            d2[s] = best;
            total += best;
        }
        int pick = static_cast<int>(rng() % n);
        if (total > 0.0) {
            const double r = uniform01() * total;
            double cum = 0.0;
            for (int s = 0; s < n; ++s) {
                cum += d2[s];
                if (cum > r) {
                    pick = s;
                    break;
                }
            }
        }
        centroids.push_back(rows[order[pick]]);
    }

    std::vector<int> labels(n, 0);
    auto assign = [&] {
        for (int i = 0; i < n; ++i) {
            double best = std::numeric_limits<double>::infinity();
            int arg = 0;
            for (int c = 0; c < k; ++c) {
                const double d = (rows[i] - centroids[c]).squaredNorm();
                if (d < best) {
                    best = d;
                    arg = c;
                }
            }
            labels[i] = arg;
        }
    };

    for (int it = 0; it < 100; ++it) {
        assign();

        std::vector<Eigen::Vector4d> next(k, Eigen::Vector4d::Zero());
        std::vector<int> count(k, 0);
        for (int s = 0; s < n; ++s) {
            next[labels[order[s]]] += rows[order[s]];
            ++count[labels[order[s]]];
        }
        for (int c = 0; c < k; ++c) {
            if (count[c] > 0) {
                next[c] /= count[c];
                continue;
            }
            // re-seed an emptied cluster from the worst-served point
            double worst = -1.0;
            int arg = order[0];
            for (int s = 0; s < n; ++s) {
                const double d = (rows[order[s]] - centroids[labels[order[s]]]).squaredNorm();
                if (d > worst) {
                    worst = d;
                    arg = order[s];
                }
            }
            next[c] = rows[arg];
        }

        double moved = 0.0;
        for (int c = 0; c < k; ++c) moved = std::max(moved, (next[c] - centroids[c]).norm());
        centroids = std::move(next);
        if (moved < 1e-9) break;
    }
    assign();
    return labels;
}

std::vector<Eigen::Vector4d> label_centroids(const AlbedoFeatures& features,
                                             const std::vector<int>& labels, int k,
                                             std::vector<uint8_t>* empty) {
    if (labels.size() != features.rows.size())
        throw std::invalid_argument("label_centroids: labels/features size mismatch");
    std::vector<Eigen::Vector4d> centroids(k, Eigen::Vector4d::Zero());
    std::vector<int> count(k, 0);
    for (size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] < 0 || labels[i] >= k) throw std::invalid_argument("label_centroids: label out of range");
        centroids[labels[i]] += features.rows[i];
        ++count[labels[i]];
    }
    if (empty) empty->assign(k, 0);
    for (int c = 0; c < k; ++c) {
        if (count[c] > 0)
            centroids[c] /= count[c];
        else if (empty)
            (*empty)[c] = 1;
    }
    return centroids;
}

double labeling_energy(const TriangleMesh& mesh, const AlbedoFeatures& features,
                       const std::vector<int>& labels,
                       const std::vector<Eigen::Vector4d>& centroids, double lambda_pairwise) {
    if (!mesh.has_adjacency()) throw std::invalid_argument("labeling_energy: mesh adjacency missing");
    double energy = 0.0;
    for (size_t i = 0; i < labels.size(); ++i)
        energy += (features.rows[i] - centroids[labels[i]]).squaredNorm();
    for (int i = 0; i < mesh.vertex_count(); ++i)
        for (int u : mesh.neighbors[i])
            if (u > i && labels[i] != labels[u]) energy += lambda_pairwise;
    return energy;
}

std::vector<int> smooth_labels_mrf(const TriangleMesh& mesh, const std::vector<int>& labels,
                                   const AlbedoFeatures& features, double lambda_pairwise) {
    if (!mesh.has_adjacency()) throw std::invalid_argument("smooth_labels_mrf: mesh adjacency missing");
    if (labels.size() != features.rows.size() || features.rows.size() != mesh.vertices.size())
        throw std::invalid_argument("smooth_labels_mrf: labels/features/mesh size mismatch");
    if (!(lambda_pairwise >= 0.0))
        throw std::invalid_argument("smooth_labels_mrf: negative pairwise weight");

    const int k = labels.empty() ? 0 : *std::max_element(labels.begin(), labels.end()) + 1;
    std::vector<uint8_t> empty;
    const std::vector<Eigen::Vector4d> centroids = label_centroids(features, labels, k, &empty);

    std::vector<int> current = labels;
    for (int sweep = 0; sweep < 100; ++sweep) {
        bool changed = false;
        for (int i = 0; i < mesh.vertex_count(); ++i) {
            double best = std::numeric_limits<double>::infinity();
            int arg = current[i];
            for (int c = 0; c < k; ++c) {
                if (empty[c]) continue;  // no centroid to anchor the data term
                double cost = (features.rows[i] - centroids[c]).squaredNorm();
                for (int u : mesh.neighbors[i])
                    if (current[u] != c) cost += lambda_pairwise;
                if (cost < best) {
                    best = cost;
                    arg = c;
                }
            }
            if (arg != current[i]) {
                current[i] = arg;
                changed = true;
            }
        }
        if (!changed) break;
    }
    return current;
}

std::vector<double> group_values(std::vector<int>& labels, const std::vector<double>& vertex_albedo) {
    if (labels.size() != vertex_albedo.size() || labels.empty())
        throw std::invalid_argument("group_values: labels/albedo size mismatch");
    const int k = *std::max_element(labels.begin(), labels.end()) + 1;
    std::vector<std::vector<double>> members(k);
    for (size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] < 0) throw std::invalid_argument("group_values: negative label");
        members[labels[i]].push_back(vertex_albedo[i]);
    }

    std::vector<int> remap(k, -1);
    std::vector<double> values;
    for (int c = 0; c < k; ++c) {
        if (members[c].empty()) continue;  // dropped; labels compacted below
        remap[c] = static_cast<int>(values.size());
        values.push_back(median_of(std::move(members[c])));
    }
    for (int& l : labels) l = remap[l];
    return values;
}

RenderResult render_shading_image(const TriangleMesh& mesh, const View& view,
                                  const AlbedoModel& albedo, const LightModel& light) {
    LightModel unit = light;
    unit.brightness_c = 1.0;  // model values already carry the brightness product
    return render_shading_image(mesh, view, albedo.expand(mesh.vertex_count()), unit);
}

}  // namespace irmesh
