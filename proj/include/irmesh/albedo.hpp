#pragma once

#include "irmesh/camera.hpp"
#include "irmesh/geometry.hpp"
#include "irmesh/raster.hpp"
#include "irmesh/shading.hpp"

#include <cstdint>
#include <vector>

namespace irmesh {

// Reflectance description consumed by the shading model. Values carry the
// full brightness-albedo product, so renders driven by a model treat the
// light's brightness as already folded in.
enum class AlbedoMode { Global, Grouped };

struct AlbedoModel {
    AlbedoMode mode = AlbedoMode::Global;
    double global_value = 1.0;         // Global: one value for the whole mesh
    std::vector<int> labels;           // Grouped: group index per vertex
    std::vector<double> group_values;  // Grouped: value per group

    // Throws unless values are positive and finite and, in Grouped mode,
    // every vertex carries an in-range label.
    void validate(int vertex_count) const;
    double value_at(int vertex) const;
    std::vector<double> expand(int vertex_count) const;
};

// Per-vertex clustering features (kappa*x, kappa*y, kappa*z, albedo). kappa
// balances the two kinds of coordinates: the albedo column's standard
// deviation equals the pooled per-axis position standard deviation.
struct AlbedoFeatures {
    std::vector<Eigen::Vector4d> rows;
    double kappa = 1.0;
};

AlbedoFeatures build_albedo_features(const TriangleMesh& mesh, const std::vector<double>& vertex_albedo);

// Observation filtering shared by the albedo estimators: intensities outside
// [low_clip, high_clip] are dropped (shadow noise and saturation), as are
// grazing observations with n.l below min_ndotl where the inversion blows up.
struct AlbedoEstimationConfig {
    double low_clip = 0.02;
    double high_clip = 0.98;
    double min_ndotl = 0.1;
};

// Inverts the shading model for one albedo value shared by the whole mesh:
// the mean of d^2 (I - ambient) / (n.l) over every visible vertex-view
// observation that survives the config filters. Images must be linearized
// (gamma removed). Throws when nothing contributes.
double estimate_global_albedo(const TriangleMesh& mesh, const std::vector<View>& views,
                              const std::vector<VisibilityMap>& visibility, const LightModel& light,
                              const AlbedoEstimationConfig& config = {});

struct VertexAlbedoEstimate {
    std::vector<double> value;
    std::vector<int> observation_count;  // 0 marks vertices filled from their ring
};

// Same inversion averaged per vertex over the views that see it. Vertices
// without any surviving observation are filled with the median of their
// one-ring (sweeping until the fill closes; unreachable islands fall back to
// the median of all observed vertices).
VertexAlbedoEstimate estimate_vertex_albedo(const TriangleMesh& mesh, const std::vector<View>& views,
                                            const std::vector<VisibilityMap>& visibility,
                                            const LightModel& light,
                                            const AlbedoEstimationConfig& config = {});

// Smallest number of principal components of the feature cloud whose
// cumulative explained variance reaches variance_target, clamped to [1, 8].
// Throws on fewer than 2 vertices.
int select_group_count(const AlbedoFeatures& features, double variance_target = 0.95);

// Lloyd clustering with a seeded k-means++ start. Initialization draws from
// the rows in sorted order, so the resulting partition does not depend on
// vertex order. An emptied cluster is re-seeded from the point farthest from
// its centroid. Throws when k is out of [1, vertex count].
std::vector<int> kmeans_cluster(const AlbedoFeatures& features, int k, uint64_t seed = 0);

// Mean feature of every label in [0, k); labels with no members yield a zero
// centroid and are reported in `empty`.
std::vector<Eigen::Vector4d> label_centroids(const AlbedoFeatures& features,
                                             const std::vector<int>& labels, int k,
                                             std::vector<uint8_t>* empty = nullptr);

// Labeling energy: squared feature distance to the label centroid per vertex
// plus lambda_pairwise per mesh edge whose endpoints disagree.
double labeling_energy(const TriangleMesh& mesh, const AlbedoFeatures& features,
                       const std::vector<int>& labels,
                       const std::vector<Eigen::Vector4d>& centroids, double lambda_pairwise);

// Iterated conditional modes on the label field, with the data term anchored
// to the centroids of the initial labels. The energy never increases; sweeps
// stop at a fixed point (or after 100 passes). Requires mesh adjacency.
std::vector<int> smooth_labels_mrf(const TriangleMesh& mesh, const std::vector<int>& labels,
                                   const AlbedoFeatures& features, double lambda_pairwise);

// Median albedo per group. Groups without members are dropped and `labels`
// is compacted onto the surviving range.
std::vector<double> group_values(std::vector<int>& labels, const std::vector<double>& vertex_albedo);

// Render with reflectance supplied by a model instead of a per-vertex array;
// the light's brightness_c is ignored because model values carry it.
RenderResult render_shading_image(const TriangleMesh& mesh, const View& view,
                                  const AlbedoModel& albedo, const LightModel& light);

}  // namespace irmesh
