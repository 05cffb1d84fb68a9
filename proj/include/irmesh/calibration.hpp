#pragma once

#include "irmesh/camera.hpp"
#include "irmesh/geometry.hpp"
#include "irmesh/shading.hpp"

#include <cstdint>
#include <vector>

namespace irmesh {

// Paired predicted/observed intensities from a known calibration target.
// `rendered` holds the linear (gamma = 1) model prediction, `observed` the
// sensor-space measurement.
struct CalibrationSamples {
    std::vector<double> rendered;
    std::vector<double> observed;

    int count() const { return static_cast<int>(rendered.size()); }
    // Throws unless both arrays match in length and every value is a finite
    // intensity in [0, 1].
    void validate() const;
};

struct GammaFit {
    double gamma = 1.0;
    double inlier_ratio = 0.0;  // inliers / working subset size
    int inlier_count = 0;
};

// Robust fit of I_obs = I_ren^gamma. Each hypothesis averages the closed-form
// gamma of two random points (only points with rendered value strictly inside
// (0.02, 0.98) seed hypotheses); consensus is counted over a random subset of
// n_samples points with |I_obs - I_ren^gamma| < inlier_threshold. The best
// hypothesis (ties break toward lower gamma) is polished by least squares on
// its inliers and re-scored. Deterministic for a fixed seed. Throws when
// fewer than 100 samples are supplied, n_samples or the other parameters are
// out of range, or gamma is unidentifiable (all rendered values equal).
GammaFit fit_gamma_ransac(const CalibrationSamples& samples, int n_samples, int n_iterations,
                          double inlier_threshold, uint64_t seed = 0);

// Collects (linear prediction, observation) pairs over every pixel the mesh
// covers in each view. Pixels are dropped when the prediction saturates, the
// observation exceeds 0.98, or the point receives no direct light (shadowed).
// The light position comes from each view's rigidly attached offset; the
// model's gamma is ignored and the prediction kept linear. Throws when no
// usable pixel remains.
CalibrationSamples build_sphere_samples(const TriangleMesh& mesh, const std::vector<View>& views,
                                        const LightModel& light, double albedo);

// Median wall intensities captured at increasing distances.
struct FalloffSamples {
    std::vector<double> distance_mm;
    std::vector<double> intensity;

    int count() const { return static_cast<int>(distance_mm.size()); }
    // Throws unless lengths match and all distances are positive and finite.
    void validate() const;
};

struct FalloffFit {
    double exponent = 0.0;  // p in I = scale * d^p
    double scale = 0.0;
};

// Least-squares line through (log d, log I): returns the falloff exponent and
// scale. Non-positive intensities are excluded; fewer than 3 distinct
// distances afterwards is an error.
FalloffFit fit_falloff_exponent(const FalloffSamples& samples);

// Median intensity of the w x h pixel rectangle whose top-left corner is
// (x0, y0); an even count averages the two central values. Throws when the
// rectangle is empty or leaves the image.
double median_roi(const ShadingImage& image, int x0, int y0, int w, int h);

}  // namespace irmesh
