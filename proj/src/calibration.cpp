#include "irmesh/calibration.hpp"

#include "irmesh/raster.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

namespace irmesh {

namespace {

bool is_intensity(double v) { return std::isfinite(v) && v >= 0.0 && v <= 1.0; }

// Gauss-Newton polish of gamma on the index set `idx`, minimizing
// sum (observed - rendered^gamma)^2. Rendered values of zero contribute a
// constant residual for any gamma, so they are skipped.
double refine_gamma(const CalibrationSamples& s, const std::vector<int>& idx, double gamma) {
    for (int it = 0; it < 100; ++it) {
        double jtj = 0.0, jte = 0.0;
        for (int i : idx) {
            const double r = s.rendered[i];
            if (r <= 1e-12) continue;
            const double p = std::pow(r, gamma);
            const double dp = p * std::log(r);
            jtj += dp * dp;
            jte += dp * (s.observed[i] - p);
        }
        if (jtj <= 0.0) break;  // flat objective (e.g. all rendered values 1)
        const double step = jte / jtj;
        gamma = (gamma + step > 0.0) ? gamma + step : 0.5 * gamma;
        if (std::abs(step) < 1e-13) break;
    }
    return gamma;
}

}  // namespace

void CalibrationSamples::validate() const {
    if (rendered.size() != observed.size())
        throw std::invalid_argument("CalibrationSamples: rendered/observed length mismatch");
    for (size_t i = 0; i < rendered.size(); ++i)
        if (!is_intensity(rendered[i]) || !is_intensity(observed[i]))
            throw std::invalid_argument("CalibrationSamples: intensities must be finite in [0,1]");
}

GammaFit fit_gamma_ransac(const CalibrationSamples& samples, int n_samples, int n_iterations,
                          double inlier_threshold, uint64_t seed) {
    samples.validate();
    if (samples.count() < 100)
        throw std::invalid_argument("fit_gamma_ransac: needs at least 100 samples");
    if (n_samples < 2 || n_samples > samples.count())
        throw std::invalid_argument("fit_gamma_ransac: n_samples out of range");
    if (n_iterations < 1 || !(inlier_threshold > 0.0) || !std::isfinite(inlier_threshold))
        throw std::invalid_argument("fit_gamma_ransac: bad iteration count or threshold");

    std::mt19937_64 rng(seed);

    // working subset (all samples when n_samples covers them)
    std::vector<int> subset(samples.count());
    std::iota(subset.begin(), subset.end(), 0);
    if (n_samples < samples.count()) {
        for (int i = 0; i < n_samples; ++i) {
            const int j = i + static_cast<int>(rng() % (subset.size() - i));
            std::swap(subset[i], subset[j]);
        }
        subset.resize(n_samples);
    }

    // hypothesis pool: rendered strictly inside (0.02, 0.98) keeps the
    // closed-form gamma = log(obs)/log(ren) well conditioned
    std::vector<int> pool;
    double ren_min = 1.0, ren_max = 0.0;
    for (int i : subset) {
        ren_min = std::min(ren_min, samples.rendered[i]);
        ren_max = std::max(ren_max, samples.rendered[i]);
        if (samples.rendered[i] > 0.02 && samples.rendered[i] < 0.98 && samples.observed[i] > 0.0)
            pool.push_back(i);
    }
    if (ren_max - ren_min <= 0.0)
        throw std::invalid_argument("fit_gamma_ransac: gamma unidentifiable, all rendered values equal");
    if (pool.size() < 2)
        throw std::invalid_argument("fit_gamma_ransac: too few well-conditioned samples for hypotheses");

    auto count_inliers = [&](double gamma) {
        int n = 0;
        for (int i : subset)
            if (std::abs(samples.observed[i] - std::pow(samples.rendered[i], gamma)) < inlier_threshold)
                ++n;
        return n;
    };

    int best_count = -1;
    double best_gamma = 1.0;
    for (int it = 0; it < n_iterations; ++it) {
        const int i1 = pool[rng() % pool.size()];
        int i2 = i1;
        while (i2 == i1) i2 = pool[rng() % pool.size()];
        const double g1 = std::log(samples.observed[i1]) / std::log(samples.rendered[i1]);
        const double g2 = std::log(samples.observed[i2]) / std::log(samples.rendered[i2]);
        const double gamma = 0.5 * (g1 + g2);
        if (!std::isfinite(gamma) || gamma <= 0.0) continue;

        const int inliers = count_inliers(gamma);
        if (inliers > best_count || (inliers == best_count && gamma < best_gamma)) {
            best_count = inliers;
            best_gamma = gamma;
        }
    }
    if (best_count < 2) throw std::invalid_argument("fit_gamma_ransac: no consensus found");

    std::vector<int> inlier_idx;
    for (int i : subset)
        if (std::abs(samples.observed[i] - std::pow(samples.rendered[i], best_gamma)) < inlier_threshold)
            inlier_idx.push_back(i);

    GammaFit fit;
    fit.gamma = refine_gamma(samples, inlier_idx, best_gamma);
    fit.inlier_count = count_inliers(fit.gamma);
    fit.inlier_ratio = static_cast<double>(fit.inlier_count) / static_cast<double>(subset.size());
    return fit;
}

CalibrationSamples build_sphere_samples(const TriangleMesh& mesh, const std::vector<View>& views,
                                        const LightModel& light, double albedo) {
    if (!(albedo > 0.0) || !std::isfinite(albedo))
        throw std::invalid_argument("build_sphere_samples: albedo must be positive");
    LightModel linear = light;
    linear.gamma = 1.0;

    CalibrationSamples samples;
    const std::vector<double> vertex_albedo(mesh.vertices.size(), albedo);
    for (const View& view : views) {
        view.validate();
        const RenderResult render = render_shading_image(mesh, view, vertex_albedo, linear);
        for (int y = 0; y < view.intrinsics.height; ++y) {
            for (int x = 0; x < view.intrinsics.width; ++x) {
                if (!render.raster.covered(x, y)) continue;
                if (render.saturated[render.raster.index(x, y)]) continue;
                const double ren = render.image.at(x, y);
                const double obs = view.image.at(x, y);
                if (ren <= linear.ambient + 1e-12) continue;  // shadowed: no direct light
                if (obs > 0.98) continue;                     // sensor near saturation
                samples.rendered.push_back(ren);
                samples.observed.push_back(obs);
            }
        }
    }
    if (samples.rendered.empty())
        throw std::invalid_argument("build_sphere_samples: no usable pixels in any view");
    return samples;
}

void FalloffSamples::validate() const {
    if (distance_mm.size() != intensity.size())
        throw std::invalid_argument("FalloffSamples: distance/intensity length mismatch");
    for (double d : distance_mm)
        if (!(d > 0.0) || !std::isfinite(d))
            throw std::invalid_argument("FalloffSamples: distances must be positive and finite");
    for (double v : intensity)
        if (!std::isfinite(v)) throw std::invalid_argument("FalloffSamples: intensities must be finite");
}

FalloffFit fit_falloff_exponent(const FalloffSamples& samples) {
    samples.validate();

    std::vector<double> lx, ly;
    for (int i = 0; i < samples.count(); ++i) {
        if (samples.intensity[i] <= 0.0) continue;  // log undefined; drop
        lx.push_back(std::log(samples.distance_mm[i]));
        ly.push_back(std::log(samples.intensity[i]));
    }
    std::vector<double> distinct = lx;
    std::sort(distinct.begin(), distinct.end());
    distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
    if (distinct.size() < 3)
        throw std::invalid_argument("fit_falloff_exponent: needs at least 3 distinct distances");

    const double n = static_cast<double>(lx.size());
    const double mx = std::accumulate(lx.begin(), lx.end(), 0.0) / n;
    const double my = std::accumulate(ly.begin(), ly.end(), 0.0) / n;
    double sxx = 0.0, sxy = 0.0;
    for (size_t i = 0; i < lx.size(); ++i) {
        sxx += (lx[i] - mx) * (lx[i] - mx);
        sxy += (lx[i] - mx) * (ly[i] - my);
    }

    FalloffFit fit;
    fit.exponent = sxy / sxx;
    fit.scale = std::exp(my - fit.exponent * mx);
    return fit;
}

double median_roi(const ShadingImage& image, int x0, int y0, int w, int h) {
    if (w <= 0 || h <= 0 || x0 < 0 || y0 < 0 || x0 + w > image.width || y0 + h > image.height)
        throw std::invalid_argument("median_roi: rectangle outside the image");
    std::vector<double> values;
    values.reserve(static_cast<size_t>(w) * h);
    for (int y = y0; y < y0 + h; ++y)
        for (int x = x0; x < x0 + w; ++x) values.push_back(image.at(x, y));

    const size_t mid = values.size() / 2;
    std::nth_element(values.begin(), values.begin() + mid, values.end());
    double median = values[mid];
    if (values.size() % 2 == 0) {
        const double lower = *std::max_element(values.begin(), values.begin() + mid);
        median = 0.5 * (median + lower);
    }
    return median;
}

}  // namespace irmesh
