#include "irmesh/shading.hpp"

#include <cmath>
#include <stdexcept>

namespace irmesh {

void ShadingImage::validate() const {
    if (width <= 0 || height <= 0 || intensity.size() != static_cast<size_t>(width) * height)
        throw std::invalid_argument("shading image has inconsistent dimensions");
    for (double v : intensity) {
        if (!std::isfinite(v) || v < 0.0 || v > 1.0)
            throw std::invalid_argument("shading image intensity outside [0, 1]");
    }
}

void LightModel::validate() const {
    if (!(brightness_c > 0.0)) throw std::invalid_argument("light brightness must be positive");
    if (ambient < 0.0) throw std::invalid_argument("ambient must be non-negative");
    if (!(gamma > 0.0) || gamma > 3.0) throw std::invalid_argument("gamma must be in (0, 3]");
}

double predict_intensity(const Vec3& normal, const Vec3& light_dir, double distance, double albedo,
                         const LightModel& light) {
    if (!(distance > 0.0)) throw std::domain_error("predict_intensity: distance must be positive");
    const double lambert = std::max(normal.dot(light_dir), 0.0);
    const double linear = light.brightness_c * albedo / (distance * distance) * lambert + light.ambient;
    const double clamped = std::min(linear, 1.0);
    return light.gamma == 1.0 ? clamped : std::pow(clamped, light.gamma);
}

ShadingImage linearize(const ShadingImage& image, double gamma) {
    if (!(gamma > 0.0)) throw std::domain_error("linearize: gamma must be positive");
    if (!image.gamma_applied) throw std::invalid_argument("linearize: image is already linear");
    ShadingImage out = image;
    const double inv = 1.0 / gamma;
    for (double& v : out.intensity) v = std::pow(v, inv);
    out.gamma_applied = false;
    return out;
}

ShadingImage gamma_apply(const ShadingImage& image, double gamma) {
    if (!(gamma > 0.0)) throw std::domain_error("gamma_apply: gamma must be positive");
    if (image.gamma_applied) throw std::invalid_argument("gamma_apply: image is already in gamma space");
    ShadingImage out = image;
    for (double& v : out.intensity) v = std::pow(v, gamma);
    out.gamma_applied = true;
    return out;
}

bool sample_bilinear(const std::vector<double>& data, int width, int height, const Vec2& uv,
                     const std::vector<uint8_t>* valid, double& out) {
    const double u = uv.x(), v = uv.y();
    const int x0 = static_cast<int>(std::floor(u));
    const int y0 = static_cast<int>(std::floor(v));
    if (x0 < 0 || y0 < 0 || x0 + 1 >= width || y0 + 1 >= height) return false;
    const size_t i00 = static_cast<size_t>(y0) * width + x0;
    const size_t i10 = i00 + 1;
    const size_t i01 = i00 + width;
    const size_t i11 = i01 + 1;
    if (valid && (!(*valid)[i00] || !(*valid)[i10] || !(*valid)[i01] || !(*valid)[i11])) return false;
    const double fx = u - x0, fy = v - y0;
    out = (1.0 - fy) * ((1.0 - fx) * data[i00] + fx * data[i10]) +
          fy * ((1.0 - fx) * data[i01] + fx * data[i11]);
    return true;
}

}  // namespace irmesh
