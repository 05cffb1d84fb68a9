#pragma once

#include "irmesh/geometry.hpp"

#include <vector>

namespace irmesh {

// Single-channel radiance map with intensities in [0, 1]. gamma_applied
// records whether values are still in sensor gamma space; photometric
// inversion requires linear values.
struct ShadingImage {
    int width = 0;
    int height = 0;
    std::vector<double> intensity;
    bool gamma_applied = false;

    double at(int x, int y) const { return intensity[static_cast<size_t>(y) * width + x]; }
    double& at(int x, int y) { return intensity[static_cast<size_t>(y) * width + x]; }
    static ShadingImage zeros(int w, int h) {
        return ShadingImage{w, h, std::vector<double>(static_cast<size_t>(w) * h, 0.0), false};
    }

    // Throws if any intensity is non-finite or outside [0, 1].
    void validate() const;
};

// Near-point-light model: I = (c*rho / d^2 * max(n.l, 0) + ambient)^gamma.
// brightness_c carries the product of global brightness and a reference
// albedo scale; estimation returns c*rho as one quantity.
struct LightModel {
    double brightness_c = 1.0;  // intensity * mm^2
    Vec3 position = Vec3::Zero();  // world frame, per view
    double ambient = 0.0;
    double gamma = 1.0;

    void validate() const;
};

// Forward shading for one surface sample. `albedo` multiplies brightness_c,
// i.e. the caller passes rho when brightness_c = c, or 1.0 when brightness_c
// already carries c*rho. The Lambert term is clamped at zero before gamma.
double predict_intensity(const Vec3& normal, const Vec3& light_dir, double distance, double albedo,
                         const LightModel& light);

// intensity^(1/gamma); requires gamma_applied = true, gamma > 0.
ShadingImage linearize(const ShadingImage& image, double gamma);

// intensity^gamma, marking the result as gamma-space. Inverse of linearize.
ShadingImage gamma_apply(const ShadingImage& image, double gamma);

// Bilinear sample at continuous pixel coordinates (integer = pixel center).
// Returns false when the 2x2 support leaves the image or, when `valid` is
// non-null, touches a pixel whose mask entry is zero.
bool sample_bilinear(const std::vector<double>& data, int width, int height, const Vec2& uv,
                     const std::vector<uint8_t>* valid, double& out);

inline bool sample_bilinear(const ShadingImage& image, const Vec2& uv, double& out) {
    return sample_bilinear(image.intensity, image.width, image.height, uv, nullptr, out);
}

}  // namespace irmesh
