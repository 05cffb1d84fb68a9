#include "irmesh/shading.hpp"

#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>

using namespace irmesh;

TEST_CASE("point-light intensity: aligned, perpendicular, and falloff cases") {
    LightModel light;
    light.brightness_c = 1e6;
    light.ambient = 0.0;
    light.gamma = 1.0;

    const Vec3 n(0, 0, 1);
    CHECK(predict_intensity(n, n, 1000.0, 1.0, light) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(predict_intensity(n, Vec3(1, 0, 0), 1000.0, 1.0, light) == doctest::Approx(0.0).epsilon(1e-12));
    // light behind the surface: attached shadow, not negative radiance
    CHECK(predict_intensity(n, Vec3(0, 0, -1), 1000.0, 1.0, light) == doctest::Approx(0.0).epsilon(1e-12));

    // doubling the distance quarters the pre-gamma intensity
    light.gamma = 0.8;
    CHECK(predict_intensity(n, n, 2000.0, 1.0, light) ==
          doctest::Approx(std::pow(0.25, 0.8)).epsilon(1e-12));
    CHECK(predict_intensity(n, n, 2000.0, 1.0, light) == doctest::Approx(0.3299).epsilon(1e-4));

    CHECK_THROWS_AS(predict_intensity(n, n, 0.0, 1.0, light), std::domain_error);
    CHECK_THROWS_AS(predict_intensity(n, n, -5.0, 1.0, light), std::domain_error);
}

TEST_CASE("brightness scale covariance and the inverse-square law") {
    LightModel light;
    light.brightness_c = 2.5e5;
    light.gamma = 1.0;
    const Vec3 n(0, 0, 1);

    // scaling c*rho by s scales the (unsaturated) intensity by s exactly
    const double base = predict_intensity(n, n, 1500.0, 1.0, light);
    LightModel scaled = light;
    scaled.brightness_c = light.brightness_c * 3.0;
    CHECK(predict_intensity(n, n, 1500.0, 1.0, scaled) == doctest::Approx(3.0 * base).epsilon(1e-12));

    // intensity * d^2 is constant for fixed n.l
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> dist(600.0, 3000.0);
    for (int i = 0; i < 20; ++i) {
        const double d = dist(rng);
        const double v = predict_intensity(n, n, d, 1.0, light) * d * d;
        CHECK(v == doctest::Approx(light.brightness_c).epsilon(1e-12));
    }
}

TEST_CASE("gamma round trips and state tracking") {
    ShadingImage img = ShadingImage::zeros(8, 4);
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> val(0.0, 1.0);
    for (auto& v : img.intensity) v = val(rng);

    // gamma = 1 is the identity (up to the state flag)
    ShadingImage gammad = gamma_apply(img, 1.0);
    CHECK(gammad.gamma_applied);
    for (size_t i = 0; i < img.intensity.size(); ++i)
        CHECK(gammad.intensity[i] == doctest::Approx(img.intensity[i]).epsilon(1e-12));

    // round trip at gamma = 0.8
    gammad = gamma_apply(img, 0.8);
    const ShadingImage back = linearize(gammad, 0.8);
    CHECK(!back.gamma_applied);
    for (size_t i = 0; i < img.intensity.size(); ++i)
        CHECK(back.intensity[i] == doctest::Approx(img.intensity[i]).epsilon(1e-9));

    // the quarter-falloff constant maps back to 0.25
    ShadingImage constant = ShadingImage::zeros(4, 4);
    for (auto& v : constant.intensity) v = std::pow(0.25, 0.8);
    constant.gamma_applied = true;
    const ShadingImage lin = linearize(constant, 0.8);
    for (const auto& v : lin.intensity) CHECK(v == doctest::Approx(0.25).epsilon(1e-9));
}

TEST_CASE("linearize rejects wrong gamma state and non-positive gamma") {
    ShadingImage img = ShadingImage::zeros(4, 4);
    CHECK_THROWS_AS(linearize(img, 0.8), std::invalid_argument);  // not gamma-space
    img.gamma_applied = true;
    CHECK_THROWS_AS(linearize(img, 0.0), std::domain_error);
    CHECK_THROWS_AS(linearize(img, -1.0), std::domain_error);
    CHECK_NOTHROW(linearize(img, 0.8));
}

TEST_CASE("image validation enforces finite [0,1] intensities") {
    ShadingImage img = ShadingImage::zeros(4, 4);
    CHECK_NOTHROW(img.validate());
    img.at(1, 1) = 1.5;
    CHECK_THROWS_AS(img.validate(), std::invalid_argument);
    img.at(1, 1) = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(img.validate(), std::invalid_argument);
}

TEST_CASE("light model validation") {
    LightModel light;
    CHECK_NOTHROW(light.validate());
    light.brightness_c = 0.0;
    CHECK_THROWS_AS(light.validate(), std::invalid_argument);
    light.brightness_c = 1.0;
    light.ambient = -0.1;
    CHECK_THROWS_AS(light.validate(), std::invalid_argument);
    light.ambient = 0.0;
    light.gamma = 0.0;
    CHECK_THROWS_AS(light.validate(), std::invalid_argument);
    light.gamma = 3.5;
    CHECK_THROWS_AS(light.validate(), std::invalid_argument);
}

TEST_CASE("bilinear sampling: constants, ramps, borders, and masks") {
    const int w = 6, h = 5;
    std::vector<double> ramp(static_cast<size_t>(w) * h);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) ramp[static_cast<size_t>(y) * w + x] = 2.0 * x - 3.0 * y + 0.5;

    double out = 0.0;
    // bilinear interpolation reproduces an affine field exactly
    REQUIRE(sample_bilinear(ramp, w, h, Vec2(2.25, 1.75), nullptr, out));
    CHECK(out == doctest::Approx(2.0 * 2.25 - 3.0 * 1.75 + 0.5).epsilon(1e-12));
    // exactly on a pixel center
    REQUIRE(sample_bilinear(ramp, w, h, Vec2(3.0, 2.0), nullptr, out));
    CHECK(out == doctest::Approx(2.0 * 3.0 - 3.0 * 2.0 + 0.5).epsilon(1e-12));

    // support leaving the image fails
    CHECK(!sample_bilinear(ramp, w, h, Vec2(-0.5, 2.0), nullptr, out));
    CHECK(!sample_bilinear(ramp, w, h, Vec2(5.5, 2.0), nullptr, out));
    CHECK(!sample_bilinear(ramp, w, h, Vec2(2.0, 4.5), nullptr, out));

    // any masked-out tap fails the sample
    std::vector<uint8_t> valid(static_cast<size_t>(w) * h, 1);
    valid[static_cast<size_t>(2) * w + 3] = 0;  // pixel (3,2)
    CHECK(!sample_bilinear(ramp, w, h, Vec2(2.5, 1.5), &valid, out));
    CHECK(sample_bilinear(ramp, w, h, Vec2(1.5, 1.5), &valid, out));
}
