#pragma once

#include <array>
#include <random>
#include <string>
#include <variant>

#include <nlohmann/json.hpp>

#include "selfir/image.hpp"

namespace selfir {

struct GaussianNoise {
  double sigma = 0.0;  // std in [0,1] intensity units
};

struct PoissonNoise {
  double lambda = 0.0;  // photon scale: y ~ Poisson(lambda*x)/lambda
};

struct SensorNoise {
  double lambda_shot = 0.0;  // variance slope vs intensity
  double lambda_read = 0.0;  // intensity-independent variance floor
};

using NoiseParams = std::variant<GaussianNoise, PoissonNoise, SensorNoise>;

std::string noise_model_name(const NoiseParams& p);
nlohmann::json noise_to_json(const NoiseParams& p);
NoiseParams noise_from_json(const nlohmann::json& j);

// How the read-noise log-mean depends on the shot-noise level. The
// published formula is ambiguous about whether the regressor is
// lambda_shot or log(lambda_shot); the upstream noise model it cites
// uses the log, so that is the default. LITERAL_SHOT reproduces the
// formula as literally written.
enum class ReadNoiseMeanModel { LOG_SHOT, LITERAL_SHOT };

// Additive white Gaussian noise with std sigma. clamp=false keeps the
// noise exactly zero-mean (needed for loss targets); clamp=true is for
// anything that will be displayed or written as an 8/16-bit image.
Image add_gaussian(const Image& img, double sigma, std::mt19937_64& rng, bool clamp = true);

// Signal-dependent Poisson noise: each pixel drawn as Poisson(lambda*x)/lambda.
// Left unclamped so the mean matches the input at every intensity.
Image add_poisson(const Image& img, double lambda, std::mt19937_64& rng, bool clamp = false);

// Heteroscedastic Gaussian: variance lambda_read + lambda_shot * x.
// Only valid in linear space, where the affine variance model holds.
Image add_sensor(const Image& img, const SensorNoise& p, std::mt19937_64& rng,
                 bool clamp = false);

// lambda_shot log-uniform in [0.00068674, 0.02194856]; log(lambda_read)
// normal with std 0.2 around a mean tied to the shot level (see
// ReadNoiseMeanModel).
SensorNoise sample_sensor_params(std::mt19937_64& rng,
                                 ReadNoiseMeanModel mean_model = ReadNoiseMeanModel::LOG_SHOT);

constexpr double kLambdaShotMin = 0.00068674;
constexpr double kLambdaShotMax = 0.02194856;

double sample_gaussian_sigma(std::mt19937_64& rng, double lo = 5.0 / 255.0,
                             double hi = 50.0 / 255.0);
double sample_poisson_lambda(std::mt19937_64& rng, double lo = 5.0, double hi = 50.0);

// Dispatch on the model tag; sensor noise insists on LINEAR input.
Image apply_noise(const Image& img, const NoiseParams& p, std::mt19937_64& rng,
                  bool clamp = false);

// Minimal invertible ISP: white balance -> color matrix -> gamma. Enough
// to move between sRGB and a raw-like linear space so intensity-dependent
// noise can be applied where its variance model is valid.
struct IspParams {
  std::array<double, 3> wb_gains{1.0, 1.0, 1.0};
  std::array<double, 9> ccm{1, 0, 0, 0, 1, 0, 0, 0, 1};  // row-major, camera->sRGB
  double gamma = 2.2;
};

nlohmann::json isp_to_json(const IspParams& p);
IspParams isp_from_json(const nlohmann::json& j);

// Fixed well-conditioned CCM, per-image white-balance gains in [1,2].
IspParams sample_isp(std::mt19937_64& rng);

// sRGB -> linear: inverse gamma, inverse CCM, divide by wb gains.
Image unprocess(const Image& img, const IspParams& isp);
// linear -> sRGB: exact inverse chain. Gamma is applied sign-preserving
// so negative excursions (network outputs, unclamped noise) round-trip.
Image process(const Image& img, const IspParams& isp);

// Inverse of a row-major 3x3; throws when singular or condition number
// (1-norm) exceeds 1e4.
std::array<double, 9> invert_3x3(const std::array<double, 9>& m);

}  // namespace selfir
