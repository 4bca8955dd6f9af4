#include "selfir/noise.hpp"

#include <cmath>
#include <stdexcept>

namespace selfir {

namespace {

float clamp01f(float v) { return v < 0.f ? 0.f : (v > 1.f ? 1.f : v); }

double signed_pow(double v, double e) {
  return v < 0 ? -std::pow(-v, e) : std::pow(v, e);
}

// Row-major 3x3 times RGB pixel.
void mat_apply(const std::array<double, 9>& m, const float* in, float* out) {
  for (int r = 0; r < 3; ++r)
    out[r] = static_cast<float>(m[r * 3 + 0] * in[0] + m[r * 3 + 1] * in[1] +
                                m[r * 3 + 2] * in[2]);
}

double norm1_3x3(const std::array<double, 9>& m) {
  double best = 0;
  for (int c = 0; c < 3; ++c) {
    double s = std::fabs(m[c]) + std::fabs(m[3 + c]) + std::fabs(m[6 + c]);
    best = std::max(best, s);
  }
  return best;
}

}  // namespace

std::string noise_model_name(const NoiseParams& p) {
  if (std::holds_alternative<GaussianNoise>(p)) return "gaussian";
  if (std::holds_alternative<PoissonNoise>(p)) return "poisson";
  return "sensor";
}

nlohmann::json noise_to_json(const NoiseParams& p) {
  nlohmann::json j;
  j["model"] = noise_model_name(p);
  if (const auto* g = std::get_if<GaussianNoise>(&p)) {
    j["sigma"] = g->sigma;
  } else if (const auto* po = std::get_if<PoissonNoise>(&p)) {
    j["lambda"] = po->lambda;
  } else {
    const auto& s = std::get<SensorNoise>(p);
    j["lambda_shot"] = s.lambda_shot;
    j["lambda_read"] = s.lambda_read;
  }
  return j;
}

NoiseParams noise_from_json(const nlohmann::json& j) {
  const std::string model = j.at("model").get<std::string>();
  if (model == "gaussian") return GaussianNoise{j.at("sigma").get<double>()};
  if (model == "poisson") return PoissonNoise{j.at("lambda").get<double>()};
  if (model == "sensor")
    return SensorNoise{j.at("lambda_shot").get<double>(), j.at("lambda_read").get<double>()};
  throw std::runtime_error("unknown noise model: " + model);
}

Image add_gaussian(const Image& img, double sigma, std::mt19937_64& rng, bool clamp) {
  if (sigma < 0) throw std::invalid_argument("add_gaussian: sigma must be >= 0");
  Image out = img;
  if (sigma == 0) return out;
  std::normal_distribution<double> dist(0.0, sigma);
  for (auto& v : out.data) v = static_cast<float>(v + dist(rng));
  if (clamp)
    for (auto& v : out.data) v = clamp01f(v);
  return out;
}

Image add_poisson(const Image& img, double lambda, std::mt19937_64& rng, bool clamp) {
  if (lambda <= 0) throw std::invalid_argument("add_poisson: lambda must be > 0");
  Image out = img;
  for (auto& v : out.data) {
    double mean = lambda * std::max(0.f, v);
    if (mean == 0) {
      v = 0.f;
      continue;
    }
    std::poisson_distribution<long long> dist(mean);
    v = static_cast<float>(static_cast<double>(dist(rng)) / lambda);
  }
  if (clamp)
    for (auto& v : out.data) v = clamp01f(v);
  return out;
}

Image add_sensor(const Image& img, const SensorNoise& p, std::mt19937_64& rng, bool clamp) {
  if (img.colorspace != ColorSpace::LINEAR)
    throw std::invalid_argument("add_sensor: image must be in linear space");
  if (p.lambda_shot < 0 || p.lambda_read < 0)
    throw std::invalid_argument("add_sensor: negative noise parameters");
  Image out = img;
  if (p.lambda_shot == 0 && p.lambda_read == 0) return out;
  std::normal_distribution<double> unit(0.0, 1.0);
  for (auto& v : out.data) {
    double var = p.lambda_read + p.lambda_shot * std::max(0.f, v);
    v = static_cast<float>(v + std::sqrt(var) * unit(rng));
  }
  if (clamp)
    for (auto& v : out.data) v = clamp01f(v);
  return out;
}

SensorNoise sample_sensor_params(std::mt19937_64& rng, ReadNoiseMeanModel mean_model) {
  std::uniform_real_distribution<double> u(std::log(kLambdaShotMin), std::log(kLambdaShotMax));
  double log_shot = u(rng);
  double shot = std::exp(log_shot);
  double mean = mean_model == ReadNoiseMeanModel::LOG_SHOT ? 1.85 * log_shot + 0.3
                                                           : 1.85 * shot + 0.3;
  std::normal_distribution<double> n(mean, 0.2);
  return SensorNoise{shot, std::exp(n(rng))};
}

double sample_gaussian_sigma(std::mt19937_64& rng, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  return u(rng);
}

double sample_poisson_lambda(std::mt19937_64& rng, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  return u(rng);
}

Image apply_noise(const Image& img, const NoiseParams& p, std::mt19937_64& rng, bool clamp) {
  if (const auto* g = std::get_if<GaussianNoise>(&p))
    return add_gaussian(img, g->sigma, rng, clamp);
  if (const auto* po = std::get_if<PoissonNoise>(&p))
    return add_poisson(img, po->lambda, rng, clamp);
  return add_sensor(img, std::get<SensorNoise>(p), rng, clamp);
}

nlohmann::json isp_to_json(const IspParams& p) {
  return nlohmann::json{{"wb_gains", p.wb_gains}, {"ccm", p.ccm}, {"gamma", p.gamma}};
}

IspParams isp_from_json(const nlohmann::json& j) {
  IspParams p;
  p.wb_gains = j.at("wb_gains").get<std::array<double, 3>>();
  p.ccm = j.at("ccm").get<std::array<double, 9>>();
  p.gamma = j.at("gamma").get<double>();
  return p;
}

std::array<double, 9> invert_3x3(const std::array<double, 9>& m) {
  double det = m[0] * (m[4] * m[8] - m[5] * m[7]) - m[1] * (m[3] * m[8] - m[5] * m[6]) +
               m[2] * (m[3] * m[7] - m[4] * m[6]);
  if (std::fabs(det) < 1e-12) throw std::runtime_error("singular color matrix");
  std::array<double, 9> inv{
      (m[4] * m[8] - m[5] * m[7]), (m[2] * m[7] - m[1] * m[8]), (m[1] * m[5] - m[2] * m[4]),
      (m[5] * m[6] - m[3] * m[8]), (m[0] * m[8] - m[2] * m[6]), (m[2] * m[3] - m[0] * m[5]),
      (m[3] * m[7] - m[4] * m[6]), (m[1] * m[6] - m[0] * m[7]), (m[0] * m[4] - m[1] * m[3])};
  for (auto& v : inv) v /= det;
  if (norm1_3x3(m) * norm1_3x3(inv) >= 1e4)
    throw std::runtime_error("ill-conditioned color matrix");
  return inv;
}

IspParams sample_isp(std::mt19937_64& rng) {
  // Inverse CCM (sRGB -> camera) with positive rows summing to 1 keeps
  // unprocessed values of in-range inputs inside [0,1].
  static const std::array<double, 9> kInvCcm{0.6, 0.3, 0.1, 0.2, 0.6, 0.2, 0.1, 0.3, 0.6};
  IspParams p;
  p.ccm = invert_3x3(kInvCcm);
  std::uniform_real_distribution<double> u(1.0, 2.0);
  for (auto& g : p.wb_gains) g = u(rng);
  p.gamma = 2.2;
  return p;
}

Image unprocess(const Image& img, const IspParams& isp) {
  if (img.colorspace != ColorSpace::SRGB)
    throw std::invalid_argument("unprocess: expects an sRGB image");
  if (img.channels != 3) throw std::invalid_argument("unprocess: RGB image required");
  std::array<double, 9> inv_ccm = invert_3x3(isp.ccm);
  Image out(img.height, img.width, 3, ColorSpace::LINEAR);
  float px[3], tmp[3];
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x) {
      for (int c = 0; c < 3; ++c)
        px[c] = static_cast<float>(signed_pow(img.at(y, x, c), isp.gamma));
      mat_apply(inv_ccm, px, tmp);
      for (int c = 0; c < 3; ++c)
        out.at(y, x, c) = static_cast<float>(tmp[c] / isp.wb_gains[c]);
    }
  return out;
}

Image process(const Image& img, const IspParams& isp) {
  if (img.colorspace != ColorSpace::LINEAR)
    throw std::invalid_argument("process: expects a linear image");
  if (img.channels != 3) throw std::invalid_argument("process: RGB image required");
  Image out(img.height, img.width, 3, ColorSpace::SRGB);
  float px[3], tmp[3];
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x) {
      for (int c = 0; c < 3; ++c)
        px[c] = static_cast<float>(img.at(y, x, c) * isp.wb_gains[c]);
      mat_apply(isp.ccm, px, tmp);
      for (int c = 0; c < 3; ++c)
        out.at(y, x, c) = static_cast<float>(signed_pow(tmp[c], 1.0 / isp.gamma));
    }
  return out;
}

}  // namespace selfir
