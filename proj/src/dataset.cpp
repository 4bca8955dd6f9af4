#include "selfir/dataset.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "selfir/image_io.hpp"
#include "selfir/rng.hpp"

namespace fs = std::filesystem;

namespace selfir {

namespace {

std::string pair_name(int id, const char* kind, const char* ext) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "pairs/%06d_%s.%s", id, kind, ext);
  return buf;
}

NoiseParams draw_noise(const SynthConfig& cfg, std::mt19937_64& rng) {
  if (cfg.noise_model == "gaussian")
    return GaussianNoise{sample_gaussian_sigma(rng, cfg.sigma_lo, cfg.sigma_hi)};
  if (cfg.noise_model == "poisson")
    return PoissonNoise{sample_poisson_lambda(rng, cfg.lambda_lo, cfg.lambda_hi)};
  if (cfg.noise_model == "sensor") return sample_sensor_params(rng);
  throw std::invalid_argument("unknown noise model: " + cfg.noise_model);
}

}  // namespace

std::string synth_dataset(const SynthConfig& cfg, const std::string& out_dir) {
  if (cfg.n_scenes < 1) throw std::invalid_argument("synth: n_scenes must be positive");
  if (cfg.n_frames < 7 || cfg.n_frames > 13)
    throw std::invalid_argument("synth: n_frames must lie in [7, 13]");
  if (cfg.height % 2 || cfg.width % 2)
    throw std::invalid_argument("synth: canvas dims must be even");
  if (cfg.space == ColorSpace::SRGB && cfg.noise_model == "sensor")
    throw std::invalid_argument("synth: sensor noise requires --space linear");

  fs::create_directories(fs::path(out_dir) / "pairs");
  const bool srgb = cfg.space == ColorSpace::SRGB;
  nlohmann::json records = nlohmann::json::array();

  for (int i = 0; i < cfg.n_scenes; ++i) {
    std::mt19937_64 rng_scene = make_rng(cfg.seed, Stream::Scene, i);
    std::mt19937_64 rng_shake = make_rng(cfg.seed, Stream::Shake, i);
    std::mt19937_64 rng_noise = make_rng(cfg.seed, Stream::NoiseDraw, i);

    std::uniform_int_distribution<int> n_obj(cfg.min_objects, cfg.max_objects);
    SceneSpec scene =
        sample_scene(cfg.height, cfg.width, n_obj(rng_scene), cfg.n_frames, rng_scene);
    Burst burst = render_burst(scene, cfg.n_frames, rng_shake);

    NoiseParams noise = draw_noise(cfg, rng_noise);
    std::optional<IspParams> isp;
    if (!srgb) isp = sample_isp(rng_noise);
    CapturePair pair = make_pair(burst, noise, cfg.space, isp, rng_noise, cfg.nb_std);

    const char* img_ext = srgb ? "png" : "sirt";
    std::string clean_rel = pair_name(i, "clean", img_ext);
    std::string blur_rel = pair_name(i, "blur", img_ext);
    std::string noisy_rel = pair_name(i, "noisy", "sirt");
    if (srgb) {
      save_png(pair.clean, (fs::path(out_dir) / clean_rel).string(), 16);
      save_png(pair.blur, (fs::path(out_dir) / blur_rel).string(), 16);
    } else {
      save_sirt_image(pair.clean, (fs::path(out_dir) / clean_rel).string());
      save_sirt_image(pair.blur, (fs::path(out_dir) / blur_rel).string());
    }
    save_sirt_image(pair.noisy, (fs::path(out_dir) / noisy_rel).string());

    nlohmann::json rec{{"id", i},
                       {"clean", clean_rel},
                       {"blur", blur_rel},
                       {"noisy", noisy_rel},
                       {"noise", noise_to_json(noise)},
                       {"space", srgb ? "srgb" : "linear"},
                       {"seed", derive_seed(cfg.seed, Stream::Scene, i)}};
    rec["isp"] = isp ? isp_to_json(*isp) : nlohmann::json();
    records.push_back(std::move(rec));
  }

  nlohmann::json manifest{{"format_version", 1},
                          {"dataset_seed", cfg.seed},
                          {"space", srgb ? "srgb" : "linear"},
                          {"n_frames", cfg.n_frames},
                          {"canvas", {cfg.height, cfg.width}},
                          {"noise_model", cfg.noise_model},
                          {"records", std::move(records)}};
  const std::string manifest_path = (fs::path(out_dir) / "manifest.json").string();
  std::ofstream out(manifest_path);
  if (!out) throw std::runtime_error("cannot write " + manifest_path);
  out << manifest.dump(2) << '\n';
  return manifest_path;
}

Dataset Dataset::load(const std::string& manifest_path) {
  std::ifstream in(manifest_path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open manifest " + manifest_path);
  std::stringstream buf;
  buf << in.rdbuf();
  const std::string bytes = buf.str();

  Dataset ds;
  ds.manifest_path_ = manifest_path;
  ds.manifest_hash_ = fnv1a64(bytes.data(), bytes.size());

  nlohmann::json manifest = nlohmann::json::parse(bytes);
  if (manifest.at("format_version").get<int>() != 1)
    throw std::runtime_error("unsupported manifest version in " + manifest_path);
  ds.space_ = manifest.at("space").get<std::string>() == "srgb" ? ColorSpace::SRGB
                                                                : ColorSpace::LINEAR;
  const fs::path root = fs::path(manifest_path).parent_path();
  for (const auto& rec : manifest.at("records")) {
    DataRecord r;
    r.id = rec.at("id").get<int>();
    r.clean_path = (root / rec.at("clean").get<std::string>()).string();
    r.blur_path = (root / rec.at("blur").get<std::string>()).string();
    r.noisy_path = (root / rec.at("noisy").get<std::string>()).string();
    r.noise = noise_from_json(rec.at("noise"));
    r.space = rec.at("space").get<std::string>() == "srgb" ? ColorSpace::SRGB
                                                           : ColorSpace::LINEAR;
    if (rec.contains("isp") && !rec.at("isp").is_null()) r.isp = isp_from_json(rec.at("isp"));
    r.seed = rec.value("seed", 0ull);

    ds.clean_.push_back(load_image(r.clean_path, r.space));
    ds.blur_.push_back(load_image(r.blur_path, r.space));
    ds.noisy_.push_back(load_image(r.noisy_path, r.space, /*clamp=*/false));
    if (!ds.clean_.back().same_shape(ds.blur_.back()) ||
        !ds.clean_.back().same_shape(ds.noisy_.back()))
      throw std::runtime_error("manifest record " + std::to_string(r.id) +
                               ": images disagree in shape");
    ds.records_.push_back(std::move(r));
  }
  if (ds.records_.empty()) throw std::runtime_error("manifest has no records");
  return ds;
}

CropSample draw_crop(int h, int w, int crop, std::mt19937_64& rng, bool with_flips) {
  if (crop > h || crop > w)
    throw std::invalid_argument("draw_crop: image smaller than crop size");
  CropSample cs;
  cs.crop = crop;
  std::uniform_int_distribution<int> dy(0, h - crop), dx(0, w - crop);
  cs.y0 = dy(rng);
  cs.x0 = dx(rng);
  if (with_flips) {
    std::uniform_int_distribution<int> bit(0, 1);
    cs.hflip = bit(rng) != 0;
    cs.vflip = bit(rng) != 0;
  }
  return cs;
}

Image apply_crop(const Image& img, const CropSample& cs) {
  Image out = crop(img, cs.y0, cs.x0, cs.crop, cs.crop);
  if (cs.hflip) out = flip_horizontal(out);
  if (cs.vflip) out = flip_vertical(out);
  return out;
}

}  // namespace selfir
