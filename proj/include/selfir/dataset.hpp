#pragma once

#include <optional>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "selfir/burst.hpp"
#include "selfir/image.hpp"
#include "selfir/noise.hpp"

namespace selfir {

// Synthetic dataset generator settings. Each scene becomes one
// (clean, blurry, noisy) triple rendered from an animated burst.
struct SynthConfig {
  int n_scenes = 200;
  int height = 96;
  int width = 144;
  int n_frames = 11;  // frames averaged per blurry image, in [7, 13]
  int min_objects = 2;
  int max_objects = 4;
  std::string noise_model = "gaussian";  // gaussian | poisson | sensor
  double sigma_lo = 5.0 / 255.0, sigma_hi = 50.0 / 255.0;
  double lambda_lo = 5.0, lambda_hi = 50.0;
  ColorSpace space = ColorSpace::SRGB;
  double nb_std = 0.0;  // optional low-intensity noise on the blurry image
  std::uint64_t seed = 1;
};

// Renders the dataset into out_dir/pairs and writes out_dir/manifest.json;
// returns the manifest path. Clean/blurry images are stored as 16-bit
// PNGs on the sRGB track and raw float tensors on the linear track; the
// noisy image is always a float tensor so it stays unclamped.
std::string synth_dataset(const SynthConfig& cfg, const std::string& out_dir);

struct DataRecord {
  int id = 0;
  std::string clean_path, blur_path, noisy_path;
  NoiseParams noise;
  ColorSpace space = ColorSpace::SRGB;
  std::optional<IspParams> isp;
  std::uint64_t seed = 0;
};

// Eager-loading dataset over a manifest. Clean images are only reachable
// through clean(), which counts accesses — tests use the counter to prove
// the self-supervised mode never touches ground truth.
class Dataset {
 public:
  static Dataset load(const std::string& manifest_path);

  int size() const { return static_cast<int>(records_.size()); }
  const Image& blur(int i) const { return blur_.at(i); }
  const Image& noisy(int i) const { return noisy_.at(i); }
  const Image& clean(int i) const {
    ++clean_access_count_;
    return clean_.at(i);
  }
  const DataRecord& record(int i) const { return records_.at(i); }
  long long clean_access_count() const { return clean_access_count_; }
  std::uint64_t manifest_hash() const { return manifest_hash_; }
  const std::string& manifest_path() const { return manifest_path_; }
  ColorSpace space() const { return space_; }

 private:
  std::vector<DataRecord> records_;
  std::vector<Image> clean_, blur_, noisy_;
  mutable long long clean_access_count_ = 0;
  std::uint64_t manifest_hash_ = 0;
  std::string manifest_path_;
  ColorSpace space_ = ColorSpace::SRGB;
};

// Shared augmentation draw: one crop window plus flip bits, applied
// identically to every image of a sample so the triple stays aligned.
struct CropSample {
  int y0 = 0, x0 = 0;
  int crop = 0;
  bool hflip = false, vflip = false;
};

CropSample draw_crop(int h, int w, int crop, std::mt19937_64& rng, bool with_flips = true);
Image apply_crop(const Image& img, const CropSample& cs);

}  // namespace selfir
