#pragma once

#include <array>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "selfir/image.hpp"
#include "selfir/noise.hpp"

namespace selfir {

// Ordered sharp frames of one exposure window. The middle frame is the
// latent clean image the pair construction aligns everything to.
struct Burst {
  std::vector<Image> frames;
  double frame_interval = 1.0;

  int middle_index() const { return static_cast<int>(frames.size()) / 2; }
  const Image& middle() const { return frames[middle_index()]; }
  void validate() const;
};

enum class ObjectKind { RECT, ELLIPSE, STROKE };

struct MovingObject {
  ObjectKind kind = ObjectKind::RECT;
  double cy = 0, cx = 0;  // center at the middle frame
  double sy = 0, sx = 0;  // bounding box extents
  std::array<float, 3> color{0.5f, 0.5f, 0.5f};
  double vy = 0, vx = 0;  // pixels per frame
  std::uint64_t texture_seed = 0;
};

// Full description of an animated scene: textured background plus rigid
// objects translating at constant velocity, under optional camera shake.
struct SceneSpec {
  int height = 0;
  int width = 0;
  std::vector<MovingObject> objects;
  std::uint64_t background_seed = 0;
  double background_amplitude = 0.25;  // texture contrast around mid gray
  double shake_amplitude = 0.0;        // per-frame random-walk step std
};

// Random scene whose object speeds keep the total per-burst displacement
// within 25% of the canvas width.
SceneSpec sample_scene(int height, int width, int n_objects, int n_frames,
                       std::mt19937_64& rng);

// Renders n_frames views of the scene; object positions advance by their
// velocity per frame and the whole view drifts along a random-walk shake
// trajectory drawn from rng.
Burst render_burst(const SceneSpec& spec, int n_frames, std::mt19937_64& rng);

// Pixel-wise arithmetic mean of the frames (the long-exposure image).
Image average_blur(const Burst& burst);
// Same, plus low-intensity Gaussian readout noise on the average.
// nb_std is capped at 2/255: the blurry capture is modeled as nearly
// noise-free.
Image average_blur(const Burst& burst, double nb_std, std::mt19937_64& rng);

// One training/eval example: latent clean, long-exposure blurry and
// short-exposure noisy view, all in the same colorspace.
struct CapturePair {
  Image clean;
  Image blur;
  Image noisy;  // unclamped; may exceed [0,1]
  NoiseParams noise;
  std::optional<IspParams> isp;  // set on the raw-like linear track
};

// Builds the capture pair from a burst. space selects the sRGB track or
// the raw-like linear track (which unprocesses via isp when the burst is
// sRGB). Sensor noise is only valid on the linear track. nb_std adds the
// optional low-intensity noise to the blurry image.
CapturePair make_pair(const Burst& burst, const NoiseParams& noise, ColorSpace space,
                      const std::optional<IspParams>& isp, std::mt19937_64& rng,
                      double nb_std = 0.0);

// Reads a directory of ordered sharp PNG frames (sorted by filename) as a
// burst, for externally captured data.
Burst load_burst(const std::string& dir, ColorSpace cs = ColorSpace::SRGB);

}  // namespace selfir
