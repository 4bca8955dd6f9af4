#include "selfir/burst.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <stdexcept>

#include "selfir/image_io.hpp"
#include "selfir/rng.hpp"

namespace selfir {

namespace {

double hash01(std::uint64_t seed, std::int64_t iy, std::int64_t ix, int c) {
  std::uint64_t h = seed;
  h = splitmix64(h ^ static_cast<std::uint64_t>(iy) * 0x9e3779b97f4a7c15ull);
  h = splitmix64(h ^ static_cast<std::uint64_t>(ix) * 0xbf58476d1ce4e5b9ull);
  h = splitmix64(h ^ static_cast<std::uint64_t>(c) * 0x94d049bb133111ebull);
  return static_cast<double>(h >> 11) * 0x1.0p-53;
}

// Smooth lattice value noise, bilinear between hashed corners.
double value_noise(std::uint64_t seed, double y, double x, int c, double cell) {
  double fy = y / cell, fx = x / cell;
  auto iy = static_cast<std::int64_t>(std::floor(fy));
  auto ix = static_cast<std::int64_t>(std::floor(fx));
  double ty = fy - iy, tx = fx - ix;
  double v00 = hash01(seed, iy, ix, c), v01 = hash01(seed, iy, ix + 1, c);
  double v10 = hash01(seed, iy + 1, ix, c), v11 = hash01(seed, iy + 1, ix + 1, c);
  // smoothstep weights avoid visible lattice creases
  ty = ty * ty * (3 - 2 * ty);
  tx = tx * tx * (3 - 2 * tx);
  return (v00 * (1 - tx) + v01 * tx) * (1 - ty) + (v10 * (1 - tx) + v11 * tx) * ty;
}

double texture(std::uint64_t seed, double y, double x, int c) {
  return 0.65 * value_noise(seed, y, x, c, 17.0) + 0.35 * value_noise(seed ^ 0xabcdu, y, x, c, 5.0);
}

double dist_to_segment(double py, double px, double ay, double ax, double by, double bx) {
  double dy = by - ay, dx = bx - ax;
  double len2 = dy * dy + dx * dx;
  double t = len2 > 0 ? ((py - ay) * dy + (px - ax) * dx) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  double qy = ay + t * dy, qx = ax + t * dx;
  return std::hypot(py - qy, px - qx);
}

// Returns true and the object color when the pixel (in object-local
// coordinates) is covered. Textures are evaluated in local coordinates so
// objects translate rigidly.
bool object_sample(const MovingObject& o, double ly, double lx, std::array<float, 3>& out) {
  switch (o.kind) {
    case ObjectKind::RECT: {
      if (std::fabs(ly) > o.sy / 2 || std::fabs(lx) > o.sx / 2) return false;
      double t = 0.7 + 0.6 * texture(o.texture_seed, ly, lx, 0);
      for (int c = 0; c < 3; ++c)
        out[c] = std::clamp(static_cast<float>(o.color[c] * t), 0.f, 1.f);
      return true;
    }
    case ObjectKind::ELLIPSE: {
      double ry = o.sy / 2, rx = o.sx / 2;
      if (ry <= 0 || rx <= 0) return false;
      double d = (ly / ry) * (ly / ry) + (lx / rx) * (lx / rx);
      if (d > 1.0) return false;
      out = o.color;
      return true;
    }
    case ObjectKind::STROKE: {
      // Three-segment glyph-like polyline through hashed control points.
      double thick = std::max(1.2, std::min(o.sy, o.sx) / 6.0);
      double py[4], px[4];
      for (int k = 0; k < 4; ++k) {
        py[k] = (hash01(o.texture_seed, k, 0, 1) - 0.5) * o.sy;
        px[k] = (hash01(o.texture_seed, k, 1, 2) - 0.5) * o.sx;
      }
      for (int k = 0; k < 3; ++k)
        if (dist_to_segment(ly, lx, py[k], px[k], py[k + 1], px[k + 1]) <= thick) {
          out = o.color;
          return true;
        }
      return false;
    }
  }
  return false;
}

}  // namespace

void Burst::validate() const {
  if (frames.size() < 2) throw std::invalid_argument("burst needs at least 2 frames");
  for (const auto& f : frames) {
    if (!f.same_shape(frames[0]) || f.colorspace != frames[0].colorspace)
      throw std::invalid_argument("burst frames must share shape and colorspace");
  }
}

SceneSpec sample_scene(int height, int width, int n_objects, int n_frames,
                       std::mt19937_64& rng) {
  if (height < 8 || width < 8) throw std::invalid_argument("canvas too small");
  if (n_frames < 2) throw std::invalid_argument("n_frames must be >= 2");
  SceneSpec spec;
  spec.height = height;
  spec.width = width;
  spec.background_seed = rng();
  spec.background_amplitude = 0.22;
  spec.shake_amplitude = 0.25;

  std::uniform_real_distribution<double> u01(0.0, 1.0);
  // Total drift over the burst stays within a quarter of the width.
  double max_speed = 0.25 * width / std::max(1, n_frames - 1);
  for (int i = 0; i < n_objects; ++i) {
    MovingObject o;
    o.kind = static_cast<ObjectKind>(i % 3);
    o.cy = height * (0.2 + 0.6 * u01(rng));
    o.cx = width * (0.2 + 0.6 * u01(rng));
    o.sy = height * (0.12 + 0.25 * u01(rng));
    o.sx = width * (0.12 + 0.25 * u01(rng));
    for (auto& c : o.color) c = static_cast<float>(0.1 + 0.8 * u01(rng));
    double speed = max_speed * u01(rng);
    double angle = 2.0 * M_PI * u01(rng);
    o.vy = speed * std::sin(angle);
    o.vx = speed * std::cos(angle);
    o.texture_seed = rng();
    spec.objects.push_back(o);
  }
  return spec;
}

Burst render_burst(const SceneSpec& spec, int n_frames, std::mt19937_64& rng) {
  if (n_frames < 2) throw std::invalid_argument("render_burst: n_frames must be >= 2");
  if (spec.height < 2 || spec.width < 2) throw std::invalid_argument("degenerate canvas");
  for (const auto& o : spec.objects) {
    double disp = std::hypot(o.vy, o.vx) * (n_frames - 1);
    if (disp > 0.25 * spec.width + 1e-9)
      throw std::invalid_argument("object displacement exceeds 25% of canvas width");
  }

  // Camera shake: cumulative random walk, zero at the first frame.
  std::vector<std::array<double, 2>> shake(n_frames, {0.0, 0.0});
  std::normal_distribution<double> step(0.0, spec.shake_amplitude);
  for (int t = 1; t < n_frames; ++t) {
    double sy = spec.shake_amplitude > 0 ? step(rng) : 0.0;
    double sx = spec.shake_amplitude > 0 ? step(rng) : 0.0;
    shake[t] = {shake[t - 1][0] + sy, shake[t - 1][1] + sx};
  }

  int mid = n_frames / 2;
  Burst burst;
  burst.frames.reserve(n_frames);
  for (int t = 0; t < n_frames; ++t) {
    Image frame(spec.height, spec.width, 3, ColorSpace::SRGB);
    double shy = shake[t][0], shx = shake[t][1];
    for (int y = 0; y < spec.height; ++y)
      for (int x = 0; x < spec.width; ++x) {
        std::array<float, 3> px;
        for (int c = 0; c < 3; ++c) {
          double v = 0.5 + spec.background_amplitude *
                               (2.0 * texture(spec.background_seed, y + shy, x + shx, c) - 1.0);
          px[c] = static_cast<float>(std::clamp(v, 0.02, 0.98));
        }
        for (const auto& o : spec.objects) {
          double oy = o.cy + o.vy * (t - mid) + shy;
          double ox = o.cx + o.vx * (t - mid) + shx;
          std::array<float, 3> col;
          if (object_sample(o, y - oy, x - ox, col)) px = col;
        }
        for (int c = 0; c < 3; ++c) frame.at(y, x, c) = px[c];
      }
    burst.frames.push_back(std::move(frame));
  }
  burst.validate();
  return burst;
}

Image average_blur(const Burst& burst) {
  burst.validate();
  Image out(burst.frames[0].height, burst.frames[0].width, burst.frames[0].channels,
            burst.frames[0].colorspace);
  const double inv = 1.0 / burst.frames.size();
  std::vector<double> acc(out.size(), 0.0);
  for (const auto& f : burst.frames)
    for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += f.data[i];
  for (std::size_t i = 0; i < acc.size(); ++i) out.data[i] = static_cast<float>(acc[i] * inv);
  return out;
}

Image average_blur(const Burst& burst, double nb_std, std::mt19937_64& rng) {
  if (nb_std < 0 || nb_std > 2.0 / 255.0)
    throw std::invalid_argument("blur-image noise std must lie in [0, 2/255]");
  Image out = average_blur(burst);
  if (nb_std > 0) out = add_gaussian(out, nb_std, rng, /*clamp=*/false);
  return out;
}

CapturePair make_pair(const Burst& burst, const NoiseParams& noise, ColorSpace space,
                      const std::optional<IspParams>& isp, std::mt19937_64& rng,
                      double nb_std) {
  burst.validate();
  if (space == ColorSpace::SRGB && std::holds_alternative<SensorNoise>(noise))
    throw std::invalid_argument("sensor noise requires the linear track");
  const ColorSpace burst_cs = burst.frames[0].colorspace;
  if (space == ColorSpace::LINEAR && burst_cs == ColorSpace::SRGB && !isp)
    throw std::invalid_argument("linear track from an sRGB burst needs ISP parameters");

  CapturePair pair;
  pair.noise = noise;
  pair.clean = burst.middle();
  pair.blur = average_blur(burst, nb_std, rng);
  if (space == ColorSpace::LINEAR && burst_cs == ColorSpace::SRGB) {
    pair.clean = unprocess(pair.clean, *isp);
    pair.blur = unprocess(pair.blur, *isp);
    pair.isp = isp;
  } else if (space == ColorSpace::SRGB && burst_cs == ColorSpace::LINEAR) {
    throw std::invalid_argument("cannot build an sRGB pair from a linear burst");
  }
  pair.noisy = apply_noise(pair.clean, noise, rng, /*clamp=*/false);
  return pair;
}

Burst load_burst(const std::string& dir, ColorSpace cs) {
  std::vector<std::filesystem::path> paths;
  for (const auto& e : std::filesystem::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ".png") paths.push_back(e.path());
  std::sort(paths.begin(), paths.end());
  if (paths.size() < 2) throw std::runtime_error("burst directory needs >= 2 PNG frames: " + dir);
  Burst b;
  for (const auto& p : paths) b.frames.push_back(load_image(p.string(), cs));
  b.validate();
  return b;
}

}  // namespace selfir
