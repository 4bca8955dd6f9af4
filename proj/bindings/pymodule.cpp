#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <fstream>

#include "selfir/dataset.hpp"
#include "selfir/evaluate.hpp"
#include "selfir/image_io.hpp"
#include "selfir/noise.hpp"
#include "selfir/rng.hpp"
#include "selfir/sharp_mask.hpp"
#include "selfir/subsample.hpp"
#include "selfir/train.hpp"

namespace py = pybind11;
using namespace selfir;

namespace {

ColorSpace space_from(const std::string& s) {
  if (s == "srgb") return ColorSpace::SRGB;
  if (s == "linear") return ColorSpace::LINEAR;
  throw std::invalid_argument("space must be 'srgb' or 'linear'");
}

Image to_image(const py::array_t<float, py::array::c_style | py::array::forcecast>& arr,
               const std::string& space) {
  if (arr.ndim() != 2 && arr.ndim() != 3)
    throw std::invalid_argument("image array must be HxW or HxWxC");
  Image img(static_cast<int>(arr.shape(0)), static_cast<int>(arr.shape(1)),
            arr.ndim() == 3 ? static_cast<int>(arr.shape(2)) : 1, space_from(space));
  std::copy(arr.data(), arr.data() + img.size(), img.data.data());
  return img;
}

py::array_t<float> from_image(const Image& img) {
  py::array_t<float> arr({img.height, img.width, img.channels});
  std::copy(img.data.begin(), img.data.end(), arr.mutable_data());
  return arr;
}

nlohmann::json to_json(py::handle h) {
  if (h.is_none()) return nullptr;
  if (py::isinstance<py::bool_>(h)) return h.cast<bool>();
  if (py::isinstance<py::int_>(h)) return h.cast<long long>();
  if (py::isinstance<py::float_>(h)) return h.cast<double>();
  if (py::isinstance<py::str>(h)) return h.cast<std::string>();
  if (py::isinstance<py::dict>(h)) {
    nlohmann::json o = nlohmann::json::object();
    for (auto item : h.cast<py::dict>()) o[py::str(item.first).cast<std::string>()] = to_json(item.second);
    return o;
  }
  if (py::isinstance<py::list>(h) || py::isinstance<py::tuple>(h)) {
    nlohmann::json a = nlohmann::json::array();
    for (auto item : h.cast<py::sequence>()) a.push_back(to_json(item));
    return a;
  }
  throw std::invalid_argument("unsupported config value type");
}

py::object from_json(const nlohmann::json& j) {
  switch (j.type()) {
    case nlohmann::json::value_t::null: return py::none();
    case nlohmann::json::value_t::boolean: return py::bool_(j.get<bool>());
    case nlohmann::json::value_t::number_integer: return py::int_(j.get<long long>());
    case nlohmann::json::value_t::number_unsigned: return py::int_(j.get<unsigned long long>());
    case nlohmann::json::value_t::number_float: return py::float_(j.get<double>());
    case nlohmann::json::value_t::string: return py::str(j.get<std::string>());
    case nlohmann::json::value_t::array: {
      py::list l;
      for (const auto& v : j) l.append(from_json(v));
      return l;
    }
    case nlohmann::json::value_t::object: {
      py::dict d;
      for (auto it = j.begin(); it != j.end(); ++it) d[py::str(it.key())] = from_json(it.value());
      return d;
    }
    default: throw std::runtime_error("unsupported json value");
  }
}

}  // namespace

PYBIND11_MODULE(_selfir, m) {
  m.doc() = "self-supervised restoration from blurry/noisy pairs";

  m.def(
      "load_image",
      [](const std::string& path, const std::string& space, bool clamp) {
        return from_image(load_image(path, space_from(space), clamp));
      },
      py::arg("path"), py::arg("space") = "srgb", py::arg("clamp") = true);

  m.def(
      "save_image",
      [](const py::array_t<float, py::array::c_style | py::array::forcecast>& arr,
         const std::string& path, const std::string& space, int bit_depth) {
        save_image(to_image(arr, space), path, bit_depth);
      },
      py::arg("image"), py::arg("path"), py::arg("space") = "srgb", py::arg("bit_depth") = 8);

  m.def(
      "psnr",
      [](const py::array_t<float, py::array::c_style | py::array::forcecast>& a,
         const py::array_t<float, py::array::c_style | py::array::forcecast>& b, double peak) {
        return psnr(to_image(a, "srgb"), to_image(b, "srgb"), peak);
      },
      py::arg("a"), py::arg("b"), py::arg("peak") = 1.0);

  m.def("ssim",
        [](const py::array_t<float, py::array::c_style | py::array::forcecast>& a,
           const py::array_t<float, py::array::c_style | py::array::forcecast>& b) {
          return ssim_global(to_image(a, "srgb"), to_image(b, "srgb"));
        });

  m.def(
      "ssim_tiled",
      [](const py::array_t<float, py::array::c_style | py::array::forcecast>& a,
         const py::array_t<float, py::array::c_style | py::array::forcecast>& b, int tile) {
        return ssim_tiled(to_image(a, "srgb"), to_image(b, "srgb"), tile);
      },
      py::arg("a"), py::arg("b"), py::arg("tile") = 16);

  m.def(
      "add_gaussian",
      [](const py::array_t<float, py::array::c_style | py::array::forcecast>& arr, double sigma,
         std::uint64_t seed, bool clamp) {
        auto rng = make_rng(seed, Stream::NoiseDraw);
        return from_image(add_gaussian(to_image(arr, "srgb"), sigma, rng, clamp));
      },
      py::arg("image"), py::arg("sigma"), py::arg("seed"), py::arg("clamp") = true);

  m.def(
      "add_poisson",
      [](const py::array_t<float, py::array::c_style | py::array::forcecast>& arr, double lam,
         std::uint64_t seed, bool clamp) {
        auto rng = make_rng(seed, Stream::NoiseDraw);
        return from_image(add_poisson(to_image(arr, "srgb"), lam, rng, clamp));
      },
      py::arg("image"), py::arg("lambda"), py::arg("seed"), py::arg("clamp") = false);

  m.def(
      "add_sensor",
      [](const py::array_t<float, py::array::c_style | py::array::forcecast>& arr,
         double lambda_read, double lambda_shot, std::uint64_t seed, bool clamp) {
        auto rng = make_rng(seed, Stream::NoiseDraw);
        return from_image(
            add_sensor(to_image(arr, "linear"), SensorNoise{lambda_shot, lambda_read}, rng, clamp));
      },
      py::arg("image"), py::arg("lambda_read"), py::arg("lambda_shot"), py::arg("seed"),
      py::arg("clamp") = false);

  m.def(
      "sample_sensor_params",
      [](std::uint64_t seed, const std::string& model) {
        auto rng = make_rng(seed, Stream::NoiseDraw);
        const ReadNoiseMeanModel mm = model == "literal_shot" ? ReadNoiseMeanModel::LITERAL_SHOT
                                                              : ReadNoiseMeanModel::LOG_SHOT;
        const SensorNoise p = sample_sensor_params(rng, mm);
        return py::make_tuple(p.lambda_read, p.lambda_shot);
      },
      py::arg("seed"), py::arg("model") = "log_shot");

  m.def(
      "sample_isp",
      [](std::uint64_t seed) {
        auto rng = make_rng(seed, Stream::Isp);
        return from_json(isp_to_json(sample_isp(rng)));
      },
      py::arg("seed"));

  m.def(
      "unprocess",
      [](const py::array_t<float, py::array::c_style | py::array::forcecast>& arr,
         const py::dict& isp) {
        return from_image(unprocess(to_image(arr, "srgb"), isp_from_json(to_json(isp))));
      },
      py::arg("image"), py::arg("isp"));

  m.def(
      "process",
      [](const py::array_t<float, py::array::c_style | py::array::forcecast>& arr,
         const py::dict& isp) {
        return from_image(process(to_image(arr, "linear"), isp_from_json(to_json(isp))));
      },
      py::arg("image"), py::arg("isp"));

  m.def(
      "subsample",
      [](const py::array_t<float, py::array::c_style | py::array::forcecast>& arr,
         std::uint64_t seed, bool neighbor_only) {
        const Image img = to_image(arr, "srgb");
        const SubsamplePlan plan = draw_plan(img.height, img.width, seed, neighbor_only);
        return py::make_tuple(from_image(apply_plan(img, plan, 1)),
                              from_image(apply_plan(img, plan, 2)));
      },
      py::arg("image"), py::arg("seed"), py::arg("neighbor_only") = false);

  m.def(
      "sharp_mask",
      [](const py::array_t<float, py::array::c_style | py::array::forcecast>& blur,
         const py::array_t<float, py::array::c_style | py::array::forcecast>& ref, int patch,
         double eps_s, double eps_v) {
        const SharpMask sm =
            sharp_mask(to_image(blur, "srgb"), to_image(ref, "srgb"), patch, eps_s, eps_v);
        py::array_t<std::uint8_t> arr({sm.grid.n_rows, sm.grid.n_cols});
        std::copy(sm.values.begin(), sm.values.end(), arr.mutable_data());
        return arr;
      },
      py::arg("blur"), py::arg("reference"), py::arg("patch") = 16, py::arg("eps_s") = 0.99,
      py::arg("eps_v") = 1e-5);

  m.def(
      "synth_dataset",
      [](const std::string& out_dir, const py::kwargs& kw) {
        SynthConfig cfg;
        for (auto item : kw) {
          const std::string key = py::str(item.first).cast<std::string>();
          if (key == "n_scenes") cfg.n_scenes = item.second.cast<int>();
          else if (key == "height") cfg.height = item.second.cast<int>();
          else if (key == "width") cfg.width = item.second.cast<int>();
          else if (key == "n_frames") cfg.n_frames = item.second.cast<int>();
          else if (key == "min_objects") cfg.min_objects = item.second.cast<int>();
          else if (key == "max_objects") cfg.max_objects = item.second.cast<int>();
          else if (key == "noise_model") cfg.noise_model = item.second.cast<std::string>();
          else if (key == "sigma_lo") cfg.sigma_lo = item.second.cast<double>();
          else if (key == "sigma_hi") cfg.sigma_hi = item.second.cast<double>();
          else if (key == "lambda_lo") cfg.lambda_lo = item.second.cast<double>();
          else if (key == "lambda_hi") cfg.lambda_hi = item.second.cast<double>();
          else if (key == "space") cfg.space = space_from(item.second.cast<std::string>());
          else if (key == "nb_std") cfg.nb_std = item.second.cast<double>();
          else if (key == "seed") cfg.seed = item.second.cast<std::uint64_t>();
          else throw std::invalid_argument("unknown synth option: " + key);
        }
        return synth_dataset(cfg, out_dir);
      },
      py::arg("out_dir"));

  m.def(
      "train",
      [](const py::dict& config, const std::string& manifest, const std::string& run_dir,
         const std::string& resume) {
        const TrainConfig cfg = train_config_from_json(to_json(config));
        const Dataset data = Dataset::load(manifest);
        TrainResult res;
        {
          py::gil_scoped_release release;
          res = train(cfg, data, run_dir, resume);
        }
        py::dict d;
        d["run_dir"] = res.run_dir;
        d["checkpoint"] = res.checkpoint_dir;
        d["log"] = res.log_path;
        d["steps"] = res.steps;
        d["final_total"] = res.final_total;
        return d;
      },
      py::arg("config"), py::arg("manifest"), py::arg("run_dir"), py::arg("resume") = "");

  m.def(
      "evaluate",
      [](const std::string& checkpoint_dir, const std::string& manifest,
         const std::string& run_id) {
        const Dataset data = Dataset::load(manifest);
        EvalResult res;
        {
          py::gil_scoped_release release;
          res = evaluate_checkpoint(checkpoint_dir, data);
        }
        return from_json(eval_report_json(res, run_id));
      },
      py::arg("checkpoint"), py::arg("manifest"), py::arg("run_id") = "run");

  m.def("toy_train_config", [] {
    TrainConfig cfg;
    apply_toy_profile(cfg);
    return from_json(train_config_to_json(cfg));
  });
}
