#include "selfir/evaluate.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#include "selfir/checkpoint.hpp"
#include "selfir/noise.hpp"
#include "selfir/rng.hpp"
#include "selfir/tensor.hpp"

namespace selfir {

namespace {

// Everything is scored in sRGB; linear-track images carry their ISP in
// the record.
Image to_metric_space(const Image& img, const DataRecord& rec) {
  if (img.colorspace == ColorSpace::LINEAR) {
    if (!rec.isp) throw std::runtime_error("evaluate: linear image without ISP parameters");
    return process(img, *rec.isp);
  }
  return img;
}

std::string fmt4(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4f", v);
  return buf;
}

}  // namespace

EvalResult evaluate_set(const Dataset& data, const Restorer& restore,
                        const std::string& mode_label) {
  if (data.size() == 0) throw std::invalid_argument("evaluate_set: empty dataset");
  EvalResult res;
  res.mode = mode_label;
  res.manifest_hash = data.manifest_hash();
  res.colorspace = data.space() == ColorSpace::SRGB ? "srgb" : "linear";
  for (int i = 0; i < data.size(); ++i) {
    const DataRecord& rec = data.record(i);
    const Image& blur = data.blur(i);
    const Image& noisy = data.noisy(i);
    Image out = restore(rec, blur, noisy);
    if (!out.same_shape(blur))
      throw std::runtime_error("evaluate_set: restorer changed the image shape");
    const Image clean_m = to_metric_space(data.clean(i), rec);
    const Image out_m = to_metric_space(out, rec);
    const Image blur_m = to_metric_space(blur, rec);
    const Image noisy_m = to_metric_space(noisy, rec);
    EvalRow row;
    row.id = rec.id;
    row.psnr = psnr(out_m, clean_m);
    row.ssim = ssim_tiled(out_m, clean_m);
    row.psnr_blur = psnr(blur_m, clean_m);
    row.ssim_blur = ssim_tiled(blur_m, clean_m);
    row.psnr_noisy = psnr(noisy_m, clean_m);
    row.ssim_noisy = ssim_tiled(noisy_m, clean_m);
    res.rows.push_back(row);
    res.mean_psnr_out += row.psnr;
    res.mean_ssim_out += row.ssim;
    res.mean_psnr_blur += row.psnr_blur;
    res.mean_ssim_blur += row.ssim_blur;
    res.mean_psnr_noisy += row.psnr_noisy;
    res.mean_ssim_noisy += row.ssim_noisy;
  }
  const double inv = 1.0 / static_cast<double>(res.rows.size());
  res.mean_psnr_out *= inv;
  res.mean_ssim_out *= inv;
  res.mean_psnr_blur *= inv;
  res.mean_ssim_blur *= inv;
  res.mean_psnr_noisy *= inv;
  res.mean_ssim_noisy *= inv;
  return res;
}

EvalResult evaluate_checkpoint(const std::string& checkpoint_dir, const Dataset& data) {
  const NetworkConfig nc = checkpoint_config(checkpoint_dir);
  DualUNet<float> net(nc);
  load_checkpoint(checkpoint_dir, net, nullptr);
  const nlohmann::json meta = checkpoint_meta(checkpoint_dir);
  const TrainMode mode = meta.contains("mode")
                             ? train_mode_from_string(meta.at("mode").get<std::string>())
                             : TrainMode::SELFIR;

  const int div = nc.spatial_divisor();
  auto run_net = [&](const Image& a, const Image* b) {
    const int ph = (div - a.height % div) % div;
    const int pw = (div - a.width % div) % div;
    Image ap = ph || pw ? pad_replicate(a, ph, pw) : a;
    Tensor<float> ta = image_to_tensor<float>(ap);
    Tensor<float> tb;
    if (b) {
      Image bp = ph || pw ? pad_replicate(*b, ph, pw) : *b;
      tb = image_to_tensor<float>(bp);
    }
    Tensor<float> to = net.forward_nograd(ta, tb);
    Image out = tensor_to_image(to, 0, a.colorspace);
    if (ph || pw) out = crop(out, 0, 0, a.height, a.width);
    return out;
  };

  Restorer restore = [&](const DataRecord&, const Image& blur, const Image& noisy) {
    switch (mode) {
      case TrainMode::SELFIR:
      case TrainMode::BASELINE_R: return run_net(blur, &noisy);
      case TrainMode::BASELINE_B:
      case TrainMode::DEBLUR_NOISY_SUP: return run_net(blur, nullptr);
      case TrainMode::BASELINE_N:
      case TrainMode::N2N_STYLE:
      case TrainMode::NEI2NEI_STYLE: return run_net(noisy, nullptr);
    }
    throw std::logic_error("unhandled mode");
  };

  EvalResult res = evaluate_set(data, restore, to_string(mode));
  res.net_config_hash_hex = hex64(net_config_hash(nc));
  return res;
}

nlohmann::json eval_report_json(const EvalResult& r, const std::string& run_id) {
  nlohmann::json per = nlohmann::json::array();
  for (const EvalRow& row : r.rows)
    per.push_back({{"id", row.id},
                   {"psnr", row.psnr},
                   {"ssim", row.ssim},
                   {"psnr_blur", row.psnr_blur},
                   {"ssim_blur", row.ssim_blur},
                   {"psnr_noisy", row.psnr_noisy},
                   {"ssim_noisy", row.ssim_noisy}});
  return {{"format_version", 1},
          {"kind", "eval_report"},
          {"run_id", run_id},
          {"mode", r.mode},
          {"manifest_hash", hex64(r.manifest_hash)},
          {"net_config_hash", r.net_config_hash_hex},
          {"colorspace", r.colorspace},
          {"n_images", static_cast<int>(r.rows.size())},
          {"aggregate",
           {{"psnr", r.mean_psnr_out},
            {"ssim", r.mean_ssim_out},
            {"psnr_blur", r.mean_psnr_blur},
            {"ssim_blur", r.mean_ssim_blur},
            {"psnr_noisy", r.mean_psnr_noisy},
            {"ssim_noisy", r.mean_ssim_noisy}}},
          {"per_image", per}};
}

void write_eval_report(const EvalResult& r, const std::string& run_id,
                       const std::string& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write report: " + path);
  f << eval_report_json(r, run_id).dump(2) << "\n";
}

CompareTable compare_runs(const std::vector<std::string>& report_paths) {
  if (report_paths.empty()) throw std::invalid_argument("compare_runs: no reports");
  CompareTable table;
  std::string manifest;
  for (const std::string& p : report_paths) {
    std::ifstream f(p);
    if (!f) throw std::runtime_error("cannot read report: " + p);
    nlohmann::json j;
    f >> j;
    const std::string mh = j.at("manifest_hash").get<std::string>();
    if (manifest.empty())
      manifest = mh;
    else if (mh != manifest)
      throw std::runtime_error("compare_runs: reports cover different test sets (" + p + ")");
    CompareRow row;
    row.run_id = j.at("run_id").get<std::string>();
    row.mode = j.at("mode").get<std::string>();
    row.psnr = j.at("aggregate").at("psnr").get<double>();
    row.ssim = j.at("aggregate").at("ssim").get<double>();
    table.rows.push_back(row);
  }
  std::sort(table.rows.begin(), table.rows.end(), [](const CompareRow& a, const CompareRow& b) {
    if (a.psnr != b.psnr) return a.psnr > b.psnr;
    return a.run_id < b.run_id;
  });

  std::string csv = "run_id,mode,psnr,ssim\n";
  std::string md = "| run | mode | PSNR (dB) | SSIM |\n|---|---|---|---|\n";
  for (const CompareRow& r : table.rows) {
    csv += r.run_id + "," + r.mode + "," + fmt4(r.psnr) + "," + fmt4(r.ssim) + "\n";
    md += "| " + r.run_id + " | " + r.mode + " | " + fmt4(r.psnr) + " | " + fmt4(r.ssim) +
          " |\n";
  }
  table.csv = std::move(csv);
  table.markdown = std::move(md);
  return table;
}

}  // namespace selfir
