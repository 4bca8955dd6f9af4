#include "selfir/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "selfir/evaluate.hpp"
#include "selfir/rng.hpp"

namespace fs = std::filesystem;

namespace selfir {

std::string to_string(TrainMode m) {
  switch (m) {
    case TrainMode::SELFIR: return "SELFIR";
    case TrainMode::BASELINE_B: return "BASELINE_B";
    case TrainMode::BASELINE_N: return "BASELINE_N";
    case TrainMode::BASELINE_R: return "BASELINE_R";
    case TrainMode::N2N_STYLE: return "N2N_STYLE";
    case TrainMode::NEI2NEI_STYLE: return "NEI2NEI_STYLE";
    case TrainMode::DEBLUR_NOISY_SUP: return "DEBLUR_NOISY_SUP";
  }
  throw std::invalid_argument("unknown train mode");
}

TrainMode train_mode_from_string(const std::string& s) {
  for (TrainMode m : {TrainMode::SELFIR, TrainMode::BASELINE_B, TrainMode::BASELINE_N,
                      TrainMode::BASELINE_R, TrainMode::N2N_STYLE, TrainMode::NEI2NEI_STYLE,
                      TrainMode::DEBLUR_NOISY_SUP})
    if (s == to_string(m)) return m;
  throw std::invalid_argument("unknown train mode: " + s);
}

bool mode_uses_dual_input(TrainMode m) {
  return m == TrainMode::SELFIR || m == TrainMode::BASELINE_R;
}

bool mode_needs_clean(TrainMode m) {
  return m == TrainMode::BASELINE_B || m == TrainMode::BASELINE_N ||
         m == TrainMode::BASELINE_R || m == TrainMode::N2N_STYLE;
}

void TrainConfig::validate() const {
  if (batch_size < 1) throw std::invalid_argument("batch_size must be positive");
  if (crop_size < 4 || crop_size % 4 != 0)
    throw std::invalid_argument("crop_size must be a positive multiple of 4");
  if (epochs < 1) throw std::invalid_argument("epochs must be positive");
  if (steps_per_epoch < 0) throw std::invalid_argument("steps_per_epoch must be >= 0");
  if (!(lr0 > 0)) throw std::invalid_argument("lr0 must be positive");
  if (lr_halving_period < 1) throw std::invalid_argument("lr_halving_period must be positive");
  if (checkpoint_every < 0) throw std::invalid_argument("checkpoint_every must be >= 0");
  if (log_every < 1) throw std::invalid_argument("log_every must be positive");
}

double lr_at_epoch(const TrainConfig& cfg, int epoch) {
  if (epoch < 0) throw std::invalid_argument("epoch must be >= 0");
  // ldexp keeps the halving exact in floating point.
  return std::ldexp(cfg.lr0, -(epoch / cfg.lr_halving_period));
}

void apply_toy_profile(TrainConfig& cfg) {
  cfg.toy_profile = true;
  cfg.crop_size = 64;
  cfg.batch_size = 8;
  cfg.net.n_levels = 3;
  cfg.net.base_channels = 16;
  cfg.net.dec_channels = 16;
}

nlohmann::json train_config_to_json(const TrainConfig& cfg) {
  return {
      {"batch_size", cfg.batch_size},
      {"crop_size", cfg.crop_size},
      {"epochs", cfg.epochs},
      {"steps_per_epoch", cfg.steps_per_epoch},
      {"lr0", cfg.lr0},
      {"lr_halving_period", cfg.lr_halving_period},
      {"adam_beta1", cfg.adam_beta1},
      {"adam_beta2", cfg.adam_beta2},
      {"objective",
       {{"lambda_reg", cfg.objective.weights.lambda_reg},
        {"lambda_aux", cfg.objective.weights.lambda_aux},
        {"mask_patch", cfg.objective.mask_patch},
        {"eps_s", cfg.objective.eps_s},
        {"eps_v", cfg.objective.eps_v},
        {"sum_reduction_aux", cfg.objective.sum_reduction_aux},
        {"neighbor_only", cfg.objective.neighbor_only}}},
      {"seed", cfg.seed},
      {"mode", to_string(cfg.mode)},
      {"net", net_config_to_json(cfg.net)},
      {"augment_flips", cfg.augment_flips},
      {"toy_profile", cfg.toy_profile},
      {"checkpoint_every", cfg.checkpoint_every},
      {"log_every", cfg.log_every},
      {"deterministic", cfg.deterministic},
  };
}

TrainConfig train_config_from_json(const nlohmann::json& j) {
  TrainConfig cfg;
  cfg.batch_size = j.value("batch_size", cfg.batch_size);
  cfg.crop_size = j.value("crop_size", cfg.crop_size);
  cfg.epochs = j.value("epochs", cfg.epochs);
  cfg.steps_per_epoch = j.value("steps_per_epoch", cfg.steps_per_epoch);
  cfg.lr0 = j.value("lr0", cfg.lr0);
  cfg.lr_halving_period = j.value("lr_halving_period", cfg.lr_halving_period);
  cfg.adam_beta1 = j.value("adam_beta1", cfg.adam_beta1);
  cfg.adam_beta2 = j.value("adam_beta2", cfg.adam_beta2);
  if (j.contains("objective")) {
    const auto& o = j.at("objective");
    cfg.objective.weights.lambda_reg = o.value("lambda_reg", cfg.objective.weights.lambda_reg);
    cfg.objective.weights.lambda_aux = o.value("lambda_aux", cfg.objective.weights.lambda_aux);
    cfg.objective.mask_patch = o.value("mask_patch", cfg.objective.mask_patch);
    cfg.objective.eps_s = o.value("eps_s", cfg.objective.eps_s);
    cfg.objective.eps_v = o.value("eps_v", cfg.objective.eps_v);
    cfg.objective.sum_reduction_aux =
        o.value("sum_reduction_aux", cfg.objective.sum_reduction_aux);
    cfg.objective.neighbor_only = o.value("neighbor_only", cfg.objective.neighbor_only);
  }
  cfg.seed = j.value("seed", cfg.seed);
  if (j.contains("mode")) cfg.mode = train_mode_from_string(j.at("mode").get<std::string>());
  if (j.contains("net")) cfg.net = net_config_from_json(j.at("net"));
  cfg.augment_flips = j.value("augment_flips", cfg.augment_flips);
  cfg.toy_profile = j.value("toy_profile", cfg.toy_profile);
  cfg.checkpoint_every = j.value("checkpoint_every", cfg.checkpoint_every);
  cfg.log_every = j.value("log_every", cfg.log_every);
  cfg.deterministic = j.value("deterministic", cfg.deterministic);
  return cfg;
}

NetworkConfig resolved_net_config(const TrainConfig& cfg, int image_channels) {
  NetworkConfig nc = cfg.net;
  nc.in_channels = image_channels;
  nc.out_channels = image_channels;
  nc.variant = mode_uses_dual_input(cfg.mode) ? NetVariant::DUAL : NetVariant::SINGLE;
  nc.validate();
  return nc;
}

AlignedCrop crop_batch(const Image& blur, const Image& noisy, const Image* clean, int crop_size,
                       std::mt19937_64& rng, bool with_flips) {
  if (!blur.same_shape(noisy)) throw std::invalid_argument("crop_batch: misaligned pair");
  const CropSample cs = draw_crop(blur.height, blur.width, crop_size, rng, with_flips);
  AlignedCrop out;
  out.blur = apply_crop(blur, cs);
  out.noisy = apply_crop(noisy, cs);
  if (clean) {
    if (!clean->same_shape(blur)) throw std::invalid_argument("crop_batch: misaligned clean");
    out.clean = apply_crop(*clean, cs);
  }
  return out;
}

namespace {

// Deleted on clean shutdown; a leftover file marks the directory as owned
// by a run that is live or died mid-write.
struct LockGuard {
  fs::path path;
  explicit LockGuard(const fs::path& run_dir) : path(run_dir / ".lock") {
    if (fs::exists(path))
      throw std::runtime_error("run directory is locked (stale .lock from a crashed run? "
                               "remove it to retry): " +
                               path.string());
    std::ofstream f(path);
    f << "locked\n";
  }
  ~LockGuard() {
    std::error_code ec;
    fs::remove(path, ec);
  }
};

std::string epoch_dir_name(int epoch) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "epoch_%04d", epoch);
  return buf;
}

// A training step's batch, already cropped, tensorized, and planned.
// target is the supervision tensor: the clean crop for the supervised
// baselines, the second noise realization for the noise-to-noise mode.
struct Batch {
  Tensor<float> blur, noisy, target;
  std::vector<SubsamplePlan> plans;
};

Batch assemble_batch(const Dataset& data, const TrainConfig& cfg,
                     const std::vector<int>& sample_ids, int epoch, int base_pos) {
  const bool dual = mode_uses_dual_input(cfg.mode);
  const bool wants_clean = mode_needs_clean(cfg.mode);
  const bool wants_plans =
      cfg.mode == TrainMode::SELFIR || cfg.mode == TrainMode::NEI2NEI_STYLE;

  std::vector<Image> blurs, noisies, targets;
  Batch b;
  for (std::size_t k = 0; k < sample_ids.size(); ++k) {
    const int id = sample_ids[k];
    const long long pos = base_pos + static_cast<long long>(k);
    auto rng = make_rng(cfg.seed, Stream::Crop, static_cast<std::uint64_t>(epoch),
                        static_cast<std::uint64_t>(pos));
    const Image* clean_ptr = wants_clean ? &data.clean(id) : nullptr;
    AlignedCrop ac =
        crop_batch(data.blur(id), data.noisy(id), clean_ptr, cfg.crop_size, rng,
                   cfg.augment_flips);
    if (cfg.mode == TrainMode::N2N_STYLE) {
      // Two fresh noise realizations of the clean crop: one is the input,
      // the other the target.
      auto nrng1 = make_rng(cfg.seed, Stream::NoiseDraw, static_cast<std::uint64_t>(epoch),
                            static_cast<std::uint64_t>(pos), 1);
      auto nrng2 = make_rng(cfg.seed, Stream::NoiseDraw, static_cast<std::uint64_t>(epoch),
                            static_cast<std::uint64_t>(pos), 2);
      const NoiseParams& np = data.record(id).noise;
      noisies.push_back(apply_noise(*ac.clean, np, nrng1, false));
      targets.push_back(apply_noise(*ac.clean, np, nrng2, false));
    } else {
      blurs.push_back(std::move(ac.blur));
      noisies.push_back(std::move(ac.noisy));
      if (wants_clean) targets.push_back(std::move(*ac.clean));
    }
    if (wants_plans) {
      const std::uint64_t plan_seed =
          derive_seed(cfg.seed, Stream::Plan, static_cast<std::uint64_t>(epoch),
                      static_cast<std::uint64_t>(pos));
      b.plans.push_back(
          draw_plan(cfg.crop_size, cfg.crop_size, plan_seed, cfg.objective.neighbor_only));
    }
  }

  auto to_tensor = [](const std::vector<Image>& v) {
    std::vector<const Image*> ptrs;
    ptrs.reserve(v.size());
    for (const Image& im : v) ptrs.push_back(&im);
    return images_to_tensor<float>(ptrs);
  };
  if (!blurs.empty() && (dual || cfg.mode == TrainMode::BASELINE_B ||
                         cfg.mode == TrainMode::DEBLUR_NOISY_SUP))
    b.blur = to_tensor(blurs);
  b.noisy = to_tensor(noisies);
  if (!targets.empty()) b.target = to_tensor(targets);
  return b;
}

// Runs one optimization step's loss + backward for the mode. Supervised
// modes share the plain-l2 path with mode-specific (input, target) wiring.
LossReport step_loss(DualUNet<float>& net, const TrainConfig& cfg, const Batch& b) {
  switch (cfg.mode) {
    case TrainMode::SELFIR:
      return total_loss(net, b.blur, b.noisy, b.plans, cfg.objective, true);
    case TrainMode::NEI2NEI_STYLE:
      return neighbor_loss(net, b.noisy, b.plans, cfg.objective.weights.lambda_reg, true);
    default: break;
  }
  const Tensor<float>* input_a = nullptr;
  const Tensor<float>* input_b = nullptr;
  const Tensor<float>* target = nullptr;
  switch (cfg.mode) {
    case TrainMode::BASELINE_B: input_a = &b.blur; target = &b.target; break;
    case TrainMode::BASELINE_N: input_a = &b.noisy; target = &b.target; break;
    case TrainMode::BASELINE_R: input_a = &b.blur; input_b = &b.noisy; target = &b.target; break;
    case TrainMode::N2N_STYLE: input_a = &b.noisy; target = &b.target; break;
    case TrainMode::DEBLUR_NOISY_SUP: input_a = &b.blur; target = &b.noisy; break;
    default: throw std::logic_error("unhandled train mode");
  }
  typename DualUNet<float>::Cache cache;
  Tensor<float> pred = net.forward(*input_a, input_b ? *input_b : Tensor<float>(), &cache);
  Tensor<float> grad(pred.n, pred.c, pred.h, pred.w);
  LossReport rep;
  rep.rec = loss_supervised(pred, *target, &grad, 1.0);
  rep.total = rep.rec;
  net.backward(cache, grad);
  return rep;
}

}  // namespace

TrainResult train(const TrainConfig& cfg_in, const Dataset& data, const std::string& run_dir,
                  const std::string& resume_from) {
  TrainConfig cfg = cfg_in;
  cfg.validate();
  if (data.size() < 1) throw std::invalid_argument("train: empty dataset");
  {
    const Image& b0 = data.blur(0);
    if (b0.height < cfg.crop_size || b0.width < cfg.crop_size)
      throw std::invalid_argument("train: images smaller than crop_size");
  }
  const int channels = data.blur(0).channels;
  const NetworkConfig nc = resolved_net_config(cfg, channels);
  cfg.net = nc;
  const bool subsampled =
      cfg.mode == TrainMode::SELFIR || cfg.mode == TrainMode::NEI2NEI_STYLE;
  // Sub-sampled crops are half size and still pass through every pooling
  // level, so they set the stricter divisibility bar.
  const int divisor = nc.spatial_divisor() * (subsampled ? 2 : 1);
  if (cfg.crop_size % divisor != 0)
    throw std::invalid_argument("train: crop_size must be divisible by " +
                                std::to_string(divisor) + " for this net/mode");

  fs::create_directories(run_dir);
  fs::create_directories(fs::path(run_dir) / "checkpoints");
  LockGuard lock{fs::path(run_dir)};

  const long long clean_reads_at_entry = data.clean_access_count();

  DualUNet<float> net(nc);
  Adam<float> opt;
  opt.beta1 = cfg.adam_beta1;
  opt.beta2 = cfg.adam_beta2;
  opt.init(net);

  TrainState state;
  state.seed = cfg.seed;
  if (!resume_from.empty()) {
    state = load_checkpoint(resume_from, net, &opt);
    const nlohmann::json meta = checkpoint_meta(resume_from);
    if (meta.contains("train_config") &&
        meta["train_config"] != train_config_to_json(cfg))
      throw std::runtime_error("train: config does not match the resumed checkpoint");
    if (state.seed != cfg.seed)
      throw std::runtime_error("train: seed does not match the resumed checkpoint");
  } else {
    net.init(derive_seed(cfg.seed, Stream::Init));
  }

  // Snapshot before any training so a crashed run is still inspectable.
  nlohmann::json snap = {
      {"format_version", 1},
      {"kind", "train_run"},
      {"config", train_config_to_json(cfg)},
      {"net_config_hash", hex64(net_config_hash(nc))},
      {"data_manifest", data.manifest_path()},
      {"manifest_hash", hex64(data.manifest_hash())},
      {"colorspace", data.space() == ColorSpace::SRGB ? "srgb" : "linear"},
  };
  {
    std::ofstream f(fs::path(run_dir) / "config.json");
    f << snap.dump(2) << "\n";
  }

  const std::string log_path = (fs::path(run_dir) / "train_log.jsonl").string();
  std::ofstream log(log_path, std::ios::app);
  if (!log) throw std::runtime_error("train: cannot open log " + log_path);

  const int n = data.size();
  const int steps_per_epoch =
      cfg.steps_per_epoch > 0 ? cfg.steps_per_epoch : std::max(1, n / cfg.batch_size);

  nlohmann::json ckpt_extra = {
      {"train_config", train_config_to_json(cfg)},
      {"mode", to_string(cfg.mode)},
      {"manifest_hash", hex64(data.manifest_hash())},
      {"colorspace", data.space() == ColorSpace::SRGB ? "srgb" : "linear"},
  };

  TrainResult res;
  res.run_dir = run_dir;
  res.log_path = log_path;
  long long global_step = state.step;

  for (int e = state.epoch; e < cfg.epochs; ++e) {
    const double lr = lr_at_epoch(cfg, e);

    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    auto shuffle_rng = make_rng(cfg.seed, Stream::Shuffle, static_cast<std::uint64_t>(e));
    std::shuffle(order.begin(), order.end(), shuffle_rng);

    for (int s = 0; s < steps_per_epoch; ++s) {
      std::vector<int> ids(cfg.batch_size);
      const int base_pos = s * cfg.batch_size;
      for (int k = 0; k < cfg.batch_size; ++k) ids[k] = order[(base_pos + k) % n];

      Batch batch = assemble_batch(data, cfg, ids, e, base_pos);
      net.zero_grad();
      const LossReport rep = step_loss(net, cfg, batch);
      if (!std::isfinite(rep.total))
        throw std::runtime_error("train: non-finite loss at epoch " + std::to_string(e) +
                                 " step " + std::to_string(global_step) +
                                 " (check the noise/ISP configuration)");
      opt.step(net, lr);
      ++global_step;
      res.total_history.push_back(rep.total);

      const bool last = (e == cfg.epochs - 1) && (s == steps_per_epoch - 1);
      if (s == 0 || global_step % cfg.log_every == 0 || last) {
        nlohmann::json line = {
            {"epoch", e},          {"step", global_step - 1}, {"lr", lr},
            {"rec", rep.rec},      {"reg", rep.reg},          {"aux", rep.aux},
            {"total", rep.total},  {"mask_fill", rep.mask_fill_ratio},
        };
        log << line.dump() << "\n";
        log.flush();
      }
      res.final_total = rep.total;
    }

    if (cfg.checkpoint_every > 0 && (e + 1) % cfg.checkpoint_every == 0 &&
        e + 1 < cfg.epochs) {
      const TrainState st{e + 1, global_step, cfg.seed};
      save_checkpoint((fs::path(run_dir) / "checkpoints" / epoch_dir_name(e + 1)).string(),
                      net, &opt, st, ckpt_extra);
    }
  }

  const TrainState st{cfg.epochs, global_step, cfg.seed};
  const std::string final_dir = (fs::path(run_dir) / "checkpoints" / "final").string();
  save_checkpoint(final_dir, net, &opt, st, ckpt_extra);

  if ((cfg.mode == TrainMode::SELFIR || cfg.mode == TrainMode::NEI2NEI_STYLE) &&
      data.clean_access_count() != clean_reads_at_entry)
    throw std::logic_error("train: self-supervised mode read the clean images");

  res.checkpoint_dir = final_dir;
  res.steps = global_step;
  return res;
}

std::string to_string(AblationSuite s) {
  switch (s) {
    case AblationSuite::SUPERVISION_EQUIV: return "SUPERVISION_EQUIV";
    case AblationSuite::AUX_ON_OFF: return "AUX_ON_OFF";
    case AblationSuite::LAMBDA_REG: return "LAMBDA_REG";
    case AblationSuite::LAMBDA_AUX: return "LAMBDA_AUX";
  }
  throw std::invalid_argument("unknown ablation suite");
}

AblationSuite ablation_suite_from_string(const std::string& s) {
  for (AblationSuite a : {AblationSuite::SUPERVISION_EQUIV, AblationSuite::AUX_ON_OFF,
                          AblationSuite::LAMBDA_REG, AblationSuite::LAMBDA_AUX})
    if (s == to_string(a)) return a;
  throw std::invalid_argument("unknown ablation suite: " + s);
}

namespace {

std::string weight_label(const char* prefix, double v) {
  char buf[48];
  if (v == std::floor(v) && std::abs(v) < 1e6)
    std::snprintf(buf, sizeof(buf), "%s_%d", prefix, static_cast<int>(v));
  else
    std::snprintf(buf, sizeof(buf), "%s_%g", prefix, v);
  return buf;
}

}  // namespace

std::vector<AblationRow> run_ablation(AblationSuite suite, const TrainConfig& base,
                                      const Dataset& train_set, const Dataset& test_set,
                                      const std::string& out_root) {
  std::vector<std::pair<std::string, TrainConfig>> runs;
  switch (suite) {
    case AblationSuite::SUPERVISION_EQUIV: {
      TrainConfig a = base;
      a.mode = TrainMode::BASELINE_B;
      runs.emplace_back("clean_target", a);
      TrainConfig b = base;
      b.mode = TrainMode::DEBLUR_NOISY_SUP;
      runs.emplace_back("noisy_target", b);
      break;
    }
    case AblationSuite::AUX_ON_OFF: {
      TrainConfig a = base;
      a.mode = TrainMode::SELFIR;
      a.objective.weights.lambda_aux = 0;
      runs.emplace_back("without_aux", a);
      TrainConfig b = base;
      b.mode = TrainMode::SELFIR;
      runs.emplace_back("with_aux", b);
      break;
    }
    case AblationSuite::LAMBDA_REG:
      for (double v : {0.0, 1.0, 2.0, 4.0, 8.0}) {
        TrainConfig c = base;
        c.mode = TrainMode::SELFIR;
        c.objective.weights.lambda_reg = v;
        runs.emplace_back(weight_label("lambda_reg", v), c);
      }
      break;
    case AblationSuite::LAMBDA_AUX:
      for (double v : {0.0, 1.0, 2.0, 4.0, 8.0}) {
        TrainConfig c = base;
        c.mode = TrainMode::SELFIR;
        c.objective.weights.lambda_aux = v;
        runs.emplace_back(weight_label("lambda_aux", v), c);
      }
      break;
  }

  fs::create_directories(out_root);
  std::vector<AblationRow> rows;
  for (const auto& [label, cfg] : runs) {
    const std::string run_dir = (fs::path(out_root) / label).string();
    const TrainResult tr = train(cfg, train_set, run_dir);
    const EvalResult er = evaluate_checkpoint(tr.checkpoint_dir, test_set);
    write_eval_report(er, label, (fs::path(run_dir) / "eval_report.json").string());
    rows.push_back({label, er.mean_psnr_out, er.mean_ssim_out, run_dir});
  }

  nlohmann::json jrows = nlohmann::json::array();
  for (const auto& r : rows)
    jrows.push_back(
        {{"label", r.label}, {"psnr", r.psnr}, {"ssim", r.ssim}, {"run_dir", r.run_dir}});
  nlohmann::json table = {{"format_version", 1},
                          {"suite", to_string(suite)},
                          {"manifest_hash", hex64(test_set.manifest_hash())},
                          {"rows", jrows}};
  {
    std::ofstream f(fs::path(out_root) / "table.json");
    f << table.dump(2) << "\n";
  }
  {
    std::ofstream f(fs::path(out_root) / "table.csv");
    f << "label,psnr,ssim,run_dir\n";
    char buf[64];
    for (const auto& r : rows) {
      std::snprintf(buf, sizeof(buf), "%.4f,%.4f", r.psnr, r.ssim);
      f << r.label << "," << buf << "," << r.run_dir << "\n";
    }
  }
  return rows;
}

}  // namespace selfir
