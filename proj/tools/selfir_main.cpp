#include <cctype>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "selfir/config_file.hpp"
#include "selfir/dataset.hpp"
#include "selfir/evaluate.hpp"
#include "selfir/image_io.hpp"
#include "selfir/sharp_mask.hpp"
#include "selfir/train.hpp"

namespace fs = std::filesystem;
using namespace selfir;

namespace {

std::string canon_enum(std::string s) {
  for (char& c : s) {
    c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    if (c == '-') c = '_';
  }
  return s;
}

ColorSpace parse_space(const std::string& s) {
  const std::string c = canon_enum(s);
  if (c == "SRGB") return ColorSpace::SRGB;
  if (c == "LINEAR") return ColorSpace::LINEAR;
  throw std::invalid_argument("unknown colorspace: " + s);
}

// Last-resort seed override; explicit config/flag seeds win.
std::optional<std::uint64_t> env_seed() {
  const char* s = std::getenv("SELFIR_SEED");
  if (!s || !*s) return std::nullopt;
  char* end = nullptr;
  const unsigned long long v = std::strtoull(s, &end, 10);
  if (!end || *end != '\0') throw std::invalid_argument("SELFIR_SEED must be an integer");
  return v;
}

struct SynthArgs {
  SynthConfig cfg;
  std::string out;
  std::vector<int> size;
  std::vector<int> objects;
  std::vector<double> sigma_range, lambda_range;
  std::string space = "srgb";
  double nb_std_255 = 0.0;
  bool seed_set = false;
};

struct TrainArgs {
  std::string data, out, config_path, resume, mode;
  std::vector<std::string> overrides;
  bool toy = false;
  bool full = false;  // ablate only
  std::uint64_t seed = 0;
  bool seed_set = false;
  int epochs = 0, steps = -1, batch = 0, crop = 0;
  double lr0 = 0;
  std::string suite;     // ablate only
  std::string test_data;  // ablate only
};

struct EvalArgs {
  std::string ckpt, data, out, run_id;
};

struct CompareArgs {
  std::vector<std::string> reports;
  std::string out_csv, out_md;
};

struct MaskArgs {
  std::string blur, ref, out;
  int patch = 16;
  double eps_s = 0.99, eps_v = 1e-5;
  std::string space = "srgb";
};

int run_synth(SynthArgs& a) {
  if (a.size.size() == 2) {
    a.cfg.height = a.size[0];
    a.cfg.width = a.size[1];
  }
  if (a.objects.size() == 2) {
    a.cfg.min_objects = a.objects[0];
    a.cfg.max_objects = a.objects[1];
  }
  if (a.sigma_range.size() == 2) {
    a.cfg.sigma_lo = a.sigma_range[0] / 255.0;
    a.cfg.sigma_hi = a.sigma_range[1] / 255.0;
  }
  if (a.lambda_range.size() == 2) {
    a.cfg.lambda_lo = a.lambda_range[0];
    a.cfg.lambda_hi = a.lambda_range[1];
  }
  a.cfg.space = parse_space(a.space);
  a.cfg.nb_std = a.nb_std_255 / 255.0;
  if (!a.seed_set)
    if (auto s = env_seed()) a.cfg.seed = *s;
  const std::string manifest = synth_dataset(a.cfg, a.out);
  std::cout << manifest << "\n";
  return 0;
}

// An option a subcommand does not define counts as "not passed"; ablate
// omits the flags its suites control (mode, batch, crop, lr0).
std::size_t opt_count(const CLI::App* sub, const std::string& name) {
  const CLI::Option* o = sub->get_option_no_throw(name);
  return o ? o->count() : 0;
}

// defaults <- toy profile <- config file <- --set overrides <- typed flags;
// the resolved result is what train() snapshots. The profile is a JSON layer
// so partial [net]/[objective] sections from the user merge per-key over it.
TrainConfig resolve_train_config(const TrainArgs& a, const CLI::App* sub, bool force_toy,
                                 bool* user_set_lambda_reg) {
  nlohmann::json user = nlohmann::json::object();
  if (!a.config_path.empty()) user = load_config_file(a.config_path);
  for (const std::string& ov : a.overrides) apply_override(user, ov);
  if (user_set_lambda_reg)
    *user_set_lambda_reg =
        user.contains("objective") && user["objective"].contains("lambda_reg");
  nlohmann::json j = nlohmann::json::object();
  if (a.toy || force_toy) {
    TrainConfig toy;
    apply_toy_profile(toy);
    j = train_config_to_json(toy);
  }
  j.merge_patch(user);
  TrainConfig cfg = train_config_from_json(j);
  if (opt_count(sub, "--mode")) cfg.mode = train_mode_from_string(canon_enum(a.mode));
  if (opt_count(sub, "--epochs")) cfg.epochs = a.epochs;
  if (opt_count(sub, "--steps-per-epoch")) cfg.steps_per_epoch = a.steps;
  if (opt_count(sub, "--batch")) cfg.batch_size = a.batch;
  if (opt_count(sub, "--crop")) cfg.crop_size = a.crop;
  if (opt_count(sub, "--lr0")) cfg.lr0 = a.lr0;
  if (a.seed_set)
    cfg.seed = a.seed;
  else if (!user.contains("seed"))
    if (auto s = env_seed()) cfg.seed = *s;
  return cfg;
}

// The paper-matched regularizer weight differs per track; only apply the
// track default when the user did not pin it.
void default_lambda_reg(TrainConfig& cfg, const Dataset& data, bool user_set) {
  if (!user_set && data.space() == ColorSpace::LINEAR)
    cfg.objective.weights.lambda_reg = 4.0;
}

int run_train(TrainArgs& a, const CLI::App* sub) {
  bool user_lambda = false;
  TrainConfig cfg = resolve_train_config(a, sub, false, &user_lambda);
  const Dataset data = Dataset::load(a.data);
  default_lambda_reg(cfg, data, user_lambda);
  const TrainResult res = train(cfg, data, a.out, a.resume);
  std::cout << "trained " << res.steps << " steps\n"
            << "checkpoint: " << res.checkpoint_dir << "\n"
            << "log: " << res.log_path << "\n";
  return 0;
}

int run_eval(EvalArgs& a) {
  const Dataset data = Dataset::load(a.data);
  const EvalResult res = evaluate_checkpoint(a.ckpt, data);
  std::string run_id = a.run_id;
  if (run_id.empty()) {
    // runs/<name>/checkpoints/final -> <name>
    const fs::path p = fs::absolute(a.ckpt);
    run_id = p.parent_path().has_parent_path()
                 ? p.parent_path().parent_path().filename().string()
                 : std::string();
    if (run_id.empty()) run_id = "run";
  }
  const nlohmann::json rep = eval_report_json(res, run_id);
  if (!a.out.empty()) {
    write_eval_report(res, run_id, a.out);
    std::cout << a.out << "\n";
  } else {
    std::cout << rep.dump(2) << "\n";
  }
  char line[160];
  std::snprintf(line, sizeof(line),
                "%s: PSNR %.2f dB, SSIM %.4f over %d images (noisy input: %.2f dB)",
                run_id.c_str(), res.mean_psnr_out, res.mean_ssim_out,
                static_cast<int>(res.rows.size()), res.mean_psnr_noisy);
  std::cout << line << "\n";
  return 0;
}

int run_compare(CompareArgs& a) {
  const CompareTable table = compare_runs(a.reports);
  if (!a.out_csv.empty()) {
    std::ofstream f(a.out_csv);
    if (!f) throw std::runtime_error("cannot write " + a.out_csv);
    f << table.csv;
  }
  if (!a.out_md.empty()) {
    std::ofstream f(a.out_md);
    if (!f) throw std::runtime_error("cannot write " + a.out_md);
    f << table.markdown;
  }
  std::cout << table.markdown;
  return 0;
}

int run_mask_debug(MaskArgs& a) {
  const ColorSpace cs = parse_space(a.space);
  const Image blur = load_image(a.blur, cs);
  const Image ref = load_image(a.ref, cs);
  const SharpMask mask = sharp_mask(blur, ref, a.patch, a.eps_s, a.eps_v);
  if (!a.out.empty()) save_image(mask_overlay(blur, mask), a.out);
  char line[128];
  std::snprintf(line, sizeof(line), "grid %dx%d, fill ratio %.4f", mask.grid.n_rows,
                mask.grid.n_cols, mask.fill_ratio());
  std::cout << line << "\n";
  return 0;
}

int run_ablate(TrainArgs& a, const CLI::App* sub) {
  bool user_lambda = false;
  TrainConfig base = resolve_train_config(a, sub, !a.full, &user_lambda);
  const Dataset train_set = Dataset::load(a.data);
  const Dataset test_set = Dataset::load(a.test_data);
  default_lambda_reg(base, train_set, user_lambda);
  const AblationSuite suite = ablation_suite_from_string(canon_enum(a.suite));
  fs::create_directories(a.out);
  {
    nlohmann::json snap = {{"format_version", 1},
                           {"kind", "ablation"},
                           {"suite", to_string(suite)},
                           {"config", train_config_to_json(base)},
                           {"train_manifest", train_set.manifest_path()},
                           {"test_manifest", test_set.manifest_path()}};
    std::ofstream f(fs::path(a.out) / "ablation_config.json");
    f << snap.dump(2) << "\n";
  }
  const std::vector<AblationRow> rows = run_ablation(suite, base, train_set, test_set, a.out);
  char line[192];
  for (const AblationRow& r : rows) {
    std::snprintf(line, sizeof(line), "%-16s PSNR %.2f dB  SSIM %.4f", r.label.c_str(),
                  r.psnr, r.ssim);
    std::cout << line << "\n";
  }
  std::cout << (fs::path(a.out) / "table.json").string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"selfir: self-supervised restoration from blurry/noisy pairs"};
  app.require_subcommand(1);

  SynthArgs synth;
  CLI::App* s_synth = app.add_subcommand("synth", "render a synthetic paired dataset");
  s_synth->add_option("--out", synth.out, "output dataset directory")->required();
  s_synth->add_option("--scenes", synth.cfg.n_scenes, "number of scenes");
  s_synth->add_option("--size", synth.size, "canvas height width")->expected(2);
  s_synth->add_option("--frames", synth.cfg.n_frames, "burst frames per blurry image");
  s_synth->add_option("--objects", synth.objects, "min max moving objects")->expected(2);
  s_synth->add_option("--noise", synth.cfg.noise_model, "gaussian | poisson | sensor");
  s_synth->add_option("--sigma-range", synth.sigma_range, "gaussian sigma range, /255 units")
      ->expected(2);
  s_synth->add_option("--lambda-range", synth.lambda_range, "poisson scale range")->expected(2);
  s_synth->add_option("--space", synth.space, "srgb | linear");
  s_synth->add_option("--nb-std", synth.nb_std_255, "blurry-image noise std, /255 units");
  s_synth->add_option("--seed", synth.cfg.seed, "dataset seed")
      ->each([&](const std::string&) { synth.seed_set = true; });

  TrainArgs train_a;
  CLI::App* s_train = app.add_subcommand("train", "train one restoration model");
  s_train->add_option("--data", train_a.data, "dataset manifest.json")->required();
  s_train->add_option("--out", train_a.out, "run directory")->required();
  s_train->add_option("--config", train_a.config_path, "TOML/JSON config file");
  s_train->add_option("--set", train_a.overrides, "config override key.path=value");
  s_train->add_option("--mode", train_a.mode, "selfir | baseline_b | baseline_n | baseline_r | "
                                              "n2n_style | nei2nei_style | deblur_noisy_sup");
  s_train->add_flag("--toy", train_a.toy, "desk-scale profile");
  s_train->add_option("--resume", train_a.resume, "checkpoint directory to resume from");
  s_train->add_option("--seed", train_a.seed, "run seed")
      ->each([&](const std::string&) { train_a.seed_set = true; });
  s_train->add_option("--epochs", train_a.epochs, "epoch count");
  s_train->add_option("--steps-per-epoch", train_a.steps, "steps per epoch (0: one data pass)");
  s_train->add_option("--batch", train_a.batch, "batch size");
  s_train->add_option("--crop", train_a.crop, "training crop size");
  s_train->add_option("--lr0", train_a.lr0, "initial learning rate");

  EvalArgs eval_a;
  CLI::App* s_eval = app.add_subcommand("eval", "evaluate a checkpoint on a test set");
  s_eval->add_option("--ckpt", eval_a.ckpt, "checkpoint directory")->required();
  s_eval->add_option("--data", eval_a.data, "test manifest.json")->required();
  s_eval->add_option("--out", eval_a.out, "report path (default: print to stdout)");
  s_eval->add_option("--run-id", eval_a.run_id, "identifier used in comparisons");

  CompareArgs cmp;
  CLI::App* s_cmp = app.add_subcommand("compare", "rank eval reports over one test set");
  s_cmp->add_option("reports", cmp.reports, "eval report JSON files")->required();
  s_cmp->add_option("--out-csv", cmp.out_csv, "write the table as CSV");
  s_cmp->add_option("--out-md", cmp.out_md, "write the table as markdown");

  MaskArgs mask;
  CLI::App* s_mask = app.add_subcommand("mask-debug", "visualize the sharpness mask");
  s_mask->add_option("--blur", mask.blur, "blurry image")->required();
  s_mask->add_option("--ref", mask.ref, "reference image")->required();
  s_mask->add_option("--out", mask.out, "overlay PNG path");
  s_mask->add_option("--patch", mask.patch, "patch size");
  s_mask->add_option("--eps-s", mask.eps_s, "similarity threshold");
  s_mask->add_option("--eps-v", mask.eps_v, "variance-excess threshold");
  s_mask->add_option("--space", mask.space, "srgb | linear");

  TrainArgs abl;
  CLI::App* s_abl = app.add_subcommand("ablate", "paired ablation runs with a summary table");
  s_abl->add_option("--suite", abl.suite,
                    "supervision_equiv | aux_on_off | lambda_reg | lambda_aux")
      ->required();
  s_abl->add_option("--data", abl.data, "training manifest.json")->required();
  s_abl->add_option("--test-data", abl.test_data, "held-out manifest.json")->required();
  s_abl->add_option("--out", abl.out, "output root directory")->required();
  s_abl->add_option("--config", abl.config_path, "TOML/JSON config file");
  s_abl->add_option("--set", abl.overrides, "config override key.path=value");
  s_abl->add_flag("--full", abl.full, "skip the toy profile (long runs)");
  s_abl->add_option("--seed", abl.seed, "run seed")
      ->each([&](const std::string&) { abl.seed_set = true; });
  s_abl->add_option("--epochs", abl.epochs, "epoch count");
  s_abl->add_option("--steps-per-epoch", abl.steps, "steps per epoch (0: one data pass)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n\n" << app.help() << std::flush;
    return 2;
  }

  try {
    if (app.got_subcommand(s_synth)) return run_synth(synth);
    if (app.got_subcommand(s_train)) return run_train(train_a, s_train);
    if (app.got_subcommand(s_eval)) return run_eval(eval_a);
    if (app.got_subcommand(s_cmp)) return run_compare(cmp);
    if (app.got_subcommand(s_mask)) return run_mask_debug(mask);
    if (app.got_subcommand(s_abl)) return run_ablate(abl, s_abl);
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  std::cerr << app.help() << std::flush;
  return 2;
}
