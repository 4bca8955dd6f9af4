#pragma once

#include <optional>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "selfir/checkpoint.hpp"
#include "selfir/dataset.hpp"
#include "selfir/losses.hpp"
#include "selfir/net.hpp"

namespace selfir {

// What supervises the network:
//   SELFIR           dual input, sub-sampled noisy target + frozen-pass
//                    regularizer + masked blurry auxiliary (no clean data)
//   BASELINE_B       blurry -> clean, supervised deblurring
//   BASELINE_N       noisy -> clean, supervised denoising
//   BASELINE_R       (blurry, noisy) -> clean, supervised restoration
//   N2N_STYLE        noisy realization -> second noisy realization
//   NEI2NEI_STYLE    single-input sub-sampled self-supervision on noisy
//   DEBLUR_NOISY_SUP blurry -> noisy, the supervision-equivalence run
enum class TrainMode {
  SELFIR,
  BASELINE_B,
  BASELINE_N,
  BASELINE_R,
  N2N_STYLE,
  NEI2NEI_STYLE,
  DEBLUR_NOISY_SUP,
};

std::string to_string(TrainMode m);
TrainMode train_mode_from_string(const std::string& s);
bool mode_uses_dual_input(TrainMode m);
bool mode_needs_clean(TrainMode m);

struct TrainConfig {
  int batch_size = 16;
  int crop_size = 128;  // must be divisible by 4
  int epochs = 200;
  int steps_per_epoch = 0;  // 0: one pass over the dataset per epoch
  double lr0 = 3e-4;
  int lr_halving_period = 50;  // epochs per halving
  double adam_beta1 = 0.9, adam_beta2 = 0.999;
  ObjectiveConfig objective;
  std::uint64_t seed = 1;
  TrainMode mode = TrainMode::SELFIR;
  NetworkConfig net;  // variant/channels are overridden per mode and data
  bool augment_flips = true;
  bool toy_profile = false;
  int checkpoint_every = 0;  // epochs between checkpoints; 0 = final only
  int log_every = 10;        // steps between JSONL log lines
  bool deterministic = true;

  void validate() const;
};

// Learning rate halves every lr_halving_period epochs, exactly.
double lr_at_epoch(const TrainConfig& cfg, int epoch);

// Desk-scale profile: 64x64 crops, batch 8, 16-channel 3-level net.
void apply_toy_profile(TrainConfig& cfg);

nlohmann::json train_config_to_json(const TrainConfig& cfg);
TrainConfig train_config_from_json(const nlohmann::json& j);

// Network config with the variant and channel counts the mode and data
// demand.
NetworkConfig resolved_net_config(const TrainConfig& cfg, int image_channels);

// One aligned training sample: the same window and flips applied to the
// blurry and noisy images (and the clean one when a mode needs it).
struct AlignedCrop {
  Image blur, noisy;
  std::optional<Image> clean;
};

AlignedCrop crop_batch(const Image& blur, const Image& noisy, const Image* clean, int crop_size,
                       std::mt19937_64& rng, bool with_flips = true);

struct TrainResult {
  std::string run_dir;
  std::string checkpoint_dir;  // the final checkpoint
  std::string log_path;
  long long steps = 0;
  double final_total = 0;
  std::vector<double> total_history;  // per step of this invocation
};

// Runs the configured training loop on the dataset, writing into run_dir:
// config.json (resolved config snapshot, written first), train_log.jsonl,
// checkpoints/. resume_from continues from a saved checkpoint and
// reproduces the uninterrupted trajectory exactly (all randomness is
// derived from (seed, epoch, sample), never from loop history).
TrainResult train(const TrainConfig& cfg, const Dataset& data, const std::string& run_dir,
                  const std::string& resume_from = "");

// Paired-run experiment suites mirroring the paper's ablation tables at
// desk scale.
enum class AblationSuite { SUPERVISION_EQUIV, AUX_ON_OFF, LAMBDA_REG, LAMBDA_AUX };

std::string to_string(AblationSuite s);
AblationSuite ablation_suite_from_string(const std::string& s);

struct AblationRow {
  std::string label;
  double psnr = 0;
  double ssim = 0;
  std::string run_dir;
};

// Trains every row of the suite, evaluates each on the test set, writes
// table.json/table.csv under out_root and returns the rows.
std::vector<AblationRow> run_ablation(AblationSuite suite, const TrainConfig& base,
                                      const Dataset& train_set, const Dataset& test_set,
                                      const std::string& out_root);

}  // namespace selfir
