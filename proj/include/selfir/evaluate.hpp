#pragma once

#include <functional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "selfir/dataset.hpp"
#include "selfir/train.hpp"

namespace selfir {

struct EvalRow {
  int id = 0;
  double psnr = 0, ssim = 0;              // restored output vs clean
  double psnr_blur = 0, ssim_blur = 0;    // blurry input vs clean
  double psnr_noisy = 0, ssim_noisy = 0;  // noisy input vs clean
};

struct EvalResult {
  std::vector<EvalRow> rows;
  double mean_psnr_out = 0, mean_ssim_out = 0;
  double mean_psnr_blur = 0, mean_ssim_blur = 0;
  double mean_psnr_noisy = 0, mean_ssim_noisy = 0;
  std::string mode;  // producer label (train mode or stub name)
  std::uint64_t manifest_hash = 0;
  std::string net_config_hash_hex;  // empty for stub restorers
  std::string colorspace;
};

// Produces the full-resolution restored image for one test pair.
using Restorer =
    std::function<Image(const DataRecord&, const Image& blur, const Image& noisy)>;

// Runs the restorer over the whole set and scores it against the clean
// references. Metrics are always computed in sRGB: linear-track images
// (outputs and references alike) go through the record's ISP first.
// Values are compared unclamped, so a pass-through of zero-mean noise
// scores exactly its analytic PSNR.
EvalResult evaluate_set(const Dataset& data, const Restorer& restore,
                        const std::string& mode_label);

// Rebuilds the net from the checkpoint and evaluates it; the stored mode
// decides which inputs feed which branch. Full images are replicate-padded
// to the net's divisibility requirement and cropped back afterwards.
EvalResult evaluate_checkpoint(const std::string& checkpoint_dir, const Dataset& data);

nlohmann::json eval_report_json(const EvalResult& r, const std::string& run_id);
void write_eval_report(const EvalResult& r, const std::string& run_id,
                       const std::string& path);

struct CompareRow {
  std::string run_id, mode;
  double psnr = 0, ssim = 0;
};

struct CompareTable {
  std::vector<CompareRow> rows;  // PSNR descending; ties broken by run_id
  std::string csv, markdown;
};

// Ranks saved eval reports. All reports must cover the same manifest
// (hash-checked); comparing across different test sets is refused.
CompareTable compare_runs(const std::vector<std::string>& report_paths);

}  // namespace selfir
