#pragma once

#include <string>

#include <nlohmann/json.hpp>

#include "selfir/adam.hpp"
#include "selfir/net.hpp"

namespace selfir {

// Counters that, together with the run seed, fully determine every random
// draw in the run (all generators are derived per (seed, stream, step)),
// so resuming needs no serialized generator state.
struct TrainState {
  int epoch = 0;
  long long step = 0;
  std::uint64_t seed = 0;
};

// Checkpoint layout: <dir>/meta.json plus one binary tensor file per
// parameter under <dir>/params/ and optional Adam moments under
// <dir>/adam/. meta.json records the format version, the network config
// and its hash, the train-state counters, and the parameter name list.
void save_checkpoint(const std::string& dir, const DualUNet<float>& net,
                     const Adam<float>* opt, const TrainState& state,
                     const nlohmann::json& extra = nlohmann::json::object());

// Reads just the config back (to build a matching net before loading).
NetworkConfig checkpoint_config(const std::string& dir);

nlohmann::json checkpoint_meta(const std::string& dir);

// Loads parameters (and Adam moments when opt is non-null and the
// checkpoint has them) into net. The stored config hash must match the
// net's config unless force is set.
TrainState load_checkpoint(const std::string& dir, DualUNet<float>& net, Adam<float>* opt,
                           bool force = false);

}  // namespace selfir
