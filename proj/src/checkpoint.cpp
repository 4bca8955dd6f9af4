#include "selfir/checkpoint.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "selfir/image_io.hpp"
#include "selfir/rng.hpp"

namespace fs = std::filesystem;

namespace selfir {

std::string to_string(NetVariant v) { return v == NetVariant::DUAL ? "dual" : "single"; }

NetVariant net_variant_from_string(const std::string& s) {
  if (s == "dual") return NetVariant::DUAL;
  if (s == "single") return NetVariant::SINGLE;
  throw std::runtime_error("unknown network variant: " + s);
}

nlohmann::json net_config_to_json(const NetworkConfig& cfg) {
  return nlohmann::json{{"n_levels", cfg.n_levels},
                        {"base_channels", cfg.base_channels},
                        {"in_channels", cfg.in_channels},
                        {"out_channels", cfg.out_channels},
                        {"dec_channels", cfg.dec_channels},
                        {"variant", to_string(cfg.variant)},
                        {"residual", cfg.residual}};
}

NetworkConfig net_config_from_json(const nlohmann::json& j) {
  NetworkConfig cfg;
  cfg.n_levels = j.value("n_levels", cfg.n_levels);
  cfg.base_channels = j.value("base_channels", cfg.base_channels);
  cfg.in_channels = j.value("in_channels", cfg.in_channels);
  cfg.out_channels = j.value("out_channels", cfg.out_channels);
  cfg.dec_channels = j.value("dec_channels", cfg.dec_channels);
  if (j.contains("variant"))
    cfg.variant = net_variant_from_string(j.at("variant").get<std::string>());
  cfg.residual = j.value("residual", cfg.residual);
  return cfg;
}

std::uint64_t net_config_hash(const NetworkConfig& cfg) {
  // nlohmann dumps object keys sorted, so the digest is layout-stable.
  const std::string s = net_config_to_json(cfg).dump();
  return fnv1a64(s.data(), s.size());
}

namespace {

std::string param_file(int idx, const std::string& name) {
  char buf[8];
  std::snprintf(buf, sizeof buf, "%03d_", idx);
  return buf + name + ".sirt";
}

void write_json(const fs::path& path, const nlohmann::json& j) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

nlohmann::json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return nlohmann::json::parse(in);
}

}  // namespace

void save_checkpoint(const std::string& dir, const DualUNet<float>& net,
                     const Adam<float>* opt, const TrainState& state,
                     const nlohmann::json& extra) {
  fs::create_directories(fs::path(dir) / "params");
  if (opt) fs::create_directories(fs::path(dir) / "adam");

  const auto& ps = net.params();
  nlohmann::json names = nlohmann::json::array();
  for (int i = 0; i < static_cast<int>(ps.size()); ++i) {
    names.push_back(ps[i].name);
    const auto& p = ps[i];
    save_sirt(p.w.data(),
              {static_cast<std::uint32_t>(p.out_c), static_cast<std::uint32_t>(p.in_c), 3, 3},
              (fs::path(dir) / "params" / param_file(i, p.name + ".w")).string());
    save_sirt(p.b.data(), {static_cast<std::uint32_t>(p.out_c)},
              (fs::path(dir) / "params" / param_file(i, p.name + ".b")).string());
    if (opt) {
      auto moment = [&](const std::vector<float>& v, const std::string& suffix,
                        std::vector<std::uint32_t> dims) {
        save_sirt(v.data(), dims,
                  (fs::path(dir) / "adam" / param_file(i, p.name + suffix)).string());
      };
      std::vector<std::uint32_t> wd{static_cast<std::uint32_t>(p.out_c),
                                    static_cast<std::uint32_t>(p.in_c), 3, 3};
      std::vector<std::uint32_t> bd{static_cast<std::uint32_t>(p.out_c)};
      moment(opt->mw[i], ".w.m", wd);
      moment(opt->vw[i], ".w.v", wd);
      moment(opt->mb[i], ".b.m", bd);
      moment(opt->vb[i], ".b.v", bd);
    }
  }

  nlohmann::json meta{{"format_version", 1},
                      {"config", net_config_to_json(net.config())},
                      {"config_hash", hex64(net_config_hash(net.config()))},
                      {"epoch", state.epoch},
                      {"step", state.step},
                      {"seed", state.seed},
                      {"param_names", names},
                      {"adam_t", opt ? nlohmann::json(opt->t) : nlohmann::json()}};
  for (auto it = extra.begin(); it != extra.end(); ++it) meta[it.key()] = it.value();
  write_json(fs::path(dir) / "meta.json", meta);
}

nlohmann::json checkpoint_meta(const std::string& dir) {
  return read_json(fs::path(dir) / "meta.json");
}

NetworkConfig checkpoint_config(const std::string& dir) {
  return net_config_from_json(checkpoint_meta(dir).at("config"));
}

TrainState load_checkpoint(const std::string& dir, DualUNet<float>& net, Adam<float>* opt,
                           bool force) {
  nlohmann::json meta = checkpoint_meta(dir);
  if (meta.at("format_version").get<int>() != 1)
    throw std::runtime_error("unsupported checkpoint format in " + dir);
  const std::string stored_hash = meta.at("config_hash").get<std::string>();
  const std::string net_hash = hex64(net_config_hash(net.config()));
  if (stored_hash != net_hash && !force)
    throw std::runtime_error("checkpoint config hash " + stored_hash +
                             " does not match network config " + net_hash +
                             " (pass force to override)");

  auto& ps = net.params();
  auto load_into = [&](std::vector<float>& v, const fs::path& path) {
    std::vector<std::uint32_t> dims;
    std::vector<float> data = load_sirt(path.string(), dims);
    if (data.size() != v.size())
      throw std::runtime_error("parameter size mismatch in " + path.string());
    v = std::move(data);
  };
  for (int i = 0; i < static_cast<int>(ps.size()); ++i) {
    auto& p = ps[i];
    load_into(p.w, fs::path(dir) / "params" / param_file(i, p.name + ".w"));
    load_into(p.b, fs::path(dir) / "params" / param_file(i, p.name + ".b"));
  }
  if (opt) {
    opt->init(net);
    if (!meta.at("adam_t").is_null() && fs::exists(fs::path(dir) / "adam")) {
      opt->t = meta.at("adam_t").get<long long>();
      for (int i = 0; i < static_cast<int>(ps.size()); ++i) {
        const auto& p = ps[i];
        load_into(opt->mw[i], fs::path(dir) / "adam" / param_file(i, p.name + ".w.m"));
        load_into(opt->vw[i], fs::path(dir) / "adam" / param_file(i, p.name + ".w.v"));
        load_into(opt->mb[i], fs::path(dir) / "adam" / param_file(i, p.name + ".b.m"));
        load_into(opt->vb[i], fs::path(dir) / "adam" / param_file(i, p.name + ".b.v"));
      }
    }
  }
  TrainState st;
  st.epoch = meta.at("epoch").get<int>();
  st.step = meta.at("step").get<long long>();
  st.seed = meta.at("seed").get<std::uint64_t>();
  return st;
}

}  // namespace selfir
