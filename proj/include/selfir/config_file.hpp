#pragma once

#include <string>

#include <nlohmann/json.hpp>

namespace selfir {

// Loads a run config as JSON. `.json` files parse natively; anything else
// is read as a TOML-style document: `[section]` headers, `key = value`
// lines, `#` comments, with bool/int/float/string/array values.
nlohmann::json load_config_file(const std::string& path);

// Applies one `a.b.c=value` command-line override, creating intermediate
// objects as needed.
void apply_override(nlohmann::json& cfg, const std::string& assignment);

// bool/int/double when the text parses fully as one; string otherwise
// (surrounding quotes stripped).
nlohmann::json parse_scalar(const std::string& text);

}  // namespace selfir
