#include "selfir/config_file.hpp"

#include <cctype>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace selfir {

namespace {

std::string trim(const std::string& s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

// Cuts an unquoted # comment.
std::string strip_comment(const std::string& line) {
  bool in_quote = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '"') in_quote = !in_quote;
    if (line[i] == '#' && !in_quote) return line.substr(0, i);
  }
  return line;
}

std::vector<std::string> split_dotted(const std::string& key) {
  std::vector<std::string> parts;
  std::string cur;
  for (char c : key) {
    if (c == '.') {
      if (cur.empty()) throw std::invalid_argument("empty key segment in: " + key);
      parts.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (cur.empty()) throw std::invalid_argument("empty key segment in: " + key);
  parts.push_back(cur);
  return parts;
}

nlohmann::json parse_value(const std::string& text);

nlohmann::json parse_array(const std::string& text) {
  nlohmann::json arr = nlohmann::json::array();
  std::string body = trim(text.substr(1, text.size() - 2));
  if (body.empty()) return arr;
  std::string cur;
  bool in_quote = false;
  int depth = 0;
  for (char c : body) {
    if (c == '"') in_quote = !in_quote;
    if (!in_quote) {
      if (c == '[') ++depth;
      if (c == ']') --depth;
      if (c == ',' && depth == 0) {
        arr.push_back(parse_value(trim(cur)));
        cur.clear();
        continue;
      }
    }
    cur += c;
  }
  arr.push_back(parse_value(trim(cur)));
  return arr;
}

nlohmann::json parse_value(const std::string& text) {
  if (text.size() >= 2 && text.front() == '[' && text.back() == ']') return parse_array(text);
  return parse_scalar(text);
}

void assign_dotted(nlohmann::json& cfg, const std::vector<std::string>& path,
                   nlohmann::json value) {
  nlohmann::json* node = &cfg;
  for (std::size_t i = 0; i + 1 < path.size(); ++i) {
    if (!node->contains(path[i])) (*node)[path[i]] = nlohmann::json::object();
    node = &(*node)[path[i]];
    if (!node->is_object())
      throw std::invalid_argument("key path crosses a non-table value: " + path[i]);
  }
  (*node)[path.back()] = std::move(value);
}

}  // namespace

nlohmann::json parse_scalar(const std::string& text) {
  const std::string t = trim(text);
  if (t.empty()) return "";
  if (t == "true") return true;
  if (t == "false") return false;
  if (t.size() >= 2 && t.front() == '"' && t.back() == '"') return t.substr(1, t.size() - 2);
  char* end = nullptr;
  const long long as_int = std::strtoll(t.c_str(), &end, 10);
  if (end && *end == '\0') return as_int;
  end = nullptr;
  const double as_dbl = std::strtod(t.c_str(), &end);
  if (end && *end == '\0') return as_dbl;
  return t;
}

nlohmann::json load_config_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open config: " + path);
  if (path.size() >= 5 && path.substr(path.size() - 5) == ".json") {
    nlohmann::json j;
    f >> j;
    if (!j.is_object()) throw std::runtime_error("config root must be a table: " + path);
    return j;
  }
  nlohmann::json cfg = nlohmann::json::object();
  std::vector<std::string> prefix;
  std::string raw;
  int lineno = 0;
  while (std::getline(f, raw)) {
    ++lineno;
    const std::string line = trim(strip_comment(raw));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw std::runtime_error(path + ":" + std::to_string(lineno) + ": malformed header");
      prefix = split_dotted(trim(line.substr(1, line.size() - 2)));
      continue;
    }
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": expected key = value");
    std::vector<std::string> path_parts = prefix;
    for (const std::string& p : split_dotted(trim(line.substr(0, eq))))
      path_parts.push_back(p);
    assign_dotted(cfg, path_parts, parse_value(trim(line.substr(eq + 1))));
  }
  return cfg;
}

void apply_override(nlohmann::json& cfg, const std::string& assignment) {
  const std::size_t eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0)
    throw std::invalid_argument("override must look like key.path=value: " + assignment);
  assign_dotted(cfg, split_dotted(trim(assignment.substr(0, eq))),
                parse_value(trim(assignment.substr(eq + 1))));
}

}  // namespace selfir
