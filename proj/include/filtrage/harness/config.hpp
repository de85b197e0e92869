#pragma once

#include <cctype>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>

namespace filtrage::harness {

// Bad config file, unknown experiment, malformed value. The CLI maps this to
// exit code 2; anything else escaping an experiment maps to 3.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Flat key=value file. '#' starts a comment, blank lines are skipped, later
// duplicates win. Keys may be prefixed "experiment." to override a setting
// for one experiment only; scoped() resolves that layering.
class Config {
 public:
  Config() = default;

  static Config from_string(const std::string& text, const std::string& origin = "<string>") {
    Config cfg;
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      auto hash = line.find('#');
      if (hash != std::string::npos) line.erase(hash);
      std::string trimmed = trim(line);
      if (trimmed.empty()) continue;
      auto eq = trimmed.find('=');
      if (eq == std::string::npos)
        throw ConfigError(origin + ":" + std::to_string(lineno) + ": expected key=value");
      std::string key = trim(trimmed.substr(0, eq));
      std::string value = trim(trimmed.substr(eq + 1));
      if (key.empty())
        throw ConfigError(origin + ":" + std::to_string(lineno) + ": empty key");
      for (char c : key)
        if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_' && c != '.')
          throw ConfigError(origin + ":" + std::to_string(lineno) + ": bad key '" + key + "'");
      cfg.kv_[key] = value;
    }
    return cfg;
  }

  static Config from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return from_string(buf.str(), path);
  }

  bool has(const std::string& key) const { return kv_.count(key) > 0; }

  std::string get_string(const std::string& key, const std::string& fallback) const {
    auto it = kv_.find(key);
    return it == kv_.end() ? fallback : it->second;
  }

  double get_double(const std::string& key, double fallback) const {
    auto it = kv_.find(key);
    if (it == kv_.end()) return fallback;
    return parse_double(key, it->second);
  }

  std::size_t get_size(const std::string& key, std::size_t fallback) const {
    auto it = kv_.find(key);
    if (it == kv_.end()) return fallback;
    double v = parse_double(key, it->second);
    if (v < 0.0 || v != static_cast<double>(static_cast<std::size_t>(v)))
      throw ConfigError("config key '" + key + "': expected a non-negative integer, got '" +
                        it->second + "'");
    return static_cast<std::size_t>(v);
  }

  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const {
    auto it = kv_.find(key);
    if (it == kv_.end()) return fallback;
    try {
      std::size_t pos = 0;
      std::uint64_t v = std::stoull(it->second, &pos);
      if (pos != it->second.size()) throw std::invalid_argument("trailing");
      return v;
    } catch (const std::exception&) {
      throw ConfigError("config key '" + key + "': expected an unsigned integer, got '" +
                        it->second + "'");
    }
  }

  // view for one experiment: "name.key" entries shadow bare "key" entries,
  // all other experiments' prefixed entries are dropped
  Config scoped(const std::string& experiment) const {
    Config out;
    std::string prefix = experiment + ".";
    for (const auto& [k, v] : kv_) {
      if (k.find('.') == std::string::npos) out.kv_.emplace(k, v);
    }
    for (const auto& [k, v] : kv_) {
      if (k.rfind(prefix, 0) == 0) out.kv_[k.substr(prefix.size())] = v;
    }
    return out;
  }

  const std::map<std::string, std::string>& entries() const { return kv_; }

 private:
  static std::string trim(const std::string& s) {
    auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
  }

  static double parse_double(const std::string& key, const std::string& value) {
    try {
      std::size_t pos = 0;
      double v = std::stod(value, &pos);
      if (pos != value.size()) throw std::invalid_argument("trailing");
      return v;
    } catch (const std::exception&) {
      throw ConfigError("config key '" + key + "': expected a number, got '" + value + "'");
    }
  }

  std::map<std::string, std::string> kv_;
};

// FILTRAGE_SEED wins over the config's seed entry, which wins over the default.
inline std::uint64_t resolve_seed(const Config& cfg, std::uint64_t fallback = 20240817ull) {
  if (const char* env = std::getenv("FILTRAGE_SEED")) {
    std::string s(env);
    try {
      std::size_t pos = 0;
      std::uint64_t v = std::stoull(s, &pos);
      if (pos != s.size()) throw std::invalid_argument("trailing");
      return v;
    } catch (const std::exception&) {
      throw ConfigError("FILTRAGE_SEED: expected an unsigned integer, got '" + s + "'");
    }
  }
  return cfg.get_u64("seed", fallback);
}

}  // namespace filtrage::harness
