#pragma once

#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "marl/errors.hpp"

namespace marl {

using Config = nlohmann::json;

// Typed accessor over a Config that records which keys were read.  Call
// check_no_extras() after the last read; any untouched key is a SchemaError,
// so typos in config files fail loudly instead of silently using defaults.
class ConfigView {
 public:
  explicit ConfigView(const Config& cfg, std::string context = "config")
      : cfg_(cfg), context_(std::move(context)) {
    if (!cfg_.is_object() && !cfg_.is_null())
      throw SchemaError(context_ + ": expected a JSON object");
  }

  int get_int(const std::string& key, int fallback) {
    return get_scalar<int>(key, fallback, "integer");
  }
  int64_t get_int64(const std::string& key, int64_t fallback) {
    return get_scalar<int64_t>(key, fallback, "integer");
  }
  double get_double(const std::string& key, double fallback) {
    return get_scalar<double>(key, fallback, "number");
  }
  bool get_bool(const std::string& key, bool fallback) {
    return get_scalar<bool>(key, fallback, "boolean");
  }
  std::string get_string(const std::string& key, const std::string& fallback) {
    return get_scalar<std::string>(key, fallback, "string");
  }
  std::vector<double> get_double_list(const std::string& key, std::vector<double> fallback) {
    seen_.insert(key);
    if (!cfg_.contains(key)) return fallback;
    const auto& v = cfg_.at(key);
    if (!v.is_array()) throw SchemaError(context_ + ": key '" + key + "' must be an array of numbers");
    std::vector<double> out;
    for (const auto& e : v) {
      if (!e.is_number()) throw SchemaError(context_ + ": key '" + key + "' must be an array of numbers");
      out.push_back(e.get<double>());
    }
    return out;
  }
  std::vector<std::string> get_string_list(const std::string& key,
                                           std::vector<std::string> fallback) {
    seen_.insert(key);
    if (!cfg_.contains(key)) return fallback;
    const auto& v = cfg_.at(key);
    if (!v.is_array()) throw SchemaError(context_ + ": key '" + key + "' must be an array of strings");
    std::vector<std::string> out;
    for (const auto& e : v) {
      if (!e.is_string()) throw SchemaError(context_ + ": key '" + key + "' must be an array of strings");
      out.push_back(e.get<std::string>());
    }
    return out;
  }
  // nested config block (e.g. per-unit stat overrides); empty object when absent
  Config get_object(const std::string& key) {
    seen_.insert(key);
    if (!cfg_.is_object() || !cfg_.contains(key)) return Config::object();
    const auto& v = cfg_.at(key);
    if (!v.is_object()) throw SchemaError(context_ + ": key '" + key + "' must be an object");
    return v;
  }

  bool has(const std::string& key) const { return cfg_.is_object() && cfg_.contains(key); }

  void check_no_extras() const {
    if (!cfg_.is_object()) return;
    for (const auto& item : cfg_.items())
      if (!seen_.count(item.key()))
        throw SchemaError(context_ + ": unknown key '" + item.key() + "'");
  }

 private:
  template <class T>
  T get_scalar(const std::string& key, T fallback, const char* type_name) {
    seen_.insert(key);
    if (!cfg_.is_object() || !cfg_.contains(key)) return fallback;
    try {
      const auto& v = cfg_.at(key);
      if constexpr (std::is_same_v<T, bool>) {
        if (!v.is_boolean()) throw SchemaError("");
      } else if constexpr (std::is_same_v<T, std::string>) {
        if (!v.is_string()) throw SchemaError("");
      } else if constexpr (std::is_integral_v<T>) {
        if (!v.is_number_integer() && !v.is_number_unsigned()) throw SchemaError("");
      } else {
        if (!v.is_number()) throw SchemaError("");
      }
      return v.get<T>();
    } catch (const std::exception&) {
      throw SchemaError(context_ + ": key '" + key + "' must be a " + type_name);
    }
  }

  const Config cfg_;
  std::string context_;
  std::set<std::string> seen_;
};

}  // namespace marl
