#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <yaml-cpp/yaml.h>

#include "tobe/core.hpp"

namespace tobe::config {

/// A YAML (or JSON) node that knows its key path. Reading a key marks it as
/// used; finish() rejects any key of a mapping that was never read, so typos
/// surface as "unknown key users[1].metrcs" instead of being ignored.
class Node {
 public:
  Node(YAML::Node n, std::string path) : n_(std::move(n)), path_(std::move(path)), seen_(std::make_shared<std::set<std::string>>()) {}

  const std::string& path() const { return path_; }
  const YAML::Node& raw() const { return n_; }
  bool is_map() const { return n_.IsMap(); }
  bool is_seq() const { return n_.IsSequence(); }
  bool is_scalar() const { return n_.IsScalar(); }

  bool has(const std::string& key) const { return n_.IsMap() && n_[key].IsDefined() && !n_[key].IsNull(); }

  Node at(const std::string& key) const {
    require_config(n_.IsMap(), where() + " must be a mapping");
    seen_->insert(key);
    const auto child = n_[key];
    require_config(child.IsDefined() && !child.IsNull(), "missing key " + child_path(key));
    return Node(child, child_path(key));
  }

  std::optional<Node> opt(const std::string& key) const {
    require_config(n_.IsMap(), where() + " must be a mapping");
    seen_->insert(key);
    if (!has(key)) return std::nullopt;
    return Node(n_[key], child_path(key));
  }

  double num() const {
    require_config(n_.IsScalar(), where() + " must be a number");
    try {
      const double v = n_.as<double>();
      require_config(std::isfinite(v), where() + " must be finite");
      return v;
    } catch (const YAML::Exception&) {
      throw ConfigError(where() + " must be a number, got '" + n_.Scalar() + "'");
    }
  }

  std::int64_t integer() const {
    require_config(n_.IsScalar(), where() + " must be an integer");
    try {
      return n_.as<std::int64_t>();
    } catch (const YAML::Exception&) {
      throw ConfigError(where() + " must be an integer, got '" + n_.Scalar() + "'");
    }
  }

  std::uint64_t uinteger() const {
    require_config(n_.IsScalar(), where() + " must be a non-negative integer");
    try {
      return n_.as<std::uint64_t>();
    } catch (const YAML::Exception&) {
      throw ConfigError(where() + " must be a non-negative integer, got '" + n_.Scalar() + "'");
    }
  }

  bool boolean() const {
    require_config(n_.IsScalar(), where() + " must be true or false");
    try {
      return n_.as<bool>();
    } catch (const YAML::Exception&) {
      throw ConfigError(where() + " must be true or false, got '" + n_.Scalar() + "'");
    }
  }

  std::string str() const {
    require_config(n_.IsScalar(), where() + " must be a string");
    return n_.Scalar();
  }

  std::vector<Node> list() const {
    require_config(n_.IsSequence(), where() + " must be a list");
    std::vector<Node> out;
    for (std::size_t i = 0; i < n_.size(); ++i) out.emplace_back(n_[i], path_ + "[" + std::to_string(i) + "]");
    return out;
  }

  /// Entries of a mapping, in document order. All keys count as read.
  std::vector<std::pair<std::string, Node>> entries() const {
    require_config(n_.IsMap(), where() + " must be a mapping");
    std::vector<std::pair<std::string, Node>> out;
    for (const auto& kv : n_) {
      const auto key = kv.first.Scalar();
      seen_->insert(key);
      out.emplace_back(key, Node(kv.second, child_path(key)));
    }
    return out;
  }

  double num_or(const std::string& key, double fallback) const {
    const auto n = opt(key);
    return n ? n->num() : fallback;
  }
  std::string str_or(const std::string& key, const std::string& fallback) const {
    const auto n = opt(key);
    return n ? n->str() : fallback;
  }

  void finish() const {
    if (!n_.IsMap()) return;
    for (const auto& kv : n_) {
      const auto key = kv.first.Scalar();
      require_config(seen_->count(key) > 0, "unknown key " + child_path(key));
    }
  }

  std::string child_path(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

 private:
  std::string where() const { return path_.empty() ? "document" : path_; }

  YAML::Node n_;
  std::string path_;
  std::shared_ptr<std::set<std::string>> seen_;
};

inline Node parse_yaml(const std::string& text, const std::string& root_path = "") {
  try {
    return Node(YAML::Load(text), root_path);
  } catch (const YAML::Exception& e) {
    throw ConfigError(std::string("malformed document: ") + e.what());
  }
}

inline Node load_yaml_file(const std::filesystem::path& file, const std::string& root_path = "") {
  require_config(std::filesystem::exists(file), "file not found: " + file.string());
  try {
    return Node(YAML::LoadFile(file.string()), root_path);
  } catch (const YAML::Exception& e) {
    throw ConfigError(file.string() + ": malformed document: " + e.what());
  }
}

/// Resolves `p` against the directory of the document that referenced it.
inline std::filesystem::path resolve_relative(const std::filesystem::path& base_dir, const std::string& p) {
  const std::filesystem::path path(p);
  return path.is_absolute() || base_dir.empty() ? path : base_dir / path;
}

}  // namespace tobe::config
