#pragma once

#include <cmath>
#include <fstream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "tobe/feedback/timeline.hpp"

namespace tobe::feedback {

enum class BindingMode { CONTINUOUS, PERIODIC };

inline std::string_view to_string(BindingMode m) { return m == BindingMode::CONTINUOUS ? "CONTINUOUS" : "PERIODIC"; }

// Blinks are events, not metrics; they can only drive PERIODIC bindings.
inline constexpr std::string_view kBlinkSource = "BLINK";

inline bool is_known_source(const std::string& s) { return parse_metric(s).has_value() || s == kBlinkSource; }

struct Anchor {
  std::string id;
  double x = 0.5;  // normalized avatar coordinates
  double y = 0.5;
  double size = 0.1;
  friend bool operator==(const Anchor&, const Anchor&) = default;
};

struct Binding {
  std::string metric;  // metric name, or BLINK
  std::string anchor;
  std::string timeline;
  BindingMode mode = BindingMode::CONTINUOUS;
  std::optional<double> duration_s;  // PERIODIC only
  friend bool operator==(const Binding&, const Binding&) = default;
};

struct AvatarConfig {
  std::string avatar_id;
  std::vector<Anchor> anchors;
  std::vector<Timeline> timelines;
  std::vector<Binding> bindings;
  std::uint64_t version = 0;  // runtime counter, not persisted

  const Anchor* find_anchor(const std::string& id) const {
    for (const auto& a : anchors)
      if (a.id == id) return &a;
    return nullptr;
  }
  const Timeline* find_timeline(const std::string& id) const {
    for (const auto& t : timelines)
      if (t.id == id) return &t;
    return nullptr;
  }
  const Binding* binding_for(const std::string& anchor) const {
    for (const auto& b : bindings)
      if (b.anchor == anchor) return &b;
    return nullptr;
  }

  void validate() const {
    require_config(!avatar_id.empty(), "avatar_id must not be empty");
    std::set<std::string> ids;
    for (const auto& a : anchors) {
      require_config(!a.id.empty(), "anchor id must not be empty");
      require_config(ids.insert(a.id).second, "duplicate anchor id '" + a.id + "'");
      require_config(std::isfinite(a.x) && std::isfinite(a.y) && a.x >= 0.0 && a.x <= 1.0 && a.y >= 0.0 &&
                         a.y <= 1.0,
                     "anchor '" + a.id + "' position must lie in [0,1]x[0,1]");
      require_config(std::isfinite(a.size) && a.size > 0.0, "anchor '" + a.id + "' size must be > 0");
    }
    ids.clear();
    for (const auto& t : timelines) {
      t.validate();
      require_config(ids.insert(t.id).second, "duplicate timeline id '" + t.id + "'");
    }
    ids.clear();
    for (const auto& b : bindings) validate_binding(b, ids);
  }

  /// Structural equality; the runtime version counter is ignored.
  friend bool operator==(const AvatarConfig& a, const AvatarConfig& b) {
    return a.avatar_id == b.avatar_id && a.anchors == b.anchors && a.timelines == b.timelines &&
           a.bindings == b.bindings;
  }

 private:
  void validate_binding(const Binding& b, std::set<std::string>& bound) const {
    require_config(is_known_source(b.metric), "binding refers to unknown metric '" + b.metric + "'");
    require_config(find_anchor(b.anchor) != nullptr, "binding refers to unknown anchor '" + b.anchor + "'");
    require_config(find_timeline(b.timeline) != nullptr, "binding refers to unknown timeline '" + b.timeline + "'");
    require_config(bound.insert(b.anchor).second, "anchor '" + b.anchor + "' has more than one binding");
    if (b.mode == BindingMode::PERIODIC) {
      require_config(b.duration_s && std::isfinite(*b.duration_s) && *b.duration_s > 0.0,
                     "PERIODIC binding on '" + b.anchor + "' needs duration_s > 0");
    } else {
      require_config(!b.duration_s, "CONTINUOUS binding on '" + b.anchor + "' must not set duration_s");
      require_config(b.metric != kBlinkSource, "BLINK can only drive a PERIODIC binding");
    }
  }
};

/// Attaches a metric to an anchor, replacing whatever was bound there.
/// Returns the updated config with its version incremented.
inline AvatarConfig bind(AvatarConfig config, const std::string& metric, const std::string& anchor,
                         const std::string& timeline, BindingMode mode,
                         std::optional<double> duration_s = std::nullopt) {
  require_config(config.find_anchor(anchor) != nullptr, "unknown anchor '" + anchor + "'");
  require_config(config.find_timeline(timeline) != nullptr, "unknown timeline '" + timeline + "'");
  require_config(is_known_source(metric), "unknown metric '" + metric + "'");
  if (mode == BindingMode::PERIODIC && !duration_s) duration_s = 1.0;
  if (mode == BindingMode::CONTINUOUS) duration_s.reset();
  std::erase_if(config.bindings, [&](const Binding& b) { return b.anchor == anchor; });
  config.bindings.push_back({metric, anchor, timeline, mode, duration_s});
  config.validate();
  ++config.version;
  return config;
}

// ---- JSON document -------------------------------------------------------

inline nlohmann::json to_json(const AvatarConfig& c) {
  nlohmann::json j;
  j["avatar_id"] = c.avatar_id;
  j["anchors"] = nlohmann::json::array();
  for (const auto& a : c.anchors) j["anchors"].push_back({{"id", a.id}, {"x", a.x}, {"y", a.y}, {"size", a.size}});
  j["timelines"] = nlohmann::json::array();
  for (const auto& t : c.timelines) {
    nlohmann::json keys = nlohmann::json::array();
    for (const auto& k : t.keys) {
      const auto& x = k.transform;
      keys.push_back({{"phase", k.phase}, {"sx", x.sx}, {"sy", x.sy}, {"rot", x.rot}, {"tx", x.tx}, {"ty", x.ty}});
    }
    j["timelines"].push_back({{"id", t.id}, {"sprite", t.sprite}, {"keys", keys}});
  }
  j["bindings"] = nlohmann::json::array();
  for (const auto& b : c.bindings) {
    nlohmann::json jb{{"metric", b.metric}, {"anchor", b.anchor}, {"timeline", b.timeline},
                      {"mode", std::string(to_string(b.mode))}};
    if (b.duration_s) jb["duration_s"] = *b.duration_s;
    j["bindings"].push_back(jb);
  }
  return j;
}

namespace detail {

// Reads a JSON object field by field, naming the key path in every error
// and rejecting keys nobody asked for.
class ObjectReader {
 public:
  ObjectReader(const nlohmann::json& j, std::string path) : j_(j), path_(std::move(path)) {
    require_config(j.is_object(), where() + " must be an object");
  }

  const nlohmann::json& at(const std::string& key) {
    seen_.insert(key);
    require_config(j_.contains(key), "missing key " + path_of(key));
    return j_.at(key);
  }

  bool has(const std::string& key) const { return j_.contains(key); }

  std::string str(const std::string& key) {
    const auto& v = at(key);
    require_config(v.is_string(), path_of(key) + " must be a string");
    return v.get<std::string>();
  }

  double num(const std::string& key) {
    const auto& v = at(key);
    require_config(v.is_number(), path_of(key) + " must be a number");
    return v.get<double>();
  }

  const nlohmann::json& array(const std::string& key) {
    const auto& v = at(key);
    require_config(v.is_array(), path_of(key) + " must be an array");
    return v;
  }

  std::string path_of(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  void finish() const {
    for (const auto& [k, v] : j_.items())
      require_config(seen_.count(k) > 0, "unknown key " + path_of(k));
  }

 private:
  std::string where() const { return path_.empty() ? "document" : path_; }

  const nlohmann::json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

}  // namespace detail

inline AvatarConfig avatar_from_json(const nlohmann::json& j) {
  detail::ObjectReader r(j, "");
  AvatarConfig c;
  c.avatar_id = r.str("avatar_id");
  const auto& anchors = r.array("anchors");
  for (std::size_t i = 0; i < anchors.size(); ++i) {
    detail::ObjectReader a(anchors[i], "anchors[" + std::to_string(i) + "]");
    c.anchors.push_back({a.str("id"), a.num("x"), a.num("y"), a.num("size")});
    a.finish();
  }
  const auto& timelines = r.array("timelines");
  for (std::size_t i = 0; i < timelines.size(); ++i) {
    const std::string tp = "timelines[" + std::to_string(i) + "]";
    detail::ObjectReader t(timelines[i], tp);
    Timeline tl{t.str("id"), t.str("sprite"), {}};
    const auto& keys = t.array("keys");
    for (std::size_t k = 0; k < keys.size(); ++k) {
      detail::ObjectReader kr(keys[k], tp + ".keys[" + std::to_string(k) + "]");
      Keyframe kf;
      kf.phase = kr.num("phase");
      kf.transform = {kr.num("sx"), kr.num("sy"), kr.num("rot"), kr.num("tx"), kr.num("ty")};
      kr.finish();
      tl.keys.push_back(kf);
    }
    t.finish();
    c.timelines.push_back(std::move(tl));
  }
  const auto& bindings = r.array("bindings");
  for (std::size_t i = 0; i < bindings.size(); ++i) {
    detail::ObjectReader b(bindings[i], "bindings[" + std::to_string(i) + "]");
    Binding bd;
    bd.metric = b.str("metric");
    bd.anchor = b.str("anchor");
    bd.timeline = b.str("timeline");
    const auto mode = b.str("mode");
    require_config(mode == "CONTINUOUS" || mode == "PERIODIC",
                   b.path_of("mode") + " must be CONTINUOUS or PERIODIC, got '" + mode + "'");
    bd.mode = mode == "CONTINUOUS" ? BindingMode::CONTINUOUS : BindingMode::PERIODIC;
    if (b.has("duration_s")) bd.duration_s = b.num("duration_s");
    b.finish();
    c.bindings.push_back(std::move(bd));
  }
  r.finish();
  c.validate();
  return c;
}

inline AvatarConfig parse_avatar(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("avatar config is not valid JSON: ") + e.what());
  }
  return avatar_from_json(j);
}

inline AvatarConfig load_avatar(const std::string& path) {
  std::ifstream in(path);
  require_config(in.good(), "cannot open avatar config '" + path + "'");
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  try {
    return parse_avatar(text);
  } catch (const ConfigError& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

inline void save_avatar(const std::string& path, const AvatarConfig& c) {
  c.validate();
  std::ofstream out(path);
  require_config(out.good(), "cannot write avatar config '" + path + "'");
  out << to_json(c).dump(2) << '\n';
}

}  // namespace tobe::feedback
