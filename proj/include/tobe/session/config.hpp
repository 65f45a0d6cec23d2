#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "tobe/config_reader.hpp"
#include "tobe/feedback/avatar.hpp"
#include "tobe/session/protocol.hpp"
#include "tobe/signal/normalizer.hpp"
#include "tobe/synth/recording.hpp"
#include "tobe/synth/spec_file.hpp"

namespace tobe::session {

// User ids the session uses for its own events.
inline constexpr std::string_view kSharedUser = "shared";
inline constexpr std::string_view kGroupUser = "group";

struct SourceConfig {
  enum class Kind { Stream, Recording, Generator };
  Kind kind = Kind::Generator;
  Modality modality = Modality::ECG;
  std::string stream;                         // Stream: stream name to resolve
  std::filesystem::path path;                 // Recording: CSV file
  std::optional<synth::GeneratorSpec> generator;

  std::string describe() const {
    switch (kind) {
      case Kind::Stream: return "stream " + stream;
      case Kind::Recording: return "recording " + path.filename().string();
      case Kind::Generator: return "generator " + generator->name();
    }
    return "source";
  }
};

struct UserConfig {
  std::string user_id;
  std::vector<SourceConfig> sources;
  std::set<MetricId> metrics;
  bool blinks = false;  // BLINK listed among the metrics
  std::string avatar_path;
  std::optional<feedback::AvatarConfig> avatar;
  std::map<MetricId, signal::Normalizer> normalizers;
  std::optional<std::pair<double, double>> respiration_calibration;

  bool has_modality(Modality m) const {
    for (const auto& s : sources)
      if (s.modality == m) return true;
    return false;
  }
  const SourceConfig* source_for(Modality m) const {
    for (const auto& s : sources)
      if (s.modality == m) return &s;
    return nullptr;
  }
  bool wants(MetricId m) const { return metrics.count(m) > 0; }
};

/// Sensor streams a metric is computed from (all of them are needed).
inline std::vector<Modality> required_modalities(MetricId m) {
  switch (m) {
    case MetricId::HEART_RATE:
    case MetricId::PAIR_SYNCHRONY: return {Modality::ECG};
    case MetricId::AROUSAL: return {Modality::EDA};
    case MetricId::RESPIRATION: return {Modality::RESP};
    case MetricId::CARDIAC_COHERENCE: return {Modality::ECG, Modality::RESP};
    case MetricId::VIGILANCE:
    case MetricId::WORKLOAD:
    case MetricId::MEDITATION:
    case MetricId::VALENCE: return {Modality::EEG};
  }
  return {};
}

struct SessionConfig {
  std::vector<UserConfig> users;
  std::optional<RelaxationProtocol> protocol;
  std::optional<double> duration_s;  // defaults to the protocol length; none = run until stopped
  std::vector<MetricId> group_metrics;
  double step_s = 0.1;
  double render_hz = 10.0;
  double gauge_hz = 10.0;
  std::uint64_t seed = 1;

  std::optional<double> end_time() const {
    if (duration_s) return duration_s;
    if (protocol) return protocol->total_s();
    return std::nullopt;
  }

  std::vector<const UserConfig*> synchrony_users() const {
    std::vector<const UserConfig*> out;
    for (const auto& u : users)
      if (u.wants(MetricId::PAIR_SYNCHRONY)) out.push_back(&u);
    return out;
  }

  void validate() const {
    require_config(!users.empty(), "session has no users");
    std::set<std::string> ids;
    for (const auto& u : users) {
      require_config(!u.user_id.empty(), "user_id must not be empty");
      require_config(u.user_id != kSharedUser && u.user_id != kGroupUser,
                     "user_id '" + u.user_id + "' is reserved");
      require_config(ids.insert(u.user_id).second, "duplicate user_id '" + u.user_id + "'");
      std::set<Modality> seen;
      for (const auto& s : u.sources)
        require_config(seen.insert(s.modality).second, "user '" + u.user_id + "' has more than one " +
                                                           std::string(tobe::to_string(s.modality)) + " source");
      for (auto m : u.metrics)
        for (auto need : required_modalities(m))
          require_config(u.has_modality(need), "metric " + std::string(tobe::to_string(m)) + " for user '" +
                                                   u.user_id + "' needs a " + std::string(tobe::to_string(need)) +
                                                   " source");
      if (u.blinks)
        require_config(u.has_modality(Modality::EOG) || u.has_modality(Modality::EEG),
                       "metric BLINK for user '" + u.user_id + "' needs an EOG or EEG source");
      if (u.avatar)
        for (const auto& b : u.avatar->bindings) {
          const bool enabled = b.metric == feedback::kBlinkSource ? u.blinks : u.wants(*parse_metric(b.metric));
          require_config(enabled, "avatar of user '" + u.user_id + "' binds " + b.metric +
                                      ", which is not among the user's metrics");
        }
    }
    const auto sync = synchrony_users();
    require_config(sync.empty() || sync.size() == 2,
                   "PAIR_SYNCHRONY needs exactly two users, got " + std::to_string(sync.size()));
    if (protocol) protocol->validate();
    if (duration_s) require_config(std::isfinite(*duration_s) && *duration_s > 0.0, "duration_s must be > 0");
    require_config(std::isfinite(step_s) && step_s > 0.0 && step_s <= 1.0, "step_s must be in (0, 1]");
    require_config(render_hz > 0.0 && gauge_hz > 0.0, "render_hz and gauge_hz must be > 0");
    for (auto m : group_metrics)
      require_config(m != MetricId::PAIR_SYNCHRONY, "PAIR_SYNCHRONY is already a group metric");
  }
};

namespace detail {

inline signal::Normalizer parse_normalizer(const config::Node& n) {
  const auto kind_node = n.at("kind");
  const auto kind = kind_node.str();
  signal::Normalizer out;
  if (kind == "fixed") {
    const double lo = n.at("min").num(), hi = n.at("max").num();
    require_config(lo < hi, n.path() + ": min must be < max");
    out = signal::Normalizer::fixed(lo, hi);
  } else if (kind == "rolling") {
    out = signal::Normalizer::rolling(n.num_or("window_s", 60.0), n.num_or("margin", 0.05));
  } else if (kind == "logistic") {
    out = signal::Normalizer::logistic(n.at("center").num(), n.at("slope").num());
  } else {
    throw ConfigError(kind_node.path() + " must be fixed, rolling or logistic; got '" + kind + "'");
  }
  n.finish();
  return out;
}

inline MetricId parse_metric_at(const config::Node& n) {
  const auto s = n.str();
  const auto m = parse_metric(s);
  require_config(m.has_value(), n.path() + ": unknown metric '" + s + "'");
  return *m;
}

inline SourceConfig parse_source(const config::Node& n, const std::filesystem::path& base_dir,
                                 const std::string& user_id, std::size_t index) {
  SourceConfig s;
  const int kinds = n.has("stream") + n.has("recording") + n.has("generator");
  require_config(kinds == 1, n.path() + " must set exactly one of stream, recording, generator");
  if (const auto st = n.opt("stream")) {
    s.kind = SourceConfig::Kind::Stream;
    s.stream = st->str();
    const auto mod = n.at("modality");
    const auto m = parse_modality(mod.str());
    require_config(m && *m != Modality::METRIC, mod.path() + ": unknown sensor modality '" + mod.str() + "'");
    s.modality = *m;
  } else if (const auto rec = n.opt("recording")) {
    s.kind = SourceConfig::Kind::Recording;
    s.path = config::resolve_relative(base_dir, rec->str());
    try {
      s.modality = synth::RecordingReader(s.path.string()).meta().modality;
    } catch (const ConfigError& e) {
      throw ConfigError(rec->path() + ": " + e.what());
    }
  } else {
    const auto g = n.at("generator");
    s.kind = SourceConfig::Kind::Generator;
    s.generator = g.is_scalar() ? synth::load_generator(config::resolve_relative(base_dir, g.str()))
                                : synth::parse_generator(g);
    // every user gets its own instance of a shared spec
    if (const auto seed = s.generator->seed())
      s.generator->set_seed(synth::derive_seed(*seed, user_id + "/" + std::to_string(index)));
    s.generator->set_name(user_id + "-" + s.generator->name());
    s.modality = s.generator->modality();
  }
  n.finish();
  return s;
}

inline UserConfig parse_user(const config::Node& n, const std::filesystem::path& base_dir) {
  UserConfig u;
  u.user_id = n.at("user_id").str();
  const auto sources = n.at("sources").list();
  for (std::size_t i = 0; i < sources.size(); ++i) u.sources.push_back(parse_source(sources[i], base_dir, u.user_id, i));
  if (const auto metrics = n.opt("metrics")) {
    for (const auto& m : metrics->list()) {
      if (m.str() == feedback::kBlinkSource) u.blinks = true;
      else u.metrics.insert(parse_metric_at(m));
    }
  }
  if (const auto av = n.opt("avatar")) {
    u.avatar_path = config::resolve_relative(base_dir, av->str()).string();
    try {
      u.avatar = feedback::load_avatar(u.avatar_path);
    } catch (const ConfigError& e) {
      throw ConfigError(av->path() + ": " + e.what());
    }
  }
  if (const auto norms = n.opt("normalizers")) {
    for (const auto& [key, spec] : norms->entries()) {
      const auto m = parse_metric(key);
      require_config(m.has_value(), spec.path() + ": unknown metric '" + key + "'");
      u.normalizers.insert_or_assign(*m, parse_normalizer(spec));
    }
  }
  if (const auto cal = n.opt("respiration_calibration")) {
    const auto v = cal->list();
    require_config(v.size() == 2 && v[0].num() < v[1].num(), cal->path() + " must be [exhale, inhale] with exhale < inhale");
    u.respiration_calibration = std::pair{v[0].num(), v[1].num()};
  }
  n.finish();
  return u;
}

inline RelaxationProtocol parse_protocol(const config::Node& n) {
  RelaxationProtocol p;
  if (n.is_scalar()) {
    require_config(n.str() == "default", n.path() + " must be a mapping or 'default'");
    return p;
  }
  if (const auto phases = n.opt("phases")) {
    p.phases.clear();
    for (const auto& ph : phases->list()) {
      const auto id = ph.at("phase_id");
      const auto pid = parse_phase(id.str());
      require_config(pid.has_value(), id.path() + " must be GUIDED, SOLO or SYNC; got '" + id.str() + "'");
      const auto d = ph.at("duration_s");
      require_config(d.num() > 0.0, d.path() + " must be > 0");
      p.phases.push_back({*pid, d.num()});
      ph.finish();
    }
  }
  if (const auto g = n.opt("gauge")) {
    p.gauge_half_cycle_s = g->num_or("half_cycle_s", p.gauge_half_cycle_s);
    g->finish();
  }
  n.finish();
  p.validate();
  return p;
}

}  // namespace detail

/// Builds a validated session from a YAML or JSON document. Relative file
/// references (generator specs, recordings, avatars) resolve against
/// `base_dir`.
inline SessionConfig session_from_node(const config::Node& n, const std::filesystem::path& base_dir) {
  require_config(n.is_map(), "session config must be a mapping");
  SessionConfig c;
  const auto users = n.at("users").list();
  for (const auto& u : users) c.users.push_back(detail::parse_user(u, base_dir));
  if (const auto p = n.opt("protocol")) c.protocol = detail::parse_protocol(*p);
  if (const auto d = n.opt("duration_s")) c.duration_s = d->num();
  if (const auto g = n.opt("group_metrics"))
    for (const auto& m : g->list()) c.group_metrics.push_back(detail::parse_metric_at(m));
  c.step_s = n.num_or("step_s", c.step_s);
  c.render_hz = n.num_or("render_hz", c.render_hz);
  c.gauge_hz = n.num_or("gauge_hz", c.gauge_hz);
  if (const auto s = n.opt("seed")) c.seed = s->uinteger();
  n.finish();
  c.validate();
  return c;
}

inline SessionConfig parse_session(const std::string& text, const std::filesystem::path& base_dir = {}) {
  return session_from_node(config::parse_yaml(text), base_dir);
}

inline SessionConfig load_session(const std::filesystem::path& file) {
  try {
    return session_from_node(config::load_yaml_file(file), file.parent_path());
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    if (msg.rfind(file.string(), 0) == 0) throw;
    throw ConfigError(file.string() + ": " + msg);
  }
}

}  // namespace tobe::session
