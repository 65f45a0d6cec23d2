#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <variant>

#include "tobe/config_reader.hpp"
#include "tobe/synth/ecg.hpp"
#include "tobe/synth/eda.hpp"
#include "tobe/synth/eeg.hpp"
#include "tobe/synth/respiration.hpp"

namespace tobe::synth {

// Generator spec file (YAML or JSON). `kind` picks the generator; every
// other key mirrors a field of the matching spec struct:
//
//   kind: ecg            # ecg | eeg | respiration | eda
//   duration_s: 60       # optional, used by `tobe synth`
//   bpm: 60              # shorthand for a flat bpm_profile
//   noise_uV: 20
//   seed: 7

using AnySpec = std::variant<EcgSpec, EegSpec, RespirationSpec, EdaSpec>;

struct GeneratorSpec {
  AnySpec spec;
  std::optional<double> duration_s;

  std::string kind() const {
    static constexpr const char* names[] = {"ecg", "eeg", "respiration", "eda"};
    return names[spec.index()];
  }

  Modality modality() const {
    static constexpr Modality m[] = {Modality::ECG, Modality::EEG, Modality::RESP, Modality::EDA};
    return m[spec.index()];
  }

  const std::string& name() const {
    return std::visit([](const auto& s) -> const std::string& { return s.name; }, spec);
  }

  void set_name(const std::string& n) {
    std::visit([&](auto& s) { s.name = n; }, spec);
  }

  /// EDA has no randomness, so it has no seed.
  std::optional<std::uint64_t> seed() const {
    return std::visit(
        [](const auto& s) -> std::optional<std::uint64_t> {
          if constexpr (requires { s.seed; }) return s.seed;
          return std::nullopt;
        },
        spec);
  }

  void set_seed(std::uint64_t seed) {
    std::visit(
        [&](auto& s) {
          if constexpr (requires { s.seed; }) s.seed = seed;
        },
        spec);
  }

  void validate() const {
    std::visit([](const auto& s) { s.validate(); }, spec);
  }
};

namespace detail {

inline std::vector<std::string> string_list(const config::Node& n) {
  std::vector<std::string> out;
  for (const auto& item : n.list()) out.push_back(item.str());
  return out;
}

inline EcgSpec parse_ecg(const config::Node& n) {
  EcgSpec s;
  s.fs = n.num_or("fs", s.fs);
  const auto bpm = n.opt("bpm");
  const auto profile = n.opt("bpm_profile");
  require_config(!(bpm && profile), n.child_path("bpm") + " and bpm_profile cannot both be set");
  if (bpm) s.bpm_profile = {{0.0, bpm->num()}};
  if (profile) {
    s.bpm_profile.clear();
    for (const auto& p : profile->list()) {
      s.bpm_profile.push_back({p.at("t").num(), p.at("bpm").num()});
      p.finish();
    }
  }
  s.rsa_depth = n.num_or("rsa_depth", s.rsa_depth);
  s.rsa_period_s = n.num_or("rsa_period_s", s.rsa_period_s);
  s.noise_uV = n.num_or("noise_uV", s.noise_uV);
  s.r_amplitude_uV = n.num_or("r_amplitude_uV", s.r_amplitude_uV);
  if (const auto seed = n.opt("seed")) s.seed = seed->uinteger();
  s.name = n.str_or("name", s.name);
  return s;
}

inline EegComponent parse_component(const config::Node& n) {
  EegComponent c;
  c.center_hz = n.at("center_hz").num();
  c.bandwidth_hz = n.num_or("bandwidth_hz", c.bandwidth_hz);
  c.amplitude_uV = n.num_or("amplitude_uV", c.amplitude_uV);
  n.finish();
  return c;
}

inline EegSpec parse_eeg(const config::Node& n) {
  EegSpec s;
  s.fs = n.num_or("fs", s.fs);
  if (const auto labels = n.opt("labels")) s.labels = string_list(*labels);
  if (const auto comps = n.opt("components")) {
    for (const auto& [channel, list] : comps->entries())
      for (const auto& c : list.list()) s.components[channel].push_back(parse_component(c));
  }
  if (const auto coupling = n.opt("coupling")) {
    for (const auto& c : coupling->list()) {
      EegCoupling cp;
      cp.channels = string_list(c.at("channels"));
      cp.coefficient = c.at("coefficient").num();
      if (const auto band = c.opt("band")) {
        const auto b = band->list();
        require_config(b.size() == 2, band->path() + " must be [low_hz, high_hz]");
        cp.band = {b[0].num(), b[1].num()};
      }
      cp.amplitude_uV = c.num_or("amplitude_uV", cp.amplitude_uV);
      c.finish();
      s.coupling.push_back(std::move(cp));
    }
  }
  s.background_uV = n.num_or("background_uV", s.background_uV);
  s.blink_rate_per_min = n.num_or("blink_rate_per_min", s.blink_rate_per_min);
  s.blink_amplitude_uV = n.num_or("blink_amplitude_uV", s.blink_amplitude_uV);
  s.blink_duration_s = n.num_or("blink_duration_s", s.blink_duration_s);
  if (const auto bc = n.opt("blink_channels")) s.blink_channels = string_list(*bc);
  if (const auto seed = n.opt("seed")) s.seed = seed->uinteger();
  s.name = n.str_or("name", s.name);
  return s;
}

inline RespirationSpec parse_respiration(const config::Node& n) {
  RespirationSpec s;
  s.period_s = n.num_or("period_s", s.period_s);
  s.fs = n.num_or("fs", s.fs);
  s.amplitude = n.num_or("amplitude", s.amplitude);
  s.offset = n.num_or("offset", s.offset);
  s.jitter = n.num_or("jitter", s.jitter);
  if (const auto seed = n.opt("seed")) s.seed = seed->uinteger();
  s.name = n.str_or("name", s.name);
  return s;
}

inline EdaSpec parse_eda(const config::Node& n) {
  EdaSpec s;
  s.tonic_uS = n.num_or("tonic_uS", s.tonic_uS);
  s.fs = n.num_or("fs", s.fs);
  if (const auto events = n.opt("events")) {
    for (const auto& e : events->list()) {
      ScrEvent ev;
      ev.t = e.at("t").num();
      ev.amplitude = e.num_or("amplitude", ev.amplitude);
      ev.rise_s = e.num_or("rise_s", ev.rise_s);
      ev.decay_s = e.num_or("decay_s", ev.decay_s);
      e.finish();
      s.events.push_back(ev);
    }
  }
  s.name = n.str_or("name", s.name);
  return s;
}

}  // namespace detail

/// Parses and validates a generator spec. Errors name the offending key.
inline GeneratorSpec parse_generator(const config::Node& n) {
  require_config(n.is_map(), (n.path().empty() ? std::string("generator spec") : n.path()) + " must be a mapping");
  const auto kind_node = n.at("kind");
  const std::string kind = kind_node.str();
  GeneratorSpec g;
  if (kind == "ecg")
    g.spec = detail::parse_ecg(n);
  else if (kind == "eeg")
    g.spec = detail::parse_eeg(n);
  else if (kind == "respiration" || kind == "resp")
    g.spec = detail::parse_respiration(n);
  else if (kind == "eda")
    g.spec = detail::parse_eda(n);
  else
    throw ConfigError(kind_node.path() + " must be one of ecg, eeg, respiration, eda; got '" + kind + "'");
  if (const auto d = n.opt("duration_s")) {
    g.duration_s = d->num();
    require_config(*g.duration_s > 0.0, d->path() + " must be positive");
  }
  n.finish();
  try {
    g.validate();
  } catch (const ConfigError& e) {
    throw ConfigError(n.path().empty() ? std::string(e.what()) : n.path() + ": " + e.what());
  }
  return g;
}

inline GeneratorSpec parse_generator_text(const std::string& text) { return parse_generator(config::parse_yaml(text)); }

inline GeneratorSpec load_generator(const std::filesystem::path& file) {
  try {
    return parse_generator(config::load_yaml_file(file));
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    if (msg.rfind(file.string(), 0) == 0) throw;
    throw ConfigError(file.string() + ": " + msg);
  }
}

/// Runs the generator. Ground truth is dropped; callers needing it use the
/// individual gen_* functions.
inline Recording generate(const GeneratorSpec& g, double duration_s, double t0 = 0.0) {
  return std::visit(
      [&](const auto& s) -> Recording {
        using S = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<S, EcgSpec>) return gen_ecg(s, duration_s, t0).recording;
        if constexpr (std::is_same_v<S, EegSpec>) return gen_eeg(s, duration_s, t0).recording;
        if constexpr (std::is_same_v<S, RespirationSpec>) return gen_respiration(s, duration_s, t0).recording;
        if constexpr (std::is_same_v<S, EdaSpec>) return gen_eda(s, duration_s, t0);
      },
      g.spec);
}

}  // namespace tobe::synth
