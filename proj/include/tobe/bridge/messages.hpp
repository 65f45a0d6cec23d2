#pragma once

#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "tobe/session/session.hpp"

namespace tobe::bridge {

// Dashboard protocol: one JSON object per WebSocket text frame, with a
// "type" discriminator.
//
// core -> dashboard
//   metric   {t, user_id, metric_id, raw, normalized}
//   render   {t, user_id, frame: {config_version, items: [...]}}
//   protocol {t, phase_id}
//   gauge    {t, level, direction}
//   beat     {t, user_id}
//   blink    {t, user_id, peak_amplitude}
//   status   {t, user_id?, state, source?, reason?}
//   ack      {t, correlation_id, ok, error? | data?}
//
// dashboard -> core
//   bind_request        {correlation_id, user_id, metric_id, anchor_id, timeline_id, mode, duration_s?}
//   timeline_upload     {correlation_id, user_id, timeline_id, sprite, samples: [{t, sx, sy, rot, tx, ty}]}
//   calibration_command {correlation_id, user_id, metric_id, normalizer: {kind, ...} | belt: [exhale, inhale]}
//   session_command     {correlation_id, action: start | pause | stop}

using json = nlohmann::ordered_json;

/// The dashboard message for a session event, if the dashboard cares.
inline std::optional<json> to_message(const session::SessionEvent& e) {
  json m;
  m["type"] = e.kind;
  m["t"] = e.t;
  if (e.kind == "metric") {
    m["user_id"] = e.user_id;
    m["metric_id"] = e.payload.at("metric_id");
    m["raw"] = e.payload.at("raw");
    m["normalized"] = e.payload.at("normalized");
  } else if (e.kind == "render") {
    m["user_id"] = e.user_id;
    m["frame"] = e.payload;
  } else if (e.kind == "protocol") {
    m["phase_id"] = e.payload.at("phase_id");
  } else if (e.kind == "gauge") {
    m["level"] = e.payload.at("level");
    m["direction"] = e.payload.at("direction");
  } else if (e.kind == "beat") {
    m["user_id"] = e.user_id;
  } else if (e.kind == "blink") {
    m["user_id"] = e.user_id;
    m["peak_amplitude"] = e.payload.at("peak_amplitude");
  } else if (e.kind == "degraded" || e.kind == "recovered" || e.kind == "session") {
    m["type"] = "status";
    if (!e.user_id.empty()) m["user_id"] = e.user_id;
    m["state"] = e.kind == "session" ? e.payload.at("state") : json(e.kind);
    for (const char* k : {"source", "reason"})
      if (e.payload.contains(k)) m[k] = e.payload.at(k);
  } else {
    return std::nullopt;
  }
  return m;
}

inline json ack(double t, const json& correlation_id, const session::CommandResult& r) {
  json m{{"type", "ack"}, {"t", t}, {"correlation_id", correlation_id}, {"ok", r.ok}};
  if (r.ok) m["data"] = r.data;
  else m["error"] = r.error;
  return m;
}

namespace detail {

class Fields {
 public:
  Fields(const json& j, std::string type) : j_(j), type_(std::move(type)) {}

  const json& at(const std::string& key) const {
    require_config(j_.contains(key), type_ + ": missing field " + key);
    return j_.at(key);
  }
  std::string str(const std::string& key) const {
    const auto& v = at(key);
    require_config(v.is_string(), type_ + ": field " + key + " must be a string");
    return v.get<std::string>();
  }
  double num(const std::string& key) const {
    const auto& v = at(key);
    require_config(v.is_number(), type_ + ": field " + key + " must be a number");
    return v.get<double>();
  }
  bool has(const std::string& key) const { return j_.contains(key) && !j_.at(key).is_null(); }
  void only(std::initializer_list<const char*> keys) const {
    for (const auto& [k, v] : j_.items()) {
      bool known = false;
      for (const char* allowed : keys) known = known || k == allowed;
      require_config(known, type_ + ": unknown field " + k);
    }
  }

 private:
  const json& j_;
  std::string type_;
};

inline MetricId metric_field(const Fields& f, const std::string& key) {
  const auto s = f.str(key);
  const auto m = parse_metric(s);
  require_config(m.has_value(), "unknown metric '" + s + "'");
  return *m;
}

}  // namespace detail

/// A control message from the dashboard, with the id to answer to.
struct Control {
  json correlation_id;
  session::Command command;
};

/// Parses a dashboard control message. Throws ConfigError naming the problem;
/// `correlation_id` is filled in as soon as it has been read so the error
/// can still be acknowledged.
inline Control parse_control(const std::string& text, json& correlation_id) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error&) {
    throw ConfigError("control message is not valid JSON");
  }
  require_config(j.is_object(), "control message must be a JSON object");
  if (j.contains("correlation_id")) correlation_id = j["correlation_id"];
  require_config(j.contains("type") && j["type"].is_string(), "control message needs a string field type");
  const std::string type = j["type"];
  detail::Fields f(j, type);
  require_config(f.has("correlation_id"), type + ": missing field correlation_id");
  Control c{correlation_id, {}};

  if (type == "bind_request") {
    f.only({"type", "correlation_id", "user_id", "metric_id", "anchor_id", "timeline_id", "mode", "duration_s"});
    session::BindRequest b;
    b.user_id = f.str("user_id");
    b.metric = f.str("metric_id");
    b.anchor = f.str("anchor_id");
    b.timeline = f.str("timeline_id");
    const auto mode = f.has("mode") ? f.str("mode") : std::string("CONTINUOUS");
    require_config(mode == "CONTINUOUS" || mode == "PERIODIC", type + ": mode must be CONTINUOUS or PERIODIC");
    b.mode = mode == "CONTINUOUS" ? feedback::BindingMode::CONTINUOUS : feedback::BindingMode::PERIODIC;
    if (f.has("duration_s")) b.duration_s = f.num("duration_s");
    c.command = b;
  } else if (type == "timeline_upload") {
    f.only({"type", "correlation_id", "user_id", "timeline_id", "sprite", "samples"});
    session::TimelineUpload u;
    u.user_id = f.str("user_id");
    u.timeline_id = f.str("timeline_id");
    u.sprite = f.str("sprite");
    const auto& samples = f.at("samples");
    require_config(samples.is_array(), type + ": field samples must be an array");
    for (std::size_t i = 0; i < samples.size(); ++i) {
      detail::Fields s(samples[i], type + ".samples[" + std::to_string(i) + "]");
      require_config(samples[i].is_object(), type + ": samples[" + std::to_string(i) + "] must be an object");
      s.only({"t", "sx", "sy", "rot", "tx", "ty"});
      u.samples.push_back({s.num("t"), {s.num("sx"), s.num("sy"), s.num("rot"), s.num("tx"), s.num("ty")}});
    }
    c.command = std::move(u);
  } else if (type == "calibration_command") {
    f.only({"type", "correlation_id", "user_id", "metric_id", "normalizer", "belt"});
    session::CalibrationCommand cal;
    cal.user_id = f.str("user_id");
    cal.metric = detail::metric_field(f, "metric_id");
    if (f.has("normalizer")) {
      const auto& n = f.at("normalizer");
      require_config(n.is_object(), type + ": field normalizer must be an object");
      detail::Fields nf(n, type + ".normalizer");
      const auto kind = nf.str("kind");
      if (kind == "fixed") {
        nf.only({"kind", "min", "max"});
        require_config(nf.num("min") < nf.num("max"), type + ".normalizer: min must be < max");
        cal.normalizer = signal::Normalizer::fixed(nf.num("min"), nf.num("max"));
      } else if (kind == "rolling") {
        nf.only({"kind", "window_s", "margin"});
        cal.normalizer = signal::Normalizer::rolling(nf.has("window_s") ? nf.num("window_s") : 60.0,
                                                     nf.has("margin") ? nf.num("margin") : 0.05);
      } else if (kind == "logistic") {
        nf.only({"kind", "center", "slope"});
        cal.normalizer = signal::Normalizer::logistic(nf.num("center"), nf.num("slope"));
      } else {
        throw ConfigError(type + ".normalizer: kind must be fixed, rolling or logistic");
      }
    }
    if (f.has("belt")) {
      const auto& b = f.at("belt");
      require_config(b.is_array() && b.size() == 2 && b[0].is_number() && b[1].is_number(),
                     type + ": field belt must be [exhale, inhale]");
      cal.belt = std::pair{b[0].get<double>(), b[1].get<double>()};
    }
    c.command = std::move(cal);
  } else if (type == "session_command") {
    f.only({"type", "correlation_id", "action"});
    const auto action = f.str("action");
    session::SessionCommand sc;
    if (action == "start") sc.action = session::SessionCommand::Action::START;
    else if (action == "pause") sc.action = session::SessionCommand::Action::PAUSE;
    else if (action == "stop") sc.action = session::SessionCommand::Action::STOP;
    else throw ConfigError(type + ": action must be start, pause or stop");
    c.command = sc;
  } else {
    throw ConfigError("unknown control message type '" + type + "'");
  }
  return c;
}

}  // namespace tobe::bridge
