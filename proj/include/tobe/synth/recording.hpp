#pragma once

#include <charconv>
#include <chrono>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <thread>
#include <vector>

#include "tobe/synth/common.hpp"

namespace tobe::synth {

// Recording file: UTF-8 CSV. Line 1:
//   # tobe-recording v1 name=<..> modality=<..> rate=<..> channels=<a;b;c> unit=<..>
// then one "timestamp,ch1,...,chN" row per sample. Numbers use the shortest
// round-trip representation (<= 9 significant digits for samples).

namespace detail {

template <typename T>
std::string format_number(T v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

template <typename T>
bool parse_number(std::string_view s, T& out) {
  if (s.empty()) return false;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), out);
  return res.ec == std::errc{} && res.ptr == s.data() + s.size();
}

inline void check_token(const std::string& v, const char* what) {
  require_config(!v.empty() && v.find_first_of(" \t\r\n;=,") == std::string::npos,
                 std::string("recording ") + what + " '" + v + "' must be non-empty without spaces, ';', '=' or ','");
}

}  // namespace detail

inline std::string recording_header(const StreamMeta& meta) {
  detail::check_token(meta.name, "name");
  detail::check_token(meta.unit, "unit");
  std::string channels;
  for (std::size_t i = 0; i < meta.channel_labels.size(); ++i) {
    detail::check_token(meta.channel_labels[i], "channel label");
    if (i) channels += ';';
    channels += meta.channel_labels[i];
  }
  return "# tobe-recording v1 name=" + meta.name + " modality=" + std::string(to_string(meta.modality)) +
         " rate=" + detail::format_number(meta.nominal_rate) + " channels=" + channels +
         " unit=" + meta.unit;
}

inline StreamMeta parse_recording_header(const std::string& line) {
  std::istringstream in(line);
  std::string hash, magic, version;
  in >> hash >> magic >> version;
  require_config(hash == "#" && magic == "tobe-recording" && version == "v1",
                 "line 1: not a tobe-recording v1 header");
  StreamMeta meta;
  bool have_name = false, have_mod = false, have_rate = false, have_ch = false, have_unit = false;
  for (std::string tok; in >> tok;) {
    const auto eq = tok.find('=');
    require_config(eq != std::string::npos, "line 1: malformed header field '" + tok + "'");
    const std::string key = tok.substr(0, eq), value = tok.substr(eq + 1);
    if (key == "name") {
      meta.name = value;
      have_name = true;
    } else if (key == "modality") {
      const auto m = parse_modality(value);
      require_config(m.has_value(), "line 1: unknown modality '" + value + "'");
      meta.modality = *m;
      have_mod = true;
    } else if (key == "rate") {
      require_config(detail::parse_number(value, meta.nominal_rate), "line 1: bad rate '" + value + "'");
      have_rate = true;
    } else if (key == "channels") {
      std::string label;
      std::istringstream ls(value);
      while (std::getline(ls, label, ';')) meta.channel_labels.push_back(label);
      have_ch = true;
    } else if (key == "unit") {
      meta.unit = value;
      have_unit = true;
    } else {
      throw ConfigError("line 1: unknown header field '" + key + "'");
    }
  }
  require_config(have_name && have_mod && have_rate && have_ch && have_unit,
                 "line 1: header is missing a field");
  meta.source_id = "recording:" + meta.name;
  meta.validate();
  return meta;
}

/// Appends chunks to a recording file as they arrive.
class RecordingWriter {
 public:
  RecordingWriter(const std::string& path, const StreamMeta& meta)
      : out_(path), n_channels_(meta.n_channels()) {
    meta.validate();
    require_config(out_.good(), "cannot open '" + path + "' for writing");
    out_ << recording_header(meta) << '\n';
  }

  void write(const SampleChunk& chunk) {
    require(chunk.n_channels == n_channels_, "chunk channel count does not match the recording");
    std::string line;
    for (std::size_t i = 0; i < chunk.n_samples(); ++i) {
      line = detail::format_number(chunk.timestamps[i]);
      for (float v : chunk.row(i)) {
        line += ',';
        line += detail::format_number(v);
      }
      out_ << line << '\n';
    }
  }

  void flush() { out_.flush(); }

 private:
  std::ofstream out_;
  std::size_t n_channels_;
};

inline void record_csv(const std::string& path, const Recording& rec) {
  RecordingWriter w(path, rec.meta);
  for (const auto& c : rec.chunks) w.write(c);
}

/// Streams rows of a recording file, validating as it goes. Errors name the
/// offending line.
class RecordingReader {
 public:
  explicit RecordingReader(const std::string& path) : in_(path) {
    require_config(in_.good(), "cannot open recording '" + path + "'");
    std::string header;
    require_config(static_cast<bool>(std::getline(in_, header)), "line 1: empty recording file");
    meta_ = parse_recording_header(header);
    line_no_ = 1;
  }

  const StreamMeta& meta() const { return meta_; }

  /// Up to `max_rows` rows as one chunk; nullopt at end of file.
  std::optional<SampleChunk> next(std::size_t max_rows) {
    SampleChunk chunk(meta_.n_channels());
    std::string line;
    std::vector<float> row(meta_.n_channels());
    while (chunk.n_samples() < max_rows && std::getline(in_, line)) {
      ++line_no_;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty()) continue;
      const std::string where = "line " + std::to_string(line_no_) + ": ";
      std::string_view rest(line);
      auto field = [&](std::size_t idx) {
        const auto comma = rest.find(',');
        const auto f = rest.substr(0, comma);
        rest = comma == std::string_view::npos ? std::string_view{} : rest.substr(comma + 1);
        if (comma == std::string_view::npos && idx < meta_.n_channels())
          throw ConfigError(where + "expected " + std::to_string(meta_.n_channels() + 1) + " columns");
        return f;
      };
      double t = 0.0;
      require_config(detail::parse_number(field(0), t) && std::isfinite(t), where + "bad timestamp");
      for (std::size_t ch = 0; ch < meta_.n_channels(); ++ch) {
        const auto f = field(ch + 1);
        require_config(detail::parse_number(f, row[ch]) && std::isfinite(row[ch]),
                       where + "bad sample in column " + std::to_string(ch + 2));
      }
      require_config(rest.empty(), where + "expected " + std::to_string(meta_.n_channels() + 1) + " columns");
      require_config(!last_t_ || t > *last_t_, where + "timestamp not increasing");
      last_t_ = t;
      chunk.push_row(t, row);
    }
    if (chunk.empty()) return std::nullopt;
    return chunk;
  }

 private:
  std::ifstream in_;
  StreamMeta meta_;
  std::size_t line_no_ = 0;
  std::optional<double> last_t_;
};

inline Recording read_recording(const std::string& path, std::size_t chunk_rows = 0) {
  RecordingReader reader(path);
  Recording rec;
  rec.meta = reader.meta();
  const std::size_t rows = chunk_rows ? chunk_rows : default_chunk(rec.meta.nominal_rate > 0 ? rec.meta.nominal_rate : 10.0);
  while (auto c = reader.next(rows)) rec.chunks.push_back(std::move(*c));
  return rec;
}

/// Replays a recording with wall-clock pacing: a chunk is released once
/// (last timestamp - first timestamp of the file) / speed has elapsed.
/// speed 0 replays as fast as possible.
class Replayer {
 public:
  Replayer(const std::string& path, double speed, std::size_t chunk_rows = 0)
      : reader_(path), speed_(speed),
        rows_(chunk_rows ? chunk_rows
                         : default_chunk(reader_.meta().nominal_rate > 0 ? reader_.meta().nominal_rate : 10.0)) {
    require_config(speed >= 0.0, "replay speed must be >= 0");
  }

  const StreamMeta& meta() const { return reader_.meta(); }

  std::optional<SampleChunk> next() {
    auto chunk = reader_.next(rows_);
    if (!chunk) return chunk;
    if (!file_t0_) {
      file_t0_ = chunk->timestamps.front();
      wall_t0_ = std::chrono::steady_clock::now();
    }
    if (speed_ > 0.0) {
      const double due = (chunk->timestamps.back() - *file_t0_) / speed_;
      std::this_thread::sleep_until(wall_t0_ + std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                                                   std::chrono::duration<double>(due)));
    }
    return chunk;
  }

 private:
  RecordingReader reader_;
  double speed_;
  std::size_t rows_;
  std::optional<double> file_t0_;
  std::chrono::steady_clock::time_point wall_t0_;
};

}  // namespace tobe::synth
