#include <atomic>
#include <csignal>
#include <fstream>
#include <iostream>
#include <thread>

#include <CLI11.hpp>

#include "tobe/bridge/server.hpp"
#include "tobe/session/session.hpp"

namespace {

using namespace tobe;

constexpr int kOk = 0;
constexpr int kRuntimeFailure = 1;
constexpr int kUsage = 2;
constexpr int kInterrupted = 130;

std::atomic<bool> g_interrupted{false};

extern "C" void on_signal(int) { g_interrupted = true; }

void install_signal_handlers() {
  struct sigaction sa {};
  sa.sa_handler = on_signal;
  sigemptyset(&sa.sa_mask);
  sigaction(SIGINT, &sa, nullptr);
  sigaction(SIGTERM, &sa, nullptr);
  std::signal(SIGPIPE, SIG_IGN);
}

void sleep_ms(int ms) { std::this_thread::sleep_for(std::chrono::milliseconds(ms)); }

// Recording-format rows (header, then t,v1,v2,...) on an arbitrary stream.
class CsvSink {
 public:
  CsvSink(std::ostream& out, const transport::StreamMeta& meta) : out_(out) {
    out_ << synth::recording_header(meta) << '\n';
  }

  std::size_t write(const transport::SampleChunk& c) {
    std::string line;
    for (std::size_t i = 0; i < c.n_samples(); ++i) {
      line = synth::detail::format_number(c.timestamps[i]);
      for (float v : c.row(i)) {
        line += ',';
        line += synth::detail::format_number(v);
      }
      out_ << line << '\n';
    }
    out_.flush();
    return c.n_samples();
  }

 private:
  std::ostream& out_;
};

std::string describe(const transport::StreamMeta& m) {
  return "'" + m.name + "' (" + std::string(to_string(m.modality)) + ", " + std::to_string(m.n_channels()) +
         " ch @ " + synth::detail::format_number(m.nominal_rate) + " Hz, source " + m.source_id + ")";
}

// Publishes a source as a network stream, released in real time. Sample times
// are moved onto this host's clock so inlets can map them with the clock offset.
int stream_source(session::Source& src, std::optional<double> duration_s, double speed) {
  transport::OutletOptions opts;
  opts.discovery_port = transport::discovery_port_from_env();
  transport::Outlet outlet(src.meta(), opts);
  std::cerr << "streaming " << describe(src.meta()) << " on port " << outlet.port() << '\n';
  src.start(0.0);
  const double start = local_clock();
  for (;;) {
    if (g_interrupted) break;
    double until = (local_clock() - start) * speed;
    const bool last = duration_s && until >= *duration_s;
    if (last) until = *duration_s;
    for (auto& c : src.poll(until)) {
      for (auto& t : c.timestamps) t = start + t / speed;
      outlet.push_chunk(c);
    }
    if (last || src.exhausted()) break;
    sleep_ms(10);
  }
  outlet.flush(2.0);
  return g_interrupted ? kInterrupted : kOk;
}

std::optional<transport::StreamInfo> find_stream(const std::string& name, double timeout_s) {
  transport::StreamFilter f;
  f.name = name;
  auto found = transport::resolve_stream_infos(f, timeout_s, transport::discovery_port_from_env(), true);
  if (found.empty()) return std::nullopt;
  return found.front();
}

// Pulls a named stream into `sink` until the duration passes or the user interrupts.
int drain_stream(const std::string& name, double timeout_s, std::optional<double> duration_s,
                 const std::function<void(const transport::StreamMeta&)>& open,
                 const std::function<void(const transport::SampleChunk&)>& sink) {
  const auto info = find_stream(name, timeout_s);
  if (!info) {
    std::cerr << "error: no stream named '" << name << "' found within " << timeout_s << " s\n";
    return kRuntimeFailure;
  }
  transport::InletOptions opts;
  opts.discovery_port = transport::discovery_port_from_env();
  transport::Inlet inlet(*info, opts);
  open(inlet.meta());
  const double start = local_clock();
  std::optional<double> first_t;
  while (!g_interrupted) {
    if (duration_s && local_clock() - start >= *duration_s) break;
    if (auto c = inlet.pull_chunk(0.05)) {
      if (duration_s) {
        // keep only the requested span of the stream, counted from its first sample
        if (!first_t) first_t = c->timestamps.front();
        transport::SampleChunk kept(c->n_channels);
        for (std::size_t i = 0; i < c->n_samples(); ++i)
          if (c->timestamps[i] < *first_t + *duration_s) kept.push_row(c->timestamps[i], c->row(i));
        if (!kept.empty()) sink(kept);
      } else {
        sink(*c);
      }
    } else if (!inlet.connected()) {
      std::cerr << "error: stream '" << name << "' disconnected\n";
      return kRuntimeFailure;
    }
  }
  return g_interrupted ? kInterrupted : kOk;
}

// --- synth ---------------------------------------------------------------

struct SynthArgs {
  std::string spec;
  std::string out;
  bool stream = false;
  std::optional<double> duration;
};

int cmd_synth(const SynthArgs& a) {
  const auto g = synth::load_generator(a.spec);
  const auto duration = a.duration ? a.duration : g.duration_s;
  if (a.duration) require_config(*a.duration > 0.0, "--duration must be positive");
  if (a.stream) {
    auto src = session::generator_source(g, duration);
    return stream_source(*src, duration, 1.0);
  }
  require_config(duration.has_value(), a.spec + ": no duration; set duration_s in the spec or pass --duration");
  const auto rec = synth::generate(g, *duration);
  if (!a.out.empty()) {
    synth::record_csv(a.out, rec);
    std::cerr << "wrote " << rec.n_samples() << " samples of " << describe(rec.meta) << " to " << a.out << '\n';
  } else {
    CsvSink sink(std::cout, rec.meta);
    for (const auto& c : rec.chunks) sink.write(c);
  }
  return kOk;
}

// --- run -----------------------------------------------------------------

struct RunArgs {
  std::string config;
  std::optional<std::uint16_t> bridge;
  std::string bridge_address = "0.0.0.0";
  bool replay_clock = false;
  bool paused = false;
  double speed = 1.0;
  std::string log;
};

int cmd_run(const RunArgs& a) {
  auto cfg = session::load_session(a.config);
  session::SessionOptions opts;
  opts.start_paused = a.paused;
  opts.discovery_port = transport::discovery_port_from_env();
  std::unique_ptr<session::Clock> clock;
  if (a.replay_clock) clock = std::make_unique<session::SimulatedClock>();
  else clock = std::make_unique<session::WallClock>(a.speed);
  session::Session s(std::move(cfg), std::move(clock), session::make_source, opts);

  std::ofstream file;
  if (!a.log.empty()) {
    file.open(a.log);
    require_config(file.good(), "cannot open '" + a.log + "' for writing");
  }
  std::ostream& log = a.log.empty() ? std::cout : file;
  s.set_log(log);

  std::unique_ptr<bridge::BridgeServer> server;
  if (a.bridge) {
    server = std::make_unique<bridge::BridgeServer>(
        *a.bridge, [&s](session::Command c, session::Reply r) { s.post(std::move(c), std::move(r)); },
        a.bridge_address);
    s.add_listener([srv = server.get()](const session::SessionEvent& e) { srv->publish(e); });
    std::cerr << "bridge listening on ws://" << a.bridge_address << ":" << server->port() << bridge::BridgeServer::kPath
              << '\n';
  }

  std::atomic<bool> done{false};
  std::thread watcher([&] {
    while (!done) {
      if (g_interrupted) {
        s.stop();
        break;
      }
      sleep_ms(20);
    }
  });
  session::SessionSummary summary;
  try {
    summary = s.run();
  } catch (...) {
    done = true;
    watcher.join();
    throw;
  }
  done = true;
  watcher.join();
  log.flush();

  if (server) {
    // let the final status reach connected dashboards
    sleep_ms(200);
    server->stop();
  }
  std::cerr << "session " << (summary.completed ? "completed" : "stopped") << " at t="
            << synth::detail::format_number(summary.end_t) << " s, " << summary.events << " events\n";
  return g_interrupted ? kInterrupted : kOk;
}

// --- streams / record / replay --------------------------------------------

int cmd_streams_list(double timeout_s) {
  const auto found = transport::resolve_streams({}, timeout_s, transport::discovery_port_from_env());
  for (const auto& m : found) std::cout << transport::meta_to_json(m).dump() << '\n';
  return kOk;
}

int cmd_streams_dump(const std::string& name, double timeout_s, std::optional<double> duration_s) {
  std::optional<CsvSink> sink;
  return drain_stream(
      name, timeout_s, duration_s, [&](const transport::StreamMeta& m) { sink.emplace(std::cout, m); },
      [&](const transport::SampleChunk& c) { sink->write(c); });
}

int cmd_record(const std::string& name, const std::string& path, double timeout_s, std::optional<double> duration_s) {
  std::optional<synth::RecordingWriter> writer;
  std::size_t rows = 0;
  const int rc = drain_stream(
      name, timeout_s, duration_s, [&](const transport::StreamMeta& m) { writer.emplace(path, m); },
      [&](const transport::SampleChunk& c) {
        writer->write(c);
        writer->flush();
        rows += c.n_samples();
      });
  if (writer) std::cerr << "recorded " << rows << " samples to " << path << '\n';
  return rc;
}

int cmd_replay(const std::string& path, double speed, bool stream) {
  if (stream) {
    require_config(speed > 0.0, "--speed must be positive when streaming");
    auto src = session::recording_source(path);
    return stream_source(*src, std::nullopt, speed);
  }
  synth::Replayer r(path, speed);
  CsvSink sink(std::cout, r.meta());
  while (!g_interrupted) {
    auto c = r.next();
    if (!c) break;
    sink.write(*c);
  }
  return g_interrupted ? kInterrupted : kOk;
}

}  // namespace

int main(int argc, char** argv) {
  std::ios::sync_with_stdio(false);
  CLI::App app{"tobe: physiological signals to avatar feedback"};
  app.require_subcommand(1);

  SynthArgs synth_args;
  auto* synth = app.add_subcommand("synth", "generate synthetic signals from a spec file");
  synth->add_option("spec", synth_args.spec, "generator spec (YAML or JSON)")->required();
  auto* out = synth->add_option("--out", synth_args.out, "write a recording CSV instead of printing it");
  synth->add_flag("--stream", synth_args.stream, "publish as a network stream in real time")->excludes(out);
  synth->add_option("--duration", synth_args.duration, "seconds to generate (default: the spec's duration_s)");

  RunArgs run_args;
  auto* run = app.add_subcommand("run", "run a session");
  run->add_option("config", run_args.config, "session config (YAML or JSON)")->required();
  run->add_option("--bridge", run_args.bridge, "serve the dashboard WebSocket on this port (0 picks one)");
  run->add_option("--bridge-address", run_args.bridge_address, "address the bridge listens on")->capture_default_str();
  run->add_flag("--replay-clock", run_args.replay_clock, "simulated clock: run as fast as the pipelines allow");
  run->add_flag("--paused", run_args.paused, "wait for a start command from the dashboard");
  run->add_option("--speed", run_args.speed, "wall clock speed-up")->capture_default_str();
  run->add_option("--log", run_args.log, "event log file (default: standard output)");

  double timeout_s = 2.0;
  std::optional<double> duration_s;
  std::string stream_name;
  auto* streams = app.add_subcommand("streams", "inspect streams on the network");
  streams->require_subcommand(1);
  auto* list = streams->add_subcommand("list", "print every advertised stream as a JSON line");
  list->add_option("--timeout", timeout_s, "seconds to listen for beacons")->capture_default_str();
  auto* dump = streams->add_subcommand("dump", "print a stream's samples as CSV until interrupted");
  dump->add_option("name", stream_name, "stream name")->required();
  dump->add_option("--timeout", timeout_s, "seconds to look for the stream")->capture_default_str();
  dump->add_option("--duration", duration_s, "stop after this many seconds of samples");

  std::string record_path;
  auto* record = app.add_subcommand("record", "save a stream to a recording CSV");
  record->add_option("stream", stream_name, "stream name")->required();
  record->add_option("file", record_path, "output file")->required();
  record->add_option("--timeout", timeout_s, "seconds to look for the stream")->capture_default_str();
  record->add_option("--duration", duration_s, "stop after this many seconds of samples");

  std::string replay_path;
  double speed = 1.0;
  bool replay_stream = false;
  auto* replay = app.add_subcommand("replay", "play a recording back in real time");
  replay->add_option("file", replay_path, "recording CSV")->required();
  replay->add_option("--speed", speed, "playback speed; 0 prints without pacing")->capture_default_str();
  replay->add_flag("--stream", replay_stream, "publish as a network stream instead of printing");

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  install_signal_handlers();
  try {
    if (synth->parsed()) return cmd_synth(synth_args);
    if (run->parsed()) return cmd_run(run_args);
    if (list->parsed()) return cmd_streams_list(timeout_s);
    if (dump->parsed()) return cmd_streams_dump(stream_name, timeout_s, duration_s);
    if (record->parsed()) return cmd_record(stream_name, record_path, timeout_s, duration_s);
    if (replay->parsed()) return cmd_replay(replay_path, speed, replay_stream);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kRuntimeFailure;
  }
  return kUsage;
}
