// emgwire: command-line front end for the device simulator, host, and
// validation runs.

#include <CLI11.hpp>

#include <pthread.h>
#include <signal.h>
#include <unistd.h>

#include <atomic>
#include <csignal>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>

#include "emgwire/analysis.hpp"
#include "emgwire/bridge.hpp"
#include "emgwire/codec.hpp"
#include "emgwire/device.hpp"
#include "emgwire/errors.hpp"
#include "emgwire/host.hpp"
#include "emgwire/sources.hpp"
#include "emgwire/transport.hpp"

namespace {

using namespace emgwire;

constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

// SIGINT/SIGTERM are blocked in every thread and collected by one waiter,
// which sets `g_stop` and runs the registered interrupt hook.
std::atomic<bool> g_stop{false};
std::function<void()> g_on_signal;
std::mutex g_signal_mu;

void set_signal_hook(std::function<void()> hook) {
  std::lock_guard lock(g_signal_mu);
  g_on_signal = std::move(hook);
}

void start_signal_thread() {
  sigset_t set;
  sigemptyset(&set);
  sigaddset(&set, SIGINT);
  sigaddset(&set, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &set, nullptr);
  std::signal(SIGPIPE, SIG_IGN);
  std::thread([set] {
    int sig = 0;
    while (sigwait(&set, &sig) == 0) {
      g_stop = true;
      std::lock_guard lock(g_signal_mu);
      if (g_on_signal) g_on_signal();
    }
  }).detach();
}

const char* error_kind(const Error& e) {
  if (dynamic_cast<const ConfigError*>(&e)) return "ConfigError";
  if (dynamic_cast<const TransportError*>(&e)) return "TransportError";
  if (dynamic_cast<const FileError*>(&e)) return "FileError";
  if (dynamic_cast<const FormatError*>(&e)) return "FormatError";
  if (dynamic_cast<const RangeError*>(&e)) return "RangeError";
  if (dynamic_cast<const BadMarker*>(&e)) return "BadMarker";
  if (dynamic_cast<const SyncLost*>(&e)) return "SyncLost";
  return "Error";
}

void write_report(const ValidationReport& r, const std::string& path) {
  if (path.empty()) return;
  std::ofstream out(path);
  if (!out) throw FileError("cannot open report " + path);
  out << r.to_key_values();
  if (!out) throw FileError("failed writing report " + path);
}

// --- throughput ---------------------------------------------------------

struct ThroughputArgs {
  double baud = 115200.0;
  int frame_bits = 0;
  int frame_bytes = 0;
};

int run_throughput(const ThroughputArgs& a) {
  const int bits = a.frame_bits > 0 ? a.frame_bits
                                    : frame_bits_for_bytes(a.frame_bytes > 0 ? a.frame_bytes : static_cast<int>(kFrameBytes));
  std::printf("%.3f Hz\n", throughput(a.baud, bits));
  return 0;
}

// --- device -------------------------------------------------------------

struct DeviceArgs {
  std::string source = "gesture";
  std::string transport = "stdout";
  DeviceConfig cfg;
  double duration = 0.0;
};

int run_device_cmd(DeviceArgs a) {
  if (a.duration > 0.0) a.cfg.duration_s = a.duration;
  a.cfg.validate();
  auto source = make_source(parse_source_spec(a.source), a.cfg.internal_rate(), a.cfg.seed);

  std::unique_ptr<ByteSink> sink;
  if (a.transport == "stdout" || a.transport == "-") {
    if (isatty(STDOUT_FILENO)) throw ConfigError("refusing to write binary frames to a terminal; pipe or redirect stdout");
    sink = std::make_unique<FdStream>(STDOUT_FILENO, false);
  } else if (a.transport.rfind("tcp-listen:", 0) == 0) {
    TcpListener listener(parse_endpoint(a.transport.substr(11)));
    std::fprintf(stderr, "device: waiting for host on port %u\n", listener.port());
    sink = listener.accept();
  } else {
    sink = tcp_connect(parse_endpoint(a.transport));
  }

  std::unique_ptr<Clock> clock;
  if (a.cfg.virtual_clock) {
    clock = std::make_unique<VirtualClock>();
  } else {
    clock = std::make_unique<SteadyClock>();
  }
  const auto report = run_device(a.cfg, std::move(source), *sink, *clock, &g_stop);
  std::fprintf(stderr, "device: %llu frames, %llu bytes, %.3f s, %.1f B/s\n",
               static_cast<unsigned long long>(report.frames), static_cast<unsigned long long>(report.bytes),
               report.elapsed_s, report.bytes_per_s());
  if (!report.ok()) throw TransportError(report.error);
  return 0;
}

// --- host ---------------------------------------------------------------

struct HostArgs {
  std::string input = "stdin";
  SessionConfig session;
  std::string output;
  int bridge_port = -1;
  std::string bridge_host = "127.0.0.1";
  std::string panel_dir;
  bool autosave = false;
};

std::unique_ptr<FdStream> open_input(const std::string& input) {
  if (input == "stdin" || input == "-") return std::make_unique<FdStream>(STDIN_FILENO, false);
  if (input.rfind("tcp-listen:", 0) == 0) {
    TcpListener listener(parse_endpoint(input.substr(11)));
    std::fprintf(stderr, "host: waiting for device on port %u\n", listener.port());
    return listener.accept();
  }
  return tcp_connect(parse_endpoint(input));
}

int run_host_cmd(HostArgs a) {
  if (!a.output.empty()) a.session.output = a.output;
  a.session.validate();
  std::unique_ptr<FdStream> input = open_input(a.input);
  FdStream* raw = input.get();
  set_signal_hook([raw] { raw->interrupt(); });

  if (a.bridge_port < 0) {
    const auto result = run_session(a.session, *input, &g_stop);
    set_signal_hook({});
    std::fputs(result.summary.to_text().c_str(), stderr);
    if (result.summary.stop_reason == "sync lost") throw SyncLost(result.summary.error);
    if (!result.summary.error.empty()) throw TransportError(result.summary.error);
    return 0;
  }

  HostServiceConfig cfg;
  cfg.session = a.session;
  cfg.autosave = a.autosave;
  if (!a.output.empty()) cfg.default_save_path = a.output;
  HostService service(cfg, std::move(input));
  std::optional<std::filesystem::path> panel;
  if (!a.panel_dir.empty()) panel = a.panel_dir;
  ControlBridge bridge(service, panel);
  const auto port = bridge.listen(a.bridge_host, static_cast<std::uint16_t>(a.bridge_port));
  std::fprintf(stderr, "host: bridge on http://%s:%u (POST /command, GET /events, GET /status)\n",
               a.bridge_host.c_str(), port);
  service.start();
  while (!g_stop.load() && !service.stream_ended()) std::this_thread::sleep_for(std::chrono::milliseconds(100));
  set_signal_hook({});
  bridge.stop();
  service.shutdown();
  const auto st = service.state();
  std::fprintf(stderr, "host: %s, %llu samples%s%s\n", to_string(st.phase).c_str(),
               static_cast<unsigned long long>(st.samples), st.stop_reason.empty() ? "" : ", ",
               st.stop_reason.c_str());
  return 0;
}

// --- validations --------------------------------------------------------

int print_validation(const ValidationReport& r, const std::string& report_path) {
  std::fputs(r.to_text().c_str(), stdout);
  write_report(r, report_path);
  return r.passed() ? 0 : kExitRuntime;
}

// --- spectrum -----------------------------------------------------------

struct SpectrumArgs {
  std::string input;
  int channel = 1;
  std::size_t nfft = 2048;
  std::string window = "hann";
  std::string output;
};

int run_spectrum_cmd(const SpectrumArgs& a) {
  const auto blocks = read_recording_csv(std::filesystem::path(a.input));
  if (blocks.empty()) throw FormatError("recording " + a.input + " has no samples");
  const auto mv = channel_mv(blocks, static_cast<std::size_t>(a.channel - 1));
  const auto s = spectrum(mv, kHostSampleRate, a.window == "hann" ? Window::hann : Window::rectangular, a.nfft);
  if (a.output.empty() || a.output == "-") {
    s.write_csv(std::cout);
  } else {
    std::ofstream out(a.output);
    if (!out) throw FileError("cannot open " + a.output);
    s.write_csv(out);
  }
  const double total = s.total_power();
  std::fprintf(stderr, "ch%d: %zu samples, %zu segments, peak %.2f Hz, above 400 Hz %.3f %%\n", a.channel,
               mv.size(), s.segments, s.freq_hz[s.peak_bin()],
               total > 0.0 ? 100.0 * s.band_power(400.0, kHostSampleRate / 2.0) / total : 0.0);
  return 0;
}

void add_device_options(CLI::App* cmd, DeviceConfig& cfg) {
  cmd->add_option("--baud", cfg.baud, "Wire rate in bit/s")->envname("EMGWIRE_BAUD")->capture_default_str();
  cmd->add_option("--frame-bits", cfg.frame_bits, "Wire bits per frame incl. UART framing")->capture_default_str();
  cmd->add_option("--sample-rate", cfg.sample_rate, "Output samples per second")->capture_default_str();
  cmd->add_flag("--bypass-filter", cfg.bypass_filter, "Skip the analog band-pass");
  cmd->add_option("--mains", cfg.mains_amplitude, "Injected mains amplitude, volts peak")
      ->envname("EMGWIRE_MAINS")
      ->capture_default_str();
  cmd->add_option("--mains-freq", cfg.mains_freq, "Mains frequency, Hz")->capture_default_str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"emgwire: 8-channel sEMG acquisition pipeline (device simulator, host, validation)"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Show help for every subcommand");
  app.footer(
      "Environment: EMGWIRE_SEED, EMGWIRE_BAUD, EMGWIRE_SOURCE, EMGWIRE_TRANSPORT, EMGWIRE_INPUT, EMGWIRE_MAINS,\n"
      "EMGWIRE_DURATION. Flags override environment, environment overrides defaults.\n"
      "Exit status: 0 success, 1 runtime error or failed validation, 2 usage error.");

  ThroughputArgs tp;
  auto* throughput_cmd = app.add_subcommand("throughput", "Frame rate a link can carry: baud / frame bits");
  throughput_cmd->add_option("--baud", tp.baud, "Wire rate in bit/s")->envname("EMGWIRE_BAUD")->capture_default_str();
  auto* bits_opt = throughput_cmd->add_option("--frame-bits", tp.frame_bits, "Wire bits per frame");
  auto* bytes_opt =
      throughput_cmd->add_option("--frame-bytes", tp.frame_bytes, "Bytes per frame (10 wire bits each), default 11");
  bits_opt->excludes(bytes_opt);

  DeviceArgs dev;
  auto* device_cmd = app.add_subcommand("device", "Run the simulated acquisition device");
  device_cmd
      ->add_option("--source", dev.source, "sine:F,A | sine:F,A1,..,A8 | zero | gesture | replay:PATH[,GAIN]")
      ->envname("EMGWIRE_SOURCE")
      ->capture_default_str();
  device_cmd->add_option("--transport", dev.transport, "stdout | tcp:HOST:PORT | tcp-listen:HOST:PORT")
      ->envname("EMGWIRE_TRANSPORT")
      ->capture_default_str();
  device_cmd->add_option("--duration", dev.duration, "Seconds to run (default: source length or forever)")
      ->envname("EMGWIRE_DURATION");
  device_cmd->add_option("--seed", dev.cfg.seed, "Random seed")->envname("EMGWIRE_SEED")->capture_default_str();
  device_cmd->add_flag("--virtual-clock", dev.cfg.virtual_clock, "Run as fast as the consumer reads");
  add_device_options(device_cmd, dev.cfg);

  HostArgs host;
  auto* host_cmd = app.add_subcommand("host", "Receive, decode and record a device stream");
  host_cmd->add_option("--input", host.input, "stdin | tcp:HOST:PORT | tcp-listen:HOST:PORT")
      ->envname("EMGWIRE_INPUT")
      ->capture_default_str();
  host_cmd->add_option("--duration", host.session.duration_s, "Session length in seconds")
      ->envname("EMGWIRE_DURATION")
      ->capture_default_str();
  host_cmd->add_flag("--notch", host.session.notch_enabled, "Enable the 60 Hz notch");
  host_cmd->add_option("--notch-freq", host.session.notch.f0, "Notch centre, Hz")->capture_default_str();
  host_cmd->add_flag("--record-post-notch", host.session.record_post_notch, "Record notched values when the notch is on");
  host_cmd->add_option("--output,-o", host.output, "Recording CSV (bridge mode: default save path)");
  host_cmd->add_option("--bridge", host.bridge_port, "Serve the control bridge on this port (0 picks one)");
  host_cmd->add_option("--bridge-host", host.bridge_host, "Bridge bind address")->capture_default_str();
  host_cmd->add_option("--panel", host.panel_dir, "Static front-panel directory served at /")->check(CLI::ExistingDirectory);
  host_cmd->add_flag("--autosave", host.autosave, "Bridge mode: save when a session ends");

  SineValidationConfig sine;
  std::string sine_report;
  auto* sine_cmd = app.add_subcommand("validate-sine", "Sine through the full pipeline with the filter bypassed");
  sine_cmd->add_option("--freq", sine.freq_hz, "Hz")->capture_default_str();
  sine_cmd->add_option("--amplitude", sine.amplitude_v, "Volts peak")->capture_default_str();
  sine_cmd->add_option("--duration", sine.duration_s, "Seconds")->capture_default_str();
  sine_cmd->add_option("--seed", sine.seed, "Random seed")->envname("EMGWIRE_SEED")->capture_default_str();
  sine_cmd->add_option("--report", sine_report, "Also write key=value results here");
  sine.virtual_clock = false;
  sine_cmd->add_flag("--virtual-clock", sine.virtual_clock, "Run faster than real time");

  ReplayValidationConfig replay;
  std::string replay_ref, replay_report;
  replay.virtual_clock = false;
  auto* replay_cmd = app.add_subcommand("validate-replay", "Replay a reference through the filtered pipeline");
  replay_cmd->add_option("--reference", replay_ref, "Reference CSV at 1000 SPS (default: synthetic, from --seed)")
      ->check(CLI::ExistingFile);
  replay_cmd->add_option("--seed", replay.seed, "Random seed")->envname("EMGWIRE_SEED")->capture_default_str();
  replay_cmd->add_option("--report", replay_report, "Also write key=value results here");
  replay_cmd->add_flag("--virtual-clock", replay.virtual_clock, "Run faster than real time");

  SpectrumArgs spec;
  auto* spectrum_cmd = app.add_subcommand("spectrum", "Power spectrum of one channel of a recording");
  spectrum_cmd->add_option("input", spec.input, "Recording CSV (t_s,ch1_mV,...)")->required()->check(CLI::ExistingFile);
  spectrum_cmd->add_option("--channel", spec.channel, "1-8")->check(CLI::Range(1, 8))->capture_default_str();
  spectrum_cmd->add_option("--nfft", spec.nfft, "Segment length")->check(CLI::Range(64, 1 << 20))->capture_default_str();
  spectrum_cmd->add_option("--window", spec.window, "hann | rect")
      ->check(CLI::IsMember({"hann", "rect"}))
      ->capture_default_str();
  spectrum_cmd->add_option("--output,-o", spec.output, "CSV destination (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    start_signal_thread();
    if (*throughput_cmd) return run_throughput(tp);
    if (*device_cmd) return run_device_cmd(dev);
    if (*host_cmd) return run_host_cmd(host);
    if (*sine_cmd) return print_validation(validate_sine(sine), sine_report);
    if (*replay_cmd) {
      replay.reference = replay_ref.empty() ? std::make_shared<ReplayData>(synthetic_reference(replay.seed))
                                            : std::make_shared<ReplayData>(load_replay_csv(replay_ref));
      return print_validation(validate_replay(replay), replay_report);
    }
    if (*spectrum_cmd) return run_spectrum_cmd(spec);
  } catch (const Error& e) {
    std::fprintf(stderr, "emgwire: %s: %s\n", error_kind(e), e.what());
    return kExitRuntime;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "emgwire: error: %s\n", e.what());
    return kExitRuntime;
  }
  return kExitUsage;
}
