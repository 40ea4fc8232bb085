#include "emgwire/analysis.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <mutex>
#include <numbers>
#include <random>
#include <sstream>
#include <thread>

#include "emgwire/errors.hpp"

namespace emgwire {

namespace {

constexpr double kPi = std::numbers::pi;
// One window step in mV, the bound on a truncated reconstruction.
constexpr double kStepMv = kWindowStepVolts * 1e3;

// FFTW planning is not thread-safe.
std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

class RealFft {
 public:
  explicit RealFft(std::size_t n) : n_(n) {
    in_ = fftw_alloc_real(n);
    out_ = fftw_alloc_complex(n / 2 + 1);
    std::lock_guard lock(fftw_planner_mutex());
    plan_ = fftw_plan_dft_r2c_1d(static_cast<int>(n), in_, out_, FFTW_ESTIMATE);
  }
  ~RealFft() {
    std::lock_guard lock(fftw_planner_mutex());
    fftw_destroy_plan(plan_);
    fftw_free(in_);
    fftw_free(out_);
  }
  RealFft(const RealFft&) = delete;
  RealFft& operator=(const RealFft&) = delete;

  std::span<double> input() { return {in_, n_}; }
  void execute() { fftw_execute(plan_); }
  double power(std::size_t k) const { return out_[k][0] * out_[k][0] + out_[k][1] * out_[k][1]; }

 private:
  std::size_t n_;
  double* in_ = nullptr;
  fftw_complex* out_ = nullptr;
  fftw_plan plan_ = nullptr;
};

std::vector<double> make_window(Window w, std::size_t n) {
  std::vector<double> win(n, 1.0);
  if (w == Window::hann) {
    // Periodic Hann: exact DFT-bin behaviour for integer-period tones.
    for (std::size_t i = 0; i < n; ++i) win[i] = 0.5 - 0.5 * std::cos(2.0 * kPi * i / static_cast<double>(n));
  }
  return win;
}

std::string fmt(double v, int precision = 6) {
  std::ostringstream s;
  s << std::setprecision(precision) << v;
  return s.str();
}

double peak_abs(std::span<const double> xs) {
  double p = 0.0;
  for (const double x : xs) p = std::max(p, std::abs(x));
  return p;
}

}  // namespace

double mse(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw ConfigError("mse needs equal lengths (" + std::to_string(a.size()) + " vs " + std::to_string(b.size()) + ")");
  }
  if (a.empty()) throw ConfigError("mse needs at least one sample");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    acc += d * d;
  }
  return acc / static_cast<double>(a.size());
}

double attenuation_db(double in_peak, double out_peak) {
  if (!(in_peak > 0.0) || !(out_peak > 0.0)) throw ConfigError("attenuation needs positive peaks");
  return 20.0 * std::log10(in_peak / out_peak);
}

double Spectrum::magnitude_db(std::size_t k) const {
  return 10.0 * std::log10(std::max(power.at(k), 1e-300));
}

double Spectrum::total_power() const {
  double s = 0.0;
  for (const double p : power) s += p;
  return s;
}

double Spectrum::band_power(double lo_hz, double hi_hz) const {
  double s = 0.0;
  for (std::size_t k = 0; k < power.size(); ++k) {
    if (freq_hz[k] >= lo_hz && freq_hz[k] <= hi_hz) s += power[k];
  }
  return s;
}

std::size_t Spectrum::peak_bin() const {
  return static_cast<std::size_t>(std::max_element(power.begin(), power.end()) - power.begin());
}

std::vector<std::size_t> Spectrum::peaks(std::size_t count) const {
  std::vector<std::size_t> idx;
  for (std::size_t k = 0; k < power.size(); ++k) {
    const double left = k > 0 ? power[k - 1] : -1.0;
    const double right = k + 1 < power.size() ? power[k + 1] : -1.0;
    if (power[k] > left && power[k] >= right) idx.push_back(k);
  }
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return power[a] > power[b]; });
  if (idx.size() > count) idx.resize(count);
  return idx;
}

std::size_t Spectrum::bin_of(double f_hz) const {
  const auto k = static_cast<std::size_t>(std::llround(f_hz / resolution()));
  return std::min(k, power.empty() ? 0 : power.size() - 1);
}

void Spectrum::write_csv(std::ostream& out) const {
  out << "freq_hz,magnitude_db\n";
  for (std::size_t k = 0; k < power.size(); ++k) {
    out << fmt(freq_hz[k], 10) << ',' << fmt(magnitude_db(k), 8) << '\n';
  }
}

Spectrum spectrum(std::span<const double> signal, double fs, Window window, std::size_t nfft) {
  if (signal.size() < 64) throw ConfigError("spectrum needs at least 64 samples");
  if (!(fs > 0.0)) throw ConfigError("spectrum sample rate must be positive");
  if (nfft < 64) throw ConfigError("spectrum segment length must be >= 64");
  const std::size_t n = std::min(nfft, signal.size());
  const std::size_t hop = n / 2;
  const auto win = make_window(window, n);
  double win_energy = 0.0;
  for (const double w : win) win_energy += w * w;

  Spectrum out;
  out.fs = fs;
  out.nfft = n;
  const std::size_t bins = n / 2 + 1;
  out.freq_hz.resize(bins);
  out.power.assign(bins, 0.0);
  for (std::size_t k = 0; k < bins; ++k) out.freq_hz[k] = static_cast<double>(k) * fs / static_cast<double>(n);

  RealFft fft(n);
  for (std::size_t start = 0; start + n <= signal.size(); start += hop) {
    auto in = fft.input();
    for (std::size_t i = 0; i < n; ++i) in[i] = signal[start + i] * win[i];
    fft.execute();
    for (std::size_t k = 0; k < bins; ++k) {
      const bool mirrored = k != 0 && !(n % 2 == 0 && k == n / 2);
      out.power[k] += (mirrored ? 2.0 : 1.0) * fft.power(k) / (static_cast<double>(n) * win_energy);
    }
    ++out.segments;
  }
  for (double& p : out.power) p /= static_cast<double>(out.segments);
  return out;
}

bool ValidationReport::passed() const {
  return !checks.empty() && std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.pass; });
}

std::string ValidationReport::to_text() const {
  std::ostringstream out;
  out << "experiment: " << experiment << '\n'
      << "samples: " << samples << '\n'
      << "input_peak_mV: " << fmt(input_peak_mv, 8) << '\n'
      << "output_peak_mV: " << fmt(output_peak_mv, 8) << '\n'
      << "ratio_pct: " << fmt(ratio_pct, 6) << '\n'
      << "attenuation_dB: " << fmt(attenuation_db, 6) << '\n';
  if (mse_raw_mv2) out << "mse_vs_raw_mV2: " << fmt(*mse_raw_mv2, 6) << '\n';
  if (mse_filtered_mv2) out << "mse_vs_filtered_mV2: " << fmt(*mse_filtered_mv2, 6) << '\n';
  if (experiment == "replay") out << "alignment_lag_samples: " << alignment_lag << '\n';
  for (const auto& c : checks) {
    out << (c.pass ? "PASS " : "FAIL ") << c.name;
    if (!c.detail.empty()) out << " (" << c.detail << ')';
    out << '\n';
  }
  for (const auto& n : notes) out << "note: " << n << '\n';
  out << "result: " << (passed() ? "PASS" : "FAIL") << '\n';
  return out.str();
}

std::string ValidationReport::to_key_values() const {
  std::ostringstream out;
  out << "experiment=" << experiment << '\n'
      << "samples=" << samples << '\n'
      << "input_peak_mv=" << fmt(input_peak_mv, 10) << '\n'
      << "output_peak_mv=" << fmt(output_peak_mv, 10) << '\n'
      << "ratio_pct=" << fmt(ratio_pct, 10) << '\n'
      << "attenuation_db=" << fmt(attenuation_db, 10) << '\n';
  if (mse_raw_mv2) out << "mse_raw_mv2=" << fmt(*mse_raw_mv2, 10) << '\n';
  if (mse_filtered_mv2) out << "mse_filtered_mv2=" << fmt(*mse_filtered_mv2, 10) << '\n';
  out << "alignment_lag=" << alignment_lag << '\n';
  for (const auto& c : checks) out << "check." << c.name << '=' << (c.pass ? "pass" : "fail") << '\n';
  out << "passed=" << (passed() ? "true" : "false") << '\n';
  return out.str();
}

PipelineResult run_loopback(const PipelineOptions& options, const SourceSpec& source_spec) {
  options.session.validate();
  DeviceConfig dev = options.device;
  const std::uint64_t frames = options.session.target_samples() + options.extra_frames;
  dev.duration_s = static_cast<double>(frames) / dev.sample_rate;
  auto source = make_source(source_spec, dev.internal_rate(), dev.seed);

  auto [sink, reader] = make_loopback(std::size_t{1} << 16);
  std::atomic<bool> stop{false};
  PipelineResult result;
  std::thread producer([&, sink = std::move(sink), source = std::move(source)]() mutable {
    std::unique_ptr<Clock> clock;
    if (dev.virtual_clock) {
      clock = std::make_unique<VirtualClock>();
    } else {
      clock = std::make_unique<SteadyClock>();
    }
    result.device = run_device(dev, std::move(source), *sink, *clock, &stop);
  });
  try {
    result.host = run_session(options.session, *reader);
  } catch (...) {
    stop = true;
    reader->interrupt();
    producer.join();
    throw;
  }
  // The host has what it needs; the device may be blocked on a full pipe.
  stop = true;
  reader->interrupt();
  producer.join();
  if (result.device.error == "loopback reader closed") result.device.error.clear();
  return result;
}

ValidationReport validate_sine(const SineValidationConfig& cfg) {
  if (!(cfg.amplitude_v >= 0.0) || !(cfg.freq_hz > 0.0)) throw ConfigError("sine validation needs f > 0, A >= 0");
  PipelineOptions opt;
  opt.device.bypass_filter = true;
  opt.device.virtual_clock = cfg.virtual_clock;
  opt.device.seed = cfg.seed;
  opt.session.duration_s = cfg.duration_s;
  const auto run = run_loopback(opt, SineSpec::uniform(cfg.freq_hz, cfg.amplitude_v));
  if (!run.device.ok()) throw TransportError("device failed: " + run.device.error);
  if (!run.host.summary.error.empty()) throw TransportError("host failed: " + run.host.summary.error);

  ValidationReport r;
  r.experiment = "sine";
  r.samples = run.host.recording.size();
  r.input_peak_mv = cfg.amplitude_v * 1e3;
  for (std::size_t ch = 0; ch < kChannels; ++ch) {
    const auto mv = channel_mv(run.host.recording, ch);
    const double p = peak_abs(mv);
    if (ch == 0) r.output_peak_mv = p;
    r.output_peak_mv = std::min(r.output_peak_mv, p);
  }
  if (r.input_peak_mv > 0.0) r.ratio_pct = 100.0 * r.output_peak_mv / r.input_peak_mv;
  if (r.input_peak_mv > 0.0 && r.output_peak_mv > 0.0) {
    r.attenuation_db = attenuation_db(r.input_peak_mv, r.output_peak_mv);
  }

  const double full_scale_mv = kMaxMagnitude * kStepMv;
  const double expected = std::min(r.input_peak_mv, full_scale_mv);
  const double err = std::abs(r.output_peak_mv - expected);
  r.checks.push_back({"peak_within_one_step", err <= 0.03434,
                      "|" + fmt(r.output_peak_mv, 8) + " - " + fmt(expected, 8) + "| = " + fmt(err, 4) + " mV"});
  if (r.samples < opt.session.target_samples()) {
    r.checks.push_back({"complete_recording", false, fmt(static_cast<double>(r.samples)) + " samples"});
  }
  if (r.input_peak_mv >= full_scale_mv) {
    r.checks.push_back({"full_scale_peak_in_band",
                        r.output_peak_mv >= 17.51 && r.output_peak_mv <= 17.58,
                        fmt(r.output_peak_mv, 8) + " mV in [17.51, 17.58]"});
    r.checks.push_back({"ratio_at_least_99pct", r.ratio_pct >= 99.0, fmt(r.ratio_pct, 6) + " %"});
    r.notes.push_back("input exceeds the window full scale; output saturates at 511 steps = " +
                      fmt(full_scale_mv, 8) + " mV");
  }
  return r;
}

std::vector<ChannelVolts> bandpass_reference(const ReplayData& reference, const DeviceConfig& device) {
  DeviceConfig dev = device;
  dev.bypass_filter = false;
  dev.mains_amplitude = 0.0;
  ReplaySpec spec;
  spec.data = std::make_shared<const ReplayData>(reference);
  DeviceSimulator sim(dev, make_source(spec, dev.internal_rate(), dev.seed));
  const auto frames =
      static_cast<std::size_t>(std::llround(reference.duration_s() * dev.sample_rate));
  std::vector<ChannelVolts> out;
  out.reserve(frames);
  for (std::size_t k = 0; k < frames; ++k) {
    sim.next_frame();
    out.push_back(sim.last_analog());
  }
  return out;
}

ValidationReport validate_replay(const ReplayValidationConfig& cfg) {
  if (!cfg.reference || cfg.reference->samples.empty()) throw ConfigError("replay validation needs a reference");
  const ReplayData& ref = *cfg.reference;
  if (std::abs(ref.sample_rate - kHostSampleRate) > 1e-6) {
    throw ConfigError("replay reference must be sampled at 1000 SPS");
  }
  PipelineOptions opt;
  opt.device.bypass_filter = false;
  opt.device.virtual_clock = cfg.virtual_clock;
  opt.device.seed = cfg.seed;
  opt.session.duration_s = static_cast<double>(ref.samples.size()) / kHostSampleRate;
  opt.extra_frames = cfg.max_lag + 16;
  ReplaySpec spec;
  spec.data = cfg.reference;
  const auto run = run_loopback(opt, spec);
  if (!run.device.ok()) throw TransportError("device failed: " + run.device.error);
  if (!run.host.summary.error.empty()) throw TransportError("host failed: " + run.host.summary.error);

  const auto filtered = bandpass_reference(ref, opt.device);
  const auto& rec = run.host.recording;
  const auto settle = static_cast<std::size_t>(std::llround(cfg.settle_s * kHostSampleRate));

  // Frames lost while the host acquires lock shift the recording; recover
  // the shift as the lag that best matches the filtered reference.
  auto error_at = [&](std::size_t lag, const auto& target) {
    double acc = 0.0;
    std::size_t n = 0;
    for (std::size_t i = settle; i < rec.size() && i + lag < target.size(); ++i) {
      for (std::size_t ch = 0; ch < kChannels; ++ch) {
        const double d = (rec[i].ch[ch] - target[i + lag][ch]) * 1e3;
        acc += d * d;
        ++n;
      }
    }
    return n ? acc / static_cast<double>(n) : std::numeric_limits<double>::infinity();
  };
  std::size_t best = 0;
  double best_err = std::numeric_limits<double>::infinity();
  for (std::size_t lag = 0; lag <= cfg.max_lag; ++lag) {
    const double e = error_at(lag, filtered);
    if (e < best_err) {
      best_err = e;
      best = lag;
    }
  }

  ValidationReport r;
  r.experiment = "replay";
  r.samples = rec.size();
  r.alignment_lag = best;
  r.mse_filtered_mv2 = best_err;
  r.mse_raw_mv2 = error_at(best, ref.samples);

  double in_peak = 0.0;
  for (const auto& row : ref.samples)
    for (const double v : row) in_peak = std::max(in_peak, std::abs(v));
  double out_peak = 0.0;
  for (const auto& b : rec)
    for (const double v : b.ch) out_peak = std::max(out_peak, std::abs(v));
  r.input_peak_mv = in_peak * 1e3;
  r.output_peak_mv = out_peak * 1e3;
  if (in_peak > 0.0) r.ratio_pct = 100.0 * out_peak / in_peak;
  if (in_peak > 0.0 && out_peak > 0.0) r.attenuation_db = attenuation_db(in_peak, out_peak);

  const double bound = 1.18e-3;
  r.checks.push_back({"mse_vs_filtered_within_step_bound", *r.mse_filtered_mv2 <= bound,
                      fmt(*r.mse_filtered_mv2, 6) + " <= " + fmt(bound) + " mV^2"});
  if (in_peak > 0.0) {
    r.checks.push_back({"mse_vs_raw_exceeds_filtered", *r.mse_raw_mv2 > *r.mse_filtered_mv2,
                        fmt(*r.mse_raw_mv2, 6) + " > " + fmt(*r.mse_filtered_mv2, 6) + " mV^2"});
  }
  r.notes.push_back("MSE bound is one window step squared (" + fmt(kStepMv * kStepMv, 6) +
                    " mV^2); the raw comparison includes what the band-pass removed");
  return r;
}

ReplayData synthetic_reference(std::uint64_t seed, double seconds) {
  if (!(seconds > 0.0)) throw ConfigError("reference length must be positive");
  GestureScript script = GestureScript::standard();
  const double scale = seconds / script.duration_s();
  for (auto& seg : script.segments) seg.duration_s *= scale;
  auto src = make_source(script, kHostSampleRate, seed);

  std::mt19937_64 rng(seed ^ 0x77616e646572ULL);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * kPi);
  std::array<double, kChannels> p1{}, p2{};
  for (std::size_t ch = 0; ch < kChannels; ++ch) {
    p1[ch] = phase(rng);
    p2[ch] = phase(rng);
  }

  ReplayData data;
  data.sample_rate = kHostSampleRate;
  const auto n = static_cast<std::size_t>(std::llround(seconds * kHostSampleRate));
  data.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    src->next(data.samples[i]);
    const double t = static_cast<double>(i) / kHostSampleRate;
    for (std::size_t ch = 0; ch < kChannels; ++ch) {
      data.samples[i][ch] += 0.8e-3 * std::sin(2.0 * kPi * 0.7 * t + p1[ch]) +
                             0.3e-3 * std::sin(2.0 * kPi * 2.3 * t + p2[ch]);
    }
  }
  return data;
}

std::vector<double> channel_mv(std::span<const ChannelBlock> blocks, std::size_t channel) {
  if (channel >= kChannels) throw ConfigError("channel index out of range");
  std::vector<double> out;
  out.reserve(blocks.size());
  for (const auto& b : blocks) out.push_back(b.ch[channel] * 1e3);
  return out;
}

}  // namespace emgwire
