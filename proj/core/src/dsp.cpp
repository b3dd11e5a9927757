#include "ksvc/dsp.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <memory>
#include <mutex>
#include <numbers>

namespace ksvc::dsp {
namespace {

// FFTW's planner is not thread-safe; execution on distinct buffers is.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

class RealFft {
 public:
  explicit RealFft(int n) : n_(n) {
    in_ = static_cast<double*>(fftw_malloc(sizeof(double) * n));
    out_ = static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * (n / 2 + 1)));
    std::lock_guard lock(planner_mutex());
    plan_ = fftw_plan_dft_r2c_1d(n, in_, out_, FFTW_ESTIMATE);
  }
  ~RealFft() {
    {
      std::lock_guard lock(planner_mutex());
      fftw_destroy_plan(plan_);
    }
    fftw_free(in_);
    fftw_free(out_);
  }
  RealFft(const RealFft&) = delete;
  RealFft& operator=(const RealFft&) = delete;

  std::span<double> input() { return {in_, static_cast<std::size_t>(n_)}; }

  void magnitude(std::span<float> out) {
    fftw_execute(plan_);
    for (int k = 0; k <= n_ / 2; ++k) out[k] = static_cast<float>(std::hypot(out_[k][0], out_[k][1]));
  }

 private:
  int n_;
  double* in_ = nullptr;
  fftw_complex* out_ = nullptr;
  fftw_plan plan_ = nullptr;
};

double median_of(std::vector<double> v) {
  const std::size_t n = v.size();
  std::sort(v.begin(), v.end());
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::vector<double> voiced_log2(const PitchTrack& track) {
  std::vector<double> out;
  for (float f : track.f0) {
    if (f > 0.0f) out.push_back(std::log2(static_cast<double>(f)));
  }
  return out;
}

}  // namespace

std::size_t frame_count(std::size_t length, const AudioConfig& config) {
  return length / static_cast<std::size_t>(config.hop_size);
}

std::vector<double> analysis_window(const AudioConfig& config) {
  const auto n = static_cast<std::size_t>(config.fft_size);
  std::vector<double> w(n);
  switch (config.window) {
    case WindowKind::kHann:
      for (std::size_t i = 0; i < n; ++i) {
        w[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / n);
      }
      break;
  }
  return w;
}

std::size_t reflect_index(std::ptrdiff_t i, std::size_t n) {
  if (n == 1) return 0;
  const auto period = static_cast<std::ptrdiff_t>(2 * (n - 1));
  i %= period;
  if (i < 0) i += period;
  if (i >= static_cast<std::ptrdiff_t>(n)) i = period - i;
  return static_cast<std::size_t>(i);
}

MagnitudeSpectrogram stft(const Waveform& wave, const AudioConfig& config) {
  config.validate();
  if (wave.sample_rate != config.sample_rate) {
    throw ValidationError("waveform rate " + std::to_string(wave.sample_rate) +
                          " does not match config rate " + std::to_string(config.sample_rate));
  }
  if (wave.samples.size() < static_cast<std::size_t>(config.fft_size)) {
    throw ValidationError("input too short");
  }

  const std::size_t frames = frame_count(wave.size(), config);
  const auto window = analysis_window(config);
  const std::ptrdiff_t half = config.fft_size / 2;

  MagnitudeSpectrogram spec{FrameMatrix(frames, static_cast<std::size_t>(config.bin_count())),
                            config};
  RealFft fft(config.fft_size);
  auto buf = fft.input();
  for (std::size_t t = 0; t < frames; ++t) {
    const auto start = static_cast<std::ptrdiff_t>(t) * config.hop_size - half;
    for (std::size_t i = 0; i < window.size(); ++i) {
      buf[i] = window[i] * wave.samples[reflect_index(start + static_cast<std::ptrdiff_t>(i),
                                                       wave.size())];
    }
    fft.magnitude(spec.frames.row(t));
  }
  return spec;
}

PitchTrack detect_pitch(const Waveform& wave, const AudioConfig& config,
                        const PitchOptions& options) {
  config.validate();
  const double nyquist = config.sample_rate / 2.0;
  if (!(options.f_min > 0.0 && options.f_min < options.f_max && options.f_max < nyquist)) {
    throw ValidationError("pitch range must satisfy 0 < f_min < f_max < sample_rate/2");
  }
  if (wave.sample_rate != config.sample_rate) {
    throw ValidationError("waveform rate does not match config rate");
  }
  if (wave.samples.empty()) throw ValidationError("input too short");

  const double sr = config.sample_rate;
  const auto tau_min = std::max<std::size_t>(2, static_cast<std::size_t>(std::floor(sr / options.f_max)));
  const auto tau_max = std::max<std::size_t>(tau_min + 2, static_cast<std::size_t>(std::ceil(sr / options.f_min)));
  const std::size_t window = static_cast<std::size_t>(config.fft_size) / 2;
  const std::size_t seg_len = window + tau_max + 1;

  const std::size_t frames = frame_count(wave.size(), config);
  PitchTrack track;
  track.f0.assign(frames, 0.0f);

  std::vector<double> seg(seg_len);
  std::vector<double> diff(tau_max + 2, 0.0);
  std::vector<double> cmnd(tau_max + 2, 1.0);

  for (std::size_t t = 0; t < frames; ++t) {
    const auto start = static_cast<std::ptrdiff_t>(t * config.hop_size) -
                       static_cast<std::ptrdiff_t>(seg_len / 2);
    double energy = 0.0;
    for (std::size_t i = 0; i < seg_len; ++i) {
      seg[i] = wave.samples[reflect_index(start + static_cast<std::ptrdiff_t>(i), wave.size())];
      energy += seg[i] * seg[i];
    }
    if (energy <= 0.0) continue;

    for (std::size_t tau = 1; tau <= tau_max + 1 && tau + window <= seg_len; ++tau) {
      double s = 0.0;
      for (std::size_t j = 0; j < window; ++j) {
        const double d = seg[j] - seg[j + tau];
        s += d * d;
      }
      diff[tau] = s;
    }
    double running = 0.0;
    for (std::size_t tau = 1; tau <= tau_max; ++tau) {
      running += diff[tau];
      cmnd[tau] = running > 0.0 ? diff[tau] * static_cast<double>(tau) / running : 1.0;
    }

    std::size_t best = 0;
    for (std::size_t tau = tau_min; tau <= tau_max; ++tau) {
      if (cmnd[tau] < options.threshold) {
        best = tau;
        while (best + 1 <= tau_max && cmnd[best + 1] < cmnd[best]) ++best;
        break;
      }
    }
    if (best == 0) continue;

    // parabolic refinement on the raw difference function
    double refined = static_cast<double>(best);
    const double a = diff[best - 1], b = diff[best], c = diff[best + 1];
    const double denom = a - 2.0 * b + c;
    if (denom > 0.0) refined += std::clamp(0.5 * (a - c) / denom, -1.0, 1.0);

    const double f0 = sr / refined;
    if (f0 >= options.f_min && f0 <= options.f_max) track.f0[t] = static_cast<float>(f0);
  }
  return track;
}

HarmonicTable extract_harmonics(const MagnitudeSpectrogram& spec, const PitchTrack& pitch,
                                std::size_t harmonic_count) {
  if (spec.frame_count() != pitch.size()) {
    throw ValidationError("spectrogram has " + std::to_string(spec.frame_count()) +
                          " frames but pitch track has " + std::to_string(pitch.size()));
  }
  const auto window = analysis_window(spec.config);
  double window_sum = 0.0;
  for (double w : window) window_sum += w;
  const double gain = window_sum / 2.0;

  const double sr = spec.config.sample_rate;
  const double nyquist = sr / 2.0;
  const double bins_per_hz = spec.config.fft_size / sr;
  const auto last_bin = static_cast<std::ptrdiff_t>(spec.bin_count()) - 1;
  constexpr double kFloor = 1e-30;

  HarmonicTable table{FrameMatrix(spec.frame_count(), harmonic_count)};
  for (std::size_t t = 0; t < spec.frame_count(); ++t) {
    const double f0 = pitch.f0[t];
    if (f0 <= 0.0) continue;
    const auto mag = spec.frames.row(t);
    auto at = [&](std::ptrdiff_t b) { return std::max(static_cast<double>(mag[b]), kFloor); };

    for (std::size_t n = 1; n <= harmonic_count; ++n) {
      const double freq = static_cast<double>(n) * f0;
      if (freq >= nyquist) break;
      auto center = static_cast<std::ptrdiff_t>(std::lround(freq * bins_per_hz));
      center = std::clamp<std::ptrdiff_t>(center, 0, last_bin);

      // snap to the largest bin within +-1 of the expected position
      std::ptrdiff_t peak = center;
      for (std::ptrdiff_t b = std::max<std::ptrdiff_t>(0, center - 1);
           b <= std::min(last_bin, center + 1); ++b) {
        if (at(b) > at(peak)) peak = b;
      }

      if (mag[peak] <= 0.0f) continue;
      double amp = at(peak);
      if (peak > 0 && peak < last_bin) {
        const double la = std::log(at(peak - 1));
        const double lb = std::log(at(peak));
        const double lc = std::log(at(peak + 1));
        const double denom = la - 2.0 * lb + lc;
        if (denom < 0.0) {
          const double p = std::clamp(0.5 * (la - lc) / denom, -0.5, 0.5);
          amp = std::exp(lb - 0.25 * (la - lc) * p);
        }
      }
      table.amplitudes(t, n - 1) = static_cast<float>(amp / gain);
    }
  }
  return table;
}

double infer_semitone_shift(const PitchTrack& source, const PitchTrack& reference) {
  const auto src = voiced_log2(source);
  const auto ref = voiced_log2(reference);
  if (src.empty() || ref.empty()) throw ValidationError("cannot infer shift");
  return std::round(12.0 * (median_of(ref) - median_of(src)));
}

PitchTrack transpose_pitch(const PitchTrack& source, const PitchTrack& reference,
                           std::optional<double> override_semitones, double* applied) {
  const double shift =
      override_semitones ? *override_semitones : infer_semitone_shift(source, reference);
  if (applied) *applied = shift;
  const double ratio = std::exp2(shift / 12.0);
  PitchTrack out = source;
  if (shift == 0.0) return out;
  for (float& f : out.f0) {
    if (f > 0.0f) f = static_cast<float>(f * ratio);
  }
  return out;
}

std::vector<double> upsample_linear(std::span<const double> series, std::size_t hop) {
  if (series.empty()) throw ValidationError("cannot upsample an empty series");
  if (hop == 0) throw ValidationError("hop must be positive");
  const std::size_t frames = series.size();
  std::vector<double> out(frames * hop);
  for (std::size_t s = 0; s < out.size(); ++s) {
    const std::size_t t = s / hop;
    if (t + 1 >= frames) {
      out[s] = series[frames - 1];
      continue;
    }
    const double frac = static_cast<double>(s - t * hop) / static_cast<double>(hop);
    out[s] = series[t] + frac * (series[t + 1] - series[t]);
  }
  return out;
}

FrameMatrix upsample_linear(const FrameMatrix& series, std::size_t hop) {
  if (series.rows() == 0) throw ValidationError("cannot upsample an empty series");
  if (hop == 0) throw ValidationError("hop must be positive");
  const std::size_t frames = series.rows();
  const std::size_t dim = series.cols();
  FrameMatrix out(frames * hop, dim);
  for (std::size_t s = 0; s < out.rows(); ++s) {
    const std::size_t t = s / hop;
    auto dst = out.row(s);
    if (t + 1 >= frames) {
      std::copy_n(series.row(frames - 1).begin(), dim, dst.begin());
      continue;
    }
    const double frac = static_cast<double>(s - t * hop) / static_cast<double>(hop);
    const auto a = series.row(t);
    const auto b = series.row(t + 1);
    for (std::size_t d = 0; d < dim; ++d) {
      dst[d] = static_cast<float>(a[d] + frac * (static_cast<double>(b[d]) - a[d]));
    }
  }
  return out;
}

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

FrameMatrix mel_filterbank(const AudioConfig& config, std::size_t n_mels) {
  if (n_mels == 0) throw ValidationError("n_mels must be at least 1");
  const auto bins = static_cast<std::size_t>(config.bin_count());
  const double nyquist = config.sample_rate / 2.0;
  const double mel_max = hz_to_mel(nyquist);

  std::vector<double> edges(n_mels + 2);
  for (std::size_t i = 0; i < edges.size(); ++i) {
    edges[i] = mel_to_hz(mel_max * static_cast<double>(i) / static_cast<double>(n_mels + 1));
  }

  FrameMatrix fb(n_mels, bins);
  for (std::size_t m = 0; m < n_mels; ++m) {
    const double lo = edges[m], mid = edges[m + 1], hi = edges[m + 2];
    for (std::size_t b = 0; b < bins; ++b) {
      const double f = static_cast<double>(b) * config.sample_rate / config.fft_size;
      double w = 0.0;
      if (f > lo && f <= mid) {
        w = (f - lo) / (mid - lo);
      } else if (f > mid && f < hi) {
        w = (hi - f) / (hi - mid);
      }
      fb(m, b) = static_cast<float>(w);
    }
  }
  return fb;
}

FeatureSequence melspec_features(const MagnitudeSpectrogram& spec, std::size_t n_mels) {
  const FrameMatrix fb = mel_filterbank(spec.config, n_mels);
  FeatureSequence out{FrameMatrix(spec.frame_count(), n_mels)};
  for (std::size_t t = 0; t < spec.frame_count(); ++t) {
    const auto mag = spec.frames.row(t);
    for (std::size_t m = 0; m < n_mels; ++m) {
      const auto w = fb.row(m);
      double energy = 0.0;
      for (std::size_t b = 0; b < mag.size(); ++b) energy += static_cast<double>(w[b]) * mag[b];
      out.frames(t, m) = static_cast<float>(std::log1p(energy));
    }
  }
  return out;
}

}  // namespace ksvc::dsp
