#include <cmath>
#include <numbers>
#include <vector>

#include "ksvc/io.hpp"

namespace ksvc::io {
namespace {

constexpr double kKaiserBeta = 8.6;
constexpr int kZeroCrossings = 16;
constexpr int kTableDensity = 512;  // kernel samples per input sample

double sinc(double x) {
  if (std::abs(x) < 1e-12) return 1.0;
  const double px = std::numbers::pi * x;
  return std::sin(px) / px;
}

double kaiser(double x, double i0_beta) {
  // x in [-1, 1]
  const double r = 1.0 - x * x;
  if (r <= 0.0) return 0.0;
  return std::cyl_bessel_i(0.0, kKaiserBeta * std::sqrt(r)) / i0_beta;
}

}  // namespace

Waveform resample(const Waveform& wave, int target_rate) {
  if (target_rate <= 0) throw ValidationError("target sample rate must be positive");
  if (wave.sample_rate <= 0) throw ValidationError("source sample rate must be positive");
  if (wave.sample_rate == target_rate || wave.samples.empty()) {
    Waveform copy = wave;
    copy.sample_rate = target_rate;
    return copy;
  }

  const double ratio = static_cast<double>(target_rate) / wave.sample_rate;
  // anti-aliasing cutoff in cycles per input sample, slightly below Nyquist of the slower rate
  const double cutoff = 0.5 * std::min(1.0, ratio) * 0.97;
  const double half_width = kZeroCrossings / (2.0 * cutoff);
  const double i0_beta = std::cyl_bessel_i(0.0, kKaiserBeta);

  // one-sided kernel tabulated over [0, half_width], read with linear interpolation
  const auto table_len = static_cast<std::size_t>(std::ceil(half_width * kTableDensity)) + 2;
  std::vector<double> kernel(table_len);
  for (std::size_t j = 0; j < table_len; ++j) {
    const double d = static_cast<double>(j) / kTableDensity;
    kernel[j] = 2.0 * cutoff * sinc(2.0 * cutoff * d) * kaiser(d / half_width, i0_beta);
  }
  auto tap = [&](double d) {
    const double x = std::abs(d) * kTableDensity;
    const auto j = static_cast<std::size_t>(x);
    const double frac = x - static_cast<double>(j);
    return kernel[j] + frac * (kernel[j + 1] - kernel[j]);
  };

  const auto in_len = static_cast<std::ptrdiff_t>(wave.samples.size());
  const auto out_len = static_cast<std::size_t>(std::llround(in_len * ratio));

  Waveform out;
  out.sample_rate = target_rate;
  out.samples.resize(std::max<std::size_t>(out_len, 1));
  for (std::size_t n = 0; n < out.samples.size(); ++n) {
    const double t = static_cast<double>(n) / ratio;
    const auto lo = std::max<std::ptrdiff_t>(0, static_cast<std::ptrdiff_t>(std::ceil(t - half_width)));
    const auto hi = std::min<std::ptrdiff_t>(in_len - 1,
                                             static_cast<std::ptrdiff_t>(std::floor(t + half_width)));
    double acc = 0.0;
    for (std::ptrdiff_t i = lo; i <= hi; ++i) {
      const double d = t - static_cast<double>(i);
      acc += wave.samples[static_cast<std::size_t>(i)] * tap(d);
    }
    out.samples[n] = static_cast<float>(acc);
  }
  return out;
}

}  // namespace ksvc::io
