#pragma once

// Shared fixtures and independent oracles for the unit and acceptance suites.
// Nothing here calls into the engine code path it is used to check.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <random>
#include <utility>
#include <vector>

#include "ksvc/matcher.hpp"
#include "ksvc/types.hpp"

namespace ksvc::testing {

inline Waveform sine(double freq, double seconds, int rate = 16000, double amp = 1.0,
                     double phase = 0.0) {
  Waveform w;
  w.sample_rate = rate;
  const auto n = static_cast<std::size_t>(std::llround(seconds * rate));
  w.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    w.samples[i] = static_cast<float>(
        amp * std::sin(2.0 * std::numbers::pi * freq * static_cast<double>(i) / rate + phase));
  }
  return w;
}

/// sum_n amps[n-1] * sin(2 pi n f0 t), stationary.
inline Waveform harmonic_tone(double f0, const std::vector<double>& amps, double seconds,
                              int rate = 16000) {
  Waveform w;
  w.sample_rate = rate;
  const auto n = static_cast<std::size_t>(std::llround(seconds * rate));
  w.samples.assign(n, 0.0f);
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (std::size_t h = 0; h < amps.size(); ++h) {
      s += amps[h] * std::sin(2.0 * std::numbers::pi * f0 * static_cast<double>(h + 1) *
                              static_cast<double>(i) / rate);
    }
    w.samples[i] = static_cast<float>(s);
  }
  return w;
}

/// Brute-force DFT magnitude of one frame, O(N^2).
inline std::vector<double> dft_magnitude(const std::vector<double>& frame) {
  const std::size_t n = frame.size();
  std::vector<double> mag(n / 2 + 1);
  for (std::size_t k = 0; k <= n / 2; ++k) {
    std::complex<double> acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double ang = -2.0 * std::numbers::pi * static_cast<double>(k * i % n) / n;
      acc += frame[i] * std::complex<double>(std::cos(ang), std::sin(ang));
    }
    mag[k] = std::abs(acc);
  }
  return mag;
}

inline FeatureSequence random_features(std::size_t rows, std::size_t dim, std::mt19937_64& rng) {
  std::normal_distribution<float> g(0.0f, 1.0f);
  FeatureSequence f{FrameMatrix(rows, dim)};
  for (auto& v : f.frames.data()) v = g(rng);
  return f;
}

inline matcher::Utterance utterance_from(FeatureSequence features, float f0 = 0.0f,
                                         std::size_t harmonics = 2) {
  matcher::Utterance u;
  const std::size_t n = features.frame_count();
  u.features = std::move(features);
  u.pitch.f0.assign(n, f0);
  u.harmonics.amplitudes = FrameMatrix(n, harmonics, f0 > 0.0f ? 0.5f : 0.0f);
  return u;
}

inline ReferencePool pool_from(const std::vector<FeatureSequence>& utterances) {
  std::vector<matcher::Utterance> utts;
  for (const auto& f : utterances) utts.push_back(utterance_from(f));
  return matcher::build_pool(utts);
}

/// Exhaustive kNN oracle: cosine similarity in long double straight from the
/// raw rows, full sort, ties by lower index.
inline std::vector<std::size_t> knn_oracle(const FeatureSequence& pool,
                                           std::span<const float> query, std::size_t k) {
  long double qn = 0.0L;
  for (float v : query) qn += static_cast<long double>(v) * v;
  std::vector<std::pair<long double, std::size_t>> scored;
  for (std::size_t i = 0; i < pool.frame_count(); ++i) {
    long double dot = 0.0L, rn = 0.0L;
    const auto r = pool[i];
    for (std::size_t d = 0; d < r.size(); ++d) {
      dot += static_cast<long double>(r[d]) * query[d];
      rn += static_cast<long double>(r[d]) * r[d];
    }
    if (rn == 0.0L) continue;
    const long double sim = qn == 0.0L ? 0.0L : dot / std::sqrt(rn * qn);
    scored.emplace_back(-sim, i);
  }
  std::sort(scored.begin(), scored.end());
  std::vector<std::size_t> out;
  for (std::size_t j = 0; j < k && j < scored.size(); ++j) out.push_back(scored[j].second);
  return out;
}

inline double cosine(std::span<const float> a, std::span<const float> b) {
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += static_cast<double>(a[i]) * b[i];
    na += static_cast<double>(a[i]) * a[i];
    nb += static_cast<double>(b[i]) * b[i];
  }
  return dot / std::sqrt(na * nb);
}

/// Smooth closed trajectory in R^dim built from a few low-frequency
/// sinusoids plus an offset, sampled at `frames` points.
inline FeatureSequence smooth_trajectory(std::size_t frames, std::size_t dim, std::mt19937_64& rng,
                                         double cycles = 1.5) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  FeatureSequence f{FrameMatrix(frames, dim)};
  std::vector<double> offset(dim), amp(dim), freq(dim), phase(dim);
  for (std::size_t d = 0; d < dim; ++d) {
    offset[d] = 0.5 + u(rng);
    amp[d] = 0.5 + u(rng);
    freq[d] = cycles * (0.5 + u(rng));
    phase[d] = 2.0 * std::numbers::pi * u(rng);
  }
  for (std::size_t t = 0; t < frames; ++t) {
    const double x = static_cast<double>(t) / static_cast<double>(frames);
    for (std::size_t d = 0; d < dim; ++d) {
      f.frames(t, d) = static_cast<float>(
          offset[d] + amp[d] * std::sin(2.0 * std::numbers::pi * freq[d] * x + phase[d]));
    }
  }
  return f;
}

}  // namespace ksvc::testing
