#include "ksvc/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "ksvc/dsp.hpp"
#include "ksvc/matcher.hpp"

namespace ksvc::synth {

HarmonicTable gather_harmonics(const ReferencePool& pool, const std::vector<CandidateSet>& sets) {
  const std::size_t n = pool.harmonics.harmonic_count();
  HarmonicTable out{FrameMatrix(sets.size(), n)};
  std::vector<double> acc(n);
  for (std::size_t t = 0; t < sets.size(); ++t) {
    validate_candidate_set(sets[t], pool.size());
    std::fill(acc.begin(), acc.end(), 0.0);
    for (std::size_t i = 0; i < sets[t].size(); ++i) {
      const auto row = pool.harmonics.amplitudes.row(sets[t].indices[i]);
      const double w = sets[t].weights[i];
      for (std::size_t h = 0; h < n; ++h) acc[h] += w * row[h];
    }
    auto dst = out.amplitudes.row(t);
    for (std::size_t h = 0; h < n; ++h) dst[h] = static_cast<float>(acc[h]);
  }
  return out;
}

Render render_harmonics(const PitchTrack& target_pitch, const HarmonicTable& harmonics,
                        const AudioConfig& config) {
  config.validate();
  if (target_pitch.size() != harmonics.frame_count()) {
    throw ValidationError("pitch has " + std::to_string(target_pitch.size()) +
                          " frames but harmonic table has " +
                          std::to_string(harmonics.frame_count()));
  }
  Render render;
  render.wave.sample_rate = config.sample_rate;
  if (target_pitch.size() == 0) return render;

  const auto hop = static_cast<std::size_t>(config.hop_size);
  const std::vector<double> f0_frames(target_pitch.f0.begin(), target_pitch.f0.end());
  const auto f0 = dsp::upsample_linear(f0_frames, hop);
  const FrameMatrix amps = dsp::upsample_linear(harmonics.amplitudes, hop);

  const double sr = config.sample_rate;
  const double nyquist = sr / 2.0;
  const std::size_t samples = f0.size();
  const std::size_t partials = harmonics.harmonic_count();

  std::vector<double> out(samples, 0.0);
  std::vector<double> amp_sum(samples, 0.0);
  for (std::size_t n = 1; n <= partials; ++n) {
    const double dn = static_cast<double>(n);
    double phase = 0.0;
    for (std::size_t s = 0; s < samples; ++s) {
      const double freq = dn * f0[s];
      const double a = amps(s, n - 1);
      if (a != 0.0 && freq < nyquist) {
        out[s] += a * std::sin(phase);
        amp_sum[s] += a;
      }
      phase += 2.0 * std::numbers::pi * freq / sr;
      if (phase >= 2.0 * std::numbers::pi) phase = std::fmod(phase, 2.0 * std::numbers::pi);
    }
  }

  double peak = 0.0;
  bool over_unity = false;
  for (std::size_t s = 0; s < samples; ++s) {
    peak = std::max(peak, std::abs(out[s]));
    over_unity = over_unity || amp_sum[s] > 1.0;
  }
  if (over_unity && peak > 0.99) render.scale = 0.99 / peak;

  render.wave.samples.resize(samples);
  for (std::size_t s = 0; s < samples; ++s) {
    render.wave.samples[s] = static_cast<float>(out[s] * render.scale);
  }
  return render;
}

Conversion render_conversion(const ReferencePool& pool,
                             const std::vector<CandidateSet>& feature_sets,
                             const std::vector<CandidateSet>& harmonic_sets,
                             const PitchTrack& target_pitch, const AudioConfig& config) {
  if (feature_sets.size() != harmonic_sets.size() || harmonic_sets.size() != target_pitch.size()) {
    throw ValidationError("feature sets, harmonic sets and target pitch differ in length");
  }
  Conversion conv;
  conv.features = matcher::average_candidates(pool, feature_sets);
  conv.render = render_harmonics(target_pitch, gather_harmonics(pool, harmonic_sets), config);
  return conv;
}

}  // namespace ksvc::synth
