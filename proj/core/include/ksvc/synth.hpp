#pragma once

#include <vector>

#include "ksvc/types.hpp"

namespace ksvc::synth {

/// Row t = weighted mean of the harmonic rows of the candidates in sets[t].
HarmonicTable gather_harmonics(const ReferencePool& pool, const std::vector<CandidateSet>& sets);

struct Render {
  Waveform wave;
  double scale = 1.0;  // global gain applied to keep the peak at or below 0.99
};

/// Additive harmonic synthesis
///   U(s) = sum_n A_n(s) sin(phi_n(s)),  phi_n(s) = sum_{s' < s} 2 pi n f0(s') / sr
/// with f0 and A_n linearly upsampled from frame rate. Partials at or above
/// Nyquist are muted per sample.
Render render_harmonics(const PitchTrack& target_pitch, const HarmonicTable& harmonics,
                        const AudioConfig& config);

struct Conversion {
  FeatureSequence features;  // blended feature sequence for an external vocoder
  Render render;
};

/// Blends `feature_sets` into the output feature sequence and renders the
/// harmonic waveform from `harmonic_sets` along `target_pitch`.
Conversion render_conversion(const ReferencePool& pool,
                             const std::vector<CandidateSet>& feature_sets,
                             const std::vector<CandidateSet>& harmonic_sets,
                             const PitchTrack& target_pitch, const AudioConfig& config);

}  // namespace ksvc::synth
