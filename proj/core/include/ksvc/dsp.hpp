#pragma once

#include <optional>
#include <span>
#include <vector>

#include "ksvc/types.hpp"

namespace ksvc::dsp {

/// Magnitude STFT. Frame t covers samples [t*hop - fft/2, t*hop + fft/2) of
/// the reflect-padded signal, i.e. it is centered on sample t*hop.
struct MagnitudeSpectrogram {
  FrameMatrix frames;  // T x (fft_size/2 + 1)
  AudioConfig config;

  std::size_t frame_count() const { return frames.rows(); }
  std::size_t bin_count() const { return frames.cols(); }
  double bin_frequency(std::size_t bin) const {
    return static_cast<double>(bin) * config.sample_rate / config.fft_size;
  }
};

/// Number of analysis frames for a signal of `length` samples: one frame per
/// full hop, so 1 s at 16 kHz with hop 320 gives 50 frames.
std::size_t frame_count(std::size_t length, const AudioConfig& config);

/// Analysis window of the configured kind and length fft_size (periodic form).
std::vector<double> analysis_window(const AudioConfig& config);

/// Index into a signal of length n with symmetric reflection at both ends
/// (no edge repeat), valid for any integer position.
std::size_t reflect_index(std::ptrdiff_t i, std::size_t n);

MagnitudeSpectrogram stft(const Waveform& wave, const AudioConfig& config);

struct PitchOptions {
  double f_min = 50.0;
  double f_max = 1000.0;
  double threshold = 0.1;
};

/// YIN pitch tracker on the same frame grid as stft().
PitchTrack detect_pitch(const Waveform& wave, const AudioConfig& config,
                        const PitchOptions& options = {});

/// Per-frame harmonic amplitudes read from the magnitude spectrum near n*f0,
/// calibrated so a unit sinusoid reads as 1.
HarmonicTable extract_harmonics(const MagnitudeSpectrogram& spec, const PitchTrack& pitch,
                                std::size_t harmonic_count);

/// Semitone shift that moves the median voiced log-pitch of `source` onto
/// that of `reference`, rounded to the nearest integer.
double infer_semitone_shift(const PitchTrack& source, const PitchTrack& reference);

/// Scales every voiced frame of `source` by 2^(s/12). With no override, s is
/// inferred from the reference. Throws ValidationError("cannot infer shift")
/// when inference is impossible.
PitchTrack transpose_pitch(const PitchTrack& source, const PitchTrack& reference,
                           std::optional<double> override_semitones, double* applied = nullptr);

/// Linear interpolation from frame rate to sample rate. Frame t sits at
/// sample t*hop; the tail after the last frame holds its value. Output has
/// series.size()*hop samples.
std::vector<double> upsample_linear(std::span<const double> series, std::size_t hop);

/// Vector-valued variant: returns (T*hop) x D, row-major.
FrameMatrix upsample_linear(const FrameMatrix& series, std::size_t hop);

/// HTK-style triangular mel filterbank spanning 0..Nyquist, shape n_mels x bins.
FrameMatrix mel_filterbank(const AudioConfig& config, std::size_t n_mels);

double hz_to_mel(double hz);
double mel_to_hz(double mel);

/// log(1 + mel energy) features, one row per spectrogram frame.
FeatureSequence melspec_features(const MagnitudeSpectrogram& spec, std::size_t n_mels = 80);

}  // namespace ksvc::dsp
