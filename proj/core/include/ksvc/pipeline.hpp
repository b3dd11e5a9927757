#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "ksvc/dsp.hpp"
#include "ksvc/smoother.hpp"
#include "ksvc/types.hpp"

namespace ksvc {

/// Every tunable of the conversion engine. Defaults: k = 4, k' = 32,
/// N = 50 harmonics, m = 0.3.
struct EngineConfig {
  AudioConfig audio;
  dsp::PitchOptions pitch;
  std::size_t n_mels = 80;
  std::size_t harmonics = 50;
  std::size_t k = 4;
  std::size_t k_prime = 32;
  smoother::SmootherConfig smoother;
  std::optional<double> semitones;
  bool smooth = true;
  bool additive = true;

  void validate() const;
};

/// Overlays the keys present in a JSON config document onto `base`.
/// Unknown keys are rejected. Schema documented in README.md.
EngineConfig apply_config_json(const std::string& json_text, EngineConfig base = {});
EngineConfig load_config(const std::filesystem::path& path, EngineConfig base = {});

/// Frame-aligned analysis products of one waveform.
struct Analysis {
  FeatureSequence features;
  PitchTrack pitch;
  HarmonicTable harmonics;
};

/// Resamples to the configured rate when needed. `resampled` reports whether
/// that happened.
Waveform conform(const Waveform& wave, const AudioConfig& audio, bool* resampled = nullptr);

/// STFT, YIN pitch, harmonic amplitudes and log-mel features on one grid.
Analysis analyze(const Waveform& wave, const EngineConfig& cfg);

/// Replaces the analysis features with externally computed ones. Frame counts
/// may differ by at most one; all products are then cut to the shorter length.
void adopt_external_features(Analysis& analysis, FeatureSequence external);

struct StageTimings {
  double analysis_ms = 0.0;
  double matching_ms = 0.0;
  double reselect_ms = 0.0;
  double weights_ms = 0.0;
  double synthesis_ms = 0.0;
  double total_ms = 0.0;
};

struct ConversionReport {
  EngineConfig config;
  std::string feature_space = "mel";
  std::size_t frames = 0;
  std::size_t pool_frames = 0;
  std::size_t reference_utterances = 0;
  std::optional<double> objective_before;
  std::optional<double> objective_after;
  std::size_t weight_iterations = 0;
  std::optional<double> roughness_output;
  std::optional<double> roughness_knn;
  std::optional<double> semitone_shift;
  std::optional<double> render_scale;
  StageTimings timings;
};

/// Serialized report. `include_timings = false` yields a run-independent
/// document suitable for determinism checks.
std::string report_to_json(const ConversionReport& report, bool include_timings = true);

struct ConversionResult {
  FeatureSequence features;
  std::optional<Waveform> render;
  ConversionReport report;
};

/// Full conversion: kNN matching, optional reselection and weight
/// optimisation, blending, and optional additive synthesis.
ConversionResult convert(const Analysis& source, const std::vector<Analysis>& references,
                         const EngineConfig& cfg);

// File-level commands used by the ksvc tool.

struct ExtractOutputs {
  std::filesystem::path features, pitch, harmonics;
  std::size_t frames = 0;
  bool resampled = false;
  int input_rate = 0;
};

/// Writes <prefix>.feat.ksvc, <prefix>.f0.ksvc and <prefix>.harm.ksvc.
ExtractOutputs extract_files(const std::filesystem::path& wav, const std::string& prefix,
                             const EngineConfig& cfg);

struct ConvertRequest {
  std::filesystem::path source;
  std::vector<std::filesystem::path> references;
  std::filesystem::path out_dir = ".";
  /// Optional external features: first for the source, then one per reference.
  std::vector<std::filesystem::path> external_features;
  EngineConfig config;
};

struct ConvertOutputs {
  std::filesystem::path features;  // out.feat.ksvc
  std::optional<std::filesystem::path> render;  // out.harmonic.wav
  std::filesystem::path report;    // report.json
  ConversionReport summary;
};

ConvertOutputs convert_files(const ConvertRequest& request);

}  // namespace ksvc
