#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>

#include "ksvc/types.hpp"

namespace ksvc::io {

enum class FrameKind : std::uint8_t { kFeatures = 0, kPitch = 1, kHarmonics = 2 };

/// Header of a .ksvc frame file.
///
/// Layout (all little-endian):
///   "KSVC" | u32 version=1 | u8 kind | u32 T | u32 D | u32 sample_rate | u32 hop_size
/// followed by T*D f32 values, row-major.
struct KsvcHeader {
  static constexpr std::uint32_t kVersion = 1;
  static constexpr std::size_t kByteSize = 4 + 4 + 1 + 4 * 4;

  FrameKind kind = FrameKind::kFeatures;
  std::uint32_t frames = 0;
  std::uint32_t dim = 0;
  std::uint32_t sample_rate = 0;
  std::uint32_t hop_size = 0;
};

struct KsvcFile {
  KsvcHeader header;
  FrameMatrix data;
};

void write_ksvc(std::ostream& out, FrameKind kind, const FrameMatrix& data,
                const AudioConfig& config);
KsvcFile read_ksvc(std::istream& in);

void write_ksvc(const std::filesystem::path& path, FrameKind kind, const FrameMatrix& data,
                const AudioConfig& config);
KsvcFile read_ksvc(const std::filesystem::path& path);

void write_features(const std::filesystem::path& path, const FeatureSequence& seq,
                    const AudioConfig& config);
void write_pitch(const std::filesystem::path& path, const PitchTrack& pitch,
                 const AudioConfig& config);
void write_harmonics(const std::filesystem::path& path, const HarmonicTable& table,
                     const AudioConfig& config);

/// Typed readers check the kind byte and throw ValidationError on mismatch.
FeatureSequence read_features(const std::filesystem::path& path, KsvcHeader* header = nullptr);
PitchTrack read_pitch(const std::filesystem::path& path, KsvcHeader* header = nullptr);
HarmonicTable read_harmonics(const std::filesystem::path& path, KsvcHeader* header = nullptr);

enum class WavEncoding { kPcm16, kFloat32 };

/// Reads 8/16/24/32-bit integer PCM or 32/64-bit float WAV. Multichannel
/// input is downmixed to mono by averaging channels.
Waveform read_wav(const std::filesystem::path& path);
Waveform read_wav(std::istream& in);

void write_wav(const std::filesystem::path& path, const Waveform& wave,
               WavEncoding encoding = WavEncoding::kFloat32);
void write_wav(std::ostream& out, const Waveform& wave, WavEncoding encoding);

/// Band-limited resampling with a Kaiser-windowed sinc kernel. Returns the
/// input unchanged when the rates already agree.
Waveform resample(const Waveform& wave, int target_rate);

}  // namespace ksvc::io
