#include "ksvc/io.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

namespace ksvc::io {
namespace {

static_assert(sizeof(float) == 4);

template <typename T>
void put_le(std::ostream& out, T value) {
  std::array<char, sizeof(T)> bytes;
  std::memcpy(bytes.data(), &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
  out.write(bytes.data(), bytes.size());
}

template <typename T>
T get_le(std::istream& in, const char* what) {
  std::array<char, sizeof(T)> bytes;
  if (!in.read(bytes.data(), bytes.size())) {
    throw IoError(std::string("truncated input while reading ") + what);
  }
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
  T value;
  std::memcpy(&value, bytes.data(), sizeof(T));
  return value;
}

template <typename T>
T from_le_bytes(const char* p) {
  std::array<char, sizeof(T)> bytes;
  std::memcpy(bytes.data(), p, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
  T value;
  std::memcpy(&value, bytes.data(), sizeof(T));
  return value;
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string() + " for reading");
  return in;
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  return out;
}

const char* kind_name(FrameKind kind) {
  switch (kind) {
    case FrameKind::kFeatures: return "features";
    case FrameKind::kPitch: return "pitch";
    case FrameKind::kHarmonics: return "harmonics";
  }
  return "unknown";
}

KsvcFile read_kind(const std::filesystem::path& path, FrameKind expected, KsvcHeader* header) {
  KsvcFile file = read_ksvc(path);
  if (file.header.kind != expected) {
    throw ValidationError(path.string() + ": expected " + kind_name(expected) + " file, found " +
                          kind_name(file.header.kind));
  }
  if (header) *header = file.header;
  return file;
}

}  // namespace

void write_ksvc(std::ostream& out, FrameKind kind, const FrameMatrix& data,
                const AudioConfig& config) {
  out.write("KSVC", 4);
  put_le<std::uint32_t>(out, KsvcHeader::kVersion);
  put_le<std::uint8_t>(out, static_cast<std::uint8_t>(kind));
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(data.rows()));
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(data.cols()));
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(config.sample_rate));
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(config.hop_size));
  for (float v : data.data()) put_le<float>(out, v);
  if (!out) throw IoError("failed writing .ksvc data");
}

KsvcFile read_ksvc(std::istream& in) {
  char magic[4];
  if (!in.read(magic, 4)) throw IoError("truncated input while reading magic");
  if (std::memcmp(magic, "KSVC", 4) != 0) throw IoError("bad magic: not a .ksvc file");

  KsvcFile file;
  const auto version = get_le<std::uint32_t>(in, "version");
  if (version != KsvcHeader::kVersion) {
    throw IoError("unsupported .ksvc version " + std::to_string(version));
  }
  const auto kind = get_le<std::uint8_t>(in, "kind");
  if (kind > 2) throw IoError("unknown .ksvc kind " + std::to_string(kind));
  file.header.kind = static_cast<FrameKind>(kind);
  file.header.frames = get_le<std::uint32_t>(in, "frame count");
  file.header.dim = get_le<std::uint32_t>(in, "dimension");
  file.header.sample_rate = get_le<std::uint32_t>(in, "sample rate");
  file.header.hop_size = get_le<std::uint32_t>(in, "hop size");

  const std::size_t count = static_cast<std::size_t>(file.header.frames) * file.header.dim;
  std::vector<char> raw(count * sizeof(float));
  if (count > 0 && !in.read(raw.data(), static_cast<std::streamsize>(raw.size()))) {
    throw IoError("truncated .ksvc payload: expected " + std::to_string(count) + " values");
  }
  std::vector<float> values(count);
  for (std::size_t i = 0; i < count; ++i) values[i] = from_le_bytes<float>(raw.data() + 4 * i);
  file.data = FrameMatrix(file.header.frames, file.header.dim, std::move(values));
  return file;
}

void write_ksvc(const std::filesystem::path& path, FrameKind kind, const FrameMatrix& data,
                const AudioConfig& config) {
  auto out = open_out(path);
  write_ksvc(out, kind, data, config);
}

KsvcFile read_ksvc(const std::filesystem::path& path) {
  auto in = open_in(path);
  try {
    return read_ksvc(in);
  } catch (const IoError& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

void write_features(const std::filesystem::path& path, const FeatureSequence& seq,
                    const AudioConfig& config) {
  write_ksvc(path, FrameKind::kFeatures, seq.frames, config);
}

void write_pitch(const std::filesystem::path& path, const PitchTrack& pitch,
                 const AudioConfig& config) {
  write_ksvc(path, FrameKind::kPitch, FrameMatrix(pitch.size(), 1, pitch.f0), config);
}

void write_harmonics(const std::filesystem::path& path, const HarmonicTable& table,
                     const AudioConfig& config) {
  write_ksvc(path, FrameKind::kHarmonics, table.amplitudes, config);
}

FeatureSequence read_features(const std::filesystem::path& path, KsvcHeader* header) {
  FeatureSequence seq{read_kind(path, FrameKind::kFeatures, header).data};
  seq.validate();
  return seq;
}

PitchTrack read_pitch(const std::filesystem::path& path, KsvcHeader* header) {
  KsvcFile file = read_kind(path, FrameKind::kPitch, header);
  if (file.header.dim != 1) throw ValidationError(path.string() + ": pitch file must have D=1");
  return PitchTrack{file.data.data()};
}

HarmonicTable read_harmonics(const std::filesystem::path& path, KsvcHeader* header) {
  return HarmonicTable{read_kind(path, FrameKind::kHarmonics, header).data};
}

// ---------------------------------------------------------------------------
// WAV

namespace {

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

double decode_sample(const char* p, std::uint16_t format, std::uint16_t bits) {
  if (format == kFormatFloat) {
    if (bits == 32) return from_le_bytes<float>(p);
    return from_le_bytes<double>(p);
  }
  switch (bits) {
    case 8: return (static_cast<unsigned char>(*p) - 128.0) / 128.0;
    case 16: return from_le_bytes<std::int16_t>(p) / 32768.0;
    case 24: {
      std::int32_t v = static_cast<unsigned char>(p[0]) | (static_cast<unsigned char>(p[1]) << 8) |
                       (static_cast<unsigned char>(p[2]) << 16);
      if (v & 0x800000) v -= 0x1000000;
      return v / 8388608.0;
    }
    case 32: return from_le_bytes<std::int32_t>(p) / 2147483648.0;
  }
  return 0.0;
}

}  // namespace

Waveform read_wav(std::istream& in) {
  char riff[12];
  if (!in.read(riff, 12)) throw IoError("truncated WAV header");
  if (std::memcmp(riff, "RIFF", 4) != 0 || std::memcmp(riff + 8, "WAVE", 4) != 0) {
    throw IoError("not a RIFF/WAVE file");
  }

  std::uint16_t format = 0, channels = 0, bits = 0, block_align = 0;
  std::uint32_t rate = 0;
  bool have_fmt = false;
  std::vector<char> payload;
  bool have_data = false;

  while (!have_data) {
    char id[4];
    if (!in.read(id, 4)) break;
    const auto size = get_le<std::uint32_t>(in, "chunk size");
    if (std::memcmp(id, "fmt ", 4) == 0) {
      if (size < 16) throw IoError("fmt chunk too small");
      std::vector<char> fmt(size);
      if (!in.read(fmt.data(), size)) throw IoError("truncated fmt chunk");
      format = from_le_bytes<std::uint16_t>(fmt.data());
      channels = from_le_bytes<std::uint16_t>(fmt.data() + 2);
      rate = from_le_bytes<std::uint32_t>(fmt.data() + 4);
      block_align = from_le_bytes<std::uint16_t>(fmt.data() + 12);
      bits = from_le_bytes<std::uint16_t>(fmt.data() + 14);
      if (format == kFormatExtensible && size >= 26) {
        format = from_le_bytes<std::uint16_t>(fmt.data() + 24);
      }
      have_fmt = true;
      if (size & 1u) in.ignore(1);
    } else if (std::memcmp(id, "data", 4) == 0) {
      if (!have_fmt) throw IoError("data chunk before fmt chunk");
      payload.resize(size);
      in.read(payload.data(), size);
      // tolerate a short final chunk from truncated writers; keep whole frames only
      payload.resize(static_cast<std::size_t>(in.gcount()));
      have_data = true;
    } else {
      in.ignore(size + (size & 1u));
    }
  }

  if (!have_fmt) throw IoError("missing fmt chunk");
  if (!have_data) throw IoError("missing data chunk");
  if (channels == 0) throw IoError("WAV declares zero channels");
  if (rate == 0) throw IoError("WAV declares zero sample rate");
  const bool int_ok = format == kFormatPcm && (bits == 8 || bits == 16 || bits == 24 || bits == 32);
  const bool float_ok = format == kFormatFloat && (bits == 32 || bits == 64);
  if (!int_ok && !float_ok) {
    throw IoError("unsupported WAV encoding (format " + std::to_string(format) + ", " +
                  std::to_string(bits) + " bits)");
  }
  const std::size_t bytes_per_sample = bits / 8;
  if (block_align != bytes_per_sample * channels) throw IoError("inconsistent WAV block alignment");

  const std::size_t frames = payload.size() / block_align;
  Waveform wave;
  wave.sample_rate = static_cast<int>(rate);
  wave.samples.resize(frames);
  for (std::size_t f = 0; f < frames; ++f) {
    double acc = 0.0;
    for (std::size_t c = 0; c < channels; ++c) {
      acc += decode_sample(payload.data() + f * block_align + c * bytes_per_sample, format, bits);
    }
    wave.samples[f] = static_cast<float>(acc / channels);
  }
  return wave;
}

Waveform read_wav(const std::filesystem::path& path) {
  auto in = open_in(path);
  try {
    return read_wav(in);
  } catch (const IoError& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

void write_wav(std::ostream& out, const Waveform& wave, WavEncoding encoding) {
  const bool is_float = encoding == WavEncoding::kFloat32;
  const std::uint16_t bits = is_float ? 32 : 16;
  const std::uint16_t block = bits / 8;
  const auto data_size = static_cast<std::uint32_t>(wave.samples.size() * block);

  out.write("RIFF", 4);
  put_le<std::uint32_t>(out, 36 + data_size);
  out.write("WAVE", 4);
  out.write("fmt ", 4);
  put_le<std::uint32_t>(out, 16);
  put_le<std::uint16_t>(out, is_float ? kFormatFloat : kFormatPcm);
  put_le<std::uint16_t>(out, 1);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(wave.sample_rate));
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(wave.sample_rate) * block);
  put_le<std::uint16_t>(out, block);
  put_le<std::uint16_t>(out, bits);
  out.write("data", 4);
  put_le<std::uint32_t>(out, data_size);
  for (float s : wave.samples) {
    if (is_float) {
      put_le<float>(out, s);
    } else {
      const double clipped = std::clamp(static_cast<double>(s), -1.0, 1.0);
      put_le<std::int16_t>(out, static_cast<std::int16_t>(std::lround(clipped * 32767.0)));
    }
  }
  if (!out) throw IoError("failed writing WAV data");
}

void write_wav(const std::filesystem::path& path, const Waveform& wave, WavEncoding encoding) {
  auto out = open_out(path);
  write_wav(out, wave, encoding);
}

}  // namespace ksvc::io
