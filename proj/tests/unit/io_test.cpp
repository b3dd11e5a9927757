#include <cstring>
#include <filesystem>
#include <limits>
#include <sstream>

#include "doctest.h"
#include "ksvc/dsp.hpp"
#include "ksvc/io.hpp"
#include "support.hpp"

using namespace ksvc;

namespace {

std::string bytes_of(const FrameMatrix& m, io::FrameKind kind, const AudioConfig& cfg = {}) {
  std::ostringstream out(std::ios::binary);
  io::write_ksvc(out, kind, m, cfg);
  return out.str();
}

std::filesystem::path temp_path(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("ksvc_io_test_" + name);
}

}  // namespace

TEST_CASE("ksvc header layout is little-endian and fixed") {
  const FrameMatrix m(2, 1, std::vector<float>{1.0f, -2.0f});
  const std::string b = bytes_of(m, io::FrameKind::kPitch);
  const unsigned char expected[] = {
      'K', 'S', 'V', 'C',
      1, 0, 0, 0,               // version
      1,                        // kind = pitch
      2, 0, 0, 0,               // T
      1, 0, 0, 0,               // D
      0x80, 0x3E, 0, 0,         // 16000
      0x40, 0x01, 0, 0,         // 320
      0x00, 0x00, 0x80, 0x3F,   // 1.0f
      0x00, 0x00, 0x00, 0xC0,   // -2.0f
  };
  REQUIRE(b.size() == sizeof(expected));
  CHECK(std::memcmp(b.data(), expected, sizeof(expected)) == 0);
  CHECK(io::KsvcHeader::kByteSize == 25);
}

TEST_CASE("ksvc round trip is bit-exact for arbitrary finite and special values") {
  std::mt19937_64 rng(42);
  std::uniform_int_distribution<std::uint32_t> bits;
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t rows = rng() % 9, cols = 1 + rng() % 7;
    FrameMatrix m(rows, cols);
    for (auto& v : m.data()) {
      // random bit patterns cover denormals, signed zero, inf and NaN payloads
      const std::uint32_t u = bits(rng);
      std::memcpy(&v, &u, 4);
    }
    std::istringstream in(bytes_of(m, io::FrameKind::kFeatures), std::ios::binary);
    const auto back = io::read_ksvc(in);
    REQUIRE(back.data.rows() == rows);
    REQUIRE(back.data.cols() == cols);
    CHECK(std::memcmp(back.data.data().data(), m.data().data(), rows * cols * 4) == 0);
  }
}

TEST_CASE("typed file round trip through disk") {
  std::mt19937_64 rng(3);
  AudioConfig cfg;
  cfg.hop_size = 160;
  const auto feats = testing::random_features(6, 5, rng);
  PitchTrack pitch{{0.0f, 110.5f, 220.25f}};
  HarmonicTable harm{FrameMatrix(3, 4, 0.25f)};

  const auto fp = temp_path("f.ksvc"), pp = temp_path("p.ksvc"), hp = temp_path("h.ksvc");
  io::write_features(fp, feats, cfg);
  io::write_pitch(pp, pitch, cfg);
  io::write_harmonics(hp, harm, cfg);

  io::KsvcHeader header;
  CHECK(io::read_features(fp, &header) == feats);
  CHECK(header.hop_size == 160);
  CHECK(header.dim == 5);
  CHECK(io::read_pitch(pp) == pitch);
  CHECK(io::read_harmonics(hp) == harm);
  CHECK_THROWS_AS(io::read_pitch(fp), ValidationError);  // wrong kind
}

TEST_CASE("ksvc reader rejects corrupt input") {
  const FrameMatrix m(3, 2, 1.0f);
  std::string good = bytes_of(m, io::FrameKind::kFeatures);

  std::istringstream truncated(good.substr(0, good.size() - 3), std::ios::binary);
  CHECK_THROWS_AS(io::read_ksvc(truncated), IoError);

  std::string bad_magic = good;
  bad_magic[0] = 'X';
  std::istringstream bm(bad_magic, std::ios::binary);
  CHECK_THROWS_AS(io::read_ksvc(bm), IoError);

  std::string bad_version = good;
  bad_version[4] = 2;
  std::istringstream bv(bad_version, std::ios::binary);
  CHECK_THROWS_AS(io::read_ksvc(bv), IoError);

  CHECK_THROWS_AS(io::read_ksvc(temp_path("does_not_exist.ksvc")), IoError);
}

TEST_CASE("WAV float32 round trip is exact, pcm16 within quantisation") {
  const auto wave = testing::sine(440.0, 0.1, 16000, 0.5);
  std::stringstream f(std::ios::in | std::ios::out | std::ios::binary);
  io::write_wav(f, wave, io::WavEncoding::kFloat32);
  const auto back = io::read_wav(f);
  CHECK(back.sample_rate == 16000);
  CHECK(back.samples == wave.samples);

  std::stringstream p(std::ios::in | std::ios::out | std::ios::binary);
  io::write_wav(p, wave, io::WavEncoding::kPcm16);
  const auto back16 = io::read_wav(p);
  REQUIRE(back16.size() == wave.size());
  for (std::size_t i = 0; i < wave.size(); ++i) {
    CHECK(std::abs(back16.samples[i] - wave.samples[i]) < 1.0 / 16000.0);
  }
}

TEST_CASE("stereo WAV is downmixed by averaging") {
  // hand-built 16-bit stereo file with two frames
  std::string b;
  auto u32 = [&](std::uint32_t v) { for (int i = 0; i < 4; ++i) b.push_back(char((v >> (8 * i)) & 0xFF)); };
  auto u16 = [&](std::uint16_t v) { b.push_back(char(v & 0xFF)); b.push_back(char(v >> 8)); };
  b += "RIFF"; u32(36 + 8); b += "WAVE";
  b += "fmt "; u32(16); u16(1); u16(2); u32(8000); u32(8000 * 4); u16(4); u16(16);
  b += "LIST"; u32(2); b += "xx";  // unknown chunk is skipped
  b += "data"; u32(8);
  u16(16384); u16(0);                       // L=0.5, R=0
  u16(static_cast<std::uint16_t>(-16384)); u16(static_cast<std::uint16_t>(-16384));  // -0.5, -0.5
  std::istringstream in(b, std::ios::binary);
  const auto w = io::read_wav(in);
  CHECK(w.sample_rate == 8000);
  REQUIRE(w.size() == 2);
  CHECK(w.samples[0] == doctest::Approx(0.25));
  CHECK(w.samples[1] == doctest::Approx(-0.5));
}

TEST_CASE("WAV reader rejects garbage") {
  std::istringstream junk(std::string("RIFX0000WAVE"), std::ios::binary);
  CHECK_THROWS_AS(io::read_wav(junk), IoError);
  std::istringstream empty(std::string(""), std::ios::binary);
  CHECK_THROWS_AS(io::read_wav(empty), IoError);
}

TEST_CASE("resampling 48 kHz to 16 kHz preserves a 1 kHz tone") {
  const auto hi = testing::sine(1000.0, 0.5, 48000, 0.5);
  const auto lo = io::resample(hi, 16000);
  CHECK(lo.sample_rate == 16000);
  CHECK(lo.size() == 8000);
  // compare interior samples against the ideal 16 kHz rendering
  const auto ideal = testing::sine(1000.0, 0.5, 16000, 0.5);
  double err = 0.0;
  for (std::size_t i = 200; i < 7800; ++i) err = std::max(err, double(std::abs(lo.samples[i] - ideal.samples[i])));
  CHECK(err < 2e-3);
}

TEST_CASE("resampling removes content above the new Nyquist") {
  const auto hi = testing::sine(12000.0, 0.5, 48000, 0.5);
  const auto lo = io::resample(hi, 16000);
  double peak = 0.0;
  for (std::size_t i = 200; i < lo.size() - 200; ++i) peak = std::max(peak, double(std::abs(lo.samples[i])));
  CHECK(peak < 1e-3);
}
