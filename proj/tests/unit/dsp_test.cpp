#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "ksvc/dsp.hpp"
#include "support.hpp"

using namespace ksvc;
using namespace ksvc::dsp;

namespace {

std::size_t argmax(std::span<const float> v) {
  return static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
}

// Window and framing rebuilt independently of the engine.
std::vector<double> oracle_frame(const Waveform& w, std::size_t t, int hop, int n) {
  std::vector<double> frame(n);
  for (int i = 0; i < n; ++i) {
    const long idx = static_cast<long>(t) * hop - n / 2 + i;
    const double hann = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * i / n);
    frame[i] = hann * w.samples.at(static_cast<std::size_t>(idx));
  }
  return frame;
}

}  // namespace

TEST_CASE("stft of a 1 kHz sine peaks in bin 64 and matches a brute-force DFT") {
  const AudioConfig cfg;
  const auto wave = testing::sine(1000.0, 0.5);
  const auto spec = stft(wave, cfg);
  REQUIRE(spec.frame_count() == 25);
  REQUIRE(spec.bin_count() == 513);
  // interior frames only; the reflected edges smear the peak
  for (std::size_t t = 2; t + 2 < spec.frame_count(); ++t) {
    INFO("frame ", t);
    CHECK(argmax(spec.frames.row(t)) == 64);
  }

  for (std::size_t t : {4u, 12u, 20u}) {
    const auto oracle = testing::dft_magnitude(oracle_frame(wave, t, cfg.hop_size, cfg.fft_size));
    const auto row = spec.frames.row(t);
    for (std::size_t k = 0; k < oracle.size(); ++k) {
      CHECK(row[k] == doctest::Approx(oracle[k]).epsilon(1e-4).scale(1.0));
    }
  }
}

TEST_CASE("stft of silence is zero and DC lands in bin 0") {
  const AudioConfig cfg;
  Waveform zero{std::vector<float>(4000, 0.0f), 16000};
  const auto z = stft(zero, cfg);
  for (float v : z.frames.data()) CHECK(v == 0.0f);

  Waveform dc{std::vector<float>(4000, 0.3f), 16000};
  const auto d = stft(dc, cfg);
  for (std::size_t t = 0; t < d.frame_count(); ++t) {
    const auto row = d.frames.row(t);
    CHECK(argmax(row) == 0);
    CHECK(row[0] == doctest::Approx(0.3 * 512.0).epsilon(1e-5));
    CHECK(row[3] < 1e-3);
  }
}

TEST_CASE("stft rejects short input and mismatched rates") {
  const AudioConfig cfg;
  CHECK_THROWS_WITH_AS(stft(Waveform{std::vector<float>(1000, 0.1f), 16000}, cfg),
                       "input too short", ValidationError);
  CHECK_THROWS_AS(stft(testing::sine(100.0, 0.5, 8000), cfg), ValidationError);
}

TEST_CASE("reflect indexing mirrors without repeating the edge") {
  CHECK(reflect_index(-1, 5) == 1);
  CHECK(reflect_index(-4, 5) == 4);
  CHECK(reflect_index(5, 5) == 3);
  CHECK(reflect_index(8, 5) == 0);
  CHECK(reflect_index(9, 5) == 1);
  CHECK(reflect_index(3, 1) == 0);
}

TEST_CASE("stft, pitch and mel features share one frame grid") {
  const AudioConfig cfg;
  for (double seconds : {0.07, 0.5, 1.0, 1.013}) {
    const auto wave = testing::sine(300.0, seconds);
    const auto spec = stft(wave, cfg);
    CHECK(spec.frame_count() == frame_count(wave.size(), cfg));
    CHECK(detect_pitch(wave, cfg).size() == spec.frame_count());
    CHECK(melspec_features(spec).frame_count() == spec.frame_count());
  }
  CHECK(frame_count(16000, cfg) == 50);
}

TEST_CASE("YIN tracks pure sines within 1%") {
  const AudioConfig cfg;
  for (double f : {110.0, 220.0, 440.0, 880.0}) {
    const auto track = detect_pitch(testing::sine(f, 1.0, 16000, 0.6), cfg);
    REQUIRE(track.size() == 50);
    for (std::size_t t = 2; t + 2 < track.size(); ++t) {
      CHECK(std::abs(track.f0[t] - f) <= 0.01 * f);
    }
  }
}

TEST_CASE("YIN reports silence as unvoiced") {
  const auto track = detect_pitch(Waveform{std::vector<float>(16000, 0.0f), 16000}, AudioConfig{});
  for (float f : track.f0) CHECK(f == 0.0f);
}

TEST_CASE("YIN follows a 220 -> 330 Hz splice within three frames") {
  auto wave = testing::sine(220.0, 1.0);
  const auto upper = testing::sine(330.0, 1.0);
  std::copy(upper.samples.begin() + 8000, upper.samples.end(), wave.samples.begin() + 8000);
  const auto track = detect_pitch(wave, AudioConfig{});
  const std::size_t splice = 8000 / 320;
  for (std::size_t t = 2; t + 2 < track.size(); ++t) {
    if (t + 3 >= splice && t <= splice + 3) continue;
    const double expected = t < splice ? 220.0 : 330.0;
    CHECK(std::abs(track.f0[t] - expected) <= 0.01 * expected);
  }
}

TEST_CASE("YIN validates its search range") {
  const auto wave = testing::sine(220.0, 0.2);
  CHECK_THROWS_AS(detect_pitch(wave, AudioConfig{}, {0.0, 500.0, 0.1}), ValidationError);
  CHECK_THROWS_AS(detect_pitch(wave, AudioConfig{}, {500.0, 400.0, 0.1}), ValidationError);
  CHECK_THROWS_AS(detect_pitch(wave, AudioConfig{}, {50.0, 8000.0, 0.1}), ValidationError);
}

TEST_CASE("harmonic amplitudes of a two-partial tone") {
  const AudioConfig cfg;
  const auto wave = testing::harmonic_tone(200.0, {0.8, 0.4}, 1.0);
  const auto spec = stft(wave, cfg);
  PitchTrack pitch{std::vector<float>(spec.frame_count(), 200.0f)};
  pitch.f0[10] = 0.0f;
  const auto table = extract_harmonics(spec, pitch, 3);
  REQUIRE(table.harmonic_count() == 3);
  for (std::size_t t = 2; t + 2 < table.frame_count(); ++t) {
    const auto row = table.amplitudes.row(t);
    if (t == 10) {
      for (float a : row) CHECK(a == 0.0f);
      continue;
    }
    CHECK(row[0] == doctest::Approx(0.8).epsilon(0.05));
    CHECK(row[1] == doctest::Approx(0.4).epsilon(0.05));
    CHECK(row[2] < 0.02);
  }
}

TEST_CASE("harmonics at or above Nyquist read as zero") {
  const AudioConfig cfg;
  const auto wave = testing::harmonic_tone(3000.0, {0.5, 0.3}, 0.5);
  const auto spec = stft(wave, cfg);
  const PitchTrack pitch{std::vector<float>(spec.frame_count(), 3000.0f)};
  const auto table = extract_harmonics(spec, pitch, 50);
  for (std::size_t t = 0; t < table.frame_count(); ++t) {
    const auto row = table.amplitudes.row(t);
    CHECK(row[0] > 0.4f);
    for (std::size_t n = 3; n <= 50; ++n) CHECK(row[n - 1] == 0.0f);
  }
  CHECK_THROWS_AS(extract_harmonics(spec, PitchTrack{{100.0f}}, 3), ValidationError);
}

TEST_CASE("transpose_pitch infers an octave and preserves unvoiced frames") {
  const PitchTrack src{{220.0f, 220.0f, 220.0f}};
  const PitchTrack ref{{440.0f, 440.0f}};
  double shift = 0.0;
  const auto out = transpose_pitch(src, ref, std::nullopt, &shift);
  CHECK(shift == 12.0);
  for (float f : out.f0) CHECK(f == doctest::Approx(440.0));

  CHECK(transpose_pitch(src, ref, 0.0) == src);

  const auto kept = transpose_pitch(PitchTrack{{220.0f, 0.0f, 220.0f}}, ref, 12.0);
  CHECK(kept.f0[0] == doctest::Approx(440.0));
  CHECK(kept.f0[1] == 0.0f);
  CHECK(kept.f0[2] == doctest::Approx(440.0));

  CHECK_THROWS_WITH_AS(transpose_pitch(PitchTrack{{0.0f, 0.0f}}, ref, std::nullopt),
                       "cannot infer shift", ValidationError);
  CHECK_THROWS_AS(transpose_pitch(src, PitchTrack{{0.0f}}, std::nullopt), ValidationError);
}

TEST_CASE("semitone inference uses medians over voiced frames and rounds") {
  // source median 200 Hz (one octave outlier ignored), reference median 300 Hz:
  // 12*log2(1.5) = 7.02 -> 7
  const PitchTrack src{{200.0f, 0.0f, 200.0f, 400.0f, 200.0f}};
  const PitchTrack ref{{300.0f, 300.0f, 0.0f, 150.0f}};
  CHECK(infer_semitone_shift(src, ref) == 7.0);
}

TEST_CASE("upsample_linear worked examples") {
  const std::vector<double> two{0.0, 10.0};
  CHECK(upsample_linear(two, 4) == std::vector<double>{0, 2.5, 5, 7.5, 10, 10, 10, 10});
  const std::vector<double> one{7.0};
  CHECK(upsample_linear(one, 3) == std::vector<double>{7, 7, 7});
  const std::vector<double> flat(5, 3.25);
  for (double v : upsample_linear(flat, 7)) CHECK(v == 3.25);
  CHECK_THROWS_AS(upsample_linear(std::span<const double>{}, 4), ValidationError);
}

TEST_CASE("upsample_linear is exact on affine series") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-5.0, 5.0);
  for (int trial = 0; trial < 20; ++trial) {
    const double a = u(rng), b = u(rng);
    const std::size_t frames = 2 + rng() % 20, hop = 1 + rng() % 50;
    std::vector<double> series(frames);
    for (std::size_t t = 0; t < frames; ++t) series[t] = a * static_cast<double>(t * hop) + b;
    const auto out = upsample_linear(series, hop);
    REQUIRE(out.size() == frames * hop);
    for (std::size_t s = 0; s <= (frames - 1) * hop; ++s) {
      CHECK(std::abs(out[s] - (a * static_cast<double>(s) + b)) < 1e-6);
    }
  }
}

TEST_CASE("vector upsampling interpolates each column") {
  FrameMatrix m(2, 2, std::vector<float>{0.0f, 1.0f, 4.0f, -1.0f});
  const auto up = upsample_linear(m, 4);
  REQUIRE(up.rows() == 8);
  CHECK(up(1, 0) == doctest::Approx(1.0));
  CHECK(up(2, 1) == doctest::Approx(0.0));
  CHECK(up(7, 0) == doctest::Approx(4.0));
}

TEST_CASE("mel features: zeros, determinism, and channel ordering") {
  const AudioConfig cfg;
  MagnitudeSpectrogram zero{FrameMatrix(3, cfg.bin_count()), cfg};
  const auto zero_mel = melspec_features(zero, 80);
  for (float v : zero_mel.frames.data()) CHECK(v == 0.0f);

  const auto wave = testing::sine(500.0, 0.5);
  const auto spec = stft(wave, cfg);
  const auto a = melspec_features(spec, 40);
  const auto b = melspec_features(spec, 40);
  CHECK(a == b);
  CHECK(a.dim() == 40);

  // oracle: channel whose HTK center frequency is nearest to the tone
  auto nearest_channel = [](double hz, std::size_t n_mels) {
    const double top = 2595.0 * std::log10(1.0 + 8000.0 / 700.0);
    std::size_t best = 0;
    double best_d = 1e300;
    for (std::size_t m = 0; m < n_mels; ++m) {
      const double c = 700.0 * (std::pow(10.0, top * (m + 1) / (n_mels + 1) / 2595.0) - 1.0);
      if (std::abs(c - hz) < best_d) { best_d = std::abs(c - hz); best = m; }
    }
    return best;
  };
  const auto f1 = melspec_features(stft(testing::sine(1000.0, 0.5), cfg), 80);
  const auto f2 = melspec_features(stft(testing::sine(2000.0, 0.5), cfg), 80);
  const std::size_t c1 = argmax(f1[10]), c2 = argmax(f2[10]);
  CHECK(c1 < c2);
  CHECK(std::abs(static_cast<long>(c1) - static_cast<long>(nearest_channel(1000.0, 80))) <= 1);
  CHECK(std::abs(static_cast<long>(c2) - static_cast<long>(nearest_channel(2000.0, 80))) <= 1);
  CHECK_THROWS_AS(melspec_features(spec, 0), ValidationError);
}
