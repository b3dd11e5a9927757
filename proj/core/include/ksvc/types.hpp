#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace ksvc {

/// Thrown when an input violates a precondition (bad flags, mismatched shapes,
/// malformed data). Maps to exit code 2 in the command-line tool.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Thrown for unreadable, truncated or unwritable files. Exit code 3.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class WindowKind { kHann };

struct AudioConfig {
  int sample_rate = 16000;
  int hop_size = 320;
  int fft_size = 1024;
  WindowKind window = WindowKind::kHann;

  double frame_rate() const { return static_cast<double>(sample_rate) / hop_size; }
  int bin_count() const { return fft_size / 2 + 1; }

  /// Throws ValidationError unless sample_rate > 0, hop_size > 0,
  /// fft_size is a power of two and hop_size <= fft_size.
  void validate() const;
};

struct Waveform {
  std::vector<float> samples;
  int sample_rate = 16000;

  std::size_t size() const { return samples.size(); }
  double duration() const { return static_cast<double>(samples.size()) / sample_rate; }

  /// Length >= 1, positive rate, every sample finite.
  void validate() const;
};

/// Dense row-major T x D matrix of f32 values. Rows are frames.
class FrameMatrix {
 public:
  FrameMatrix() = default;
  FrameMatrix(std::size_t rows, std::size_t cols, float fill = 0.0f)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  FrameMatrix(std::size_t rows, std::size_t cols, std::vector<float> data);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  bool empty() const { return rows_ == 0; }

  std::span<float> row(std::size_t t) { return {data_.data() + t * cols_, cols_}; }
  std::span<const float> row(std::size_t t) const { return {data_.data() + t * cols_, cols_}; }

  float& operator()(std::size_t t, std::size_t d) { return data_[t * cols_ + d]; }
  float operator()(std::size_t t, std::size_t d) const { return data_[t * cols_ + d]; }

  const std::vector<float>& data() const { return data_; }
  std::vector<float>& data() { return data_; }

  void append_rows(const FrameMatrix& other);

  bool operator==(const FrameMatrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<float> data_;
};

/// Frame-level feature vectors (SSL or log-mel). All values finite.
struct FeatureSequence {
  FrameMatrix frames;

  std::size_t frame_count() const { return frames.rows(); }
  std::size_t dim() const { return frames.cols(); }
  std::span<const float> operator[](std::size_t t) const { return frames.row(t); }

  void validate() const;
  bool operator==(const FeatureSequence&) const = default;
};

/// Per-frame fundamental frequency in Hz. 0.0 marks an unvoiced frame.
struct PitchTrack {
  std::vector<float> f0;

  std::size_t size() const { return f0.size(); }
  std::size_t voiced_count() const;

  bool operator==(const PitchTrack&) const = default;
};

/// T x N harmonic amplitudes A_1..A_N; rows of unvoiced frames are zero.
struct HarmonicTable {
  FrameMatrix amplitudes;

  std::size_t frame_count() const { return amplitudes.rows(); }
  std::size_t harmonic_count() const { return amplitudes.cols(); }

  bool operator==(const HarmonicTable&) const = default;
};

/// Half-open row range [begin, end) belonging to one reference utterance.
struct Span {
  std::size_t begin = 0;
  std::size_t end = 0;

  std::size_t size() const { return end - begin; }
  bool contains(std::size_t i) const { return i >= begin && i < end; }
  bool operator==(const Span&) const = default;
};

/// Concatenated reference utterances, ready for matching.
///
/// `normalized` holds each feature row divided by its L2 norm in double
/// precision; rows whose norm is zero are stored as zeros and marked
/// non-matchable.
struct ReferencePool {
  FeatureSequence features;
  std::vector<double> unit_norms;
  std::vector<double> normalized;
  std::vector<bool> matchable;
  PitchTrack pitch;
  HarmonicTable harmonics;
  std::vector<Span> utterance_spans;

  std::size_t size() const { return features.frame_count(); }
  std::size_t dim() const { return features.dim(); }
  std::size_t matchable_count() const;

  std::span<const double> normalized_row(std::size_t i) const {
    return {normalized.data() + i * dim(), dim()};
  }

  /// Span containing row i, if any.
  std::optional<Span> span_of(std::size_t i) const;
};

/// Blending candidates for one target frame: pool row indices A_t with
/// weights on the probability simplex.
struct CandidateSet {
  std::vector<std::size_t> indices;
  std::vector<double> weights;

  std::size_t size() const { return indices.size(); }

  static CandidateSet uniform(std::vector<std::size_t> indices);
  bool operator==(const CandidateSet&) const = default;
};

/// Throws ValidationError unless the set is non-empty, weights and indices
/// have equal length, indices are distinct and < pool_size, and weights are
/// nonnegative and sum to 1 within 1e-9.
void validate_candidate_set(const CandidateSet& set, std::size_t pool_size);

struct Violation {
  std::string field;
  std::optional<std::size_t> index;
  std::string message;
};

/// Checks every ReferencePool invariant. Never throws; returns an empty list
/// for a well-formed pool.
std::vector<Violation> validate_pool(const ReferencePool& pool);

}  // namespace ksvc
