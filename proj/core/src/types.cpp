#include "ksvc/types.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace ksvc {

void AudioConfig::validate() const {
  if (sample_rate <= 0) throw ValidationError("sample_rate must be positive");
  if (hop_size <= 0) throw ValidationError("hop_size must be positive");
  if (fft_size <= 0 || (fft_size & (fft_size - 1)) != 0) {
    throw ValidationError("fft_size must be a power of two");
  }
  if (hop_size > fft_size) throw ValidationError("hop_size must not exceed fft_size");
}

void Waveform::validate() const {
  if (sample_rate <= 0) throw ValidationError("waveform sample_rate must be positive");
  if (samples.empty()) throw ValidationError("waveform is empty");
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (!std::isfinite(samples[i])) {
      throw ValidationError("waveform sample " + std::to_string(i) + " is not finite");
    }
  }
}

FrameMatrix::FrameMatrix(std::size_t rows, std::size_t cols, std::vector<float> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows_ * cols_) {
    throw ValidationError("matrix data size does not match " + std::to_string(rows_) + "x" +
                          std::to_string(cols_));
  }
}

void FrameMatrix::append_rows(const FrameMatrix& other) {
  if (other.rows_ == 0) return;
  if (rows_ == 0 && cols_ == 0) cols_ = other.cols_;
  if (other.cols_ != cols_) {
    throw ValidationError("cannot append rows of width " + std::to_string(other.cols_) +
                          " to matrix of width " + std::to_string(cols_));
  }
  data_.insert(data_.end(), other.data_.begin(), other.data_.end());
  rows_ += other.rows_;
}

void FeatureSequence::validate() const {
  if (frames.rows() > 0 && frames.cols() == 0) {
    throw ValidationError("feature dimension must be positive");
  }
  const auto& d = frames.data();
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (!std::isfinite(d[i])) {
      throw ValidationError("feature value at frame " + std::to_string(i / frames.cols()) +
                            " is not finite");
    }
  }
}

std::size_t PitchTrack::voiced_count() const {
  return static_cast<std::size_t>(
      std::count_if(f0.begin(), f0.end(), [](float v) { return v > 0.0f; }));
}

std::size_t ReferencePool::matchable_count() const {
  return static_cast<std::size_t>(std::count(matchable.begin(), matchable.end(), true));
}

std::optional<Span> ReferencePool::span_of(std::size_t i) const {
  // spans are sorted by begin after build_pool
  auto it = std::upper_bound(utterance_spans.begin(), utterance_spans.end(), i,
                             [](std::size_t v, const Span& s) { return v < s.begin; });
  if (it == utterance_spans.begin()) return std::nullopt;
  --it;
  if (it->contains(i)) return *it;
  return std::nullopt;
}

CandidateSet CandidateSet::uniform(std::vector<std::size_t> indices) {
  CandidateSet set;
  const double w = indices.empty() ? 0.0 : 1.0 / static_cast<double>(indices.size());
  set.weights.assign(indices.size(), w);
  set.indices = std::move(indices);
  return set;
}

void validate_candidate_set(const CandidateSet& set, std::size_t pool_size) {
  if (set.indices.empty()) throw ValidationError("candidate set is empty");
  if (set.indices.size() != set.weights.size()) {
    throw ValidationError("candidate set has " + std::to_string(set.indices.size()) +
                          " indices but " + std::to_string(set.weights.size()) + " weights");
  }
  for (std::size_t i = 0; i < set.indices.size(); ++i) {
    if (set.indices[i] >= pool_size) {
      throw ValidationError("candidate index " + std::to_string(set.indices[i]) +
                            " out of bounds for pool of " + std::to_string(pool_size));
    }
    for (std::size_t j = 0; j < i; ++j) {
      if (set.indices[j] == set.indices[i]) {
        throw ValidationError("duplicate candidate index " + std::to_string(set.indices[i]));
      }
    }
  }
  double sum = 0.0;
  for (double w : set.weights) {
    if (!(w >= 0.0)) throw ValidationError("candidate weight is negative or NaN");
    sum += w;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw ValidationError("candidate weights do not sum to 1");
}

std::vector<Violation> validate_pool(const ReferencePool& pool) {
  std::vector<Violation> out;
  const std::size_t n = pool.features.frame_count();
  const std::size_t dim = pool.features.dim();

  const auto& fdata = pool.features.frames.data();
  if (fdata.size() != n * dim) {
    out.push_back({"features", std::nullopt, "data size does not match frame_count x dim"});
  } else {
    for (std::size_t i = 0; i < fdata.size(); ++i) {
      if (!std::isfinite(fdata[i])) {
        out.push_back({"features", i / std::max<std::size_t>(dim, 1), "non-finite value"});
        break;
      }
    }
  }

  if (pool.pitch.size() != n) {
    out.push_back({"pitch", std::nullopt,
                   "length " + std::to_string(pool.pitch.size()) + " != frame_count " +
                       std::to_string(n)});
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      const float f = pool.pitch.f0[i];
      if (!std::isfinite(f) || f < 0.0f) {
        out.push_back({"pitch", i, "pitch must be 0 or a positive finite frequency"});
        break;
      }
    }
  }

  if (pool.harmonics.frame_count() != n) {
    out.push_back({"harmonics", std::nullopt,
                   "frame_count " + std::to_string(pool.harmonics.frame_count()) + " != " +
                       std::to_string(n)});
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      const auto row = pool.harmonics.amplitudes.row(i);
      const bool unvoiced = i < pool.pitch.size() && pool.pitch.f0[i] == 0.0f;
      bool bad = false;
      for (float a : row) {
        if (!std::isfinite(a) || a < 0.0f || (unvoiced && a != 0.0f)) bad = true;
      }
      if (bad) {
        out.push_back({"harmonics", i, "amplitudes must be nonnegative and zero when unvoiced"});
        break;
      }
    }
  }

  if (pool.unit_norms.size() != n) {
    out.push_back({"unit_norms", std::nullopt, "length does not match frame_count"});
  }
  if (pool.normalized.size() != n * dim) {
    out.push_back({"normalized", std::nullopt, "size does not match frame_count x dim"});
  }
  if (pool.matchable.size() != n) {
    out.push_back({"matchable", std::nullopt, "length does not match frame_count"});
  }

  // spans must be sorted, disjoint, non-empty and cover [0, n)
  std::size_t expected = 0;
  for (std::size_t s = 0; s < pool.utterance_spans.size(); ++s) {
    const Span& span = pool.utterance_spans[s];
    if (span.begin >= span.end) {
      out.push_back({"utterance_spans", s, "empty or inverted span"});
    } else if (span.begin < expected) {
      out.push_back({"utterance_spans", s, "overlaps previous span at row " +
                                               std::to_string(span.begin)});
    } else if (span.begin > expected) {
      out.push_back({"utterance_spans", s, "gap before row " + std::to_string(span.begin)});
    }
    expected = std::max(expected, span.end);
  }
  if (expected != n) {
    out.push_back({"utterance_spans", std::nullopt,
                   "spans cover " + std::to_string(expected) + " rows, pool has " +
                       std::to_string(n)});
  }
  return out;
}

}  // namespace ksvc
