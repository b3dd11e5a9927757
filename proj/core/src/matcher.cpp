#include "ksvc/matcher.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace ksvc::matcher {
namespace {

using ConstVec = Eigen::Map<const Eigen::VectorXd>;

void check_k(const ReferencePool& pool, std::size_t k, const char* name) {
  if (k == 0) throw ValidationError(std::string(name) + " must be at least 1");
  if (k > pool.matchable_count()) {
    throw ValidationError(std::string(name) + "=" + std::to_string(k) + " exceeds the " +
                          std::to_string(pool.matchable_count()) + " matchable pool rows");
  }
}

void check_dim(const ReferencePool& pool, std::size_t dim) {
  if (dim != pool.dim()) {
    throw ValidationError("feature dimension " + std::to_string(dim) +
                          " does not match pool dimension " + std::to_string(pool.dim()));
  }
}

}  // namespace

ReferencePool build_pool(const std::vector<Utterance>& utterances) {
  if (utterances.empty()) throw ValidationError("reference list is empty");

  ReferencePool pool;
  const std::size_t dim = utterances.front().features.dim();
  const std::size_t harmonics = utterances.front().harmonics.harmonic_count();
  pool.features.frames = FrameMatrix(0, dim);
  pool.harmonics.amplitudes = FrameMatrix(0, harmonics);

  for (std::size_t u = 0; u < utterances.size(); ++u) {
    const Utterance& utt = utterances[u];
    const std::size_t n = utt.features.frame_count();
    const std::string who = "utterance " + std::to_string(u);
    if (utt.pitch.size() != n || utt.harmonics.frame_count() != n) {
      throw ValidationError(who + ": features, pitch and harmonics have different frame counts (" +
                            std::to_string(n) + ", " + std::to_string(utt.pitch.size()) + ", " +
                            std::to_string(utt.harmonics.frame_count()) + ")");
    }
    if (n == 0) throw ValidationError(who + " has no frames");
    if (utt.features.dim() != dim) throw ValidationError(who + ": feature dimension differs");
    if (utt.harmonics.harmonic_count() != harmonics) {
      throw ValidationError(who + ": harmonic count differs");
    }
    utt.features.validate();

    const std::size_t begin = pool.size();
    pool.features.frames.append_rows(utt.features.frames);
    pool.pitch.f0.insert(pool.pitch.f0.end(), utt.pitch.f0.begin(), utt.pitch.f0.end());
    pool.harmonics.amplitudes.append_rows(utt.harmonics.amplitudes);
    pool.utterance_spans.push_back({begin, pool.size()});
  }

  const std::size_t n = pool.size();
  pool.unit_norms.resize(n);
  pool.matchable.resize(n);
  pool.normalized.resize(n * dim);
  for (std::size_t i = 0; i < n; ++i) {
    const auto row = pool.features[i];
    double sq = 0.0;
    for (float v : row) sq += static_cast<double>(v) * v;
    const double norm = std::sqrt(sq);
    pool.unit_norms[i] = norm;
    pool.matchable[i] = norm > 0.0;
    for (std::size_t d = 0; d < dim; ++d) {
      pool.normalized[i * dim + d] = norm > 0.0 ? row[d] / norm : 0.0;
    }
  }
  return pool;
}

std::vector<double> normalize(std::span<const float> v) {
  double sq = 0.0;
  for (float x : v) sq += static_cast<double>(x) * x;
  const double norm = std::sqrt(sq);
  std::vector<double> out(v.size(), 0.0);
  if (norm > 0.0) {
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = v[i] / norm;
  }
  return out;
}

double similarity(const ReferencePool& pool, std::size_t row, std::span<const double> unit_query) {
  const auto r = pool.normalized_row(row);
  return ConstVec(r.data(), static_cast<Eigen::Index>(r.size()))
      .dot(ConstVec(unit_query.data(), static_cast<Eigen::Index>(unit_query.size())));
}

namespace {

std::vector<std::size_t> top_of(const ReferencePool& pool, std::span<const double> sims,
                                std::size_t count) {
  std::vector<std::size_t> order;
  order.reserve(pool.matchable_count());
  for (std::size_t i = 0; i < pool.size(); ++i) {
    if (pool.matchable[i]) order.push_back(i);
  }
  count = std::min(count, order.size());
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(count), order.end(),
                    [&](std::size_t a, std::size_t b) {
                      if (sims[a] != sims[b]) return sims[a] > sims[b];
                      return a < b;
                    });
  order.resize(count);
  return order;
}

}  // namespace

std::vector<std::size_t> top_by_similarity(const ReferencePool& pool,
                                           std::span<const double> unit_query, std::size_t count) {
  std::vector<double> sims(pool.size(), -std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < pool.size(); ++i) {
    if (pool.matchable[i]) sims[i] = similarity(pool, i, unit_query);
  }
  return top_of(pool, sims, count);
}

std::vector<CandidateSet> knn_query(const ReferencePool& pool, const FeatureSequence& source,
                                    std::size_t k) {
  check_dim(pool, source.dim());
  check_k(pool, k, "k");
  const std::size_t n = pool.size();
  const std::size_t frames = source.frame_count();
  // Queries are scored in batches against cache-sized tiles of pool rows so
  // each tile is read from memory once per batch. Scores are identical to
  // top_by_similarity.
  constexpr std::size_t kBatch = 32;
  const std::size_t tile = std::max<std::size_t>(16, (std::size_t{1} << 18) / std::max<std::size_t>(1, pool.dim()));

  std::vector<CandidateSet> sets;
  sets.reserve(frames);
  std::vector<std::vector<double>> queries(kBatch);
  std::vector<double> sims(kBatch * n);
  for (std::size_t first = 0; first < frames; first += kBatch) {
    const std::size_t count = std::min(kBatch, frames - first);
    for (std::size_t q = 0; q < count; ++q) queries[q] = normalize(source[first + q]);
    std::fill(sims.begin(), sims.end(), -std::numeric_limits<double>::infinity());
    for (std::size_t lo = 0; lo < n; lo += tile) {
      const std::size_t hi = std::min(n, lo + tile);
      for (std::size_t q = 0; q < count; ++q) {
        double* row = sims.data() + q * n;
        for (std::size_t i = lo; i < hi; ++i) {
          if (pool.matchable[i]) row[i] = similarity(pool, i, queries[q]);
        }
      }
    }
    for (std::size_t q = 0; q < count; ++q) {
      sets.push_back(CandidateSet::uniform(
          top_of(pool, std::span<const double>(sims.data() + q * n, n), k)));
    }
  }
  return sets;
}

FeatureSequence average_candidates(const ReferencePool& pool,
                                   const std::vector<CandidateSet>& sets) {
  const std::size_t dim = pool.dim();
  FeatureSequence out{FrameMatrix(sets.size(), dim)};
  std::vector<double> acc(dim);
  for (std::size_t t = 0; t < sets.size(); ++t) {
    const CandidateSet& set = sets[t];
    if (set.indices.empty() || set.indices.size() != set.weights.size()) {
      throw ValidationError("candidate set " + std::to_string(t) + " is malformed");
    }
    std::fill(acc.begin(), acc.end(), 0.0);
    for (std::size_t i = 0; i < set.size(); ++i) {
      if (set.indices[i] >= pool.size()) {
        throw ValidationError("candidate index out of bounds at frame " + std::to_string(t));
      }
      const auto row = pool.features[set.indices[i]];
      const double w = set.weights[i];
      for (std::size_t d = 0; d < dim; ++d) acc[d] += w * row[d];
    }
    auto dst = out.frames.row(t);
    for (std::size_t d = 0; d < dim; ++d) dst[d] = static_cast<float>(acc[d]);
  }
  return out;
}

CandidateSet select_harmonic_candidates(const ReferencePool& pool,
                                        std::span<const float> source_frame, double target_f0,
                                        std::size_t k_prime, std::size_t k) {
  check_dim(pool, source_frame.size());
  check_k(pool, k, "k");
  check_k(pool, k_prime, "k'");
  if (k > k_prime) throw ValidationError("k must not exceed k'");

  auto ranked = top_by_similarity(pool, normalize(source_frame), k_prime);
  if (target_f0 > 0.0) {
    const double target = std::log2(target_f0);
    auto distance = [&](std::size_t i) {
      const double f = pool.pitch.f0[i];
      return f > 0.0 ? std::abs(std::log2(f) - target) : std::numeric_limits<double>::infinity();
    };
    std::stable_sort(ranked.begin(), ranked.end(),
                     [&](std::size_t a, std::size_t b) { return distance(a) < distance(b); });
  }
  ranked.resize(k);
  return CandidateSet::uniform(std::move(ranked));
}

std::vector<CandidateSet> select_harmonic_sets(const ReferencePool& pool,
                                               const FeatureSequence& source,
                                               const PitchTrack& target_pitch,
                                               std::size_t k_prime, std::size_t k) {
  if (target_pitch.size() != source.frame_count()) {
    throw ValidationError("target pitch length does not match source frame count");
  }
  std::vector<CandidateSet> sets;
  sets.reserve(source.frame_count());
  for (std::size_t t = 0; t < source.frame_count(); ++t) {
    sets.push_back(select_harmonic_candidates(pool, source[t], target_pitch.f0[t], k_prime, k));
  }
  return sets;
}

}  // namespace ksvc::matcher
