#pragma once

#include <span>
#include <vector>

#include "ksvc/types.hpp"

namespace ksvc::matcher {

/// One reference utterance: features, pitch and harmonics on a shared frame grid.
struct Utterance {
  FeatureSequence features;
  PitchTrack pitch;
  HarmonicTable harmonics;
};

/// Concatenates utterances into a pool, caching row norms and unit rows.
/// Zero-norm rows stay in the pool but are never returned by a query.
ReferencePool build_pool(const std::vector<Utterance>& utterances);

/// Cosine similarity between pool row `row` and an already unit-normalized
/// query. Every similarity in the engine goes through this function, so
/// rankings computed in different places agree bit-for-bit.
double similarity(const ReferencePool& pool, std::size_t row, std::span<const double> unit_query);

/// Unit-normalized copy of a feature row (all zeros when the norm is zero).
std::vector<double> normalize(std::span<const float> v);

/// Matchable pool rows ranked by descending similarity to `unit_query`,
/// ties broken by lower index, truncated to `count`.
std::vector<std::size_t> top_by_similarity(const ReferencePool& pool,
                                           std::span<const double> unit_query, std::size_t count);

/// kNN-VC matching: the k most similar pool rows for every source frame,
/// with uniform weights.
std::vector<CandidateSet> knn_query(const ReferencePool& pool, const FeatureSequence& source,
                                    std::size_t k);

/// Row t = sum_i w_t[i] * pool.features[A_t[i]].
FeatureSequence average_candidates(const ReferencePool& pool,
                                   const std::vector<CandidateSet>& sets);

/// Top-k' by similarity, then re-ranked by |log2(f0_candidate / target_f0)|
/// (unvoiced candidates last, ties kept in similarity order) and cut to k.
/// For an unvoiced target this is the plain top-k by similarity.
CandidateSet select_harmonic_candidates(const ReferencePool& pool,
                                        std::span<const float> source_frame, double target_f0,
                                        std::size_t k_prime, std::size_t k);

/// Frame-wise select_harmonic_candidates over a whole source sequence.
std::vector<CandidateSet> select_harmonic_sets(const ReferencePool& pool,
                                               const FeatureSequence& source,
                                               const PitchTrack& target_pitch,
                                               std::size_t k_prime, std::size_t k);

}  // namespace ksvc::matcher
