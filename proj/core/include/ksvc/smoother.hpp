#pragma once

#include <optional>
#include <span>
#include <vector>

#include "ksvc/types.hpp"

namespace ksvc::smoother {

struct SmootherConfig {
  double m = 0.3;           // weight of the concatenation term
  std::size_t k = 4;        // candidates kept per frame
  std::size_t max_iters = 500;
  double step_size = 0.05;  // initial projected-gradient step
  double tol = 1e-7;        // stop when an accepted step gains less than this

  void validate() const;
};

enum class Direction { kLeft, kRight };

/// Neighbouring row of `index` inside the same reference utterance, if any.
std::optional<std::size_t> continuation(const ReferencePool& pool, std::size_t index,
                                        Direction direction);

/// Median with the even-count convention (mean of the two middle values).
double median(std::vector<double> values);

/// Reselection score, higher is better:
///   cos(candidate, source) + m * median{cos(candidate, C') : C' in prev}.
/// A zero-norm candidate scores -infinity.
double concat_score(std::span<const float> candidate, std::span<const float> source_frame,
                    const CandidateSet& prev, const ReferencePool& pool, double m);

/// Autoregressive reselection. A_0 is the first kNN set; every later A_t is
/// the top-k (by concat_score against S_t and A_{t-1}) of the kNN set at t
/// together with the right continuations of A_{t-1}.
std::vector<CandidateSet> reselect(const ReferencePool& pool, const FeatureSequence& source,
                                   const std::vector<CandidateSet>& knn_sets,
                                   const SmootherConfig& cfg);

/// Concatenation objective
///   sum_{t>=1} |L_t - V_{t-1}|^2 + |R_{t-1} - V_t|^2
/// evaluated at the sets' current weights. V blends the candidate rows, R
/// and L blend their right and left continuations; a candidate at an
/// utterance edge stands in for its own missing continuation.
double concat_objective(const ReferencePool& pool, const std::vector<CandidateSet>& sets);

struct WeightOptimization {
  std::vector<CandidateSet> sets;
  double objective_before = 0.0;  // at uniform weights
  double objective_after = 0.0;
  std::size_t iterations = 0;
};

/// Projected gradient descent on all blending weights jointly, starting from
/// uniform weights. Candidate indices are left untouched. The objective
/// never increases: a step that would raise it is halved until it does not.
WeightOptimization optimize_weights(const ReferencePool& pool,
                                    const std::vector<CandidateSet>& sets,
                                    const SmootherConfig& cfg);

/// Euclidean projection onto the probability simplex.
std::vector<double> project_simplex(std::span<const double> v);

/// Mean of 1 - cos(frame_t, frame_{t+1}) over consecutive pairs; pairs that
/// involve a zero-norm frame are skipped. Requires at least two frames.
double roughness(const FeatureSequence& seq);

}  // namespace ksvc::smoother
