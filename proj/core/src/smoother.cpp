#include "ksvc/smoother.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "ksvc/matcher.hpp"

namespace ksvc::smoother {
namespace {

using ConstVec = Eigen::Map<const Eigen::VectorXd>;

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double dot(std::span<const double> a, std::span<const double> b) {
  return ConstVec(a.data(), static_cast<Eigen::Index>(a.size()))
      .dot(ConstVec(b.data(), static_cast<Eigen::Index>(b.size())));
}

bool is_zero(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return x == 0.0; });
}

double prev_median(const ReferencePool& pool, std::span<const double> unit_candidate,
                   const CandidateSet& prev) {
  std::vector<double> sims;
  sims.reserve(prev.size());
  for (std::size_t j : prev.indices) sims.push_back(matcher::similarity(pool, j, unit_candidate));
  return median(std::move(sims));
}

// Score of pool row `row`; the source term goes through matcher::similarity
// exactly as knn_query does, so m = 0 reproduces the kNN ranking bit-for-bit.
double score_row(const ReferencePool& pool, std::size_t row, std::span<const double> unit_source,
                 const CandidateSet& prev, double m) {
  if (!pool.matchable[row]) return kNegInf;
  const double src = matcher::similarity(pool, row, unit_source);
  if (m == 0.0) return src;
  return src + m * prev_median(pool, pool.normalized_row(row), prev);
}

// Dense per-frame blocks: rows of the candidates (V), of their right
// continuations (R) and of their left continuations (L).
struct FrameBlocks {
  Eigen::MatrixXd v, r, l;  // k x D each
};

std::vector<FrameBlocks> gather_blocks(const ReferencePool& pool,
                                       const std::vector<CandidateSet>& sets) {
  const std::size_t dim = pool.dim();
  auto copy_row = [&](Eigen::MatrixXd& m, std::size_t r, std::size_t pool_row) {
    const auto src = pool.features[pool_row];
    for (std::size_t d = 0; d < dim; ++d) m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(d)) = src[d];
  };
  std::vector<FrameBlocks> blocks(sets.size());
  for (std::size_t t = 0; t < sets.size(); ++t) {
    const auto& idx = sets[t].indices;
    const auto k = static_cast<Eigen::Index>(idx.size());
    auto& b = blocks[t];
    b.v.resize(k, static_cast<Eigen::Index>(dim));
    b.r.resize(k, static_cast<Eigen::Index>(dim));
    b.l.resize(k, static_cast<Eigen::Index>(dim));
    for (std::size_t i = 0; i < idx.size(); ++i) {
      copy_row(b.v, i, idx[i]);
      copy_row(b.r, i, continuation(pool, idx[i], Direction::kRight).value_or(idx[i]));
      copy_row(b.l, i, continuation(pool, idx[i], Direction::kLeft).value_or(idx[i]));
    }
  }
  return blocks;
}

struct Blend {
  Eigen::VectorXd v, r, l;
};

std::vector<Blend> blend_all(const std::vector<FrameBlocks>& blocks,
                             const std::vector<Eigen::VectorXd>& w) {
  std::vector<Blend> out(blocks.size());
  for (std::size_t t = 0; t < blocks.size(); ++t) {
    out[t].v = blocks[t].v.transpose() * w[t];
    out[t].r = blocks[t].r.transpose() * w[t];
    out[t].l = blocks[t].l.transpose() * w[t];
  }
  return out;
}

double objective(const std::vector<Blend>& b) {
  double total = 0.0;
  for (std::size_t t = 1; t < b.size(); ++t) {
    total += (b[t].l - b[t - 1].v).squaredNorm() + (b[t - 1].r - b[t].v).squaredNorm();
  }
  return total;
}

std::vector<Eigen::VectorXd> gradient(const std::vector<FrameBlocks>& blocks,
                                      const std::vector<Blend>& b) {
  std::vector<Eigen::VectorXd> g(blocks.size());
  for (std::size_t t = 0; t < blocks.size(); ++t) g[t] = Eigen::VectorXd::Zero(blocks[t].v.rows());
  for (std::size_t t = 1; t < blocks.size(); ++t) {
    const Eigen::VectorXd left_err = b[t].l - b[t - 1].v;   // L_t - V_{t-1}
    const Eigen::VectorXd right_err = b[t].v - b[t - 1].r;  // V_t - R_{t-1}
    g[t] += 2.0 * (blocks[t].l * left_err + blocks[t].v * right_err);
    g[t - 1] -= 2.0 * (blocks[t - 1].v * left_err + blocks[t - 1].r * right_err);
  }
  return g;
}

std::vector<Eigen::VectorXd> weights_of(const std::vector<CandidateSet>& sets) {
  std::vector<Eigen::VectorXd> w(sets.size());
  for (std::size_t t = 0; t < sets.size(); ++t) {
    w[t] = ConstVec(sets[t].weights.data(), static_cast<Eigen::Index>(sets[t].weights.size()));
  }
  return w;
}

}  // namespace

void SmootherConfig::validate() const {
  if (!(m >= 0.0) || !std::isfinite(m)) throw ValidationError("m must be a finite value >= 0");
  if (k == 0) throw ValidationError("k must be at least 1");
  if (!(step_size > 0.0)) throw ValidationError("step_size must be positive");
  if (!(tol > 0.0)) throw ValidationError("tol must be positive");
}

std::optional<std::size_t> continuation(const ReferencePool& pool, std::size_t index,
                                        Direction direction) {
  const auto span = pool.span_of(index);
  if (!span) return std::nullopt;
  if (direction == Direction::kRight) {
    if (index + 1 < span->end) return index + 1;
    return std::nullopt;
  }
  if (index > span->begin) return index - 1;
  return std::nullopt;
}

double median(std::vector<double> values) {
  if (values.empty()) throw ValidationError("median of an empty set");
  const std::size_t n = values.size();
  std::sort(values.begin(), values.end());
  return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

double concat_score(std::span<const float> candidate, std::span<const float> source_frame,
                    const CandidateSet& prev, const ReferencePool& pool, double m) {
  if (prev.indices.empty()) throw ValidationError("previous candidate set is empty");
  const auto unit = matcher::normalize(candidate);
  if (is_zero(unit)) return kNegInf;
  const auto src = matcher::normalize(source_frame);
  const double local = dot(unit, src);
  if (m == 0.0) return local;
  return local + m * prev_median(pool, unit, prev);
}

std::vector<CandidateSet> reselect(const ReferencePool& pool, const FeatureSequence& source,
                                   const std::vector<CandidateSet>& knn_sets,
                                   const SmootherConfig& cfg) {
  cfg.validate();
  if (knn_sets.size() != source.frame_count()) {
    throw ValidationError("kNN sets (" + std::to_string(knn_sets.size()) +
                          ") do not match source frames (" +
                          std::to_string(source.frame_count()) + ")");
  }
  if (source.frame_count() > 0 && source.dim() != pool.dim()) {
    throw ValidationError("source dimension does not match pool dimension");
  }
  for (const auto& set : knn_sets) {
    if (set.size() != cfg.k) {
      throw ValidationError("kNN set size " + std::to_string(set.size()) + " != k=" +
                            std::to_string(cfg.k));
    }
  }

  std::vector<CandidateSet> out;
  out.reserve(knn_sets.size());
  if (knn_sets.empty()) return out;
  out.push_back(CandidateSet::uniform(knn_sets.front().indices));

  std::vector<std::size_t> pool_idx;
  std::vector<double> scores;
  for (std::size_t t = 1; t < knn_sets.size(); ++t) {
    const CandidateSet& prev = out.back();
    pool_idx = knn_sets[t].indices;
    for (std::size_t i : prev.indices) {
      if (auto next = continuation(pool, i, Direction::kRight)) {
        if (std::find(pool_idx.begin(), pool_idx.end(), *next) == pool_idx.end()) {
          pool_idx.push_back(*next);
        }
      }
    }

    const auto unit_source = matcher::normalize(source[t]);
    scores.resize(pool_idx.size());
    for (std::size_t c = 0; c < pool_idx.size(); ++c) {
      scores[c] = score_row(pool, pool_idx[c], unit_source, prev, cfg.m);
    }

    std::vector<std::size_t> order(pool_idx.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      if (scores[a] != scores[b]) return scores[a] > scores[b];
      return pool_idx[a] < pool_idx[b];
    });

    std::vector<std::size_t> chosen;
    chosen.reserve(cfg.k);
    for (std::size_t o : order) {
      if (chosen.size() == cfg.k) break;
      if (scores[o] == kNegInf) break;
      chosen.push_back(pool_idx[o]);
    }
    out.push_back(CandidateSet::uniform(std::move(chosen)));
  }
  return out;
}

double concat_objective(const ReferencePool& pool, const std::vector<CandidateSet>& sets) {
  for (const auto& set : sets) validate_candidate_set(set, pool.size());
  const auto blocks = gather_blocks(pool, sets);
  return objective(blend_all(blocks, weights_of(sets)));
}

WeightOptimization optimize_weights(const ReferencePool& pool,
                                    const std::vector<CandidateSet>& sets,
                                    const SmootherConfig& cfg) {
  cfg.validate();
  if (sets.empty()) throw ValidationError("no candidate sets to optimize");

  WeightOptimization result;
  result.sets.reserve(sets.size());
  for (const auto& set : sets) {
    result.sets.push_back(CandidateSet::uniform(set.indices));
    validate_candidate_set(result.sets.back(), pool.size());
  }

  const auto blocks = gather_blocks(pool, result.sets);
  auto w = weights_of(result.sets);
  double current = objective(blend_all(blocks, w));
  result.objective_before = current;

  constexpr int kMaxHalvings = 60;
  double step = cfg.step_size;
  std::vector<Eigen::VectorXd> trial(w.size());
  std::vector<double> buf;

  for (std::size_t iter = 0; iter < cfg.max_iters && current > 0.0; ++iter) {
    const auto g = gradient(blocks, blend_all(blocks, w));
    bool accepted = false;
    double gained = 0.0;
    for (int h = 0; h < kMaxHalvings && !accepted; ++h) {
      bool moved = false;
      for (std::size_t t = 0; t < w.size(); ++t) {
        const Eigen::VectorXd stepped = w[t] - step * g[t];
        buf.assign(stepped.data(), stepped.data() + stepped.size());
        const auto projected = project_simplex(buf);
        trial[t] = ConstVec(projected.data(), static_cast<Eigen::Index>(projected.size()));
        if (!moved && trial[t] != w[t]) moved = true;
      }
      if (!moved) break;
      const double value = objective(blend_all(blocks, trial));
      if (value < current) {
        gained = current - value;
        current = value;
        w.swap(trial);
        accepted = true;
        step *= 2.0;
      } else {
        step *= 0.5;
      }
    }
    if (!accepted) break;
    ++result.iterations;
    if (gained < cfg.tol) break;
  }

  for (std::size_t t = 0; t < w.size(); ++t) {
    result.sets[t].weights.assign(w[t].data(), w[t].data() + w[t].size());
  }
  result.objective_after = current;
  return result;
}

std::vector<double> project_simplex(std::span<const double> v) {
  if (v.empty()) throw ValidationError("cannot project an empty vector");
  std::vector<double> u(v.begin(), v.end());
  std::sort(u.begin(), u.end(), std::greater<>());
  double cumulative = 0.0;
  double theta = 0.0;
  for (std::size_t j = 0; j < u.size(); ++j) {
    cumulative += u[j];
    const double candidate = (cumulative - 1.0) / static_cast<double>(j + 1);
    if (u[j] - candidate > 0.0) theta = candidate;
  }
  std::vector<double> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = std::max(v[i] - theta, 0.0);
  return out;
}

double roughness(const FeatureSequence& seq) {
  if (seq.frame_count() < 2) throw ValidationError("roughness needs at least two frames");
  std::vector<double> prev = matcher::normalize(seq[0]);
  double total = 0.0;
  std::size_t pairs = 0;
  for (std::size_t t = 1; t < seq.frame_count(); ++t) {
    auto cur = matcher::normalize(seq[t]);
    if (!is_zero(prev) && !is_zero(cur)) {
      total += 1.0 - dot(prev, cur);
      ++pairs;
    }
    prev = std::move(cur);
  }
  return pairs == 0 ? 0.0 : total / static_cast<double>(pairs);
}

}  // namespace ksvc::smoother
