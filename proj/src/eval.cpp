// Copyright 2026 The geosearch Authors
// SPDX-License-Identifier: Apache-2.0

#include "geosearch/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>
#include <string>

#include <Eigen/Dense>
#include <boost/math/distributions/students_t.hpp>

#include "geosearch/error.hpp"
#include "geosearch/text.hpp"

namespace geosearch {

namespace {

constexpr std::uint64_t kExactLimit = std::uint64_t{1} << 53;

// C(n, k) if it stays below 2^53.
std::optional<std::uint64_t> exact_binomial(std::size_t n, std::size_t k) {
  if (k > n) return 0;
  k = std::min(k, n - k);
  unsigned __int128 r = 1;
  for (std::size_t i = 0; i < k; ++i) {
    r = r * (n - i) / (i + 1);
    if (r >= kExactLimit) return std::nullopt;
  }
  return static_cast<std::uint64_t>(r);
}

Eigen::MatrixXd stack(std::span<const UnitAnchor> anchors) {
  const std::size_t dim = anchors.front().dim();
  Eigen::MatrixXd x(static_cast<Eigen::Index>(anchors.size()), static_cast<Eigen::Index>(dim));
  for (std::size_t i = 0; i < anchors.size(); ++i) {
    if (anchors[i].dim() != dim) {
      throw Error(ErrorCode::kShapeMismatch, "anchors of different dimension");
    }
    for (std::size_t c = 0; c < dim; ++c) {
      x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = anchors[i][c];
    }
  }
  return x;
}

}  // namespace

RunRecord RunRecord::from_trials(std::string problem_id, std::vector<bool> success,
                                 std::uint64_t tokens_generated, std::uint64_t tokens_overhead) {
  RunRecord r;
  r.problem_id = std::move(problem_id);
  r.n_trials = success.size();
  r.n_correct = static_cast<std::size_t>(std::count(success.begin(), success.end(), true));
  r.per_trial_success = std::move(success);
  r.tokens_generated = tokens_generated;
  r.tokens_overhead = tokens_overhead;
  return r;
}

void RunRecord::validate() const {
  if (n_trials == 0) throw Error(ErrorCode::kInvalidArgument, problem_id + ": n_trials must be >= 1");
  if (n_correct > n_trials) {
    throw Error(ErrorCode::kInvalidArgument, problem_id + ": n_correct exceeds n_trials");
  }
  if (!per_trial_success.empty()) {
    const auto hits =
        static_cast<std::size_t>(std::count(per_trial_success.begin(), per_trial_success.end(), true));
    if (per_trial_success.size() != n_trials || hits != n_correct) {
      throw Error(ErrorCode::kInvalidArgument,
                  problem_id + ": per_trial_success disagrees with n_trials/n_correct");
    }
  }
}

PassCurve PassCurve::make(std::vector<PassPoint> points) {
  std::sort(points.begin(), points.end(),
            [](const PassPoint& a, const PassPoint& b) { return a.k < b.k; });
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (points[i].k == 0) throw Error(ErrorCode::kInvalidArgument, "k must be >= 1");
    if (!(points[i].pass_rate >= 0.0 && points[i].pass_rate <= 1.0)) {
      throw Error(ErrorCode::kInvalidArgument, "pass rate outside [0, 1]");
    }
    if (i > 0 && points[i].k == points[i - 1].k) {
      throw Error(ErrorCode::kInvalidArgument, "duplicate k " + std::to_string(points[i].k));
    }
  }
  return PassCurve{std::move(points)};
}

double pass_at_k_unbiased(std::size_t n, std::size_t c, std::size_t k) {
  if (k == 0) throw Error(ErrorCode::kInvalidArgument, "k must be >= 1");
  if (k > n) {
    throw Error(ErrorCode::kKExceedsN,
                "k = " + std::to_string(k) + " exceeds n = " + std::to_string(n));
  }
  if (c > n) throw Error(ErrorCode::kInvalidArgument, "c exceeds n");
  if (n - c < k) return 1.0;
  if (c == 0) return 0.0;
  const auto total = exact_binomial(n, k);
  if (total) {
    const std::uint64_t fail = *exact_binomial(n - c, k);
    return static_cast<double>(*total - fail) / static_cast<double>(*total);
  }
  double fail = 1.0;
  for (std::size_t i = n - c + 1; i <= n; ++i) {
    fail *= 1.0 - static_cast<double>(k) / static_cast<double>(i);
  }
  return 1.0 - fail;
}

double pass_at_k_empirical(const std::vector<bool>& per_trial_success, std::size_t k) {
  if (k == 0) throw Error(ErrorCode::kInvalidArgument, "k must be >= 1");
  const std::size_t n = per_trial_success.size();
  if (n < k) {
    throw Error(ErrorCode::kInsufficientTrials,
                std::to_string(n) + " trials for k = " + std::to_string(k));
  }
  const std::size_t blocks = n / k;
  std::size_t hit = 0;
  for (std::size_t b = 0; b < blocks; ++b) {
    for (std::size_t i = b * k; i < (b + 1) * k; ++i) {
      if (per_trial_success[i]) {
        ++hit;
        break;
      }
    }
  }
  return static_cast<double>(hit) / static_cast<double>(blocks);
}

PassCurve pass_curve(std::span<const RunRecord> records, std::span<const std::size_t> k_grid,
                     PassEstimator estimator) {
  if (records.empty()) throw Error(ErrorCode::kInvalidArgument, "no run records");
  std::vector<PassPoint> points;
  for (std::size_t k : k_grid) {
    double sum = 0.0;
    for (const RunRecord& r : records) {
      r.validate();
      if (estimator == PassEstimator::kUnbiased) {
        sum += pass_at_k_unbiased(r.n_trials, r.n_correct, k);
      } else {
        if (r.per_trial_success.empty()) {
          throw Error(ErrorCode::kInvalidArgument,
                      r.problem_id + ": empirical Pass@k needs per-trial outcomes");
        }
        sum += pass_at_k_empirical(r.per_trial_success, k);
      }
    }
    points.push_back({k, sum / static_cast<double>(records.size())});
  }
  return PassCurve::make(std::move(points));
}

double auc(const PassCurve& curve) {
  const auto& p = curve.points;
  if (p.size() < 2) throw Error(ErrorCode::kSinglePoint, "AUC needs at least two points");
  double area = 0.0;
  for (std::size_t i = 0; i + 1 < p.size(); ++i) {
    const double w = std::log2(static_cast<double>(p[i + 1].k)) - std::log2(static_cast<double>(p[i].k));
    area += w * (p[i + 1].pass_rate + p[i].pass_rate) / 2.0;
  }
  const double span =
      std::log2(static_cast<double>(p.back().k)) - std::log2(static_cast<double>(p.front().k));
  return 100.0 * area / span;
}

double effective_size(std::span<const UnitAnchor> candidates) {
  if (candidates.size() < 2) throw Error(ErrorCode::kTooFewAnchors, "n_eff needs >= 2 candidates");
  Eigen::MatrixXd x = stack(candidates);
  x.rowwise() -= x.colwise().mean();
  // The Gram matrix shares the covariance's nonzero spectrum and is K x K.
  const Eigen::MatrixXd gram = x * x.transpose();
  const double trace = gram.trace();
  const double sq = gram.squaredNorm();
  if (trace <= 1e-24 || sq <= 0.0) return 1.0;
  return trace * trace / sq;
}

double mean_curvature(std::span<const UnitAnchor> anchors) {
  if (anchors.size() < 3) throw Error(ErrorCode::kTooFewAnchors, "kappa needs >= 3 anchors");
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 1; i + 1 < anchors.size(); ++i) {
    const std::vector<double> back = log_map_direction(anchors[i], anchors[i - 1].coords());
    const std::vector<double> ahead = log_map_direction(anchors[i], anchors[i + 1].coords());
    if (back.empty() || ahead.empty()) continue;
    const double c = std::clamp(-dot(back, ahead), -1.0, 1.0);
    sum += std::acos(c);
    ++count;
  }
  return count == 0 ? 0.0 : sum / static_cast<double>(count);
}

double mean_pairwise_dot(std::span<const UnitAnchor> candidates) {
  if (candidates.size() < 2) throw Error(ErrorCode::kTooFewAnchors, "need >= 2 candidates");
  double sum = 0.0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    for (std::size_t j = i + 1; j < candidates.size(); ++j) {
      sum += candidates[i].dot(candidates[j]);
      ++pairs;
    }
  }
  return sum / static_cast<double>(pairs);
}

DiversityStats diversity_stats(const std::vector<std::vector<UnitAnchor>>& candidates_per_boundary,
                               std::span<const UnitAnchor> selected) {
  if (candidates_per_boundary.empty()) {
    throw Error(ErrorCode::kTooFewAnchors, "no candidate sets");
  }
  DiversityStats stats;
  double n_eff = 0.0;
  double pair_dot = 0.0;
  for (const auto& set : candidates_per_boundary) {
    n_eff += effective_size(set);
    pair_dot += mean_pairwise_dot(set);
  }
  const auto boundaries = static_cast<double>(candidates_per_boundary.size());
  stats.n_eff = n_eff / boundaries;
  stats.mean_pairwise_dot = pair_dot / boundaries;
  stats.mean_curvature_kappa = mean_curvature(selected);
  return stats;
}

CostReport cost_report(std::span<const RunRecord> records, std::uint64_t baseline_tokens) {
  if (records.empty()) throw Error(ErrorCode::kInvalidArgument, "no run records");
  CostReport rep;
  double gen_total = 0.0;
  double over_total = 0.0;
  for (const RunRecord& r : records) {
    r.validate();
    const auto n = static_cast<double>(r.n_trials);
    rep.avg_generated += static_cast<double>(r.tokens_generated) / n;
    rep.avg_overhead += static_cast<double>(r.tokens_overhead) / n;
    gen_total += static_cast<double>(r.tokens_generated);
    over_total += static_cast<double>(r.tokens_overhead);
  }
  const auto m = static_cast<double>(records.size());
  rep.avg_generated /= m;
  rep.avg_overhead /= m;
  rep.avg_tokens = rep.avg_generated + rep.avg_overhead;
  rep.overhead_ratio = gen_total > 0.0 ? (gen_total + over_total) / gen_total : 1.0;
  if (baseline_tokens > 0) rep.vs_baseline = rep.avg_tokens / static_cast<double>(baseline_tokens);
  return rep;
}

PairedTest paired_t_test(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size() || a.size() < 2) {
    throw Error(ErrorCode::kInvalidArgument, "paired test needs two equal samples of size >= 2");
  }
  PairedTest out;
  out.n = a.size();
  const auto n = static_cast<double>(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out.mean_diff += a[i] - b[i];
  out.mean_diff /= n;
  double ss = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i] - out.mean_diff;
    ss += d * d;
  }
  const double se = std::sqrt(ss / (n - 1.0) / n);
  if (se == 0.0) {
    if (out.mean_diff == 0.0) return out;
    out.t = std::copysign(std::numeric_limits<double>::infinity(), out.mean_diff);
    out.p_two_sided = 0.0;
    out.p_greater = out.mean_diff > 0.0 ? 0.0 : 1.0;
    return out;
  }
  out.t = out.mean_diff / se;
  const boost::math::students_t dist(n - 1.0);
  out.p_greater = boost::math::cdf(boost::math::complement(dist, out.t));
  out.p_two_sided = 2.0 * boost::math::cdf(boost::math::complement(dist, std::fabs(out.t)));
  return out;
}

void write_pass_curve_csv(std::ostream& out, const PassCurve& curve) {
  out << "k,pass\n";
  for (const PassPoint& p : curve.points) out << p.k << ',' << format_real(p.pass_rate) << '\n';
}

}  // namespace geosearch
