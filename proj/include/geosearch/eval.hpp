// Copyright 2026 The geosearch Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "geosearch/geometry.hpp"

namespace geosearch {

/// Outcome of n trials on one problem.
struct RunRecord {
  std::string problem_id;
  std::size_t n_trials = 0;
  std::size_t n_correct = 0;
  std::vector<bool> per_trial_success;
  std::uint64_t tokens_generated = 0;  // summed over trials
  std::uint64_t tokens_overhead = 0;   // rollout tokens, summed over trials

  /// Builds a record from per-trial outcomes; counts are derived.
  static RunRecord from_trials(std::string problem_id, std::vector<bool> success,
                               std::uint64_t tokens_generated = 0,
                               std::uint64_t tokens_overhead = 0);
  /// Throws kInvalidArgument when counts disagree with per_trial_success.
  void validate() const;
};

struct PassPoint {
  std::size_t k = 0;
  double pass_rate = 0.0;
};

/// Pass@k points sorted by strictly increasing k.
struct PassCurve {
  std::vector<PassPoint> points;

  /// Sorts by k; throws kInvalidArgument on duplicate k, k = 0 or a rate
  /// outside [0, 1].
  static PassCurve make(std::vector<PassPoint> points);
};

/// 1 - C(n-c, k) / C(n, k). Exact integer binomials while C(n, k) < 2^53,
/// so the result is the correctly rounded ratio; product form beyond.
/// Throws kKExceedsN when k > n, kInvalidArgument when k = 0 or c > n.
double pass_at_k_unbiased(std::size_t n, std::size_t c, std::size_t k);

/// Fraction of the floor(n/k) disjoint blocks (in trial order) holding at
/// least one success. Throws kInsufficientTrials when fewer than k trials.
double pass_at_k_empirical(const std::vector<bool>& per_trial_success, std::size_t k);

enum class PassEstimator { kUnbiased, kEmpirical };

/// Mean Pass@k over records for every k in the grid.
PassCurve pass_curve(std::span<const RunRecord> records, std::span<const std::size_t> k_grid,
                     PassEstimator estimator = PassEstimator::kUnbiased);

/// Trapezoid area under pass rate over log2 k, scaled to [0, 100].
/// Throws kSinglePoint with fewer than two points.
double auc(const PassCurve& curve);

inline constexpr std::size_t kDefaultKGrid[] = {1, 2, 4, 8, 16, 32, 64, 128};

struct DiversityStats {
  double n_eff = 1.0;
  double mean_curvature_kappa = 0.0;  // radians
  double mean_pairwise_dot = 0.0;
};

/// Participation ratio (tr C)^2 / tr(C^2) of the candidates' covariance; 1
/// when all candidates coincide. Throws kTooFewAnchors below 2 candidates.
double effective_size(std::span<const UnitAnchor> candidates);

/// Mean turning angle between the incoming and outgoing geodesic directions
/// at each interior anchor. Interior points whose neighbours coincide with
/// them (or are antipodal) are skipped. Throws kTooFewAnchors below 3.
double mean_curvature(std::span<const UnitAnchor> anchors);

/// Mean of a_i . a_j over i < j. Throws kTooFewAnchors below 2.
double mean_pairwise_dot(std::span<const UnitAnchor> candidates);

/// n_eff and pairwise dot averaged over boundaries, kappa along the selected
/// sequence.
DiversityStats diversity_stats(const std::vector<std::vector<UnitAnchor>>& candidates_per_boundary,
                               std::span<const UnitAnchor> selected);

struct CostReport {
  double avg_tokens = 0.0;            // end-to-end tokens per trajectory, mean over problems
  double avg_generated = 0.0;         // per trajectory
  double avg_overhead = 0.0;          // per trajectory
  double overhead_ratio = 1.0;        // (generated + overhead) / generated
  std::optional<double> vs_baseline;  // avg_tokens / baseline_tokens
};

/// Throws kInvalidArgument on an empty record list.
CostReport cost_report(std::span<const RunRecord> records, std::uint64_t baseline_tokens = 0);

struct PairedTest {
  std::size_t n = 0;
  double mean_diff = 0.0;
  double t = 0.0;
  double p_two_sided = 1.0;
  double p_greater = 1.0;  // H1: mean(a - b) > 0
};

/// Paired Student t-test on a - b. Throws kInvalidArgument with fewer than
/// two pairs or mismatched lengths.
PairedTest paired_t_test(std::span<const double> a, std::span<const double> b);

/// `k,pass` rows.
void write_pass_curve_csv(std::ostream& out, const PassCurve& curve);

}  // namespace geosearch
