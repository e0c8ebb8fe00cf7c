// Copyright 2026 The geosearch Authors
// SPDX-License-Identifier: Apache-2.0

#include "geosearch/scoring.hpp"

#include <cmath>

#include "geosearch/error.hpp"

namespace geosearch {

void ScoreWeights::validate() const {
  if (!(std::isfinite(lambda_b) && lambda_b >= 0.0 && std::isfinite(lambda_u) &&
        lambda_u >= 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "lambda_b and lambda_u must be finite and >= 0");
  }
  if (!(delta >= 0.0 && delta < 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "delta must lie in [0, 1)");
  }
}

double foresight_value(std::span<const double> step_logprobs) {
  if (step_logprobs.empty()) throw Error(ErrorCode::kEmptyTrace, "rollout has no steps");
  double sum = 0.0;
  for (double lp : step_logprobs) sum += lp;
  return sum / static_cast<double>(step_logprobs.size());
}

double foresight_value(const RolloutTrace& trace) { return foresight_value(trace.step_logprobs); }

Bumpiness bumpiness(const HiddenStates& states) {
  const std::size_t m = states.size();
  if (m < 3) return {0.0, true};
  double sum = 0.0;
  for (std::size_t i = 1; i + 1 < m; ++i) {
    const auto prev = states[i - 1];
    const auto cur = states[i];
    const auto next = states[i + 1];
    for (std::size_t k = 0; k < states.dim; ++k) {
      const double d2 = next[k] - 2.0 * cur[k] + prev[k];
      sum += d2 * d2;
    }
  }
  return {sum / static_cast<double>(m - 2), false};
}

double total_score(double v_fore, double p_bum, double p_uni, const ScoreWeights& weights) {
  return v_fore - weights.lambda_b * p_bum - weights.lambda_u * p_uni;
}

double total_score(double v_fore, double p_bum, double p_uni, const ScoreTerms& terms) {
  return terms.fore * v_fore - terms.lambda_b * p_bum - terms.lambda_u * p_uni;
}

ScoreBreakdown score_candidate(const RolloutTrace& trace, const UnitAnchor& candidate,
                               const UnitAnchor& previous, const ScoreTerms& terms) {
  ScoreBreakdown s;
  s.v_fore = foresight_value(trace);
  const Bumpiness b = bumpiness(trace.hidden_states);
  s.p_bum = b.value;
  s.short_trace = b.short_trace;
  s.p_uni = uniformity_penalty(candidate, previous, terms.delta);
  s.total = total_score(s.v_fore, s.p_bum, s.p_uni, terms);
  return s;
}

}  // namespace geosearch
