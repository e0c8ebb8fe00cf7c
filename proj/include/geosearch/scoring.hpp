// Copyright 2026 The geosearch Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>

#include "geosearch/backend.hpp"
#include "geosearch/geometry.hpp"

namespace geosearch {

struct ScoreWeights {
  double lambda_b = 0.0;
  double lambda_u = 0.0;
  double delta = 0.2;

  /// Throws kInvalidArgument unless weights are finite and non-negative and
  /// delta lies in [0, 1).
  void validate() const;
};

/// Score components of one candidate. total = v_fore - lambda_b * p_bum -
/// lambda_u * p_uni for the weights used (v_fore enters with weight 0 when
/// foresight is ablated).
struct ScoreBreakdown {
  double v_fore = 0.0;  // nats per token
  double p_bum = 0.0;
  double p_uni = 0.0;
  double total = 0.0;
  bool short_trace = false;  // fewer than 3 hidden states, p_bum forced to 0
};

/// Mean step log-probability over the realized steps. Throws kEmptyTrace.
double foresight_value(std::span<const double> step_logprobs);
double foresight_value(const RolloutTrace& trace);

struct Bumpiness {
  double value = 0.0;
  bool short_trace = false;
};

/// Mean squared second difference of the hidden-state sequence; 0 with the
/// short-trace flag when fewer than 3 states are given.
Bumpiness bumpiness(const HiddenStates& states);

double total_score(double v_fore, double p_bum, double p_uni, const ScoreWeights& weights);

/// Scales applied to each term; ablations zero some of them.
struct ScoreTerms {
  double fore = 1.0;
  double lambda_b = 0.0;
  double lambda_u = 0.0;
  double delta = 0.2;
};

double total_score(double v_fore, double p_bum, double p_uni, const ScoreTerms& terms);

/// Scores a candidate anchor from its rollout against the previous anchor.
ScoreBreakdown score_candidate(const RolloutTrace& trace, const UnitAnchor& candidate,
                               const UnitAnchor& previous, const ScoreTerms& terms);

}  // namespace geosearch
