// Copyright 2026 The geosearch Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "geosearch/backend.hpp"
#include "geosearch/geometry.hpp"
#include "geosearch/scoring.hpp"

namespace geosearch {

enum class Ablation { kFull, kNoUni, kNoBum, kNoFore, kRandomAnchor, kTokenSpace };

std::string_view to_string(Ablation mode);
/// Throws kConfig on an unknown name.
Ablation parse_ablation(std::string_view name);
inline constexpr Ablation kAllAblations[] = {Ablation::kFull,    Ablation::kNoUni,
                                             Ablation::kNoBum,   Ablation::kNoFore,
                                             Ablation::kRandomAnchor, Ablation::kTokenSpace};

struct SearchConfig {
  std::size_t chunk_limit_L = 24;
  std::size_t chunk_len_S = 512;
  std::size_t candidates_K = 8;
  std::size_t rollout_s = 32;
  double sigma = 0.1;
  ScoreWeights weights{0.01, 2.0, 0.2};
  std::size_t rank_r = 8;
  std::size_t d_z = 64;
  double temperature = 0.6;
  std::optional<double> rollout_temperature;  // defaults to temperature
  std::uint64_t seed = 0;
  std::size_t parallelism = 1;
  Ablation ablation = Ablation::kFull;

  double effective_rollout_temperature() const {
    return rollout_temperature.value_or(temperature);
  }

  /// Throws kConfig when a field is out of range.
  void validate() const;
};

/// Term scales used for scoring under an ablation mode.
ScoreTerms score_terms(const SearchConfig& config);

struct Candidate {
  UnitAnchor anchor;
  std::optional<ScoreBreakdown> score;  // absent when no rollout was run
  std::size_t rollout_tokens = 0;
};

enum class Selection { kArgmax, kRandom };

struct BoundaryRecord {
  std::size_t step_t = 0;
  std::vector<Candidate> candidates;
  std::size_t selected_index = 0;
  Selection selection = Selection::kArgmax;
  std::size_t rollout_tokens_spent = 0;
  std::size_t context_tokens = 0;
};

enum class Termination { kTerminalToken, kChunkLimit, kStopRule };
std::string_view to_string(Termination t);

struct Trajectory {
  std::vector<TokenSeq> chunks;
  std::vector<BoundaryRecord> boundary_records;
  std::vector<UnitAnchor> anchors;  // z_0 .. z_T
  std::size_t tokens_generated = 0;
  std::size_t rollout_tokens = 0;
  std::size_t total_tokens = 0;    // tokens_generated + rollout_tokens
  std::size_t prefill_tokens = 0;  // context tokens re-encoded over all backend calls
  std::size_t max_context_tokens = 0;
  std::size_t backend_calls = 0;
  Termination terminated_by = Termination::kChunkLimit;
  std::uint64_t trial = 0;

  TokenSeq output() const;
  /// Selected candidate anchors, one per boundary.
  std::vector<UnitAnchor> selected_anchors() const;
  /// Per-boundary ratio 1 + rollout_tokens_spent / S.
  std::vector<double> boundary_overhead_ratios(std::size_t chunk_len_S) const;
};

/// query ++ last_chunk limited to budget_S tokens. The first
/// min(|query|, budget_S / 2) query tokens are pinned; the rest of the budget
/// keeps the rightmost tokens of the remainder.
ContextWindow window(const TokenSeq& query, const TokenSeq& last_chunk, std::size_t budget_S);

/// Samples K candidates around z_prev on per-candidate streams, rolls each
/// out and scores it under the configured ablation. Results do not depend on
/// `config.parallelism`. The first failing candidate (lowest index) aborts.
std::vector<Candidate> evaluate_candidates(const ContextWindow& ctx, const UnitAnchor& z_prev,
                                           const SearchConfig& config, Backend& backend,
                                           std::size_t step_t, std::uint64_t trial = 0);

/// Index of the highest total; ties go to the lowest index.
std::size_t select_argmax(const std::vector<Candidate>& candidates);

/// Runs the chunked latent search for one trial. Every stream is derived
/// from (config.seed, trial, boundary, candidate).
Trajectory run_search(const TokenSeq& query, const SearchConfig& config, Backend& backend,
                      std::uint64_t trial = 0);

/// Token-space boundary step: K plain continuations of rollout_s tokens
/// scored on their own hidden states; the winner's tokens become the prefix
/// of the chunk. `previous_pooled` is the pooled hidden direction of the
/// previous winner (empty at the first boundary) and is updated in place.
struct TokenSpaceStep {
  BoundaryRecord record;
  ChunkResult chunk;
};
TokenSpaceStep token_space_variant(const TokenSeq& query, const TokenSeq& last_chunk,
                                   std::vector<double>& previous_pooled,
                                   const SearchConfig& config, Backend& backend,
                                   std::size_t step_t, std::uint64_t trial = 0);

}  // namespace geosearch
