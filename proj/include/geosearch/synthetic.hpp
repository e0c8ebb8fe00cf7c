// Copyright 2026 The geosearch Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "geosearch/backend.hpp"
#include "geosearch/geometry.hpp"

namespace geosearch {

/// One latent solution mode of a synthetic problem.
struct SyntheticMode {
  UnitAnchor code;
  TokenSeq answer;
  bool is_correct = false;
  double noise = 0.0;  // emission noise mass in [0, 1); also scales hidden-state jitter
};

struct WorldSettings {
  double steering_gain = 10.0;   // beta: weight of anchor . code in the mode prior
  double context_gain = 0.0;     // weight of the context's own latent . code in the prior
  double trajectory_noise = 0.05;
  double blend = 0.3;            // hidden-state interpolation rate per token
  double hidden_scale = 16.0;    // norm of an embedded code in hidden space
  std::size_t vocab = 0;         // includes the end token (vocab-2) and delimiter (vocab-1)
  std::uint64_t seed = 0;
  std::optional<std::size_t> lure_mode;  // non-answer tokens lean toward this mode's code
  double lure_weight = 0.0;
};

/// Desk-scale reasoning world. The model is a mixture over modes: each mode
/// emits its answer deterministically except for `noise` mass spread
/// uniformly over the non-delimiter vocabulary. The mixture prior is
/// softmax(steering_gain * anchor.code_m + context_gain * context.code_m);
/// the next-token distribution is the posterior predictive given the answer
/// tokens already in the context.
///
/// Invariants: >= 1 mode, >= 1 correct, pairwise code dot < 0.9, answer
/// tokens unique across all (mode, position) and below vocab - 2.
class SyntheticWorld {
 public:
  SyntheticWorld(std::vector<SyntheticMode> modes, WorldSettings settings);

  const std::vector<SyntheticMode>& modes() const noexcept { return modes_; }
  const WorldSettings& settings() const noexcept { return settings_; }
  std::size_t dim() const noexcept { return modes_.front().code.dim(); }
  std::size_t vocab() const noexcept { return settings_.vocab; }
  TokenId end_id() const noexcept { return static_cast<TokenId>(settings_.vocab - 2); }
  TokenId eoc_id() const noexcept { return static_cast<TokenId>(settings_.vocab - 1); }

  /// (mode, position) of an answer token, if it is one.
  std::optional<std::pair<std::size_t, std::size_t>> locate(TokenId token) const;

  /// The token mode m emits at answer position pos (end token past the answer).
  TokenId emission(std::size_t mode, std::size_t pos) const;

  /// Mode whose final answer token is the last answer token in `output`.
  std::optional<std::size_t> judge(std::span<const TokenId> output) const;

  /// Mode prior softmax(steering_gain * steering.code + context_gain * context.code).
  /// Either vector may be empty (treated as zero).
  std::vector<double> mode_weights(std::span<const double> steering,
                                   std::span<const double> context_latent = {}) const;

 private:
  std::vector<SyntheticMode> modes_;
  WorldSettings settings_;
  std::vector<std::int64_t> token_owner_;  // mode*2^32 + pos, or -1
};

struct WorldParams {
  std::size_t n_modes = 8;
  std::size_t n_correct = 3;
  std::size_t answer_len = 24;
  std::size_t n_filler = 64;  // query / noise tokens
  std::size_t d_z = 64;
  double steering_gain = 10.0;
  double context_gain = 0.0;
  double trajectory_noise = 0.05;  // noise of correct modes
  double incorrect_noise = 0.05;   // noise of incorrect modes
  double blend = 0.3;
  double hidden_scale = 16.0;
  double lure_weight = 0.0;  // > 0: query tokens lean toward one incorrect mode
  std::uint64_t seed = 0;
};

/// Seeded world: random mode codes (pairwise dot < 0.9), answers on disjoint
/// token ranges after the filler tokens, n_correct modes chosen at random.
/// With lure_weight > 0 a random incorrect mode becomes the lure.
SyntheticWorld make_world(const WorldParams& params);

struct SyntheticOptions {
  std::size_t d_h = 128;
  std::size_t rank_r = 8;
  std::uint64_t injection_seed = 0;
  bool zero_injection = false;  // debug: injectors zeroed, readout kept
  std::size_t max_context = 0;  // 0 = unlimited; otherwise InvalidContext above it
};

/// Backend realizing a SyntheticWorld. Hidden states evolve as
/// h <- (1-blend) h + blend * target(token) + jitter, where target embeds the
/// token's direction through W^T; reported states include the injected
/// residual. The anchor reaches the mode prior only through the injection:
/// the model reads it back with a fixed least-squares readout of the nominal
/// injectors, so zeroed injectors give an unsteered model.
///
/// Calls are pure given their stream id, so concurrent use is safe.
class SyntheticBackend final : public Backend {
 public:
  SyntheticBackend(SyntheticWorld world, SyntheticOptions options = {});

  const BackendInfo& info() const override { return info_; }
  const InjectionSpec& injection() const override { return spec_; }
  const SyntheticWorld& world() const noexcept { return world_; }

  RolloutTrace rollout(const ContextWindow& ctx, const std::optional<UnitAnchor>& anchor,
                       std::size_t steps, double temperature, std::uint64_t stream) override;

  ChunkResult generate_chunk(const ContextWindow& ctx, const std::optional<UnitAnchor>& anchor,
                             std::size_t max_len, double temperature,
                             std::uint64_t stream) override;

  /// Next-token distribution over the vocabulary after `ctx`, conditioned
  /// on `anchor` directly (no injection round trip).
  std::vector<double> step_distribution(const ContextWindow& ctx,
                                        const std::optional<UnitAnchor>& anchor) const;

  /// Anchor-space signal the model perceives from the injected residual.
  std::vector<double> perceived_steering(const std::optional<UnitAnchor>& anchor) const;

 private:
  struct State;
  struct Generation;

  State scan(std::span<const TokenId> tokens, std::span<const double> steering) const;
  std::vector<double> distribution(const State& state) const;
  void advance(State& state, TokenId token, RandomStream* jitter) const;
  Generation generate(const ContextWindow& ctx, const std::optional<UnitAnchor>& anchor,
                      std::size_t steps, double temperature, std::uint64_t stream) const;
  void check_context(const ContextWindow& ctx) const;

  SyntheticWorld world_;
  SyntheticOptions options_;
  InjectionSpec spec_;
  InjectionSpec nominal_;
  BackendInfo info_;
  Matrix readout_;                     // d_z x (n_layers * d_h)
  std::vector<std::vector<double>> targets_;  // per token, length d_h
};

/// Free-function form of SyntheticBackend::step_distribution.
std::vector<double> synthetic_step_distribution(const SyntheticBackend& backend,
                                                const ContextWindow& ctx,
                                                const UnitAnchor& anchor);

}  // namespace geosearch
