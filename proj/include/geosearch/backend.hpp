// Copyright 2026 The geosearch Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "geosearch/geometry.hpp"

namespace geosearch {

using TokenId = std::uint32_t;
using TokenSeq = std::vector<TokenId>;

enum class ContextOrigin { kQueryOnly, kQueryPlusSuffix };

struct ContextWindow {
  TokenSeq tokens;
  ContextOrigin origin = ContextOrigin::kQueryOnly;
};

/// Row-major dense matrix.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
  std::span<const double> row(std::size_t r) const { return {data.data() + r * cols, cols}; }

  /// this * x. Throws kShapeMismatch unless x.size() == cols.
  std::vector<double> apply(std::span<const double> x) const;
  bool is_zero() const;
};

/// Sequence of equally sized real vectors stored row-major.
struct HiddenStates {
  std::size_t dim = 0;
  std::vector<double> data;

  HiddenStates() = default;
  explicit HiddenStates(std::size_t d) : dim(d) {}

  std::size_t size() const { return dim == 0 ? 0 : data.size() / dim; }
  bool empty() const { return size() == 0; }
  std::span<const double> operator[](std::size_t i) const { return {data.data() + i * dim, dim}; }
  void push_back(std::span<const double> row);
};

/// Output of an anchor-conditioned look-ahead rollout. tokens, step_logprobs
/// and hidden_states have equal length; shorter than requested only when
/// `terminal` is set.
struct RolloutTrace {
  TokenSeq tokens;
  std::vector<double> step_logprobs;  // nats, each <= 0
  HiddenStates hidden_states;         // top-layer state after each token
  bool terminal = false;
};

struct ChunkResult {
  TokenSeq tokens;
  std::vector<double> h_eoc;  // top-layer state at the end-of-chunk delimiter
  bool terminal = false;
};

/// One injection site: h <- h + b * (a * anchor).
struct InjectionLayer {
  Matrix a;  // r x d_z
  Matrix b;  // d_h x r
};

/// Fixed projection W (d_z x d_h) for anchor extraction and per-layer low-rank
/// injectors, all deterministic functions of `seed`.
///
/// Generator contract: W entries are N(0,1)/sqrt(d_h) drawn row-major from
/// RandomStream(seed, {'W'}), then rows are orthonormalized by modified
/// Gram-Schmidt in row order. Layer l draws A_l entries N(0,1)/sqrt(d_z) from
/// RandomStream(seed, {'A', l}) and B_l entries N(0,1)/sqrt(r) from
/// RandomStream(seed, {'B', l}), both row-major.
struct InjectionSpec {
  std::size_t d_z = 0;
  std::size_t d_h = 0;
  std::size_t rank_r = 0;
  std::uint64_t seed = 0;
  Matrix w;
  std::vector<InjectionLayer> layers;

  static InjectionSpec generate(std::size_t d_z, std::size_t d_h, std::size_t rank_r,
                                std::size_t n_layers, std::uint64_t seed);

  /// Explicit matrices; validates shapes and rank_r <= d_h / 4.
  static InjectionSpec from_matrices(Matrix w, std::vector<InjectionLayer> layers,
                                     std::size_t rank_r, std::uint64_t seed);

  /// Same W, all injectors zero.
  InjectionSpec zeroed() const;

  /// Sum over layers of B_l A_l anchor (the full residual offset).
  std::vector<double> total_injection(std::span<const double> anchor) const;
};

/// normalize(W h). Throws kZeroVector if the projection vanishes.
UnitAnchor extract_anchor(std::span<const double> h_eoc, const InjectionSpec& spec);

/// h + b (a anchor). Throws kShapeMismatch on non-conforming shapes.
std::vector<double> inject(std::span<const double> h, const UnitAnchor& anchor,
                           const InjectionLayer& layer);

struct BackendInfo {
  std::size_t d_h = 0;
  std::size_t vocab = 0;
  TokenId eoc_id = 0;
  bool serial = false;  // engine must serialize calls when true
};

/// Model backend contract. All randomness for a call is derived from the
/// caller-supplied stream id, so identical arguments give identical results.
/// A missing anchor means no injection (plain model).
class Backend {
 public:
  virtual ~Backend() = default;

  virtual const BackendInfo& info() const = 0;
  virtual const InjectionSpec& injection() const = 0;

  virtual RolloutTrace rollout(const ContextWindow& ctx, const std::optional<UnitAnchor>& anchor,
                               std::size_t steps, double temperature, std::uint64_t stream) = 0;

  /// Generates up to max_len tokens, then appends the end-of-chunk delimiter
  /// and reports the top-layer state there.
  virtual ChunkResult generate_chunk(const ContextWindow& ctx,
                                     const std::optional<UnitAnchor>& anchor, std::size_t max_len,
                                     double temperature, std::uint64_t stream) = 0;
};

}  // namespace geosearch
