// Copyright 2026 The geosearch Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "geosearch/backend.hpp"
#include "geosearch/random.hpp"
#include "geosearch/synthetic.hpp"
#include "support.hpp"

using namespace geosearch;
using testing::error_of;

namespace {

Matrix identity_block(std::size_t rows, std::size_t cols) {
  Matrix m(rows, cols);
  for (std::size_t i = 0; i < std::min(rows, cols); ++i) m(i, i) = 1.0;
  return m;
}

UnitAnchor axis(std::size_t d, std::size_t i) {
  std::vector<double> v(d, 0.0);
  v[i] = 1.0;
  return normalize(v);
}

// Two modes with orthogonal codes along the first two axes.
SyntheticWorld two_mode_world(double beta, double noise = 0.0, std::size_t d = 4) {
  std::vector<SyntheticMode> modes;
  modes.push_back({axis(d, 0), {10, 11, 12}, true, noise});
  modes.push_back({axis(d, 1), {13, 14, 15}, false, noise});
  WorldSettings s;
  s.steering_gain = beta;
  s.vocab = 20;
  s.seed = 5;
  return SyntheticWorld(std::move(modes), s);
}

SyntheticWorld one_mode_world() {
  std::vector<SyntheticMode> modes;
  modes.push_back({axis(4, 0), {10, 11, 12, 13}, true, 0.0});
  WorldSettings s;
  s.vocab = 16;
  s.seed = 2;
  return SyntheticWorld(std::move(modes), s);
}

}  // namespace

TEST_CASE("extract_anchor with an identity projection") {
  const InjectionSpec spec = InjectionSpec::from_matrices(identity_block(8, 8), {}, 2, 0);
  std::vector<double> h(8, 0.0);
  h[0] = 1.0;
  CHECK(extract_anchor(h, spec)[0] == 1.0);
  for (double& x : h) x *= 10.0;
  CHECK(extract_anchor(h, spec) == extract_anchor(std::vector<double>{1, 0, 0, 0, 0, 0, 0, 0}, spec));
  CHECK(error_of([&] { extract_anchor(std::vector<double>(8, 0.0), spec); }) == ErrorCode::kZeroVector);
  CHECK(error_of([&] { extract_anchor(std::vector<double>(7, 1.0), spec); }) == ErrorCode::kShapeMismatch);
}

TEST_CASE("seeded projection matches an independent reconstruction") {
  const std::size_t d_z = 6;
  const std::size_t d_h = 40;
  const InjectionSpec spec = InjectionSpec::generate(d_z, d_h, 4, 2, 77);

  // Oracle: same Gaussian draws, orthonormalized by Householder QR of W^T
  // with the sign convention of Gram-Schmidt (positive R diagonal).
  RandomStream s(77, {'W'});
  Eigen::MatrixXd wt(d_h, d_z);
  for (std::size_t r = 0; r < d_z; ++r) {
    for (std::size_t c = 0; c < d_h; ++c) wt(c, r) = s.normal() / std::sqrt(double(d_h));
  }
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(wt);
  Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(d_h, d_z);
  for (std::size_t j = 0; j < d_z; ++j) {
    if (qr.matrixQR()(j, j) < 0) q.col(j) *= -1.0;
  }
  for (std::size_t r = 0; r < d_z; ++r) {
    for (std::size_t c = 0; c < d_h; ++c) CHECK(spec.w(r, c) == doctest::Approx(q(c, r)).epsilon(1e-9));
  }

  std::mt19937_64 rng(4);
  const std::vector<double> h = testing::gaussian(d_h, rng);
  Eigen::VectorXd wh = q.transpose() * Eigen::Map<const Eigen::VectorXd>(h.data(), d_h);
  wh.normalize();
  const UnitAnchor a = extract_anchor(h, spec);
  for (std::size_t i = 0; i < d_z; ++i) CHECK(a[i] == doctest::Approx(wh(i)).epsilon(1e-9));
}

TEST_CASE("injection is linear in the low-rank factors") {
  const std::size_t d_z = 4;
  const std::size_t d_h = 8;
  const UnitAnchor z = normalize(std::vector<double>{0.5, 0.5, 0.5, 0.5});
  const std::vector<double> h{1, 2, 3, 4, 5, 6, 7, 8};

  InjectionLayer zero{Matrix(1, d_z), Matrix(d_h, 1)};
  zero.b(3, 0) = 2.0;
  CHECK(inject(h, z, zero) == h);

  InjectionLayer rank1{Matrix(1, d_z), Matrix(d_h, 1)};
  const std::vector<double> u{1.0, -2.0, 0.5, 3.0};
  const std::vector<double> w{0.1, 0.0, -1.0, 2.0, 0.0, 0.3, 0.0, 1.0};
  for (std::size_t i = 0; i < d_z; ++i) rank1.a(0, i) = u[i];
  for (std::size_t i = 0; i < d_h; ++i) rank1.b(i, 0) = w[i];
  const std::vector<double> out = inject(h, z, rank1);
  const double ua = std::inner_product(u.begin(), u.end(), z.coords().begin(), 0.0);
  for (std::size_t i = 0; i < d_h; ++i) CHECK(out[i] == doctest::Approx(h[i] + ua * w[i]).epsilon(1e-12));

  InjectionLayer doubled = rank1;
  for (double& x : doubled.b.data) x *= 2.0;
  const std::vector<double> out2 = inject(h, z, doubled);
  for (std::size_t i = 0; i < d_h; ++i) {
    CHECK(out2[i] - h[i] == doctest::Approx(2.0 * (out[i] - h[i])).epsilon(1e-12));
  }
  InjectionLayer bad{Matrix(1, 3), Matrix(d_h, 1)};
  CHECK(error_of([&] { inject(h, z, bad); }) == ErrorCode::kShapeMismatch);
}

TEST_CASE("injection spec validation") {
  CHECK(error_of([] { InjectionSpec::generate(8, 32, 9, 1, 0); }) == ErrorCode::kInvalidArgument);
  CHECK(error_of([] { InjectionSpec::generate(64, 32, 4, 1, 0); }) == ErrorCode::kInvalidDims);
  const InjectionSpec spec = InjectionSpec::generate(4, 32, 2, 3, 1);
  CHECK(spec.layers.size() == 3);
  CHECK(spec.zeroed().layers[0].a.is_zero());
  CHECK(spec.zeroed().w.data == spec.w.data);
}

TEST_CASE("mode weights are a softmax of steering") {
  const SyntheticWorld world = two_mode_world(10.0);
  const UnitAnchor z = axis(4, 0);
  const std::vector<double> w = world.mode_weights(z.coords());
  // e^10 / (e^10 + 1)
  CHECK(w[0] == doctest::Approx(0.9999546).epsilon(1e-7));
  CHECK(w[0] == doctest::Approx(std::exp(10.0) / (std::exp(10.0) + 1.0)).epsilon(1e-12));
  const std::vector<double> flat = world.mode_weights({});
  CHECK(flat[0] == doctest::Approx(0.5));
}

TEST_CASE("single-mode world emits its answer and terminates") {
  SyntheticBackend backend(one_mode_world(), SyntheticOptions{32, 2, 0, false, 0});
  const ContextWindow ctx{{1, 2, 3}, ContextOrigin::kQueryOnly};
  const ChunkResult c = backend.generate_chunk(ctx, std::nullopt, 16, 0.6, 9);
  CHECK(c.tokens == TokenSeq{10, 11, 12, 13});
  CHECK(c.terminal);
  const RolloutTrace t = backend.rollout(ctx, std::nullopt, 2, 0.6, 9);
  CHECK(t.tokens == TokenSeq{10, 11});
  CHECK_FALSE(t.terminal);
  CHECK(t.step_logprobs == std::vector<double>{0.0, 0.0});
}

TEST_CASE("rollout shape contract and determinism") {
  SyntheticBackend backend(two_mode_world(4.0, 0.2), SyntheticOptions{32, 2, 3, false, 0});
  const ContextWindow ctx{{1, 2}, ContextOrigin::kQueryOnly};
  const UnitAnchor z = normalize(std::vector<double>{1, 1, 0, 0});
  for (std::uint64_t stream = 0; stream < 20; ++stream) {
    const RolloutTrace a = backend.rollout(ctx, z, 3, 0.8, stream);
    const RolloutTrace b = backend.rollout(ctx, z, 3, 0.8, stream);
    CHECK(a.tokens == b.tokens);
    CHECK(a.step_logprobs == b.step_logprobs);
    CHECK(a.hidden_states.data == b.hidden_states.data);
    CHECK(a.step_logprobs.size() == a.tokens.size());
    CHECK(a.hidden_states.size() == a.tokens.size());
    CHECK(a.hidden_states.dim == 32);
    if (!a.terminal) CHECK(a.tokens.size() == 3);
    for (double lp : a.step_logprobs) CHECK(lp <= 0.0);
  }
}

TEST_CASE("zero-length chunk reports the delimiter state") {
  SyntheticBackend backend(two_mode_world(4.0), SyntheticOptions{32, 2, 3, false, 0});
  const ContextWindow ctx{{1, 2, 3}, ContextOrigin::kQueryOnly};
  const ChunkResult c = backend.generate_chunk(ctx, std::nullopt, 0, 0.6, 1);
  CHECK(c.tokens.empty());
  CHECK_FALSE(c.terminal);
  CHECK(c.h_eoc.size() == 32);
  CHECK(c.h_eoc == backend.generate_chunk(ctx, std::nullopt, 0, 0.6, 2).h_eoc);
}

TEST_CASE("strong steering selects the anchored mode") {
  SyntheticBackend backend(two_mode_world(10.0), SyntheticOptions{64, 2, 1, false, 0});
  const ContextWindow ctx{{1}, ContextOrigin::kQueryOnly};
  const UnitAnchor z = axis(4, 0);
  int hits = 0;
  for (std::uint64_t stream = 0; stream < 200; ++stream) {
    const ChunkResult c = backend.generate_chunk(ctx, z, 8, 0.6, stream);
    if (backend.world().judge(c.tokens) == std::optional<std::size_t>(0)) ++hits;
  }
  CHECK(hits >= 190);
}

TEST_CASE("zeroed injection leaves the model unsteered") {
  SyntheticOptions opts{64, 2, 1, true, 0};
  SyntheticBackend zeroed(two_mode_world(10.0, 0.1), opts);
  const ContextWindow ctx{{1, 2}, ContextOrigin::kQueryOnly};
  const std::vector<double> plain = zeroed.step_distribution(ctx, std::nullopt);
  // Through the injection path the anchor has no effect.
  const RolloutTrace steered = zeroed.rollout(ctx, axis(4, 0), 1, 1.0, 3);
  const RolloutTrace unsteered = zeroed.rollout(ctx, std::nullopt, 1, 1.0, 3);
  CHECK(steered.tokens == unsteered.tokens);
  REQUIRE(steered.step_logprobs.size() == 1);
  CHECK(std::exp(steered.step_logprobs[0]) ==
        doctest::Approx(plain[steered.tokens[0]]).epsilon(1e-4));
}

TEST_CASE("step distributions sum to one") {
  SyntheticBackend backend(two_mode_world(3.0, 0.3), SyntheticOptions{32, 2, 1, false, 0});
  std::mt19937_64 rng(8);
  std::uniform_int_distribution<TokenId> tok(0, 17);
  for (int i = 0; i < 1000; ++i) {
    ContextWindow ctx;
    for (int j = 0; j < 5; ++j) ctx.tokens.push_back(tok(rng));
    const UnitAnchor z = normalize(testing::gaussian(4, rng));
    const std::vector<double> p = backend.step_distribution(ctx, z);
    CHECK(std::accumulate(p.begin(), p.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("context budget and token range are enforced") {
  SyntheticBackend backend(two_mode_world(3.0), SyntheticOptions{32, 2, 1, false, 4});
  CHECK(error_of([&] {
          backend.rollout({{1, 2, 3, 4, 5}, ContextOrigin::kQueryOnly}, std::nullopt, 1, 0.6, 0);
        }) == ErrorCode::kInvalidContext);
  CHECK(error_of([&] {
          backend.rollout({{99}, ContextOrigin::kQueryOnly}, std::nullopt, 1, 0.6, 0);
        }) == ErrorCode::kInvalidContext);
  CHECK(error_of([&] {
          backend.rollout({{1}, ContextOrigin::kQueryOnly}, axis(3, 0), 1, 0.6, 0);
        }) == ErrorCode::kShapeMismatch);
}

TEST_CASE("greedy decoding is deterministic across streams") {
  SyntheticBackend backend(two_mode_world(2.0, 0.3), SyntheticOptions{32, 2, 1, false, 0});
  const ContextWindow ctx{{1, 2}, ContextOrigin::kQueryOnly};
  const RolloutTrace a = backend.rollout(ctx, axis(4, 1), 4, 0.0, 1);
  const RolloutTrace b = backend.rollout(ctx, axis(4, 1), 4, 0.0, 2);
  CHECK(a.tokens == b.tokens);
  CHECK(a.tokens.front() == 13);
}

TEST_CASE("judge reads the last completed answer") {
  const SyntheticWorld world = two_mode_world(1.0);
  CHECK(world.judge(TokenSeq{10, 11, 12}) == std::optional<std::size_t>(0));
  CHECK(world.judge(TokenSeq{10, 11, 12, 13}) == std::nullopt);
  CHECK(world.judge(TokenSeq{13, 14, 15, 1, 2}) == std::optional<std::size_t>(1));
  CHECK(world.judge(TokenSeq{}) == std::nullopt);
}

TEST_CASE("seeded worlds") {
  WorldParams p;
  p.seed = 11;
  p.lure_weight = 0.25;
  const SyntheticWorld a = make_world(p);
  const SyntheticWorld b = make_world(p);
  CHECK(a.modes().size() == 8);
  std::size_t correct = 0;
  for (std::size_t m = 0; m < 8; ++m) {
    CHECK(a.modes()[m].code == b.modes()[m].code);
    correct += a.modes()[m].is_correct;
    for (std::size_t j = 0; j < m; ++j) CHECK(a.modes()[m].code.dot(a.modes()[j].code) < 0.9);
  }
  CHECK(correct == 3);
  REQUIRE(a.settings().lure_mode.has_value());
  CHECK_FALSE(a.modes()[*a.settings().lure_mode].is_correct);
}
