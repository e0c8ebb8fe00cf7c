// Copyright 2026 The geosearch Authors
// SPDX-License-Identifier: Apache-2.0

#include "geosearch/synthetic.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "geosearch/error.hpp"
#include "geosearch/random.hpp"

namespace geosearch {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

std::vector<double> softmax(std::span<const double> logits) {
  const double hi = *std::max_element(logits.begin(), logits.end());
  std::vector<double> out(logits.size());
  if (!std::isfinite(hi)) {
    std::fill(out.begin(), out.end(), 1.0 / static_cast<double>(out.size()));
    return out;
  }
  double total = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - hi);
    total += out[i];
  }
  for (double& p : out) p /= total;
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// SyntheticWorld

SyntheticWorld::SyntheticWorld(std::vector<SyntheticMode> modes, WorldSettings settings)
    : modes_(std::move(modes)), settings_(settings) {
  if (modes_.empty()) throw Error(ErrorCode::kInvalidArgument, "world needs >= 1 mode");
  if (std::none_of(modes_.begin(), modes_.end(), [](const auto& m) { return m.is_correct; })) {
    throw Error(ErrorCode::kInvalidArgument, "world needs >= 1 correct mode");
  }
  if (settings_.vocab < 3) throw Error(ErrorCode::kInvalidArgument, "vocabulary too small");
  if (!(settings_.steering_gain > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "steering gain must be positive");
  }
  if (!(settings_.blend > 0.0 && settings_.blend <= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "blend must lie in (0, 1]");
  }
  if (settings_.lure_mode && *settings_.lure_mode >= modes_.size()) {
    throw Error(ErrorCode::kInvalidArgument, "lure mode out of range");
  }
  const std::size_t d = modes_.front().code.dim();
  for (std::size_t i = 0; i < modes_.size(); ++i) {
    if (modes_[i].code.dim() != d) throw Error(ErrorCode::kShapeMismatch, "mode code dims differ");
    if (!(modes_[i].noise >= 0.0 && modes_[i].noise < 1.0)) {
      throw Error(ErrorCode::kInvalidArgument, "mode noise must lie in [0, 1)");
    }
    if (modes_[i].answer.empty()) throw Error(ErrorCode::kInvalidArgument, "empty mode answer");
    for (std::size_t j = 0; j < i; ++j) {
      if (modes_[i].code.dot(modes_[j].code) >= 0.9) {
        throw Error(ErrorCode::kInvalidArgument, "mode codes too similar (dot >= 0.9)");
      }
    }
  }
  token_owner_.assign(settings_.vocab, -1);
  for (std::size_t m = 0; m < modes_.size(); ++m) {
    for (std::size_t p = 0; p < modes_[m].answer.size(); ++p) {
      const TokenId t = modes_[m].answer[p];
      if (t >= end_id()) throw Error(ErrorCode::kInvalidArgument, "answer token out of range");
      if (token_owner_[t] != -1) throw Error(ErrorCode::kInvalidArgument, "answer token reused");
      token_owner_[t] = static_cast<std::int64_t>((m << 32) | p);
    }
  }
}

std::optional<std::pair<std::size_t, std::size_t>> SyntheticWorld::locate(TokenId token) const {
  if (token >= token_owner_.size() || token_owner_[token] < 0) return std::nullopt;
  const auto packed = static_cast<std::uint64_t>(token_owner_[token]);
  return std::make_pair(static_cast<std::size_t>(packed >> 32),
                        static_cast<std::size_t>(packed & 0xFFFFFFFFULL));
}

TokenId SyntheticWorld::emission(std::size_t mode, std::size_t pos) const {
  const TokenSeq& answer = modes_[mode].answer;
  return pos < answer.size() ? answer[pos] : end_id();
}

std::optional<std::size_t> SyntheticWorld::judge(std::span<const TokenId> output) const {
  for (auto it = output.rbegin(); it != output.rend(); ++it) {
    if (auto where = locate(*it)) {
      if (where->second + 1 == modes_[where->first].answer.size()) return where->first;
      return std::nullopt;
    }
  }
  return std::nullopt;
}

std::vector<double> SyntheticWorld::mode_weights(std::span<const double> steering,
                                                 std::span<const double> context_latent) const {
  std::vector<double> logits(modes_.size(), 0.0);
  for (std::size_t m = 0; m < modes_.size(); ++m) {
    if (!steering.empty()) logits[m] += settings_.steering_gain * dot(steering, modes_[m].code.coords());
    if (!context_latent.empty() && settings_.context_gain != 0.0) {
      logits[m] += settings_.context_gain * dot(context_latent, modes_[m].code.coords());
    }
  }
  return softmax(logits);
}

SyntheticWorld make_world(const WorldParams& params) {
  if (params.n_correct == 0 || params.n_correct > params.n_modes) {
    throw Error(ErrorCode::kInvalidArgument, "n_correct must lie in [1, n_modes]");
  }
  RandomStream codes_rng(params.seed, {'C'});
  std::vector<UnitAnchor> codes;
  while (codes.size() < params.n_modes) {
    UnitAnchor c = random_anchor(params.d_z, codes_rng);
    const bool distinct = std::all_of(codes.begin(), codes.end(),
                                      [&](const UnitAnchor& o) { return o.dot(c) < 0.9; });
    if (distinct) codes.push_back(std::move(c));
  }

  std::vector<std::size_t> order(params.n_modes);
  std::iota(order.begin(), order.end(), 0);
  RandomStream pick_rng(params.seed, {'K'});
  for (std::size_t i = order.size(); i > 1; --i) {
    std::swap(order[i - 1], order[pick_rng.below(i)]);
  }
  std::vector<bool> correct(params.n_modes, false);
  for (std::size_t i = 0; i < params.n_correct; ++i) correct[order[i]] = true;

  std::vector<SyntheticMode> modes;
  for (std::size_t m = 0; m < params.n_modes; ++m) {
    TokenSeq answer(params.answer_len);
    for (std::size_t p = 0; p < params.answer_len; ++p) {
      answer[p] = static_cast<TokenId>(params.n_filler + m * params.answer_len + p);
    }
    modes.push_back(SyntheticMode{codes[m], std::move(answer), correct[m],
                                  correct[m] ? params.trajectory_noise : params.incorrect_noise});
  }

  WorldSettings settings;
  settings.steering_gain = params.steering_gain;
  settings.context_gain = params.context_gain;
  settings.trajectory_noise = params.trajectory_noise;
  settings.blend = params.blend;
  settings.hidden_scale = params.hidden_scale;
  settings.vocab = params.n_filler + params.n_modes * params.answer_len + 2;
  settings.seed = params.seed;
  if (params.lure_weight > 0.0 && params.n_correct < params.n_modes) {
    settings.lure_mode = order[params.n_correct + pick_rng.below(params.n_modes - params.n_correct)];
    settings.lure_weight = params.lure_weight;
  }
  return SyntheticWorld(std::move(modes), settings);
}

// ---------------------------------------------------------------------------
// SyntheticBackend

struct SyntheticBackend::State {
  std::vector<double> prior_logits;
  std::vector<double> log_lik;
  std::size_t pos = 0;
  bool seen_answer = false;
  std::vector<double> h;
  std::vector<double> injected;
};

struct SyntheticBackend::Generation {
  State state;
  RolloutTrace trace;
};

SyntheticBackend::SyntheticBackend(SyntheticWorld world, SyntheticOptions options)
    : world_(std::move(world)), options_(options) {
  const std::size_t d_z = world_.dim();
  const std::size_t n_layers = (d_z + options_.rank_r - 1) / options_.rank_r;
  nominal_ = InjectionSpec::generate(d_z, options_.d_h, options_.rank_r, n_layers,
                                     options_.injection_seed);
  spec_ = options_.zero_injection ? nominal_.zeroed() : nominal_;
  info_ = BackendInfo{options_.d_h, world_.vocab(), world_.eoc_id(), false};

  // Least-squares readout of the stacked injectors: u = N^-1 sum_l M_l^T delta_l
  // with M_l = B_l A_l and N = sum_l M_l^T M_l.
  const std::size_t d_h = options_.d_h;
  std::vector<Eigen::MatrixXd> products;
  Eigen::MatrixXd normal_eq = Eigen::MatrixXd::Zero(d_z, d_z);
  for (const InjectionLayer& layer : nominal_.layers) {
    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> a(
        layer.a.data.data(), layer.a.rows, layer.a.cols);
    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> b(
        layer.b.data.data(), layer.b.rows, layer.b.cols);
    products.emplace_back(b * a);
    normal_eq += products.back().transpose() * products.back();
  }
  const Eigen::LDLT<Eigen::MatrixXd> solver(normal_eq);
  readout_ = Matrix(d_z, n_layers * d_h);
  for (std::size_t l = 0; l < n_layers; ++l) {
    const Eigen::MatrixXd block = solver.solve(products[l].transpose());
    for (std::size_t r = 0; r < d_z; ++r) {
      for (std::size_t c = 0; c < d_h; ++c) readout_(r, l * d_h + c) = block(r, c);
    }
  }

  // Hidden-space target of every token: scaled W^T of its latent direction.
  targets_.resize(world_.vocab());
  RandomStream token_rng(world_.settings().seed, {'T'});
  for (TokenId t = 0; t < world_.vocab(); ++t) {
    std::vector<double> direction;
    if (auto where = world_.locate(t)) {
      const auto code = world_.modes()[where->first].code.coords();
      direction.assign(code.begin(), code.end());
    } else {
      const UnitAnchor u = random_anchor(d_z, token_rng);
      direction.assign(u.coords().begin(), u.coords().end());
      if (const auto& lure = world_.settings().lure_mode) {
        const auto code = world_.modes()[*lure].code.coords();
        for (std::size_t i = 0; i < d_z; ++i) direction[i] += world_.settings().lure_weight * code[i];
        const UnitAnchor leaned = normalize(direction);
        direction.assign(leaned.coords().begin(), leaned.coords().end());
      }
    }
    std::vector<double> target(d_h, 0.0);
    for (std::size_t r = 0; r < d_z; ++r) {
      for (std::size_t c = 0; c < d_h; ++c) target[c] += spec_.w(r, c) * direction[r];
    }
    for (double& x : target) x *= world_.settings().hidden_scale;
    targets_[t] = std::move(target);
  }
}

std::vector<double> SyntheticBackend::perceived_steering(
    const std::optional<UnitAnchor>& anchor) const {
  if (!anchor) return {};
  const std::size_t d_h = options_.d_h;
  std::vector<double> stacked(readout_.cols, 0.0);
  for (std::size_t l = 0; l < spec_.layers.size(); ++l) {
    const InjectionLayer& layer = spec_.layers[l];
    const std::vector<double> delta = layer.b.apply(layer.a.apply(anchor->coords()));
    std::copy(delta.begin(), delta.end(), stacked.begin() + static_cast<std::ptrdiff_t>(l * d_h));
  }
  return readout_.apply(stacked);
}

void SyntheticBackend::check_context(const ContextWindow& ctx) const {
  if (options_.max_context != 0 && ctx.tokens.size() > options_.max_context) {
    throw Error(ErrorCode::kInvalidContext,
                "context of " + std::to_string(ctx.tokens.size()) + " tokens exceeds budget " +
                    std::to_string(options_.max_context));
  }
  for (TokenId t : ctx.tokens) {
    if (t >= world_.vocab()) {
      throw Error(ErrorCode::kInvalidContext, "token id " + std::to_string(t) + " out of range");
    }
  }
}

SyntheticBackend::State SyntheticBackend::scan(std::span<const TokenId> tokens,
                                               std::span<const double> steering) const {
  State s;
  s.log_lik.assign(world_.modes().size(), 0.0);
  s.h.assign(options_.d_h, 0.0);
  // The prior reads the context latent at the first answer token (or the end
  // of the context), before any injected offset is added.
  auto set_prior = [&] {
    std::vector<double> context_latent = spec_.w.apply(s.h);
    const double n = norm(context_latent);
    if (n > 1e-12) {
      for (double& x : context_latent) x /= n;
    } else {
      context_latent.clear();
    }
    const std::vector<double> w = world_.mode_weights(steering, context_latent);
    s.prior_logits.resize(w.size());
    for (std::size_t m = 0; m < w.size(); ++m) s.prior_logits[m] = std::log(w[m]);
  };
  for (TokenId t : tokens) {
    if (!s.seen_answer) {
      if (auto where = world_.locate(t)) {
        set_prior();
        s.seen_answer = true;
        s.pos = where->second;
      }
    }
    if (s.seen_answer) {
      advance(s, t, nullptr);
    } else {
      const double blend = world_.settings().blend;
      for (std::size_t i = 0; i < s.h.size(); ++i) {
        s.h[i] = (1.0 - blend) * s.h[i] + blend * targets_[t][i];
      }
    }
  }
  if (!s.seen_answer) set_prior();
  return s;
}

std::vector<double> SyntheticBackend::distribution(const State& s) const {
  const auto& modes = world_.modes();
  std::vector<double> logits(modes.size());
  for (std::size_t m = 0; m < modes.size(); ++m) logits[m] = s.prior_logits[m] + s.log_lik[m];
  const std::vector<double> post = softmax(logits);

  const std::size_t emit_vocab = world_.vocab() - 1;
  std::vector<double> p(world_.vocab(), 0.0);
  double floor = 0.0;
  for (std::size_t m = 0; m < modes.size(); ++m) {
    floor += post[m] * modes[m].noise / static_cast<double>(emit_vocab);
    p[world_.emission(m, s.pos)] += post[m] * (1.0 - modes[m].noise);
  }
  for (std::size_t t = 0; t < emit_vocab; ++t) p[t] += floor;
  return p;
}

void SyntheticBackend::advance(State& s, TokenId token, RandomStream* jitter) const {
  const auto& modes = world_.modes();
  const auto where = world_.locate(token);
  double active_noise = 0.0;
  if (where) {
    active_noise = modes[where->first].noise;
  } else {
    std::size_t best = 0;
    for (std::size_t m = 1; m < modes.size(); ++m) {
      if (s.prior_logits[m] + s.log_lik[m] > s.prior_logits[best] + s.log_lik[best]) best = m;
    }
    active_noise = modes[best].noise;
  }

  const double emit_vocab = static_cast<double>(world_.vocab() - 1);
  for (std::size_t m = 0; m < modes.size(); ++m) {
    const double hit = token == world_.emission(m, s.pos) ? 1.0 - modes[m].noise : 0.0;
    const double lik = modes[m].noise / emit_vocab + hit;
    s.log_lik[m] += lik > 0.0 ? std::log(lik) : kNegInf;
  }
  s.pos = where ? where->second + 1 : s.pos + 1;

  const double blend = world_.settings().blend;
  const std::vector<double>& target = targets_[token];
  for (std::size_t i = 0; i < s.h.size(); ++i) s.h[i] = (1.0 - blend) * s.h[i] + blend * target[i];
  if (jitter != nullptr && active_noise > 0.0) {
    const double scale = active_noise * world_.settings().hidden_scale /
                         std::sqrt(static_cast<double>(s.h.size()));
    for (double& x : s.h) x += scale * jitter->normal();
  }
}

namespace {

// Draws from p^(1/T) renormalized; `logits` is scratch space of size |p|.
TokenId sample_token(const std::vector<double>& p, double temperature, RandomStream& rng,
                     std::vector<double>& logits) {
  double hi = kNegInf;
  for (std::size_t t = 0; t < p.size(); ++t) {
    logits[t] = p[t] > 0.0 ? std::log(p[t]) / temperature : kNegInf;
    hi = std::max(hi, logits[t]);
  }
  double total = 0.0;
  for (double& l : logits) {
    l = std::exp(l - hi);
    total += l;
  }
  const double u = rng.uniform() * total;
  TokenId token = 0;
  double acc = 0.0;
  for (std::size_t t = 0; t < logits.size(); ++t) {
    if (logits[t] == 0.0) continue;
    token = static_cast<TokenId>(t);
    acc += logits[t];
    if (u < acc) break;
  }
  return token;
}

}  // namespace

SyntheticBackend::Generation SyntheticBackend::generate(const ContextWindow& ctx,
                                                        const std::optional<UnitAnchor>& anchor,
                                                        std::size_t steps, double temperature,
                                                        std::uint64_t stream) const {
  check_context(ctx);
  if (!(temperature >= 0.0) || std::isinf(temperature)) {
    throw Error(ErrorCode::kInvalidArgument, "temperature must be finite and >= 0");
  }
  if (anchor && anchor->dim() != world_.dim()) {
    throw Error(ErrorCode::kShapeMismatch, "anchor dimension does not match the world");
  }
  const std::vector<double> steering = perceived_steering(anchor);

  Generation g;
  g.state = scan(ctx.tokens, steering);
  g.state.injected = anchor ? spec_.total_injection(anchor->coords())
                            : std::vector<double>(options_.d_h, 0.0);
  g.trace.hidden_states = HiddenStates(options_.d_h);

  RandomStream rng(world_.settings().seed, {'R', stream});
  std::vector<double> logits(world_.vocab());
  std::vector<double> reported(options_.d_h);
  for (std::size_t step = 0; step < steps; ++step) {
    const std::vector<double> p = distribution(g.state);
    TokenId token = 0;
    if (temperature == 0.0) {
      token = static_cast<TokenId>(std::max_element(p.begin(), p.end()) - p.begin());
    } else {
      token = sample_token(p, temperature, rng, logits);
    }

    if (token == world_.end_id()) {
      g.trace.terminal = true;
      break;
    }
    g.trace.tokens.push_back(token);
    g.trace.step_logprobs.push_back(std::log(p[token]));
    advance(g.state, token, &rng);
    for (std::size_t i = 0; i < reported.size(); ++i) {
      reported[i] = g.state.h[i] + g.state.injected[i];
    }
    g.trace.hidden_states.push_back(reported);
  }
  return g;
}

RolloutTrace SyntheticBackend::rollout(const ContextWindow& ctx,
                                       const std::optional<UnitAnchor>& anchor, std::size_t steps,
                                       double temperature, std::uint64_t stream) {
  return generate(ctx, anchor, steps, temperature, stream).trace;
}

ChunkResult SyntheticBackend::generate_chunk(const ContextWindow& ctx,
                                             const std::optional<UnitAnchor>& anchor,
                                             std::size_t max_len, double temperature,
                                             std::uint64_t stream) {
  Generation g = generate(ctx, anchor, max_len, temperature, stream);
  ChunkResult out;
  out.tokens = std::move(g.trace.tokens);
  out.terminal = g.trace.terminal;
  const double blend = world_.settings().blend;
  const std::vector<double>& target = targets_[world_.eoc_id()];
  out.h_eoc.resize(options_.d_h);
  for (std::size_t i = 0; i < options_.d_h; ++i) {
    out.h_eoc[i] = (1.0 - blend) * g.state.h[i] + blend * target[i] + g.state.injected[i];
  }
  return out;
}

std::vector<double> SyntheticBackend::step_distribution(
    const ContextWindow& ctx, const std::optional<UnitAnchor>& anchor) const {
  check_context(ctx);
  std::vector<double> steering;
  if (anchor) steering.assign(anchor->coords().begin(), anchor->coords().end());
  return distribution(scan(ctx.tokens, steering));
}

std::vector<double> synthetic_step_distribution(const SyntheticBackend& backend,
                                                const ContextWindow& ctx,
                                                const UnitAnchor& anchor) {
  return backend.step_distribution(ctx, anchor);
}

}  // namespace geosearch
