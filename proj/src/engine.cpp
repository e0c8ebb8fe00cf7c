// Copyright 2026 The geosearch Authors
// SPDX-License-Identifier: Apache-2.0

#include "geosearch/engine.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <string>
#include <thread>

#include "geosearch/error.hpp"
#include "geosearch/random.hpp"

namespace geosearch {

namespace {

// Stream purposes.
constexpr std::uint64_t kInitStream = 'Z';
constexpr std::uint64_t kSampleStream = 'S';
constexpr std::uint64_t kRolloutStream = 'R';
constexpr std::uint64_t kChunkStream = 'G';
constexpr std::uint64_t kPickStream = 'P';

template <class Fn>
void parallel_for(std::size_t n, std::size_t workers, Fn&& fn) {
  if (workers <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  const std::size_t count = std::min(workers, n);
  pool.reserve(count);
  for (std::size_t w = 0; w < count; ++w) pool.emplace_back(work);
  for (std::thread& t : pool) t.join();
  for (const std::exception_ptr& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

// Bookkeeping for every backend call made during one trajectory.
struct CallAudit {
  std::size_t budget = 0;
  std::size_t calls = 0;
  std::size_t prefill = 0;
  std::size_t max_context = 0;

  void check(const ContextWindow& ctx, std::size_t n_calls = 1) {
    if (ctx.tokens.size() > budget) {
      throw Error(ErrorCode::kInvalidContext,
                  "context of " + std::to_string(ctx.tokens.size()) +
                      " tokens exceeds window budget " + std::to_string(budget));
    }
    calls += n_calls;
    prefill += n_calls * ctx.tokens.size();
    max_context = std::max(max_context, ctx.tokens.size());
  }
};

std::size_t workers_for(const SearchConfig& config, const Backend& backend) {
  return backend.info().serial ? 1 : config.parallelism;
}

std::vector<Candidate> evaluate_impl(const ContextWindow& ctx, const UnitAnchor& z_prev,
                                     const SearchConfig& config, Backend& backend,
                                     std::size_t step_t, std::uint64_t trial, CallAudit& audit) {
  const std::size_t k = config.candidates_K;
  std::vector<std::optional<Candidate>> slots(k);
  const bool scored = config.ablation != Ablation::kRandomAnchor;
  if (scored) audit.check(ctx, k);
  const ScoreTerms terms = score_terms(config);

  parallel_for(k, workers_for(config, backend), [&](std::size_t j) {
    RandomStream sampler(config.seed, {trial, step_t, j, kSampleStream});
    UnitAnchor anchor = sample_around(z_prev, config.sigma, sampler);
    if (!scored) {
      slots[j] = Candidate{std::move(anchor), std::nullopt, 0};
      return;
    }
    const RolloutTrace trace =
        backend.rollout(ctx, anchor, config.rollout_s, config.effective_rollout_temperature(),
                        stream_key(config.seed, {trial, step_t, j, kRolloutStream}));
    ScoreBreakdown score;
    if (trace.tokens.empty()) {
      // Immediate termination: nothing observed, so no likelihood or curvature cost.
      score.short_trace = true;
      score.p_uni = uniformity_penalty(anchor, z_prev, terms.delta);
      score.total = total_score(0.0, 0.0, score.p_uni, terms);
    } else {
      score = score_candidate(trace, anchor, z_prev, terms);
    }
    slots[j] = Candidate{std::move(anchor), score, trace.tokens.size()};
  });

  std::vector<Candidate> out;
  out.reserve(k);
  for (auto& slot : slots) out.push_back(std::move(*slot));
  return out;
}

TokenSeq concat(const TokenSeq& a, const TokenSeq& b) {
  TokenSeq out = a;
  out.insert(out.end(), b.begin(), b.end());
  return out;
}

TokenSpaceStep token_space_impl(const TokenSeq& query, const TokenSeq& last_chunk,
                                const UnitAnchor& z_prev, std::vector<double>& previous_pooled,
                                const SearchConfig& config, Backend& backend, std::size_t step_t,
                                std::uint64_t trial, CallAudit& audit) {
  const ContextWindow ctx = window(query, last_chunk, config.chunk_len_S);
  const std::size_t k = config.candidates_K;
  audit.check(ctx, k);
  const ScoreTerms terms = score_terms(config);

  std::vector<RolloutTrace> traces(k);
  std::vector<std::vector<double>> pooled(k);
  std::vector<std::optional<Candidate>> slots(k);
  parallel_for(k, workers_for(config, backend), [&](std::size_t j) {
    traces[j] = backend.rollout(ctx, std::nullopt, config.rollout_s,
                                config.effective_rollout_temperature(),
                                stream_key(config.seed, {trial, step_t, j, kRolloutStream}));
    const RolloutTrace& trace = traces[j];
    ScoreBreakdown score;
    UnitAnchor representative = z_prev;
    if (trace.tokens.empty()) {
      score.short_trace = true;
    } else {
      std::vector<double> mean(trace.hidden_states.dim, 0.0);
      for (std::size_t i = 0; i < trace.hidden_states.size(); ++i) {
        const auto row = trace.hidden_states[i];
        for (std::size_t c = 0; c < mean.size(); ++c) mean[c] += row[c];
      }
      const double n = norm(mean);
      if (n > 1e-12) {
        for (double& x : mean) x /= n;
        pooled[j] = mean;
        representative = extract_anchor(mean, backend.injection());
      }
      score.v_fore = foresight_value(trace);
      const Bumpiness b = bumpiness(trace.hidden_states);
      score.p_bum = b.value;
      score.short_trace = b.short_trace;
      if (!pooled[j].empty() && !previous_pooled.empty()) {
        score.p_uni = std::max(0.0, dot(pooled[j], previous_pooled) - terms.delta);
      }
    }
    score.total = total_score(score.v_fore, score.p_bum, score.p_uni, terms);
    slots[j] = Candidate{std::move(representative), score, trace.tokens.size()};
  });

  TokenSpaceStep step;
  step.record.step_t = step_t;
  step.record.context_tokens = ctx.tokens.size();
  for (auto& slot : slots) {
    step.record.rollout_tokens_spent += slot->rollout_tokens;
    step.record.candidates.push_back(std::move(*slot));
  }
  const std::size_t best = select_argmax(step.record.candidates);
  step.record.selected_index = best;

  const RolloutTrace& winner = traces[best];
  const ContextWindow continued =
      window(query, concat(last_chunk, winner.tokens), config.chunk_len_S);
  audit.check(continued);
  const std::size_t remaining =
      winner.terminal ? 0 : config.chunk_len_S - std::min(config.chunk_len_S, winner.tokens.size());
  ChunkResult rest = backend.generate_chunk(continued, std::nullopt, remaining, config.temperature,
                                            stream_key(config.seed, {trial, step_t, 0, kChunkStream}));
  step.chunk.tokens = concat(winner.tokens, rest.tokens);
  step.chunk.h_eoc = std::move(rest.h_eoc);
  step.chunk.terminal = winner.terminal || rest.terminal;
  if (!pooled[best].empty()) previous_pooled = pooled[best];
  return step;
}

}  // namespace

std::string_view to_string(Ablation mode) {
  switch (mode) {
    case Ablation::kFull: return "full";
    case Ablation::kNoUni: return "no_uni";
    case Ablation::kNoBum: return "no_bum";
    case Ablation::kNoFore: return "no_fore";
    case Ablation::kRandomAnchor: return "random_anchor";
    case Ablation::kTokenSpace: return "token_space";
  }
  return "full";
}

Ablation parse_ablation(std::string_view name) {
  for (Ablation a : kAllAblations) {
    if (to_string(a) == name) return a;
  }
  throw Error(ErrorCode::kConfig, "unknown ablation '" + std::string(name) + "'");
}

std::string_view to_string(Termination t) {
  switch (t) {
    case Termination::kTerminalToken: return "terminal_token";
    case Termination::kChunkLimit: return "chunk_limit";
    case Termination::kStopRule: return "stop_rule";
  }
  return "chunk_limit";
}

void SearchConfig::validate() const {
  auto fail = [](const std::string& what) { throw Error(ErrorCode::kConfig, what); };
  if (chunk_limit_L == 0) fail("chunk_limit_L must be positive");
  if (chunk_len_S == 0) fail("chunk_len_S must be positive");
  if (candidates_K == 0) fail("candidates_K must be >= 1");
  if (rollout_s == 0) fail("rollout_s must be positive");
  if (rollout_s > chunk_len_S) fail("rollout_s must not exceed chunk_len_S");
  if (!(sigma >= 0.0) || !std::isfinite(sigma)) fail("sigma must be finite and >= 0");
  if (rank_r == 0) fail("rank_r must be positive");
  if (d_z < 2) fail("d_z must be >= 2");
  if (!(temperature > 0.0)) fail("temperature must be positive");
  if (rollout_temperature && !(*rollout_temperature > 0.0)) {
    fail("rollout_temperature must be positive");
  }
  if (parallelism == 0) fail("parallelism must be positive");
  try {
    weights.validate();
  } catch (const Error& e) {
    fail(e.detail());
  }
}

ScoreTerms score_terms(const SearchConfig& config) {
  ScoreTerms terms{1.0, config.weights.lambda_b, config.weights.lambda_u, config.weights.delta};
  switch (config.ablation) {
    case Ablation::kNoUni: terms.lambda_u = 0.0; break;
    case Ablation::kNoBum: terms.lambda_b = 0.0; break;
    case Ablation::kNoFore: terms.fore = 0.0; break;
    default: break;
  }
  return terms;
}

TokenSeq Trajectory::output() const {
  TokenSeq out;
  for (const TokenSeq& c : chunks) out.insert(out.end(), c.begin(), c.end());
  return out;
}

std::vector<UnitAnchor> Trajectory::selected_anchors() const {
  std::vector<UnitAnchor> out;
  out.reserve(boundary_records.size());
  for (const BoundaryRecord& r : boundary_records) {
    out.push_back(r.candidates[r.selected_index].anchor);
  }
  return out;
}

std::vector<double> Trajectory::boundary_overhead_ratios(std::size_t chunk_len_S) const {
  std::vector<double> out;
  for (const BoundaryRecord& r : boundary_records) {
    out.push_back(1.0 + static_cast<double>(r.rollout_tokens_spent) /
                            static_cast<double>(chunk_len_S));
  }
  return out;
}

ContextWindow window(const TokenSeq& query, const TokenSeq& last_chunk, std::size_t budget_S) {
  if (budget_S == 0) throw Error(ErrorCode::kInvalidArgument, "window budget must be >= 1");
  ContextWindow ctx;
  ctx.origin = last_chunk.empty() ? ContextOrigin::kQueryOnly : ContextOrigin::kQueryPlusSuffix;
  const std::size_t total = query.size() + last_chunk.size();
  if (total <= budget_S) {
    ctx.tokens = concat(query, last_chunk);
    return ctx;
  }
  const std::size_t pinned = std::min(query.size(), budget_S / 2);
  const std::size_t keep = budget_S - pinned;
  ctx.tokens.assign(query.begin(), query.begin() + static_cast<std::ptrdiff_t>(pinned));
  // Rightmost `keep` tokens of query[pinned:] ++ last_chunk.
  const std::size_t rest = total - pinned;
  std::size_t skip = rest - keep;
  const std::size_t query_tail = query.size() - pinned;
  if (skip < query_tail) {
    ctx.tokens.insert(ctx.tokens.end(), query.begin() + static_cast<std::ptrdiff_t>(pinned + skip),
                      query.end());
    skip = 0;
  } else {
    skip -= query_tail;
  }
  ctx.tokens.insert(ctx.tokens.end(), last_chunk.begin() + static_cast<std::ptrdiff_t>(skip),
                    last_chunk.end());
  return ctx;
}

std::vector<Candidate> evaluate_candidates(const ContextWindow& ctx, const UnitAnchor& z_prev,
                                           const SearchConfig& config, Backend& backend,
                                           std::size_t step_t, std::uint64_t trial) {
  config.validate();
  CallAudit audit{config.chunk_len_S};
  return evaluate_impl(ctx, z_prev, config, backend, step_t, trial, audit);
}

std::size_t select_argmax(const std::vector<Candidate>& candidates) {
  if (candidates.empty()) throw Error(ErrorCode::kInvalidArgument, "no candidates to select");
  std::size_t best = 0;
  for (std::size_t j = 1; j < candidates.size(); ++j) {
    const double cur = candidates[j].score ? candidates[j].score->total : 0.0;
    const double top = candidates[best].score ? candidates[best].score->total : 0.0;
    if (cur > top) best = j;
  }
  return best;
}

TokenSpaceStep token_space_variant(const TokenSeq& query, const TokenSeq& last_chunk,
                                   std::vector<double>& previous_pooled,
                                   const SearchConfig& config, Backend& backend,
                                   std::size_t step_t, std::uint64_t trial) {
  config.validate();
  CallAudit audit{config.chunk_len_S};
  const ContextWindow ctx = window(query, last_chunk, config.chunk_len_S);
  audit.check(ctx);
  const ChunkResult probe = backend.generate_chunk(ctx, std::nullopt, 0, config.temperature,
                                                   stream_key(config.seed, {trial, step_t, 'X'}));
  const UnitAnchor z_prev = extract_anchor(probe.h_eoc, backend.injection());
  return token_space_impl(query, last_chunk, z_prev, previous_pooled, config, backend, step_t,
                          trial, audit);
}

Trajectory run_search(const TokenSeq& query, const SearchConfig& config, Backend& backend,
                      std::uint64_t trial) {
  config.validate();
  if (backend.injection().d_z != config.d_z) {
    throw Error(ErrorCode::kConfig, "backend anchor dimension " +
                                        std::to_string(backend.injection().d_z) +
                                        " does not match d_z " + std::to_string(config.d_z));
  }
  const std::size_t budget = config.chunk_len_S;
  CallAudit audit{budget};
  Trajectory traj;
  traj.trial = trial;

  const ContextWindow ctx0 = window(query, {}, budget);
  audit.check(ctx0);
  const ChunkResult encoded = backend.generate_chunk(
      ctx0, std::nullopt, 0, config.temperature, stream_key(config.seed, {trial, 0, 0, kInitStream}));
  traj.anchors.push_back(extract_anchor(encoded.h_eoc, backend.injection()));

  std::vector<double> pooled;
  if (config.ablation == Ablation::kTokenSpace) {
    const double n = norm(encoded.h_eoc);
    if (n > 1e-12) {
      pooled = encoded.h_eoc;
      for (double& x : pooled) x /= n;
    }
  }

  TokenSeq last_chunk;
  std::size_t empty_run = 0;
  for (std::size_t t = 1; t <= config.chunk_limit_L; ++t) {
    const UnitAnchor& z_prev = traj.anchors.back();
    BoundaryRecord record;
    ChunkResult chunk;
    try {
      if (config.ablation == Ablation::kTokenSpace) {
        TokenSpaceStep step = token_space_impl(query, last_chunk, z_prev, pooled, config, backend,
                                               t, trial, audit);
        record = std::move(step.record);
        chunk = std::move(step.chunk);
      } else {
        const ContextWindow ctx = window(query, last_chunk, budget);
        record.step_t = t;
        record.context_tokens = ctx.tokens.size();
        record.candidates = evaluate_impl(ctx, z_prev, config, backend, t, trial, audit);
        if (config.ablation == Ablation::kRandomAnchor) {
          RandomStream pick(config.seed, {trial, t, 0, kPickStream});
          record.selected_index = static_cast<std::size_t>(pick.below(record.candidates.size()));
          record.selection = Selection::kRandom;
        } else {
          record.selected_index = select_argmax(record.candidates);
        }
        for (const Candidate& c : record.candidates) record.rollout_tokens_spent += c.rollout_tokens;
        audit.check(ctx);
        chunk = backend.generate_chunk(ctx, record.candidates[record.selected_index].anchor,
                                       budget, config.temperature,
                                       stream_key(config.seed, {trial, t, 0, kChunkStream}));
      }
      traj.anchors.push_back(extract_anchor(chunk.h_eoc, backend.injection()));
    } catch (const Error& e) {
      throw Error(e.code(), "boundary " + std::to_string(t) + ": " + e.detail());
    }

    traj.tokens_generated += chunk.tokens.size();
    traj.rollout_tokens += record.rollout_tokens_spent;
    traj.boundary_records.push_back(std::move(record));
    traj.chunks.push_back(chunk.tokens);
    last_chunk = std::move(chunk.tokens);

    if (chunk.terminal) {
      traj.terminated_by = Termination::kTerminalToken;
      break;
    }
    if (last_chunk.empty()) {
      if (++empty_run >= 2) {
        traj.terminated_by = Termination::kStopRule;
        break;
      }
    } else {
      empty_run = 0;
    }
  }

  traj.total_tokens = traj.tokens_generated + traj.rollout_tokens;
  traj.prefill_tokens = audit.prefill;
  traj.max_context_tokens = audit.max_context;
  traj.backend_calls = audit.calls;
  return traj;
}

}  // namespace geosearch
