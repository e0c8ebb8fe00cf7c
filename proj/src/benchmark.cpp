// Copyright 2026 The geosearch Authors
// SPDX-License-Identifier: Apache-2.0

#include "geosearch/benchmark.hpp"

#include <algorithm>
#include <set>
#include <string>

#include "geosearch/error.hpp"
#include "geosearch/random.hpp"

namespace geosearch {

namespace {

constexpr std::size_t kQueryLen = 16;

// World calibration shared by every modesM suite: the query leans the
// unsteered model toward one incorrect mode, and incorrect modes are noisier
// than correct ones, so likelihood alone is a weak but real correctness cue.
constexpr double kSteeringGain = 6.0;
constexpr double kContextGain = 7.0;
constexpr double kCorrectNoise = 0.05;
constexpr double kIncorrectNoise = 0.4;
constexpr double kLureWeight = 0.25;

}  // namespace

Benchmark make_benchmark(std::string_view name, std::uint64_t world_seed, std::size_t d_z,
                         std::size_t n_problems) {
  std::size_t modes = 0;
  if (name == "modes2") {
    modes = 2;
  } else if (name == "modes8") {
    modes = 8;
  } else if (name == "modes32") {
    modes = 32;
  } else {
    throw Error(ErrorCode::kConfig, "unknown benchmark '" + std::string(name) + "'");
  }
  if (n_problems == 0) throw Error(ErrorCode::kConfig, "benchmark needs >= 1 problem");

  Benchmark bench;
  bench.name = std::string(name);
  bench.world_seed = world_seed;
  for (std::size_t i = 0; i < n_problems; ++i) {
    BenchmarkProblem p;
    p.id = bench.name + "-" + std::to_string(world_seed) + "-" + std::to_string(i);
    p.world.n_modes = modes;
    p.world.n_correct = std::max<std::size_t>(1, 3 * modes / 8);
    p.world.d_z = d_z;
    p.world.steering_gain = kSteeringGain;
    p.world.context_gain = kContextGain;
    p.world.trajectory_noise = kCorrectNoise;
    p.world.incorrect_noise = kIncorrectNoise;
    p.world.lure_weight = kLureWeight;
    p.world.seed = stream_key(world_seed, {'B', modes, i});
    RandomStream q(p.world.seed, {'Q'});
    for (std::size_t t = 0; t < kQueryLen; ++t) {
      p.query.push_back(static_cast<TokenId>(q.below(p.world.n_filler)));
    }
    bench.problems.push_back(std::move(p));
  }
  return bench;
}

SearchConfig benchmark_search_config() {
  SearchConfig c;
  c.chunk_limit_L = 8;
  c.chunk_len_S = 32;
  c.candidates_K = 4;
  c.rollout_s = 8;
  c.sigma = 0.7;
  c.weights = ScoreWeights{0.01, 2.0, 0.0};
  c.d_z = 6;
  c.temperature = 0.6;
  return c;
}

SyntheticBackend make_problem_backend(const BenchmarkProblem& problem, const SearchConfig& config) {
  SyntheticOptions options;
  options.rank_r = config.rank_r;
  options.injection_seed = config.seed;
  options.max_context = config.chunk_len_S;
  return SyntheticBackend(make_world(problem.world), options);
}

std::size_t ProblemRun::distinct_correct(std::size_t k) const {
  std::set<std::size_t> found;
  const std::size_t n = std::min(k, judged_mode.size());
  for (std::size_t i = 0; i < n; ++i) {
    if (record.per_trial_success[i]) found.insert(*judged_mode[i]);
  }
  return found.size();
}

ProblemRun run_problem(const BenchmarkProblem& problem, const SearchConfig& config,
                       std::size_t trials) {
  if (trials == 0) throw Error(ErrorCode::kConfig, "trials must be >= 1");
  SyntheticBackend backend = make_problem_backend(problem, config);
  const SyntheticWorld& world = backend.world();

  ProblemRun run;
  run.problem_id = problem.id;
  std::vector<bool> success;
  std::uint64_t generated = 0;
  std::uint64_t overhead = 0;
  for (std::size_t trial = 0; trial < trials; ++trial) {
    Trajectory traj = run_search(problem.query, config, backend, trial);
    const TokenSeq out = traj.output();
    std::optional<std::size_t> mode = world.judge(out);
    const bool ok = traj.terminated_by == Termination::kTerminalToken && mode &&
                    world.modes()[*mode].is_correct;
    success.push_back(ok);
    generated += traj.tokens_generated;
    overhead += traj.rollout_tokens;
    run.judged_mode.push_back(mode);
    run.trajectories.push_back(std::move(traj));
  }
  run.record = RunRecord::from_trials(problem.id, std::move(success), generated, overhead);
  return run;
}

std::vector<RunRecord> BenchmarkRun::records() const {
  std::vector<RunRecord> out;
  out.reserve(problems.size());
  for (const ProblemRun& p : problems) out.push_back(p.record);
  return out;
}

double BenchmarkRun::mean_distinct_correct(std::size_t k) const {
  if (problems.empty()) return 0.0;
  double sum = 0.0;
  for (const ProblemRun& p : problems) sum += static_cast<double>(p.distinct_correct(k));
  return sum / static_cast<double>(problems.size());
}

BenchmarkRun run_benchmark(const Benchmark& bench, const SearchConfig& config, std::size_t trials,
                           std::span<const std::size_t> k_grid) {
  std::vector<std::size_t> grid;
  for (std::size_t k : k_grid) {
    if (k >= 1 && k <= trials) grid.push_back(k);
  }
  if (grid.size() < 2) {
    throw Error(ErrorCode::kConfig, "k grid needs two values <= trials (" +
                                        std::to_string(trials) + ")");
  }
  BenchmarkRun run;
  for (const BenchmarkProblem& p : bench.problems) {
    run.problems.push_back(run_problem(p, config, trials));
  }
  const std::vector<RunRecord> recs = run.records();
  run.curve = pass_curve(recs, grid);
  run.auc = auc(run.curve);
  return run;
}

std::vector<std::size_t> power_of_two_grid(std::size_t trials) {
  std::vector<std::size_t> grid;
  for (std::size_t k = 1; k <= trials; k *= 2) grid.push_back(k);
  return grid;
}

}  // namespace geosearch
