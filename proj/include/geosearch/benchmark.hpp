// Copyright 2026 The geosearch Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "geosearch/engine.hpp"
#include "geosearch/eval.hpp"
#include "geosearch/synthetic.hpp"

namespace geosearch {

struct BenchmarkProblem {
  std::string id;
  WorldParams world;
  TokenSeq query;
};

/// Built-in `modesM` suite: n_problems seeded synthetic worlds of M modes.
struct Benchmark {
  std::string name;
  std::uint64_t world_seed = 0;
  std::vector<BenchmarkProblem> problems;
};

/// Accepts "modes2", "modes8" and "modes32". Worlds use the config's d_z;
/// throws kConfig for any other name.
Benchmark make_benchmark(std::string_view name, std::uint64_t world_seed, std::size_t d_z,
                         std::size_t n_problems = 8);

/// Search settings the modesM worlds are calibrated for: short chunks, a
/// six-dimensional anchor space and a strong uniformity weight.
/// configs/synthetic.toml holds the same values.
SearchConfig benchmark_search_config();

/// Backend for one problem. Injection matrices follow (config.seed, rank_r).
SyntheticBackend make_problem_backend(const BenchmarkProblem& problem, const SearchConfig& config);

struct ProblemRun {
  std::string problem_id;
  std::vector<Trajectory> trajectories;
  std::vector<std::optional<std::size_t>> judged_mode;  // per trial
  RunRecord record;

  /// Distinct correct modes solved within the first k trials.
  std::size_t distinct_correct(std::size_t k) const;
};

/// Runs `trials` independent searches (trial index = stream key) and judges
/// them: a trial succeeds when it stops on the terminal token having
/// completed a correct mode's answer.
ProblemRun run_problem(const BenchmarkProblem& problem, const SearchConfig& config,
                       std::size_t trials);

struct BenchmarkRun {
  std::vector<ProblemRun> problems;
  PassCurve curve;
  double auc = 0.0;

  std::vector<RunRecord> records() const;
  /// Mean over problems of ProblemRun::distinct_correct(k).
  double mean_distinct_correct(std::size_t k) const;
};

/// k_grid entries above `trials` are dropped; the grid must keep two points.
BenchmarkRun run_benchmark(const Benchmark& bench, const SearchConfig& config, std::size_t trials,
                           std::span<const std::size_t> k_grid);

/// Grid {1, 2, 4, ...} up to trials.
std::vector<std::size_t> power_of_two_grid(std::size_t trials);

}  // namespace geosearch
