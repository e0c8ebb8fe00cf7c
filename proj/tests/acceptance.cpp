// Copyright 2026 The geosearch Authors
// SPDX-License-Identifier: Apache-2.0
//
// Acceptance run: one PASS/FAIL line per headline criterion. Exit status is
// the number of failing criteria.

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "geosearch/benchmark.hpp"
#include "geosearch/eval.hpp"
#include "geosearch/geometry.hpp"
#include "geosearch/io.hpp"
#include "geosearch/random.hpp"
#include "geosearch/scoring.hpp"
#include "support.hpp"

using namespace geosearch;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string format(const char* fmt, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, fmt, args...);
  return buf;
}

// Forwards to a backend and counts calls whose context exceeds the budget.
class ContextProbe final : public Backend {
 public:
  ContextProbe(Backend& inner, std::size_t budget) : inner_(inner), budget_(budget) {}

  const BackendInfo& info() const override { return inner_.info(); }
  const InjectionSpec& injection() const override { return inner_.injection(); }

  RolloutTrace rollout(const ContextWindow& ctx, const std::optional<UnitAnchor>& anchor,
                       std::size_t steps, double temperature, std::uint64_t stream) override {
    observe(ctx);
    return inner_.rollout(ctx, anchor, steps, temperature, stream);
  }
  ChunkResult generate_chunk(const ContextWindow& ctx, const std::optional<UnitAnchor>& anchor,
                             std::size_t max_len, double temperature, std::uint64_t stream) override {
    observe(ctx);
    return inner_.generate_chunk(ctx, anchor, max_len, temperature, stream);
  }

  std::size_t calls() const { return calls_; }
  std::size_t violations() const { return violations_; }

 private:
  void observe(const ContextWindow& ctx) {
    ++calls_;
    if (ctx.tokens.size() > budget_) ++violations_;
  }

  Backend& inner_;
  std::size_t budget_;
  std::atomic<std::size_t> calls_{0};
  std::atomic<std::size_t> violations_{0};
};

Outcome auc_cross_check() {
  const PassCurve curve = PassCurve::make({{1, 0.187}, {32, 0.265}, {128, 0.284}});
  const auto t0 = std::chrono::steady_clock::now();
  const double a = auc(curve);
  const double ms = seconds_since(t0) * 1e3;
  return {std::abs(a - 24.0) <= 0.05 && ms < 1.0, format("auc=%.4f target 24.0+-0.05, %.4f ms", a, ms)};
}

Outcome pass_at_k_oracle() {
  const auto t0 = std::chrono::steady_clock::now();
  std::size_t cases = 0;
  std::size_t mismatches = 0;
  for (std::size_t n = 1; n <= 8; ++n) {
    for (std::uint32_t mask = 0; mask < (1u << n); ++mask) {
      const auto c = static_cast<std::size_t>(__builtin_popcount(mask));
      for (std::size_t k = 1; k <= n; ++k) {
        ++cases;
        if (pass_at_k_unbiased(n, c, k) != testing::subset_pass_oracle(mask, n, k)) ++mismatches;
      }
    }
  }
  const double s = seconds_since(t0);
  return {mismatches == 0 && s < 1.0,
          format("%zu (mask, k) cases, %zu mismatches, %.3f s", cases, mismatches, s)};
}

Outcome geometry_properties() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<std::size_t> dim(3, 32);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::size_t norm_fail = 0, tangent_fail = 0, identity_fail = 0, rotation_fail = 0, decided = 0;
  const int n_cases = 10000;
  for (int i = 0; i < n_cases; ++i) {
    const std::size_t d = dim(rng);
    const double sigma = 0.01 + 2.0 * unit(rng);
    const double phi = 0.05 + (std::numbers::pi - 0.1) * unit(rng);
    RandomStream stream(7, {static_cast<std::uint64_t>(i)});
    const UnitAnchor z = random_anchor(d, stream);

    const Perturbation p = perturb(z, sigma, stream);
    if (std::abs(norm(p.anchor.coords()) - 1.0) > 1e-6) ++norm_fail;
    if (std::abs(dot(p.direction.coords, z.coords())) > 1e-9) ++tangent_fail;
    const UnitAnchor same = sample_around(z, 0.0, stream);
    for (std::size_t k = 0; k < d; ++k) {
      if (same[k] != z[k]) {
        ++identity_fail;
        break;
      }
    }

    const std::vector<double> target = testing::gaussian(d, rng);
    const ConeConstraint cone = ConeConstraint::make(tangent_project(z, target), phi);
    const bool accepted = hard_cone_accept(p.anchor, z, cone);

    const Eigen::MatrixXd q = testing::random_rotation(d, rng);
    auto rotate = [&](std::span<const double> v) { return testing::apply(q, {v.begin(), v.end()}); };
    const UnitAnchor qz = normalize(rotate(z.coords()));
    const UnitAnchor qa = normalize(rotate(p.anchor.coords()));
    const ConeConstraint qcone = ConeConstraint::make(tangent_project(qz, rotate(cone.target.coords)), phi);
    const bool rotated = hard_cone_accept(qa, qz, qcone);

    // Angle between the candidate's tangent direction and the cone axis,
    // computed directly in the original frame.
    std::vector<double> u(d);
    const double az = dot(p.anchor.coords(), z.coords());
    for (std::size_t k = 0; k < d; ++k) u[k] = p.anchor[k] - az * z[k];
    const double angle =
        std::acos(std::clamp(dot(u, cone.target.coords) / (norm(u) * norm(cone.target.coords)), -1.0, 1.0));
    if (std::abs(angle - phi) > 1e-6) {
      ++decided;
      const bool inside = angle < phi;
      if (accepted != inside || rotated != inside) ++rotation_fail;
    }
  }
  const double s = seconds_since(t0);
  const bool pass = norm_fail == 0 && tangent_fail == 0 && identity_fail == 0 && rotation_fail == 0 && s < 10.0;
  return {pass, format("%d cases: norm %zu, tangent %zu, identity %zu, rotation %zu/%zu failures, %.2f s",
                       n_cases, norm_fail, tangent_fail, identity_fail, rotation_fail, decided, s)};
}

Outcome acceptance_collapse() {
  const auto t0 = std::chrono::steady_clock::now();
  const std::uint64_t n = 100000;
  const auto rows = acceptance_decay_experiment({3, 8, 16, 32, 64}, std::numbers::pi / 3, 0.1, n, 0);
  const double s = seconds_since(t0);
  auto se = [&](double a) { return std::sqrt(a * (1.0 - a) / static_cast<double>(n)); };
  bool monotone = true;
  for (std::size_t i = 0; i + 1 < rows.size(); ++i) {
    const double slack = 2.0 * std::hypot(se(rows[i].alpha), se(rows[i + 1].alpha));
    if (rows[i + 1].alpha > rows[i].alpha + slack) monotone = false;
  }
  const double a3 = rows.front().alpha;
  const double a64 = rows.back().alpha;
  const bool pass = std::abs(a3 - 1.0 / 3.0) <= 0.01 && monotone && a64 <= 0.01 * a3 && s < 60.0;
  std::string alphas;
  for (const AcceptanceRow& r : rows) alphas += format(" %zu:%.5f", r.d_z, r.alpha);
  return {pass, format("alpha%s; monotone %s, %.2f s", alphas.c_str(), monotone ? "yes" : "no", s)};
}

Outcome scoring_closed_forms() {
  auto states = [](const std::vector<std::vector<double>>& rows) {
    HiddenStates h(rows.front().size());
    for (const auto& r : rows) h.push_back(r);
    return h;
  };
  std::vector<std::vector<double>> constant(8, {0.3, -1.0, 2.5, 0.0});
  std::vector<std::vector<double>> affine;
  for (int i = 0; i < 8; ++i) affine.push_back({1.0 + 0.5 * i, -2.0 * i, 3.0, 0.25 * i});
  std::vector<std::vector<double>> alternating;
  for (int i = 0; i < 8; ++i) {
    const double sgn = i % 2 == 0 ? 1.0 : -1.0;
    alternating.push_back({0.0, sgn * 0.6, sgn * 0.8, 0.0});
  }
  const double b_const = bumpiness(states(constant)).value;
  const double b_aff = bumpiness(states(affine)).value;
  const double b_alt = bumpiness(states(alternating)).value;
  const double v = 50000.0;
  const std::vector<double> uniform(32, std::log(1.0 / v));
  const double fore = foresight_value(uniform);
  const bool pass = std::abs(b_const) <= 1e-12 && std::abs(b_aff) <= 1e-12 && std::abs(b_alt - 16.0) <= 1e-9 &&
                    std::abs(fore + std::log(v)) <= 1e-9;
  return {pass, format("bumpiness const %.1e, affine %.1e, alternating %.12f; V_fore + ln V = %.1e", b_const,
                       b_aff, b_alt, fore + std::log(v))};
}

Outcome ablation_ordering() {
  const auto t0 = std::chrono::steady_clock::now();
  const SearchConfig base = benchmark_search_config();
  const std::size_t trials = 16;
  const std::vector<std::size_t> grid = power_of_two_grid(trials);
  auto sweep = [&](Ablation mode, std::vector<double>& aucs, std::vector<double>& distinct) {
    SearchConfig c = base;
    c.ablation = mode;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      const BenchmarkRun run = run_benchmark(make_benchmark("modes8", seed, c.d_z), c, trials, grid);
      aucs.push_back(run.auc);
      distinct.push_back(run.mean_distinct_correct(16));
    }
  };
  std::vector<double> auc_full, auc_uni, auc_rand, d_full, d_uni, d_rand;
  sweep(Ablation::kFull, auc_full, d_full);
  sweep(Ablation::kNoUni, auc_uni, d_uni);
  sweep(Ablation::kRandomAnchor, auc_rand, d_rand);
  const double s = seconds_since(t0);
  auto mean = [](const std::vector<double>& x) {
    double t = 0.0;
    for (double v : x) t += v;
    return t / static_cast<double>(x.size());
  };
  const PairedTest t = paired_t_test(d_full, d_uni);
  const bool pass = mean(auc_full) > mean(auc_uni) && mean(auc_full) > mean(auc_rand) &&
                    mean(d_full) > mean(d_uni) && t.p_greater < 0.05 && s < 300.0;
  return {pass, format("AUC full %.2f, no_uni %.2f, random_anchor %.2f; distinct@16 full %.3f vs no_uni %.3f "
                       "(paired over 20 seeds, p=%.2g); %.1f s",
                       mean(auc_full), mean(auc_uni), mean(auc_rand), mean(d_full), mean(d_uni), t.p_greater, s)};
}

struct SuiteStats {
  std::size_t trajectories = 0;
  std::size_t jsonl_mismatches = 0;
  std::size_t calls = 0;
  std::size_t context_violations = 0;
  std::size_t identity_failures = 0;
  std::size_t boundaries = 0;
  std::size_t ratio_failures = 0;
  double max_ratio_bench = 0.0;    // bound 1 + 4 * 8 / 32 = 2
  double max_ratio_default = 0.0;  // bound 1 + 8 * 32 / 512 = 1.5
  double seconds = 0.0;
};

// Runs one benchmark through the probe at parallelism 1 and 8 and checks
// byte identity, the context budget and the token accounting.
void run_suite(const SearchConfig& config, const Benchmark& bench, std::size_t trials, SuiteStats& stats,
               double& max_ratio) {
  const double bound = 1.0 + static_cast<double>(config.candidates_K * config.rollout_s) /
                                 static_cast<double>(config.chunk_len_S);
  for (const BenchmarkProblem& problem : bench.problems) {
    SyntheticBackend backend = make_problem_backend(problem, config);
    ContextProbe probe(backend, config.chunk_len_S);
    std::string serial;
    std::string parallel;
    for (std::size_t trial = 0; trial < trials; ++trial) {
      for (std::size_t par : {1u, 8u}) {
        SearchConfig c = config;
        c.parallelism = par;
        const Trajectory t = run_search(problem.query, c, probe, trial);
        (par == 1 ? serial : parallel) += geosearch::to_json(t).dump() + "\n";
        if (par != 1) continue;
        ++stats.trajectories;
        std::size_t generated = 0;
        for (const TokenSeq& chunk : t.chunks) generated += chunk.size();
        std::size_t spent = 0;
        for (const BoundaryRecord& r : t.boundary_records) spent += r.rollout_tokens_spent;
        if (t.tokens_generated != generated || t.rollout_tokens != spent ||
            t.total_tokens != generated + spent) {
          ++stats.identity_failures;
        }
        for (double ratio : t.boundary_overhead_ratios(config.chunk_len_S)) {
          ++stats.boundaries;
          max_ratio = std::max(max_ratio, ratio);
          if (ratio > bound) ++stats.ratio_failures;
        }
      }
    }
    if (serial != parallel) ++stats.jsonl_mismatches;
    stats.calls += probe.calls();
    stats.context_violations += probe.violations();
  }
}

SuiteStats synthetic_suite() {
  const auto t0 = std::chrono::steady_clock::now();
  SuiteStats stats;
  const SearchConfig base = benchmark_search_config();
  for (Ablation mode : kAllAblations) {
    SearchConfig c = base;
    c.ablation = mode;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      run_suite(c, make_benchmark("modes8", seed, c.d_z), 16, stats, stats.max_ratio_bench);
    }
  }
  // Default sizes (K = 8, s = 32, S = 512) on a few problems.
  for (Ablation mode : kAllAblations) {
    SearchConfig c;
    c.ablation = mode;
    run_suite(c, make_benchmark("modes8", 0, c.d_z, 2), 2, stats, stats.max_ratio_default);
  }
  stats.seconds = seconds_since(t0);
  return stats;
}

}  // namespace

int main() {
  SuiteStats suite;
  bool suite_ran = false;
  auto suite_stats = [&]() -> const SuiteStats& {
    if (!suite_ran) {
      suite = synthetic_suite();
      suite_ran = true;
    }
    return suite;
  };

  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"AUC formula cross-check", auc_cross_check},
      {"Pass@k oracle equivalence", pass_at_k_oracle},
      {"Geometry property suite", geometry_properties},
      {"Acceptance collapse", acceptance_collapse},
      {"Scoring closed forms", scoring_closed_forms},
      {"Synthetic ablation ordering", ablation_ordering},
      {"Determinism and memory bound",
       [&] {
         const SuiteStats& s = suite_stats();
         return Outcome{s.jsonl_mismatches == 0 && s.context_violations == 0 && s.trajectories > 0,
                        format("%zu trajectories, %zu JSONL mismatches (parallelism 1 vs 8), %zu backend "
                               "calls, %zu over budget, %.1f s",
                               s.trajectories, s.jsonl_mismatches, s.calls, s.context_violations,
                               s.seconds)};
       }},
      {"Overhead accounting",
       [&] {
         const SuiteStats& s = suite_stats();
         return Outcome{s.identity_failures == 0 && s.ratio_failures == 0 && s.boundaries > 0,
                        format("%zu accounting failures, %zu of %zu boundaries above 1 + K*s/S; max ratio "
                               "%.4f (bound 2.0, benchmark sizes), %.4f (bound 1.5, default sizes)",
                               s.identity_failures, s.ratio_failures, s.boundaries, s.max_ratio_bench,
                               s.max_ratio_default)};
       }},
  };

  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    if (!o.pass) ++failures;
    std::printf("%s [%zu] %s: %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first, o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria failed\n", failures, criteria.size());
  return failures;
}
