// Copyright 2026 The geosearch Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "geosearch/benchmark.hpp"
#include "geosearch/config.hpp"
#include "geosearch/io.hpp"
#include "support.hpp"

using namespace geosearch;
using testing::error_of;
using nlohmann::json;

namespace {

const std::filesystem::path kSource = GEOSEARCH_SOURCE_DIR;

std::filesystem::path temp_file(const std::string& name, const std::string& text) {
  const auto dir = std::filesystem::temp_directory_path() / "geosearch_test_config_io";
  std::filesystem::create_directories(dir);
  const auto path = dir / name;
  std::ofstream(path, std::ios::binary) << text;
  return path;
}

bool same_config(const SearchConfig& a, const SearchConfig& b) {
  return config_to_json(a) == config_to_json(b);
}

}  // namespace

TEST_CASE("TOML subset parsing") {
  const json j = parse_toml(
      "# comment\n"
      "a = 3\n"
      "b = -0.25  # trailing\n"
      "c = \"text\"\n"
      "d = true\n"
      "e = { x = 1, y = 2.5 }\n"
      "\n"
      "[t]\n"
      "k = 1e-3\n");
  CHECK(j["a"] == 3);
  CHECK(j["b"] == -0.25);
  CHECK(j["c"] == "text");
  CHECK(j["d"] == true);
  CHECK(j["e"]["y"] == 2.5);
  CHECK(j["t"]["k"] == 1e-3);

  CHECK(error_of([] { parse_toml("a = 1\na = 2\n"); }) == ErrorCode::kConfig);
  CHECK(error_of([] { parse_toml("a 1\n"); }) == ErrorCode::kConfig);
  CHECK(error_of([] { parse_toml("a = \"open\n"); }) == ErrorCode::kConfig);
  try {
    parse_toml("x = 1\ny = @\n");
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
  }
}

TEST_CASE("shipped configs load") {
  const SearchConfig def = load_config(kSource / "configs/default.toml");
  CHECK(same_config(def, SearchConfig{}));
  CHECK(def.chunk_len_S == 512);
  CHECK(def.candidates_K == 8);
  CHECK(def.weights.delta == 0.2);

  const SearchConfig syn = load_config(kSource / "configs/synthetic.toml");
  CHECK(same_config(syn, benchmark_search_config()));
}

TEST_CASE("config from JSON and rejections") {
  SearchConfig c = config_from_json(json::parse(R"({"candidates_K": 2, "ablation": "no_uni",
                                                   "weights": {"lambda_u": 0.5}})"));
  CHECK(c.candidates_K == 2);
  CHECK(c.ablation == Ablation::kNoUni);
  CHECK(c.weights.lambda_u == 0.5);
  CHECK(c.weights.delta == 0.2);

  CHECK(error_of([] { config_from_json(json::parse(R"({"bogus": 1})")); }) == ErrorCode::kConfig);
  CHECK(error_of([] { config_from_json(json::parse(R"({"candidates_K": -1})")); }) == ErrorCode::kConfig);
  CHECK(error_of([] { config_from_json(json::parse(R"({"sigma": "big"})")); }) == ErrorCode::kConfig);
  CHECK(error_of([] { config_from_json(json::parse(R"({"ablation": "none"})")); }) == ErrorCode::kConfig);
  CHECK(error_of([] { config_from_json(json::parse(R"({"rollout_s": 600})")); }) == ErrorCode::kConfig);
  CHECK(error_of([] { config_from_json(json::parse(R"({"weights": {"mu": 1}})")); }) == ErrorCode::kConfig);

  CHECK(same_config(load_config(temp_file("c.json", R"({"d_z": 12})")), config_from_json({{"d_z", 12}})));
  CHECK(error_of([] { load_config(temp_file("bad.json", "{ nope")); }) == ErrorCode::kConfig);
  CHECK(error_of([] { load_config(temp_file("bad.toml", "d_z = [1, 2]\n")); }) == ErrorCode::kConfig);
  CHECK(error_of([] { load_config("/nonexistent/geosearch.toml"); }) == ErrorCode::kIo);
}

TEST_CASE("config round trip and hash") {
  SearchConfig c;
  c.seed = 17;
  c.rollout_temperature = 0.9;
  c.ablation = Ablation::kTokenSpace;
  CHECK(same_config(config_from_json(config_to_json(c)), c));
  CHECK(config_hash(c) == config_hash(config_from_json(config_to_json(c))));
  CHECK(config_hash(c).size() == 16);
  SearchConfig d = c;
  d.parallelism = 8;
  CHECK(config_hash(c) == config_hash(d));
  d.sigma = 0.11;
  CHECK(config_hash(c) != config_hash(d));
}

TEST_CASE("seed override from the environment") {
  SearchConfig c;
  ::setenv("TGR_SEED", "123", 1);
  apply_env_overrides(c);
  CHECK(c.seed == 123);
  ::setenv("TGR_SEED", "12x", 1);
  CHECK(error_of([&] { apply_env_overrides(c); }) == ErrorCode::kConfig);
  ::unsetenv("TGR_SEED");
  c.seed = 4;
  apply_env_overrides(c);
  CHECK(c.seed == 4);
}

TEST_CASE("run records round trip through JSONL") {
  const std::vector<RunRecord> recs{RunRecord::from_trials("p0", {true, false, true}, 90, 30),
                                    RunRecord::from_trials("p1", {false, false, false}, 12, 0)};
  std::vector<json> lines;
  for (const RunRecord& r : recs) lines.push_back(geosearch::to_json(r));
  const auto path = temp_file("records.jsonl", to_jsonl(lines) + "\n");
  const std::vector<RunRecord> back = read_run_records(path);
  REQUIRE(back.size() == 2);
  for (std::size_t i = 0; i < 2; ++i) {
    CHECK(back[i].problem_id == recs[i].problem_id);
    CHECK(back[i].per_trial_success == recs[i].per_trial_success);
    CHECK(back[i].n_correct == recs[i].n_correct);
    CHECK(back[i].tokens_generated == recs[i].tokens_generated);
    CHECK(back[i].tokens_overhead == recs[i].tokens_overhead);
  }

  const RunRecord counts =
      run_record_from_json(json::parse(R"({"problem_id": "x", "n_trials": 5, "n_correct": 2})"));
  CHECK(counts.per_trial_success.empty());
  CHECK(counts.n_trials == 5);
  CHECK(error_of([] {
          run_record_from_json(json::parse(R"({"problem_id": "x", "n_trials": 2, "n_correct": 3})"));
        }) == ErrorCode::kInvalidArgument);
  CHECK(error_of([] { run_record_from_json(json::parse(R"({"n_trials": 2})")); }) ==
        ErrorCode::kInvalidArgument);
  CHECK(error_of([] { read_run_records(temp_file("broken.jsonl", "{\"problem_id\": \n")); }) ==
        ErrorCode::kInvalidArgument);
}

TEST_CASE("trajectory JSON carries anchors and candidates") {
  SearchConfig c = benchmark_search_config();
  c.chunk_limit_L = 3;
  const Benchmark bench = make_benchmark("modes2", 0, c.d_z, 1);
  SyntheticBackend backend = make_problem_backend(bench.problems[0], c);
  const Trajectory t = run_search(bench.problems[0].query, c, backend, 0);
  const json j = geosearch::to_json(t, {{"problem_id", "modes2-0"}});
  CHECK(j["problem_id"] == "modes2-0");
  CHECK(j["total_tokens"] == t.total_tokens);
  const AnchorTrace trace = anchor_trace_from_json(j);
  CHECK(trace.anchors.size() == t.anchors.size());
  CHECK(trace.candidates.size() == t.boundary_records.size());
  for (std::size_t i = 0; i < t.anchors.size(); ++i) CHECK(trace.anchors[i] == t.anchors[i]);
  std::size_t scored = 0;
  for (const BoundaryRecord& r : t.boundary_records) scored += r.candidates.size();
  CHECK(score_lines(t).size() == scored);
}
