// Copyright 2026 The geosearch Authors
// SPDX-License-Identifier: Apache-2.0
//
// geosearch: run searches, sweep ablations, measure cone acceptance, score
// run records and check wire-protocol conformance.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "geosearch/benchmark.hpp"
#include "geosearch/config.hpp"
#include "geosearch/engine.hpp"
#include "geosearch/error.hpp"
#include "geosearch/eval.hpp"
#include "geosearch/geometry.hpp"
#include "geosearch/io.hpp"
#include "geosearch/protocol.hpp"
#include "geosearch/synthetic.hpp"
#include "geosearch/text.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace geosearch;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitBackend = 3;
constexpr int kExitIo = 4;

int exit_code(ErrorCode code) {
  switch (code) {
    case ErrorCode::kIo:
      return kExitIo;
    case ErrorCode::kConfig:
    case ErrorCode::kInvalidArgument:
    case ErrorCode::kInvalidDims:
    case ErrorCode::kKExceedsN:
    case ErrorCode::kInsufficientTrials:
    case ErrorCode::kSinglePoint:
      return kExitConfig;
    default:
      return kExitBackend;
  }
}

// ---------------------------------------------------------------------------
// Backends

struct BackendDescriptor {
  enum class Kind { kSynthetic, kStdio, kTcp } kind = Kind::kSynthetic;
  std::string command;
  std::string host;
  std::uint16_t port = 0;
  std::string text = "builtin:synthetic";
};

BackendDescriptor parse_backend(const std::string& text) {
  BackendDescriptor d;
  d.text = text;
  if (text == "builtin:synthetic") return d;
  if (text.rfind("remote:stdio:", 0) == 0) {
    d.kind = BackendDescriptor::Kind::kStdio;
    d.command = text.substr(13);
    if (d.command.empty()) throw Error(ErrorCode::kConfig, "remote:stdio: needs a command");
    return d;
  }
  if (text.rfind("remote:", 0) == 0) {
    const std::string addr = text.substr(7);
    const std::size_t colon = addr.rfind(':');
    if (colon == std::string::npos || colon == 0) {
      throw Error(ErrorCode::kConfig, "expected remote:<host>:<port>, got '" + text + "'");
    }
    d.kind = BackendDescriptor::Kind::kTcp;
    d.host = addr.substr(0, colon);
    try {
      const unsigned long port = std::stoul(addr.substr(colon + 1));
      if (port == 0 || port > 65535) throw std::out_of_range("port");
      d.port = static_cast<std::uint16_t>(port);
    } catch (const std::exception&) {
      throw Error(ErrorCode::kConfig, "bad port in '" + text + "'");
    }
    return d;
  }
  throw Error(ErrorCode::kConfig,
              "backend must be builtin:synthetic, remote:stdio:<cmd> or remote:<host>:<port>");
}

std::unique_ptr<Transport> open_transport(const BackendDescriptor& d) {
  if (d.kind == BackendDescriptor::Kind::kStdio) return spawn_stdio_transport(d.command);
  return connect_tcp_transport(d.host, d.port);
}

InitParams init_params(const SearchConfig& c) {
  return InitParams{c.d_z, c.rank_r, c.seed, c.temperature};
}

BackendFactory synthetic_factory(const std::string& bench, std::uint64_t world_seed,
                                 std::size_t problem) {
  return [=](const InitParams& p) -> std::unique_ptr<Backend> {
    const Benchmark b = make_benchmark(bench, world_seed, p.d_z, problem + 1);
    SyntheticOptions options;
    options.rank_r = p.rank_r;
    options.injection_seed = p.seed;
    return std::make_unique<SyntheticBackend>(make_world(b.problems[problem].world), options);
  };
}

// ---------------------------------------------------------------------------
// Shared helpers

std::vector<std::size_t> parse_list(const std::string& text, const char* what) {
  std::vector<std::size_t> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      const unsigned long long v = std::stoull(item, &used);
      if (used != item.size()) throw std::invalid_argument(item);
      out.push_back(static_cast<std::size_t>(v));
    } catch (const std::exception&) {
      throw Error(ErrorCode::kConfig, std::string("bad ") + what + " entry '" + item + "'");
    }
  }
  if (out.empty()) throw Error(ErrorCode::kConfig, std::string(what) + " is empty");
  return out;
}

std::string timestamp_utc() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::kIo, "cannot create " + dir.string() + ": " + ec.message());
}

json manifest(const std::string& command, const SearchConfig& config, const std::string& backend,
              const fs::path& out_dir, json extra) {
  json m = std::move(extra);
  m["command"] = command;
  m["config"] = config_to_json(config);
  m["config_hash"] = config_hash(config);
  m["ablation"] = std::string(to_string(config.ablation));
  m["backend"] = backend;
  m["out_dir"] = out_dir.string();
  m["timestamp"] = timestamp_utc();
  return m;
}

SearchConfig load_run_config(const std::string& path) {
  SearchConfig c = path.empty() ? SearchConfig{} : load_config(path);
  apply_env_overrides(c);
  return c;
}

std::vector<TokenSeq> read_queries(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot read " + path.string());
  std::vector<TokenSeq> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    TokenSeq q;
    try {
      const std::size_t first = line.find_first_not_of(" \t");
      if (line[first] == '[') {
        q = json::parse(line).get<TokenSeq>();
      } else {
        std::istringstream ss(line);
        long long v = 0;
        while (ss >> v) {
          if (v < 0) throw std::invalid_argument("negative token");
          q.push_back(static_cast<TokenId>(v));
        }
        if (!ss.eof()) throw std::invalid_argument("non-numeric token");
      }
    } catch (const std::exception&) {
      throw Error(ErrorCode::kConfig,
                  path.string() + ":" + std::to_string(line_no) + ": expected token ids");
    }
    out.push_back(std::move(q));
  }
  if (out.empty()) throw Error(ErrorCode::kConfig, path.string() + " has no queries");
  return out;
}

double pass_at(const PassCurve& curve, std::size_t k) {
  double rate = curve.points.front().pass_rate;
  for (const PassPoint& p : curve.points) {
    if (p.k <= k) rate = p.pass_rate;
  }
  return rate;
}

std::string fmt(double v) { return format_real(v); }

// ---------------------------------------------------------------------------
// run

struct RunOptions {
  std::string config_path;
  std::string backend = "builtin:synthetic";
  std::string bench;
  std::string query_file;
  std::size_t trials = 16;
  std::uint64_t world_seed = 0;
  std::size_t problems = 8;
  std::string ablation;
  std::size_t parallelism = 0;
  std::string out_dir;
};

int cmd_run(const RunOptions& o) {
  SearchConfig config = load_run_config(o.config_path);
  if (!o.ablation.empty()) config.ablation = parse_ablation(o.ablation);
  if (o.parallelism != 0) config.parallelism = o.parallelism;
  config.validate();
  const BackendDescriptor backend = parse_backend(o.backend);
  if (o.trials == 0) throw Error(ErrorCode::kConfig, "--trials must be >= 1");
  if (o.bench.empty() == o.query_file.empty()) {
    throw Error(ErrorCode::kConfig, "give exactly one of --bench and --query");
  }
  if (backend.kind == BackendDescriptor::Kind::kSynthetic && o.bench.empty()) {
    throw Error(ErrorCode::kConfig, "builtin:synthetic needs --bench");
  }

  const fs::path out(o.out_dir);
  std::vector<json> traj_lines;
  std::vector<json> score_out;
  std::vector<json> record_lines;

  auto add_trajectory = [&](const Trajectory& t, json extra) {
    for (json s : score_lines(t)) {
      s["problem_id"] = extra["problem_id"];
      score_out.push_back(std::move(s));
    }
    traj_lines.push_back(geosearch::to_json(t, extra));
  };

  if (backend.kind == BackendDescriptor::Kind::kSynthetic) {
    const Benchmark bench = make_benchmark(o.bench, o.world_seed, config.d_z, o.problems);
    for (const BenchmarkProblem& p : bench.problems) {
      const ProblemRun run = run_problem(p, config, o.trials);
      for (std::size_t i = 0; i < run.trajectories.size(); ++i) {
        json extra{{"problem_id", p.id},
                   {"judged_mode", run.judged_mode[i] ? json(*run.judged_mode[i]) : json(nullptr)},
                   {"success", static_cast<bool>(run.record.per_trial_success[i])}};
        add_trajectory(run.trajectories[i], std::move(extra));
      }
      record_lines.push_back(geosearch::to_json(run.record));
    }
  } else {
    std::vector<std::pair<std::string, TokenSeq>> queries;
    if (!o.bench.empty()) {
      for (const BenchmarkProblem& p :
           make_benchmark(o.bench, o.world_seed, config.d_z, o.problems).problems) {
        queries.emplace_back(p.id, p.query);
      }
    } else {
      const std::vector<TokenSeq> qs = read_queries(o.query_file);
      for (std::size_t i = 0; i < qs.size(); ++i) queries.emplace_back("q" + std::to_string(i), qs[i]);
    }
    RemoteBackend remote(open_transport(backend), init_params(config));
    for (const auto& [id, query] : queries) {
      for (std::size_t trial = 0; trial < o.trials; ++trial) {
        add_trajectory(run_search(query, config, remote, trial), json{{"problem_id", id}});
      }
    }
    remote.shutdown();
  }

  ensure_dir(out);
  write_text(out / "trajectories.jsonl", to_jsonl(traj_lines));
  write_text(out / "scores.jsonl", to_jsonl(score_out));
  if (!record_lines.empty()) write_text(out / "records.jsonl", to_jsonl(record_lines));
  json extra{{"bench", o.bench.empty() ? json(nullptr) : json(o.bench)},
             {"query_file", o.query_file.empty() ? json(nullptr) : json(o.query_file)},
             {"trials", o.trials},
             {"problems", o.problems},
             {"seeds", {{"config", config.seed}, {"world", json::array({o.world_seed})}}}};
  write_text(out / "manifest.json", manifest("run", config, backend.text, out, extra).dump(2) + "\n");
  std::cout << "wrote " << traj_lines.size() << " trajectories to " << out.string() << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// ablate

struct AblateOptions {
  std::string config_path;
  std::string bench = "modes8";
  std::size_t trials = 16;
  std::size_t seeds = 20;
  std::uint64_t world_seed_base = 0;
  std::size_t problems = 8;
  std::string ablations;
  std::size_t parallelism = 0;
  std::string out_dir;
};

int cmd_ablate(const AblateOptions& o) {
  SearchConfig config = load_run_config(o.config_path);
  if (o.parallelism != 0) config.parallelism = o.parallelism;
  config.validate();
  if (o.seeds == 0) throw Error(ErrorCode::kConfig, "--seeds must be >= 1");
  std::vector<Ablation> modes;
  if (o.ablations.empty()) {
    modes.assign(std::begin(kAllAblations), std::end(kAllAblations));
  } else {
    std::stringstream ss(o.ablations);
    std::string name;
    while (std::getline(ss, name, ',')) modes.push_back(parse_ablation(name));
  }
  const std::vector<std::size_t> grid = power_of_two_grid(o.trials);
  const std::size_t k_top = std::min<std::size_t>(16, o.trials);

  struct Row {
    Ablation mode;
    std::vector<double> auc;       // per world seed
    std::vector<double> distinct;  // per world seed, mean over problems
    double pass1 = 0.0;
    double pass16 = 0.0;
    CostReport cost;
  };
  std::vector<Row> rows;
  std::vector<json> record_lines;
  for (Ablation mode : modes) {
    SearchConfig c = config;
    c.ablation = mode;
    Row row{mode, {}, {}, 0.0, 0.0, {}};
    std::vector<RunRecord> all;
    for (std::size_t s = 0; s < o.seeds; ++s) {
      const Benchmark bench = make_benchmark(o.bench, o.world_seed_base + s, c.d_z, o.problems);
      const BenchmarkRun run = run_benchmark(bench, c, o.trials, grid);
      row.auc.push_back(run.auc);
      row.pass1 += pass_at(run.curve, 1);
      row.pass16 += pass_at(run.curve, k_top);
      row.distinct.push_back(run.mean_distinct_correct(k_top));
      for (const ProblemRun& p : run.problems) {
        all.push_back(p.record);
        json line = geosearch::to_json(p.record);
        line["ablation"] = std::string(to_string(mode));
        record_lines.push_back(std::move(line));
      }
    }
    row.pass1 /= static_cast<double>(o.seeds);
    row.pass16 /= static_cast<double>(o.seeds);
    row.cost = cost_report(all);
    rows.push_back(std::move(row));
  }

  auto mean = [](const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
  };
  std::ostringstream csv;
  csv << "ablation,auc,pass1,pass16,avg_tokens,avg_generated,avg_overhead,overhead_ratio,"
         "distinct_correct\n";
  std::ostringstream frontier;
  frontier << "method,avg_tokens,auc\n";
  json summary{{"bench", o.bench}, {"trials", o.trials}, {"seeds", o.seeds}, {"rows", json::array()}};
  const Row* full = nullptr;
  for (const Row& r : rows) {
    if (r.mode == Ablation::kFull) full = &r;
  }
  for (const Row& r : rows) {
    const std::string name(to_string(r.mode));
    csv << name << ',' << fmt(mean(r.auc)) << ',' << fmt(r.pass1) << ',' << fmt(r.pass16) << ','
        << fmt(r.cost.avg_tokens) << ',' << fmt(r.cost.avg_generated) << ','
        << fmt(r.cost.avg_overhead) << ',' << fmt(r.cost.overhead_ratio) << ','
        << fmt(mean(r.distinct)) << '\n';
    frontier << name << ',' << fmt(r.cost.avg_tokens) << ',' << fmt(mean(r.auc)) << '\n';
    json j{{"ablation", name},
           {"auc", mean(r.auc)},
           {"auc_per_seed", r.auc},
           {"pass1", r.pass1},
           {"pass16", r.pass16},
           {"distinct_correct", mean(r.distinct)},
           {"avg_tokens", r.cost.avg_tokens},
           {"avg_overhead", r.cost.avg_overhead}};
    if (full != nullptr && full != &r && o.seeds >= 2) {
      const PairedTest ta = paired_t_test(full->auc, r.auc);
      const PairedTest td = paired_t_test(full->distinct, r.distinct);
      j["full_vs_this"] = {{"auc_mean_diff", ta.mean_diff},
                           {"auc_p_greater", ta.p_greater},
                           {"distinct_mean_diff", td.mean_diff},
                           {"distinct_p_greater", td.p_greater}};
    }
    summary["rows"].push_back(std::move(j));
  }

  const fs::path out(o.out_dir);
  ensure_dir(out);
  write_text(out / "ablation.csv", csv.str());
  write_text(out / "frontier.csv", frontier.str());
  write_text(out / "summary.json", summary.dump(2) + "\n");
  write_text(out / "records.jsonl", to_jsonl(record_lines));
  std::vector<std::uint64_t> world_seeds;
  for (std::size_t s = 0; s < o.seeds; ++s) world_seeds.push_back(o.world_seed_base + s);
  json extra{{"bench", o.bench},
             {"trials", o.trials},
             {"problems", o.problems},
             {"seeds", {{"config", config.seed}, {"world", world_seeds}}}};
  write_text(out / "manifest.json",
             manifest("ablate", config, "builtin:synthetic", out, extra).dump(2) + "\n");
  std::cout << csv.str();
  return 0;
}

// ---------------------------------------------------------------------------
// accept-decay

struct DecayOptions {
  std::string dims = "3,8,16,32,64";
  double phi = std::numbers::pi / 3.0;
  double sigma = 0.1;
  std::uint64_t n = 100000;
  std::uint64_t seed = 0;
  std::string out;
};

int cmd_accept_decay(const DecayOptions& o) {
  const std::vector<AcceptanceRow> rows =
      acceptance_decay_experiment(parse_list(o.dims, "--dims"), o.phi, o.sigma, o.n, o.seed);
  std::ostringstream csv;
  write_acceptance_csv(csv, rows);
  if (o.out.empty()) {
    std::cout << csv.str();
  } else {
    write_text(o.out, csv.str());
  }
  return 0;
}

// ---------------------------------------------------------------------------
// eval

struct EvalOptions {
  std::string records;
  std::string k_grid;
  std::string estimator = "unbiased";
  std::string method = "run";
  std::string out_dir;
};

int cmd_eval(const EvalOptions& o) {
  const std::vector<RunRecord> records = read_run_records(o.records);
  if (records.empty()) throw Error(ErrorCode::kInvalidArgument, o.records + " has no records");
  PassEstimator estimator;
  if (o.estimator == "unbiased") {
    estimator = PassEstimator::kUnbiased;
  } else if (o.estimator == "empirical") {
    estimator = PassEstimator::kEmpirical;
  } else {
    throw Error(ErrorCode::kConfig, "--estimator must be unbiased or empirical");
  }
  std::vector<std::size_t> grid;
  if (o.k_grid.empty()) {
    std::size_t min_trials = records.front().n_trials;
    for (const RunRecord& r : records) min_trials = std::min(min_trials, r.n_trials);
    for (std::size_t k : kDefaultKGrid) {
      if (k <= min_trials) grid.push_back(k);
    }
  } else {
    grid = parse_list(o.k_grid, "--k-grid");
  }
  const PassCurve curve = pass_curve(records, grid, estimator);
  const double area = auc(curve);
  const CostReport cost = cost_report(records);

  std::ostringstream curve_csv;
  write_pass_curve_csv(curve_csv, curve);
  std::ostringstream frontier;
  frontier << "method,avg_tokens,auc\n" << o.method << ',' << fmt(cost.avg_tokens) << ',' << fmt(area) << '\n';
  json points = json::array();
  for (const PassPoint& p : curve.points) points.push_back({{"k", p.k}, {"pass", p.pass_rate}});
  json summary{{"method", o.method},
               {"estimator", o.estimator},
               {"n_problems", records.size()},
               {"auc", area},
               {"curve", points},
               {"avg_tokens", cost.avg_tokens},
               {"avg_generated", cost.avg_generated},
               {"avg_overhead", cost.avg_overhead},
               {"overhead_ratio", cost.overhead_ratio}};

  const fs::path out(o.out_dir);
  ensure_dir(out);
  write_text(out / "pass_curve.csv", curve_csv.str());
  write_text(out / "summary.json", summary.dump(2) + "\n");
  write_text(out / "frontier.csv", frontier.str());
  std::cout << "auc " << fmt(area) << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// protocol-check and serve

struct ProtocolOptions {
  std::vector<std::string> transcripts;
  std::string backend = "builtin:synthetic";
  std::string bench = "modes8";
  std::uint64_t world_seed = 0;
  std::size_t problem = 0;
  std::string record_to;
};

int cmd_protocol_check(const ProtocolOptions& o) {
  const BackendDescriptor backend = parse_backend(o.backend);
  std::size_t total_mismatches = 0;
  std::ostringstream recorded;
  for (const std::string& path : o.transcripts) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::kIo, "cannot read " + path);
    const std::vector<TranscriptStep> steps = parse_transcript(in);
    std::unique_ptr<Transport> transport =
        backend.kind == BackendDescriptor::Kind::kSynthetic
            ? loopback_transport(std::make_shared<ProtocolServer>(
                  synthetic_factory(o.bench, o.world_seed, o.problem)))
            : open_transport(backend);
    if (!o.record_to.empty()) {
      for (const TranscriptStep& step : steps) {
        transport->send_line(step.request);
        recorded << "> " << step.request << "\n< " << transport->recv_line() << "\n";
      }
      continue;
    }
    const ReplayResult r = replay_transcript(steps, *transport);
    std::cout << path << ": " << r.steps << " steps, " << r.mismatches << " mismatches\n";
    for (const std::string& d : r.diffs) std::cout << "  " << d << "\n";
    total_mismatches += r.mismatches;
  }
  if (!o.record_to.empty()) {
    write_text(o.record_to, recorded.str());
    return 0;
  }
  return total_mismatches == 0 ? 0 : kExitBackend;
}

struct ServeOptions {
  std::string bench = "modes8";
  std::uint64_t world_seed = 0;
  std::size_t problem = 0;
  int port = -1;
};

int cmd_serve(const ServeOptions& o) {
  ProtocolServer server(synthetic_factory(o.bench, o.world_seed, o.problem));
  if (o.port < 0) {
    server.serve(std::cin, std::cout);
    return 0;
  }
  if (o.port > 65535) throw Error(ErrorCode::kConfig, "--port out of range");
  serve_tcp(server, static_cast<std::uint16_t>(o.port), [](std::uint16_t port) {
    std::cerr << "listening on 127.0.0.1:" << port << std::endl;
  });
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Chunked latent search over anchor directions"};
  app.require_subcommand(1);

  RunOptions run;
  CLI::App* run_cmd = app.add_subcommand("run", "Search every trial of a benchmark or query file");
  run_cmd->add_option("--config", run.config_path, "TOML or JSON SearchConfig");
  run_cmd->add_option("--backend", run.backend,
                      "builtin:synthetic | remote:stdio:<cmd> | remote:<host>:<port>");
  run_cmd->add_option("--bench", run.bench, "Built-in benchmark: modes2, modes8, modes32");
  run_cmd->add_option("--query", run.query_file, "One query per line (token ids)");
  run_cmd->add_option("--trials", run.trials, "Trials per problem");
  run_cmd->add_option("--world-seed", run.world_seed, "Benchmark world seed");
  run_cmd->add_option("--problems", run.problems, "Problems per benchmark");
  run_cmd->add_option("--ablation", run.ablation, "Override the configured ablation");
  run_cmd->add_option("--parallelism", run.parallelism, "Override the configured parallelism");
  run_cmd->add_option("--out", run.out_dir, "Output directory")->required();

  AblateOptions ablate;
  CLI::App* ablate_cmd = app.add_subcommand("ablate", "Run every ablation over several world seeds");
  ablate_cmd->add_option("--config", ablate.config_path, "TOML or JSON SearchConfig");
  ablate_cmd->add_option("--bench", ablate.bench, "Built-in benchmark");
  ablate_cmd->add_option("--trials", ablate.trials, "Trials per problem");
  ablate_cmd->add_option("--seeds", ablate.seeds, "Number of world seeds");
  ablate_cmd->add_option("--world-seed-base", ablate.world_seed_base, "First world seed");
  ablate_cmd->add_option("--problems", ablate.problems, "Problems per benchmark");
  ablate_cmd->add_option("--ablations", ablate.ablations, "Comma-separated subset");
  ablate_cmd->add_option("--parallelism", ablate.parallelism, "Override the configured parallelism");
  ablate_cmd->add_option("--out", ablate.out_dir, "Output directory")->required();

  DecayOptions decay;
  CLI::App* decay_cmd =
      app.add_subcommand("accept-decay", "Hard-cone acceptance rate against dimension");
  decay_cmd->add_option("--dims", decay.dims, "Comma-separated dimensions (>= 3)");
  decay_cmd->add_option("--phi", decay.phi, "Cone half-angle in radians");
  decay_cmd->add_option("--sigma", decay.sigma, "Proposal step size");
  decay_cmd->add_option("--n", decay.n, "Samples per dimension");
  decay_cmd->add_option("--seed", decay.seed, "Random seed");
  decay_cmd->add_option("--out", decay.out, "CSV path (stdout when omitted)");

  EvalOptions eval;
  CLI::App* eval_cmd = app.add_subcommand("eval", "Pass@k curve, AUC and cost from run records");
  eval_cmd->add_option("--records", eval.records, "RunRecord JSONL")->required();
  eval_cmd->add_option("--k-grid", eval.k_grid, "Comma-separated k values");
  eval_cmd->add_option("--estimator", eval.estimator, "unbiased | empirical");
  eval_cmd->add_option("--method", eval.method, "Method label for the frontier CSV");
  eval_cmd->add_option("--out", eval.out_dir, "Output directory")->required();

  ProtocolOptions proto;
  CLI::App* proto_cmd =
      app.add_subcommand("protocol-check", "Replay golden transcripts against a backend");
  proto_cmd->add_option("--transcript", proto.transcripts, "Transcript file")->required();
  proto_cmd->add_option("--backend", proto.backend, "builtin:synthetic or remote descriptor");
  proto_cmd->add_option("--bench", proto.bench, "Benchmark hosted by the builtin backend");
  proto_cmd->add_option("--world-seed", proto.world_seed, "World seed of the hosted benchmark");
  proto_cmd->add_option("--problem", proto.problem, "Problem index of the hosted benchmark");
  proto_cmd->add_option("--record", proto.record_to, "Write observed replies as a transcript");

  ServeOptions serve;
  CLI::App* serve_cmd = app.add_subcommand("serve", "Host a synthetic problem over the wire protocol");
  serve_cmd->add_option("--bench", serve.bench, "Built-in benchmark");
  serve_cmd->add_option("--world-seed", serve.world_seed, "World seed");
  serve_cmd->add_option("--problem", serve.problem, "Problem index");
  serve_cmd->add_option("--port", serve.port, "TCP port on 127.0.0.1 (stdio when omitted)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    if (*run_cmd) return cmd_run(run);
    if (*ablate_cmd) return cmd_ablate(ablate);
    if (*decay_cmd) return cmd_accept_decay(decay);
    if (*eval_cmd) return cmd_eval(eval);
    if (*proto_cmd) return cmd_protocol_check(proto);
    if (*serve_cmd) return cmd_serve(serve);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitBackend;
  }
  return kExitConfig;
}
