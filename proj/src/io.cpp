// Copyright 2026 The geosearch Authors
// SPDX-License-Identifier: Apache-2.0

#include "geosearch/io.hpp"

#include <algorithm>
#include <fstream>
#include <string>

#include "geosearch/error.hpp"

namespace geosearch {

using nlohmann::json;

json to_json(const UnitAnchor& anchor) {
  return json(std::vector<double>(anchor.coords().begin(), anchor.coords().end()));
}

UnitAnchor anchor_from_json(const json& j) {
  if (!j.is_array()) throw Error(ErrorCode::kInvalidArgument, "anchor must be an array");
  return UnitAnchor::from_unit(j.get<std::vector<double>>());
}

json to_json(const ScoreBreakdown& s) {
  return json{{"v_fore", s.v_fore},
              {"p_bum", s.p_bum},
              {"p_uni", s.p_uni},
              {"total", s.total},
              {"short_trace", s.short_trace}};
}

json to_json(const BoundaryRecord& r) {
  json cands = json::array();
  for (const Candidate& c : r.candidates) {
    cands.push_back({{"anchor", to_json(c.anchor)},
                     {"score", c.score ? to_json(*c.score) : json(nullptr)},
                     {"rollout_tokens", c.rollout_tokens}});
  }
  return json{{"t", r.step_t},
              {"context_tokens", r.context_tokens},
              {"selected_index", r.selected_index},
              {"selection", r.selection == Selection::kArgmax ? "argmax" : "random"},
              {"rollout_tokens_spent", r.rollout_tokens_spent},
              {"candidates", std::move(cands)}};
}

json to_json(const Trajectory& traj, const json& extra) {
  json j = extra.is_object() ? extra : json::object();
  j["trial"] = traj.trial;
  j["chunks"] = traj.chunks;
  json anchors = json::array();
  for (const UnitAnchor& a : traj.anchors) anchors.push_back(to_json(a));
  j["anchors"] = std::move(anchors);
  json records = json::array();
  for (const BoundaryRecord& r : traj.boundary_records) records.push_back(to_json(r));
  j["boundary_records"] = std::move(records);
  j["tokens_generated"] = traj.tokens_generated;
  j["rollout_tokens"] = traj.rollout_tokens;
  j["total_tokens"] = traj.total_tokens;
  j["prefill_tokens"] = traj.prefill_tokens;
  j["max_context_tokens"] = traj.max_context_tokens;
  j["backend_calls"] = traj.backend_calls;
  j["terminated_by"] = std::string(to_string(traj.terminated_by));
  return j;
}

std::vector<json> score_lines(const Trajectory& traj) {
  std::vector<json> out;
  for (const BoundaryRecord& r : traj.boundary_records) {
    for (std::size_t j = 0; j < r.candidates.size(); ++j) {
      const auto& s = r.candidates[j].score;
      if (!s) continue;
      out.push_back({{"trial", traj.trial},
                     {"t", r.step_t},
                     {"candidate", j},
                     {"v_fore", s->v_fore},
                     {"p_bum", s->p_bum},
                     {"p_uni", s->p_uni},
                     {"total", s->total},
                     {"selected", j == r.selected_index}});
    }
  }
  return out;
}

json to_json(const RunRecord& r) {
  return json{{"problem_id", r.problem_id},
              {"n_trials", r.n_trials},
              {"n_correct", r.n_correct},
              {"per_trial_success", r.per_trial_success},
              {"tokens_generated", r.tokens_generated},
              {"tokens_overhead", r.tokens_overhead}};
}

RunRecord run_record_from_json(const json& j) {
  try {
    RunRecord r;
    r.problem_id = j.at("problem_id").get<std::string>();
    if (j.contains("per_trial_success")) {
      r.per_trial_success = j.at("per_trial_success").get<std::vector<bool>>();
    }
    if (j.contains("n_trials")) {
      r.n_trials = j.at("n_trials").get<std::size_t>();
    } else {
      r.n_trials = r.per_trial_success.size();
    }
    if (j.contains("n_correct")) {
      r.n_correct = j.at("n_correct").get<std::size_t>();
    } else {
      r.n_correct = static_cast<std::size_t>(
          std::count(r.per_trial_success.begin(), r.per_trial_success.end(), true));
    }
    r.tokens_generated = j.value("tokens_generated", std::uint64_t{0});
    r.tokens_overhead = j.value("tokens_overhead", std::uint64_t{0});
    r.validate();
    return r;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kInvalidArgument, std::string("malformed run record: ") + e.what());
  }
}

std::vector<RunRecord> read_run_records(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot read " + path.string());
  std::vector<RunRecord> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw Error(ErrorCode::kInvalidArgument,
                  path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
    out.push_back(run_record_from_json(j));
  }
  return out;
}

AnchorTrace anchor_trace_from_json(const json& traj) {
  AnchorTrace out;
  for (const json& a : traj.at("anchors")) out.anchors.push_back(anchor_from_json(a));
  for (const json& r : traj.at("boundary_records")) {
    std::vector<UnitAnchor> set;
    for (const json& c : r.at("candidates")) set.push_back(anchor_from_json(c.at("anchor")));
    out.candidates.push_back(std::move(set));
  }
  return out;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  out << text;
  out.flush();
  if (!out) throw Error(ErrorCode::kIo, "write failed for " + path.string());
}

std::string to_jsonl(const std::vector<json>& lines) {
  std::string out;
  for (const json& j : lines) {
    out += j.dump();
    out += '\n';
  }
  return out;
}

}  // namespace geosearch
