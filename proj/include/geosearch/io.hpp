// Copyright 2026 The geosearch Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "geosearch/engine.hpp"
#include "geosearch/eval.hpp"

namespace geosearch {

nlohmann::json to_json(const UnitAnchor& anchor);
UnitAnchor anchor_from_json(const nlohmann::json& j);

nlohmann::json to_json(const ScoreBreakdown& score);
nlohmann::json to_json(const BoundaryRecord& record);

/// One JSONL line per trajectory. `extra` keys (problem id, judgement) are
/// merged in first so the layout stays fixed.
nlohmann::json to_json(const Trajectory& traj, const nlohmann::json& extra = nlohmann::json::object());

/// Per-candidate score lines {"t", "candidate", "v_fore", "p_bum", "p_uni",
/// "total"}; candidates without a rollout are skipped.
std::vector<nlohmann::json> score_lines(const Trajectory& traj);

nlohmann::json to_json(const RunRecord& record);
/// Throws kInvalidArgument on a malformed record.
RunRecord run_record_from_json(const nlohmann::json& j);

/// Reads RunRecord JSONL, skipping blank lines. Throws kIo / kInvalidArgument.
std::vector<RunRecord> read_run_records(const std::filesystem::path& path);

/// Anchors of every boundary's candidate set and the selected sequence, as
/// stored in a trajectory line.
struct AnchorTrace {
  std::vector<std::vector<UnitAnchor>> candidates;
  std::vector<UnitAnchor> anchors;
};
AnchorTrace anchor_trace_from_json(const nlohmann::json& traj);

/// Writes `text` to path atomically enough for CLI use. Throws kIo.
void write_text(const std::filesystem::path& path, const std::string& text);

/// Serializes one JSON value per line.
std::string to_jsonl(const std::vector<nlohmann::json>& lines);

}  // namespace geosearch
