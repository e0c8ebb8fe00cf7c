// Copyright 2026 The geosearch Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include <json.hpp>

#include "geosearch/engine.hpp"

namespace geosearch {

/// Parses the flat TOML subset used by config files: comments, `key = value`
/// pairs with integer, float, boolean and basic-string values, `[table]`
/// headers one level deep and single-line inline tables. Throws kConfig with
/// the offending line number.
nlohmann::json parse_toml(std::string_view text);

/// Strict mapping: keys must be SearchConfig field names (weights as a
/// nested table with lambda_b, lambda_u, delta); unknown keys, wrong types
/// and out-of-range values throw kConfig.
SearchConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const SearchConfig& config);

/// Reads a .toml or .json file (chosen by extension, JSON otherwise when the
/// text starts with '{'). Throws kIo when unreadable, kConfig when invalid.
SearchConfig load_config(const std::filesystem::path& path);

/// Applies TGR_SEED from the environment when set. Throws kConfig when the
/// value is not an unsigned integer.
void apply_env_overrides(SearchConfig& config);

/// FNV-1a 64 of the canonical JSON form without parallelism, as 16 hex digits.
std::string config_hash(const SearchConfig& config);

}  // namespace geosearch
