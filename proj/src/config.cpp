// Copyright 2026 The geosearch Authors
// SPDX-License-Identifier: Apache-2.0

#include "geosearch/config.hpp"

#include <cctype>
#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "geosearch/error.hpp"

namespace geosearch {

using nlohmann::json;

namespace {

[[noreturn]] void toml_error(std::size_t line, const std::string& what) {
  throw Error(ErrorCode::kConfig, "line " + std::to_string(line) + ": " + what);
}

bool is_bare_key_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-';
}

class LineParser {
 public:
  LineParser(std::string_view text, std::size_t line) : s_(text), line_(line) {}

  void skip_ws() {
    while (i_ < s_.size() && (s_[i_] == ' ' || s_[i_] == '\t')) ++i_;
  }
  bool at_end() {
    skip_ws();
    return i_ >= s_.size() || s_[i_] == '#';
  }
  bool consume(char c) {
    skip_ws();
    if (i_ < s_.size() && s_[i_] == c) {
      ++i_;
      return true;
    }
    return false;
  }
  void expect(char c) {
    if (!consume(c)) toml_error(line_, std::string("expected '") + c + "'");
  }

  std::string key() {
    skip_ws();
    if (i_ < s_.size() && s_[i_] == '"') return string();
    const std::size_t start = i_;
    while (i_ < s_.size() && is_bare_key_char(s_[i_])) ++i_;
    if (i_ == start) toml_error(line_, "expected a key");
    return std::string(s_.substr(start, i_ - start));
  }

  std::string string() {
    expect('"');
    std::string out;
    while (i_ < s_.size() && s_[i_] != '"') {
      char c = s_[i_++];
      if (c == '\\') {
        if (i_ >= s_.size()) break;
        const char e = s_[i_++];
        switch (e) {
          case 'n': c = '\n'; break;
          case 't': c = '\t'; break;
          case '"': c = '"'; break;
          case '\\': c = '\\'; break;
          default: toml_error(line_, std::string("unsupported escape \\") + e);
        }
      }
      out.push_back(c);
    }
    if (i_ >= s_.size()) toml_error(line_, "unterminated string");
    ++i_;
    return out;
  }

  json value() {
    skip_ws();
    if (i_ >= s_.size()) toml_error(line_, "missing value");
    if (s_[i_] == '"') return string();
    if (s_[i_] == '{') return inline_table();
    const std::size_t start = i_;
    while (i_ < s_.size() && s_[i_] != ',' && s_[i_] != '}' && s_[i_] != '#' && s_[i_] != ' ' &&
           s_[i_] != '\t') {
      ++i_;
    }
    std::string tok(s_.substr(start, i_ - start));
    if (tok == "true") return true;
    if (tok == "false") return false;
    if (tok == "inf" || tok == "+inf") return std::numeric_limits<double>::infinity();
    std::string digits;
    for (char c : tok) {
      if (c != '_') digits.push_back(c);
    }
    if (digits.empty()) toml_error(line_, "missing value");
    const bool is_float = digits.find_first_of(".eE") != std::string::npos;
    if (!is_float) {
      std::int64_t v = 0;
      const char* first = digits.data() + (digits[0] == '+' ? 1 : 0);
      auto [ptr, ec] = std::from_chars(first, digits.data() + digits.size(), v);
      if (ec != std::errc() || ptr != digits.data() + digits.size()) {
        toml_error(line_, "bad value '" + tok + "'");
      }
      return v;
    }
    char* end = nullptr;
    const double v = std::strtod(digits.c_str(), &end);
    if (end != digits.c_str() + digits.size()) toml_error(line_, "bad value '" + tok + "'");
    return v;
  }

  json inline_table() {
    expect('{');
    json out = json::object();
    if (consume('}')) return out;
    while (true) {
      const std::string k = key();
      expect('=');
      if (out.contains(k)) toml_error(line_, "duplicate key '" + k + "'");
      out[k] = value();
      if (consume('}')) return out;
      expect(',');
    }
  }

 private:
  std::string_view s_;
  std::size_t line_;
  std::size_t i_ = 0;
};

template <class T>
T get_unsigned(const json& j, const char* key) {
  if (!j.is_number_integer() || (!j.is_number_unsigned() && j.get<std::int64_t>() < 0)) {
    throw Error(ErrorCode::kConfig, std::string(key) + " must be a non-negative integer");
  }
  return j.get<T>();
}

double get_real(const json& j, const char* key) {
  if (!j.is_number()) throw Error(ErrorCode::kConfig, std::string(key) + " must be a number");
  return j.get<double>();
}

}  // namespace

json parse_toml(std::string_view text) {
  json root = json::object();
  json* table = &root;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t eol = text.find('\n', pos);
    if (eol == std::string_view::npos) eol = text.size();
    std::string_view line = text.substr(pos, eol - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    pos = eol + 1;
    ++line_no;

    LineParser p(line, line_no);
    if (p.at_end()) continue;
    if (p.consume('[')) {
      const std::string name = p.key();
      p.expect(']');
      if (!p.at_end()) toml_error(line_no, "trailing characters after table header");
      if (root.contains(name)) toml_error(line_no, "duplicate table '" + name + "'");
      root[name] = json::object();
      table = &root[name];
      continue;
    }
    const std::string k = p.key();
    p.expect('=');
    json v = p.value();
    if (!p.at_end()) toml_error(line_no, "trailing characters after value");
    if (table->contains(k)) toml_error(line_no, "duplicate key '" + k + "'");
    (*table)[k] = std::move(v);
  }
  return root;
}

SearchConfig config_from_json(const json& j) {
  if (!j.is_object()) throw Error(ErrorCode::kConfig, "config must be an object");
  SearchConfig c;
  for (const auto& [key, v] : j.items()) {
    if (key == "chunk_limit_L") {
      c.chunk_limit_L = get_unsigned<std::size_t>(v, "chunk_limit_L");
    } else if (key == "chunk_len_S") {
      c.chunk_len_S = get_unsigned<std::size_t>(v, "chunk_len_S");
    } else if (key == "candidates_K") {
      c.candidates_K = get_unsigned<std::size_t>(v, "candidates_K");
    } else if (key == "rollout_s") {
      c.rollout_s = get_unsigned<std::size_t>(v, "rollout_s");
    } else if (key == "sigma") {
      c.sigma = get_real(v, "sigma");
    } else if (key == "rank_r") {
      c.rank_r = get_unsigned<std::size_t>(v, "rank_r");
    } else if (key == "d_z") {
      c.d_z = get_unsigned<std::size_t>(v, "d_z");
    } else if (key == "temperature") {
      c.temperature = get_real(v, "temperature");
    } else if (key == "rollout_temperature") {
      if (!v.is_null()) c.rollout_temperature = get_real(v, "rollout_temperature");
    } else if (key == "seed") {
      c.seed = get_unsigned<std::uint64_t>(v, "seed");
    } else if (key == "parallelism") {
      c.parallelism = get_unsigned<std::size_t>(v, "parallelism");
    } else if (key == "ablation") {
      if (!v.is_string()) throw Error(ErrorCode::kConfig, "ablation must be a string");
      c.ablation = parse_ablation(v.get<std::string>());
    } else if (key == "weights") {
      if (!v.is_object()) throw Error(ErrorCode::kConfig, "weights must be a table");
      for (const auto& [wk, wv] : v.items()) {
        if (wk == "lambda_b") {
          c.weights.lambda_b = get_real(wv, "weights.lambda_b");
        } else if (wk == "lambda_u") {
          c.weights.lambda_u = get_real(wv, "weights.lambda_u");
        } else if (wk == "delta") {
          c.weights.delta = get_real(wv, "weights.delta");
        } else {
          throw Error(ErrorCode::kConfig, "unknown key 'weights." + wk + "'");
        }
      }
    } else {
      throw Error(ErrorCode::kConfig, "unknown key '" + key + "'");
    }
  }
  c.validate();
  return c;
}

json config_to_json(const SearchConfig& c) {
  json j;
  j["chunk_limit_L"] = c.chunk_limit_L;
  j["chunk_len_S"] = c.chunk_len_S;
  j["candidates_K"] = c.candidates_K;
  j["rollout_s"] = c.rollout_s;
  j["sigma"] = c.sigma;
  j["weights"] = {{"lambda_b", c.weights.lambda_b},
                  {"lambda_u", c.weights.lambda_u},
                  {"delta", c.weights.delta}};
  j["rank_r"] = c.rank_r;
  j["d_z"] = c.d_z;
  j["temperature"] = c.temperature;
  j["rollout_temperature"] = c.rollout_temperature ? json(*c.rollout_temperature) : json(nullptr);
  j["seed"] = c.seed;
  j["parallelism"] = c.parallelism;
  j["ablation"] = std::string(to_string(c.ablation));
  return j;
}

SearchConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot read config " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  const std::string text = buf.str();
  const std::size_t first = text.find_first_not_of(" \t\r\n");
  const bool as_json = path.extension() == ".json" ||
                       (path.extension() != ".toml" && first != std::string::npos && text[first] == '{');
  json j;
  if (as_json) {
    try {
      j = json::parse(text);
    } catch (const json::parse_error& e) {
      throw Error(ErrorCode::kConfig, path.string() + ": " + e.what());
    }
  } else {
    j = parse_toml(text);
  }
  try {
    return config_from_json(j);
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.detail());
  }
}

void apply_env_overrides(SearchConfig& config) {
  const char* seed = std::getenv("TGR_SEED");
  if (seed == nullptr || *seed == '\0') return;
  const std::string_view s(seed);
  std::uint64_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw Error(ErrorCode::kConfig, "TGR_SEED must be an unsigned integer, got '" + std::string(s) + "'");
  }
  config.seed = v;
}

std::string config_hash(const SearchConfig& config) {
  // Parallelism never changes results, so it is left out of the hash.
  json j = config_to_json(config);
  j.erase("parallelism");
  const std::string canonical = j.dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : canonical) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char out[17];
  std::snprintf(out, sizeof out, "%016llx", static_cast<unsigned long long>(h));
  return out;
}

}  // namespace geosearch
