#pragma once

// JSONL persistence. One record per line, UTF-8; blank lines are skipped.

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "esvr/error.hpp"

namespace esvr {

using json = nlohmann::json;

// Parses every line as JSON. Malformed JSON raises SchemaError with field
// "<json>" and the 1-based line number. FileNotFound when the path is absent.
std::vector<json> read_jsonl_raw(const std::filesystem::path& path);

// Reads records through `parse`; a SchemaError from `parse` is re-raised with
// the line number attached.
template <typename T>
std::vector<T> read_jsonl(const std::filesystem::path& path, const std::function<T(const json&)>& parse);

// Serializes one record per line and replaces `path` atomically. Returns the
// number of records written.
std::size_t write_jsonl(const std::filesystem::path& path, const std::vector<json>& records);

template <typename T, typename ToJson>
std::size_t write_records(const std::filesystem::path& path, const std::vector<T>& items, ToJson to_json_fn) {
  std::vector<json> out;
  out.reserve(items.size());
  for (const auto& it : items) out.push_back(to_json_fn(it));
  return write_jsonl(path, out);
}

// Canonical single-line encoding used for files and hashing (sorted keys).
std::string dump_line(const json& j);

namespace detail {
[[noreturn]] void rethrow_with_line(const SchemaError& e, std::size_t line);
std::vector<std::pair<std::size_t, json>> read_numbered(const std::filesystem::path& path);
}  // namespace detail

template <typename T>
std::vector<T> read_jsonl(const std::filesystem::path& path, const std::function<T(const json&)>& parse) {
  std::vector<T> out;
  for (auto& [line, j] : detail::read_numbered(path)) {
    try {
      out.push_back(parse(j));
    } catch (const SchemaError& e) {
      detail::rethrow_with_line(e, line);
    }
  }
  return out;
}

}  // namespace esvr
