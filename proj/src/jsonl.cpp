#include "esvr/jsonl.hpp"

#include <fstream>

#include "esvr/util.hpp"

namespace esvr {

namespace detail {

void rethrow_with_line(const SchemaError& e, std::size_t line) {
  throw SchemaError(e.module(), e.field(), e.message(), line);
}

std::vector<std::pair<std::size_t, json>> read_numbered(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    if (!std::filesystem::exists(path)) throw FileNotFound("corpus", path.string());
    throw IoError("corpus", "cannot open " + path.string());
  }
  std::vector<std::pair<std::size_t, json>> out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (util::trim(line).empty()) continue;
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded()) throw SchemaError("corpus", "<json>", "malformed JSON in " + path.string(), n);
    out.emplace_back(n, std::move(j));
  }
  if (in.bad()) throw IoError("corpus", "read failure on " + path.string());
  return out;
}

}  // namespace detail

std::vector<json> read_jsonl_raw(const std::filesystem::path& path) {
  std::vector<json> out;
  for (auto& [line, j] : detail::read_numbered(path)) out.push_back(std::move(j));
  return out;
}

std::string dump_line(const json& j) { return j.dump(-1, ' ', false, json::error_handler_t::replace); }

std::size_t write_jsonl(const std::filesystem::path& path, const std::vector<json>& records) {
  std::string buf;
  for (const auto& r : records) {
    buf += dump_line(r);
    buf += '\n';
  }
  util::write_file_atomic(path, buf);
  return records.size();
}

}  // namespace esvr
