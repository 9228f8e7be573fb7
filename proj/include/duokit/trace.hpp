#pragma once

#include <json.hpp>

#include <cstdint>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace duokit {

/// One parsed trace line: "<time> <node> <type> <fields...>".
struct TraceRecord {
  std::uint64_t time = 0;
  std::uint32_t node = 0;
  std::string type;
  std::vector<std::string> fields;
};

struct ParsedTrace {
  nlohmann::json header;
  std::vector<TraceRecord> records;
  bool complete = false;  // saw the end marker
  std::uint64_t end_time = 0;
  std::string end_status;
  std::string error;

  bool ok() const { return error.empty(); }

  bool node_correct(std::uint32_t node) const {
    for (const auto& c : header.at("correct"))
      if (c.get<std::uint32_t>() == node) return true;
    return false;
  }
};

inline ParsedTrace parse_trace(const std::vector<std::string>& lines) {
  ParsedTrace out;
  if (lines.empty() || lines.front().rfind("header ", 0) != 0) {
    out.error = "missing trace header";
    return out;
  }
  try {
    out.header = nlohmann::json::parse(lines.front().substr(7));
  } catch (const std::exception& ex) {
    out.error = std::string("bad header: ") + ex.what();
    return out;
  }
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const std::string& line = lines[i];
    if (line.empty()) continue;
    if (line.rfind("end ", 0) == 0) {
      std::istringstream is(line.substr(4));
      is >> out.end_time >> out.end_status;
      out.complete = true;
      continue;
    }
    std::istringstream is(line);
    TraceRecord rec;
    if (!(is >> rec.time >> rec.node >> rec.type)) {
      out.error = "malformed record at line " + std::to_string(i + 1);
      return out;
    }
    std::string tok;
    while (is >> tok) rec.fields.push_back(tok);
    out.records.push_back(std::move(rec));
  }
  return out;
}

inline ParsedTrace parse_trace_file(const std::string& path) {
  std::ifstream in(path);
  ParsedTrace bad;
  if (!in) {
    bad.error = "cannot open trace file: " + path;
    return bad;
  }
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) lines.push_back(line);
  return parse_trace(lines);
}

inline void write_trace_file(const std::string& path, const std::vector<std::string>& lines) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write trace file: " + path);
  for (const auto& l : lines) out << l << '\n';
}

}  // namespace duokit
