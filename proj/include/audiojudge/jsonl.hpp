#pragma once

#include <atomic>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "audiojudge/schema.hpp"

namespace audiojudge {

namespace fs = std::filesystem;

inline std::string read_text_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Non-blank lines of a JSONL file.
inline std::vector<std::string> read_lines(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") != std::string::npos) lines.push_back(line);
  }
  return lines;
}

inline json read_json_file(const fs::path& path) {
  try {
    return json::parse(read_text_file(path));
  } catch (const json::parse_error& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

/// Writes via a sibling temp file and rename so readers never observe a
/// partially written file.
inline void atomic_write_text(const fs::path& path, const std::string& content) {
  static std::atomic<unsigned> counter{0};
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp." + std::to_string(::getpid()) + "." + std::to_string(counter++);
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    out << content;
    out.flush();
    if (!out) throw IoError("short write to " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp);
    throw IoError("cannot publish " + path.string() + ": " + ec.message());
  }
}

/// Publishes content at path only if nothing is there yet. Returns false if a
/// file already existed (its content is left untouched).
inline bool publish_once(const fs::path& path, const std::string& content) {
  static std::atomic<unsigned> counter{0};
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp." + std::to_string(::getpid()) + "." + std::to_string(counter++);
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    out << content;
  }
  // link(2) fails with EEXIST instead of replacing, which gives write-once
  // semantics under concurrent writers.
  int rc = ::link(tmp.c_str(), path.c_str());
  int err = errno;
  fs::remove(tmp);
  if (rc == 0) return true;
  if (err == EEXIST) return false;
  throw IoError("cannot publish " + path.string());
}

template <class T>
std::vector<T> read_records(const fs::path& path) {
  std::vector<T> out;
  std::size_t lineno = 0;
  for (const auto& line : read_lines(path)) {
    ++lineno;
    try {
      out.push_back(parse_record<T>(line));
    } catch (const ParseError& e) {
      throw ParseError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    } catch (const InvariantViolation& e) {
      throw InvariantViolation(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

template <class T>
std::string to_jsonl(const std::vector<T>& records) {
  std::string out;
  for (const auto& r : records) {
    out += serialize_record(r);
    out += '\n';
  }
  return out;
}

template <class T>
void write_records(const fs::path& path, const std::vector<T>& records) {
  atomic_write_text(path, to_jsonl(records));
}

/// Pretty-printed canonical JSON document (reports, manifests, configs).
inline void write_json_file(const fs::path& path, const json& doc) {
  atomic_write_text(path, doc.dump(2, ' ', false, json::error_handler_t::strict) + "\n");
}

}  // namespace audiojudge
