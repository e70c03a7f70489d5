// Copyright (c) 2026 jointtuner authors
// SPDX-License-Identifier: MIT
//
// Small text-format helpers shared across modules: ordered "key: value"
// metadata files and plain CSV. No quoting or escapes — our payloads are
// identifiers and numbers by construction.

#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace jt {

inline std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

// Doubles formatted so that text -> double -> text round trips exactly.
inline std::string format_double(double x) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return std::string(buf);
}

// ---------------------------------------------------------------------------
// Ordered key: value files (task metadata, checkpoint manifests, run configs).

using KvList = std::vector<std::pair<std::string, std::string>>;

inline void write_kv_file(const std::filesystem::path& path, const KvList& kv) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  for (const auto& [k, v] : kv) os << k << ": " << v << "\n";
  if (!os) throw std::runtime_error("write failed: " + path.string());
}

inline KvList read_kv_file(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot read " + path.string());
  KvList kv;
  std::string line;
  while (std::getline(is, line)) {
    std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    std::size_t c = t.find(':');
    if (c == std::string::npos)
      throw std::runtime_error("bad line in " + path.string() + ": " + line);
    kv.emplace_back(trim(t.substr(0, c)), trim(t.substr(c + 1)));
  }
  return kv;
}

inline const std::string* kv_find(const KvList& kv, const std::string& key) {
  for (const auto& [k, v] : kv)
    if (k == key) return &v;
  return nullptr;
}

inline const std::string& kv_get(const KvList& kv, const std::string& key) {
  if (const std::string* v = kv_find(kv, key)) return *v;
  throw std::runtime_error("missing key: " + key);
}

// ---------------------------------------------------------------------------
// CSV. First row is the header; cells never contain commas.

struct Csv {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  int col(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return static_cast<int>(i);
    throw std::runtime_error("csv column not found: " + name);
  }
};

inline void write_csv(const std::filesystem::path& path, const Csv& csv) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  auto emit = [&os](const std::vector<std::string>& row) {
    for (std::size_t i = 0; i < row.size(); ++i)
      os << (i ? "," : "") << row[i];
    os << "\n";
  };
  emit(csv.header);
  for (const auto& r : csv.rows) emit(r);
  if (!os) throw std::runtime_error("write failed: " + path.string());
}

inline Csv read_csv(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot read " + path.string());
  Csv csv;
  std::string line;
  bool first = true;
  while (std::getline(is, line)) {
    if (trim(line).empty()) continue;
    auto cells = split(trim(line), ',');
    for (auto& c : cells) c = trim(c);
    if (first) {
      csv.header = cells;
      first = false;
    } else {
      if (cells.size() != csv.header.size())
        throw std::runtime_error("ragged csv row in " + path.string());
      csv.rows.push_back(cells);
    }
  }
  if (first) throw std::runtime_error("empty csv: " + path.string());
  return csv;
}

}  // namespace jt
