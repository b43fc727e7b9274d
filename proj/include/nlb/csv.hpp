// csv.hpp
//
// Deterministic CSV emission: fixed %.17g formatting, a comment line carrying
// the config hash and tool version, and atomic writes (temp file + rename).

#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace nlb {

inline constexpr const char* kToolVersion = "0.1.0";

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

/// Accumulates rows and writes the whole file atomically on close.
class CsvWriter {
 public:
  CsvWriter(std::filesystem::path path, std::vector<std::string> columns,
            std::uint64_t config_hash)
      : path_(std::move(path)) {
    char hash[32];
    std::snprintf(hash, sizeof(hash), "%016llx", (unsigned long long)config_hash);
    body_ += "# config_hash=";
    body_ += hash;
    body_ += " version=";
    body_ += kToolVersion;
    body_ += "\n";
    for (std::size_t i = 0; i < columns.size(); ++i) {
      if (i) body_ += ",";
      body_ += columns[i];
    }
    body_ += "\n";
    ncols_ = columns.size();
  }

  void cell(const std::string& s) {
    if (col_) body_ += ",";
    body_ += s;
    ++col_;
  }
  void cell(double v) { cell(format_double(v)); }
  void cell(std::size_t v) { cell(std::to_string(v)); }
  void cell(int v) { cell(std::to_string(v)); }

  void end_row() {
    if (col_ != ncols_) throw std::logic_error("CsvWriter: column count mismatch");
    body_ += "\n";
    col_ = 0;
  }

  /// Atomic write: the target never holds a partial file.
  void close() {
    if (closed_) return;
    std::filesystem::path tmp = path_;
    tmp += ".tmp";
    if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path());
    {
      std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
      if (!out) throw std::runtime_error("CsvWriter: cannot open " + tmp.string());
      out << body_;
    }
    std::filesystem::rename(tmp, path_);
    closed_ = true;
  }

  ~CsvWriter() {
    try {
      close();
    } catch (...) {
    }
  }

 private:
  std::filesystem::path path_;
  std::string body_;
  std::size_t ncols_ = 0;
  std::size_t col_ = 0;
  bool closed_ = false;
};

}  // namespace nlb
