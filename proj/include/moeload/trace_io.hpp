#pragma once

#include "moeload/trace.hpp"

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace moeload {

inline constexpr int kTraceFormatVersion = 1;

struct TraceFileHeader {
  int format_version = kTraceFormatVersion;
  std::vector<int> moe_layer_ids;
  Index experts_per_layer = 0;
  std::int64_t tokens_per_iteration = 0;
};

// Sidecar metadata location for a trace file: "run/trace.csv" -> "run/trace.meta.json".
std::filesystem::path metadata_path(const std::filesystem::path& trace_path);

TraceFileHeader read_trace_header(const std::filesystem::path& trace_path);

// Reads a CSV (or, by ".jsonl" extension, JSON-lines) trace plus its sidecar metadata.
LoadTrace read_trace(const std::filesystem::path& path, RowSumMode mode = RowSumMode::kStrict);

// Writes the canonical CSV form and the sidecar metadata; both files are replaced atomically.
void write_trace(const LoadTrace& trace, const std::filesystem::path& path);

std::string format_trace_csv(const LoadTrace& trace);
std::string format_trace_metadata(const LoadTrace& trace);

struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
};

// Shortest round-trippable form limited to 9 significant digits; "-0" prints as "0".
std::string format_number(double value);

std::string format_table(const Table& table);
void write_table(const Table& table, const std::filesystem::path& path);
Table read_table(const std::filesystem::path& path);

// Writes to a sibling temporary file and renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);
std::string read_file(const std::filesystem::path& path);

}  // namespace moeload
