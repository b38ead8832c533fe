#include "moeload/trace_io.hpp"

#include "moeload/error.hpp"

#include <json.hpp>

#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <unistd.h>

namespace moeload {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(',', start);
    if (pos == std::string_view::npos) {
      fields.push_back(line.substr(start));
      return fields;
    }
    fields.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

template <typename Int>
Int parse_int(std::string_view text, std::size_t line_no) {
  Int value{};
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end || text.empty()) {
    fail(ErrorCode::kParseError, "line " + std::to_string(line_no) + ": expected integer, got '" +
                                     std::string(text) + "'");
  }
  return value;
}

double parse_double(std::string_view text, std::size_t line_no) {
  double value{};
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end || text.empty()) {
    fail(ErrorCode::kParseError, "line " + std::to_string(line_no) + ": expected number, got '" +
                                     std::string(text) + "'");
  }
  return value;
}

std::string_view strip_cr(std::string_view line) {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  return line;
}

struct RawRow {
  std::int64_t iteration;
  int layer;
  std::vector<std::int64_t> counts;
  std::size_t line_no;
};

// Groups rows by iteration, checks contiguity and per-iteration layer coverage, then builds
// the validated trace. Nothing escapes unless every check passes.
LoadTrace assemble(const TraceFileHeader& header, const std::vector<RawRow>& rows,
                   RowSumMode mode) {
  const auto m = static_cast<Index>(header.moe_layer_ids.size());
  const Index e = header.experts_per_layer;
  std::map<int, Index> layer_pos;
  for (Index l = 0; l < m; ++l) layer_pos[header.moe_layer_ids[static_cast<std::size_t>(l)]] = l;

  if (rows.size() % static_cast<std::size_t>(m) != 0) {
    fail(ErrorCode::kValidationError, "row count " + std::to_string(rows.size()) +
                                          " is not a multiple of the layer count");
  }
  const Index n = static_cast<Index>(rows.size()) / m;
  const std::int64_t first = rows.empty() ? 0 : rows.front().iteration;
  CountMatrix counts(n * m, e);
  std::vector<char> seen(static_cast<std::size_t>(n * m), 0);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& row = rows[i];
    const std::int64_t expected = first + static_cast<std::int64_t>(i / static_cast<std::size_t>(m));
    if (row.iteration != expected) {
      fail(ErrorCode::kNonContiguousIterations, "line " + std::to_string(row.line_no) +
                                                    ": iteration " + std::to_string(row.iteration) +
                                                    ", expected " + std::to_string(expected));
    }
    const auto it = layer_pos.find(row.layer);
    if (it == layer_pos.end()) {
      fail(ErrorCode::kValidationError, "line " + std::to_string(row.line_no) + ": layer " +
                                            std::to_string(row.layer) + " not in metadata");
    }
    if (static_cast<Index>(row.counts.size()) != e) {
      fail(ErrorCode::kParseError, "line " + std::to_string(row.line_no) + ": expected " +
                                       std::to_string(e) + " counts");
    }
    const Index t = static_cast<Index>(row.iteration - first);
    const Index r = t * m + it->second;
    if (seen[static_cast<std::size_t>(r)]) {
      fail(ErrorCode::kValidationError, "line " + std::to_string(row.line_no) +
                                            ": duplicate layer " + std::to_string(row.layer));
    }
    seen[static_cast<std::size_t>(r)] = 1;
    for (Index j = 0; j < e; ++j) counts(r, j) = row.counts[static_cast<std::size_t>(j)];
  }
  return LoadTrace(header.moe_layer_ids, e, header.tokens_per_iteration, std::move(counts), mode,
                   first);
}

std::vector<RawRow> read_csv_rows(const std::string& text, Index experts) {
  std::vector<RawRow> rows;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(in, line)) fail(ErrorCode::kParseError, "line 1: missing header");
  ++line_no;
  const auto header = split_commas(strip_cr(line));
  if (static_cast<Index>(header.size()) != experts + 2 || header[0] != "iteration" ||
      header[1] != "layer") {
    fail(ErrorCode::kParseError, "line 1: header must be iteration,layer,expert_0..expert_" +
                                     std::to_string(experts - 1));
  }
  for (Index j = 0; j < experts; ++j) {
    if (header[static_cast<std::size_t>(j + 2)] != "expert_" + std::to_string(j)) {
      fail(ErrorCode::kParseError, "line 1: unexpected column '" +
                                       std::string(header[static_cast<std::size_t>(j + 2)]) + "'");
    }
  }
  while (std::getline(in, line)) {
    ++line_no;
    const auto view = strip_cr(line);
    if (view.empty()) continue;
    const auto fields = split_commas(view);
    if (static_cast<Index>(fields.size()) != experts + 2) {
      fail(ErrorCode::kParseError, "line " + std::to_string(line_no) + ": expected " +
                                       std::to_string(experts + 2) + " fields, got " +
                                       std::to_string(fields.size()));
    }
    RawRow row{parse_int<std::int64_t>(fields[0], line_no), parse_int<int>(fields[1], line_no), {},
               line_no};
    row.counts.reserve(static_cast<std::size_t>(experts));
    for (Index j = 0; j < experts; ++j) {
      row.counts.push_back(parse_int<std::int64_t>(fields[static_cast<std::size_t>(j + 2)], line_no));
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

// Each line is {"iteration":..,"layer":..,"counts":[..]} or uses expert_<j> keys like the CSV.
std::vector<RawRow> read_jsonl_rows(const std::string& text, Index experts) {
  std::vector<RawRow> rows;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (strip_cr(line).empty()) continue;
    try {
      const auto obj = json::parse(strip_cr(line));
      RawRow row{obj.at("iteration").get<std::int64_t>(), obj.at("layer").get<int>(), {}, line_no};
      if (obj.contains("counts")) {
        row.counts = obj.at("counts").get<std::vector<std::int64_t>>();
      } else {
        for (Index j = 0; j < experts; ++j) {
          row.counts.push_back(obj.at("expert_" + std::to_string(j)).get<std::int64_t>());
        }
      }
      rows.push_back(std::move(row));
    } catch (const json::exception& ex) {
      fail(ErrorCode::kParseError, "line " + std::to_string(line_no) + ": " + ex.what());
    }
  }
  return rows;
}

}  // namespace

fs::path metadata_path(const fs::path& trace_path) {
  fs::path meta = trace_path;
  meta.replace_extension(".meta.json");
  return meta;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kIoError, "cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file_atomic(const fs::path& path, std::string_view content) {
  fs::path tmp = path;
  tmp += ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorCode::kIoError, "cannot write " + tmp.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) fail(ErrorCode::kIoError, "write failed for " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp, ec);
    fail(ErrorCode::kIoError, "cannot rename onto " + path.string());
  }
}

TraceFileHeader read_trace_header(const fs::path& trace_path) {
  const auto meta_file = metadata_path(trace_path);
  TraceFileHeader header;
  try {
    const auto meta = json::parse(read_file(meta_file));
    header.format_version = meta.at("format_version").get<int>();
    header.moe_layer_ids = meta.at("moe_layer_ids").get<std::vector<int>>();
    header.experts_per_layer = meta.at("experts_per_layer").get<Index>();
    header.tokens_per_iteration = meta.at("tokens_per_iteration").get<std::int64_t>();
  } catch (const json::exception& ex) {
    fail(ErrorCode::kParseError, meta_file.string() + ": " + ex.what());
  }
  if (header.format_version != kTraceFormatVersion) {
    fail(ErrorCode::kValidationError, "unsupported format_version " +
                                          std::to_string(header.format_version));
  }
  if (header.experts_per_layer <= 0 || header.moe_layer_ids.empty()) {
    fail(ErrorCode::kValidationError, meta_file.string() + ": empty layer list or expert count");
  }
  return header;
}

LoadTrace read_trace(const fs::path& path, RowSumMode mode) {
  const auto header = read_trace_header(path);
  const auto text = read_file(path);
  const auto rows = path.extension() == ".jsonl" ? read_jsonl_rows(text, header.experts_per_layer)
                                                 : read_csv_rows(text, header.experts_per_layer);
  return assemble(header, rows, mode);
}

std::string format_trace_csv(const LoadTrace& trace) {
  std::string out = "iteration,layer";
  for (Index j = 0; j < trace.experts_per_layer(); ++j) out += ",expert_" + std::to_string(j);
  out += '\n';
  char buf[32];
  for (Index t = 0; t < trace.num_iterations(); ++t) {
    const auto iteration = std::to_string(trace.first_iteration() + t);
    for (Index l = 0; l < trace.num_layers(); ++l) {
      out += iteration;
      out += ',';
      out += std::to_string(trace.layer_ids()[static_cast<std::size_t>(l)]);
      for (Index j = 0; j < trace.experts_per_layer(); ++j) {
        const auto res = std::to_chars(buf, buf + sizeof(buf), trace.count(t, l, j));
        out += ',';
        out.append(buf, res.ptr);
      }
      out += '\n';
    }
  }
  return out;
}

std::string format_trace_metadata(const LoadTrace& trace) {
  nlohmann::ordered_json meta;
  meta["format_version"] = kTraceFormatVersion;
  meta["moe_layer_ids"] = trace.layer_ids();
  meta["experts_per_layer"] = trace.experts_per_layer();
  meta["tokens_per_iteration"] = trace.tokens_per_iteration();
  return meta.dump() + "\n";
}

void write_trace(const LoadTrace& trace, const fs::path& path) {
  write_file_atomic(metadata_path(path), format_trace_metadata(trace));
  write_file_atomic(path, format_trace_csv(trace));
}

std::string format_number(double value) {
  if (value == 0.0) return "0";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), value, std::chars_format::general, 9);
  return std::string(buf, res.ptr);
}

std::string format_table(const Table& table) {
  if (table.columns.empty()) fail(ErrorCode::kInvalidArgument, "table has no columns");
  std::string out;
  for (std::size_t c = 0; c < table.columns.size(); ++c) {
    if (c) out += ',';
    out += table.columns[c];
  }
  out += '\n';
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    if (row.size() != table.columns.size()) {
      fail(ErrorCode::kInvalidArgument, "row " + std::to_string(r) + " has " +
                                            std::to_string(row.size()) + " values, expected " +
                                            std::to_string(table.columns.size()));
    }
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (c) out += ',';
      out += format_number(row[c]);
    }
    out += '\n';
  }
  return out;
}

void write_table(const Table& table, const fs::path& path) {
  write_file_atomic(path, format_table(table));
}

Table read_table(const fs::path& path) {
  const auto text = read_file(path);
  std::istringstream in(text);
  std::string line;
  Table table;
  if (!std::getline(in, line)) fail(ErrorCode::kParseError, path.string() + ": empty table");
  for (auto col : split_commas(strip_cr(line))) table.columns.emplace_back(col);
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    const auto view = strip_cr(line);
    if (view.empty()) continue;
    const auto fields = split_commas(view);
    if (fields.size() != table.columns.size()) {
      fail(ErrorCode::kParseError, path.string() + " line " + std::to_string(line_no) +
                                       ": wrong field count");
    }
    std::vector<double> row;
    row.reserve(fields.size());
    for (auto f : fields) row.push_back(parse_double(f, line_no));
    table.rows.push_back(std::move(row));
  }
  return table;
}

}  // namespace moeload
