#pragma once

// Run-record persistence: a small CSV format (one row per checkpoint) and a
// Vega-Lite document for plotting accuracy curves of several runs together.

#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "psh/train.hpp"

namespace psh {

struct ReportError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline constexpr const char* kCsvHeader = "batch,elapsed_s,val_accuracy,loss,mode";

namespace detail {

inline std::string csv_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace detail

inline std::string records_to_csv(const std::vector<RunRecord>& records) {
  std::ostringstream out;
  out << kCsvHeader << "\n";
  for (const auto& r : records) {
    if (r.mode.find(',') != std::string::npos ||
        r.mode.find('\n') != std::string::npos)
      throw ReportError("mode label must not contain ',' or newline");
    out << r.batch << "," << detail::csv_double(r.elapsed_s) << ","
        << detail::csv_double(r.val_accuracy) << ","
        << detail::csv_double(r.loss) << "," << r.mode << "\n";
  }
  return out.str();
}

inline std::vector<RunRecord> records_from_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw ReportError("empty CSV");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kCsvHeader)
    throw ReportError("unexpected CSV header: " + line);
  std::vector<RunRecord> records;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::size_t pos = 0;
    while (cells.size() < 4) {
      const std::size_t comma = line.find(',', pos);
      if (comma == std::string::npos)
        throw ReportError("short CSV row: " + line);
      cells.push_back(line.substr(pos, comma - pos));
      pos = comma + 1;
    }
    cells.push_back(line.substr(pos));  // mode, may not contain commas
    RunRecord r;
    try {
      r.batch = std::stoull(cells[0]);
      r.elapsed_s = std::stod(cells[1]);
      r.val_accuracy = std::stod(cells[2]);
      r.loss = std::stod(cells[3]);
    } catch (const std::exception&) {
      throw ReportError("bad CSV row: " + line);
    }
    r.mode = cells[4];
    records.push_back(std::move(r));
  }
  return records;
}

inline void write_records_csv(const std::string& path,
                              const std::vector<RunRecord>& records) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ReportError("cannot open for writing: " + path);
  out << records_to_csv(records);
  if (!out) throw ReportError("write failed: " + path);
}

inline std::vector<RunRecord> read_records_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ReportError("cannot open: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return records_from_csv(buf.str());
}

// Merge several runs into one table; each run keeps its own mode label, so a
// merged CSV is ready for side-by-side plotting.
inline std::vector<RunRecord> merge_records(
    const std::vector<std::vector<RunRecord>>& runs) {
  std::vector<RunRecord> all;
  for (const auto& run : runs) all.insert(all.end(), run.begin(), run.end());
  return all;
}

// Vega-Lite line chart: accuracy over batches, one colored line per mode.
inline nlohmann::json records_to_vega(const std::vector<RunRecord>& records,
                                      const std::string& title) {
  nlohmann::json values = nlohmann::json::array();
  for (const auto& r : records) {
    values.push_back({{"batch", r.batch},
                      {"elapsed_s", r.elapsed_s},
                      {"val_accuracy", r.val_accuracy},
                      {"loss", r.loss},
                      {"mode", r.mode}});
  }
  return {
      {"$schema", "https://vega.github.io/schema/vega-lite/v5.json"},
      {"title", title},
      {"data", {{"values", values}}},
      {"mark", {{"type", "line"}, {"point", true}}},
      {"encoding",
       {{"x", {{"field", "batch"}, {"type", "quantitative"}}},
        {"y",
         {{"field", "val_accuracy"},
          {"type", "quantitative"},
          {"scale", {{"zero", false}}}}},
        {"color", {{"field", "mode"}, {"type", "nominal"}}}}},
  };
}

inline void write_records_vega(const std::string& path,
                               const std::vector<RunRecord>& records,
                               const std::string& title) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ReportError("cannot open for writing: " + path);
  out << records_to_vega(records, title).dump(2) << "\n";
  if (!out) throw ReportError("write failed: " + path);
}

}  // namespace psh
