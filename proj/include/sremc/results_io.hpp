#pragma once

// Results files: CSV rows under a commented header block carrying the
// schema version, the full materialized config, its hash, the seed and the
// code version.  A results file regenerates bit-identically from its own
// header; readers reject unknown schema versions.

#include <cinttypes>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "sremc/config.hpp"
#include "sremc/schedule.hpp"
#include "sremc/version.hpp"

namespace sremc {

inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline std::string results_header(const RunConfig& cfg, const std::string& kind) {
  std::ostringstream os;
  os << "# sremc-results v" << kResultsSchemaVersion << "\n";
  os << "# kind: " << kind << "\n";
  os << "# code_version: " << kCodeVersion << "\n";
  os << "# seed: " << cfg.seed << "\n";
  char hash[32];
  std::snprintf(hash, sizeof(hash), "0x%016" PRIx64, config_hash(cfg));
  os << "# config_hash: " << hash << "\n";
  os << "# config: " << to_json(cfg).dump() << "\n";
  return os.str();
}

inline void write_sweep_results(const std::string& path, const RunConfig& cfg,
                                const std::vector<SreResult>& results) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open results file for writing: " + path);
  out << results_header(cfg, "sweep");
  out << "lambda,m2_tilde,m2_density,std_error,dlog_q,err_q,dlog_z,err_z,dlog_z2,err_z2\n";
  for (const auto& r : results) {
    out << format_double(r.lambda) << ',' << format_double(r.m2_tilde) << ','
        << format_double(r.m2_density) << ',' << format_double(r.std_error) << ','
        << format_double(r.dlog_q) << ',' << format_double(r.err_q) << ','
        << format_double(r.dlog_z) << ',' << format_double(r.err_z) << ','
        << format_double(r.dlog_z2) << ',' << format_double(r.err_z2) << '\n';
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

inline void write_derivative_results(const std::string& path, const RunConfig& cfg,
                                     const std::vector<DerivativePoint>& points) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open results file for writing: " + path);
  out << results_header(cfg, "derivatives");
  out << "lambda,d1,d1_err,e_q,e_q_err,e_z,e_z_err,e_z2,e_z2_err,"
         "d2,d2_err,c_q,c_q_err,c_z,c_z_err,c_z2,c_z2_err\n";
  for (const auto& p : points) {
    out << format_double(p.lambda) << ',' << format_double(p.first.value) << ','
        << format_double(p.first.std_error);
    for (int i = 0; i < 3; ++i)
      out << ',' << format_double(p.first.parts[static_cast<std::size_t>(i)]) << ','
          << format_double(p.first.part_errors[static_cast<std::size_t>(i)]);
    out << ',' << format_double(p.second.value) << ',' << format_double(p.second.std_error);
    for (int i = 0; i < 3; ++i)
      out << ',' << format_double(p.second.parts[static_cast<std::size_t>(i)]) << ','
          << format_double(p.second.part_errors[static_cast<std::size_t>(i)]);
    out << '\n';
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

struct ResultsFile {
  int schema_version = 0;
  std::string kind;
  std::string code_version;
  std::uint64_t seed = 0;
  std::string config_hash;
  nlohmann::json config;
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;

  double column(std::size_t row, const std::string& name) const {
    for (std::size_t c = 0; c < columns.size(); ++c)
      if (columns[c] == name) return rows[row][c];
    throw std::out_of_range("results file has no column " + name);
  }
};

inline ResultsFile read_results(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open results file: " + path);
  ResultsFile rf;
  std::string line;
  bool have_columns = false;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      const auto colon = line.find(':');
      if (line.rfind("# sremc-results v", 0) == 0) {
        rf.schema_version = std::stoi(line.substr(17));
        if (rf.schema_version != kResultsSchemaVersion)
          throw std::runtime_error("unsupported results schema version in " + path);
      } else if (colon != std::string::npos) {
        const std::string key = line.substr(2, colon - 2);
        const std::string value = line.substr(colon + 2);
        if (key == "kind")
          rf.kind = value;
        else if (key == "code_version")
          rf.code_version = value;
        else if (key == "seed")
          rf.seed = std::stoull(value);
        else if (key == "config_hash")
          rf.config_hash = value;
        else if (key == "config")
          rf.config = nlohmann::json::parse(value);
      }
      continue;
    }
    if (rf.schema_version == 0)
      throw std::runtime_error("missing schema header in " + path);
    std::stringstream ss(line);
    std::string cell;
    if (!have_columns) {
      while (std::getline(ss, cell, ',')) rf.columns.push_back(cell);
      have_columns = true;
      continue;
    }
    std::vector<double> row;
    while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
    if (row.size() != rf.columns.size())
      throw std::runtime_error("ragged results row in " + path);
    rf.rows.push_back(std::move(row));
  }
  if (!have_columns) throw std::runtime_error("results file has no column header: " + path);
  return rf;
}

}  // namespace sremc
