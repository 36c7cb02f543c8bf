#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "driftbench/diagnostics.hpp"
#include "driftbench/harness/experiments.hpp"

namespace driftbench::harness {

class ExportError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace internal {

inline std::string format_number(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.15g", v);
  return buf;
}

inline void write_file(const std::filesystem::path& path, const std::string& text) {
  std::error_code ec;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ExportError("cannot open '" + path.string() + "' for writing");
  out << text;
  out.flush();
  if (!out) throw ExportError("write to '" + path.string() + "' failed");
}

}  // namespace internal

inline std::string csv_text(const AggregateResult& r) {
  std::string s = "t,mean_relative_regret,std_relative_regret,n_runs\n";
  for (std::size_t t = 0; t < r.mean.size(); ++t) {
    s += std::to_string(t + 1) + ',' + internal::format_number(r.mean[t]) + ',' +
         internal::format_number(r.std[t]) + ',' + std::to_string(r.n_runs) + '\n';
  }
  return s;
}

inline std::string summary_text(const AggregateResult& r) {
  std::ostringstream os;
  os << describe(r.config);
  os << "n_runs=" << r.n_runs << '\n'
     << "failures=" << r.failures << '\n'
     << "retries=" << r.retries << '\n'
     << "oracle_nonconverged=" << r.oracle_nonconverged << '\n'
     << "final_mean_relative_regret="
     << (r.mean.empty() ? std::string("nan") : internal::format_number(r.mean.back())) << '\n'
     << "wall_seconds=" << internal::format_number(r.wall_seconds) << '\n';
  for (const auto& note : r.notes) os << "note: " << note << '\n';
  return os.str();
}

inline void export_csv(const AggregateResult& r, const std::filesystem::path& path) {
  internal::write_file(path, csv_text(r));
}

inline void export_summary(const AggregateResult& r, const std::filesystem::path& path) {
  internal::write_file(path, summary_text(r));
}

inline std::string reports_csv_text(const std::vector<AssumptionReport>& reports) {
  std::string s = "id,samples,skipped,worst_residual,tolerance,pass\n";
  for (const auto& r : reports) {
    s += r.id + ',' + std::to_string(r.samples) + ',' + std::to_string(r.skipped) + ',' +
         internal::format_number(r.worst_residual) + ',' + internal::format_number(r.tolerance) +
         ',' + (r.pass ? "1" : "0") + '\n';
  }
  return s;
}

inline std::string reports_summary_text(const std::vector<AssumptionReport>& reports) {
  std::ostringstream os;
  for (const auto& r : reports) {
    os << (r.pass ? "PASS " : "FAIL ") << r.id << "  samples=" << r.samples
       << " skipped=" << r.skipped << " worst_residual=" << internal::format_number(r.worst_residual)
       << " tolerance=" << internal::format_number(r.tolerance);
    if (!r.pass && !r.witness.empty()) {
      os << " witness=(";
      for (std::size_t i = 0; i < r.witness.size(); ++i) {
        os << (i ? ", " : "") << internal::format_number(r.witness[i]);
      }
      os << ')';
    }
    os << '\n';
  }
  return os.str();
}

inline void export_reports(const std::vector<AssumptionReport>& reports,
                           const std::filesystem::path& dir) {
  internal::write_file(dir / "diagnostics.csv", reports_csv_text(reports));
  internal::write_file(dir / "diagnostics.txt", reports_summary_text(reports));
}

}  // namespace driftbench::harness
