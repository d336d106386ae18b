#pragma once

#include "cnf/config.hpp"
#include "cnf/csv.hpp"
#include "cnf/demos.hpp"

#include <string>
#include <vector>

namespace cnf::detail {

/// Collects the files a demo writes under one output directory.
class OutputSink {
 public:
  explicit OutputSink(std::string dir) : dir_(std::move(dir)) {}

  bool enabled() const { return !dir_.empty(); }
  void table(const std::string& name, const CsvTable& t);
  void text(const std::string& name, const std::string& body);
  void metrics(const std::string& name, const Metrics& m);
  const std::vector<std::string>& files() const { return files_; }

 private:
  std::string dir_;
  std::vector<std::string> files_;
};

/// Validates against the demo's schema and returns [run] seed.
std::uint64_t prepare(const RunConfig& cfg, const std::string& demo);

/// Requires a value in [lo, hi]; otherwise ConfigError naming the key.
double bounded(const RunConfig& cfg, const std::string& section, const std::string& key, double fallback, double lo,
               double hi);
long bounded_int(const RunConfig& cfg, const std::string& section, const std::string& key, long fallback, long lo,
                 long hi);

/// Polylines as CSV rows (line, x, y).
CsvTable polyline_table(const std::vector<Polyline>& lines);

}  // namespace cnf::detail
