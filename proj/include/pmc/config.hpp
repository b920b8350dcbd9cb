#pragma once

// Problem configuration: JSON text in, a validated ProblemConfig out.
// Validation is strict (unknown keys are errors) and every failure names
// the exact field path it refers to.

#include "pmc/expr.hpp"
#include "pmc/metric.hpp"
#include "pmc/reduction.hpp"

#include <stdexcept>
#include <string>
#include <vector>

namespace pmc {

class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& path, const std::string& msg)
      : std::runtime_error(path + ": " + msg), path_(path) {}
  const std::string& path() const { return path_; }

 private:
  std::string path_;
};

enum class RunMode { automatic, nondegenerate, degenerate };

struct RadiusGrid {
  double min = 0.0;
  double max = 0.0;
  int count = 0;
  bool log_spacing = false;

  std::vector<double> radii() const;
};

struct ProblemConfig {
  int dim = 2;
  MetricChart chart = MetricChart::euclidean(2);
  std::string metric_name;  // euclidean | conformal | diagonal | general
  Expr f;
  double chart_radius = 0.0;
  int L = 0;
  RadiusGrid r_grid;
  RunMode mode = RunMode::automatic;
  ReduceOpts tolerances;  // rho defaults to chart_radius / 8
};

// Parse and validate a configuration from JSON text or a file on disk.
// Throws ConfigError with the offending field path.
ProblemConfig parse_config(const std::string& text);
ProblemConfig load_config(const std::string& path);

} // namespace pmc
