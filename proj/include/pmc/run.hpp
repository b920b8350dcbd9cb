#pragma once

// Command drivers behind the pmc executable. Each takes a validated
// ProblemConfig, writes its artifacts under an output directory, logs
// human-readable progress to the given stream, and returns the process
// exit code: 0 success, 1 rejected input, 2 numerical failure with
// partial results retained on disk.
//
// solve   builds the family over the configured radius grid and writes
//         leaves.csv, coeffs/leaf_<k>.csv and report.json.
// verify  runs the five named checks (folland, u0_residual,
//         expansion_slopes, foliation, uniqueness) and writes report.json;
//         jobs > 1 spreads the checks over worker threads without
//         changing any output byte.
// index   certifies the Brouwer index of the critical point at the
//         chart origin and writes report.json.
//
// The CSV writers are exposed so tests can pin the exact file format.

#include "pmc/config.hpp"
#include "pmc/reduction.hpp"
#include "pmc/sphere.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace pmc {

// Header k,r,tau1..tau<dim>,residual_sup,inner_iters,outer_iters; floats
// as %.17g, one row per leaf in family order.
void write_leaves_csv(std::ostream& out, int dim,
                      const std::vector<FamilyLeaf>& leaves);

// Header l,m,value with one row per coefficient in grid order. On S^1
// the sin(l th) entry carries m = -l and the cos entry m = +l; on S^2
// m runs ascending within each degree block.
void write_coeff_csv(std::ostream& out, const SphereGrid& grid,
                     const std::vector<double>& u);

int cmd_solve(const ProblemConfig& cfg, const std::string& out_dir,
              std::ostream& log);
int cmd_verify(const ProblemConfig& cfg, const std::string& out_dir, int jobs,
               std::ostream& log);
int cmd_index(const ProblemConfig& cfg, const std::string& out_dir,
              std::ostream& log);

} // namespace pmc
