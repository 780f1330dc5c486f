#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>

namespace optrec::cli {

enum class Command { recover, predict, certify, oracle };

/// One command-line invocation. level 0 means "pick the module default";
/// grid doubles as the certification grid size (certify, oracle) and the
/// prediction-sweep density (predict --plot-csv).
struct RunConfig {
  Command command = Command::recover;
  std::string input;
  std::string output;
  int level = 0;
  int grid = 101;
  int samples = 10000;
  std::uint64_t seed = 1;
  double tol = 0.0;      // > 0: overrides the solver tolerances
  std::string plot_csv;  // empty: no sweep / sample dump

  // predict: theta sweep of per-node map predictions (cosine only)
  // oracle:  CSV dump of the sampled evaluations
};

/// Executes one command end to end: read and validate the input document,
/// solve, write the output document (write-then-rename, so failures leave no
/// partial output). Returns the process exit status: 0 success, 2 input
/// parse failure, 3 validation failure, 4 solver or io failure, 5 no
/// certificate at the requested grid resolution. Nonzero paths write a
/// structured error report to err. Reruns of one config reproduce output
/// documents byte for byte.
int run(const RunConfig& config, std::ostream& err);

}  // namespace optrec::cli
