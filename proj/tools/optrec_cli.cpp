// Command-line entry point; all logic lives in the library so tests can
// drive the same code path in-process.
#include <iostream>

#include <CLI11.hpp>

#include "optrec/cli.hpp"

int main(int argc, char** argv) {
  CLI::App app{"worst-case optimal affine recovery maps"};
  app.require_subcommand(1);
  optrec::cli::RunConfig cfg;

  const auto common = [&cfg](CLI::App* cmd) {
    cmd->add_option("--input", cfg.input, "problem document (JSON)")->required();
    cmd->add_option("--output", cfg.output, "output document path")->required();
    cmd->add_option("--tol", cfg.tol, "solver tolerance override");
    return cmd;
  };

  CLI::App* recover = common(app.add_subcommand("recover", "construct the optimal affine map"));
  recover->add_option("--level", cfg.level, "relaxation level (cosine; 0 = auto)");

  CLI::App* predict =
      common(app.add_subcommand("predict", "recover, then apply the map to the observations"));
  predict->add_option("--level", cfg.level, "relaxation level (cosine; 0 = auto)");
  predict->add_option("--grid", cfg.grid, "sweep density for --plot-csv");
  predict->add_option("--plot-csv", cfg.plot_csv, "emit a theta sweep of predictions (cosine)");

  CLI::App* certify =
      common(app.add_subcommand("certify", "two-sided error certificate (cosine)"));
  certify->add_option("--level", cfg.level, "relaxation level (0 = auto)");
  certify->add_option("--grid", cfg.grid, "certification grid size");

  CLI::App* oracle =
      common(app.add_subcommand("oracle", "sample the model set and test the certified bound"));
  oracle->add_option("--level", cfg.level, "relaxation level (cosine; 0 = auto)");
  oracle->add_option("--grid", cfg.grid, "certification grid size (cosine)");
  oracle->add_option("--samples", cfg.samples, "number of sampled functions");
  oracle->add_option("--seed", cfg.seed, "sampler seed");
  oracle->add_option("--plot-csv", cfg.plot_csv, "dump sampled evaluations as CSV");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);  // prints usage / error text
    return code == 0 ? 0 : 2;     // flag misuse reports as a parse failure
  }

  if (recover->parsed()) cfg.command = optrec::cli::Command::recover;
  if (predict->parsed()) cfg.command = optrec::cli::Command::predict;
  if (certify->parsed()) cfg.command = optrec::cli::Command::certify;
  if (oracle->parsed()) cfg.command = optrec::cli::Command::oracle;
  return optrec::cli::run(cfg, std::cerr);
}
