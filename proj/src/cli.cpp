#include "optrec/cli.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "optrec/cosine.hpp"
#include "optrec/io.hpp"
#include "optrec/oracle.hpp"
#include "optrec/rkhs.hpp"

namespace optrec::cli {

namespace {

using nlohmann::json;

/// Carries the spec'd exit status up to run(); not a std::exception on
/// purpose so the generic handlers below cannot swallow it.
struct CliError {
  int status;
  const char* kind;
  std::string message;
};

void write_atomic(const std::string& path, const std::string& content) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw CliError{4, "io", "cannot open '" + tmp + "' for writing"};
    out << content;
    out.flush();
    if (!out) {
      std::remove(tmp.c_str());
      throw CliError{4, "io", "writing '" + tmp + "' failed"};
    }
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) {
    std::remove(tmp.c_str());
    throw CliError{4, "io", "cannot move output into place at '" + path + "'"};
  }
}

conic::SolveOptions solver_options(const RunConfig& cfg) {
  conic::SolveOptions o;
  if (cfg.tol > 0.0) o.feastol = o.abstol = o.reltol = cfg.tol;
  return o;
}

/// recover/predict map construction; reports the level actually used.
AffineRecoveryMap build_map(const RecoveryProblem& prob, const RunConfig& cfg,
                            std::optional<int>& level_used) {
  if (prob.setting == Setting::cosine) {
    const int level = cfg.level > 0 ? cfg.level : cosine::default_level(prob);
    level_used = level;
    return cosine::lower_bound(prob, level, solver_options(cfg)).map;
  }
  return rkhs::solve_recovery(prob, solver_options(cfg));
}

/// Per-node re-solve of the map with the prediction point swept across the
/// domain, applied to the fixed observations.
std::string sweep_csv(const io::ProblemDocument& doc, const RunConfig& cfg) {
  const RecoveryProblem& base = doc.problem;
  if (base.setting != Setting::cosine)
    throw CliError{3, "validation", "the prediction sweep needs the cosine setting"};
  std::ostringstream out;
  out << "theta";
  for (int n = 0; n < base.num_components; ++n) out << ",pred_" << n + 1;
  out << "\n" << std::setprecision(17);
  for (int i = 0; i < cfg.grid; ++i) {
    RecoveryProblem p = base;
    p.points.new_point =
        base.domain[0] + (base.domain[1] - base.domain[0]) * i / (cfg.grid - 1);
    std::optional<int> level;
    const Eigen::VectorXd pred = apply_map(build_map(p, cfg, level), *doc.observations);
    out << p.points.new_point;
    for (int n = 0; n < pred.size(); ++n) out << "," << pred[n];
    out << "\n";
  }
  return out.str();
}

int run_impl(const RunConfig& cfg) {
  if (cfg.input.empty() || cfg.output.empty())
    throw CliError{3, "validation", "input and output paths are required"};
  if (cfg.level < 0) throw CliError{3, "validation", "level must be at least 1 (0 picks it)"};
  if (cfg.grid < 3) throw CliError{3, "validation", "grid size must be at least 3"};
  if (cfg.samples < 1) throw CliError{3, "validation", "sample count must be at least 1"};
  if (!cfg.plot_csv.empty() && cfg.command != Command::predict && cfg.command != Command::oracle)
    throw CliError{3, "validation", "plot output is only emitted by predict and oracle"};

  std::ifstream in(cfg.input);
  if (!in) throw CliError{2, "parse", "cannot open input '" + cfg.input + "'"};
  io::ProblemDocument doc;
  try {
    doc = io::read_problem(in);
  } catch (const std::invalid_argument& e) {
    throw CliError{2, "parse", e.what()};
  }
  const ValidationResult valid = validate_problem(doc.problem);
  if (!valid.ok()) throw CliError{3, "validation", valid.errors.front()};

  switch (cfg.command) {
    case Command::recover: {
      std::optional<int> level;
      const AffineRecoveryMap map = build_map(doc.problem, cfg, level);
      write_atomic(cfg.output, io::map_document(map, level, std::nullopt));
      return 0;
    }
    case Command::predict: {
      if (!doc.observations)
        throw CliError{3, "validation", "predict needs an observations block"};
      if (doc.observations->rows() != doc.problem.points.count() ||
          doc.observations->cols() != doc.problem.num_components)
        throw CliError{3, "validation", "observations must be M x N"};
      std::optional<int> level;
      const AffineRecoveryMap map = build_map(doc.problem, cfg, level);
      const Eigen::VectorXd pred = apply_map(map, *doc.observations);
      if (!cfg.plot_csv.empty()) write_atomic(cfg.plot_csv, sweep_csv(doc, cfg));
      write_atomic(cfg.output, io::map_document(map, level, std::nullopt, pred));
      return 0;
    }
    case Command::certify: {
      if (doc.problem.setting != Setting::cosine)
        throw CliError{3, "validation", "certify needs the cosine setting"};
      const cosine::CertifiedMap cm =
          cosine::certify(doc.problem, cfg.level, cfg.grid, solver_options(cfg));
      write_atomic(cfg.output, io::certificate_document(cm.certificate));
      if (!std::isfinite(cm.certificate.upper))
        throw CliError{5, "certificate",
                       "no atomic certificate at grid size " + std::to_string(cfg.grid) +
                           "; the document records the partial bounds"};
      return 0;
    }
    case Command::oracle: {
      AffineRecoveryMap map;
      double bound = 0.0;
      json prov = json::object();
      if (doc.problem.setting == Setting::cosine) {
        const cosine::CertifiedMap cm =
            cosine::certify(doc.problem, cfg.level, cfg.grid, solver_options(cfg));
        if (!std::isfinite(cm.certificate.upper))
          throw CliError{5, "certificate",
                         "no certified bound to test against at grid size " +
                             std::to_string(cfg.grid)};
        map = cm.map;
        bound = cm.certificate.upper;
        prov["level_r"] = cm.certificate.level_r;
        prov["grid_s"] = cm.certificate.grid_s;
      } else {
        map = rkhs::solve_recovery(doc.problem, solver_options(cfg));
        bound = map.values.maxCoeff();
      }
      const oracle::SampleSet set =
          oracle::sample_model_set(doc.problem, cfg.samples, cfg.seed);
      const double emp = empirical_error(map, oracle::to_point_samples(set.samples));
      if (!cfg.plot_csv.empty()) {
        std::ostringstream dump;
        oracle::write_sample_csv(dump, doc.problem, set);
        write_atomic(cfg.plot_csv, dump.str());
      }
      const json report{{"samples", static_cast<int>(set.samples.size())},
                        {"seed", cfg.seed},
                        {"attempts", set.attempts},
                        {"acceptance_rate", set.acceptance_rate()},
                        {"empirical_error", emp},
                        {"certified_bound", bound},
                        {"within_bound", emp <= bound + 1e-6},
                        {"provenance", prov}};
      write_atomic(cfg.output, report.dump(2) + "\n");
      return 0;
    }
  }
  throw CliError{3, "validation", "unknown command"};
}

}  // namespace

int run(const RunConfig& config, std::ostream& err) {
  try {
    return run_impl(config);
  } catch (const CliError& e) {
    err << io::error_document(e.status, e.kind, e.message);
    return e.status;
  } catch (const std::invalid_argument& e) {
    err << io::error_document(3, "validation", e.what());
    return 3;
  } catch (const std::exception& e) {
    err << io::error_document(4, "solver", e.what());
    return 4;
  }
}

}  // namespace optrec::cli
