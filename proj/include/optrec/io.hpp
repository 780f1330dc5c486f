// JSON document formats for problems, maps and certificates.
//
// Functions are serialized as coefficient lists over declared systems, never
// as code: cosine-setting functions are plain arrays of cosine coefficients,
// kernel-setting functions are {"anchors": [...], "weights": [...]} objects.
#pragma once

#include <iosfwd>
#include <optional>
#include <string>

#include <Eigen/Dense>

#include "optrec/types.hpp"

namespace optrec::io {

/// Problem document plus the optional observation block used by predict.
struct ProblemDocument {
  RecoveryProblem problem;
  std::optional<ObservationMatrix> observations;
};

/// Parses a problem document:
///   setting, N, domain, new_point, old_points,
///   model_sets[] {basis, epsilon, nonneg}, dependence {A, b},
///   kernel {name, params}, observations (optional, M x N rows).
/// `domain` may be omitted (cosine: [0, pi]; rkhs: the kernel's natural
/// domain). Throws std::invalid_argument on syntax or structural problems;
/// semantic validation stays with validate_problem.
ProblemDocument read_problem(std::istream& in);

/// Inverse of read_problem up to formatting.
std::string problem_document(const ProblemDocument& doc);

/// Map document: "coeffs" as [n][m][k] arrays (row-major in document order),
/// "offsets", "values", and a "provenance" block carrying the relaxation
/// level / grid size when the map came from the cosine pipeline. Predictions
/// are attached when given (the predict command).
std::string map_document(const AffineRecoveryMap& map, std::optional<int> level_r,
                         std::optional<int> grid_s,
                         const std::optional<Eigen::VectorXd>& predictions = std::nullopt);

/// Certificate document {lb, ub, ratio, r, s, per_j}; non-finite bounds
/// serialize as the string "inf".
std::string certificate_document(const Certificate& cert);

/// Structured error report written to stderr on nonzero exits.
std::string error_document(int status, const std::string& kind, const std::string& message);

}  // namespace optrec::io
