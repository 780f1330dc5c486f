#pragma once

#include <cstdint>
#include <iosfwd>
#include <vector>

#include <Eigen/Dense>

#include "optrec/types.hpp"

// Brute-force verification: samples verified model-set members and evaluates
// maps against them. The sampler provides empirical lower evidence for the
// certified bounds; it makes no attempt at uniform coverage or adversarial
// (worst-case-seeking) search.
namespace optrec::oracle {

/// One component of a sampled member, split as it was constructed:
/// coefficients on the model-set basis plus a distance-bounded residual.
struct SampledComponent {
  Eigen::VectorXd span_coeffs;  // length = model-set basis size
  BasisFunction residual;
};

/// A verified model-set member with its evaluations at the problem points.
struct SampledFunction {
  std::vector<SampledComponent> components;  // length N
  ObservationMatrix observations;            // M x N
  Eigen::VectorXd truth;                     // length N, values at the prediction point
};

/// Samples plus the attempt count behind them.
struct SampleSet {
  std::vector<SampledFunction> samples;
  std::int64_t attempts = 0;

  double acceptance_rate() const {
    return attempts > 0 ? static_cast<double>(samples.size()) / static_cast<double>(attempts)
                        : 0.0;
  }
};

/// Rejection sampler over the model set. Per attempt: draws span coefficients
/// and residuals for the leading components, enforces the dependence rows by
/// solving for the trailing components when that square block is invertible
/// (drawing them freely otherwise), and keeps the candidate only when every
/// membership check passes. Deterministic for a fixed seed.
/// Throws std::runtime_error("model set too thin to sample") when fewer than
/// 0.1% of 10^6 attempts verify.
SampleSet sample_model_set(const RecoveryProblem& prob, int count, std::uint64_t seed);

/// Audits one sample against the problem: distance to the span within
/// epsilon (Gram-computed for kernel problems; sup-norm on a 10^4-node check
/// grid with slack 1e-6 for cosine problems), dependence rows satisfied at
/// the problem points to 1e-9, nonnegativity above -1e-9 on the check grid,
/// and stored evaluations consistent with the closed form. Empty = verified.
std::vector<std::string> membership_violations(const RecoveryProblem& prob,
                                               const SampledFunction& sample);

/// Evaluations only, in the shape empirical_error consumes.
std::vector<PointSample> to_point_samples(const std::vector<SampledFunction>& samples);

/// Componentwise reference construction for problems without dependence
/// rows: every component's map solves its own single-component restriction,
/// so cross-component coefficients are exactly zero and the overall value is
/// the maximum of the per-component values.
AffineRecoveryMap independent_reference(const RecoveryProblem& prob);

/// One row per sample: the values at the prediction point, then the
/// observation matrix in row-major order. Header names the problem points.
void write_sample_csv(std::ostream& out, const RecoveryProblem& prob, const SampleSet& set);

}  // namespace optrec::oracle
