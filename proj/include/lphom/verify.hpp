#pragma once

// Oracle and invariant checks with pass/fail reports, plus the desk-scale
// acceptance runs (criteria 1-9). Reports are ordered by check id.

#include <cstdint>
#include <string>
#include <vector>

#include "lphom/fem_macro.hpp"

namespace lph {

enum class CheckStatus { Pass, Fail, Inconclusive };
std::string to_string(CheckStatus s);

/// Exact: an identity of the discrete algorithm, limited only by roundoff.
/// Discrete: depends on the mesh or the iterative solver tolerance.
enum class CheckKind { Exact, Discrete };
std::string to_string(CheckKind k);

struct CheckReport {
  std::string id;
  int criterion = 0;  // acceptance criterion covered, 0 for none
  CheckKind kind = CheckKind::Exact;
  CheckStatus status = CheckStatus::Fail;
  double measured = 0;
  double tolerance = 0;
  std::string relation = "<=";  // measured <relation> tolerance passes
  double runtime = 0;
  std::string reference;  // how the reference value is obtained
  std::string detail;
};

/// Sets the status from measured, tolerance and relation ("<=", "<", ">=", ">").
void grade(CheckReport& r);
bool all_passed(const std::vector<CheckReport>& reports);

struct LaminateOracleConfig {
  std::vector<double> lambda{10, 1}, mu{10, 1};
  double fraction = 0.5;  // of the stiff phase
  std::vector<int> resolutions{16, 32, 64};
  double tolerance = 1e-3;     // relative error of C1111 at the finest mesh
  double ratio_limit = 0.6;    // error ratio per doubling
  double floor = 1e-9;         // errors below this count as exact
  int jobs = 1;
};

/// Equal phases, C1111 against the closed form, and the error decay over the
/// resolution ladder.
std::vector<CheckReport> run_laminate_oracle(const LaminateOracleConfig& cfg);

struct InvariantOptions {
  std::uint64_t seed = 20240611;
  double tolerance = 0;           // > 0 replaces every per-check tolerance
  double major_perturbation = 0;  // breaks the major symmetry of the probe tensor
  int resolution = 16;
  int jobs = 1;
};

/// Composition law, symmetry preservation, coercivity inheritance, skew-strain
/// zero correctors, zero-mean correctors, K-orthogonal zero residual, fast
/// path vs direct, material uniformity and constant-law residual irrelevance.
std::vector<CheckReport> run_invariant_suite(const InvariantOptions& opts = {});

struct ConvergenceAcceptanceConfig {
  // stiff phase (lambda, mu) on y1 < 1/2, soft phase (1, 1) on the other half
  double stiff_lambda = 2, stiff_mu = 2;
  int cell_resolution = 16;
  Point theta_gradient{0.5, 0.5, 0};  // theta(x) = a . x + b
  double theta_offset = 0.1;
  std::vector<double> eps{1.0 / 8, 1.0 / 16, 1.0 / 32};
  double r = 0.6;
  Point body_force{1, 1, 0};
  int elements_per_period = 8;
  double ratio_limit = 0.5;
  double h1_band_limit = 1.5;
  double budget_seconds = 900;
  int jobs = 1;
};

/// Rotation field H = K = Q(theta(x)) and the H = K = 1 ladder: strictly
/// decreasing L2 errors, final/initial ratio and H1 band. Budget overruns are
/// inconclusive. The studies are returned through `studies` when given.
std::vector<CheckReport> run_convergence_acceptance(const ConvergenceAcceptanceConfig& cfg,
                                                    std::vector<ConvergenceReport>* studies = nullptr);

struct AcceptanceOptions {
  std::uint64_t seed = 20240611;
  int jobs = 1;
  bool include_convergence = true;
  ConvergenceAcceptanceConfig convergence;
};

/// Checks for criteria 1-9, ordered by criterion and id.
std::vector<CheckReport> run_acceptance_suite(const AcceptanceOptions& opts = {});

/// id, criterion, kind, status, measured, tolerance, relation, reference; runtime-free.
std::string reports_csv(const std::vector<CheckReport>& reports);
std::string reports_junit(const std::vector<CheckReport>& reports, const std::string& suite);
/// criterion, check ids, overall status.
std::string traceability_csv(const std::vector<CheckReport>& reports);

}  // namespace lph
