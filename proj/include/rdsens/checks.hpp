#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "rdsens/geometry.hpp"
#include "rdsens/models.hpp"

namespace rdsens::checks {

/// Outcome of one named invariant check.
struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

// ---------------------------------------------------------------------------
// Independent oracles. These deliberately avoid the library's projection
// code path so they can arbitrate it.
// ---------------------------------------------------------------------------

/// Constrained projection by exhaustive enumeration of all 2^N face
/// subsets: solve each active linear system and keep the feasible solution.
/// Returns (z, xi); throws NoFeasibleProjection if nothing is feasible.
std::pair<Eigen::VectorXd, Eigen::VectorXd> brute_force_project(
    const Polyhedron& P, const Eigen::MatrixXd& R, const Eigen::VectorXd& x);

/// Isotonic regression of x under descending order (pool adjacent
/// violators, unit weights): the Euclidean projection onto
/// { z : z^1 >= ... >= z^J }.
Eigen::VectorXd pava_descending(const Eigen::VectorXd& x);

/// Central finite-difference column: (f(v + h e_m) - f(v - h e_m)) / (2h).
Eigen::VectorXd central_difference(
    const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& f,
    const Eigen::VectorXd& v, int m, double h);

// ---------------------------------------------------------------------------
// Randomized well-posed test instances.
// ---------------------------------------------------------------------------

/// A domain/reflection pair for which the complementarity problem is well
/// posed for every right-hand side (the normal-times-direction matrix is a
/// P-matrix by construction).
struct RandomInstance {
  Polyhedron domain;
  Eigen::MatrixXd R;
};

/// Draws from a pool of instance families: oblique orthants, wedges with
/// orthonormal normals, normally reflected random polyhedra, descending
/// chambers, and the fixed oblique plane fixture.
RandomInstance random_instance(std::mt19937_64& rng, int max_faces = 6);

/// Sample a point near the instance's domain, inside or outside.
Eigen::VectorXd random_probe_point(const Polyhedron& P, std::mt19937_64& rng,
                                   double radius = 2.0);

// ---------------------------------------------------------------------------
// Invariant suites (used by unit tests and the validate command).
// ---------------------------------------------------------------------------

std::vector<CheckResult> geometry_checks(uint64_t seed);
std::vector<CheckResult> model_checks(uint64_t seed);
std::vector<CheckResult> euler_checks(uint64_t seed);
std::vector<CheckResult> reference_checks(uint64_t seed);

/// Structural checks for one loaded model (polyhedron and reflection
/// invariants, Jacobian consistency against finite differences).
std::vector<CheckResult> loaded_model_checks(const ParamModel& model,
                                             const Functional& functional,
                                             const Eigen::VectorXd& alpha,
                                             uint64_t seed);

/// All built-in suites.
std::vector<CheckResult> run_all_checks(uint64_t seed);

/// Verifies supplied Jacobians of a model against central finite
/// differences at `samples` random (alpha, x) pairs near alpha0.
/// Mixed absolute/relative tolerance: |fd - jac| <= tol * (1 + |jac|).
std::optional<std::string> jacobian_consistency(const ParamModel& model,
                                                const Eigen::VectorXd& alpha0,
                                                int samples, uint64_t seed,
                                                double tol = 1e-5);

/// Same for a functional's gradients at interior points of the domain.
std::optional<std::string> functional_consistency(const Functional& F,
                                                  const Polyhedron& domain,
                                                  int samples, uint64_t seed,
                                                  double tol = 1e-5);

}  // namespace rdsens::checks
