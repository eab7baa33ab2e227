#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>

#include "rdsens/euler.hpp"
#include "rdsens/models.hpp"

namespace rdsens {

enum class Method { ipa, lr, fd };

std::string method_name(Method m);
Method parse_method(const std::string& name);  // throws ConfigError

/// Aggregated Monte Carlo output for one gradient estimate. Per-coordinate
/// variance is the sample variance of the per-trial estimates; the 95%
/// confidence halfwidth is 1.96*sqrt(variance/trials).
struct EstimateReport {
  Method method = Method::ipa;
  Eigen::VectorXd alpha;
  Eigen::RowVectorXd mean;      // 1 x M
  Eigen::RowVectorXd variance;  // 1 x M
  Eigen::RowVectorXd ci95;      // 1 x M
  long trials = 0;
  double delta = 0.0;
  double horizon = 0.0;
  uint64_t seed = 0;
  double seconds = 0.0;
  std::optional<double> epsilon;  // finite-difference bump, when applicable
};

/// Discrete path functional: sum of zeta1 over left endpoints times delta,
/// plus zeta2 at the terminal grid point.
double path_functional(const Trajectory& traj, const Functional& F);

/// Pathwise (IPA) gradient estimate from one trajectory simulated with
/// derivatives:
///   sum_{n<steps} zeta1'(Z_n) Jac_n delta + zeta2'(Z_steps) Jac_steps.
/// Throws ModelError if the trajectory has no derivative blocks.
Eigen::RowVectorXd ipa_trial(const Trajectory& traj, const Functional& F);

/// Likelihood-ratio gradient estimate from one trajectory: the path
/// functional times the score
///   D_m = sum_{n<steps} < sigma^T(Z_n) a^{-1}(Z_n) b_{alpha_m}(Z_n),
///                         W(t_{n+1}) - W(t_n) >.
/// Requires sigma, x0 and R constant in alpha and an elliptic diffusion;
/// throws ModelError otherwise, SingularDiffusion if a(Z_n) degenerates.
Eigen::RowVectorXd lr_trial(const Trajectory& traj, const Functional& F,
                            const ParamModel& model,
                            const Eigen::VectorXd& alpha);

/// Scalar payoff of one simulated path as a function of (alpha, stream).
using PayoffFn =
    std::function<double(const Eigen::VectorXd&, GaussianStream)>;

/// Finite-difference sensitivity in coordinate m with common random
/// numbers: both payoff evaluations replay the same stream.
/// Forward difference by default; central difference halves the bump bias
/// at the cost of a second perturbed run.
double fd_trial(const PayoffFn& payoff, const Eigen::VectorXd& alpha, int m,
                double epsilon, const GaussianStream& stream,
                bool central = false);

struct MonteCarloOptions {
  long trials = 0;
  uint64_t master_seed = 0;
  int threads = 1;              // trial-level parallelism
  double epsilon = 1e-4;        // FD only
  bool fd_central = false;      // FD only
};

/// Runs `trials` independent trials of the requested estimator and
/// aggregates mean/variance/CI per parameter coordinate. Trial i draws from
/// the stream keyed by (master_seed, i), and the reduction runs in trial
/// order, so reports are identical for any thread count.
/// Throws with the trial index attached if a trial fails; trials < 2 is a
/// ConfigError.
EstimateReport monte_carlo(Method method, const ParamModel& model,
                           const Eigen::VectorXd& alpha, const Functional& F,
                           const EulerConfig& config,
                           const MonteCarloOptions& options);

/// Finite-difference Monte Carlo over an externally supplied payoff
/// simulator (e.g. the unconstrained SDE path instead of the reflected one).
EstimateReport monte_carlo_fd(const PayoffFn& payoff, int param_dim,
                              const Eigen::VectorXd& alpha,
                              const EulerConfig& config,
                              const MonteCarloOptions& options);

/// Payoff of the reflected Euler path under F (the simulator behind the
/// FD branch of monte_carlo).
PayoffFn reflected_payoff(const ParamModel& model, const Functional& F,
                          const EulerConfig& config);

}  // namespace rdsens
