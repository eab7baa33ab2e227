#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <iosfwd>
#include <utility>
#include <vector>

#include "rdsens/models.hpp"
#include "rdsens/rng.hpp"

namespace rdsens {

/// Uniform time grid t_n = n*delta, n = 0..steps; the horizon is derived
/// from (delta, steps) so steps*delta = t holds exactly by construction.
struct EulerConfig {
  double delta = 0.0;
  long steps = 0;

  EulerConfig() = default;
  /// Throws ConfigError unless delta > 0 and steps >= 1.
  EulerConfig(double delta_, long steps_);

  double horizon() const { return static_cast<double>(steps) * delta; }

  /// Throws ConfigError unless t/delta is an integer within 1e-9 relative
  /// tolerance.
  static EulerConfig from_horizon(double delta, double t);
};

/// Discrete path of the reflected state Z, cumulative constraining
/// multipliers L, derivative state (one J x M block per grid point when
/// simulated with derivatives), Brownian increments, and the active set
/// applied at each derivative projection. Grid point n lives in column n.
struct Trajectory {
  double delta = 0.0;
  int state_dim = 0, noise_dim = 0, param_dim = 0;

  Eigen::MatrixXd states;        // J x (steps+1)
  Eigen::MatrixXd multipliers;   // N x (steps+1), cumulative L_n
  Eigen::MatrixXd derivatives;   // J x (steps+1)*M, block n at column n*M
  Eigen::MatrixXd increments;    // K x steps, column n-1 holds W(t_n)-W(t_{n-1})
  std::vector<uint32_t> active_masks;  // per grid point, faces used for the
                                       // derivative projection at that point

  long steps() const { return states.cols() - 1; }
  double time(long n) const { return static_cast<double>(n) * delta; }
  bool has_derivative() const { return derivatives.size() > 0; }

  Eigen::VectorXd state(long n) const { return states.col(n); }
  /// J x M derivative block at grid point n.
  Eigen::MatrixXd derivative(long n) const {
    return derivatives.middleCols(n * param_dim, param_dim);
  }
  ActiveSet active(long n) const { return from_mask(active_masks[n]); }
};

/// One step of the reflected Euler recursion:
///   Xi = Z_prev + b(alpha, Z_prev)*delta + sigma(alpha, Z_prev)*dW,
///   (Z_next, L_inc) = constrained projection of Xi.
/// Returns (Z_next, L_inc).
std::pair<Eigen::VectorXd, Eigen::VectorXd> step_reflected(
    const ParamModel& model, const Eigen::VectorXd& alpha,
    const Eigen::VectorXd& z_prev, double delta, const Eigen::VectorXd& dW);

/// One step of the derivative recursion: accumulate the linearized drift,
/// dispersion and reflection terms into
///   X = J_prev + b_alpha*delta + b_x*J_prev*delta + sigma_alpha*dW
///       + [sigma_x . J_prev]*dW + R'(alpha) applied to L_inc,
/// then apply the derivative projection for the faces active at Z_next.
Eigen::MatrixXd step_derivative(const ParamModel& model,
                                const Eigen::VectorXd& alpha,
                                const Eigen::VectorXd& z_prev,
                                const Eigen::MatrixXd& j_prev, double delta,
                                const Eigen::VectorXd& dW,
                                const Eigen::VectorXd& l_inc,
                                const ActiveSet& z_next_active);

/// Reusable simulation engine for one (model, config) pair; owns all
/// per-step workspaces and caches the per-alpha reflection data across
/// runs. One Simulator per thread.
class Simulator {
 public:
  Simulator(const ParamModel& model, EulerConfig config, bool with_derivative);

  /// Runs the recursion from x0(alpha) and overwrites `out`.
  /// Errors from a step are rethrown with the step index attached.
  void run(const Eigen::VectorXd& alpha, NoiseSource& noise,
           Trajectory& out) const;

  Trajectory run(const Eigen::VectorXd& alpha, NoiseSource& noise) const;

  const EulerConfig& config() const { return config_; }

 private:
  void ensure_alpha(const Eigen::VectorXd& alpha) const;

  const ParamModel& model_;
  EulerConfig config_;
  bool with_derivative_;

  // reflection data for the most recent alpha
  mutable Eigen::VectorXd cached_alpha_;
  mutable Eigen::MatrixXd reflection_;
  mutable std::optional<Projector> projector_;
  mutable std::optional<DerivativeProjectionCache> l_cache_;
  mutable std::vector<Eigen::MatrixXd> r_jac_;
  mutable std::vector<bool> r_jac_zero_;

  // per-step scratch
  mutable Eigen::VectorXd dw_, bval_, xi_state_, z_, znext_, mult_, slack_,
      sigdir_;
  mutable Eigen::MatrixXd sigval_;
  mutable Eigen::MatrixXd jcur_, jnext_, xmat_, b_alpha_, b_x_;
  mutable std::vector<Eigen::MatrixXd> sigma_alpha_, sigma_x_;
};

/// Full Euler simulation of (Z, L) and, when requested, the derivative
/// process, driven by the given noise source.
Trajectory simulate(const ParamModel& model, const Eigen::VectorXd& alpha,
                    const EulerConfig& config, NoiseSource& noise,
                    bool with_derivative);

/// Overload drawing N(0, delta*I) increments from `stream`.
Trajectory simulate(const ParamModel& model, const Eigen::VectorXd& alpha,
                    const EulerConfig& config, GaussianStream stream,
                    bool with_derivative);

/// Debug dump, one row per grid point:
/// n,t,Z1..ZJ,L1..LN[,J1_1..JJ_M] (derivative block row-major: J1_1..J1_M,
/// then J2_1.., only when present).
void write_trajectory_csv(const Trajectory& traj, std::ostream& os);

}  // namespace rdsens
