#pragma once

#include <Eigen/Dense>
#include <utility>
#include <vector>

#include "rdsens/euler.hpp"
#include "rdsens/geometry.hpp"
#include "rdsens/models.hpp"

namespace rdsens::reference {

/// Four-decimal ground-truth values for the first partial derivatives of
/// E[Z(1)] of the 1-D reflected Brownian motion at alpha = (1, -1, 1),
/// with respect to (initial point, drift, dispersion).
struct Rbm1dTruth {
  static constexpr double dTheta_dx = 0.3319;
  static constexpr double dTheta_db = 0.4351;
  static constexpr double dTheta_dsigma = 0.6681;
};

/// Ordered product of derivative projection matrices applied to `initial`:
/// the closed form of the derivative state after visiting the given active
/// sets with all coefficient derivatives zero. An empty sequence returns
/// `initial` unchanged.
Eigen::VectorXd dp_matrix_oracle(const Eigen::VectorXd& initial,
                                 const std::vector<ActiveSet>& active_sequence,
                                 const Polyhedron& P, const Eigen::MatrixXd& R);

/// Coarse and fine Euler paths over [0, horizon] coupled through one
/// Brownian motion: the coarse increments are sums of the fine ones over
/// each coarse interval. delta_coarse/delta_fine must be a power of two.
std::pair<Trajectory, Trajectory> coupled_reference(
    const ParamModel& model, const Eigen::VectorXd& alpha, double horizon,
    double delta_coarse, double delta_fine, GaussianStream stream);

/// sup_t |coarse(t) - fine(t)| over the fine grid, treating both paths as
/// right-continuous step functions.
double sup_distance(const Trajectory& coarse, const Trajectory& fine);

}  // namespace rdsens::reference
