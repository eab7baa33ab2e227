#include "rdsens/reference.hpp"

#include <cmath>

#include "rdsens/errors.hpp"

namespace rdsens::reference {

Eigen::VectorXd dp_matrix_oracle(const Eigen::VectorXd& initial,
                                 const std::vector<ActiveSet>& active_sequence,
                                 const Polyhedron& P,
                                 const Eigen::MatrixXd& R) {
  Eigen::VectorXd v = initial;
  for (const ActiveSet& A : active_sequence)
    v = derivative_projection(P, R, A) * v;
  return v;
}

std::pair<Trajectory, Trajectory> coupled_reference(
    const ParamModel& model, const Eigen::VectorXd& alpha, double horizon,
    double delta_coarse, double delta_fine, GaussianStream stream) {
  if (!(delta_fine > 0.0) || !(delta_coarse > 0.0))
    throw ConfigError("coupled reference: time steps must be positive");
  const long ratio = std::lround(delta_coarse / delta_fine);
  if (ratio < 1 || (ratio & (ratio - 1)) != 0 ||
      std::abs(static_cast<double>(ratio) * delta_fine - delta_coarse) >
          1e-12 * delta_coarse)
    throw ConfigError(
        "coupled reference: coarse step must be a power-of-two multiple of "
        "the fine step");

  const EulerConfig fine_cfg = EulerConfig::from_horizon(delta_fine, horizon);
  const EulerConfig coarse_cfg = EulerConfig::from_horizon(delta_coarse, horizon);

  GaussianIncrements fine_noise(stream, delta_fine);
  Trajectory fine = simulate(model, alpha, fine_cfg, fine_noise, false);

  AggregatedIncrements coarse_noise(stream, delta_fine, static_cast<int>(ratio));
  Trajectory coarse = simulate(model, alpha, coarse_cfg, coarse_noise, false);

  return {std::move(coarse), std::move(fine)};
}

double sup_distance(const Trajectory& coarse, const Trajectory& fine) {
  const long ratio = std::lround(coarse.delta / fine.delta);
  double sup = 0.0;
  for (long j = 0; j <= fine.steps(); ++j) {
    const long n = std::min(j / ratio, coarse.steps());
    const double d = (coarse.states.col(n) - fine.states.col(j)).norm();
    sup = std::max(sup, d);
  }
  return sup;
}

}  // namespace rdsens::reference
