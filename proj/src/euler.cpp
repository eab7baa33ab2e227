#include "rdsens/euler.hpp"

#include <cmath>
#include <ostream>
#include <string>

#include "rdsens/errors.hpp"
#include "rdsens/report_io.hpp"

namespace rdsens {

namespace {

template <typename E>
[[noreturn]] void rethrow_at_step(const E& e, long n) {
  throw E("step " + std::to_string(n) + ": " + e.what());
}

// Hyperplane-membership tolerance for derivative columns.
constexpr double kDerivativeBandTol = 1e-8;

}  // namespace

EulerConfig::EulerConfig(double delta_, long steps_)
    : delta(delta_), steps(steps_) {
  if (!(delta > 0.0)) throw ConfigError("time step must be positive");
  if (steps < 1) throw ConfigError("step count must be at least 1");
}

EulerConfig EulerConfig::from_horizon(double delta, double t) {
  if (!(delta > 0.0)) throw ConfigError("time step must be positive");
  if (!(t > 0.0)) throw ConfigError("horizon must be positive");
  const long n = std::lround(t / delta);
  if (n < 1 || std::abs(static_cast<double>(n) * delta - t) >
                   1e-9 * std::max(1.0, std::abs(t)))
    throw ConfigError("horizon must be an integer multiple of the time step");
  return EulerConfig(delta, n);
}

std::pair<Eigen::VectorXd, Eigen::VectorXd> step_reflected(
    const ParamModel& model, const Eigen::VectorXd& alpha,
    const Eigen::VectorXd& z_prev, double delta, const Eigen::VectorXd& dW) {
  Eigen::VectorXd b(model.state_dim);
  Eigen::MatrixXd sig(model.state_dim, model.noise_dim);
  model.drift(alpha, z_prev, b);
  model.dispersion(alpha, z_prev, sig);
  Eigen::VectorXd xi_state = z_prev + b * delta + sig * dW;
  Projection pr = project(model.domain, model.reflection.eval(alpha), xi_state);
  return {std::move(pr.point), std::move(pr.multipliers)};
}

Eigen::MatrixXd step_derivative(const ParamModel& model,
                                const Eigen::VectorXd& alpha,
                                const Eigen::VectorXd& z_prev,
                                const Eigen::MatrixXd& j_prev, double delta,
                                const Eigen::VectorXd& dW,
                                const Eigen::VectorXd& l_inc,
                                const ActiveSet& z_next_active) {
  const int J = model.state_dim, K = model.noise_dim, M = model.param_dim;
  Eigen::MatrixXd b_alpha(J, M), b_x(J, J);
  std::vector<Eigen::MatrixXd> sig_alpha(M, Eigen::MatrixXd(J, K));
  std::vector<Eigen::MatrixXd> sig_x(J, Eigen::MatrixXd(J, K));
  model.drift_alpha(alpha, z_prev, b_alpha);
  model.drift_x(alpha, z_prev, b_x);
  model.dispersion_alpha(alpha, z_prev, sig_alpha);
  model.dispersion_x(alpha, z_prev, sig_x);
  const std::vector<Eigen::MatrixXd> r_jac = model.reflection.jacobian(alpha);

  Eigen::MatrixXd x = j_prev;
  x += b_alpha * delta;
  x.noalias() += b_x * j_prev * delta;
  Eigen::MatrixXd sig_dir(J, K);
  for (int m = 0; m < M; ++m) {
    x.col(m).noalias() += sig_alpha[static_cast<size_t>(m)] * dW;
    sig_dir.setZero();
    for (int l = 0; l < J; ++l)
      sig_dir += j_prev(l, m) * sig_x[static_cast<size_t>(l)];
    x.col(m).noalias() += sig_dir * dW;
    x.col(m).noalias() += r_jac[static_cast<size_t>(m)] * l_inc;
  }

  const Eigen::MatrixXd L = derivative_projection(
      model.domain, model.reflection.eval(alpha), z_next_active);
  return L * x;
}

Simulator::Simulator(const ParamModel& model, EulerConfig config,
                     bool with_derivative)
    : model_(model), config_(config), with_derivative_(with_derivative) {
  const int J = model.state_dim, K = model.noise_dim, M = model.param_dim;
  const int N = model.num_faces();
  dw_.resize(K);
  bval_.resize(J);
  xi_state_.resize(J);
  z_.resize(J);
  znext_.resize(J);
  mult_.resize(N);
  slack_.resize(N);
  sigval_.resize(J, K);
  if (with_derivative_) {
    jcur_.resize(J, M);
    jnext_.resize(J, M);
    xmat_.resize(J, M);
    b_alpha_.resize(J, M);
    b_x_.resize(J, J);
    sigdir_.resize(J);
    sigma_alpha_.assign(M, Eigen::MatrixXd(J, K));
    sigma_x_.assign(J, Eigen::MatrixXd(J, K));
  }
}

void Simulator::run(const Eigen::VectorXd& alpha, NoiseSource& noise,
                    Trajectory& out) const {
  const int J = model_.state_dim, K = model_.noise_dim, M = model_.param_dim;
  const int N = model_.num_faces();
  const long steps = config_.steps;
  const double delta = config_.delta;

  if (alpha.size() != M) throw ModelError("simulate: alpha dimension mismatch");

  const Eigen::MatrixXd R = model_.reflection.eval(alpha);
  validate_reflection_matrix(model_.domain, R);
  Projector projector(model_.domain, R);
  DerivativeProjectionCache l_cache(model_.domain, R);
  std::vector<Eigen::MatrixXd> r_jac;
  if (with_derivative_) r_jac = model_.reflection.jacobian(alpha);

  out.delta = delta;
  out.state_dim = J;
  out.noise_dim = K;
  out.param_dim = M;
  out.states.resize(J, steps + 1);
  out.multipliers.resize(N, steps + 1);
  out.increments.resize(K, steps);
  out.derivatives.resize(J, with_derivative_ ? (steps + 1) * M : 0);
  out.active_masks.assign(static_cast<size_t>(steps) + 1, 0u);

  model_.x0(alpha, z_);
  model_.domain.slacks(z_, slack_);
  if (slack_.minCoeff() < -boundary_tolerance(z_))
    throw ModelError("simulate: initial condition lies outside the domain");
  out.states.col(0) = z_;
  out.multipliers.col(0).setZero();

  if (with_derivative_) {
    model_.x0_jac(alpha, jcur_);
    uint32_t mask0 = 0;
    const double tol0 = boundary_tolerance(z_);
    for (int i = 0; i < N; ++i)
      if (slack_(i) <= tol0) mask0 |= (1u << i);
    for (int m = 0; m < M; ++m)
      for (int i = 0; i < N; ++i)
        if ((mask0 & (1u << i)) &&
            std::abs(model_.domain.normals().row(i).dot(jcur_.col(m))) >
                kDerivativeBandTol * (1.0 + jcur_.col(m).norm()))
          throw ModelError(
              "simulate: initial derivative column leaves the active tangent "
              "hyperplanes");
    out.active_masks[0] = mask0;
    out.derivatives.leftCols(M) = jcur_;
  }

  for (long n = 1; n <= steps; ++n) {
    try {
      noise.next_increment(dw_);
      out.increments.col(n - 1) = dw_;

      model_.drift(alpha, z_, bval_);
      model_.dispersion(alpha, z_, sigval_);
      xi_state_ = z_;
      xi_state_.noalias() += bval_ * delta;
      xi_state_.noalias() += sigval_ * dw_;

      uint32_t mask = 0;
      projector.project_into(xi_state_, znext_, mult_, mask);
      out.multipliers.col(n) = out.multipliers.col(n - 1) + mult_;

      // Faces the projection engaged, plus faces the new state touches
      // within tolerance.
      model_.domain.slacks(znext_, slack_);
      const double tol = boundary_tolerance(znext_);
      for (int i = 0; i < N; ++i)
        if (slack_(i) <= tol) mask |= (1u << i);
      out.active_masks[static_cast<size_t>(n)] = mask;

      if (with_derivative_) {
        model_.drift_alpha(alpha, z_, b_alpha_);
        model_.drift_x(alpha, z_, b_x_);
        model_.dispersion_alpha(alpha, z_, sigma_alpha_);
        model_.dispersion_x(alpha, z_, sigma_x_);

        xmat_ = jcur_;
        xmat_ += b_alpha_ * delta;
        xmat_.noalias() += b_x_ * jcur_ * delta;
        for (int m = 0; m < M; ++m) {
          auto col = xmat_.col(m);
          col.noalias() += sigma_alpha_[static_cast<size_t>(m)] * dw_;
          for (int l = 0; l < J; ++l) {
            const double w = jcur_(l, m);
            if (w != 0.0) {
              sigdir_.noalias() = sigma_x_[static_cast<size_t>(l)] * dw_;
              col += w * sigdir_;
            }
          }
          col.noalias() += r_jac[static_cast<size_t>(m)] * mult_;
        }

        if (mask == 0) {
          jcur_.swap(xmat_);
        } else {
          jnext_.noalias() = l_cache.get(mask) * xmat_;
          jcur_.swap(jnext_);
        }
        out.derivatives.middleCols(n * M, M) = jcur_;
      }

      z_.swap(znext_);
      out.states.col(n) = z_;
    } catch (const PointOutsideDomain& e) {
      rethrow_at_step(e, n);
    } catch (const NoFeasibleProjection& e) {
      rethrow_at_step(e, n);
    } catch (const RankDeficientActiveSet& e) {
      rethrow_at_step(e, n);
    } catch (const SingularActiveSystem& e) {
      rethrow_at_step(e, n);
    } catch (const GeometryError& e) {
      rethrow_at_step(e, n);
    } catch (const ModelError& e) {
      rethrow_at_step(e, n);
    }
  }
}

Trajectory Simulator::run(const Eigen::VectorXd& alpha,
                          NoiseSource& noise) const {
  Trajectory out;
  run(alpha, noise, out);
  return out;
}

Trajectory simulate(const ParamModel& model, const Eigen::VectorXd& alpha,
                    const EulerConfig& config, NoiseSource& noise,
                    bool with_derivative) {
  return Simulator(model, config, with_derivative).run(alpha, noise);
}

Trajectory simulate(const ParamModel& model, const Eigen::VectorXd& alpha,
                    const EulerConfig& config, GaussianStream stream,
                    bool with_derivative) {
  GaussianIncrements noise(stream, config.delta);
  return simulate(model, alpha, config, noise, with_derivative);
}

void write_trajectory_csv(const Trajectory& traj, std::ostream& os) {
  const int J = traj.state_dim, N = static_cast<int>(traj.multipliers.rows());
  const int M = traj.param_dim;
  os << "n,t";
  for (int j = 1; j <= J; ++j) os << ",Z" << j;
  for (int i = 1; i <= N; ++i) os << ",L" << i;
  if (traj.has_derivative())
    for (int j = 1; j <= J; ++j)
      for (int m = 1; m <= M; ++m) os << ",J" << j << "_" << m;
  os << "\n";
  for (long n = 0; n <= traj.steps(); ++n) {
    os << n << "," << format_double(traj.time(n));
    for (int j = 0; j < J; ++j) os << "," << format_double(traj.states(j, n));
    for (int i = 0; i < N; ++i)
      os << "," << format_double(traj.multipliers(i, n));
    if (traj.has_derivative()) {
      for (int j = 0; j < J; ++j)
        for (int m = 0; m < M; ++m)
          os << "," << format_double(traj.derivatives(j, n * M + m));
    }
    os << "\n";
  }
}

}  // namespace rdsens
