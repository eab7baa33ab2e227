#include "rdsens/estimators.hpp"

#include <Eigen/Cholesky>
#include <atomic>
#include <chrono>
#include <cmath>
#include <limits>
#include <mutex>
#include <thread>

#include "rdsens/errors.hpp"

namespace rdsens {

namespace {

constexpr double kCi95 = 1.96;
constexpr double kDiffusionRcond = 1e-12;

double elapsed_seconds(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
      .count();
}

// Runs fn(trial_index) over 0..trials-1 on up to `threads` workers. Each
// worker gets a stable worker id for workspace reuse. The first failing
// trial (lowest index) is rethrown with its index attached.
void parallel_trials(long trials, int threads,
                     const std::function<void(int, long)>& fn) {
  threads = std::max(1, threads);
  if (threads == 1) {
    for (long i = 0; i < trials; ++i) {
      try {
        fn(0, i);
      } catch (const std::exception& e) {
        throw Error("trial " + std::to_string(i) + ": " + e.what());
      }
    }
    return;
  }

  std::atomic<long> next{0};
  std::mutex fail_mutex;
  long fail_index = -1;
  std::string fail_message;

  auto worker = [&](int worker_id) {
    for (;;) {
      const long i = next.fetch_add(1);
      if (i >= trials) return;
      {
        std::lock_guard<std::mutex> lock(fail_mutex);
        if (fail_index >= 0 && fail_index < i) return;
      }
      try {
        fn(worker_id, i);
      } catch (const std::exception& e) {
        std::lock_guard<std::mutex> lock(fail_mutex);
        if (fail_index < 0 || i < fail_index) {
          fail_index = i;
          fail_message = e.what();
        }
      }
    }
  };

  std::vector<std::thread> pool;
  pool.reserve(static_cast<size_t>(threads));
  for (int t = 0; t < threads; ++t) pool.emplace_back(worker, t);
  for (auto& th : pool) th.join();
  if (fail_index >= 0)
    throw Error("trial " + std::to_string(fail_index) + ": " + fail_message);
}

// Mean/variance per column, accumulated in trial order so results do not
// depend on how trials were scheduled.
void reduce_rows(const Eigen::MatrixXd& rows, Eigen::RowVectorXd& mean,
                 Eigen::RowVectorXd& variance) {
  const long n = rows.rows();
  mean.setZero(rows.cols());
  for (long i = 0; i < n; ++i) mean += rows.row(i);
  mean /= static_cast<double>(n);
  variance.setZero(rows.cols());
  for (long i = 0; i < n; ++i)
    variance += (rows.row(i) - mean).cwiseAbs2();
  variance /= static_cast<double>(n - 1);
}

EstimateReport finish_report(Method method, const Eigen::VectorXd& alpha,
                             const Eigen::MatrixXd& rows,
                             const EulerConfig& config,
                             const MonteCarloOptions& options,
                             std::chrono::steady_clock::time_point start) {
  EstimateReport report;
  report.method = method;
  report.alpha = alpha;
  reduce_rows(rows, report.mean, report.variance);
  report.ci95 =
      (report.variance / static_cast<double>(rows.rows())).cwiseSqrt() * kCi95;
  report.trials = rows.rows();
  report.delta = config.delta;
  report.horizon = config.horizon();
  report.seed = options.master_seed;
  if (method == Method::fd) report.epsilon = options.epsilon;
  report.seconds = elapsed_seconds(start);
  return report;
}

}  // namespace

std::string method_name(Method m) {
  switch (m) {
    case Method::ipa: return "ipa";
    case Method::lr: return "lr";
    case Method::fd: return "fd";
  }
  return "?";
}

Method parse_method(const std::string& name) {
  if (name == "ipa") return Method::ipa;
  if (name == "lr") return Method::lr;
  if (name == "fd") return Method::fd;
  throw ConfigError("unknown method '" + name + "' (expected ipa, lr or fd)");
}

double path_functional(const Trajectory& traj, const Functional& F) {
  double value = 0.0;
  if (F.zeta1) {
    double running = 0.0;
    for (long n = 0; n < traj.steps(); ++n) running += F.zeta1(traj.states.col(n));
    value += running * traj.delta;
  }
  if (F.zeta2) value += F.zeta2(traj.states.col(traj.steps()));
  return value;
}

Eigen::RowVectorXd ipa_trial(const Trajectory& traj, const Functional& F) {
  if (!traj.has_derivative())
    throw ModelError("ipa estimate needs a trajectory with derivatives");
  const int M = traj.param_dim;
  const long steps = traj.steps();
  Eigen::RowVectorXd estimate = Eigen::RowVectorXd::Zero(M);
  Eigen::RowVectorXd grad(traj.state_dim);
  if (F.zeta1_grad) {
    Eigen::RowVectorXd running = Eigen::RowVectorXd::Zero(M);
    for (long n = 0; n < steps; ++n) {
      F.zeta1_grad(traj.states.col(n), grad);
      running.noalias() += grad * traj.derivatives.middleCols(n * M, M);
    }
    estimate += running * traj.delta;
  }
  if (F.zeta2_grad) {
    F.zeta2_grad(traj.states.col(steps), grad);
    estimate.noalias() += grad * traj.derivatives.middleCols(steps * M, M);
  }
  return estimate;
}

Eigen::RowVectorXd lr_trial(const Trajectory& traj, const Functional& F,
                            const ParamModel& model,
                            const Eigen::VectorXd& alpha) {
  const int J = model.state_dim, K = model.noise_dim, M = model.param_dim;
  bool any_eligible = false;
  for (int m = 0; m < M; ++m) any_eligible = any_eligible || model.lr_eligible(m);
  if (!any_eligible)
    throw ModelError(
        "lr estimate not applicable: no parameter coordinate leaves x0, sigma "
        "and R fixed (or the diffusion is not declared elliptic)");

  Eigen::RowVectorXd score = Eigen::RowVectorXd::Zero(M);
  for (int m = 0; m < M; ++m)
    if (!model.lr_eligible(m))
      score(m) = std::numeric_limits<double>::quiet_NaN();

  Eigen::MatrixXd sig(J, K), a(J, J), b_alpha(J, M), ainv_b(J, M);
  Eigen::VectorXd w(K);
  Eigen::LLT<Eigen::MatrixXd> llt(J);
  for (long n = 0; n < traj.steps(); ++n) {
    const auto z = traj.states.col(n);
    model.dispersion(alpha, z, sig);
    model.drift_alpha(alpha, z, b_alpha);
    a.noalias() = sig * sig.transpose();
    llt.compute(a);
    if (llt.info() != Eigen::Success || llt.rcond() < kDiffusionRcond)
      throw SingularDiffusion("lr estimate: diffusion matrix is singular at step " +
                              std::to_string(n + 1));
    ainv_b = llt.solve(b_alpha);
    for (int m = 0; m < M; ++m) {
      if (!model.lr_eligible(m)) continue;
      w.noalias() = sig.transpose() * ainv_b.col(m);
      score(m) += w.dot(traj.increments.col(n));
    }
  }
  return path_functional(traj, F) * score;
}

double fd_trial(const PayoffFn& payoff, const Eigen::VectorXd& alpha, int m,
                double epsilon, const GaussianStream& stream, bool central) {
  if (!(epsilon > 0.0)) throw ConfigError("finite-difference bump must be positive");
  Eigen::VectorXd bumped = alpha;
  bumped(m) += epsilon;
  const double up = payoff(bumped, stream);
  if (central) {
    bumped(m) = alpha(m) - epsilon;
    return (up - payoff(bumped, stream)) / (2.0 * epsilon);
  }
  return (up - payoff(alpha, stream)) / epsilon;
}

EstimateReport monte_carlo(Method method, const ParamModel& model,
                           const Eigen::VectorXd& alpha, const Functional& F,
                           const EulerConfig& config,
                           const MonteCarloOptions& options) {
  if (options.trials < 2)
    throw ConfigError("monte carlo needs at least 2 trials");
  const auto start = std::chrono::steady_clock::now();
  const int M = model.param_dim;
  const int threads = std::max(1, options.threads);

  Eigen::MatrixXd rows(options.trials, M);

  if (method == Method::fd) {
    std::vector<Simulator> sims;
    sims.reserve(static_cast<size_t>(threads));
    for (int t = 0; t < threads; ++t) sims.emplace_back(model, config, false);
    std::vector<Trajectory> trajs(static_cast<size_t>(threads));

    parallel_trials(options.trials, threads, [&](int worker, long i) {
      auto& sim = sims[static_cast<size_t>(worker)];
      auto& traj = trajs[static_cast<size_t>(worker)];
      const GaussianStream stream(options.master_seed,
                                  static_cast<uint64_t>(i));
      auto payoff_at = [&](const Eigen::VectorXd& a) {
        GaussianIncrements noise(stream, config.delta);
        sim.run(a, noise, traj);
        return path_functional(traj, F);
      };
      const double base = options.fd_central ? 0.0 : payoff_at(alpha);
      Eigen::VectorXd bumped = alpha;
      for (int m = 0; m < M; ++m) {
        bumped = alpha;
        bumped(m) += options.epsilon;
        const double up = payoff_at(bumped);
        if (options.fd_central) {
          bumped(m) = alpha(m) - options.epsilon;
          rows(i, m) = (up - payoff_at(bumped)) / (2.0 * options.epsilon);
        } else {
          rows(i, m) = (up - base) / options.epsilon;
        }
      }
    });
  } else {
    const bool with_derivative = (method == Method::ipa);
    std::vector<Simulator> sims;
    sims.reserve(static_cast<size_t>(threads));
    for (int t = 0; t < threads; ++t)
      sims.emplace_back(model, config, with_derivative);
    std::vector<Trajectory> trajs(static_cast<size_t>(threads));

    parallel_trials(options.trials, threads, [&](int worker, long i) {
      auto& sim = sims[static_cast<size_t>(worker)];
      auto& traj = trajs[static_cast<size_t>(worker)];
      GaussianIncrements noise(
          GaussianStream(options.master_seed, static_cast<uint64_t>(i)),
          config.delta);
      sim.run(alpha, noise, traj);
      rows.row(i) = (method == Method::ipa) ? ipa_trial(traj, F)
                                            : lr_trial(traj, F, model, alpha);
    });
  }

  return finish_report(method, alpha, rows, config, options, start);
}

EstimateReport monte_carlo_fd(const PayoffFn& payoff, int param_dim,
                              const Eigen::VectorXd& alpha,
                              const EulerConfig& config,
                              const MonteCarloOptions& options) {
  if (options.trials < 2)
    throw ConfigError("monte carlo needs at least 2 trials");
  const auto start = std::chrono::steady_clock::now();
  Eigen::MatrixXd rows(options.trials, param_dim);
  parallel_trials(options.trials, std::max(1, options.threads),
                  [&](int, long i) {
                    const GaussianStream stream(options.master_seed,
                                                static_cast<uint64_t>(i));
                    for (int m = 0; m < param_dim; ++m)
                      rows(i, m) = fd_trial(payoff, alpha, m, options.epsilon,
                                            stream, options.fd_central);
                  });
  return finish_report(Method::fd, alpha, rows, config, options, start);
}

PayoffFn reflected_payoff(const ParamModel& model, const Functional& F,
                          const EulerConfig& config) {
  return [model, F, config](const Eigen::VectorXd& alpha,
                            GaussianStream stream) {
    GaussianIncrements noise(stream, config.delta);
    const Trajectory traj = simulate(model, alpha, config, noise, false);
    return path_functional(traj, F);
  };
}

}  // namespace rdsens
