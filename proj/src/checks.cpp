#include "rdsens/checks.hpp"

#include <Eigen/Dense>
#include <bit>
#include <cmath>
#include <sstream>

#include "rdsens/errors.hpp"
#include "rdsens/euler.hpp"
#include "rdsens/reference.hpp"

namespace rdsens::checks {

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

std::string fmt(double v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

void run_check(std::vector<CheckResult>& out, const std::string& name,
               const std::function<std::optional<std::string>()>& body) {
  CheckResult r{name, false, ""};
  try {
    const auto failure = body();
    r.passed = !failure.has_value();
    if (failure) r.detail = *failure;
  } catch (const std::exception& e) {
    r.detail = std::string("exception: ") + e.what();
  }
  out.push_back(std::move(r));
}

double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

int uniform_int(std::mt19937_64& rng, int lo, int hi) {
  return std::uniform_int_distribution<int>(lo, hi)(rng);
}

VectorXd gaussian_vector(std::mt19937_64& rng, int n) {
  std::normal_distribution<double> dist;
  VectorXd v(n);
  for (int i = 0; i < n; ++i) v(i) = dist(rng);
  return v;
}

// Strictly interior point of P, suitable for two-sided finite differences.
VectorXd interior_sample(const Polyhedron& P, std::mt19937_64& rng) {
  VectorXd slack(P.num_faces());
  for (int attempt = 0; attempt < 64; ++attempt) {
    VectorXd x = P.interior_point() + 0.5 * gaussian_vector(rng, P.dim());
    P.slacks(x, slack);
    if (slack.minCoeff() > 1e-3) return x;
  }
  return P.interior_point();
}

}  // namespace

std::pair<VectorXd, VectorXd> brute_force_project(const Polyhedron& P,
                                                  const MatrixXd& R,
                                                  const VectorXd& x) {
  const int N = P.num_faces();
  const int J = P.dim();
  const double feas_tol = 1e-9 * (1.0 + x.norm());
  VectorXd slack(N);
  P.slacks(x, slack);

  std::vector<uint32_t> masks;
  for (uint32_t mask = 0; mask < (1u << N); ++mask) masks.push_back(mask);
  std::sort(masks.begin(), masks.end(), [](uint32_t a, uint32_t b) {
    const int pa = std::popcount(a), pb = std::popcount(b);
    return pa != pb ? pa < pb : a < b;
  });

  for (const uint32_t mask : masks) {
    const int k = std::popcount(mask);
    if (k > J) continue;  // dependent directions, system cannot be regular
    std::vector<int> idx;
    for (int i = 0; i < N; ++i)
      if (mask & (1u << i)) idx.push_back(i);

    VectorXd xi = VectorXd::Zero(N);
    VectorXd z = x;
    if (k > 0) {
      MatrixXd sys(k, k);
      VectorXd rhs(k);
      for (int a = 0; a < k; ++a) {
        rhs(a) = -slack(idx[static_cast<size_t>(a)]);
        for (int b = 0; b < k; ++b)
          sys(a, b) = P.normals().row(idx[static_cast<size_t>(a)])
                          .dot(R.col(idx[static_cast<size_t>(b)]));
      }
      Eigen::FullPivLU<MatrixXd> lu(sys);
      if (!lu.isInvertible()) continue;
      const VectorXd sol = lu.solve(rhs);
      bool ok = true;
      for (int a = 0; a < k; ++a)
        if (sol(a) < -1e-12) {
          ok = false;
          break;
        }
      if (!ok) continue;
      for (int a = 0; a < k; ++a) {
        const double v = std::max(sol(a), 0.0);
        xi(idx[static_cast<size_t>(a)]) = v;
        z += v * R.col(idx[static_cast<size_t>(a)]);
      }
    }

    bool inside = true;
    for (int i = 0; i < N; ++i)
      if (P.slack(i, z) < -feas_tol) {
        inside = false;
        break;
      }
    if (inside) return {z, xi};
  }
  throw NoFeasibleProjection("brute force: no feasible active set");
}

VectorXd pava_descending(const VectorXd& x) {
  const Eigen::Index n = x.size();
  std::vector<double> sum;
  std::vector<double> weight;
  sum.reserve(n);
  weight.reserve(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    sum.push_back(x(i));
    weight.push_back(1.0);
    // merge while the fit fails to be non-increasing
    while (sum.size() >= 2) {
      const size_t k = sum.size();
      if (sum[k - 2] / weight[k - 2] >= sum[k - 1] / weight[k - 1]) break;
      sum[k - 2] += sum[k - 1];
      weight[k - 2] += weight[k - 1];
      sum.pop_back();
      weight.pop_back();
    }
  }
  VectorXd z(n);
  Eigen::Index pos = 0;
  for (size_t b = 0; b < sum.size(); ++b) {
    const double mean = sum[b] / weight[b];
    for (long r = 0; r < static_cast<long>(weight[b]); ++r) z(pos++) = mean;
  }
  return z;
}

VectorXd central_difference(
    const std::function<VectorXd(const VectorXd&)>& f, const VectorXd& v,
    int m, double h) {
  VectorXd up = v, down = v;
  up(m) += h;
  down(m) -= h;
  return (f(up) - f(down)) / (2.0 * h);
}

RandomInstance random_instance(std::mt19937_64& rng, int max_faces) {
  const int family = uniform_int(rng, 0, 4);
  switch (family) {
    case 0: {  // oblique orthant-like domain
      const int J = uniform_int(rng, 1, 4);
      VectorXd offsets(J);
      for (int i = 0; i < J; ++i) offsets(i) = uniform(rng, -0.5, 0.5);
      MatrixXd R = MatrixXd::Identity(J, J);
      if (J > 1) {
        const double s = 0.8 / (J - 1);
        for (int i = 0; i < J; ++i)
          for (int j = 0; j < J; ++j)
            if (i != j) R(i, j) = uniform(rng, -s, s);
      }
      Polyhedron P(MatrixXd::Identity(J, J), offsets,
                   offsets + VectorXd::Ones(J));
      return {std::move(P), std::move(R)};
    }
    case 1: {  // wedge with orthonormal normals and oblique directions
      const int J = uniform_int(rng, 2, 4);
      const int N = uniform_int(rng, 1, std::min(J, max_faces));
      MatrixXd gauss(J, J);
      for (int i = 0; i < J; ++i) gauss.col(i) = gaussian_vector(rng, J);
      const MatrixXd Q = Eigen::HouseholderQR<MatrixXd>(gauss).householderQ();
      MatrixXd normals = Q.leftCols(N).transpose();
      VectorXd offsets(N);
      for (int i = 0; i < N; ++i) offsets(i) = uniform(rng, -0.5, 0.5);
      MatrixXd R(J, N);
      const double cap = 0.8 / std::max(1, N - 1);
      for (int i = 0; i < N; ++i) {
        VectorXd v = gaussian_vector(rng, J);
        v -= normals.row(i).dot(v) * normals.row(i).transpose();
        const double norm = v.norm();
        if (norm > 0) v *= uniform(rng, 0.0, cap) / norm;
        R.col(i) = normals.row(i).transpose() + v;
      }
      VectorXd interior = VectorXd::Zero(J);
      for (int i = 0; i < N; ++i)
        interior += (offsets(i) + 1.0) * normals.row(i).transpose();
      Polyhedron P(std::move(normals), std::move(offsets), std::move(interior));
      return {std::move(P), std::move(R)};
    }
    case 2: {  // random polyhedron with normal reflection
      const int J = uniform_int(rng, 2, 4);
      const int N = uniform_int(rng, 1, std::min(J, max_faces));
      MatrixXd normals(N, J);
      for (int attempt = 0;; ++attempt) {
        for (int i = 0; i < N; ++i)
          normals.row(i) = gaussian_vector(rng, J).normalized().transpose();
        bool ok = true;
        for (int i = 0; i < N && ok; ++i)
          for (int j = i + 1; j < N && ok; ++j)
            if (std::abs(normals.row(i).dot(normals.row(j))) > 0.6) ok = false;
        if (ok || attempt > 200) break;
      }
      VectorXd offsets(N);
      for (int i = 0; i < N; ++i) offsets(i) = uniform(rng, -0.5, 0.5);
      const MatrixXd gram = normals * normals.transpose();
      const VectorXd interior =
          normals.transpose() *
          gram.ldlt().solve(offsets + VectorXd::Ones(N));
      MatrixXd R = normals.transpose();
      Polyhedron P(std::move(normals), std::move(offsets), interior);
      return {std::move(P), std::move(R)};
    }
    case 3: {  // descending chamber, normal reflection
      const int J = uniform_int(rng, 2, 5);
      Polyhedron P = Polyhedron::descending_chamber(J);
      MatrixXd R = P.normals().transpose();
      return {std::move(P), std::move(R)};
    }
    default: {  // fixed oblique plane fixture
      MatrixXd R(2, 2);
      R << 1.0, 0.0, 0.5, 1.0;
      return {Polyhedron::orthant(2), std::move(R)};
    }
  }
}

VectorXd random_probe_point(const Polyhedron& P, std::mt19937_64& rng,
                            double radius) {
  return P.interior_point() + radius * gaussian_vector(rng, P.dim());
}

std::optional<std::string> jacobian_consistency(const ParamModel& model,
                                                const VectorXd& alpha0,
                                                int samples, uint64_t seed,
                                                double tol) {
  std::mt19937_64 rng(seed);
  const int J = model.state_dim, K = model.noise_dim, M = model.param_dim;

  auto mismatch = [&](const char* what, int s, double err) {
    std::ostringstream os;
    os << what << " mismatch at sample " << s << " (error " << err << ")";
    return os.str();
  };

  for (int s = 0; s < samples; ++s) {
    VectorXd alpha(M);
    for (int m = 0; m < M; ++m)
      alpha(m) = alpha0(m) + 0.2 * (1.0 + std::abs(alpha0(m))) *
                                 uniform(rng, -1.0, 1.0);

    VectorXd x = interior_sample(model.domain, rng);

    // drift Jacobians
    Eigen::MatrixXd b_alpha(J, M), b_x(J, J);
    model.drift_alpha(alpha, x, b_alpha);
    model.drift_x(alpha, x, b_x);
    for (int m = 0; m < M; ++m) {
      const double h = 1e-5 * (1.0 + std::abs(alpha(m)));
      const VectorXd fd = central_difference(
          [&](const VectorXd& a) { return model.drift_at(a, x); }, alpha, m, h);
      const double err =
          (fd - b_alpha.col(m)).cwiseAbs().maxCoeff();
      if (err > tol * (1.0 + b_alpha.col(m).cwiseAbs().maxCoeff()))
        return mismatch("drift/alpha jacobian", s, err);
    }
    for (int jx = 0; jx < J; ++jx) {
      const double h = 1e-5 * (1.0 + std::abs(x(jx)));
      const VectorXd fd = central_difference(
          [&](const VectorXd& xv) { return model.drift_at(alpha, xv); }, x, jx,
          h);
      const double err = (fd - b_x.col(jx)).cwiseAbs().maxCoeff();
      if (err > tol * (1.0 + b_x.col(jx).cwiseAbs().maxCoeff()))
        return mismatch("drift/state jacobian", s, err);
    }

    // initial-condition Jacobian
    Eigen::MatrixXd x0j(J, M);
    model.x0_jac(alpha, x0j);
    for (int m = 0; m < M; ++m) {
      const double h = 1e-5 * (1.0 + std::abs(alpha(m)));
      const VectorXd fd = central_difference(
          [&](const VectorXd& a) { return model.x0_at(a); }, alpha, m, h);
      const double err = (fd - x0j.col(m)).cwiseAbs().maxCoeff();
      if (err > tol * (1.0 + x0j.col(m).cwiseAbs().maxCoeff()))
        return mismatch("x0 jacobian", s, err);
    }

    // dispersion Jacobians, flattened column by column
    std::vector<Eigen::MatrixXd> sig_alpha(M, Eigen::MatrixXd(J, K));
    std::vector<Eigen::MatrixXd> sig_x(J, Eigen::MatrixXd(J, K));
    model.dispersion_alpha(alpha, x, sig_alpha);
    model.dispersion_x(alpha, x, sig_x);
    auto sigma_flat = [&](const VectorXd& a, const VectorXd& xv) {
      Eigen::MatrixXd sig = model.dispersion_at(a, xv);
      return VectorXd(Eigen::Map<VectorXd>(sig.data(), sig.size()));
    };
    for (int m = 0; m < M; ++m) {
      const double h = 1e-5 * (1.0 + std::abs(alpha(m)));
      const VectorXd fd = central_difference(
          [&](const VectorXd& a) { return sigma_flat(a, x); }, alpha, m, h);
      const Eigen::Map<const VectorXd> jac(sig_alpha[static_cast<size_t>(m)].data(),
                                           J * K);
      const double err = (fd - jac).cwiseAbs().maxCoeff();
      if (err > tol * (1.0 + jac.cwiseAbs().maxCoeff()))
        return mismatch("dispersion/alpha jacobian", s, err);
    }
    for (int jx = 0; jx < J; ++jx) {
      const double h = 1e-5 * (1.0 + std::abs(x(jx)));
      const VectorXd fd = central_difference(
          [&](const VectorXd& xv) { return sigma_flat(alpha, xv); }, x, jx, h);
      const Eigen::Map<const VectorXd> jac(sig_x[static_cast<size_t>(jx)].data(),
                                           J * K);
      const double err = (fd - jac).cwiseAbs().maxCoeff();
      if (err > tol * (1.0 + jac.cwiseAbs().maxCoeff()))
        return mismatch("dispersion/state jacobian", s, err);
    }
  }
  return std::nullopt;
}

std::optional<std::string> functional_consistency(const Functional& F,
                                                  const Polyhedron& domain,
                                                  int samples, uint64_t seed,
                                                  double tol) {
  std::mt19937_64 rng(seed);
  const int J = domain.dim();
  Eigen::RowVectorXd grad(J);
  for (int s = 0; s < samples; ++s) {
    const VectorXd x = interior_sample(domain, rng);
    for (int pass = 0; pass < 2; ++pass) {
      const auto& value = pass == 0 ? F.zeta1 : F.zeta2;
      const auto& gradient = pass == 0 ? F.zeta1_grad : F.zeta2_grad;
      if (!value || !gradient) continue;
      gradient(x, grad);
      for (int jx = 0; jx < J; ++jx) {
        const double h = 1e-5 * (1.0 + std::abs(x(jx)));
        VectorXd up = x, down = x;
        up(jx) += h;
        down(jx) -= h;
        const double fd = (value(up) - value(down)) / (2.0 * h);
        if (std::abs(fd - grad(jx)) > tol * (1.0 + std::abs(grad(jx)))) {
          std::ostringstream os;
          os << "zeta" << (pass + 1) << " gradient mismatch at sample " << s
             << " coordinate " << jx;
          return os.str();
        }
      }
    }
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// geometry suite
// ---------------------------------------------------------------------------

std::vector<CheckResult> geometry_checks(uint64_t seed) {
  std::vector<CheckResult> results;

  run_check(results, "geometry.complementarity", [&]() -> std::optional<std::string> {
    std::mt19937_64 rng(seed);
    for (int trial = 0; trial < 1000; ++trial) {
      const RandomInstance inst = random_instance(rng);
      const VectorXd x = random_probe_point(inst.domain, rng);
      const Projection pr = project(inst.domain, inst.R, x);
      for (int i = 0; i < inst.domain.num_faces(); ++i) {
        if (inst.domain.slack(i, pr.point) < -1e-9)
          return "projected point leaves the domain at trial " + std::to_string(trial);
        if (pr.multipliers(i) < -1e-12)
          return "negative multiplier at trial " + std::to_string(trial);
        if (pr.multipliers(i) > 1e-9 &&
            inst.domain.slack(i, pr.point) > 1e-9)
          return "multiplier active off its face at trial " + std::to_string(trial);
      }
      const double residual =
          (pr.point - x - inst.R * pr.multipliers).cwiseAbs().maxCoeff();
      if (residual > 1e-9)
        return "projection residual " + fmt(residual) + " at trial " +
               std::to_string(trial);
    }
    return std::nullopt;
  });

  run_check(results, "geometry.idempotence", [&]() -> std::optional<std::string> {
    std::mt19937_64 rng(seed + 1);
    for (int trial = 0; trial < 300; ++trial) {
      const RandomInstance inst = random_instance(rng);
      const VectorXd x = random_probe_point(inst.domain, rng);
      const Projection first = project(inst.domain, inst.R, x);
      const Projection again = project(inst.domain, inst.R, first.point);
      const double drift = (again.point - first.point).cwiseAbs().maxCoeff();
      if (drift > 1e-12 * (1.0 + first.point.norm()))
        return "re-projection moved a constrained point by " + fmt(drift);
    }
    return std::nullopt;
  });

  run_check(results, "geometry.bruteforce_oracle", [&]() -> std::optional<std::string> {
    std::mt19937_64 rng(seed + 2);
    for (int trial = 0; trial < 1000; ++trial) {
      const RandomInstance inst = random_instance(rng, 6);
      const VectorXd x = random_probe_point(inst.domain, rng);
      const Projection pr = project(inst.domain, inst.R, x);
      const auto [z_ref, xi_ref] = brute_force_project(inst.domain, inst.R, x);
      if ((pr.point - z_ref).cwiseAbs().maxCoeff() > 1e-9 ||
          (pr.multipliers - xi_ref).cwiseAbs().maxCoeff() > 1e-9)
        return "projection disagrees with exhaustive enumeration at trial " +
               std::to_string(trial);
    }
    return std::nullopt;
  });

  run_check(results, "geometry.pava_oracle", [&]() -> std::optional<std::string> {
    std::mt19937_64 rng(seed + 3);
    for (int trial = 0; trial < 1000; ++trial) {
      const int J = uniform_int(rng, 2, 6);
      const Polyhedron P = Polyhedron::descending_chamber(J);
      const MatrixXd R = P.normals().transpose();
      const VectorXd x = 2.0 * gaussian_vector(rng, J);
      const Projection pr = project(P, R, x);
      const VectorXd iso = pava_descending(x);
      if ((pr.point - iso).cwiseAbs().maxCoeff() > 1e-9)
        return "chamber projection disagrees with isotonic regression at trial " +
               std::to_string(trial);
    }
    return std::nullopt;
  });

  run_check(results, "geometry.derivative_projection", [&]() -> std::optional<std::string> {
    std::mt19937_64 rng(seed + 4);
    int visited = 0;
    for (int trial = 0; trial < 600 || visited < 100; ++trial) {
      if (trial > 5000) return "too few boundary contacts generated";
      const RandomInstance inst = random_instance(rng);
      const VectorXd x = random_probe_point(inst.domain, rng);
      const Projection pr = project(inst.domain, inst.R, x);
      if (pr.active.empty()) continue;
      ++visited;
      const int J = inst.domain.dim();
      const MatrixXd L = derivative_projection(inst.domain, inst.R, pr.active);

      if ((L * L - L).cwiseAbs().maxCoeff() > 1e-10)
        return "derivative projection is not idempotent";

      const int k = pr.active.size();
      MatrixXd Nk(k, J), Dk(J, k);
      for (int a = 0; a < k; ++a) {
        Nk.row(a) = inst.domain.normals().row(pr.active.indices[a]);
        Dk.col(a) = inst.R.col(pr.active.indices[a]);
      }
      const VectorXd v = gaussian_vector(rng, J);
      // y in the active tangent intersection: orthogonal complement of Nk
      const VectorXd y =
          v - Nk.transpose() * (Nk * Nk.transpose()).ldlt().solve(Nk * v);
      if ((L * y - y).cwiseAbs().maxCoeff() > 1e-9)
        return "derivative projection moves a tangent vector";
      if ((Nk * (L * v)).cwiseAbs().maxCoeff() > 1e-9)
        return "projected vector leaves the active hyperplanes";
      const VectorXd corr = L * v - v;
      const VectorXd fit = Dk.colPivHouseholderQr().solve(corr);
      if ((Dk * fit - corr).cwiseAbs().maxCoeff() > 1e-9)
        return "correction leaves the span of active directions";
    }
    return std::nullopt;
  });

  run_check(results, "geometry.normal_contraction", [&]() -> std::optional<std::string> {
    std::mt19937_64 rng(seed + 5);
    int visited = 0;
    for (int trial = 0; trial < 2000 && visited < 150; ++trial) {
      const int J = uniform_int(rng, 2, 5);
      Polyhedron P = (uniform_int(rng, 0, 1) == 0)
                         ? Polyhedron::descending_chamber(J)
                         : Polyhedron::orthant(J);
      const MatrixXd R = P.normals().transpose();
      const VectorXd x = random_probe_point(P, rng);
      const Projection pr = project(P, R, x);
      if (pr.active.empty()) continue;
      ++visited;
      const MatrixXd L = derivative_projection(P, R, pr.active);
      const double norm2 = L.jacobiSvd().singularValues()(0);
      if (norm2 > 1.0 + 1e-10)
        return "normal-reflection projection has operator norm " + fmt(norm2);
    }
    return std::nullopt;
  });

  return results;
}

// ---------------------------------------------------------------------------
// models suite
// ---------------------------------------------------------------------------

std::vector<CheckResult> model_checks(uint64_t seed) {
  std::vector<CheckResult> results;

  run_check(results, "models.rbm1d_jacobians", [&]() {
    Eigen::Vector3d alpha(1.0, -1.0, 1.0);
    return jacobian_consistency(make_rbm1d(), alpha, 100, seed);
  });

  run_check(results, "models.atlas_jacobians", [&]() {
    const auto [model, functional] = make_atlas_rbm(3, std::sqrt(3e-4), 0.5);
    (void)functional;
    Eigen::VectorXd alpha(1);
    alpha << 1.0;
    return jacobian_consistency(model, alpha, 100, seed + 1);
  });

  run_check(results, "models.diversity_gradient", [&]() {
    const auto [model, functional] = make_atlas_rbm(4, 0.2, 0.5);
    return functional_consistency(functional, model.domain, 100, seed + 2);
  });

  run_check(results, "models.diversity_permutation_invariance",
            [&]() -> std::optional<std::string> {
    std::mt19937_64 rng(seed + 3);
    for (int trial = 0; trial < 200; ++trial) {
      const int J = uniform_int(rng, 2, 6);
      const VectorXd x = 2.0 * gaussian_vector(rng, J);
      const double p = uniform(rng, 0.1, 0.9);
      const double direct = diversity(x, p);
      const double ranked = diversity(rank_descending(x), p);
      if (std::abs(direct - ranked) > 1e-12 * (1.0 + std::abs(direct)))
        return "diversity changed under ranking at trial " + std::to_string(trial);
    }
    return std::nullopt;
  });

  run_check(results, "models.atlas_reflection_data",
            [&]() -> std::optional<std::string> {
    const auto [model, functional] = make_atlas_rbm(5, 0.1, 0.5);
    (void)functional;
    Eigen::VectorXd alpha(1);
    alpha << 1.0;
    const MatrixXd R = model.reflection.eval(alpha);
    validate_reflection_matrix(model.domain, R);
    const int N = model.domain.num_faces();
    // every subset of rank-tie faces is realizable at some chamber corner
    for (uint32_t mask = 1; mask < (1u << N); ++mask) {
      const ActiveSet A = from_mask(mask);
      MatrixXd Dk(model.state_dim, A.size());
      for (int a = 0; a < A.size(); ++a) Dk.col(a) = R.col(A.indices[a]);
      if (Eigen::FullPivLU<MatrixXd>(Dk).rank() != A.size())
        return "active directions dependent for face set mask " + std::to_string(mask);
    }
    return std::nullopt;
  });

  return results;
}

// ---------------------------------------------------------------------------
// euler suite
// ---------------------------------------------------------------------------

namespace {

// Domain membership, multiplier monotonicity/complementarity and derivative
// band membership for one simulated trajectory.
std::optional<std::string> trajectory_invariants(const ParamModel& model,
                                                 const Trajectory& traj) {
  const int N = model.num_faces();
  for (long n = 0; n <= traj.steps(); ++n) {
    const VectorXd z = traj.states.col(n);
    for (int i = 0; i < N; ++i)
      if (model.domain.slack(i, z) < -1e-9)
        return "state leaves the domain at step " + std::to_string(n);
    if (n > 0) {
      for (int i = 0; i < N; ++i) {
        const double inc = traj.multipliers(i, n) - traj.multipliers(i, n - 1);
        if (inc < 0.0)
          return "multiplier decreased at step " + std::to_string(n);
        if (inc > 1e-9 && model.domain.slack(i, z) > 1e-8)
          return "multiplier grew off its face at step " + std::to_string(n);
      }
    }
    if (traj.has_derivative()) {
      const ActiveSet A = traj.active(n);
      for (int m = 0; m < traj.param_dim; ++m) {
        const VectorXd col = traj.derivatives.col(n * traj.param_dim + m);
        for (int i : A.indices)
          if (std::abs(model.domain.normals().row(i).dot(col)) >
              1e-8 * (1.0 + col.norm()))
            return "derivative column leaves the tangent hyperplane at step " +
                   std::to_string(n);
      }
    }
  }
  return std::nullopt;
}

}  // namespace

std::vector<CheckResult> euler_checks(uint64_t seed) {
  std::vector<CheckResult> results;

  run_check(results, "euler.invariants_rbm1d", [&]() -> std::optional<std::string> {
    const ParamModel model = make_rbm1d();
    Eigen::Vector3d alpha(1.0, -1.0, 1.0);
    const EulerConfig config(0.01, 400);
    for (uint64_t trial = 0; trial < 10; ++trial) {
      const Trajectory traj =
          simulate(model, alpha, config, GaussianStream(seed, trial), true);
      if (auto failure = trajectory_invariants(model, traj)) return failure;
    }
    return std::nullopt;
  });

  run_check(results, "euler.invariants_atlas", [&]() -> std::optional<std::string> {
    const auto [model, functional] = make_atlas_rbm(3, std::sqrt(3e-4), 0.5);
    (void)functional;
    Eigen::VectorXd alpha(1);
    alpha << 1.0;
    const EulerConfig config(0.5, 400);
    for (uint64_t trial = 0; trial < 5; ++trial) {
      const Trajectory traj =
          simulate(model, alpha, config, GaussianStream(seed + 1, trial), true);
      if (auto failure = trajectory_invariants(model, traj)) return failure;
    }
    return std::nullopt;
  });

  run_check(results, "euler.invariants_random_instances",
            [&]() -> std::optional<std::string> {
    std::mt19937_64 rng(seed + 2);
    for (int k = 0; k < 20; ++k) {
      const RandomInstance inst = random_instance(rng);
      const int J = inst.domain.dim();
      AffineModelSpec spec{.name = "random",
                           .domain = inst.domain,
                           .noise_dim = J,
                           .param_dim = 1,
                           .R_base = inst.R};
      spec.x0_base = inst.domain.interior_point();
      spec.x0_alpha = MatrixXd::Zero(J, 1);
      spec.b_base = gaussian_vector(rng, J);
      spec.b_alpha = MatrixXd::Zero(J, 1);
      spec.b_x = MatrixXd::Zero(J, J);
      spec.sigma_base = 0.4 * MatrixXd::Identity(J, J);
      const ParamModel model = make_affine_model(std::move(spec));
      Eigen::VectorXd alpha(1);
      alpha << 1.0;
      const Trajectory traj =
          simulate(model, alpha, EulerConfig(0.05, 120),
                   GaussianStream(seed + 3, static_cast<uint64_t>(k)), true);
      if (auto failure = trajectory_invariants(model, traj)) return failure;
    }
    return std::nullopt;
  });

  run_check(results, "euler.closed_form_1d", [&]() -> std::optional<std::string> {
    const ParamModel model = make_rbm1d();
    Eigen::Vector3d alpha(1.0, -1.0, 1.0);
    const EulerConfig config(0.01, 2000);
    const Trajectory traj =
        simulate(model, alpha, config, GaussianStream(seed + 4, 0), false);
    for (long n = 1; n <= traj.steps(); ++n) {
      const double z_prev = traj.states(0, n - 1);
      const double xi = z_prev + alpha(1) * config.delta +
                        alpha(2) * traj.increments(0, n - 1);
      const double tol = 4e-16 * (1.0 + std::abs(xi));
      if (std::abs(traj.states(0, n) - std::max(xi, 0.0)) > tol)
        return "positive-part form violated at step " + std::to_string(n);
      const double l_inc = traj.multipliers(0, n) - traj.multipliers(0, n - 1);
      if (std::abs(l_inc - std::max(-xi, 0.0)) > tol)
        return "multiplier form violated at step " + std::to_string(n);
    }
    return std::nullopt;
  });

  run_check(results, "euler.reproducibility", [&]() -> std::optional<std::string> {
    const ParamModel model = make_rbm1d();
    Eigen::Vector3d alpha(1.0, -1.0, 1.0);
    const EulerConfig config(0.01, 300);
    const Trajectory a =
        simulate(model, alpha, config, GaussianStream(seed + 5, 7), true);
    const Trajectory b =
        simulate(model, alpha, config, GaussianStream(seed + 5, 7), true);
    const auto same = [](const Eigen::MatrixXd& x, const Eigen::MatrixXd& y) {
      return x.rows() == y.rows() && x.cols() == y.cols() &&
             (x.array() == y.array()).all();
    };
    if (!same(a.states, b.states) || !same(a.increments, b.increments) ||
        !same(a.derivatives, b.derivatives))
      return "identical seeds produced different trajectories";
    const Trajectory c =
        simulate(model, alpha, config, GaussianStream(seed + 5, 8), true);
    if (same(a.states, c.states))
      return "distinct trials produced identical trajectories";
    return std::nullopt;
  });

  run_check(results, "euler.convergence_trend", [&]() -> std::optional<std::string> {
    const ParamModel model = make_rbm1d();
    Eigen::Vector3d alpha(1.0, -1.0, 1.0);
    const int paths = 200;
    const double delta_fine = std::pow(2.0, -14);
    std::vector<double> levels;
    for (int k = 4; k <= 10; ++k) levels.push_back(std::pow(2.0, -k));

    std::vector<double> rms;
    for (const double delta : levels) {
      double sum_sq = 0.0;
      for (int path = 0; path < paths; ++path) {
        const auto [coarse, fine] = reference::coupled_reference(
            model, alpha, 1.0, delta, delta_fine,
            GaussianStream(seed + 6, static_cast<uint64_t>(path)));
        const double d = reference::sup_distance(coarse, fine);
        sum_sq += d * d;
      }
      rms.push_back(std::sqrt(sum_sq / paths));
    }
    for (size_t k = 1; k < rms.size(); ++k)
      if (!(rms[k] < rms[k - 1]))
        return "sup-error is not monotone across step sizes";
    // least-squares slope of log rms against log delta
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const double n = static_cast<double>(levels.size());
    for (size_t k = 0; k < levels.size(); ++k) {
      const double lx = std::log(levels[k]), ly = std::log(rms[k]);
      sx += lx; sy += ly; sxx += lx * lx; sxy += lx * ly;
    }
    const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    if (slope < 0.35 || slope > 0.65)
      return "log-log error slope " + fmt(slope) + " outside [0.35, 0.65]";
    return std::nullopt;
  });

  return results;
}

// ---------------------------------------------------------------------------
// reference suite
// ---------------------------------------------------------------------------

std::vector<CheckResult> reference_checks(uint64_t seed) {
  std::vector<CheckResult> results;

  run_check(results, "reference.dp_matrix_oracle",
            [&]() -> std::optional<std::string> {
    std::mt19937_64 rng(seed);
    for (int k = 0; k < 100; ++k) {
      const RandomInstance inst = random_instance(rng);
      const int J = inst.domain.dim();
      const int M = 2;
      AffineModelSpec spec{.name = "zeroed",
                           .domain = inst.domain,
                           .noise_dim = J,
                           .param_dim = M,
                           .R_base = inst.R};
      spec.x0_base = inst.domain.interior_point();
      spec.x0_alpha.resize(J, M);  // the only nonzero derivative data
      for (int m = 0; m < M; ++m) spec.x0_alpha.col(m) = gaussian_vector(rng, J);
      // steady push across the boundary so the derivative projections engage
      VectorXd target = inst.domain.interior_point();
      {
        VectorXd s(inst.domain.num_faces());
        inst.domain.slacks(target, s);
        const MatrixXd nm = inst.domain.normals();
        target -= nm.transpose() *
                  (nm * nm.transpose()).ldlt().solve(s + VectorXd::Constant(s.size(), 0.5));
      }
      spec.b_base = 1.5 * (target - inst.domain.interior_point());
      spec.b_alpha = MatrixXd::Zero(J, M);
      spec.b_x = MatrixXd::Zero(J, J);
      spec.sigma_base = 0.3 * MatrixXd::Identity(J, J);
      const ParamModel model = make_affine_model(std::move(spec));
      const Eigen::MatrixXd x0_jac = model.x0_jac_at(Eigen::VectorXd::Ones(M));

      const Trajectory traj =
          simulate(model, Eigen::VectorXd::Ones(M), EulerConfig(0.02, 150),
                   GaussianStream(seed + 1, static_cast<uint64_t>(k)), true);

      std::vector<ActiveSet> sequence;
      bool hit = false;
      for (long n = 1; n <= traj.steps(); ++n) {
        sequence.push_back(traj.active(n));
        hit = hit || !sequence.back().empty();
      }
      for (int m = 0; m < M; ++m) {
        const VectorXd closed_form = reference::dp_matrix_oracle(
            x0_jac.col(m), sequence, model.domain, inst.R);
        const VectorXd simulated =
            traj.derivatives.col(traj.steps() * M + m);
        if ((closed_form - simulated).cwiseAbs().maxCoeff() > 1e-10)
          return "derivative recursion disagrees with the matrix product at "
                 "instance " + std::to_string(k);
      }
      (void)hit;
    }
    return std::nullopt;
  });

  run_check(results, "reference.coupling_consistency",
            [&]() -> std::optional<std::string> {
    const ParamModel model = make_rbm1d();
    Eigen::Vector3d alpha(1.0, -1.0, 1.0);
    // equal steps: identical paths
    {
      const auto [coarse, fine] = reference::coupled_reference(
          model, alpha, 1.0, 1.0 / 64, 1.0 / 64, GaussianStream(seed + 2, 0));
      if (!(coarse.states.array() == fine.states.array()).all())
        return "equal step sizes produced different paths";
    }
    // aggregated increments must sum the fine ones exactly
    const auto [coarse, fine] = reference::coupled_reference(
        model, alpha, 1.0, 1.0 / 16, 1.0 / 128, GaussianStream(seed + 2, 1));
    const long ratio = 128 / 16;
    for (long n = 0; n < coarse.steps(); ++n) {
      double sum = 0.0;
      for (long r = 0; r < ratio; ++r) sum += fine.increments(0, n * ratio + r);
      if (coarse.increments(0, n) != sum)
        return "coarse increment differs from the summed fine increments";
    }
    return std::nullopt;
  });

  return results;
}

std::vector<CheckResult> loaded_model_checks(const ParamModel& model,
                                             const Functional& functional,
                                             const Eigen::VectorXd& alpha,
                                             uint64_t seed) {
  std::vector<CheckResult> results;

  run_check(results, "model.reflection_normalization", [&]() -> std::optional<std::string> {
    validate_reflection_matrix(model.domain, model.reflection.eval(alpha));
    return std::nullopt;
  });

  run_check(results, "model.initial_condition_in_domain",
            [&]() -> std::optional<std::string> {
    const VectorXd x0 = model.x0_at(alpha);
    if (!model.domain.contains(x0, boundary_tolerance(x0)))
      return "x0(alpha) lies outside the domain";
    return std::nullopt;
  });

  run_check(results, "model.jacobian_consistency",
            [&]() { return jacobian_consistency(model, alpha, 50, seed); });

  run_check(results, "model.functional_gradients", [&]() {
    return functional_consistency(functional, model.domain, 50, seed + 1);
  });

  run_check(results, "model.active_directions_independent",
            [&]() -> std::optional<std::string> {
    std::mt19937_64 rng(seed + 2);
    const MatrixXd R = model.reflection.eval(alpha);
    for (int trial = 0; trial < 200; ++trial) {
      const VectorXd x = random_probe_point(model.domain, rng);
      const Projection pr = project(model.domain, R, x);
      if (!pr.active.empty())
        derivative_projection(model.domain, R, pr.active);  // throws if singular
    }
    return std::nullopt;
  });

  return results;
}

std::vector<CheckResult> run_all_checks(uint64_t seed) {
  std::vector<CheckResult> all;
  for (auto& suite :
       {geometry_checks(seed), model_checks(seed + 1000),
        euler_checks(seed + 2000), reference_checks(seed + 3000)})
    for (auto& r : suite) all.push_back(std::move(r));
  return all;
}

}  // namespace rdsens::checks
