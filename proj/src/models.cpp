#include "rdsens/models.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

#include "rdsens/errors.hpp"

namespace rdsens {

Eigen::VectorXd ParamModel::x0_at(const Eigen::VectorXd& alpha) const {
  Eigen::VectorXd out(state_dim);
  x0(alpha, out);
  return out;
}

Eigen::MatrixXd ParamModel::x0_jac_at(const Eigen::VectorXd& alpha) const {
  Eigen::MatrixXd out(state_dim, param_dim);
  x0_jac(alpha, out);
  return out;
}

Eigen::VectorXd ParamModel::drift_at(const Eigen::VectorXd& alpha,
                                     const Eigen::VectorXd& x) const {
  Eigen::VectorXd out(state_dim);
  drift(alpha, x, out);
  return out;
}

Eigen::MatrixXd ParamModel::dispersion_at(const Eigen::VectorXd& alpha,
                                          const Eigen::VectorXd& x) const {
  Eigen::MatrixXd out(state_dim, noise_dim);
  dispersion(alpha, x, out);
  return out;
}

Functional Functional::zero(int) {
  Functional F;
  F.zeta2 = [](const Eigen::VectorXd&) { return 0.0; };
  F.zeta2_grad = [](const Eigen::VectorXd&, Eigen::RowVectorXd& g) {
    g.setZero();
  };
  return F;
}

Functional Functional::terminal(
    std::function<double(const Eigen::VectorXd&)> f,
    std::function<void(const Eigen::VectorXd&, Eigen::RowVectorXd&)> g) {
  Functional F;
  F.zeta2 = std::move(f);
  F.zeta2_grad = std::move(g);
  return F;
}

Functional Functional::terminal_quadratic(double constant, Eigen::VectorXd lin,
                                          Eigen::MatrixXd quad) {
  if (quad.size() > 0 && (quad.rows() != lin.size() || quad.cols() != lin.size()))
    throw ModelError("functional: quadratic term shape mismatch");
  auto linp = std::make_shared<Eigen::VectorXd>(std::move(lin));
  auto quadp = std::make_shared<Eigen::MatrixXd>(std::move(quad));
  Functional F;
  F.zeta2 = [constant, linp, quadp](const Eigen::VectorXd& x) {
    double v = constant + linp->dot(x);
    if (quadp->size() > 0) v += x.dot(*quadp * x);
    return v;
  };
  F.zeta2_grad = [linp, quadp](const Eigen::VectorXd& x, Eigen::RowVectorXd& g) {
    g = linp->transpose();
    if (quadp->size() > 0) g.noalias() += x.transpose() * (*quadp + quadp->transpose());
  };
  return F;
}

ParamModel make_rbm1d() {
  ParamModel m{
      .name = "rbm1d",
      .state_dim = 1,
      .noise_dim = 1,
      .param_dim = 3,
      .domain = Polyhedron::orthant(1),
      .reflection = ReflectionField::constant(Eigen::MatrixXd::Ones(1, 1), 3)};

  m.x0 = [](const Eigen::VectorXd& a, Eigen::VectorXd& out) { out(0) = a(0); };
  m.x0_jac = [](const Eigen::VectorXd&, Eigen::MatrixXd& out) {
    out << 1.0, 0.0, 0.0;
  };
  m.drift = [](const Eigen::VectorXd& a, const Eigen::VectorXd&,
               Eigen::VectorXd& out) { out(0) = a(1); };
  m.drift_alpha = [](const Eigen::VectorXd&, const Eigen::VectorXd&,
                     Eigen::MatrixXd& out) { out << 0.0, 1.0, 0.0; };
  m.drift_x = [](const Eigen::VectorXd&, const Eigen::VectorXd&,
                 Eigen::MatrixXd& out) { out(0, 0) = 0.0; };
  m.dispersion = [](const Eigen::VectorXd& a, const Eigen::VectorXd&,
                    Eigen::MatrixXd& out) { out(0, 0) = a(2); };
  m.dispersion_alpha = [](const Eigen::VectorXd&, const Eigen::VectorXd&,
                          std::vector<Eigen::MatrixXd>& out) {
    out[0](0, 0) = 0.0;
    out[1](0, 0) = 0.0;
    out[2](0, 0) = 1.0;
  };
  m.dispersion_x = [](const Eigen::VectorXd&, const Eigen::VectorXd&,
                      std::vector<Eigen::MatrixXd>& out) { out[0](0, 0) = 0.0; };

  // Only the drift coordinate keeps x0, sigma and R fixed.
  m.sigma_const_in_alpha = {true, true, false};
  m.x0_const_in_alpha = {false, true, true};
  m.R_const_in_alpha = {true, true, true};
  m.elliptic = true;
  return m;
}

double diversity(const Eigen::VectorXd& x, double p) {
  const double shift = x.maxCoeff();
  double num = 0.0, den = 0.0;
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    num += std::exp(p * (x(j) - shift));
    den += std::exp(x(j) - shift);
  }
  return num / std::pow(den, p);
}

Eigen::RowVectorXd diversity_grad(const Eigen::VectorXd& x, double p) {
  const double shift = x.maxCoeff();
  const Eigen::Index J = x.size();
  Eigen::VectorXd ex(J), epx(J);
  double den = 0.0, num = 0.0;
  for (Eigen::Index j = 0; j < J; ++j) {
    ex(j) = std::exp(x(j) - shift);
    epx(j) = std::exp(p * (x(j) - shift));
    den += ex(j);
    num += epx(j);
  }
  const double denp = std::pow(den, p);
  const double zeta = num / denp;
  Eigen::RowVectorXd g(J);
  for (Eigen::Index j = 0; j < J; ++j)
    g(j) = p * epx(j) / denp - p * zeta * ex(j) / den;
  return g;
}

std::pair<ParamModel, Functional> make_atlas_rbm(int dim, double sigma,
                                                 double p) {
  if (dim < 2) throw ModelError("atlas model needs at least two assets");
  if (!(sigma > 0.0)) throw ModelError("atlas model needs positive dispersion");
  if (!(p > 0.0 && p < 1.0)) throw ModelError("diversity exponent must lie in (0,1)");

  const int J = dim;
  const double sigma2 = sigma * sigma;

  Polyhedron chamber = Polyhedron::descending_chamber(J);
  ReflectionField normal_reflection =
      ReflectionField::constant(chamber.normals().transpose(), 1);
  ParamModel m{.name = "atlas_rbm",
               .state_dim = J,
               .noise_dim = J,
               .param_dim = 1,
               .domain = std::move(chamber),
               .reflection = std::move(normal_reflection)};

  m.x0 = [](const Eigen::VectorXd&, Eigen::VectorXd& out) { out.setZero(); };
  m.x0_jac = [](const Eigen::VectorXd&, Eigen::MatrixXd& out) { out.setZero(); };
  m.drift = [J, sigma2](const Eigen::VectorXd& a, const Eigen::VectorXd&,
                        Eigen::VectorXd& out) {
    out.setZero();
    out(J - 1) = J * sigma2 / (2.0 * a(0));  // J * g(alpha), Atlas stock only
  };
  m.drift_alpha = [J, sigma2](const Eigen::VectorXd& a, const Eigen::VectorXd&,
                              Eigen::MatrixXd& out) {
    out.setZero();
    out(J - 1, 0) = -J * sigma2 / (2.0 * a(0) * a(0));
  };
  m.drift_x = [](const Eigen::VectorXd&, const Eigen::VectorXd&,
                 Eigen::MatrixXd& out) { out.setZero(); };
  m.dispersion = [sigma](const Eigen::VectorXd&, const Eigen::VectorXd&,
                         Eigen::MatrixXd& out) {
    out.setZero();
    out.diagonal().setConstant(sigma);
  };
  m.dispersion_alpha = [](const Eigen::VectorXd&, const Eigen::VectorXd&,
                          std::vector<Eigen::MatrixXd>& out) {
    for (auto& g : out) g.setZero();
  };
  m.dispersion_x = [](const Eigen::VectorXd&, const Eigen::VectorXd&,
                      std::vector<Eigen::MatrixXd>& out) {
    for (auto& g : out) g.setZero();
  };

  m.sigma_const_in_alpha = {true};
  m.x0_const_in_alpha = {true};
  m.R_const_in_alpha = {true};
  m.elliptic = true;

  Functional F = Functional::terminal(
      [p](const Eigen::VectorXd& x) { return diversity(x, p); },
      [p](const Eigen::VectorXd& x, Eigen::RowVectorXd& g) {
        g = diversity_grad(x, p);
      });
  return {std::move(m), std::move(F)};
}

SdeModel make_atlas_sde(int dim, double sigma, double growth) {
  if (dim < 2) throw ModelError("atlas model needs at least two assets");
  SdeModel m;
  m.name = "atlas_sde";
  m.state_dim = dim;
  m.noise_dim = dim;
  m.x0 = Eigen::VectorXd::Zero(dim);
  m.sigma = sigma;
  m.drift = [dim, growth](const Eigen::VectorXd& x, Eigen::VectorXd& out) {
    out.setZero();
    // Only a strictly smallest coordinate earns the Atlas growth; grid-time
    // ties get none.
    Eigen::Index arg = 0;
    const double lo = x.minCoeff(&arg);
    int count = 0;
    for (Eigen::Index j = 0; j < x.size(); ++j)
      if (x(j) == lo) ++count;
    if (count == 1) out(arg) = dim * growth;
  };
  return m;
}

Eigen::VectorXd rank_descending(const Eigen::VectorXd& x) {
  Eigen::VectorXd sorted = x;
  std::stable_sort(sorted.data(), sorted.data() + sorted.size(),
                   [](double a, double b) { return a > b; });
  return sorted;
}

Eigen::MatrixXd simulate_sde(const SdeModel& model, double delta, long steps,
                             NoiseSource& noise) {
  const int J = model.state_dim;
  Eigen::MatrixXd states(J, steps + 1);
  states.col(0) = model.x0;
  Eigen::VectorXd x = model.x0, b(J), dw(model.noise_dim);
  for (long n = 1; n <= steps; ++n) {
    noise.next_increment(dw);
    model.drift(x, b);
    x += b * delta + model.sigma * dw;
    states.col(n) = x;
  }
  return states;
}

ParamModel make_affine_model(AffineModelSpec spec) {
  const int J = spec.domain.dim();
  const int N = spec.domain.num_faces();
  const int K = spec.noise_dim;
  const int M = spec.param_dim;
  if (K < 1 || M < 1) throw ModelError("affine model: dimensions must be positive");

  auto shape = [](const Eigen::MatrixXd& m, Eigen::Index r, Eigen::Index c,
                  const char* what) {
    if (m.rows() != r || m.cols() != c)
      throw ModelError(std::string("affine model: bad shape for ") + what);
  };
  shape(spec.R_base, J, N, "reflection base");
  for (const auto& s : spec.R_alpha) shape(s, J, N, "reflection slope");
  if (!spec.R_alpha.empty() && static_cast<int>(spec.R_alpha.size()) != M)
    throw ModelError("affine model: reflection slope count mismatch");
  if (spec.x0_base.size() != J) throw ModelError("affine model: bad shape for x0");
  shape(spec.x0_alpha, J, M, "x0 slope");
  if (spec.b_base.size() != J) throw ModelError("affine model: bad shape for drift");
  shape(spec.b_alpha, J, M, "drift alpha slope");
  shape(spec.b_x, J, J, "drift state slope");
  shape(spec.sigma_base, J, K, "dispersion base");
  for (const auto& s : spec.sigma_alpha) shape(s, J, K, "dispersion slope");
  if (!spec.sigma_alpha.empty() && static_cast<int>(spec.sigma_alpha.size()) != M)
    throw ModelError("affine model: dispersion slope count mismatch");

  auto d = std::make_shared<const AffineModelSpec>(std::move(spec));

  ParamModel m{.name = d->name,
               .state_dim = J,
               .noise_dim = K,
               .param_dim = M,
               .domain = d->domain,
               .reflection =
                   d->R_alpha.empty()
                       ? ReflectionField::constant(d->R_base, M)
                       : ReflectionField::affine(d->R_base, d->R_alpha)};

  m.x0 = [d](const Eigen::VectorXd& a, Eigen::VectorXd& out) {
    out = d->x0_base;
    out.noalias() += d->x0_alpha * a;
  };
  m.x0_jac = [d](const Eigen::VectorXd&, Eigen::MatrixXd& out) {
    out = d->x0_alpha;
  };
  m.drift = [d](const Eigen::VectorXd& a, const Eigen::VectorXd& x,
                Eigen::VectorXd& out) {
    out = d->b_base;
    out.noalias() += d->b_alpha * a;
    out.noalias() += d->b_x * x;
  };
  m.drift_alpha = [d](const Eigen::VectorXd&, const Eigen::VectorXd&,
                      Eigen::MatrixXd& out) { out = d->b_alpha; };
  m.drift_x = [d](const Eigen::VectorXd&, const Eigen::VectorXd&,
                  Eigen::MatrixXd& out) { out = d->b_x; };
  m.dispersion = [d](const Eigen::VectorXd& a, const Eigen::VectorXd&,
                     Eigen::MatrixXd& out) {
    out = d->sigma_base;
    for (size_t i = 0; i < d->sigma_alpha.size(); ++i)
      out += a(static_cast<Eigen::Index>(i)) * d->sigma_alpha[i];
  };
  m.dispersion_alpha = [d, J, K](const Eigen::VectorXd&, const Eigen::VectorXd&,
                                 std::vector<Eigen::MatrixXd>& out) {
    for (size_t i = 0; i < out.size(); ++i) {
      if (i < d->sigma_alpha.size())
        out[i] = d->sigma_alpha[i];
      else
        out[i].setZero();
    }
  };
  m.dispersion_x = [](const Eigen::VectorXd&, const Eigen::VectorXd&,
                      std::vector<Eigen::MatrixXd>& out) {
    for (auto& g : out) g.setZero();
  };

  m.sigma_const_in_alpha.resize(M);
  m.x0_const_in_alpha.resize(M);
  m.R_const_in_alpha.resize(M);
  for (int i = 0; i < M; ++i) {
    m.sigma_const_in_alpha[i] =
        d->sigma_alpha.empty() || d->sigma_alpha[i].isZero(0.0);
    m.x0_const_in_alpha[i] = d->x0_alpha.col(i).isZero(0.0);
    m.R_const_in_alpha[i] = d->R_alpha.empty() || d->R_alpha[i].isZero(0.0);
  }
  m.elliptic = d->elliptic;
  return m;
}

}  // namespace rdsens
