#pragma once

#include <Eigen/Dense>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "rdsens/geometry.hpp"
#include "rdsens/rng.hpp"

namespace rdsens {

/// Parameterized reflected-diffusion model: domain, reflection field, and
/// coefficients x0, b, sigma with all first derivatives.
///
/// Coefficient callbacks fill caller-provided storage so the simulation
/// loop stays allocation free. Shapes, with J = state dim, K = noise dim,
/// M = parameter dim, N = faces:
///   x0: J            x0_jac: J x M
///   drift: J         drift_alpha: J x M    drift_x: J x J
///   dispersion: JxK  dispersion_alpha: M matrices J x K
///                    dispersion_x: J matrices J x K (one per state
///                    coordinate; applied as directional derivatives)
struct ParamModel {
  std::string name;
  int state_dim = 0;  // J
  int noise_dim = 0;  // K
  int param_dim = 0;  // M

  Polyhedron domain;
  ReflectionField reflection;

  std::function<void(const Eigen::VectorXd&, Eigen::VectorXd&)> x0;
  std::function<void(const Eigen::VectorXd&, Eigen::MatrixXd&)> x0_jac;
  std::function<void(const Eigen::VectorXd&, const Eigen::VectorXd&,
                     Eigen::VectorXd&)>
      drift;
  std::function<void(const Eigen::VectorXd&, const Eigen::VectorXd&,
                     Eigen::MatrixXd&)>
      drift_alpha;
  std::function<void(const Eigen::VectorXd&, const Eigen::VectorXd&,
                     Eigen::MatrixXd&)>
      drift_x;
  std::function<void(const Eigen::VectorXd&, const Eigen::VectorXd&,
                     Eigen::MatrixXd&)>
      dispersion;
  std::function<void(const Eigen::VectorXd&, const Eigen::VectorXd&,
                     std::vector<Eigen::MatrixXd>&)>
      dispersion_alpha;
  std::function<void(const Eigen::VectorXd&, const Eigen::VectorXd&,
                     std::vector<Eigen::MatrixXd>&)>
      dispersion_x;

  // Per-coordinate eligibility data for the likelihood-ratio estimator:
  // parameter coordinate m qualifies only when sigma, x0 and R do not vary
  // in alpha_m. Ellipticity of sigma*sigma^T is asserted by the model
  // author, not verified.
  std::vector<bool> sigma_const_in_alpha;
  std::vector<bool> x0_const_in_alpha;
  std::vector<bool> R_const_in_alpha;
  bool elliptic = false;

  bool lr_eligible(int m) const {
    return elliptic && sigma_const_in_alpha.at(m) && x0_const_in_alpha.at(m) &&
           R_const_in_alpha.at(m);
  }

  int num_faces() const { return domain.num_faces(); }

  // Allocating conveniences for tests and one-off evaluations.
  Eigen::VectorXd x0_at(const Eigen::VectorXd& alpha) const;
  Eigen::MatrixXd x0_jac_at(const Eigen::VectorXd& alpha) const;
  Eigen::VectorXd drift_at(const Eigen::VectorXd& alpha,
                           const Eigen::VectorXd& x) const;
  Eigen::MatrixXd dispersion_at(const Eigen::VectorXd& alpha,
                                const Eigen::VectorXd& x) const;
};

/// Path functional Theta = E[ integral of zeta1(Z(s)) ds + zeta2(Z(t)) ].
/// Gradients are row vectors.
struct Functional {
  std::function<double(const Eigen::VectorXd&)> zeta1;
  std::function<void(const Eigen::VectorXd&, Eigen::RowVectorXd&)> zeta1_grad;
  std::function<double(const Eigen::VectorXd&)> zeta2;
  std::function<void(const Eigen::VectorXd&, Eigen::RowVectorXd&)> zeta2_grad;

  /// zeta1 = zeta2 = 0.
  static Functional zero(int state_dim);

  /// zeta1 = 0, zeta2 = f with gradient g.
  static Functional terminal(std::function<double(const Eigen::VectorXd&)> f,
                             std::function<void(const Eigen::VectorXd&,
                                                Eigen::RowVectorXd&)>
                                 g);

  /// zeta1 = 0, zeta2(x) = c + <lin, x> + x^T quad x.
  static Functional terminal_quadratic(double constant, Eigen::VectorXd lin,
                                       Eigen::MatrixXd quad);
};

/// Unconstrained SDE companion model (drift may be discontinuous); the
/// dispersion is a constant scalar per coordinate.
struct SdeModel {
  std::string name;
  int state_dim = 0;
  int noise_dim = 0;
  Eigen::VectorXd x0;
  std::function<void(const Eigen::VectorXd&, Eigen::VectorXd&)> drift;
  double sigma = 0.0;
};

/// One-dimensional reflected Brownian motion on [0, inf) with parameter
/// vector alpha = (initial point, drift, dispersion): x0 = alpha_1,
/// b = alpha_2, sigma = alpha_3, unit direction of reflection at 0.
ParamModel make_rbm1d();

/// Ranked Atlas market as a reflected Brownian motion in the descending
/// chamber of R^J: the lowest-ranked coordinate gets drift J*g(alpha) with
/// g(alpha) = sigma^2/(2*alpha), dispersion sigma*I, normal reflection on
/// the J-1 rank-tie faces, started from 0. The functional is the p-th
/// diversity power zeta(x) = sum_j e^{p x^j} / (sum_j e^{x^j})^p.
std::pair<ParamModel, Functional> make_atlas_rbm(int dim, double sigma,
                                                 double p);

/// Atlas market in log-capitalization coordinates: coordinate j has drift
/// J*g while it is the strict minimum (ties get zero drift) and constant
/// dispersion sigma.
SdeModel make_atlas_sde(int dim, double sigma, double growth);

/// Sorted copy of x, descending, stable.
Eigen::VectorXd rank_descending(const Eigen::VectorXd& x);

/// Diversity functional used by the Atlas models.
double diversity(const Eigen::VectorXd& x, double p);
Eigen::RowVectorXd diversity_grad(const Eigen::VectorXd& x, double p);

/// Euler path of an unconstrained SdeModel; returns states with one column
/// per grid point (steps+1 columns).
Eigen::MatrixXd simulate_sde(const SdeModel& model, double delta, long steps,
                             NoiseSource& noise);

/// Data for models whose coefficients are affine in (alpha, x):
///   x0(alpha)      = x0_base + x0_alpha * alpha
///   b(alpha, x)    = b_base + b_alpha * alpha + b_x * x
///   sigma(alpha)   = sigma_base + sum_m alpha_m * sigma_alpha[m]
///   R(alpha)       = R_base + sum_m alpha_m * R_alpha[m]
/// Absent slope terms mean the coefficient is constant.
struct AffineModelSpec {
  std::string name = "custom";
  Polyhedron domain;
  int noise_dim = 0;
  int param_dim = 0;
  Eigen::MatrixXd R_base;
  std::vector<Eigen::MatrixXd> R_alpha;  // empty or size M
  Eigen::VectorXd x0_base;
  Eigen::MatrixXd x0_alpha;  // J x M (zero allowed)
  Eigen::VectorXd b_base;
  Eigen::MatrixXd b_alpha;  // J x M
  Eigen::MatrixXd b_x;      // J x J
  Eigen::MatrixXd sigma_base;
  std::vector<Eigen::MatrixXd> sigma_alpha;  // empty or size M
  bool elliptic = true;
};

/// Builds a ParamModel from affine coefficient data (shape-checked).
ParamModel make_affine_model(AffineModelSpec spec);

}  // namespace rdsens
