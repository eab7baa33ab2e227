#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <unordered_map>
#include <vector>

#include "rdsens/errors.hpp"

namespace rdsens {

/// Convex polyhedral domain G = { x : <x, n_i> >= c_i, i = 1..N } with unit
/// inward normals n_i. Face indices are 0-based throughout the library.
class Polyhedron {
 public:
  /// normals: one row per face (unit length within 1e-12); offsets: c_i;
  /// interior_point: strictly inside, used for validation only.
  /// Throws ModelError if the data violates these requirements.
  Polyhedron(Eigen::MatrixXd normals, Eigen::VectorXd offsets,
             Eigen::VectorXd interior_point);

  int dim() const { return static_cast<int>(normals_.cols()); }
  int num_faces() const { return static_cast<int>(normals_.rows()); }

  const Eigen::MatrixXd& normals() const { return normals_; }
  const Eigen::VectorXd& offsets() const { return offsets_; }
  const Eigen::VectorXd& interior_point() const { return interior_point_; }

  /// <x, n_i> - c_i for one face.
  double slack(int i, const Eigen::VectorXd& x) const {
    return normals_.row(i).dot(x) - offsets_(i);
  }

  /// out <- all face slacks of x.
  void slacks(const Eigen::VectorXd& x, Eigen::Ref<Eigen::VectorXd> out) const {
    out.noalias() = normals_ * x;
    out -= offsets_;
  }

  bool contains(const Eigen::VectorXd& x, double tol = 0.0) const;

  /// Nonnegative orthant in R^J (n_i = e_i, c_i = 0).
  static Polyhedron orthant(int dim);

  /// Descending-order chamber { x^1 >= x^2 >= ... >= x^J } with the J-1
  /// faces { x^i = x^{i+1} } and unit normals (e_i - e_{i+1})/sqrt(2).
  static Polyhedron descending_chamber(int dim);

 private:
  Eigen::MatrixXd normals_;  // N x J
  Eigen::VectorXd offsets_;
  Eigen::VectorXd interior_point_;
};

/// Set of faces a point lies on, at the tolerance used to detect them.
struct ActiveSet {
  std::vector<int> indices;  // sorted ascending
  double tol = 0.0;

  bool empty() const { return indices.empty(); }
  int size() const { return static_cast<int>(indices.size()); }
};

/// State-scaled face-detection tolerance.
inline double boundary_tolerance(const Eigen::VectorXd& x) {
  return 1e-9 * (1.0 + x.norm());
}

/// Faces within `tol` of x: { i : <x, n_i> - c_i <= tol }.
/// Throws PointOutsideDomain if some slack is below -tol.
ActiveSet active_set(const Polyhedron& P, const Eigen::VectorXd& x, double tol);

/// Parameter-dependent reflection matrix R(alpha) (J x N, one direction of
/// reflection per face, normalized so <d_i, n_i> = 1) together with its
/// Jacobian in alpha, stored as one J x N matrix per parameter coordinate.
class ReflectionField {
 public:
  using Eval = std::function<Eigen::MatrixXd(const Eigen::VectorXd&)>;
  using Jacobian =
      std::function<std::vector<Eigen::MatrixXd>(const Eigen::VectorXd&)>;

  ReflectionField(Eval eval, Jacobian jacobian, int param_dim)
      : eval_(std::move(eval)),
        jacobian_(std::move(jacobian)),
        param_dim_(param_dim) {}

  Eigen::MatrixXd eval(const Eigen::VectorXd& alpha) const { return eval_(alpha); }
  std::vector<Eigen::MatrixXd> jacobian(const Eigen::VectorXd& alpha) const {
    return jacobian_(alpha);
  }
  int param_dim() const { return param_dim_; }

  /// R independent of alpha (zero Jacobian).
  static ReflectionField constant(Eigen::MatrixXd R, int param_dim);

  /// R(alpha) = base + sum_m alpha_m * slope[m].
  static ReflectionField affine(Eigen::MatrixXd base,
                                std::vector<Eigen::MatrixXd> slopes);

 private:
  Eval eval_;
  Jacobian jacobian_;
  int param_dim_;
};

/// Throws ModelError unless <d_i, n_i> = 1 within 1e-10 for every column of R.
void validate_reflection_matrix(const Polyhedron& P, const Eigen::MatrixXd& R);

/// Result of the constrained projection: z in G, multipliers xi >= 0 with
/// z - x = R*xi, and the active set reported by the solve itself (faces
/// whose multiplier is positive after clamping).
struct Projection {
  Eigen::VectorXd point;
  Eigen::VectorXd multipliers;
  ActiveSet active;
};

/// Oblique constrained projection of x onto G along the columns of R,
/// solved as a linear complementarity problem by active-set enumeration
/// ordered by active-set size.
///
/// Exact for the face counts used here; a pivoting method would be the
/// extension point beyond kMaxEnumeratedFaces.
class Projector {
 public:
  static constexpr int kMaxEnumeratedFaces = 12;

  /// Throws ConfigError if P has more than kMaxEnumeratedFaces faces.
  Projector(const Polyhedron& P, Eigen::MatrixXd R);

  /// project_into with freshly allocated outputs.
  Projection project(const Eigen::VectorXd& x) const;

  /// Core solve. active_mask gets bit i set for each face reported active.
  /// Throws NoFeasibleProjection / RankDeficientActiveSet on failure.
  void project_into(const Eigen::VectorXd& x, Eigen::Ref<Eigen::VectorXd> z,
                    Eigen::Ref<Eigen::VectorXd> xi, uint32_t& active_mask) const;

  const Polyhedron& domain() const { return domain_; }
  const Eigen::MatrixXd& reflection() const { return R_; }

 private:
  const Polyhedron& domain_;
  Eigen::MatrixXd R_;
  Eigen::MatrixXd normal_dot_dir_;  // N x N, entries <n_i, d_j>
  std::vector<uint32_t> subsets_;   // bitmasks ordered by popcount, then value

  // scratch (mutable: project_into is logically const and single-threaded
  // per Projector instance; use one Projector per thread)
  mutable Eigen::VectorXd slack_;
  mutable Eigen::MatrixXd sys_;
  mutable Eigen::VectorXd rhs_, sol_, cand_;
};

/// One-shot convenience wrapper around Projector.
Projection project(const Polyhedron& P, const Eigen::MatrixXd& R,
                   const Eigen::VectorXd& x);

/// Matrix of the linear map that fixes the intersection of the active
/// tangent hyperplanes and corrects along the active reflection directions:
///   L = I - D_A (N_A^T D_A)^{-1} N_A^T, identity for an empty active set.
/// Throws SingularActiveSystem when the reciprocal condition estimate of
/// N_A^T D_A falls below 1e-12.
Eigen::MatrixXd derivative_projection(const Polyhedron& P,
                                      const Eigen::MatrixXd& R,
                                      const ActiveSet& A);

/// Cache of derivative projection matrices keyed by active-set bitmask, for
/// one fixed (domain, R) pair.
class DerivativeProjectionCache {
 public:
  DerivativeProjectionCache(const Polyhedron& P, Eigen::MatrixXd R)
      : domain_(P), R_(std::move(R)) {}

  const Eigen::MatrixXd& get(uint32_t active_mask) const;

 private:
  const Polyhedron& domain_;
  Eigen::MatrixXd R_;
  mutable std::unordered_map<uint32_t, Eigen::MatrixXd> cache_;
};

/// Bitmask helpers for active sets with at most 32 faces.
uint32_t to_mask(const ActiveSet& A);
ActiveSet from_mask(uint32_t mask, double tol = 0.0);

}  // namespace rdsens
