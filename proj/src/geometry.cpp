#include "rdsens/geometry.hpp"

#include <Eigen/LU>
#include <algorithm>
#include <bit>
#include <cmath>
#include <memory>
#include <sstream>

namespace rdsens {

namespace {

constexpr double kUnitNormalTol = 1e-12;
constexpr double kDirectionNormTol = 1e-10;
constexpr double kMultiplierClamp = 1e-12;
constexpr double kRcondThreshold = 1e-12;

std::string face_msg(const char* what, int i, double value) {
  std::ostringstream os;
  os << what << " (face " << i << ", value " << value << ")";
  return os.str();
}

// Reciprocal condition estimate (1-norm) of the leading k x k block.
double rcond_block(const Eigen::MatrixXd& m, int k) {
  if (k == 1) return m(0, 0) == 0.0 ? 0.0 : 1.0;
  if (k == 2) {
    const double a = m(0, 0), b = m(0, 1), c = m(1, 0), d = m(1, 1);
    const double det = a * d - b * c;
    if (det == 0.0) return 0.0;
    const double n1 = std::max(std::abs(a) + std::abs(c), std::abs(b) + std::abs(d));
    const double ni = std::max(std::abs(d) + std::abs(c), std::abs(b) + std::abs(a));
    return std::abs(det) / (n1 * ni);
  }
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(m.topLeftCorner(k, k));
  const double rc = lu.rcond();
  return std::isfinite(rc) ? rc : 0.0;
}

}  // namespace

Polyhedron::Polyhedron(Eigen::MatrixXd normals, Eigen::VectorXd offsets,
                       Eigen::VectorXd interior_point)
    : normals_(std::move(normals)),
      offsets_(std::move(offsets)),
      interior_point_(std::move(interior_point)) {
  const auto N = normals_.rows();
  const auto J = normals_.cols();
  if (J < 1 || N < 1) throw ModelError("polyhedron needs at least one face and one dimension");
  if (offsets_.size() != N) throw ModelError("polyhedron: offsets size mismatch");
  if (interior_point_.size() != J)
    throw ModelError("polyhedron: interior point dimension mismatch");
  for (int i = 0; i < N; ++i) {
    const double len = normals_.row(i).norm();
    if (std::abs(len - 1.0) > kUnitNormalTol)
      throw ModelError(face_msg("polyhedron: normal is not unit length", i, len));
    const double s = slack(i, interior_point_);
    if (!(s > 0.0))
      throw ModelError(face_msg("polyhedron: interior point is not strictly interior", i, s));
  }
}

bool Polyhedron::contains(const Eigen::VectorXd& x, double tol) const {
  for (int i = 0; i < num_faces(); ++i)
    if (slack(i, x) < -tol) return false;
  return true;
}

Polyhedron Polyhedron::orthant(int dim) {
  return Polyhedron(Eigen::MatrixXd::Identity(dim, dim),
                    Eigen::VectorXd::Zero(dim), Eigen::VectorXd::Ones(dim));
}

Polyhedron Polyhedron::descending_chamber(int dim) {
  if (dim < 2) throw ModelError("descending chamber needs dimension >= 2");
  const int faces = dim - 1;
  Eigen::MatrixXd normals = Eigen::MatrixXd::Zero(faces, dim);
  const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
  for (int i = 0; i < faces; ++i) {
    normals(i, i) = inv_sqrt2;
    normals(i, i + 1) = -inv_sqrt2;
  }
  Eigen::VectorXd interior(dim);
  for (int j = 0; j < dim; ++j) interior(j) = static_cast<double>(dim - j);
  return Polyhedron(normals, Eigen::VectorXd::Zero(faces), interior);
}

ActiveSet active_set(const Polyhedron& P, const Eigen::VectorXd& x, double tol) {
  ActiveSet result;
  result.tol = tol;
  for (int i = 0; i < P.num_faces(); ++i) {
    const double s = P.slack(i, x);
    if (s < -tol)
      throw PointOutsideDomain(face_msg("active_set: point outside domain", i, s));
    if (s <= tol) result.indices.push_back(i);
  }
  return result;
}

ReflectionField ReflectionField::constant(Eigen::MatrixXd R, int param_dim) {
  const auto rows = R.rows();
  const auto cols = R.cols();
  return ReflectionField(
      [R = std::move(R)](const Eigen::VectorXd&) { return R; },
      [rows, cols, param_dim](const Eigen::VectorXd&) {
        return std::vector<Eigen::MatrixXd>(
            param_dim, Eigen::MatrixXd::Zero(rows, cols));
      },
      param_dim);
}

ReflectionField ReflectionField::affine(Eigen::MatrixXd base,
                                        std::vector<Eigen::MatrixXd> slopes) {
  for (const auto& s : slopes)
    if (s.rows() != base.rows() || s.cols() != base.cols())
      throw ModelError("reflection field: slope shape mismatch");
  const int M = static_cast<int>(slopes.size());
  auto slopes_ptr = std::make_shared<std::vector<Eigen::MatrixXd>>(std::move(slopes));
  return ReflectionField(
      [base, slopes_ptr](const Eigen::VectorXd& alpha) {
        Eigen::MatrixXd R = base;
        for (size_t m = 0; m < slopes_ptr->size(); ++m)
          R += alpha(static_cast<Eigen::Index>(m)) * (*slopes_ptr)[m];
        return R;
      },
      [slopes_ptr](const Eigen::VectorXd&) { return *slopes_ptr; }, M);
}

void validate_reflection_matrix(const Polyhedron& P, const Eigen::MatrixXd& R) {
  if (R.rows() != P.dim() || R.cols() != P.num_faces())
    throw ModelError("reflection matrix shape mismatch");
  for (int i = 0; i < P.num_faces(); ++i) {
    const double v = P.normals().row(i).dot(R.col(i));
    if (std::abs(v - 1.0) > kDirectionNormTol)
      throw ModelError(face_msg("reflection direction not normalized against its face", i, v));
  }
}

uint32_t to_mask(const ActiveSet& A) {
  uint32_t mask = 0;
  for (int i : A.indices) mask |= (1u << i);
  return mask;
}

ActiveSet from_mask(uint32_t mask, double tol) {
  ActiveSet A;
  A.tol = tol;
  for (int i = 0; mask != 0; ++i, mask >>= 1)
    if (mask & 1u) A.indices.push_back(i);
  return A;
}

Projector::Projector(const Polyhedron& P, Eigen::MatrixXd R)
    : domain_(P), R_(std::move(R)) {
  const int N = P.num_faces();
  const int J = P.dim();
  if (R_.rows() != J || R_.cols() != N)
    throw ModelError("projector: reflection matrix shape mismatch");
  if (N > kMaxEnumeratedFaces)
    throw ConfigError("projector: active-set enumeration supports at most " +
                      std::to_string(kMaxEnumeratedFaces) + " faces");
  normal_dot_dir_.noalias() = P.normals() * R_;

  const int max_size = std::min(N, J);
  for (uint32_t mask = 1; mask < (1u << N); ++mask)
    if (std::popcount(mask) <= max_size) subsets_.push_back(mask);
  std::sort(subsets_.begin(), subsets_.end(), [](uint32_t a, uint32_t b) {
    const int pa = std::popcount(a), pb = std::popcount(b);
    return pa != pb ? pa < pb : a < b;
  });

  slack_.resize(N);
  sys_.resize(max_size, max_size);
  rhs_.resize(max_size);
  sol_.resize(max_size);
  cand_.resize(J);
}

void Projector::project_into(const Eigen::VectorXd& x,
                             Eigen::Ref<Eigen::VectorXd> z,
                             Eigen::Ref<Eigen::VectorXd> xi,
                             uint32_t& active_mask) const {
  const int N = domain_.num_faces();
  domain_.slacks(x, slack_);

  xi.setZero();
  active_mask = 0;
  if (slack_.minCoeff() >= 0.0) {  // already in the domain
    z = x;
    return;
  }

  const double feas_tol = 1e-9 * (1.0 + x.norm());
  bool saw_singular = false;
  int idx[kMaxEnumeratedFaces];

  for (const uint32_t mask : subsets_) {
    const int k = std::popcount(mask);
    {
      int a = 0;
      for (int i = 0; i < N; ++i)
        if (mask & (1u << i)) idx[a++] = i;
    }
    for (int a = 0; a < k; ++a) {
      rhs_(a) = -slack_(idx[a]);
      for (int b = 0; b < k; ++b) sys_(a, b) = normal_dot_dir_(idx[a], idx[b]);
    }

    if (rcond_block(sys_, k) < kRcondThreshold) {
      saw_singular = true;
      continue;
    }
    if (k == 1) {
      sol_(0) = rhs_(0) / sys_(0, 0);
    } else if (k == 2) {
      const double det = sys_(0, 0) * sys_(1, 1) - sys_(0, 1) * sys_(1, 0);
      sol_(0) = (rhs_(0) * sys_(1, 1) - sys_(0, 1) * rhs_(1)) / det;
      sol_(1) = (sys_(0, 0) * rhs_(1) - rhs_(0) * sys_(1, 0)) / det;
    } else {
      sol_.head(k) = sys_.topLeftCorner(k, k).partialPivLu().solve(rhs_.head(k));
    }

    // Multipliers must be nonnegative; values in (-clamp, 0] are numerical
    // noise and get dropped rather than produce spurious active faces.
    bool feasible = true;
    for (int a = 0; a < k; ++a) {
      if (sol_(a) < -kMultiplierClamp) {
        feasible = false;
        break;
      }
      if (sol_(a) <= 0.0) sol_(a) = 0.0;
    }
    if (!feasible) continue;

    cand_ = x;
    for (int a = 0; a < k; ++a)
      if (sol_(a) > 0.0) cand_ += sol_(a) * R_.col(idx[a]);

    feasible = true;
    for (int i = 0; i < N; ++i) {
      if (domain_.slack(i, cand_) < -feas_tol) {
        feasible = false;
        break;
      }
    }
    if (!feasible) continue;

    z = cand_;
    for (int a = 0; a < k; ++a) {
      if (sol_(a) > 0.0) {
        xi(idx[a]) = sol_(a);
        active_mask |= (1u << idx[a]);
      }
    }
    return;
  }

  if (saw_singular)
    throw RankDeficientActiveSet(
        "projection: a candidate active-set system was rank deficient and no "
        "other active set was feasible");
  throw NoFeasibleProjection(
      "projection: no active set yields a feasible complementarity solution");
}

Projection Projector::project(const Eigen::VectorXd& x) const {
  Projection result;
  result.point.resize(domain_.dim());
  result.multipliers.resize(domain_.num_faces());
  uint32_t mask = 0;
  project_into(x, result.point, result.multipliers, mask);
  result.active = from_mask(mask);
  return result;
}

Projection project(const Polyhedron& P, const Eigen::MatrixXd& R,
                   const Eigen::VectorXd& x) {
  return Projector(P, R).project(x);
}

Eigen::MatrixXd derivative_projection(const Polyhedron& P,
                                      const Eigen::MatrixXd& R,
                                      const ActiveSet& A) {
  const int J = P.dim();
  if (A.empty()) return Eigen::MatrixXd::Identity(J, J);

  const int k = A.size();
  Eigen::MatrixXd dirs(J, k);   // D_A
  Eigen::MatrixXd norms(k, J);  // N_A^T
  for (int a = 0; a < k; ++a) {
    const int i = A.indices[static_cast<size_t>(a)];
    if (i < 0 || i >= P.num_faces())
      throw GeometryError("derivative_projection: face index out of range");
    dirs.col(a) = R.col(i);
    norms.row(a) = P.normals().row(i);
  }

  Eigen::MatrixXd sys(k, k);
  sys.noalias() = norms * dirs;
  if (rcond_block(sys, k) < kRcondThreshold)
    throw SingularActiveSystem(
        "derivative_projection: active normal/direction system is singular");

  Eigen::MatrixXd L = Eigen::MatrixXd::Identity(J, J);
  L.noalias() -= dirs * sys.partialPivLu().solve(norms);
  return L;
}

const Eigen::MatrixXd& DerivativeProjectionCache::get(uint32_t active_mask) const {
  auto it = cache_.find(active_mask);
  if (it == cache_.end()) {
    it = cache_
             .emplace(active_mask,
                      derivative_projection(domain_, R_, from_mask(active_mask)))
             .first;
  }
  return it->second;
}

}  // namespace rdsens
