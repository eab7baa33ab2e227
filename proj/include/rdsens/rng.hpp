#pragma once

#include <Eigen/Dense>
#include <cstdint>

namespace rdsens {

/// Quantile function of the standard normal distribution (inverse CDF),
/// evaluated with Wichura's AS 241 rational approximations (double
/// precision, relative error below 1e-15 over (0,1)).
double inverse_normal_cdf(double p);

/// Counter-based uniform generator: Philox4x32-10.
///
/// Each 128-bit block is a pure function of (key, counter), so streams can
/// be split by embedding a stream id in the counter. No state is carried
/// between blocks beyond the block index.
struct Philox4x32 {
  uint32_t key[2];

  /// out <- 4x32 random bits for counter (c0,c1,c2,c3).
  void block(uint32_t c0, uint32_t c1, uint32_t c2, uint32_t c3,
             uint32_t out[4]) const;
};

/// Reproducible per-trial stream of standard normal variates.
///
/// The k-th variate is a deterministic function of (master_seed,
/// trial_index, k): Philox keyed by the seed, with the trial index in the
/// upper counter words and the block index in the lower ones. Two variates
/// are drawn per block via 53-bit uniforms mapped through the normal
/// inverse CDF, so results are identical across platforms and across any
/// scheduling of trials.
class GaussianStream {
 public:
  GaussianStream(uint64_t master_seed, uint64_t trial_index);

  double next();                                   ///< one standard normal
  void fill(Eigen::Ref<Eigen::VectorXd> out);      ///< K standard normals

  void reset() { block_ = 0; have_buffered_ = false; }

  uint64_t master_seed() const { return master_seed_; }
  uint64_t trial_index() const { return trial_index_; }

 private:
  Philox4x32 gen_;
  uint64_t master_seed_;
  uint64_t trial_index_;
  uint64_t block_ = 0;
  double buffered_ = 0.0;
  bool have_buffered_ = false;
};

/// Source of per-step Brownian increments for one simulated path.
class NoiseSource {
 public:
  virtual ~NoiseSource() = default;
  /// out <- increment of the driving Brownian motion over one time step.
  virtual void next_increment(Eigen::Ref<Eigen::VectorXd> out) = 0;
};

/// N(0, delta*I_K) increments drawn from a GaussianStream.
class GaussianIncrements final : public NoiseSource {
 public:
  GaussianIncrements(GaussianStream stream, double delta)
      : stream_(stream), sqrt_delta_(std::sqrt(delta)) {}

  void next_increment(Eigen::Ref<Eigen::VectorXd> out) override {
    stream_.fill(out);
    out *= sqrt_delta_;
  }

 private:
  GaussianStream stream_;
  double sqrt_delta_;
};

/// Coarse-grid increments formed by summing `factor` consecutive fine-grid
/// increments, so coarse and fine paths share one Brownian motion.
class AggregatedIncrements final : public NoiseSource {
 public:
  AggregatedIncrements(GaussianStream stream, double delta_fine, int factor)
      : fine_(stream, delta_fine), factor_(factor) {}

  void next_increment(Eigen::Ref<Eigen::VectorXd> out) override {
    out.setZero();
    Eigen::VectorXd step(out.size());
    for (int r = 0; r < factor_; ++r) {
      fine_.next_increment(step);
      out += step;
    }
  }

 private:
  GaussianIncrements fine_;
  int factor_;
};

/// Plays back a fixed list of increments (one column per step). Steps past
/// the last column are zero. Intended for hand-built paths in tests.
class FixedIncrements final : public NoiseSource {
 public:
  explicit FixedIncrements(Eigen::MatrixXd increments)
      : increments_(std::move(increments)) {}

  void next_increment(Eigen::Ref<Eigen::VectorXd> out) override {
    if (next_ < increments_.cols())
      out = increments_.col(next_++);
    else
      out.setZero();
  }

 private:
  Eigen::MatrixXd increments_;
  Eigen::Index next_ = 0;
};

}  // namespace rdsens
