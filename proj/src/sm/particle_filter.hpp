#pragma once

#include "imgproc/image.hpp"
#include "ssm/warp.hpp"

#include <Eigen/Core>

#include <memory>
#include <random>
#include <vector>

namespace regtrack {

class SearchContext;
struct SmConfig;

double effective_sample_size(const Eigen::VectorXd& weights);

/// Systematic resampling with offset u0 in [0,1); returns the chosen indices.
std::vector<std::size_t> systematic_resample(const Eigen::VectorXd& weights, double u0);

WarpParams weighted_mean(const std::vector<WarpParams>& particles, const Eigen::VectorXd& weights);

/// Converts per-particle log-likelihoods to normalized weights. Returns false
/// (and uniform weights) when no finite likelihood is present.
bool normalize_log_weights(const Eigen::VectorXd& log_w, Eigen::VectorXd& weights);

/// Random-walk particle filter over warp parameters. Each frame: propagate
/// every particle by a composed random warp, weight it by
/// exp(-d * scale / (2 var(template))) with d the AM's nn_distance, report the
/// weighted mean, then resample systematically when the effective sample size
/// falls below the configured fraction.
class ParticleFilter {
 public:
  ParticleFilter(std::shared_ptr<const SearchContext> ctx, const SmConfig& cfg, const WarpParams& start);

  WarpParams step(const GrayImage& frame);

  const std::vector<WarpParams>& particles() const { return particles_; }
  const Eigen::VectorXd& weights() const { return weights_; }
  /// Set when the last step found no usable likelihood and fell back to uniform weights.
  bool degenerate_weights() const { return degenerate_; }

 private:
  std::shared_ptr<const SearchContext> ctx_;
  double sigma_;
  double threshold_;
  double lambda_;
  std::mt19937_64 rng_;
  std::vector<WarpParams> particles_;
  Eigen::VectorXd weights_;
  bool degenerate_ = false;
};

}  // namespace regtrack
