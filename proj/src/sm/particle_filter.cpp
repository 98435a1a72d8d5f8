#include "sm/particle_filter.hpp"

#include "core/error.hpp"
#include "sm/search.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

namespace regtrack {

double effective_sample_size(const Eigen::VectorXd& weights) {
  const double s2 = weights.squaredNorm();
  return s2 > 0.0 ? 1.0 / s2 : 0.0;
}

std::vector<std::size_t> systematic_resample(const Eigen::VectorXd& weights, double u0) {
  const auto n = static_cast<std::size_t>(weights.size());
  if (n == 0) fail(ErrorCode::invalid_argument, "cannot resample an empty particle set");
  if (!(u0 >= 0.0 && u0 < 1.0)) fail(ErrorCode::invalid_argument, "resampling offset must lie in [0,1)");
  const double total = weights.sum();
  std::vector<std::size_t> out(n);
  double cumulative = weights[0] / total;
  std::size_t j = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double u = (static_cast<double>(i) + u0) / static_cast<double>(n);
    while (u > cumulative && j + 1 < n) cumulative += weights[static_cast<Eigen::Index>(++j)] / total;
    out[i] = j;
  }
  return out;
}

WarpParams weighted_mean(const std::vector<WarpParams>& particles, const Eigen::VectorXd& weights) {
  if (particles.empty() || static_cast<Eigen::Index>(particles.size()) != weights.size())
    fail(ErrorCode::dimension_mismatch, "one weight per particle required");
  WarpParams mean = WarpParams::Zero(particles.front().size());
  const double total = weights.sum();
  for (std::size_t i = 0; i < particles.size(); ++i)
    mean += weights[static_cast<Eigen::Index>(i)] / total * particles[i];
  return mean;
}

bool normalize_log_weights(const Eigen::VectorXd& log_w, Eigen::VectorXd& weights) {
  const auto n = log_w.size();
  double top = -std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < n; ++i)
    if (std::isfinite(log_w[i])) top = std::max(top, log_w[i]);
  weights.resize(n);
  if (!std::isfinite(top)) {
    weights.setConstant(1.0 / static_cast<double>(n));
    return false;
  }
  for (Eigen::Index i = 0; i < n; ++i) weights[i] = std::isfinite(log_w[i]) ? std::exp(log_w[i] - top) : 0.0;
  weights /= weights.sum();
  return true;
}

ParticleFilter::ParticleFilter(std::shared_ptr<const SearchContext> ctx, const SmConfig& cfg, const WarpParams& start)
    : ctx_(std::move(ctx)), sigma_(cfg.pf_sigma), threshold_(cfg.pf_resample_threshold), rng_(cfg.seed) {
  cfg.validate();
  const Patch& t = ctx_->templ();
  const double var = (t.array() - t.mean()).square().mean();
  // A flat template carries no likelihood information; fall back to unit variance.
  lambda_ = ctx_->am().likelihood_scale(t) / (2.0 * (var > 0.0 ? var : 1.0));
  particles_.assign(static_cast<std::size_t>(cfg.pf_particles), start);
  weights_ = Eigen::VectorXd::Constant(cfg.pf_particles, 1.0 / cfg.pf_particles);
}

WarpParams ParticleFilter::step(const GrayImage& frame) {
  const auto& ssm = ctx_->ssm();
  const auto n = static_cast<Eigen::Index>(particles_.size());
  Eigen::VectorXd log_w(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    auto& p = particles_[static_cast<std::size_t>(i)];
    p = ssm.compose(p, ssm.sample(sigma_, rng_));
    try {
      log_w[i] = -lambda_ * ctx_->am().nn_distance(ctx_->templ(), ctx_->candidate(frame, p));
    } catch (const Error& e) {
      if (e.code() != ErrorCode::singular_warp) throw;
      log_w[i] = -std::numeric_limits<double>::infinity();
    }
  }
  degenerate_ = !normalize_log_weights(log_w, weights_);
  const WarpParams estimate = weighted_mean(particles_, weights_);
  if (effective_sample_size(weights_) < threshold_ * static_cast<double>(n)) {
    const double u0 = std::uniform_real_distribution<double>(0.0, 1.0)(rng_);
    const auto picks = systematic_resample(weights_, u0);
    std::vector<WarpParams> next;
    next.reserve(picks.size());
    for (auto k : picks) next.push_back(particles_[k]);
    particles_ = std::move(next);
    weights_.setConstant(1.0 / static_cast<double>(n));
  }
  return estimate;
}

}  // namespace regtrack
