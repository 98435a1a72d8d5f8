#include "am/histogram.hpp"

#include "core/error.hpp"

#include <algorithm>
#include <cmath>

namespace regtrack {

double bspline_cubic(double x) {
  const double a = std::abs(x);
  if (a < 1.0) return 2.0 / 3.0 - a * a + 0.5 * a * a * a;
  if (a < 2.0) {
    const double b = 2.0 - a;
    return b * b * b / 6.0;
  }
  return 0.0;
}

double bspline_cubic_d1(double x) {
  const double a = std::abs(x);
  const double s = x < 0.0 ? -1.0 : 1.0;
  if (a < 1.0) return s * (-2.0 * a + 1.5 * a * a);
  if (a < 2.0) {
    const double b = 2.0 - a;
    return -s * 0.5 * b * b;
  }
  return 0.0;
}

double bspline_cubic_d2(double x) {
  const double a = std::abs(x);
  if (a < 1.0) return -2.0 + 3.0 * a;
  if (a < 2.0) return 2.0 - a;
  return 0.0;
}

BinMapper::BinMapper(int bins, int order) : bins_(bins), order_(order) {
  if (bins < 2) fail(ErrorCode::invalid_argument, "histogram bin count must be >= 2");
  if (order != 1 && order != 3) fail(ErrorCode::invalid_argument, "B-spline order must be 1 or 3");
  pad_ = order == 3 ? 1 : 0;
  if (bins - 1 - 2 * pad_ < 1) fail(ErrorCode::invalid_argument, "cubic binning needs at least 4 bins");
  scale_ = (bins - 1 - 2 * pad_) / 255.0;
}

double BinMapper::coord(double v) const { return pad_ + scale_ * std::clamp(v, 0.0, 255.0); }

double BinMapper::bin_center(int j) const { return (j - pad_) / scale_; }

double BinMapper::kernel(double x, int deriv) const {
  if (order_ == 3) {
    switch (deriv) {
      case 0: return bspline_cubic(x);
      case 1: return bspline_cubic_d1(x);
      default: return bspline_cubic_d2(x);
    }
  }
  const double a = std::abs(x);
  if (a >= 1.0) return 0.0;
  if (deriv == 0) return 1.0 - a;
  if (deriv == 1) return x < 0.0 ? 1.0 : -1.0;
  return 0.0;
}

BinMapper::Dense BinMapper::weights(const Patch& values) const {
  const auto n = values.size();
  Dense d{Eigen::MatrixXd::Zero(n, bins_), Eigen::MatrixXd::Zero(n, bins_), Eigen::MatrixXd::Zero(n, bins_)};
  for (Eigen::Index k = 0; k < n; ++k) {
    const double v = values[k];
    const double u = coord(v);
    const double slope = (v >= 0.0 && v <= 255.0) ? scale_ : 0.0;
    const int lo = std::max(0, static_cast<int>(std::floor(u)) - (order_ == 3 ? 1 : 0));
    const int hi = std::min(bins_ - 1, static_cast<int>(std::floor(u)) + (order_ == 3 ? 2 : 1));
    for (int j = lo; j <= hi; ++j) {
      const double x = u - j;
      d.w(k, j) = kernel(x, 0);
      d.dw(k, j) = slope * kernel(x, 1);
      d.ddw(k, j) = slope * slope * kernel(x, 2);
    }
  }
  return d;
}

JointHist joint_histogram(const BinMapper& mapper, const Patch& candidate, const Patch& templ) {
  if (candidate.size() != templ.size() || candidate.size() == 0)
    fail(ErrorCode::dimension_mismatch, "joint histogram needs equal, non-empty patches");
  const auto wc = mapper.weights(candidate).w;
  const auto wt = mapper.weights(templ).w;
  const double inv_n = 1.0 / static_cast<double>(candidate.size());
  JointHist h;
  h.counts = wc.transpose() * wt * inv_n;
  h.candidate_marginal = h.counts.rowwise().sum();
  h.template_marginal = h.counts.colwise().sum().transpose();
  return h;
}

Eigen::VectorXd marginal_histogram(const BinMapper& mapper, const Patch& values) {
  if (values.size() == 0) fail(ErrorCode::dimension_mismatch, "histogram of empty patch");
  return mapper.weights(values).w.colwise().sum().transpose() / static_cast<double>(values.size());
}

}  // namespace regtrack
