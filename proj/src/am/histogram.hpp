#pragma once

#include "imgproc/image.hpp"

#include <Eigen/Core>

namespace regtrack {

double bspline_cubic(double x);
double bspline_cubic_d1(double x);
double bspline_cubic_d2(double x);

/// Maps intensities in [0,255] onto a bin axis and evaluates the B-spline
/// membership of every bin. Order 3 (cubic) leaves one padding bin at each
/// end so all bins' memberships sum to one (with linear precision) over the
/// whole intensity range; order 1 puts the extreme bins at 0 and 255.
/// Intensities outside [0,255] are clamped and get zero derivative.
class BinMapper {
 public:
  BinMapper(int bins, int order);

  int bins() const { return bins_; }
  int order() const { return order_; }

  /// Bin-axis coordinate of intensity v (clamped).
  double coord(double v) const;
  /// Intensity at the center of bin j.
  double bin_center(int j) const;
  /// d coord / d v inside the supported range.
  double slope() const { return scale_; }

  struct Dense {
    Eigen::MatrixXd w;    // N x bins memberships
    Eigen::MatrixXd dw;   // d/dv
    Eigen::MatrixXd ddw;  // d^2/dv^2
  };
  Dense weights(const Patch& values) const;

 private:
  double kernel(double x, int deriv) const;
  int bins_;
  int order_;
  int pad_;
  double scale_;
};

/// Rows are candidate bins, columns template bins.
struct JointHist {
  Eigen::MatrixXd counts;
  Eigen::VectorXd candidate_marginal;
  Eigen::VectorXd template_marginal;
};

JointHist joint_histogram(const BinMapper& mapper, const Patch& candidate, const Patch& templ);
Eigen::VectorXd marginal_histogram(const BinMapper& mapper, const Patch& values);

}  // namespace regtrack
