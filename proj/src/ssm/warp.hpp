#pragma once

#include "imgproc/image.hpp"

#include <Eigen/Core>

#include <array>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace regtrack {

using Mat3 = Eigen::Matrix3d;
using WarpParams = Eigen::VectorXd;
using WarpJacobian = Eigen::Matrix<double, 2, Eigen::Dynamic>;

/// Upper-left, upper-right, lower-right, lower-left.
using Corners = std::array<Point, 4>;

enum class SsmKind { translation, isometry, similitude, affine, homography, sl3, corner };

inline constexpr std::array<SsmKind, 7> kAllSsmKinds = {SsmKind::translation, SsmKind::isometry, SsmKind::similitude,
                                                        SsmKind::affine,      SsmKind::homography, SsmKind::sl3,
                                                        SsmKind::corner};

const char* to_string(SsmKind kind);
SsmKind parse_ssm_kind(std::string_view name);
int ssm_dof(SsmKind kind);

enum class UpdateMode { additive, compositional, inverse_compositional };

const Corners& unit_square_corners();

/// Throws singular_warp when the projective denominator is below 1e-12 in magnitude.
Point project(const Mat3& h, const Point& x);

/// True when any three of the corners are (numerically) collinear.
bool corners_degenerate(const Corners& c);

/// Normalized direct linear transform; exact for four correspondences.
Mat3 fit_homography(const Corners& src, const Corners& dst);

/// A warp function together with its parameterization. Parameters are zero at
/// the identity for every kind; each warp is represented internally by a 3x3
/// matrix so composition and inversion are exact group operations.
///
/// Parameter layouts:
///   translation  (tx, ty)
///   isometry     (tx, ty, theta)
///   similitude   (tx, ty, log_scale, theta)
///   affine       row-major entries of [A - I | t]
///   homography   row-major entries of H - I without H(2,2), H(2,2) = 1
///   sl3          coefficients of the eight sl(3) generators, H = exp(sum p_i G_i), with
///                G = E02, E12, E01, E10, E00-E11, E22-E11, E20, E21
///   corner       displacements of the four unit-square corners (ul, ur, lr, ll)
class WarpModel {
 public:
  explicit WarpModel(SsmKind kind) : kind_(kind) {}

  SsmKind kind() const { return kind_; }
  int dof() const { return ssm_dof(kind_); }
  WarpParams identity() const { return WarpParams::Zero(dof()); }

  Mat3 matrix(const WarpParams& p) const;
  WarpParams params_from_matrix(const Mat3& h) const;
  /// dH/dp_i for each parameter, evaluated at p.
  std::vector<Mat3> matrix_derivatives(const WarpParams& p) const;

  Point apply(const WarpParams& p, const Point& x) const { return project(matrix(p), x); }
  std::vector<Point> apply(const WarpParams& p, std::span<const Point> pts) const;
  Corners apply(const WarpParams& p, const Corners& c) const;

  /// 2xS matrix d w(x, p) / d p.
  WarpJacobian jacobian(const WarpParams& p, const Point& x) const;
  /// 2x2 matrix d w(x, p) / d x.
  Eigen::Matrix2d spatial_jacobian(const WarpParams& p, const Point& x) const;

  WarpParams update(const WarpParams& p, const WarpParams& dp, UpdateMode mode) const;
  /// Parameters of w(., p) o w(., q).
  WarpParams compose(const WarpParams& p, const WarpParams& q) const;
  WarpParams invert(const WarpParams& p) const;

  /// Least-squares parameters taking src onto dst (closed form per kind).
  WarpParams fit(const Corners& src, const Corners& dst) const;

  /// Perturbs the unit-square corners with i.i.d. N(0, sigma^2) noise and
  /// fits this model to them.
  WarpParams sample(double sigma, std::mt19937_64& rng) const;

 private:
  void check(const WarpParams& p) const;
  SsmKind kind_;
};

/// Evaluates w and dw/dp at many points for one parameter vector.
class WarpDifferential {
 public:
  WarpDifferential(const WarpModel& model, const WarpParams& p);
  Point apply(const Point& x) const { return project(h_, x); }
  WarpJacobian jacobian(const Point& x) const;
  Eigen::Matrix2d spatial_jacobian(const Point& x) const;
  const Mat3& matrix() const { return h_; }

 private:
  Mat3 h_;
  std::vector<Mat3> dh_;
};

/// Corner serialization: "ulx uly urx ury lrx lry llx lly".
std::string format_corners(const Corners& c);

}  // namespace regtrack
