#include "ssm/warp.hpp"

#include "core/error.hpp"
#include "ssm/matrix_functions.hpp"

#include <Eigen/Dense>

#include <charconv>
#include <cmath>

namespace regtrack {

namespace {

constexpr double kSingular = 1e-12;

Mat3 unit(int r, int c) {
  Mat3 e = Mat3::Zero();
  e(r, c) = 1.0;
  return e;
}

// Row-major (r, c) positions of the eight free homography entries.
constexpr std::array<std::pair<int, int>, 8> kHomEntries = {
    {{0, 0}, {0, 1}, {0, 2}, {1, 0}, {1, 1}, {1, 2}, {2, 0}, {2, 1}}};

std::array<Mat3, 8> sl3_generators() {
  std::array<Mat3, 8> g;
  g[0] = unit(0, 2);
  g[1] = unit(1, 2);
  g[2] = unit(0, 1);
  g[3] = unit(1, 0);
  g[4] = unit(0, 0) - unit(1, 1);
  g[5] = unit(2, 2) - unit(1, 1);
  g[6] = unit(2, 0);
  g[7] = unit(2, 1);
  return g;
}

Mat3 sl3_algebra(const WarpParams& p) {
  static const auto gens = sl3_generators();
  Mat3 a = Mat3::Zero();
  for (int i = 0; i < 8; ++i) a += p[i] * gens[i];
  return a;
}

// Displacement Jacobian of a homography near the identity with the matrix-entry
// parameterization, evaluated at y.
Eigen::Matrix<double, 2, 8> hom_identity_jacobian(const Point& y) {
  Eigen::Matrix<double, 2, 8> j = Eigen::Matrix<double, 2, 8>::Zero();
  const Eigen::Vector3d yt(y.x(), y.y(), 1.0);
  for (int m = 0; m < 8; ++m) {
    const auto [r, c] = kHomEntries[m];
    const Eigen::Vector3d dh = unit(r, c) * yt;
    j(0, m) = dh[0] - y.x() * dh[2];
    j(1, m) = dh[1] - y.y() * dh[2];
  }
  return j;
}

double cross2(const Point& a, const Point& b) { return a.x() * b.y() - a.y() * b.x(); }

Point mean_of(const Corners& c) { return (c[0] + c[1] + c[2] + c[3]) / 4.0; }

}  // namespace

const char* to_string(SsmKind kind) {
  switch (kind) {
    case SsmKind::translation: return "translation";
    case SsmKind::isometry: return "isometry";
    case SsmKind::similitude: return "similitude";
    case SsmKind::affine: return "affine";
    case SsmKind::homography: return "homography";
    case SsmKind::sl3: return "sl3";
    case SsmKind::corner: return "corner";
  }
  return "?";
}

SsmKind parse_ssm_kind(std::string_view name) {
  for (auto k : kAllSsmKinds)
    if (name == to_string(k)) return k;
  if (name == "hom" || name == "hom-matrix" || name == "hom_matrix") return SsmKind::homography;
  if (name == "hom-sl3") return SsmKind::sl3;
  if (name == "hom-corner") return SsmKind::corner;
  fail(ErrorCode::parse, "unknown SSM '" + std::string(name) + "'");
}

int ssm_dof(SsmKind kind) {
  switch (kind) {
    case SsmKind::translation: return 2;
    case SsmKind::isometry: return 3;
    case SsmKind::similitude: return 4;
    case SsmKind::affine: return 6;
    case SsmKind::homography:
    case SsmKind::sl3:
    case SsmKind::corner: return 8;
  }
  return 0;
}

const Corners& unit_square_corners() {
  static const Corners c = {Point(-0.5, -0.5), Point(0.5, -0.5), Point(0.5, 0.5), Point(-0.5, 0.5)};
  return c;
}

Point project(const Mat3& h, const Point& x) {
  const Eigen::Vector3d v = h * Eigen::Vector3d(x.x(), x.y(), 1.0);
  if (!(std::abs(v[2]) >= kSingular)) fail(ErrorCode::singular_warp, "projective division by near-zero value");
  return Point(v[0] / v[2], v[1] / v[2]);
}

bool corners_degenerate(const Corners& c) {
  double scale = 0.0;
  for (int i = 0; i < 4; ++i) {
    if (!c[i].allFinite()) return true;
    scale = std::max(scale, (c[i] - c[(i + 1) % 4]).squaredNorm());
  }
  if (scale <= 0.0) return true;
  for (int skip = 0; skip < 4; ++skip) {
    std::array<Point, 3> t;
    int k = 0;
    for (int i = 0; i < 4; ++i)
      if (i != skip) t[k++] = c[i];
    if (std::abs(cross2(t[1] - t[0], t[2] - t[0])) <= 1e-9 * scale) return true;
  }
  return false;
}

Mat3 fit_homography(const Corners& src, const Corners& dst) {
  if (corners_degenerate(src)) fail(ErrorCode::degenerate, "homography fit: degenerate source corners");
  if (corners_degenerate(dst)) fail(ErrorCode::degenerate, "homography fit: degenerate target corners");
  // Similarity normalization of both point sets conditions the linear system.
  auto normalizer = [](const Corners& c) {
    const Point m = mean_of(c);
    double d = 0.0;
    for (const auto& p : c) d += (p - m).norm();
    const double s = std::sqrt(2.0) / (d / 4.0);
    Mat3 t = Mat3::Identity();
    t(0, 0) = t(1, 1) = s;
    t(0, 2) = -s * m.x();
    t(1, 2) = -s * m.y();
    return t;
  };
  const Mat3 ts = normalizer(src), td = normalizer(dst);
  Eigen::Matrix<double, 8, 8> a;
  Eigen::Matrix<double, 8, 1> b;
  for (int i = 0; i < 4; ++i) {
    const Point s = project(ts, src[i]);
    const Point d = project(td, dst[i]);
    a.row(2 * i) << s.x(), s.y(), 1, 0, 0, 0, -d.x() * s.x(), -d.x() * s.y();
    a.row(2 * i + 1) << 0, 0, 0, s.x(), s.y(), 1, -d.y() * s.x(), -d.y() * s.y();
    b[2 * i] = d.x();
    b[2 * i + 1] = d.y();
  }
  const Eigen::FullPivLU<Eigen::Matrix<double, 8, 8>> lu(a);
  if (!lu.isInvertible()) fail(ErrorCode::degenerate, "homography fit: singular DLT system");
  const Eigen::Matrix<double, 8, 1> h = lu.solve(b);
  Mat3 hn;
  hn << h[0], h[1], h[2], h[3], h[4], h[5], h[6], h[7], 1.0;
  Mat3 out = td.inverse() * hn * ts;
  if (std::abs(out(2, 2)) < kSingular) fail(ErrorCode::singular_warp, "homography fit: H(2,2) vanishes");
  out /= out(2, 2);
  return out;
}

void WarpModel::check(const WarpParams& p) const {
  if (p.size() != dof())
    fail(ErrorCode::dimension_mismatch, std::string(to_string(kind_)) + " expects " + std::to_string(dof()) +
                                            " parameters, got " + std::to_string(p.size()));
  if (!p.allFinite()) fail(ErrorCode::invalid_argument, "non-finite warp parameters");
}

Mat3 WarpModel::matrix(const WarpParams& p) const {
  check(p);
  Mat3 h = Mat3::Identity();
  switch (kind_) {
    case SsmKind::translation:
      h(0, 2) = p[0];
      h(1, 2) = p[1];
      break;
    case SsmKind::isometry:
    case SsmKind::similitude: {
      const double theta = kind_ == SsmKind::isometry ? p[2] : p[3];
      const double scale = kind_ == SsmKind::isometry ? 1.0 : std::exp(p[2]);
      h(0, 0) = scale * std::cos(theta);
      h(0, 1) = -scale * std::sin(theta);
      h(1, 0) = scale * std::sin(theta);
      h(1, 1) = scale * std::cos(theta);
      h(0, 2) = p[0];
      h(1, 2) = p[1];
      break;
    }
    case SsmKind::affine:
      for (int m = 0; m < 6; ++m) h(kHomEntries[m].first, kHomEntries[m].second) += p[m];
      break;
    case SsmKind::homography:
      for (int m = 0; m < 8; ++m) h(kHomEntries[m].first, kHomEntries[m].second) += p[m];
      break;
    case SsmKind::sl3: h = matrix_exp(sl3_algebra(p)); break;
    case SsmKind::corner: {
      Corners dst = unit_square_corners();
      for (int i = 0; i < 4; ++i) dst[i] += Point(p[2 * i], p[2 * i + 1]);
      h = fit_homography(unit_square_corners(), dst);
      break;
    }
  }
  return h;
}

WarpParams WarpModel::params_from_matrix(const Mat3& hin) const {
  if (!hin.allFinite()) fail(ErrorCode::singular_warp, "non-finite warp matrix");
  WarpParams p(dof());
  if (kind_ == SsmKind::sl3) {
    const double det = hin.determinant();
    if (!(std::abs(det) > kSingular)) fail(ErrorCode::singular_warp, "singular homography");
    const Mat3 h = hin / std::cbrt(det);
    const Mat3 a = matrix_log(h);
    p << a(0, 2), a(1, 2), a(0, 1), a(1, 0), a(0, 0), a(2, 2), a(2, 0), a(2, 1);
    return p;
  }
  if (std::abs(hin(2, 2)) < kSingular) fail(ErrorCode::singular_warp, "warp matrix has vanishing H(2,2)");
  const Mat3 h = hin / hin(2, 2);
  switch (kind_) {
    case SsmKind::translation: p << h(0, 2), h(1, 2); break;
    case SsmKind::isometry: p << h(0, 2), h(1, 2), std::atan2(h(1, 0), h(0, 0)); break;
    case SsmKind::similitude:
      p << h(0, 2), h(1, 2), std::log(std::hypot(h(0, 0), h(1, 0))), std::atan2(h(1, 0), h(0, 0));
      break;
    case SsmKind::affine:
    case SsmKind::homography: {
      const Mat3 d = h - Mat3::Identity();
      for (int m = 0; m < dof(); ++m) p[m] = d(kHomEntries[m].first, kHomEntries[m].second);
      break;
    }
    case SsmKind::corner: {
      const auto& u = unit_square_corners();
      for (int i = 0; i < 4; ++i) {
        const Point d = project(h, u[i]) - u[i];
        p[2 * i] = d.x();
        p[2 * i + 1] = d.y();
      }
      break;
    }
    case SsmKind::sl3: break;
  }
  return p;
}

std::vector<Mat3> WarpModel::matrix_derivatives(const WarpParams& p) const {
  check(p);
  std::vector<Mat3> d;
  d.reserve(static_cast<std::size_t>(dof()));
  switch (kind_) {
    case SsmKind::translation:
      d = {unit(0, 2), unit(1, 2)};
      break;
    case SsmKind::isometry:
    case SsmKind::similitude: {
      const double theta = kind_ == SsmKind::isometry ? p[2] : p[3];
      const double scale = kind_ == SsmKind::isometry ? 1.0 : std::exp(p[2]);
      const double c = std::cos(theta), s = std::sin(theta);
      Mat3 rot = Mat3::Zero();
      rot(0, 0) = scale * c;
      rot(0, 1) = -scale * s;
      rot(1, 0) = scale * s;
      rot(1, 1) = scale * c;
      Mat3 drot = Mat3::Zero();
      drot(0, 0) = -scale * s;
      drot(0, 1) = -scale * c;
      drot(1, 0) = scale * c;
      drot(1, 1) = -scale * s;
      d = {unit(0, 2), unit(1, 2)};
      if (kind_ == SsmKind::similitude) d.push_back(rot);
      d.push_back(drot);
      break;
    }
    case SsmKind::affine:
    case SsmKind::homography:
      for (int m = 0; m < dof(); ++m) d.push_back(unit(kHomEntries[m].first, kHomEntries[m].second));
      break;
    case SsmKind::sl3: {
      // d/dp_i exp(A) is the upper-right block of exp([[A, G_i], [0, A]]).
      static const auto gens = sl3_generators();
      const Mat3 a = sl3_algebra(p);
      for (int i = 0; i < 8; ++i) {
        Eigen::MatrixXd block = Eigen::MatrixXd::Zero(6, 6);
        block.topLeftCorner(3, 3) = a;
        block.bottomRightCorner(3, 3) = a;
        block.topRightCorner(3, 3) = gens[i];
        d.push_back(matrix_exp(block).topRightCorner(3, 3));
      }
      break;
    }
    case SsmKind::corner: {
      // H(d + delta) = G(delta) H(d) with G the homography moving the current
      // corners by delta; dG/ddelta at zero follows from the identity Jacobian.
      const Mat3 h = matrix(p);
      Eigen::Matrix<double, 8, 8> m;
      const auto& u = unit_square_corners();
      for (int i = 0; i < 4; ++i) m.middleRows<2>(2 * i) = hom_identity_jacobian(u[i] + Point(p[2 * i], p[2 * i + 1]));
      const Eigen::FullPivLU<Eigen::Matrix<double, 8, 8>> lu(m);
      if (!lu.isInvertible()) fail(ErrorCode::singular_warp, "corner parameterization at degenerate corners");
      const Eigen::Matrix<double, 8, 8> minv = lu.inverse();
      for (int j = 0; j < 8; ++j) {
        Mat3 g = Mat3::Zero();
        for (int k = 0; k < 8; ++k) g(kHomEntries[k].first, kHomEntries[k].second) = minv(k, j);
        d.push_back(g * h);
      }
      break;
    }
  }
  return d;
}

std::vector<Point> WarpModel::apply(const WarpParams& p, std::span<const Point> pts) const {
  const Mat3 h = matrix(p);
  std::vector<Point> out;
  out.reserve(pts.size());
  for (const auto& x : pts) out.push_back(project(h, x));
  return out;
}

Corners WarpModel::apply(const WarpParams& p, const Corners& c) const {
  const Mat3 h = matrix(p);
  Corners out;
  for (int i = 0; i < 4; ++i) out[i] = project(h, c[i]);
  return out;
}

WarpDifferential::WarpDifferential(const WarpModel& model, const WarpParams& p)
    : h_(model.matrix(p)), dh_(model.matrix_derivatives(p)) {}

WarpJacobian WarpDifferential::jacobian(const Point& x) const {
  const Eigen::Vector3d xt(x.x(), x.y(), 1.0);
  const Eigen::Vector3d v = h_ * xt;
  if (!(std::abs(v[2]) >= kSingular)) fail(ErrorCode::singular_warp, "projective division by near-zero value");
  const double wx = v[0] / v[2], wy = v[1] / v[2];
  WarpJacobian j(2, static_cast<Eigen::Index>(dh_.size()));
  for (std::size_t i = 0; i < dh_.size(); ++i) {
    const Eigen::Vector3d dv = dh_[i] * xt;
    j(0, static_cast<Eigen::Index>(i)) = (dv[0] - wx * dv[2]) / v[2];
    j(1, static_cast<Eigen::Index>(i)) = (dv[1] - wy * dv[2]) / v[2];
  }
  return j;
}

Eigen::Matrix2d WarpDifferential::spatial_jacobian(const Point& x) const {
  const Eigen::Vector3d v = h_ * Eigen::Vector3d(x.x(), x.y(), 1.0);
  if (!(std::abs(v[2]) >= kSingular)) fail(ErrorCode::singular_warp, "projective division by near-zero value");
  const double wx = v[0] / v[2], wy = v[1] / v[2];
  Eigen::Matrix2d j;
  j << (h_(0, 0) - wx * h_(2, 0)) / v[2], (h_(0, 1) - wx * h_(2, 1)) / v[2], (h_(1, 0) - wy * h_(2, 0)) / v[2],
      (h_(1, 1) - wy * h_(2, 1)) / v[2];
  return j;
}

WarpJacobian WarpModel::jacobian(const WarpParams& p, const Point& x) const { return WarpDifferential(*this, p).jacobian(x); }

Eigen::Matrix2d WarpModel::spatial_jacobian(const WarpParams& p, const Point& x) const {
  return WarpDifferential(*this, p).spatial_jacobian(x);
}

WarpParams WarpModel::compose(const WarpParams& p, const WarpParams& q) const {
  return params_from_matrix(matrix(p) * matrix(q));
}

WarpParams WarpModel::invert(const WarpParams& p) const {
  const Mat3 h = matrix(p);
  const double det = h.determinant();
  if (!(std::abs(det) > kSingular)) fail(ErrorCode::singular_warp, "warp is not invertible");
  return params_from_matrix(h.inverse());
}

WarpParams WarpModel::update(const WarpParams& p, const WarpParams& dp, UpdateMode mode) const {
  check(p);
  check(dp);
  switch (mode) {
    case UpdateMode::additive: return p + dp;
    case UpdateMode::compositional: return compose(p, dp);
    case UpdateMode::inverse_compositional: return compose(p, invert(dp));
  }
  return p;
}

WarpParams WarpModel::fit(const Corners& src, const Corners& dst) const {
  for (int i = 0; i < 4; ++i)
    if (!src[i].allFinite() || !dst[i].allFinite()) fail(ErrorCode::invalid_argument, "non-finite corners in fit");
  const Point ms = mean_of(src), md = mean_of(dst);
  WarpParams p(dof());
  switch (kind_) {
    case SsmKind::translation: p << md.x() - ms.x(), md.y() - ms.y(); return p;
    case SsmKind::isometry:
    case SsmKind::similitude: {
      double dot = 0.0, crs = 0.0, norm = 0.0;
      for (int i = 0; i < 4; ++i) {
        const Point a = src[i] - ms, b = dst[i] - md;
        dot += a.dot(b);
        crs += cross2(a, b);
        norm += a.squaredNorm();
      }
      if (norm <= 1e-300) fail(ErrorCode::degenerate, "rotation fit: source corners coincide");
      const double theta = std::atan2(crs, dot);
      double scale = 1.0;
      if (kind_ == SsmKind::similitude) {
        scale = std::hypot(dot, crs) / norm;
        if (!(scale > 0.0)) fail(ErrorCode::degenerate, "similitude fit: target corners coincide");
      }
      const Eigen::Matrix2d r = scale * Eigen::Rotation2Dd(theta).toRotationMatrix();
      const Point t = md - r * ms;
      if (kind_ == SsmKind::isometry)
        p << t.x(), t.y(), theta;
      else
        p << t.x(), t.y(), std::log(scale), theta;
      return p;
    }
    case SsmKind::affine: {
      // Centered least squares for the linear part; translation from the means.
      Eigen::Matrix<double, 4, 2> a, b;
      for (int i = 0; i < 4; ++i) {
        a.row(i) = (src[i] - ms).transpose();
        b.row(i) = (dst[i] - md).transpose();
      }
      const Eigen::Matrix2d ata = a.transpose() * a;
      if (std::abs(ata.determinant()) <= 1e-12 * ata.squaredNorm())
        fail(ErrorCode::degenerate, "affine fit: collinear source corners");
      const Eigen::Matrix2d lin = (ata.ldlt().solve(a.transpose() * b)).transpose();
      const Point t = md - lin * ms;
      p << lin(0, 0) - 1.0, lin(0, 1), t.x(), lin(1, 0), lin(1, 1) - 1.0, t.y();
      return p;
    }
    case SsmKind::homography:
    case SsmKind::sl3:
    case SsmKind::corner: {
      const Mat3 h = fit_homography(src, dst);
      // With H(2,2) = 1 a negative determinant means the target quad is flipped or non-convex.
      if (kind_ == SsmKind::sl3 && h.determinant() <= 0.0)
        fail(ErrorCode::degenerate, "sl3 fit: orientation-reversing homography");
      return params_from_matrix(h);
    }
  }
  return p;
}

WarpParams WarpModel::sample(double sigma, std::mt19937_64& rng) const {
  if (!(sigma > 0.0)) fail(ErrorCode::invalid_argument, "warp sampling sigma must be positive");
  std::normal_distribution<double> noise(0.0, sigma);
  const auto& base = unit_square_corners();
  for (int attempt = 0; attempt < 100; ++attempt) {
    Corners c = base;
    for (auto& pt : c) pt += Point(noise(rng), noise(rng));
    if (corners_degenerate(c)) continue;
    try {
      return fit(base, c);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::degenerate && e.code() != ErrorCode::singular_warp) throw;
    }
  }
  fail(ErrorCode::degenerate, "warp sampling: no valid perturbation after 100 attempts");
}

std::string format_corners(const Corners& c) {
  std::string out;
  char buf[64];
  for (int i = 0; i < 4; ++i)
    for (int k = 0; k < 2; ++k) {
      if (!out.empty()) out.push_back(' ');
      const auto res = std::to_chars(buf, buf + sizeof(buf), c[i][k]);
      out.append(buf, res.ptr);
    }
  return out;
}

}  // namespace regtrack
