#include "am/appearance.hpp"

#include "core/error.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>

namespace regtrack {

const char* to_string(AmKind kind) {
  switch (kind) {
    case AmKind::ssd: return "ssd";
    case AmKind::scv: return "scv";
    case AmKind::rscv: return "rscv";
    case AmKind::lscv: return "lscv";
    case AmKind::zncc: return "zncc";
    case AmKind::ncc: return "ncc";
    case AmKind::mi: return "mi";
    case AmKind::ccre: return "ccre";
  }
  return "?";
}

AmKind parse_am_kind(std::string_view name) {
  for (auto k : kAllAmKinds)
    if (name == to_string(k)) return k;
  fail(ErrorCode::parse, "unknown AM '" + std::string(name) + "'");
}

void AppearanceModel::check_sizes(const Patch& t, const Patch& c) {
  if (t.size() != c.size() || t.size() == 0)
    fail(ErrorCode::dimension_mismatch, "patch length mismatch: " + std::to_string(t.size()) + " vs " +
                                            std::to_string(c.size()));
}

double AppearanceModel::nn_distance(const Patch& a, const Patch& b) const {
  return std::max(0.0, similarity(a, a) - similarity(a, b));
}

double AppearanceModel::likelihood_scale(const Patch&) const { return 1.0; }

Eigen::MatrixXd negative_definite_part(const Eigen::MatrixXd& h) {
  const Eigen::MatrixXd sym = 0.5 * (h + h.transpose());
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym);
  const Eigen::VectorXd lambda = -es.eigenvalues().cwiseAbs();
  Eigen::MatrixXd out = es.eigenvectors() * lambda.asDiagonal() * es.eigenvectors().transpose();
  return 0.5 * (out + out.transpose());
}

namespace {

double variance(const Patch& p) { return (p.array() - p.mean()).square().mean(); }

Eigen::MatrixXd gauss_newton(const Eigen::MatrixXd& j) { return -2.0 * j.transpose() * j; }

void check_jacobian(const Patch& t, const Eigen::MatrixXd& dIdp) {
  if (dIdp.rows() != t.size())
    fail(ErrorCode::dimension_mismatch, "dIdp has " + std::to_string(dIdp.rows()) + " rows for a patch of " +
                                            std::to_string(t.size()));
}

class SsdModel final : public AppearanceModel {
 public:
  using AppearanceModel::AppearanceModel;

  double similarity(const Patch& t, const Patch& c) const override {
    check_sizes(t, c);
    return -(c - t).squaredNorm();
  }
  Eigen::VectorXd gradient(const Patch& t, const Patch& c, Side wrt) const override {
    check_sizes(t, c);
    return wrt == Side::candidate ? Eigen::VectorXd(-2.0 * (c - t)) : Eigen::VectorXd(2.0 * (c - t));
  }
  Eigen::MatrixXd curvature(const Patch& t, const Patch&, const Eigen::MatrixXd& dIdp) const override {
    check_jacobian(t, dIdp);
    return gauss_newton(dIdp);
  }
  double nn_distance(const Patch& a, const Patch& b) const override {
    check_sizes(a, b);
    return (a - b).squaredNorm();
  }
  bool features_exact() const override { return true; }
};

// Penalized least squares of y on the columns of w:
// min_b |y - w b|^2 + b^T q b with q a fixed positive semi-definite matrix.
// The value function stays smooth when a bin is barely occupied, where a
// truncated pseudo-inverse jumps, and because q does not depend on w or y its
// derivative is the derivative at frozen coefficients.
struct PenalizedFit {
  Eigen::VectorXd coef;
  double penalty = 0.0;
};

PenalizedFit least_squares(const Eigen::MatrixXd& w, const Eigen::VectorXd& y, const Eigen::MatrixXd& q) {
  const Eigen::MatrixXd g = w.transpose() * w + q;
  PenalizedFit out;
  // Singular only for a constant source, where the two affine directions alias.
  out.coef = g.completeOrthogonalDecomposition().solve(w.transpose() * y);
  out.penalty = out.coef.dot(q * out.coef);
  return out;
}

// SCV family. The intensity mapping is the conditional expectation of the
// other patch given the binned source patch, estimated as the least-squares
// projection onto the B-spline bin memberships (per-bin means for hard bins).
// LSCV multiplies the memberships by bilinear subregion weights and fits all
// subregions jointly.
class ConditionalVarianceModel final : public AppearanceModel {
 public:
  explicit ConditionalVarianceModel(const AmConfig& cfg) : AppearanceModel(cfg), mapper_(cfg.bins, cfg.spline_order) {
    if (cfg.kind == AmKind::lscv) {
      if (cfg.subregions_x < 1 || cfg.subregions_y < 1 || cfg.resolution_x < 1 || cfg.resolution_y < 1)
        fail(ErrorCode::invalid_argument, "LSCV needs positive subregion and resolution sizes");
      const int n = cfg.resolution_x * cfg.resolution_y;
      const int regions = cfg.subregions_x * cfg.subregions_y;
      region_weights_ = Eigen::MatrixXd::Zero(n, regions);
      auto hat = [](int i, int count, int parts, int r) {
        if (parts == 1) return 1.0;
        const double width = static_cast<double>(count - 1) / (parts - 1);
        return std::max(0.0, 1.0 - std::abs(i - r * width) / width);
      };
      for (int y = 0; y < cfg.resolution_y; ++y)
        for (int x = 0; x < cfg.resolution_x; ++x)
          for (int ry = 0; ry < cfg.subregions_y; ++ry)
            for (int rx = 0; rx < cfg.subregions_x; ++rx)
              region_weights_(y * cfg.resolution_x + x, ry * cfg.subregions_x + rx) =
                  hat(x, cfg.resolution_x, cfg.subregions_x, rx) * hat(y, cfg.resolution_y, cfg.subregions_y, ry);
    }
  }

  double similarity(const Patch& t, const Patch& c) const override {
    check_sizes(t, c);
    const Fit f = fit(t, c);
    return -f.residual.squaredNorm() - f.penalty;
  }

  Eigen::VectorXd gradient(const Patch& t, const Patch& c, Side wrt) const override {
    check_sizes(t, c);
    const Fit f = fit(t, c);
    // residual = target - mapped source; f = -|residual|^2.
    const bool reversed = kind() == AmKind::rscv;
    const bool wrt_target = reversed ? wrt == Side::templ : wrt == Side::candidate;
    if (wrt_target) return -2.0 * f.residual;
    return 2.0 * f.residual.cwiseProduct(f.mapped_slope);
  }

  Eigen::MatrixXd curvature(const Patch& t, const Patch&, const Eigen::MatrixXd& dIdp) const override {
    check_jacobian(t, dIdp);
    return gauss_newton(dIdp);
  }

 private:
  struct Fit {
    Eigen::VectorXd residual;      // target - mapped(source)
    Eigen::VectorXd mapped_slope;  // d mapped(source) / d source, coefficients frozen
    double penalty;
  };

  Fit fit(const Patch& t, const Patch& c) const {
    const bool reversed = kind() == AmKind::rscv;
    const Patch& source = reversed ? c : t;
    const Patch& target = reversed ? t : c;
    const auto dense = mapper_.weights(source);
    Eigen::MatrixXd basis = dense.w, dbasis = dense.dw;
    if (kind() == AmKind::lscv) {
      if (source.size() != region_weights_.rows())
        fail(ErrorCode::dimension_mismatch, "LSCV patch length does not match its configured resolution");
      const auto regions = region_weights_.cols();
      const auto bins = dense.w.cols();
      basis.resize(source.size(), regions * bins);
      dbasis.resize(source.size(), regions * bins);
      for (Eigen::Index r = 0; r < regions; ++r) {
        basis.middleCols(r * bins, bins) = region_weights_.col(r).asDiagonal() * dense.w;
        dbasis.middleCols(r * bins, bins) = region_weights_.col(r).asDiagonal() * dense.dw;
      }
    }
    const PenalizedFit r = least_squares(basis, target, penalty(basis.rows(), basis.cols()));
    return Fit{target - basis * r.coef, dbasis * r.coef, r.penalty};
  }

  // Splines of order >= 1 reproduce affine maps of the intensity exactly, so
  // only coefficients outside span{1, bin centers} are penalized. The fit at
  // target == source, or at an affine image of it, keeps zero residual and
  // zero penalty.
  Eigen::MatrixXd penalty(Eigen::Index rows, Eigen::Index cols) const {
    const int bins = mapper_.bins();
    Eigen::MatrixXd a(bins, 2);
    for (int j = 0; j < bins; ++j) a.row(j) << 1.0, mapper_.bin_center(j);
    const Eigen::MatrixXd proj =
        Eigen::MatrixXd::Identity(bins, bins) - a * (a.transpose() * a).ldlt().solve(a.transpose());
    // Memberships sum to one per pixel, so rows / cols is the typical diagonal.
    const double mu = 1e-6 * static_cast<double>(rows) / static_cast<double>(cols);
    Eigen::MatrixXd q = Eigen::MatrixXd::Zero(cols, cols);
    for (Eigen::Index r = 0; r + bins <= cols; r += bins) q.block(r, r, bins, bins) += mu * proj;
    return q;
  }

  BinMapper mapper_;
  Eigen::MatrixXd region_weights_;
};

// NCC is the Pearson correlation; ZNCC is -|z(c) - z(t)|^2 = 2N (NCC - 1).
class CorrelationModel final : public AppearanceModel {
 public:
  using AppearanceModel::AppearanceModel;

  double similarity(const Patch& t, const Patch& c) const override {
    check_sizes(t, c);
    const double n = static_cast<double>(t.size());
    if (kind() == AmKind::ncc) return correlation(t, c);
    const auto zt = zscore(t), zc = zscore(c);
    if (!zt || !zc) return -2.0 * n;
    return -(*zc - *zt).squaredNorm();
  }

  Eigen::VectorXd gradient(const Patch& t, const Patch& c, Side wrt) const override {
    check_sizes(t, c);
    const Patch& moving = wrt == Side::candidate ? c : t;
    const Patch& fixed = wrt == Side::candidate ? t : c;
    const Eigen::VectorXd a = moving.array() - moving.mean();
    const Eigen::VectorXd b = fixed.array() - fixed.mean();
    const double na = a.norm(), nb = b.norm();
    if (degenerate(na, moving) || degenerate(nb, fixed)) return Eigen::VectorXd::Zero(t.size());
    const double rho = a.dot(b) / (na * nb);
    Eigen::VectorXd g = b / (na * nb) - rho * a / (na * na);
    if (kind() == AmKind::zncc) g *= 2.0 * static_cast<double>(t.size());
    return g;
  }

  Eigen::MatrixXd curvature(const Patch& t, const Patch&, const Eigen::MatrixXd& dIdp) const override {
    check_jacobian(t, dIdp);
    const Eigen::VectorXd b = t.array() - t.mean();
    const double nb2 = b.squaredNorm();
    const auto s = dIdp.cols();
    if (degenerate(std::sqrt(nb2), t)) return Eigen::MatrixXd::Zero(s, s);
    // d^2 rho / dc^2 at c = t is -(P - b b^T / |b|^2) / |b|^2, P the centering projector.
    const double n = static_cast<double>(t.size());
    const Eigen::VectorXd mean = dIdp.colwise().mean().transpose();
    const Eigen::VectorXd jb = dIdp.transpose() * b / std::sqrt(nb2);
    Eigen::MatrixXd h = -(dIdp.transpose() * dIdp - n * mean * mean.transpose() - jb * jb.transpose()) / nb2;
    if (kind() == AmKind::zncc) h *= 2.0 * n;
    return 0.5 * (h + h.transpose());
  }

  double nn_distance(const Patch& a, const Patch& b) const override {
    check_sizes(a, b);
    return std::max(0.0, 2.0 * static_cast<double>(a.size()) * (1.0 - correlation(a, b)));
  }

  Eigen::VectorXd nn_features(const Patch& p) const override {
    const auto z = zscore(p);
    return z ? *z : Eigen::VectorXd::Zero(p.size());
  }
  bool features_exact() const override { return true; }
  bool features_are_raw() const override { return false; }
  double likelihood_scale(const Patch& t) const override { return variance(t); }

 private:
  static bool degenerate(double centered_norm, const Patch& p) {
    return !(centered_norm > 1e-9 * std::sqrt(static_cast<double>(p.size())));
  }
  static std::optional<Eigen::VectorXd> zscore(const Patch& p) {
    const Eigen::VectorXd a = p.array() - p.mean();
    const double sd = std::sqrt(a.squaredNorm() / static_cast<double>(p.size()));
    if (degenerate(a.norm(), p)) return std::nullopt;
    return Eigen::VectorXd(a / sd);
  }
  static double correlation(const Patch& t, const Patch& c) {
    const Eigen::VectorXd a = c.array() - c.mean();
    const Eigen::VectorXd b = t.array() - t.mean();
    const double na = a.norm(), nb = b.norm();
    if (degenerate(na, c) || degenerate(nb, t)) return 0.0;
    return std::clamp(a.dot(b) / (na * nb), -1.0, 1.0);
  }
};

// Shared machinery for MI and CCRE: a joint distribution Q(i, j) built from
// per-pixel row weights X(k, i) (candidate side, possibly cumulative) and
// column weights Y(k, j), with F = sum Q log(Q / (row(i) * col(j))).
struct InfoTerms {
  Eigen::MatrixXd q;           // rows x cols joint (cumulative) distribution
  Eigen::VectorXd row;         // row normalizer
  Eigen::VectorXd col;         // plain marginal of the column side
  Eigen::MatrixXd log_ratio;   // log(q / (row * col)), zero where q == 0
};

InfoTerms info_terms(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, const Eigen::VectorXd& col_marginal) {
  const double inv_n = 1.0 / static_cast<double>(x.rows());
  InfoTerms it;
  it.q = x.transpose() * y * inv_n;
  it.row = it.q.rowwise().sum();
  it.col = col_marginal;
  it.log_ratio = Eigen::MatrixXd::Zero(it.q.rows(), it.q.cols());
  for (Eigen::Index i = 0; i < it.q.rows(); ++i)
    for (Eigen::Index j = 0; j < it.q.cols(); ++j)
      if (it.q(i, j) > 0.0) it.log_ratio(i, j) = std::log(it.q(i, j) / (it.row[i] * it.col[j]));
  return it;
}

double info_value(const InfoTerms& it) { return (it.q.array() * it.log_ratio.array()).sum(); }

// Second derivative of F with respect to the row-side intensities at fixed
// column side, contracted with dIdp. The column marginal is independent of
// the row side.
Eigen::MatrixXd info_row_hessian(const Eigen::MatrixXd& x, const Eigen::MatrixXd& dx, const Eigen::MatrixXd& ddx,
                                 const Eigen::MatrixXd& y, const InfoTerms& it, const Eigen::MatrixXd& j) {
  const double inv_n = 1.0 / static_cast<double>(x.rows());
  const auto s = j.cols();
  const Eigen::VectorXd w = (ddx.array() * (y * it.log_ratio.transpose()).array()).rowwise().sum() * inv_n;
  Eigen::MatrixXd h = j.transpose() * w.asDiagonal() * j;
  for (Eigen::Index i = 0; i < x.cols(); ++i) {
    if (it.row[i] <= 0.0) continue;
    // D(j', :) = d q(i, j') / dp for every column bin j'.
    const Eigen::MatrixXd d = (y.array().colwise() * dx.col(i).array()).matrix().transpose() * j * inv_n;
    Eigen::VectorXd drow = Eigen::VectorXd::Zero(s);
    for (Eigen::Index c = 0; c < y.cols(); ++c) {
      drow += d.row(c).transpose();
      if (it.q(i, c) > 0.0) h += d.row(c).transpose() * d.row(c) / it.q(i, c);
    }
    h -= drow * drow.transpose() / it.row[i];
  }
  return h;
}

class MutualInformationModel final : public AppearanceModel {
 public:
  explicit MutualInformationModel(const AmConfig& cfg) : AppearanceModel(cfg), mapper_(cfg.bins, cfg.spline_order) {}

  double similarity(const Patch& t, const Patch& c) const override {
    check_sizes(t, c);
    const auto wc = mapper_.weights(c), wt = mapper_.weights(t);
    return info_value(terms(wc.w, wt.w));
  }

  Eigen::VectorXd gradient(const Patch& t, const Patch& c, Side wrt) const override {
    check_sizes(t, c);
    // MI is symmetric in its arguments, so the template derivative is the
    // candidate derivative with the roles swapped.
    const auto wm = mapper_.weights(wrt == Side::candidate ? c : t);
    const auto wf = mapper_.weights(wrt == Side::candidate ? t : c);
    const InfoTerms it = terms(wm.w, wf.w);
    // dF/dv_k = (1/N) sum_ij dX(k,i) Y(k,j) log(q_ij / row_i)
    Eigen::MatrixXd lr = it.log_ratio;
    for (Eigen::Index j = 0; j < lr.cols(); ++j)
      for (Eigen::Index i = 0; i < lr.rows(); ++i)
        if (it.q(i, j) > 0.0) lr(i, j) += std::log(it.col[j]);
    return (wm.dw.array() * (wf.w * lr.transpose()).array()).rowwise().sum() / static_cast<double>(t.size());
  }

  Eigen::MatrixXd curvature(const Patch& t, const Patch&, const Eigen::MatrixXd& dIdp) const override {
    check_jacobian(t, dIdp);
    const auto wt = mapper_.weights(t);
    const InfoTerms it = terms(wt.w, wt.w);
    return negative_definite_part(info_row_hessian(wt.w, wt.dw, wt.ddw, wt.w, it, dIdp));
  }

  double likelihood_scale(const Patch& t) const override { return static_cast<double>(t.size()) * variance(t); }

 private:
  static InfoTerms terms(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y) {
    return info_terms(x, y, y.colwise().mean().transpose());
  }
  BinMapper mapper_;
};

// CCRE with C(i, j) = P(cumulative-side bin > i, plain-side bin = j).
class CumulativeResidualModel final : public AppearanceModel {
 public:
  explicit CumulativeResidualModel(const AmConfig& cfg)
      : AppearanceModel(cfg), mapper_(cfg.bins, cfg.spline_order), upper_(cfg.bins, cfg.bins) {
    for (int a = 0; a < cfg.bins; ++a)
      for (int b = 0; b < cfg.bins; ++b) upper_(a, b) = a > b ? 1.0 : 0.0;
  }

  double similarity(const Patch& t, const Patch& c) const override {
    check_sizes(t, c);
    const State s = state(t, c);
    return info_value(s.it);
  }

  Eigen::VectorXd gradient(const Patch& t, const Patch& c, Side wrt) const override {
    check_sizes(t, c);
    const State s = state(t, c);
    const double inv_n = 1.0 / static_cast<double>(t.size());
    const bool cumulative_side = (wrt == Side::candidate) != cfg_.ccre_cumulative_template;
    if (cumulative_side)
      return (s.dcum.array() * (s.plain.w * s.it.log_ratio.transpose()).array()).rowwise().sum() * inv_n;
    // Plain side also moves its own marginal.
    const Eigen::VectorXd ratio = (s.it.q.colwise().sum().transpose().array() / s.it.col.array().max(1e-300)).matrix();
    Eigen::VectorXd g = (s.plain.dw.array() * (s.cum * s.it.log_ratio).array()).rowwise().sum() * inv_n;
    g -= s.plain.dw * ratio * inv_n;
    return g;
  }

  Eigen::MatrixXd curvature(const Patch& t, const Patch&, const Eigen::MatrixXd& dIdp) const override {
    check_jacobian(t, dIdp);
    const State s = state(t, t);
    if (!cfg_.ccre_cumulative_template)
      return negative_definite_part(info_row_hessian(s.cum, s.dcum, s.ddcum, s.plain.w, s.it, dIdp));
    return negative_definite_part(plain_hessian(s, dIdp));
  }

  double likelihood_scale(const Patch& t) const override { return static_cast<double>(t.size()) * variance(t); }

 private:
  struct State {
    Eigen::MatrixXd cum, dcum, ddcum;
    BinMapper::Dense plain;
    InfoTerms it;
  };

  State state(const Patch& t, const Patch& c) const {
    const Patch& cum_src = cfg_.ccre_cumulative_template ? t : c;
    const Patch& plain_src = cfg_.ccre_cumulative_template ? c : t;
    const auto wx = mapper_.weights(cum_src);
    State s;
    s.cum = wx.w * upper_;
    s.dcum = wx.dw * upper_;
    s.ddcum = wx.ddw * upper_;
    s.plain = mapper_.weights(plain_src);
    s.it = info_terms(s.cum, s.plain.w, s.plain.w.colwise().mean().transpose());
    return s;
  }

  // Hessian with respect to the plain side (reversed orientation).
  static Eigen::MatrixXd plain_hessian(const State& s, const Eigen::MatrixXd& j) {
    const double inv_n = 1.0 / static_cast<double>(j.rows());
    const auto sdim = j.cols();
    const auto& y = s.plain;
    const Eigen::VectorXd r = s.it.q.colwise().sum().transpose();
    const Eigen::VectorXd ratio = (r.array() / s.it.col.array().max(1e-300)).matrix();
    const Eigen::VectorXd w =
        ((y.ddw.array() * (s.cum * s.it.log_ratio).array()).rowwise().sum().matrix() - y.ddw * ratio) * inv_n;
    Eigen::MatrixXd h = j.transpose() * w.asDiagonal() * j;
    for (Eigen::Index jb = 0; jb < y.w.cols(); ++jb) {
      if (s.it.col[jb] <= 0.0) continue;
      const Eigen::MatrixXd d = (s.cum.array().colwise() * y.dw.col(jb).array()).matrix().transpose() * j * inv_n;
      const Eigen::VectorXd dp = j.transpose() * y.dw.col(jb) * inv_n;
      Eigen::VectorXd dr = Eigen::VectorXd::Zero(sdim);
      for (Eigen::Index i = 0; i < s.cum.cols(); ++i) {
        dr += d.row(i).transpose();
        if (s.it.q(i, jb) > 0.0) h += d.row(i).transpose() * d.row(i) / s.it.q(i, jb);
      }
      const double p = s.it.col[jb];
      h -= (dr * dp.transpose() + dp * dr.transpose()) / p;
      h += r[jb] * dp * dp.transpose() / (p * p);
    }
    return h;
  }

  BinMapper mapper_;
  Eigen::MatrixXd upper_;
};

}  // namespace

std::unique_ptr<AppearanceModel> make_appearance_model(const AmConfig& cfg) {
  switch (cfg.kind) {
    case AmKind::ssd: return std::make_unique<SsdModel>(cfg);
    case AmKind::scv:
    case AmKind::rscv:
    case AmKind::lscv: return std::make_unique<ConditionalVarianceModel>(cfg);
    case AmKind::zncc:
    case AmKind::ncc: return std::make_unique<CorrelationModel>(cfg);
    case AmKind::mi: return std::make_unique<MutualInformationModel>(cfg);
    case AmKind::ccre: return std::make_unique<CumulativeResidualModel>(cfg);
  }
  fail(ErrorCode::invalid_argument, "unknown appearance model");
}

}  // namespace regtrack
