#include "sm/search.hpp"

#include "core/error.hpp"
#include "sm/particle_filter.hpp"
#include "sm/sample_index.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <string>

namespace regtrack {

const char* to_string(SmKind kind) {
  switch (kind) {
    case SmKind::falk: return "falk";
    case SmKind::ialk: return "ialk";
    case SmKind::fclk: return "fclk";
    case SmKind::iclk: return "iclk";
    case SmKind::esm: return "esm";
    case SmKind::nn: return "nn";
    case SmKind::nnic: return "nnic";
    case SmKind::pf: return "pf";
  }
  return "?";
}

SmKind parse_sm_kind(std::string_view name) {
  for (auto k : kAllSmKinds)
    if (name == to_string(k)) return k;
  fail(ErrorCode::parse, "unknown SM '" + std::string(name) + "'");
}

void SmConfig::validate() const {
  if (max_iterations < 1) fail(ErrorCode::invalid_argument, "max_iterations must be positive");
  if (!(epsilon > 0.0)) fail(ErrorCode::invalid_argument, "epsilon must be positive");
  if (nn_samples < 1 || nn_trees < 1 || nn_checks < 1)
    fail(ErrorCode::invalid_argument, "nn sample, tree and check counts must be positive");
  if (!(nn_sigma > 0.0) || !(pf_sigma > 0.0)) fail(ErrorCode::invalid_argument, "sampling sigmas must be positive");
  if (pf_particles < 1) fail(ErrorCode::invalid_argument, "pf_particles must be positive");
  if (!(pf_resample_threshold > 0.0 && pf_resample_threshold <= 1.0))
    fail(ErrorCode::invalid_argument, "pf_resample_threshold must lie in (0,1]");
}

Normalization normalization_for(const Corners& box) {
  Point center = Point::Zero();
  for (const auto& c : box) {
    if (!c.allFinite()) fail(ErrorCode::invalid_argument, "corners must be finite");
    center += c / 4.0;
  }
  double area2 = 0.0;
  for (int i = 0; i < 4; ++i) {
    const Point& a = box[i];
    const Point& b = box[(i + 1) % 4];
    area2 += a.x() * b.y() - b.x() * a.y();
  }
  const double scale = std::sqrt(std::abs(area2) / 2.0);
  if (!(scale > 0.0) || corners_degenerate(box)) fail(ErrorCode::degenerate, "degenerate bounding box");
  return Normalization{center, scale};
}

SearchContext::SearchContext(std::shared_ptr<const AppearanceModel> am, SsmKind ssm, const GrayImage& first_frame,
                             const Corners& init, int res_x, int res_y)
    : am_(std::move(am)), ssm_(ssm), first_frame_(first_frame) {
  if (!am_) fail(ErrorCode::invalid_argument, "search context needs an appearance model");
  if (res_x < 2 || res_y < 2) fail(ErrorCode::invalid_argument, "sampling resolution must be at least 2x2");
  if (first_frame_.empty()) fail(ErrorCode::invalid_argument, "first frame is empty");
  norm_ = normalization_for(init);
  for (int i = 0; i < 4; ++i) {
    const Point& c = init[static_cast<std::size_t>(i)];
    if (c.x() < 0.0 || c.y() < 0.0 || c.x() > first_frame_.width() - 1 || c.y() > first_frame_.height() - 1)
      fail(ErrorCode::invalid_argument, "initial corners must lie inside the first frame");
    ref_corners_[static_cast<std::size_t>(i)] = norm_.to_reference(c);
  }
  const Mat3 to_ref = fit_homography(unit_square_corners(), ref_corners_);
  const SampleGrid unit = make_unit_grid(res_x, res_y);
  grid_.reserve(unit.size());
  for (const auto& x : unit.points) grid_.push_back(project(to_ref, x));

  const WarpParams id = ssm_.identity();
  const WarpDifferential wd(ssm_, id);
  identity_jacobians_.reserve(grid_.size());
  for (const auto& x : grid_) identity_jacobians_.push_back(wd.jacobian(x));

  const auto pts = image_points(id);
  templ_ = sample_patch(first_frame_, pts);
  templ_grad_ = image_gradient(first_frame_, pts);
  const auto n = static_cast<Eigen::Index>(grid_.size());
  template_jacobian_.resize(n, ssm_.dof());
  for (Eigen::Index k = 0; k < n; ++k) {
    const Eigen::RowVector2d g(norm_.scale * templ_grad_.dx[k], norm_.scale * templ_grad_.dy[k]);
    template_jacobian_.row(k) = g * identity_jacobians_[static_cast<std::size_t>(k)];
  }
  template_curvature_ = am_->curvature(templ_, templ_, template_jacobian_);
}

std::vector<Point> SearchContext::image_points(const WarpParams& p) const {
  const WarpDifferential wd(ssm_, p);
  std::vector<Point> out;
  out.reserve(grid_.size());
  for (const auto& x : grid_) out.push_back(norm_.to_image(wd.apply(x)));
  return out;
}

Corners SearchContext::image_corners(const WarpParams& p) const {
  const WarpDifferential wd(ssm_, p);
  Corners out;
  for (std::size_t i = 0; i < 4; ++i) out[i] = norm_.to_image(wd.apply(ref_corners_[i]));
  return out;
}

Patch SearchContext::candidate(const GrayImage& frame, const WarpParams& p) const {
  return sample_patch(frame, image_points(p));
}

Eigen::MatrixXd SearchContext::forward_jacobian(const GrayImage& frame, const WarpParams& p,
                                                bool compositional) const {
  const WarpDifferential wd(ssm_, p);
  std::vector<Point> pts;
  pts.reserve(grid_.size());
  for (const auto& x : grid_) pts.push_back(norm_.to_image(wd.apply(x)));
  const PixGrad grad = image_gradient(frame, pts);
  const auto n = static_cast<Eigen::Index>(grid_.size());
  Eigen::MatrixXd j(n, ssm_.dof());
  for (Eigen::Index k = 0; k < n; ++k) {
    const auto& x = grid_[static_cast<std::size_t>(k)];
    const Eigen::RowVector2d g(norm_.scale * grad.dx[k], norm_.scale * grad.dy[k]);
    if (compositional)
      j.row(k) = g * (wd.spatial_jacobian(x) * identity_jacobians_[static_cast<std::size_t>(k)]);
    else
      j.row(k) = g * wd.jacobian(x);
  }
  return j;
}

Eigen::MatrixXd SearchContext::inverse_additive_jacobian(const WarpParams& p) const {
  const WarpDifferential wd(ssm_, p);
  const auto n = static_cast<Eigen::Index>(grid_.size());
  Eigen::MatrixXd j(n, ssm_.dof());
  for (Eigen::Index k = 0; k < n; ++k) {
    const auto& x = grid_[static_cast<std::size_t>(k)];
    const Eigen::Matrix2d a = wd.spatial_jacobian(x);
    if (!(std::abs(a.determinant()) > 1e-12)) fail(ErrorCode::singular_warp, "warp is locally singular");
    const Eigen::RowVector2d g(norm_.scale * templ_grad_.dx[k], norm_.scale * templ_grad_.dy[k]);
    j.row(k) = (g * a.inverse()) * wd.jacobian(x);
  }
  return j;
}

Eigen::VectorXd solve_step(const Eigen::MatrixXd& curvature, const Eigen::VectorXd& g) {
  if (curvature.rows() != g.size() || curvature.cols() != g.size())
    fail(ErrorCode::dimension_mismatch, "curvature and gradient sizes differ");
  const Eigen::MatrixXd a = -0.5 * (curvature + curvature.transpose());
  Eigen::LDLT<Eigen::MatrixXd> ldlt(a);
  bool ok = ldlt.info() == Eigen::Success && ldlt.isPositive();
  if (ok) {
    const Eigen::VectorXd d = ldlt.vectorD();
    const double top = d.cwiseAbs().maxCoeff();
    ok = top > 0.0 && d.minCoeff() > 1e-14 * top;
  }
  if (!ok) {
    const double trace = a.trace();
    const double mu = 1e-8 * (trace > 0.0 ? trace / static_cast<double>(g.size()) : 1.0);
    ldlt.compute(a + mu * Eigen::MatrixXd::Identity(g.size(), g.size()));
  }
  return ldlt.solve(g);
}

Eigen::VectorXd forward_delta(const AppearanceModel& am, const Patch& t, const Patch& c, const Eigen::MatrixXd& j) {
  const Eigen::VectorXd g = j.transpose() * am.gradient(t, c, Side::candidate);
  return solve_step(am.curvature(t, c, j), g);
}

Eigen::VectorXd inverse_delta(const AppearanceModel& am, const Patch& t, const Patch& c, const Eigen::MatrixXd& j,
                              const Eigen::MatrixXd& curvature) {
  const Eigen::VectorXd g = j.transpose() * am.gradient(t, c, Side::templ);
  return solve_step(curvature, g);
}

Eigen::VectorXd esm_delta(const AppearanceModel& am, const Patch& t, const Patch& c, const Eigen::MatrixXd& jt,
                          const Eigen::MatrixXd& jc) {
  if (jt.rows() != jc.rows() || jt.cols() != jc.cols())
    fail(ErrorCode::dimension_mismatch, "template and current Jacobians differ in shape");
  // Moving the candidate by +d/2 and the template by -d/2 meet in the middle.
  const Eigen::VectorXd g =
      0.5 * (jc.transpose() * am.gradient(t, c, Side::candidate) - jt.transpose() * am.gradient(t, c, Side::templ));
  const Eigen::MatrixXd mean = 0.5 * (jt + jc);
  return solve_step(am.curvature(t, c, mean), g);
}

StepResult lk_step(LkVariant variant, const SearchContext& ctx, const WarpParams& p, const GrayImage& frame) {
  const auto& ssm = ctx.ssm();
  const Patch c = ctx.candidate(frame, p);
  StepResult r;
  switch (variant) {
    case LkVariant::falk:
      r.delta = forward_delta(ctx.am(), ctx.templ(), c, ctx.forward_jacobian(frame, p, false));
      r.params = ssm.update(p, r.delta, UpdateMode::additive);
      break;
    case LkVariant::fclk:
      r.delta = forward_delta(ctx.am(), ctx.templ(), c, ctx.forward_jacobian(frame, p, true));
      r.params = ssm.update(p, r.delta, UpdateMode::compositional);
      break;
    case LkVariant::ialk:
      r.delta = forward_delta(ctx.am(), ctx.templ(), c, ctx.inverse_additive_jacobian(p));
      r.params = ssm.update(p, r.delta, UpdateMode::additive);
      break;
    case LkVariant::iclk:
      r.delta = inverse_delta(ctx.am(), ctx.templ(), c, ctx.template_jacobian(), ctx.template_curvature());
      r.params = ssm.update(p, r.delta, UpdateMode::inverse_compositional);
      break;
  }
  return r;
}

StepResult esm_step(const SearchContext& ctx, const WarpParams& p, const GrayImage& frame) {
  const Patch c = ctx.candidate(frame, p);
  StepResult r;
  r.delta = esm_delta(ctx.am(), ctx.templ(), c, ctx.template_jacobian(), ctx.forward_jacobian(frame, p, true));
  r.params = ctx.ssm().update(p, r.delta, UpdateMode::compositional);
  return r;
}

ConvergenceResult iterate_to_convergence(const StepFn& step, const CornerFn& corners, const WarpParams& p0,
                                         const SmConfig& cfg) {
  ConvergenceResult r;
  r.params = p0;
  Corners prev;
  try {
    prev = corners(p0);
  } catch (const Error&) {
    r.failed = true;
    return r;
  }
  for (int it = 1; it <= cfg.max_iterations; ++it) {
    WarpParams next;
    Corners now;
    try {
      next = step(r.params);
      if (!next.allFinite()) {
        r.failed = true;
        return r;
      }
      now = corners(next);
    } catch (const Error&) {
      r.failed = true;
      return r;
    }
    double change = 0.0;
    for (std::size_t i = 0; i < 4; ++i) change += (now[i] - prev[i]).squaredNorm();
    r.params = next;
    r.iterations = it;
    prev = now;
    if (!std::isfinite(change)) {
      r.failed = true;
      return r;
    }
    if (std::sqrt(change) <= cfg.epsilon) {
      r.converged = true;
      return r;
    }
  }
  return r;
}

void validate_combination(SmKind sm, SsmKind ssm, const SmConfig& cfg) {
  if (sm == SmKind::pf && ssm != SsmKind::translation && !cfg.pf_experimental)
    fail(ErrorCode::unsupported, std::string("pf with ") + to_string(ssm) +
                                     " requires the experimental flag (only translation is supported)");
}

namespace {

class GradientMethod final : public SearchMethod {
 public:
  GradientMethod(SmKind kind, const SmConfig& cfg, std::shared_ptr<const SearchContext> ctx)
      : kind_(kind), cfg_(cfg), ctx_(std::move(ctx)) {}

  SmKind kind() const override { return kind_; }

  SearchOutcome track(const GrayImage& frame, const WarpParams& p) override {
    const auto r = run(kind_, *ctx_, cfg_, frame, p);
    return SearchOutcome{r.params, r.failed, r.iterations};
  }

  static ConvergenceResult run(SmKind kind, const SearchContext& ctx, const SmConfig& cfg, const GrayImage& frame,
                               const WarpParams& p) {
    StepFn step;
    switch (kind) {
      case SmKind::falk: step = [&](const WarpParams& q) { return lk_step(LkVariant::falk, ctx, q, frame).params; }; break;
      case SmKind::ialk: step = [&](const WarpParams& q) { return lk_step(LkVariant::ialk, ctx, q, frame).params; }; break;
      case SmKind::fclk: step = [&](const WarpParams& q) { return lk_step(LkVariant::fclk, ctx, q, frame).params; }; break;
      case SmKind::iclk: step = [&](const WarpParams& q) { return lk_step(LkVariant::iclk, ctx, q, frame).params; }; break;
      case SmKind::esm: step = [&](const WarpParams& q) { return esm_step(ctx, q, frame).params; }; break;
      default: fail(ErrorCode::invalid_argument, "not a gradient search method");
    }
    return iterate_to_convergence(step, [&](const WarpParams& q) { return ctx.image_corners(q); }, p, cfg);
  }

 private:
  SmKind kind_;
  SmConfig cfg_;
  std::shared_ptr<const SearchContext> ctx_;
};

class NearestNeighbourMethod final : public SearchMethod {
 public:
  NearestNeighbourMethod(SmKind kind, const SmConfig& cfg, std::shared_ptr<const SearchContext> ctx)
      : kind_(kind), cfg_(cfg), ctx_(std::move(ctx)), index_(build_index(*ctx_, cfg_)) {}

  SmKind kind() const override { return kind_; }

  SearchOutcome track(const GrayImage& frame, const WarpParams& p) override {
    WarpParams jumped;
    try {
      jumped = nn_step(*ctx_, *index_, p, frame);
    } catch (const Error&) {
      return SearchOutcome{p, true, 0};
    }
    if (!jumped.allFinite()) return SearchOutcome{p, true, 0};
    if (kind_ == SmKind::nn) return SearchOutcome{jumped, false, 1};
    const auto r = GradientMethod::run(SmKind::iclk, *ctx_, cfg_, frame, jumped);
    return SearchOutcome{r.params, r.failed, r.iterations + 1};
  }

 private:
  SmKind kind_;
  SmConfig cfg_;
  std::shared_ptr<const SearchContext> ctx_;
  std::shared_ptr<const SampleIndex> index_;
};

class ParticleFilterMethod final : public SearchMethod {
 public:
  ParticleFilterMethod(const SmConfig& cfg, std::shared_ptr<const SearchContext> ctx)
      : filter_(ctx, cfg, ctx->ssm().identity()) {}

  SmKind kind() const override { return SmKind::pf; }

  SearchOutcome track(const GrayImage& frame, const WarpParams&) override {
    const WarpParams p = filter_.step(frame);
    return SearchOutcome{p, !p.allFinite(), 1};
  }

 private:
  ParticleFilter filter_;
};

}  // namespace

std::unique_ptr<SearchMethod> make_search_method(SmKind kind, const SmConfig& cfg,
                                                 std::shared_ptr<const SearchContext> ctx) {
  if (!ctx) fail(ErrorCode::invalid_argument, "search method needs a context");
  cfg.validate();
  validate_combination(kind, ctx->ssm().kind(), cfg);
  switch (kind) {
    case SmKind::falk:
    case SmKind::ialk:
    case SmKind::fclk:
    case SmKind::iclk:
    case SmKind::esm: return std::make_unique<GradientMethod>(kind, cfg, std::move(ctx));
    case SmKind::nn:
    case SmKind::nnic: return std::make_unique<NearestNeighbourMethod>(kind, cfg, std::move(ctx));
    case SmKind::pf: return std::make_unique<ParticleFilterMethod>(cfg, std::move(ctx));
  }
  fail(ErrorCode::invalid_argument, "unknown search method");
}

}  // namespace regtrack
