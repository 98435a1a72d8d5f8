#pragma once

#include "am/appearance.hpp"
#include "imgproc/image.hpp"
#include "ssm/warp.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <functional>
#include <memory>
#include <string_view>
#include <vector>

namespace regtrack {

enum class SmKind { falk, ialk, fclk, iclk, esm, nn, nnic, pf };

inline constexpr std::array<SmKind, 8> kAllSmKinds = {SmKind::falk, SmKind::ialk, SmKind::fclk, SmKind::iclk,
                                                      SmKind::esm,  SmKind::nn,   SmKind::nnic, SmKind::pf};

const char* to_string(SmKind kind);
SmKind parse_sm_kind(std::string_view name);

enum class LkVariant { falk, ialk, fclk, iclk };

struct SmConfig {
  int max_iterations = 30;
  // Corner-change threshold in image pixels.
  double epsilon = 0.001;

  int nn_samples = 1000;
  double nn_sigma = 0.05;
  int nn_trees = 4;
  // Leaf points scored per query before the tree search stops.
  int nn_checks = 512;
  bool nn_exact = false;

  int pf_particles = 1000;
  double pf_sigma = 0.05;
  // Resample when the effective sample size drops below this fraction of the particle count.
  double pf_resample_threshold = 0.5;
  bool pf_experimental = false;

  std::uint64_t seed = 0;

  void validate() const;
};

/// Similarity map from reference coordinates to the image: x -> center + scale * x.
/// The reference frame is the initial box translated to the origin and scaled
/// to unit area, so warp parameters are resolution independent.
struct Normalization {
  Point center = Point::Zero();
  double scale = 1.0;

  Point to_image(const Point& x) const { return center + scale * x; }
  Point to_reference(const Point& y) const { return (y - center) / scale; }
};

Normalization normalization_for(const Corners& box);

/// Everything about one tracking problem that is fixed once frame 0 is known.
class SearchContext {
 public:
  SearchContext(std::shared_ptr<const AppearanceModel> am, SsmKind ssm, const GrayImage& first_frame,
                const Corners& init, int res_x, int res_y);

  const AppearanceModel& am() const { return *am_; }
  const std::shared_ptr<const AppearanceModel>& am_ptr() const { return am_; }
  const WarpModel& ssm() const { return ssm_; }
  const Normalization& normalization() const { return norm_; }
  const std::vector<Point>& grid() const { return grid_; }
  const Corners& reference_corners() const { return ref_corners_; }
  const Patch& templ() const { return templ_; }
  /// s * grad I0 * dw/dp at the identity, one row per grid point.
  const Eigen::MatrixXd& template_jacobian() const { return template_jacobian_; }
  /// Self-curvature for the inverse compositional formulation (depends only on the template).
  const Eigen::MatrixXd& template_curvature() const { return template_curvature_; }
  const GrayImage& first_frame() const { return first_frame_; }

  std::vector<Point> image_points(const WarpParams& p) const;
  Corners image_corners(const WarpParams& p) const;
  Patch candidate(const GrayImage& frame, const WarpParams& p) const;

  /// Current-frame Jacobian, either d I(w(x, p + dp)) / d dp or d I(w(w(x, dp), p)) / d dp.
  Eigen::MatrixXd forward_jacobian(const GrayImage& frame, const WarpParams& p, bool compositional) const;
  /// Template gradients transferred through the inverse spatial Jacobian of w(., p).
  Eigen::MatrixXd inverse_additive_jacobian(const WarpParams& p) const;

 private:
  std::shared_ptr<const AppearanceModel> am_;
  WarpModel ssm_;
  GrayImage first_frame_;
  Normalization norm_;
  Corners ref_corners_;
  std::vector<Point> grid_;
  std::vector<WarpJacobian> identity_jacobians_;
  Patch templ_;
  PixGrad templ_grad_;
  Eigen::MatrixXd template_jacobian_;
  Eigen::MatrixXd template_curvature_;
};

/// Maximizer of the local quadratic model f + g.d + d'Hd/2 with H negative
/// semi-definite: d = -H^{-1} g via LDLT of -H, Tikhonov damped when singular.
Eigen::VectorXd solve_step(const Eigen::MatrixXd& curvature, const Eigen::VectorXd& g);

// Increments from explicit Jacobians. These are the pure cores of the step
// functions and let tests inject arbitrary Jacobians.
Eigen::VectorXd forward_delta(const AppearanceModel& am, const Patch& t, const Patch& c, const Eigen::MatrixXd& j);
Eigen::VectorXd inverse_delta(const AppearanceModel& am, const Patch& t, const Patch& c, const Eigen::MatrixXd& j,
                              const Eigen::MatrixXd& curvature);
Eigen::VectorXd esm_delta(const AppearanceModel& am, const Patch& t, const Patch& c, const Eigen::MatrixXd& jt,
                          const Eigen::MatrixXd& jc);

struct StepResult {
  WarpParams delta;
  WarpParams params;
};

StepResult lk_step(LkVariant variant, const SearchContext& ctx, const WarpParams& p, const GrayImage& frame);
StepResult esm_step(const SearchContext& ctx, const WarpParams& p, const GrayImage& frame);

struct ConvergenceResult {
  WarpParams params;
  int iterations = 0;
  bool converged = false;
  // A step threw or produced non-finite parameters; params hold the last valid value.
  bool failed = false;
};

using StepFn = std::function<WarpParams(const WarpParams&)>;
using CornerFn = std::function<Corners(const WarpParams&)>;

/// Repeats step until the L2 norm of the change of the 8 corner coordinates is
/// at most cfg.epsilon or cfg.max_iterations steps have run.
ConvergenceResult iterate_to_convergence(const StepFn& step, const CornerFn& corners, const WarpParams& p0,
                                         const SmConfig& cfg);

struct SearchOutcome {
  WarpParams params;
  bool failed = false;
  int iterations = 0;
};

/// Per-tracker search state. Not thread-safe; one instance per tracker.
class SearchMethod {
 public:
  virtual ~SearchMethod() = default;
  virtual SmKind kind() const = 0;
  virtual SearchOutcome track(const GrayImage& frame, const WarpParams& p) = 0;
};

/// Throws unsupported for PF with a non-translation SSM unless the experimental flag is set.
void validate_combination(SmKind sm, SsmKind ssm, const SmConfig& cfg);

std::unique_ptr<SearchMethod> make_search_method(SmKind kind, const SmConfig& cfg,
                                                 std::shared_ptr<const SearchContext> ctx);

}  // namespace regtrack
