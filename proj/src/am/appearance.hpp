#pragma once

#include "am/histogram.hpp"
#include "imgproc/image.hpp"

#include <Eigen/Core>

#include <array>
#include <memory>
#include <string_view>

namespace regtrack {

enum class AmKind { ssd, scv, rscv, lscv, zncc, ncc, mi, ccre };

inline constexpr std::array<AmKind, 8> kAllAmKinds = {AmKind::ssd,  AmKind::scv, AmKind::rscv, AmKind::lscv,
                                                      AmKind::zncc, AmKind::ncc, AmKind::mi,   AmKind::ccre};

const char* to_string(AmKind kind);
AmKind parse_am_kind(std::string_view name);

struct AmConfig {
  AmKind kind = AmKind::ssd;
  int bins = 8;
  int spline_order = 3;
  // LSCV subregion grid and the pixel layout of the patches it receives.
  int subregions_x = 3;
  int subregions_y = 3;
  int resolution_x = 50;
  int resolution_y = 50;
  // CCRE accumulates along the candidate axis unless this is set.
  bool ccre_cumulative_template = false;
};

enum class Side { candidate, templ };

/// Similarity f(t, c) between a template patch t and a candidate patch c.
/// Larger is better; every kind attains its maximum at c == t over
/// realistic candidate sets.
class AppearanceModel {
 public:
  explicit AppearanceModel(const AmConfig& cfg) : cfg_(cfg) {}
  virtual ~AppearanceModel() = default;

  AmKind kind() const { return cfg_.kind; }
  const AmConfig& config() const { return cfg_; }

  virtual double similarity(const Patch& t, const Patch& c) const = 0;

  /// df/dc (or df/dt) per pixel.
  virtual Eigen::VectorXd gradient(const Patch& t, const Patch& c, Side wrt) const = 0;

  /// Self-Hessian in parameter space, dIdp^T * (d^2 f / dI^2 at c = t) * dIdp.
  /// Always symmetric negative semi-definite.
  virtual Eigen::MatrixXd curvature(const Patch& t, const Patch& c, const Eigen::MatrixXd& dIdp) const = 0;

  /// Dissimilarity for index search, zero for identical patches.
  virtual double nn_distance(const Patch& a, const Patch& b) const;

  /// Vector embedding the search tree partitions. When features_exact() holds,
  /// nn_distance(a, b) equals the squared L2 distance of the embeddings.
  virtual Eigen::VectorXd nn_features(const Patch& p) const { return p; }
  virtual bool features_exact() const { return false; }
  /// True when nn_features returns its input unchanged.
  virtual bool features_are_raw() const { return true; }

  /// Factor converting nn_distance into squared-intensity units.
  virtual double likelihood_scale(const Patch& t) const;

 protected:
  static void check_sizes(const Patch& t, const Patch& c);
  AmConfig cfg_;
};

std::unique_ptr<AppearanceModel> make_appearance_model(const AmConfig& cfg);

/// Projects a symmetric matrix onto the negative semi-definite cone by
/// replacing every eigenvalue with -|lambda|.
Eigen::MatrixXd negative_definite_part(const Eigen::MatrixXd& h);

}  // namespace regtrack
