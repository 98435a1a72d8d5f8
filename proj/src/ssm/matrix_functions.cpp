#include "ssm/matrix_functions.hpp"

#include "core/error.hpp"

#include <Eigen/LU>

#include <cmath>

namespace regtrack {

namespace {

double norm1(const Eigen::MatrixXd& a) { return a.cwiseAbs().colwise().sum().maxCoeff(); }

}  // namespace

Eigen::MatrixXd matrix_exp(const Eigen::MatrixXd& a) {
  if (a.rows() != a.cols()) fail(ErrorCode::dimension_mismatch, "matrix_exp needs a square matrix");
  const auto n = a.rows();
  const double norm = norm1(a);
  if (!std::isfinite(norm)) fail(ErrorCode::invalid_argument, "matrix_exp of non-finite matrix");
  int squarings = 0;
  if (norm > 0.5) squarings = static_cast<int>(std::ceil(std::log2(norm / 0.5)));
  const Eigen::MatrixXd scaled = a / std::ldexp(1.0, squarings);

  const Eigen::MatrixXd identity = Eigen::MatrixXd::Identity(n, n);
  Eigen::MatrixXd result = identity;
  for (int k = kExpTaylorDegree; k >= 1; --k) result = identity + scaled * result / static_cast<double>(k);
  for (int s = 0; s < squarings; ++s) result = result * result;
  return result;
}

Eigen::MatrixXd matrix_log(const Eigen::MatrixXd& a) {
  if (a.rows() != a.cols()) fail(ErrorCode::dimension_mismatch, "matrix_log needs a square matrix");
  const auto n = a.rows();
  const Eigen::MatrixXd identity = Eigen::MatrixXd::Identity(n, n);

  Eigen::MatrixXd y = a;
  int roots = 0;
  while (norm1(y - identity) > 0.25) {
    if (++roots > 40) fail(ErrorCode::singular_warp, "matrix_log: square-root sequence did not approach identity");
    Eigen::MatrixXd z = identity;
    bool settled = false;
    for (int it = 0; it < 100 && !settled; ++it) {
      Eigen::FullPivLU<Eigen::MatrixXd> ly(y), lz(z);
      if (!ly.isInvertible() || !lz.isInvertible())
        fail(ErrorCode::singular_warp, "matrix_log: singular iterate in square root");
      const Eigen::MatrixXd y_next = 0.5 * (y + lz.inverse());
      const Eigen::MatrixXd z_next = 0.5 * (z + ly.inverse());
      const double change = norm1(y_next - y);
      y = y_next;
      z = z_next;
      if (!y.allFinite()) fail(ErrorCode::singular_warp, "matrix_log: square root diverged");
      settled = change <= 1e-15 * norm1(y);
    }
    // Without a real principal square root the iteration wanders instead of settling.
    if (!settled) fail(ErrorCode::singular_warp, "matrix_log: no real principal square root");
  }

  const Eigen::MatrixXd x = y - identity;
  Eigen::MatrixXd result = Eigen::MatrixXd::Zero(n, n);
  Eigen::MatrixXd power = x;
  for (int k = 1; k <= 200; ++k) {
    const Eigen::MatrixXd term = power / static_cast<double>(k);
    result += (k % 2 == 1) ? term : Eigen::MatrixXd(-term);
    if (norm1(term) < 1e-18) break;
    power = power * x;
  }
  result *= std::ldexp(1.0, roots);
  if (norm1(matrix_exp(result) - a) > 1e-8 * std::max(1.0, norm1(a)))
    fail(ErrorCode::singular_warp, "matrix_log: no real principal logarithm");
  return result;
}

}  // namespace regtrack
