#pragma once

#include <Eigen/Core>

namespace regtrack {

// Matrix exponential by scaling and squaring: A is scaled by 2^-s until its
// 1-norm is at most 0.5, a degree-16 Taylor polynomial is evaluated with
// Horner's scheme, and the result is squared s times.
inline constexpr int kExpTaylorDegree = 16;
Eigen::MatrixXd matrix_exp(const Eigen::MatrixXd& a);

// Principal matrix logarithm by inverse scaling and squaring (Denman-Beavers
// square roots until ||A - I||_1 <= 0.25, then the Mercator series). Throws
// singular_warp when A has no real principal logarithm within reach.
Eigen::MatrixXd matrix_log(const Eigen::MatrixXd& a);

}  // namespace regtrack
