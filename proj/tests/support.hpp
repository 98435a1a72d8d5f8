#pragma once

// Shared fixtures for the unit and acceptance tests.

#include "imgproc/image.hpp"
#include "ssm/warp.hpp"

#include <Eigen/Core>

#include <cmath>
#include <random>

namespace regtrack::testing {

inline Patch random_patch(std::mt19937_64& rng, int n, double lo = 20.0, double hi = 235.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Patch p(n);
  for (int i = 0; i < n; ++i) p[i] = u(rng);
  return p;
}

inline WarpParams random_params(const WarpModel& m, std::mt19937_64& rng, double scale = 0.05) {
  std::normal_distribution<double> n(0.0, scale);
  WarpParams p(m.dof());
  for (int i = 0; i < m.dof(); ++i) p[i] = n(rng);
  return p;
}

/// Random points in a box around the unit square.
inline Point random_point(std::mt19937_64& rng, double r = 1.0) {
  std::uniform_real_distribution<double> u(-r, r);
  return Point(u(rng), u(rng));
}

/// Sum of products of random sines: smooth, textured, exactly known.
inline GrayImage smooth_texture(int w, int h, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> f(0.05, 0.25), ph(0.0, 6.283185307179586);
  GrayImage img(w, h);
  double fx[4], fy[4], px[4], py[4];
  for (int k = 0; k < 4; ++k) fx[k] = f(rng), fy[k] = f(rng), px[k] = ph(rng), py[k] = ph(rng);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double v = 0.0;
      for (int k = 0; k < 4; ++k) v += std::sin(fx[k] * x + px[k]) * std::cos(fy[k] * y + py[k]);
      img.at(x, y) = 128.0 + 25.0 * v;
    }
  return img;
}

inline Corners square_box(double cx, double cy, double size) {
  const double h = 0.5 * size;
  return {Point(cx - h, cy - h), Point(cx + h, cy - h), Point(cx + h, cy + h), Point(cx - h, cy + h)};
}

inline double corner_rms(const Corners& a, const Corners& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < 4; ++i) s += (a[i] - b[i]).squaredNorm();
  return std::sqrt(s / 4.0);
}

/// Renders base seen through the homography taking box0 onto box1.
inline GrayImage warp_image(const GrayImage& base, const Corners& box0, const Corners& box1) {
  const Mat3 back = fit_homography(box1, box0);
  GrayImage out(base.width(), base.height());
  for (int y = 0; y < base.height(); ++y)
    for (int x = 0; x < base.width(); ++x) {
      const Point q = project(back, Point(x, y));
      out.at(x, y) = sample(base, q.x(), q.y());
    }
  return out;
}

}  // namespace regtrack::testing
