#pragma once

#include <Eigen/Core>

#include <span>
#include <string>
#include <vector>

namespace regtrack {

using Point = Eigen::Vector2d;
using Patch = Eigen::VectorXd;

/// Single-channel image with real-valued intensities in [0,255], row-major.
class GrayImage {
 public:
  GrayImage() = default;
  GrayImage(int width, int height, double fill = 0.0);
  GrayImage(int width, int height, std::vector<double> data);

  int width() const { return width_; }
  int height() const { return height_; }
  bool empty() const { return data_.empty(); }

  double at(int x, int y) const { return data_[static_cast<std::size_t>(y) * width_ + x]; }
  double& at(int x, int y) { return data_[static_cast<std::size_t>(y) * width_ + x]; }

  std::span<const double> data() const { return data_; }
  std::span<double> data() { return data_; }

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<double> data_;
};

/// Row-major lattice of sub-pixel sampling positions.
struct SampleGrid {
  std::vector<Point> points;
  int nx = 0;
  int ny = 0;

  std::size_t size() const { return points.size(); }
};

/// nx-by-ny lattice spanning the centered unit square [-0.5,0.5]^2, corners included.
SampleGrid make_unit_grid(int nx, int ny);

struct PixGrad {
  Eigen::VectorXd dx;
  Eigen::VectorXd dy;
};

/// Size-derived Gaussian sigma, 0.3*((k-1)/2 - 1) + 0.8.
double default_gaussian_sigma(int kernel_size);

/// Normalized 1D Gaussian taps.
std::vector<double> gaussian_kernel(int kernel_size, double sigma);

/// Separable Gaussian blur with border replication. sigma <= 0 selects the size-derived default.
GrayImage gaussian_smooth(const GrayImage& img, int kernel_size = 5, double sigma = 0.0);

/// Bilinear interpolation; coordinates are clamped to the pixel lattice first.
double sample(const GrayImage& img, double x, double y);

Patch sample_patch(const GrayImage& img, std::span<const Point> points);
inline Patch sample_patch(const GrayImage& img, const SampleGrid& grid) { return sample_patch(img, grid.points); }

inline constexpr double kGradientStep = 0.5;

/// Central differences of the bilinear interpolant with a half-pixel step.
PixGrad image_gradient(const GrayImage& img, std::span<const Point> points, double step = kGradientStep);
inline PixGrad image_gradient(const GrayImage& img, const SampleGrid& grid) {
  return image_gradient(img, grid.points);
}

// PNM codecs. P2/P5 are read bit-exactly; P3/P6 are converted with
// 0.299R + 0.587G + 0.114B. Writing produces 8-bit binary P5.
GrayImage read_image(const std::string& path);
void write_pgm(const GrayImage& img, const std::string& path);

}  // namespace regtrack
