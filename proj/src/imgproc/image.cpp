#include "imgproc/image.hpp"

#include "core/error.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace regtrack {

GrayImage::GrayImage(int width, int height, double fill)
    : GrayImage(width, height, std::vector<double>(static_cast<std::size_t>(std::max(width, 0)) *
                                                       static_cast<std::size_t>(std::max(height, 0)),
                                                   fill)) {}

GrayImage::GrayImage(int width, int height, std::vector<double> data)
    : width_(width), height_(height), data_(std::move(data)) {
  if (width < 2 || height < 2)
    fail(ErrorCode::invalid_argument, "image must be at least 2x2, got " + std::to_string(width) + "x" +
                                          std::to_string(height));
  if (data_.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height))
    fail(ErrorCode::dimension_mismatch, "image data length does not match width*height");
  for (double v : data_)
    if (!std::isfinite(v)) fail(ErrorCode::invalid_argument, "image contains non-finite intensity");
}

SampleGrid make_unit_grid(int nx, int ny) {
  if (nx < 2 || ny < 2) fail(ErrorCode::invalid_argument, "sampling resolution must be at least 2x2");
  SampleGrid grid;
  grid.nx = nx;
  grid.ny = ny;
  grid.points.reserve(static_cast<std::size_t>(nx) * ny);
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i)
      grid.points.emplace_back(-0.5 + static_cast<double>(i) / (nx - 1), -0.5 + static_cast<double>(j) / (ny - 1));
  return grid;
}

double default_gaussian_sigma(int kernel_size) { return 0.3 * ((kernel_size - 1) * 0.5 - 1.0) + 0.8; }

std::vector<double> gaussian_kernel(int kernel_size, double sigma) {
  if (kernel_size < 1 || kernel_size % 2 == 0)
    fail(ErrorCode::invalid_argument, "gaussian kernel size must be odd and >= 1, got " + std::to_string(kernel_size));
  if (!(sigma > 0.0)) fail(ErrorCode::invalid_argument, "gaussian sigma must be positive");
  const int half = kernel_size / 2;
  std::vector<double> taps(static_cast<std::size_t>(kernel_size));
  double sum = 0.0;
  for (int i = -half; i <= half; ++i) {
    taps[static_cast<std::size_t>(i + half)] = std::exp(-0.5 * i * i / (sigma * sigma));
    sum += taps[static_cast<std::size_t>(i + half)];
  }
  for (double& t : taps) t /= sum;
  return taps;
}

GrayImage gaussian_smooth(const GrayImage& img, int kernel_size, double sigma) {
  if (img.empty()) fail(ErrorCode::invalid_argument, "cannot smooth an empty image");
  if (sigma <= 0.0) sigma = default_gaussian_sigma(kernel_size);
  const auto taps = gaussian_kernel(kernel_size, sigma);
  if (kernel_size == 1) return img;
  const int half = kernel_size / 2;
  const int w = img.width(), h = img.height();

  GrayImage tmp(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int k = -half; k <= half; ++k) acc += taps[k + half] * img.at(std::clamp(x + k, 0, w - 1), y);
      tmp.at(x, y) = acc;
    }
  GrayImage out(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int k = -half; k <= half; ++k) acc += taps[k + half] * tmp.at(x, std::clamp(y + k, 0, h - 1));
      out.at(x, y) = acc;
    }
  return out;
}

double sample(const GrayImage& img, double x, double y) {
  const double xc = std::clamp(x, 0.0, static_cast<double>(img.width() - 1));
  const double yc = std::clamp(y, 0.0, static_cast<double>(img.height() - 1));
  const int x0 = std::min(static_cast<int>(xc), img.width() - 2);
  const int y0 = std::min(static_cast<int>(yc), img.height() - 2);
  const double fx = xc - x0, fy = yc - y0;
  const double top = (1.0 - fx) * img.at(x0, y0) + fx * img.at(x0 + 1, y0);
  const double bottom = (1.0 - fx) * img.at(x0, y0 + 1) + fx * img.at(x0 + 1, y0 + 1);
  return (1.0 - fy) * top + fy * bottom;
}

Patch sample_patch(const GrayImage& img, std::span<const Point> points) {
  Patch out(static_cast<Eigen::Index>(points.size()));
  for (std::size_t i = 0; i < points.size(); ++i) out[static_cast<Eigen::Index>(i)] = sample(img, points[i].x(), points[i].y());
  return out;
}

PixGrad image_gradient(const GrayImage& img, std::span<const Point> points, double step) {
  const auto n = static_cast<Eigen::Index>(points.size());
  PixGrad g{Eigen::VectorXd(n), Eigen::VectorXd(n)};
  const double inv = 1.0 / (2.0 * step);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Point& p = points[static_cast<std::size_t>(i)];
    g.dx[i] = (sample(img, p.x() + step, p.y()) - sample(img, p.x() - step, p.y())) * inv;
    g.dy[i] = (sample(img, p.x(), p.y() + step) - sample(img, p.x(), p.y() - step)) * inv;
  }
  return g;
}

namespace {

// Reads the next header token, skipping whitespace and '#' comments.
std::string next_token(std::istream& in) {
  std::string tok;
  while (in) {
    const int c = in.peek();
    if (c == EOF) break;
    if (c == '#') {
      std::string dummy;
      std::getline(in, dummy);
    } else if (std::isspace(c)) {
      in.get();
    } else {
      break;
    }
  }
  while (in) {
    const int c = in.peek();
    if (c == EOF || std::isspace(c) || c == '#') break;
    tok.push_back(static_cast<char>(in.get()));
  }
  return tok;
}

int header_int(std::istream& in, const std::string& path, const char* what) {
  const auto tok = next_token(in);
  try {
    std::size_t used = 0;
    const int v = std::stoi(tok, &used);
    if (used != tok.size() || v <= 0) throw std::invalid_argument(tok);
    return v;
  } catch (const std::exception&) {
    fail(ErrorCode::parse, path + ": bad PNM " + what + " '" + tok + "'");
  }
}

}  // namespace

GrayImage read_image(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::io, "cannot open image '" + path + "'");
  const auto magic = next_token(in);
  if (magic != "P2" && magic != "P5" && magic != "P3" && magic != "P6")
    fail(ErrorCode::parse, path + ": unsupported image format (expected PGM/PPM)");
  const int w = header_int(in, path, "width");
  const int h = header_int(in, path, "height");
  const int maxval = header_int(in, path, "maxval");
  if (maxval > 65535) fail(ErrorCode::parse, path + ": maxval out of range");
  const bool binary = magic == "P5" || magic == "P6";
  const int channels = (magic == "P3" || magic == "P6") ? 3 : 1;
  const std::size_t count = static_cast<std::size_t>(w) * h * channels;
  std::vector<double> raw(count);
  if (binary) {
    in.get();  // single whitespace byte after maxval
    const int bytes = maxval > 255 ? 2 : 1;
    std::vector<unsigned char> buf(count * bytes);
    in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (in.gcount() != static_cast<std::streamsize>(buf.size())) fail(ErrorCode::parse, path + ": truncated pixel data");
    for (std::size_t i = 0; i < count; ++i)
      raw[i] = bytes == 1 ? buf[i] : static_cast<double>(buf[2 * i] << 8 | buf[2 * i + 1]);
  } else {
    for (std::size_t i = 0; i < count; ++i) {
      const auto tok = next_token(in);
      if (tok.empty()) fail(ErrorCode::parse, path + ": truncated pixel data");
      raw[i] = std::stod(tok);
    }
  }
  const double scale = maxval == 255 ? 1.0 : 255.0 / maxval;
  std::vector<double> gray(static_cast<std::size_t>(w) * h);
  for (std::size_t i = 0; i < gray.size(); ++i) {
    gray[i] = channels == 1 ? raw[i] * scale
                            : (0.299 * raw[3 * i] + 0.587 * raw[3 * i + 1] + 0.114 * raw[3 * i + 2]) * scale;
  }
  return GrayImage(w, h, std::move(gray));
}

void write_pgm(const GrayImage& img, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::io, "cannot write image '" + path + "'");
  out << "P5\n" << img.width() << ' ' << img.height() << "\n255\n";
  std::vector<unsigned char> buf(img.data().size());
  std::transform(img.data().begin(), img.data().end(), buf.begin(),
                 [](double v) { return static_cast<unsigned char>(std::lround(std::clamp(v, 0.0, 255.0))); });
  out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (!out) fail(ErrorCode::io, "failed writing image '" + path + "'");
}

}  // namespace regtrack
