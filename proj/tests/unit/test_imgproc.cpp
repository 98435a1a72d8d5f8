#include "core/error.hpp"
#include "imgproc/image.hpp"
#include "support.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>

using namespace regtrack;

namespace {

GrayImage random_image(int w, int h, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 255.0);
  GrayImage img(w, h);
  for (double& v : img.data()) v = u(rng);
  return img;
}

// Scalar reference for bilinear sampling with border clamping.
double reference_sample(const GrayImage& img, double x, double y) {
  x = std::min(std::max(x, 0.0), img.width() - 1.0);
  y = std::min(std::max(y, 0.0), img.height() - 1.0);
  const int x0 = static_cast<int>(std::floor(x)), y0 = static_cast<int>(std::floor(y));
  const int x1 = std::min(x0 + 1, img.width() - 1), y1 = std::min(y0 + 1, img.height() - 1);
  const double fx = x - x0, fy = y - y0;
  return (1 - fx) * (1 - fy) * img.at(x0, y0) + fx * (1 - fy) * img.at(x1, y0) + (1 - fx) * fy * img.at(x0, y1) +
         fx * fy * img.at(x1, y1);
}

}  // namespace

TEST_CASE("smoothing a constant image leaves it unchanged") {
  const GrayImage img(9, 7, 7.0);
  const auto out = gaussian_smooth(img, 5);
  for (double v : out.data()) CHECK(v == doctest::Approx(7.0).epsilon(1e-14));
}

TEST_CASE("kernel size 1 is the identity") {
  const auto img = random_image(12, 10, 1);
  const auto out = gaussian_smooth(img, 1);
  for (std::size_t i = 0; i < img.data().size(); ++i) CHECK(out.data()[i] == img.data()[i]);
}

TEST_CASE("impulse response is the outer product of the taps") {
  GrayImage img(11, 11, 0.0);
  img.at(5, 5) = 1.0;
  const auto out = gaussian_smooth(img, 5);
  const auto taps = gaussian_kernel(5, default_gaussian_sigma(5));
  CHECK(out.at(5, 5) == doctest::Approx(taps[2] * taps[2]).epsilon(1e-12));
  CHECK(out.at(4, 6) == doctest::Approx(taps[1] * taps[3]).epsilon(1e-12));
  double sum = 0.0;
  for (double v : out.data()) sum += v;
  CHECK(std::abs(sum - 1.0) < 1e-9);
}

TEST_CASE("default sigma and kernel validation") {
  CHECK(default_gaussian_sigma(5) == doctest::Approx(1.1));
  CHECK_THROWS_AS(gaussian_kernel(4, 1.0), Error);
  CHECK_THROWS_AS(gaussian_kernel(5, 0.0), Error);
}

TEST_CASE("smoothing preserves interior mass") {
  // A block far from the border keeps all of its mass after blurring.
  const auto img = random_image(60, 60, 2);
  GrayImage block(60, 60, 0.0);
  double in = 0.0;
  for (int y = 20; y < 40; ++y)
    for (int x = 20; x < 40; ++x) in += block.at(x, y) = img.at(x, y);
  double got = 0.0;
  for (double v : gaussian_smooth(block, 5).data()) got += v;
  CHECK(std::abs(got - in) / 400.0 < 1e-6);
}

TEST_CASE("bilinear sampling") {
  GrayImage img(8, 8, 0.0);
  img.at(3, 5) = 10.0;
  img.at(4, 5) = 20.0;
  img.at(0, 0) = 42.0;
  CHECK(sample(img, 3, 5) == 10.0);
  CHECK(sample(img, 3.5, 5) == doctest::Approx(15.0).epsilon(1e-15));
  CHECK(sample(img, -4.2, -7.9) == 42.0);

  const auto r = random_image(17, 13, 3);
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-5.0, 22.0);
  for (int i = 0; i < 500; ++i) {
    const double x = u(rng), y = u(rng);
    CHECK(std::abs(sample(r, x, y) - reference_sample(r, x, y)) < 1e-9);
  }
  CHECK(sample(r, 16, 12) == r.at(16, 12));
}

TEST_CASE("sampling is Lipschitz in the coordinates") {
  const auto img = random_image(20, 20, 5);
  double lo = 255, hi = 0;
  for (double v : img.data()) lo = std::min(lo, v), hi = std::max(hi, v);
  const double L = 2.0 * (hi - lo);  // bounds the bilinear interpolant's slope along any direction
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(0.0, 19.0);
  const double eps = 1e-4;
  for (int i = 0; i < 500; ++i) {
    const double x = u(rng), y = u(rng);
    CHECK(std::abs(sample(img, x + eps, y - eps) - sample(img, x, y)) <= L * eps * std::sqrt(2.0) + 1e-12);
  }
}

TEST_CASE("gradients") {
  GrayImage ramp(32, 32), flat(32, 32, 9.0), quad(32, 32);
  for (int y = 0; y < 32; ++y)
    for (int x = 0; x < 32; ++x) {
      ramp.at(x, y) = 3.0 * x + 4.0 * y;
      quad.at(x, y) = static_cast<double>(x * x);
    }
  std::vector<Point> pts;
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(1.0, 30.0);
  for (int i = 0; i < 100; ++i) pts.emplace_back(u(rng), u(rng));
  const auto gr = image_gradient(ramp, pts);
  const auto gf = image_gradient(flat, pts);
  for (int i = 0; i < 100; ++i) {
    CHECK(std::abs(gr.dx[i] - 3.0) < 1e-9);
    CHECK(std::abs(gr.dy[i] - 4.0) < 1e-9);
    CHECK(gf.dx[i] == 0.0);
    CHECK(gf.dy[i] == 0.0);
  }
  const std::vector<Point> at10{Point(10, 5)};
  CHECK(std::abs(image_gradient(quad, at10).dx[0] - 20.0) < 1e-6);
}

TEST_CASE("gradient agrees with finite differences of sampling") {
  const auto img = testing::smooth_texture(40, 40, 8);
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(5.0, 34.0);
  for (int i = 0; i < 50; ++i) {
    const Point p(u(rng), u(rng));
    const auto g = image_gradient(img, std::vector<Point>{p});
    const double h = 0.5;
    const double fx = (sample(img, p.x() + h, p.y()) - sample(img, p.x() - h, p.y())) / (2 * h);
    CHECK(std::abs(g.dx[0] - fx) < 1e-12);
  }
}

TEST_CASE("gradient is exact on bilinear polynomials") {
  GrayImage img(30, 30);
  for (int y = 0; y < 30; ++y)
    for (int x = 0; x < 30; ++x) img.at(x, y) = 5.0 + 2.0 * x - 1.5 * y + 0.1 * x * y;
  std::mt19937_64 rng(10);
  std::uniform_real_distribution<double> u(1.0, 28.0);
  for (int i = 0; i < 100; ++i) {
    const Point p(u(rng), u(rng));
    const auto g = image_gradient(img, std::vector<Point>{p});
    CHECK(std::abs(g.dx[0] - (2.0 + 0.1 * p.y())) < 1e-9);
    CHECK(std::abs(g.dy[0] - (-1.5 + 0.1 * p.x())) < 1e-9);
  }
}

TEST_CASE("unit grid spans the centered square") {
  const auto g = make_unit_grid(5, 3);
  REQUIRE(g.size() == 15);
  CHECK(g.points.front() == Point(-0.5, -0.5));
  CHECK(g.points.back() == Point(0.5, 0.5));
  CHECK(g.points[2] == Point(0.0, -0.5));
  CHECK_THROWS_AS(make_unit_grid(1, 4), Error);
}

TEST_CASE("PGM round trip and colour conversion") {
  const auto dir = std::filesystem::temp_directory_path() / "regtrack_imgproc";
  std::filesystem::create_directories(dir);
  GrayImage img(6, 4);
  for (int i = 0; i < 24; ++i) img.data()[static_cast<std::size_t>(i)] = i * 10;
  write_pgm(img, (dir / "a.pgm").string());
  const auto back = read_image((dir / "a.pgm").string());
  REQUIRE(back.width() == 6);
  for (int i = 0; i < 24; ++i) CHECK(back.data()[static_cast<std::size_t>(i)] == i * 10);

  {
    std::ofstream f(dir / "b.ppm");
    f << "P3\n# comment\n2 2\n255\n255 0 0  0 255 0\n0 0 255  100 100 100\n";
  }
  const auto c = read_image((dir / "b.ppm").string());
  CHECK(c.at(0, 0) == doctest::Approx(0.299 * 255));
  CHECK(c.at(1, 1) == doctest::Approx(100.0));
  {
    std::ofstream f(dir / "bad.pgm");
    f << "P5\n2 2\n255\n";
  }
  CHECK_THROWS_AS(read_image((dir / "bad.pgm").string()), Error);
  CHECK_THROWS_AS(read_image((dir / "missing.pgm").string()), Error);
  std::filesystem::remove_all(dir);
}

TEST_CASE("image constructor validation") {
  CHECK_THROWS_AS(GrayImage(1, 5), Error);
  CHECK_THROWS_AS(GrayImage(3, 3, std::vector<double>(8)), Error);
}
