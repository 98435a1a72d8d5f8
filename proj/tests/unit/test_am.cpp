#include "am/appearance.hpp"
#include "am/histogram.hpp"
#include "core/error.hpp"
#include "support.hpp"

#include <doctest.h>

#include <Eigen/Dense>

#include <algorithm>
#include <numeric>

using namespace regtrack;
using testing::random_patch;

namespace {

std::unique_ptr<AppearanceModel> model(AmKind kind, int res = 4, bool ccre_template = false) {
  AmConfig cfg;
  cfg.kind = kind;
  cfg.resolution_x = cfg.resolution_y = res;
  cfg.ccre_cumulative_template = ccre_template;
  return make_appearance_model(cfg);
}

// Scalar cubic B-spline and bin convention, written out independently:
// 8 bins, one padding bin per side, bin coordinate 1 + 5 v / 255.
double bspline(double x) {
  x = std::abs(x);
  if (x < 1.0) return 2.0 / 3.0 - x * x + 0.5 * x * x * x;
  if (x < 2.0) return (2.0 - x) * (2.0 - x) * (2.0 - x) / 6.0;
  return 0.0;
}
double membership(double v, int bin) { return bspline(1.0 + 5.0 * std::clamp(v, 0.0, 255.0) / 255.0 - bin); }

// P(i, j) with rows from a and columns from b.
std::vector<std::vector<double>> brute_joint(const Patch& a, const Patch& b) {
  std::vector<std::vector<double>> p(8, std::vector<double>(8, 0.0));
  for (Eigen::Index k = 0; k < a.size(); ++k)
    for (int i = 0; i < 8; ++i)
      for (int j = 0; j < 8; ++j) p[i][j] += membership(a[k], i) * membership(b[k], j) / a.size();
  return p;
}

double brute_mi(const Patch& t, const Patch& c) {
  const auto p = brute_joint(c, t);
  double s = 0.0;
  for (int i = 0; i < 8; ++i)
    for (int j = 0; j < 8; ++j) {
      double pi = 0, pj = 0;
      for (int k = 0; k < 8; ++k) pi += p[i][k], pj += p[k][j];
      if (p[i][j] > 0) s += p[i][j] * std::log(p[i][j] / (pi * pj));
    }
  return s;
}

double brute_ccre(const Patch& t, const Patch& c) {
  const auto p = brute_joint(c, t);
  double s = 0.0;
  for (int i = 0; i < 8; ++i) {
    std::vector<double> cij(8, 0.0);
    double pc = 0.0;
    for (int j = 0; j < 8; ++j) {
      for (int a = i + 1; a < 8; ++a) cij[j] += p[a][j];
      pc += cij[j];
    }
    for (int j = 0; j < 8; ++j) {
      double pj = 0;
      for (int a = 0; a < 8; ++a) pj += p[a][j];
      if (cij[j] > 0) s += cij[j] * std::log(cij[j] / (pc * pj));
    }
  }
  return s;
}

Eigen::VectorXd fd_gradient(const AppearanceModel& am, const Patch& t, const Patch& c, Side wrt, double h) {
  Eigen::VectorXd g(t.size());
  for (Eigen::Index k = 0; k < t.size(); ++k) {
    Patch a = wrt == Side::candidate ? c : t, b = a;
    a[k] += h;
    b[k] -= h;
    const double fa = wrt == Side::candidate ? am.similarity(t, a) : am.similarity(a, c);
    const double fb = wrt == Side::candidate ? am.similarity(t, b) : am.similarity(b, c);
    g[k] = (fa - fb) / (2 * h);
  }
  return g;
}

double max_eigenvalue(const Eigen::MatrixXd& h) {
  return Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(0.5 * (h + h.transpose())).eigenvalues().maxCoeff();
}

}  // namespace

TEST_CASE("names round trip") {
  for (auto k : kAllAmKinds) CHECK(parse_am_kind(to_string(k)) == k);
  CHECK_THROWS_AS(parse_am_kind("sad"), Error);
}

TEST_CASE("self similarity is each kind's maximum value") {
  std::mt19937_64 rng(1);
  const Patch t = random_patch(rng, 16);
  CHECK(model(AmKind::ssd)->similarity(t, t) == 0.0);
  CHECK(std::abs(model(AmKind::zncc)->similarity(t, t)) < 1e-12);
  CHECK(std::abs(model(AmKind::ncc)->similarity(t, t) - 1.0) < 1e-12);
  for (auto k : {AmKind::scv, AmKind::rscv, AmKind::lscv}) CHECK(std::abs(model(k)->similarity(t, t)) < 1e-9);
  CHECK(std::abs(model(AmKind::mi)->similarity(t, t) - brute_mi(t, t)) < 1e-12);
  CHECK(std::abs(model(AmKind::ccre)->similarity(t, t) - brute_ccre(t, t)) < 1e-12);
}

TEST_CASE("MI and CCRE match the scalar histogram oracle off the diagonal") {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    const Patch t = random_patch(rng, 16, 0.0, 255.0), c = random_patch(rng, 16, 0.0, 255.0);
    CHECK(std::abs(model(AmKind::mi)->similarity(t, c) - brute_mi(t, c)) < 1e-12);
    CHECK(std::abs(model(AmKind::ccre)->similarity(t, c) - brute_ccre(t, c)) < 1e-12);
  }
}

TEST_CASE("MI of a patch with itself is bounded by its marginal entropy") {
  // Soft binning spreads mass off the diagonal, so MI(t, t) sits below H(t).
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const Patch t = random_patch(rng, 64, 0.0, 255.0);
    const BinMapper m(8, 3);
    const Eigen::VectorXd p = marginal_histogram(m, t);
    double h = 0.0;
    for (Eigen::Index i = 0; i < p.size(); ++i)
      if (p[i] > 0) h -= p[i] * std::log(p[i]);
    const double mi = model(AmKind::mi)->similarity(t, t);
    CHECK(mi > 0.0);
    CHECK(mi <= h + 1e-12);
  }
}

TEST_CASE("small literal examples") {
  const Patch zero = Patch::Zero(4), one = Patch::Ones(4);
  CHECK(model(AmKind::ssd)->similarity(zero, one) == -4.0);
  std::mt19937_64 rng(4);
  const Patch t = random_patch(rng, 16);
  const Patch c = 2.5 * t.array() + 7.0;
  CHECK(std::abs(model(AmKind::ncc)->similarity(t, c) - 1.0) < 1e-12);
  CHECK(std::abs(model(AmKind::zncc)->similarity(t, c)) < 1e-9);
  const Eigen::VectorXd g = model(AmKind::ssd)->gradient(t, c, Side::candidate);
  CHECK((g + 2.0 * (c - t)).norm() == 0.0);
}

TEST_CASE("zero-variance patches give the degenerate score") {
  std::mt19937_64 rng(5);
  const Patch t = random_patch(rng, 16), flat = Patch::Constant(16, 80.0);
  CHECK(model(AmKind::ncc)->similarity(t, flat) == 0.0);
  CHECK(model(AmKind::ncc)->similarity(flat, flat) == 0.0);
  CHECK(model(AmKind::zncc)->similarity(t, flat) == -32.0);
  CHECK(model(AmKind::ncc)->gradient(t, flat, Side::candidate).norm() == 0.0);
  CHECK(std::isfinite(model(AmKind::zncc)->nn_distance(flat, t)));
}

TEST_CASE("length mismatches are rejected") {
  const Patch a = Patch::Ones(16), b = Patch::Ones(9);
  for (auto k : kAllAmKinds) {
    const auto am = model(k);
    CHECK_THROWS_AS(am->similarity(a, b), Error);
    CHECK_THROWS_AS(am->gradient(a, b, Side::candidate), Error);
    CHECK_THROWS_AS(am->curvature(a, a, Eigen::MatrixXd::Ones(9, 2)), Error);
    CHECK_THROWS_AS(am->nn_distance(a, b), Error);
  }
}

TEST_CASE("gradients match central differences") {
  std::mt19937_64 rng(6);
  for (auto k : kAllAmKinds)
    for (bool tmpl : {false, true}) {
      if (tmpl && k != AmKind::ccre) continue;
      const auto am = model(k, 4, tmpl);
      for (int trial = 0; trial < 20; ++trial) {
        const Patch t = random_patch(rng, 16), c = random_patch(rng, 16);
        for (Side wrt : {Side::candidate, Side::templ}) {
          const Eigen::VectorXd g = am->gradient(t, c, wrt), f = fd_gradient(*am, t, c, wrt, 1e-3);
          INFO(std::string(to_string(k)), " wrt ", std::string(wrt == Side::candidate ? "candidate" : "template"));
          // The floor covers kinds whose gradient vanishes identically on 16-pixel patches; h = 1e-3 on
          // values of order 1e4 leaves roundoff near 1e-9.
          CHECK((g - f).norm() <= 1e-3 * std::max(f.norm(), 1e-6));
        }
      }
    }
}

TEST_CASE("gradient vanishes at c = t for smooth kinds") {
  std::mt19937_64 rng(7);
  for (auto k : {AmKind::ssd, AmKind::zncc, AmKind::ncc, AmKind::mi, AmKind::scv, AmKind::rscv, AmKind::lscv}) {
    const auto am = model(k);
    for (int trial = 0; trial < 10; ++trial) {
      const Patch t = random_patch(rng, 16);
      INFO(std::string(to_string(k)));
      CHECK(am->gradient(t, t, Side::candidate).cwiseAbs().maxCoeff() < 1e-6);
    }
  }
}

TEST_CASE("curvature is symmetric and negative semi-definite") {
  std::mt19937_64 rng(8);
  std::normal_distribution<double> n(0.0, 3.0);
  for (auto k : kAllAmKinds)
    for (bool tmpl : {false, true}) {
      if (tmpl && k != AmKind::ccre) continue;
      const auto am = model(k, 4, tmpl);
      for (int trial = 0; trial < 20; ++trial) {
        const Patch t = random_patch(rng, 16);
        Eigen::MatrixXd j(16, 6);
        for (Eigen::Index i = 0; i < j.size(); ++i) j(i) = n(rng);
        const Eigen::MatrixXd h = am->curvature(t, t, j);
        INFO(std::string(to_string(k)));
        CHECK((h - h.transpose()).cwiseAbs().maxCoeff() <= 1e-10 * std::max(1.0, h.norm()));
        CHECK(max_eigenvalue(h) <= 1e-8 * std::max(1.0, h.norm()));
      }
    }
}

TEST_CASE("SSD curvature is the negated Gauss-Newton matrix") {
  std::mt19937_64 rng(9);
  const Patch t = random_patch(rng, 5);
  const Eigen::MatrixXd h = model(AmKind::ssd)->curvature(t, t, Eigen::MatrixXd::Identity(5, 5));
  CHECK((h + 2.0 * Eigen::MatrixXd::Identity(5, 5)).norm() == 0.0);
}

TEST_CASE("curvature matches second differences where it is the exact Hessian") {
  // NCC always; MI and CCRE because their curvature is the exact Hessian at c = t
  // whenever that Hessian is already negative semi-definite.
  std::mt19937_64 rng(10);
  for (auto k : {AmKind::ncc, AmKind::zncc, AmKind::ssd}) {
    const auto am = model(k);
    for (int trial = 0; trial < 10; ++trial) {
      Patch t = random_patch(rng, 16);
      t = (t.array() - t.mean()) / std::sqrt((t.array() - t.mean()).square().mean());
      Eigen::MatrixXd j(16, 4);
      std::normal_distribution<double> n(0.0, 1.0);
      for (Eigen::Index i = 0; i < j.size(); ++i) j(i) = n(rng);
      j = Eigen::HouseholderQR<Eigen::MatrixXd>(j).householderQ() * Eigen::MatrixXd::Identity(16, 4);
      const Eigen::MatrixXd h = am->curvature(t, t, j);
      const double e = 1e-3;
      Eigen::MatrixXd f(4, 4);
      for (int a = 0; a < 4; ++a)
        for (int b = 0; b < 4; ++b) {
          auto val = [&](double sa, double sb) {
            return am->similarity(t, Patch(t + sa * j.col(a) + sb * j.col(b)));
          };
          f(a, b) = (val(e, e) - val(e, -e) - val(-e, e) + val(-e, -e)) / (4 * e * e);
        }
      INFO(std::string(to_string(k)));
      CHECK((h - f).norm() <= 1e-2 * f.norm());
    }
  }
}

TEST_CASE("MI and CCRE curvature equals the exact self-Hessian when that is definite") {
  // Differentiate the analytic gradient along dIdp at c = t and compare with
  // the curvature before its eigenvalues are flipped.
  std::mt19937_64 rng(11);
  for (auto k : {AmKind::mi, AmKind::ccre})
    for (bool tmpl : {false, true}) {
      if (tmpl && k == AmKind::mi) continue;
      const auto am = model(k, 4, tmpl);
      int compared = 0;
      for (int trial = 0; trial < 200 && compared < 10; ++trial) {
        const Patch t = random_patch(rng, 16);
        Eigen::MatrixXd j(16, 3);
        std::normal_distribution<double> n(0.0, 2.0);
        for (Eigen::Index i = 0; i < j.size(); ++i) j(i) = n(rng);
        // Exact Hessian of p -> f(t, t + J p) at p = 0 by differencing the gradient.
        const double e = 1e-4;
        Eigen::MatrixXd f(3, 3);
        for (int a = 0; a < 3; ++a) {
          const Patch up = t + e * j.col(a), dn = t - e * j.col(a);
          f.col(a) = j.transpose() * (am->gradient(t, up, Side::candidate) - am->gradient(t, dn, Side::candidate)) /
                     (2 * e);
        }
        f = 0.5 * (f + f.transpose());
        if (max_eigenvalue(f) > -1e-6 * f.norm()) continue;  // not definite: curvature is its projection
        ++compared;
        INFO(std::string(to_string(k)), std::string(tmpl ? " (template cumulative)" : ""));
        CHECK((am->curvature(t, t, j) - f).norm() <= 1e-3 * f.norm());
      }
      CHECK(compared > 0);
    }
}

TEST_CASE("negative definite part flips positive eigenvalues") {
  Eigen::MatrixXd h(2, 2);
  h << 1, 0, 0, -3;
  const auto n = negative_definite_part(h);
  CHECK(n(0, 0) == doctest::Approx(-1));
  CHECK(n(1, 1) == doctest::Approx(-3));
}

TEST_CASE("nn_distance") {
  std::mt19937_64 rng(12);
  for (auto k : kAllAmKinds) {
    // 100 pixels: with 16 the 72 LSCV mapping coefficients fit any pair exactly.
    const auto am = model(k, 10);
    for (int trial = 0; trial < 20; ++trial) {
      const Patch a = random_patch(rng, 100), b = random_patch(rng, 100);
      INFO(std::string(to_string(k)));
      // Relative to the patch energy: the SCV family goes through a pseudo-inverse.
      CHECK(std::abs(am->nn_distance(a, a)) < 1e-12 * a.squaredNorm());
      CHECK(am->nn_distance(a, b) > am->nn_distance(a, a));
      CHECK(am->nn_distance(a, b) >= 0.0);
    }
  }
  const auto z = model(AmKind::zncc), n = model(AmKind::ncc);
  for (int trial = 0; trial < 50; ++trial) {
    const Patch a = random_patch(rng, 16), b = random_patch(rng, 16);
    CHECK(std::abs(z->nn_distance(a, b) - 32.0 * (1.0 - n->similarity(a, b))) < 1e-6);
  }
}

TEST_CASE("nn features embed the distance exactly where claimed") {
  std::mt19937_64 rng(13);
  for (auto k : kAllAmKinds) {
    const auto am = model(k);
    if (!am->features_exact()) continue;
    for (int trial = 0; trial < 20; ++trial) {
      const Patch a = random_patch(rng, 16), b = random_patch(rng, 16);
      CHECK(std::abs((am->nn_features(a) - am->nn_features(b)).squaredNorm() - am->nn_distance(a, b)) <
            1e-9 * std::max(1.0, am->nn_distance(a, b)));
    }
  }
}

TEST_CASE("argmax consistency over candidate sets containing the template") {
  std::mt19937_64 rng(14);
  for (auto k : kAllAmKinds) {
    const auto am = model(k, 10);
    for (int trial = 0; trial < 20; ++trial) {
      const Patch t = random_patch(rng, 100);
      const double self = am->similarity(t, t);
      for (int i = 0; i < 50; ++i) {
        INFO(std::string(to_string(k)));
        CHECK(am->similarity(t, random_patch(rng, 100)) < self);
      }
    }
  }
}

TEST_CASE("illumination invariance") {
  std::mt19937_64 rng(15);
  for (int trial = 0; trial < 20; ++trial) {
    const Patch t = random_patch(rng, 16), c = random_patch(rng, 16, 60, 120);
    const Patch c2 = 1.7 * c.array() + 12.0;
    for (auto k : {AmKind::ncc, AmKind::zncc}) {
      const auto am = model(k);
      CHECK(std::abs(am->similarity(t, c) - am->similarity(t, c2)) < 1e-9);
    }
  }
  // Bin permutation: with linear (order 1) binning an intensity on a bin
  // center is a one-hot membership, so relabelling the candidate's bins only
  // permutes rows of the joint histogram.
  const BinMapper m(8, 1);
  AmConfig cfg;
  cfg.kind = AmKind::mi;
  cfg.spline_order = 1;
  const auto mi = make_appearance_model(cfg);
  std::vector<int> perm(8);
  std::iota(perm.begin(), perm.end(), 0);
  for (int trial = 0; trial < 20; ++trial) {
    std::shuffle(perm.begin(), perm.end(), rng);
    std::uniform_int_distribution<int> bin(0, 7);
    Patch t(32), c(32), cp(32);
    for (int i = 0; i < 32; ++i) {
      const int b = bin(rng);
      t[i] = m.bin_center(bin(rng));
      c[i] = m.bin_center(b);
      cp[i] = m.bin_center(perm[static_cast<std::size_t>(b)]);
    }
    CHECK(std::abs(mi->similarity(t, c) - mi->similarity(t, cp)) < 1e-9);
  }
}

TEST_CASE("ZNCC and NCC order candidates identically") {
  std::mt19937_64 rng(16);
  const auto z = model(AmKind::zncc), n = model(AmKind::ncc);
  for (int trial = 0; trial < 20; ++trial) {
    const Patch t = random_patch(rng, 16);
    std::vector<Patch> cs;
    for (int i = 0; i < 30; ++i) cs.push_back(random_patch(rng, 16));
    std::vector<int> oz(30), on(30);
    std::iota(oz.begin(), oz.end(), 0);
    on = oz;
    std::sort(oz.begin(), oz.end(), [&](int a, int b) { return z->similarity(t, cs[a]) < z->similarity(t, cs[b]); });
    std::sort(on.begin(), on.end(), [&](int a, int b) { return n->similarity(t, cs[a]) < n->similarity(t, cs[b]); });
    CHECK(oz == on);
  }
}

TEST_CASE("joint histogram invariants") {
  std::mt19937_64 rng(17);
  const BinMapper m(8, 3);
  for (int trial = 0; trial < 20; ++trial) {
    const Patch a = random_patch(rng, 40, 0, 255), b = random_patch(rng, 40, 0, 255);
    const auto jh = joint_histogram(m, a, b);
    CHECK(jh.counts.minCoeff() >= 0.0);
    CHECK(std::abs(jh.counts.sum() - 1.0) < 1e-12);
    CHECK((jh.counts.rowwise().sum() - jh.candidate_marginal).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((jh.counts.colwise().sum().transpose() - jh.template_marginal).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((marginal_histogram(m, a) - jh.candidate_marginal).cwiseAbs().maxCoeff() < 1e-12);
    const auto brute = brute_joint(a, b);
    for (int i = 0; i < 8; ++i)
      for (int j = 0; j < 8; ++j) CHECK(std::abs(jh.counts(i, j) - brute[i][j]) < 1e-12);
  }
  CHECK_THROWS_AS(BinMapper(3, 3), Error);
}

TEST_CASE("B-spline memberships have partition of unity and linear precision") {
  const BinMapper m(8, 3);
  for (double v = 0.0; v <= 255.0; v += 0.37) {
    Patch p(1);
    p[0] = v;
    const auto d = m.weights(p);
    CHECK(std::abs(d.w.sum() - 1.0) < 1e-12);
    double centroid = 0.0;
    for (int j = 0; j < 8; ++j) centroid += j * d.w(0, j);
    CHECK(std::abs(centroid - m.coord(v)) < 1e-12);
    CHECK(std::abs(d.dw.sum()) < 1e-12);
  }
}

TEST_CASE("SCV mapping is the identity at c = t") {
  std::mt19937_64 rng(18);
  for (int trial = 0; trial < 20; ++trial) {
    const Patch t = random_patch(rng, 100, 0, 255);
    for (auto k : {AmKind::scv, AmKind::rscv, AmKind::lscv}) CHECK(std::abs(model(k, 10)->similarity(t, t)) < 1e-8);
  }
}

TEST_CASE("SCV is invariant to a global affine intensity change") {
  std::mt19937_64 rng(19);
  for (int trial = 0; trial < 20; ++trial) {
    const Patch t = random_patch(rng, 100, 0, 255);
    const Patch c = 0.6 * t.array() + 40.0;
    CHECK(std::abs(model(AmKind::scv, 10)->similarity(t, c)) < 1e-8);
  }
}
