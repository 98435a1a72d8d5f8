#include "core/error.hpp"
#include "eval/metrics.hpp"
#include "eval/sequence.hpp"
#include "support.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <algorithm>
#include <limits>

using namespace regtrack;
namespace fs = std::filesystem;

namespace {

Corners random_corners(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-50.0, 400.0);
  Corners c;
  for (auto& p : c) p = Point(u(rng), u(rng));
  return c;
}

EvalRecord record(std::vector<double> e) { return EvalRecord{"r", std::move(e)}; }

fs::path scratch(const char* name) {
  const auto dir = fs::temp_directory_path() / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

}  // namespace

TEST_CASE("alignment error fixtures") {
  const Corners a = testing::square_box(50, 50, 20);
  CHECK(alignment_error(a, a) == 0.0);
  Corners b = a;
  for (auto& p : b) p += Point(3, 4);
  CHECK(alignment_error(a, b) == 5.0);
  CHECK(alignment_error(a, b, ErrorMetric::mean) == 5.0);
  Corners c = a;
  c[2] += Point(0, 2);
  CHECK(alignment_error(a, c) == 1.0);
  CHECK(alignment_error(a, c, ErrorMetric::mean) == 0.5);
}

TEST_CASE("alignment error is a metric") {
  std::mt19937_64 rng(1);
  for (int i = 0; i < 1000; ++i) {
    const Corners a = random_corners(rng), b = random_corners(rng), c = random_corners(rng);
    CHECK(alignment_error(a, b) == alignment_error(b, a));
    CHECK(alignment_error(a, c) <= alignment_error(a, b) + alignment_error(b, c) + 1e-9);
  }
}

TEST_CASE("success rate fixtures") {
  const auto r = record({1, 2, 3, 4});
  CHECK(success_rate(r, 2.5) == 0.5);
  CHECK(success_rate(r, 0.0) == 0.0);
  CHECK(success_rate(r, 2.0) == 0.25);  // strict inequality
  std::vector<double> ten(10, 0.1), thirty(30, 0.1);
  for (int i = 0; i < 15; ++i) thirty[static_cast<std::size_t>(i)] = 9.0;
  const std::vector<EvalRecord> both = {record(ten), record(thirty)};
  CHECK(success_rate(both[0], 1.0) == 1.0);
  CHECK(success_rate(both[1], 1.0) == 0.5);
  CHECK(success_rate(both, 1.0) == 0.625);
  CHECK(sequence_mean_success_rate(both, 1.0) == 0.75);
  CHECK_THROWS_AS(success_rate(std::vector<EvalRecord>{}, 1.0), Error);
  CHECK_THROWS_AS(success_rate(record({}), 1.0), Error);
  CHECK_THROWS_AS(success_rate(r, -1.0), Error);
}

TEST_CASE("pooled SR is the frame-weighted mean of per-sequence SRs") {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.0, 25.0);
  std::uniform_int_distribution<int> len(1, 40);
  std::vector<EvalRecord> recs;
  for (int k = 0; k < 6; ++k) {
    std::vector<double> e(static_cast<std::size_t>(len(rng)));
    for (auto& v : e) v = u(rng);
    recs.push_back(record(e));
  }
  for (double tp : default_thresholds()) {
    // Integer hit counts on both sides: the comparison is exact.
    std::size_t hits = 0, total = 0;
    for (const auto& r : recs) {
      const auto n = r.errors.size();
      hits += static_cast<std::size_t>(std::llround(success_rate(r, tp) * static_cast<double>(n)));
      total += n;
    }
    CHECK(success_rate(recs, tp) == static_cast<double>(hits) / static_cast<double>(total));
  }
}

TEST_CASE("SR curves are monotone and start at zero") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 30.0);
  std::vector<double> e(200);
  for (auto& v : e) v = u(rng);
  e[0] = std::numeric_limits<double>::infinity();
  const std::vector<EvalRecord> recs = {record(e)};
  const auto curve = sr_curve(recs, default_thresholds());
  REQUIRE(curve.sr.size() == 41);
  CHECK(curve.thresholds.front() == 0.0);
  CHECK(curve.thresholds.back() == 20.0);
  CHECK(curve.sr.front() == 0.0);
  for (std::size_t i = 1; i < curve.sr.size(); ++i) CHECK(curve.sr[i] >= curve.sr[i - 1]);
  CHECK(curve.sr.back() < 1.0);
  CHECK(make_thresholds(1.0, 0.25).size() == 5);
}

TEST_CASE("evaluate excludes the first frame and marks diverged frames") {
  const Corners a = testing::square_box(10, 10, 4);
  Corners b = a;
  for (auto& p : b) p += Point(0, 1);
  const auto r = evaluate("s", {a, b, b}, {b, b, a}, {false, true, false});
  REQUIRE(r.errors.size() == 2);
  CHECK(std::isinf(r.errors[0]));
  CHECK(r.errors[1] == 1.0);
  CHECK_THROWS_AS(evaluate("s", {a}, {a, b}, {false}), Error);
}

TEST_CASE("ground truth parsing") {
  const std::string text =
      "frame ulx uly urx ury lrx lry llx lly\n"
      "f1.pgm 1 2 3 4 5 6 7 8\n"
      "f2.pgm 1.5 2.5 3.5 4.5 5.5 6.5 7.5 8.5\n"
      "f3.pgm -1 0 10 0 10 10 0 10\n";
  const auto gt = parse_ground_truth(text);
  REQUIRE(gt.frames.size() == 3);
  CHECK(gt.frames[1] == "f2.pgm");
  CHECK(gt.corners[0][1] == Point(3, 4));
  CHECK(gt.corners[1][3] == Point(7.5, 8.5));
  CHECK(gt.corners[2][0] == Point(-1, 0));
  try {
    parse_ground_truth("frame ulx uly urx ury lrx lry llx lly\nf1 1 2 3 4 5 6 7 8\nf2 1 2 3 4 5 6 7\n");
    FAIL("expected a parse error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::parse);
    CHECK(std::string(e.what()).find("line 3") != std::string::npos);
  }
  CHECK_THROWS_AS(parse_ground_truth("f1 1 2 3 4 5 6 7 8\n"), Error);
  CHECK_THROWS_AS(parse_ground_truth(std::string(kGroundTruthHeader) + "\nf 1 2 3 4 5 6 7 x\n"), Error);
}

TEST_CASE("ground truth round trip is bit-identical") {
  std::mt19937_64 rng(4);
  GroundTruth gt;
  for (int i = 0; i < 50; ++i) {
    gt.frames.push_back("frame" + std::to_string(i) + ".pgm");
    gt.corners.push_back(random_corners(rng));
  }
  const std::string text = format_ground_truth(gt);
  const auto back = parse_ground_truth(text);
  for (std::size_t i = 0; i < 50; ++i)
    for (std::size_t k = 0; k < 4; ++k) CHECK((back.corners[i][k].array() == gt.corners[i][k].array()).all());
  CHECK(format_ground_truth(back) == text);
}

TEST_CASE("sequence directories") {
  const auto dir = scratch("regtrack_eval_seq");
  SynthConfig cfg;
  cfg.frames = 3;
  cfg.width = 120;
  cfg.height = 100;
  cfg.box_size = 40;
  cfg.seed = 5;
  const Sequence seq = synth_sequence(cfg);
  write_sequence(dir / "s", seq);
  const Sequence back = load_sequence(dir / "s");
  REQUIRE(back.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(back.frames[i] == seq.frames[i]);
    CHECK(alignment_error(back.truth[i], seq.truth[i]) == 0.0);
  }
  CHECK(back.frame(1).width() == 120);

  try {
    load_sequence(dir / "nope");
    FAIL("expected missing dataset");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::missing_dataset);
  }
  fs::remove(dir / "s" / back.frames[2]);
  CHECK_THROWS_AS(load_sequence(dir / "s"), Error);
  write_sequence(dir / "t", seq);
  write_pgm(seq.frame(0), (dir / "t" / "extra.pgm").string());
  try {
    load_sequence(dir / "t");
    FAIL("expected a count mismatch");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::dimension_mismatch);
  }
  fs::remove_all(dir);
}

TEST_CASE("ground-truth projection") {
  std::mt19937_64 rng(6);
  const Corners base = testing::square_box(100, 100, 60);
  std::vector<Corners> truth{base};
  std::normal_distribution<double> n(0.0, 4.0);
  for (int i = 0; i < 10; ++i) {
    Corners c = base;
    for (auto& p : c) p += Point(n(rng) + 5.0, n(rng) - 3.0);
    truth.push_back(c);
  }
  const auto hom = project_ground_truth(WarpModel(SsmKind::homography), truth);
  for (std::size_t i = 0; i < truth.size(); ++i) CHECK(alignment_error(hom[i], truth[i]) < 1e-9);

  // Lower DOF never fits better than higher DOF; projection is idempotent.
  const std::array<SsmKind, 5> chain = {SsmKind::translation, SsmKind::isometry, SsmKind::similitude, SsmKind::affine,
                                        SsmKind::homography};
  std::vector<std::vector<Corners>> projected;
  for (auto k : chain) projected.push_back(project_ground_truth(WarpModel(k), truth));
  for (std::size_t f = 0; f < truth.size(); ++f)
    for (std::size_t k = 1; k < chain.size(); ++k) {
      CHECK(alignment_error(projected[k][f], truth[f]) <= alignment_error(projected[k - 1][f], truth[f]) + 1e-9);
    }
  for (std::size_t k = 0; k < chain.size(); ++k) {
    const auto again = project_ground_truth(WarpModel(chain[k]), projected[k]);
    for (std::size_t f = 0; f < truth.size(); ++f) CHECK(alignment_error(again[f], projected[k][f]) < 1e-9);
  }

  // Translation projection beats 1000 random translations per frame.
  const WarpModel tr(SsmKind::translation);
  std::uniform_real_distribution<double> u(-10.0, 10.0);
  for (std::size_t f = 0; f < truth.size(); ++f) {
    const double best = alignment_error(projected[0][f], truth[f]);
    for (int i = 0; i < 1000; ++i) {
      Corners c = base;
      const Point d(u(rng) + 5.0, u(rng) - 3.0);
      for (auto& p : c) p += d;
      CHECK(best <= alignment_error(c, truth[f]) + 1e-12);
    }
  }
}

TEST_CASE("synthetic sequences") {
  SynthConfig still;
  still.frames = 5;
  still.translation_sigma = 0.0;
  still.seed = 7;
  const Sequence s = synth_sequence(still);
  REQUIRE(s.size() == 5);
  CHECK(s.frames[0] == "frame00001.pgm");
  for (std::size_t i = 1; i < 5; ++i) {
    CHECK(alignment_error(s.truth[i], s.truth[0]) == 0.0);
    const auto a = s.frame(i), b = s.frame(0);
    for (std::size_t k = 0; k < a.data().size(); ++k) REQUIRE(a.data()[k] == b.data()[k]);
  }

  SynthConfig sim;
  sim.frames = 30;
  sim.motion_ssm = SsmKind::similitude;
  sim.shape_sigma = 2.0;
  sim.seed = 8;
  const Sequence m = synth_sequence(sim);
  const auto p = project_ground_truth(WarpModel(SsmKind::similitude), m.truth);
  for (std::size_t i = 0; i < m.size(); ++i) CHECK(alignment_error(p[i], m.truth[i]) < 1e-9);

  // Same seed, same frames; ground truth stays inside the image.
  const Sequence again = synth_sequence(sim);
  for (std::size_t i = 0; i < m.size(); ++i) {
    CHECK(format_corners(again.truth[i]) == format_corners(m.truth[i]));
    for (const auto& c : m.truth[i]) {
      CHECK(c.x() >= 0.0);
      CHECK(c.x() <= sim.width - 1.0);
    }
  }

  SynthConfig lit;
  lit.frames = 10;
  lit.photometric = Photometric::gain_bias;
  lit.gain_amplitude = 0.3;
  lit.bias_amplitude = 20.0;
  lit.noise_sigma = 2.0;
  lit.seed = 9;
  const Sequence l = synth_sequence(lit);
  for (std::size_t i = 0; i < l.size(); ++i)
    for (double v : l.frame(i).data()) REQUIRE((v >= 0.0 && v <= 255.0));
  CHECK(parse_photometric("subregion-gain") == Photometric::subregion_gain);
  CHECK_THROWS_AS(parse_photometric("fog"), Error);

  SynthConfig tight;
  tight.box_size = 400;
  CHECK_THROWS_AS(synth_sequence(tight), Error);
}

TEST_CASE("gain-bias rendering applies the photometric change to the moving template") {
  SynthConfig cfg;
  cfg.frames = 4;
  cfg.translation_sigma = 0.0;
  cfg.photometric = Photometric::gain_bias;
  cfg.gain_amplitude = 0.4;
  cfg.bias_amplitude = 10.0;
  cfg.seed = 10;
  const Sequence s = synth_sequence(cfg);
  // With no motion and no noise each frame is an affine intensity map of frame 0 (away from clipping).
  const auto f0 = s.frame(0), f2 = s.frame(2);
  std::vector<std::pair<double, double>> pairs;
  for (std::size_t k = 0; k < f0.data().size(); k += 97) {
    const double x = f0.data()[k], y = f2.data()[k];
    if (x > 0.5 && x < 254.5 && y > 0.5 && y < 254.5) pairs.emplace_back(x, y);
  }
  REQUIRE(pairs.size() > 100);
  const auto lo = std::min_element(pairs.begin(), pairs.end()), hi = std::max_element(pairs.begin(), pairs.end());
  const double gain = (hi->second - lo->second) / (hi->first - lo->first), bias = lo->second - gain * lo->first;
  CHECK(std::abs(gain - 1.0) > 0.01);
  for (const auto& [x, y] : pairs) CHECK(std::abs(gain * x + bias - y) < 1e-6);
}
