#include "eval/sequence.hpp"

#include "core/error.hpp"

#include <Eigen/LU>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <random>
#include <set>
#include <sstream>

namespace regtrack {

namespace fs = std::filesystem;

GrayImage Sequence::frame(std::size_t i) const {
  if (i >= frames.size()) fail(ErrorCode::invalid_argument, "frame index out of range");
  if (!images.empty()) return images[i];
  return read_image((directory / frames[i]).string());
}

namespace {

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  while (pos < line.size()) {
    while (pos < line.size() && (line[pos] == ' ' || line[pos] == '\t')) ++pos;
    std::size_t end = pos;
    while (end < line.size() && line[end] != ' ' && line[end] != '\t') ++end;
    if (end > pos) out.push_back(line.substr(pos, end - pos));
    pos = end;
  }
  return out;
}

}  // namespace

GroundTruth parse_ground_truth(const std::string& text) {
  GroundTruth gt;
  std::istringstream in(text);
  std::string line;
  int number = 0;
  bool header = false;
  while (std::getline(in, line)) {
    ++number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto fields = split_fields(line);
    if (fields.empty()) continue;
    if (!header) {
      if (fields.size() != 9 || fields[0] != "frame")
        fail(ErrorCode::parse, "line " + std::to_string(number) + ": expected header '" + kGroundTruthHeader + "'");
      header = true;
      continue;
    }
    if (fields.size() != 9)
      fail(ErrorCode::parse, "line " + std::to_string(number) + ": expected 9 fields, got " +
                                 std::to_string(fields.size()));
    Corners c;
    for (int k = 0; k < 8; ++k) {
      const auto f = fields[static_cast<std::size_t>(k + 1)];
      double v = 0.0;
      const auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), v);
      if (ec != std::errc() || ptr != f.data() + f.size() || !std::isfinite(v))
        fail(ErrorCode::parse, "line " + std::to_string(number) + ": field " + std::to_string(k + 2) +
                                   " is not a finite number: '" + std::string(f) + "'");
      c[static_cast<std::size_t>(k / 2)][k % 2] = v;
    }
    gt.frames.emplace_back(fields[0]);
    gt.corners.push_back(c);
  }
  if (!header) fail(ErrorCode::parse, "line 1: missing ground-truth header");
  return gt;
}

std::string format_ground_truth(const GroundTruth& gt) {
  if (gt.frames.size() != gt.corners.size())
    fail(ErrorCode::dimension_mismatch, "ground truth needs one corner set per frame");
  std::string out = std::string(kGroundTruthHeader) + "\n";
  for (std::size_t i = 0; i < gt.frames.size(); ++i) out += gt.frames[i] + " " + format_corners(gt.corners[i]) + "\n";
  return out;
}

GroundTruth read_ground_truth(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::missing_dataset, "cannot open ground truth " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  try {
    return parse_ground_truth(ss.str());
  } catch (const Error& e) {
    fail(e.code(), path.string() + ": " + e.what());
  }
}

void write_ground_truth(const fs::path& path, const GroundTruth& gt) {
  const std::string text = format_ground_truth(gt);
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::io, "cannot write " + path.string());
  out << text;
  if (!out) fail(ErrorCode::io, "write failed for " + path.string());
}

Sequence load_sequence(const fs::path& dir) {
  if (!fs::is_directory(dir)) fail(ErrorCode::missing_dataset, "sequence directory not found: " + dir.string());
  const GroundTruth gt = read_ground_truth(dir / kGroundTruthFile);
  if (gt.frames.empty()) fail(ErrorCode::parse, (dir / kGroundTruthFile).string() + ": no frames listed");
  std::set<std::string> listed;
  for (const auto& f : gt.frames) {
    if (!fs::is_regular_file(dir / f)) fail(ErrorCode::missing_dataset, "frame listed but missing: " + (dir / f).string());
    listed.insert(f);
  }
  std::size_t images = 0;
  for (const auto& entry : fs::directory_iterator(dir)) {
    const auto ext = entry.path().extension().string();
    if (ext == ".pgm" || ext == ".ppm" || ext == ".pnm") ++images;
  }
  if (images != listed.size() || listed.size() != gt.frames.size())
    fail(ErrorCode::dimension_mismatch, dir.string() + ": ground truth lists " + std::to_string(gt.frames.size()) +
                                            " frames but the directory holds " + std::to_string(images) + " images");
  Sequence s;
  s.name = dir.filename().string();
  if (s.name.empty()) s.name = dir.parent_path().filename().string();
  s.directory = dir;
  s.frames = gt.frames;
  s.truth = gt.corners;
  return s;
}

void write_sequence(const fs::path& dir, const Sequence& seq) {
  if (seq.truth.size() != seq.frames.size()) fail(ErrorCode::dimension_mismatch, "sequence truth/frame count mismatch");
  fs::create_directories(dir);
  for (std::size_t i = 0; i < seq.size(); ++i) write_pgm(seq.frame(i), (dir / seq.frames[i]).string());
  write_ground_truth(dir / kGroundTruthFile, GroundTruth{seq.frames, seq.truth});
}

std::vector<Corners> project_ground_truth(const WarpModel& model, const std::vector<Corners>& truth) {
  if (truth.empty()) return {};
  const Corners& base = truth.front();
  if (corners_degenerate(base)) fail(ErrorCode::degenerate, "initial ground-truth corners are degenerate");
  std::vector<Corners> out;
  out.reserve(truth.size());
  for (const auto& c : truth) out.push_back(model.apply(model.fit(base, c), base));
  return out;
}

const char* to_string(Photometric p) {
  switch (p) {
    case Photometric::none: return "none";
    case Photometric::gain_bias: return "gain-bias";
    case Photometric::subregion_gain: return "subregion-gain";
  }
  return "?";
}

Photometric parse_photometric(std::string_view name) {
  for (auto p : {Photometric::none, Photometric::gain_bias, Photometric::subregion_gain})
    if (name == to_string(p)) return p;
  fail(ErrorCode::parse, "unknown photometric mode '" + std::string(name) + "'");
}

namespace {

Eigen::ArrayXd standardized_noise(int width, int height, double sigma, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 255.0);
  std::vector<double> raw(static_cast<std::size_t>(width) * height);
  for (auto& v : raw) v = u(rng);
  int k = 2 * static_cast<int>(std::ceil(3.0 * sigma)) + 1;
  const GrayImage s = gaussian_smooth(GrayImage(width, height, std::move(raw)), k, sigma);
  Eigen::ArrayXd a = Eigen::Map<const Eigen::ArrayXd>(s.data().data(), static_cast<Eigen::Index>(s.data().size()));
  a -= a.mean();
  const double sd = std::sqrt(a.square().mean());
  return sd > 0.0 ? Eigen::ArrayXd(a / sd) : a;
}

bool box_inside(const Corners& c, int width, int height) {
  for (const auto& p : c)
    if (!(p.x() >= 0.0 && p.y() >= 0.0 && p.x() <= width - 1 && p.y() <= height - 1)) return false;
  return true;
}

}  // namespace

GrayImage textured_image(int width, int height, std::uint64_t seed) {
  if (width < 2 || height < 2) fail(ErrorCode::invalid_argument, "texture needs at least 2x2 pixels");
  std::mt19937_64 rng(seed);
  // Fine detail for accuracy plus a coarse layer that widens convergence basins.
  const Eigen::ArrayXd fine = standardized_noise(width, height, 1.5, rng);
  const Eigen::ArrayXd coarse = standardized_noise(width, height, 5.0, rng);
  Eigen::ArrayXd mix = fine + coarse;
  const double lo = mix.minCoeff(), hi = mix.maxCoeff();
  const double span = hi > lo ? hi - lo : 1.0;
  mix = 10.0 + 235.0 * (mix - lo) / span;
  return GrayImage(width, height, std::vector<double>(mix.data(), mix.data() + mix.size()));
}

std::vector<Corners> synth_motion(const SynthConfig& cfg) {
  if (cfg.frames < 1) fail(ErrorCode::invalid_argument, "synthetic sequence needs at least one frame");
  if (!(cfg.box_size >= 2.0) || cfg.box_size > cfg.width - 1 || cfg.box_size > cfg.height - 1)
    fail(ErrorCode::invalid_argument, "box size must fit inside the image");
  if (cfg.translation_sigma < 0.0 || cfg.shape_sigma < 0.0 || !(cfg.shape_rho >= 0.0 && cfg.shape_rho < 1.0))
    fail(ErrorCode::invalid_argument, "invalid motion parameters");
  const double cx = 0.5 * (cfg.width - 1), cy = 0.5 * (cfg.height - 1), h = 0.5 * cfg.box_size;
  const Corners box0 = {Point(cx - h, cy - h), Point(cx + h, cy - h), Point(cx + h, cy + h), Point(cx - h, cy + h)};
  const WarpModel model(cfg.motion_ssm);
  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> n01(0.0, 1.0);
  std::vector<Corners> boxes{box0};
  Point t = Point::Zero();
  std::array<Point, 4> d{};
  d.fill(Point::Zero());
  const double innovation = cfg.shape_sigma * std::sqrt(1.0 - cfg.shape_rho * cfg.shape_rho);
  for (int i = 1; i < cfg.frames; ++i) {
    bool placed = false;
    for (int attempt = 0; attempt < 100 && !placed; ++attempt) {
      Point tn = t + cfg.translation_sigma * Point(n01(rng), n01(rng));
      std::array<Point, 4> dn = d;
      Corners raw;
      for (std::size_t k = 0; k < 4; ++k) {
        dn[k] = cfg.shape_rho * d[k] + innovation * Point(n01(rng), n01(rng));
        raw[k] = box0[k] + tn + dn[k];
      }
      if (corners_degenerate(raw)) continue;
      const Corners projected = model.apply(model.fit(box0, raw), box0);
      if (!box_inside(projected, cfg.width, cfg.height)) continue;
      t = tn;
      d = dn;
      boxes.push_back(projected);
      placed = true;
    }
    if (!placed) fail(ErrorCode::invalid_argument, "synthetic motion keeps leaving the image");
  }
  return boxes;
}

Sequence synth_sequence(const GrayImage& base, const std::vector<Corners>& boxes, const SynthConfig& cfg) {
  if (boxes.empty()) fail(ErrorCode::invalid_argument, "synthetic sequence needs at least one box");
  if (cfg.noise_sigma < 0.0) fail(ErrorCode::invalid_argument, "noise sigma must be non-negative");
  const int w = base.width(), hgt = base.height();
  std::mt19937_64 rng(cfg.seed ^ 0x5851F42D4C957F2DULL);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
  std::array<double, 5> phases{};
  for (auto& p : phases) p = phase(rng);
  std::normal_distribution<double> noise(0.0, 1.0);

  Sequence seq;
  seq.name = cfg.name;
  for (std::size_t i = 0; i < boxes.size(); ++i) {
    if (!box_inside(boxes[i], w, hgt))
      fail(ErrorCode::invalid_argument, "frame " + std::to_string(i) + ": box leaves the base image");
    const Mat3 inv = boxes[i] == boxes[0] ? Mat3::Identity() : Mat3(fit_homography(boxes[0], boxes[i]).inverse());
    const double angle = 2.0 * std::numbers::pi * static_cast<double>(i) / cfg.photometric_period;
    std::array<double, 4> gains{};
    for (std::size_t g = 0; g < 4; ++g) gains[g] = 1.0 + cfg.gain_amplitude * std::sin(angle + phases[g]);
    const double bias = cfg.bias_amplitude * std::sin(angle + phases[4]);

    GrayImage img(w, hgt);
    for (int y = 0; y < hgt; ++y) {
      for (int x = 0; x < w; ++x) {
        const Point src = project(inv, Point(x, y));
        double v = sample(base, src.x(), src.y());
        if (cfg.photometric == Photometric::gain_bias) {
          v = gains[0] * v + bias;
        } else if (cfg.photometric == Photometric::subregion_gain) {
          const double u = static_cast<double>(x) / (w - 1), s = static_cast<double>(y) / (hgt - 1);
          const double g = (1 - u) * (1 - s) * gains[0] + u * (1 - s) * gains[1] + u * s * gains[2] +
                           (1 - u) * s * gains[3];
          v = g * v + bias;
        }
        if (cfg.noise_sigma > 0.0) v += cfg.noise_sigma * noise(rng);
        img.at(x, y) = std::clamp(v, 0.0, 255.0);
      }
    }
    char name[32];
    std::snprintf(name, sizeof name, "frame%05zu.pgm", i + 1);
    seq.frames.emplace_back(name);
    seq.truth.push_back(boxes[i]);
    seq.images.push_back(std::move(img));
  }
  return seq;
}

Sequence synth_sequence(const SynthConfig& cfg) {
  return synth_sequence(textured_image(cfg.width, cfg.height, cfg.seed), synth_motion(cfg), cfg);
}

}  // namespace regtrack
