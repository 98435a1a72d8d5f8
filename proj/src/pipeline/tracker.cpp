#include "pipeline/tracker.hpp"

#include "core/error.hpp"
#include "core/parse.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <tuple>

namespace regtrack {

namespace {

std::pair<int, int> parse_size(std::string_view key, std::string_view value) {
  const auto x = value.find('x');
  if (x == std::string_view::npos) {
    const int n = parse_number<int>(key, value);
    return {n, n};
  }
  return {parse_number<int>(key, value.substr(0, x)), parse_number<int>(key, value.substr(x + 1))};
}

}  // namespace

std::string TrackerSpec::name() const {
  return std::string(to_string(am.kind)) + "_" + to_string(sm) + "_" + to_string(ssm);
}

void TrackerSpec::validate() const {
  if (resolution_x < 2 || resolution_y < 2) fail(ErrorCode::invalid_argument, "resolution must be at least 2x2");
  if (smooth_kernel < 1 || smooth_kernel % 2 == 0)
    fail(ErrorCode::invalid_argument, "smoothing kernel size must be odd and positive");
  search.validate();
  validate_combination(sm, ssm, search);
}

bool set_tracker_option(TrackerSpec& spec, std::string_view key, std::string_view value) {
  if (key == "am") spec.am.kind = parse_am_kind(value);
  else if (key == "sm") spec.sm = parse_sm_kind(value);
  else if (key == "ssm") spec.ssm = parse_ssm_kind(value);
  else if (key == "bins") spec.am.bins = parse_number<int>(key, value);
  else if (key == "spline_order") spec.am.spline_order = parse_number<int>(key, value);
  else if (key == "subregions") std::tie(spec.am.subregions_x, spec.am.subregions_y) = parse_size(key, value);
  else if (key == "resolution") std::tie(spec.resolution_x, spec.resolution_y) = parse_size(key, value);
  else if (key == "ccre_cumulative") {
    if (value == "template") spec.am.ccre_cumulative_template = true;
    else if (value == "candidate") spec.am.ccre_cumulative_template = false;
    else fail(ErrorCode::parse, "ccre_cumulative must be candidate or template");
  } else if (key == "max_iterations") spec.search.max_iterations = parse_number<int>(key, value);
  else if (key == "epsilon") spec.search.epsilon = parse_number<double>(key, value);
  else if (key == "nn_samples") spec.search.nn_samples = parse_number<int>(key, value);
  else if (key == "nn_sigma") spec.search.nn_sigma = parse_number<double>(key, value);
  else if (key == "nn_trees") spec.search.nn_trees = parse_number<int>(key, value);
  else if (key == "nn_checks") spec.search.nn_checks = parse_number<int>(key, value);
  else if (key == "nn_exact") spec.search.nn_exact = parse_switch(key, value);
  else if (key == "pf_particles") spec.search.pf_particles = parse_number<int>(key, value);
  else if (key == "pf_sigma") spec.search.pf_sigma = parse_number<double>(key, value);
  else if (key == "pf_resample") spec.search.pf_resample_threshold = parse_number<double>(key, value);
  else if (key == "pf_experimental") spec.search.pf_experimental = parse_switch(key, value);
  else if (key == "smooth_kernel") spec.smooth_kernel = parse_number<int>(key, value);
  else if (key == "smooth_sigma") spec.smooth_sigma = parse_number<double>(key, value);
  else if (key == "seed") spec.search.seed = parse_number<std::uint64_t>(key, value);
  else return false;
  return true;
}

TrackerSpec parse_tracker_spec(std::string_view text) {
  TrackerSpec spec;
  std::size_t pos = 0;
  auto is_sep = [](char ch) { return ch == ' ' || ch == '\t' || ch == '\n' || ch == '\r' || ch == ';'; };
  while (pos < text.size()) {
    while (pos < text.size() && is_sep(text[pos])) ++pos;
    std::size_t end = pos;
    while (end < text.size() && !is_sep(text[end])) ++end;
    if (end == pos) break;
    const auto token = text.substr(pos, end - pos);
    const auto eq = token.find('=');
    if (eq == std::string_view::npos || eq == 0)
      fail(ErrorCode::parse, "expected key=value, got '" + std::string(token) + "'");
    const auto key = token.substr(0, eq);
    if (!set_tracker_option(spec, key, token.substr(eq + 1)))
      fail(ErrorCode::parse, "unknown tracker setting '" + std::string(key) + "'");
    pos = end;
  }
  return spec;
}

const char* to_string(TrackStatus s) { return s == TrackStatus::ok ? "ok" : "diverged"; }

Tracker::Tracker(const TrackerSpec& spec, const GrayImage& first_frame, const Corners& init)
    : spec_(spec), width_(first_frame.width()), height_(first_frame.height()) {
  spec_.am.resolution_x = spec_.resolution_x;
  spec_.am.resolution_y = spec_.resolution_y;
  spec_.validate();
  if (corners_degenerate(init)) fail(ErrorCode::degenerate, "initial corners are degenerate");
  std::shared_ptr<const AppearanceModel> am = make_appearance_model(spec_.am);
  const GrayImage smoothed = gaussian_smooth(first_frame, spec_.smooth_kernel, spec_.smooth_sigma);
  ctx_ = std::make_shared<SearchContext>(std::move(am), spec_.ssm, smoothed, init, spec_.resolution_x,
                                         spec_.resolution_y);
  method_ = make_search_method(spec_.sm, spec_.search, ctx_);
  last_.params = ctx_->ssm().identity();
  last_.corners = ctx_->image_corners(last_.params);
  last_.status = TrackStatus::ok;
}

bool Tracker::diverged(const SearchOutcome& r, const Corners& c) const {
  if (r.failed || !r.params.allFinite()) return true;
  double span = 0.0;
  for (std::size_t i = 0; i < 4; ++i) {
    if (!c[i].allFinite()) return true;
    if (c[i].x() < -width_ || c[i].x() > 2.0 * width_ || c[i].y() < -height_ || c[i].y() > 2.0 * height_) return true;
    for (std::size_t j = i + 1; j < 4; ++j) span = std::max(span, (c[i] - c[j]).norm());
  }
  return span < 2.0;
}

TrackerOutput Tracker::track(const GrayImage& frame) {
  const auto start = std::chrono::steady_clock::now();
  TrackerOutput out = last_;
  if (last_.status == TrackStatus::ok) {
    if (frame.width() != width_ || frame.height() != height_)
      fail(ErrorCode::dimension_mismatch, "frame size differs from the first frame");
    const GrayImage smoothed = gaussian_smooth(frame, spec_.smooth_kernel, spec_.smooth_sigma);
    const SearchOutcome r = method_->track(smoothed, last_.params);
    Corners c{};
    bool bad = r.failed || !r.params.allFinite();
    if (!bad) {
      try {
        c = ctx_->image_corners(r.params);
      } catch (const Error&) {
        bad = true;
      }
    }
    if (bad || diverged(r, c)) {
      out.status = TrackStatus::diverged;
    } else {
      out.params = r.params;
      out.corners = c;
    }
  }
  const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  out.seconds = std::max(elapsed, 1e-9);
  last_ = out;
  return out;
}

}  // namespace regtrack
