#pragma once

#include "am/appearance.hpp"
#include "imgproc/image.hpp"
#include "sm/search.hpp"
#include "ssm/warp.hpp"

#include <memory>
#include <string>
#include <string_view>

namespace regtrack {

struct TrackerSpec {
  AmConfig am;
  SmKind sm = SmKind::fclk;
  SmConfig search;
  SsmKind ssm = SsmKind::homography;
  int resolution_x = 50;
  int resolution_y = 50;
  int smooth_kernel = 5;
  // <= 0 derives sigma from the kernel size.
  double smooth_sigma = 0.0;

  std::string name() const;
  void validate() const;
};

/// Applies one key=value setting. Returns false for keys that are not tracker
/// settings; throws a parse error for malformed values.
bool set_tracker_option(TrackerSpec& spec, std::string_view key, std::string_view value);

/// Parses whitespace- or ';'-separated key=value tokens, e.g.
/// "am=ncc sm=esm ssm=sl3 resolution=40x40".
TrackerSpec parse_tracker_spec(std::string_view text);

enum class TrackStatus { ok, diverged };

const char* to_string(TrackStatus s);

struct TrackerOutput {
  Corners corners;
  WarpParams params;
  TrackStatus status = TrackStatus::ok;
  double seconds = 0.0;
};

/// One AM x SM x SSM tracker bound to a target. Once diverged it stays
/// diverged and keeps reporting the last valid corners.
class Tracker {
 public:
  Tracker(const TrackerSpec& spec, const GrayImage& first_frame, const Corners& init);

  const TrackerSpec& spec() const { return spec_; }
  const SearchContext& context() const { return *ctx_; }
  const TrackerOutput& last() const { return last_; }

  TrackerOutput track(const GrayImage& frame);

 private:
  bool diverged(const SearchOutcome& r, const Corners& c) const;

  TrackerSpec spec_;
  int width_, height_;
  std::shared_ptr<const SearchContext> ctx_;
  std::unique_ptr<SearchMethod> method_;
  TrackerOutput last_;
};

}  // namespace regtrack
