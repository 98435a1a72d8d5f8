#include "regtrack/regtrack.h"

#include "core/error.hpp"
#include "eval/metrics.hpp"
#include "eval/sequence.hpp"
#include "imgproc/image.hpp"
#include "pipeline/tracker.hpp"
#include "runner/config.hpp"
#include "runner/report.hpp"
#include "runner/run.hpp"

#include <exception>
#include <memory>
#include <new>
#include <string>

struct rt_image {
  regtrack::GrayImage img;
};

struct rt_tracker {
  std::unique_ptr<regtrack::Tracker> tracker;
};

namespace {

thread_local std::string g_last_error;

rt_status to_status(regtrack::ErrorCode c) {
  using regtrack::ErrorCode;
  switch (c) {
    case ErrorCode::invalid_argument: return RT_ERR_INVALID_ARGUMENT;
    case ErrorCode::dimension_mismatch: return RT_ERR_DIMENSION_MISMATCH;
    case ErrorCode::degenerate: return RT_ERR_DEGENERATE;
    case ErrorCode::singular_warp: return RT_ERR_SINGULAR_WARP;
    case ErrorCode::unsupported: return RT_ERR_UNSUPPORTED;
    case ErrorCode::parse: return RT_ERR_PARSE;
    case ErrorCode::io: return RT_ERR_IO;
    case ErrorCode::missing_dataset: return RT_ERR_MISSING_DATASET;
  }
  return RT_ERR_INTERNAL;
}

template <class F>
rt_status guarded(F&& f) {
  try {
    f();
    g_last_error.clear();
    return RT_OK;
  } catch (const regtrack::Error& e) {
    g_last_error = e.what();
    return to_status(e.code());
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return RT_ERR_INTERNAL;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return RT_ERR_INTERNAL;
  }
}

void require(bool ok, const char* what) {
  if (!ok) regtrack::fail(regtrack::ErrorCode::invalid_argument, what);
}

regtrack::Corners to_corners(const double* xy) {
  regtrack::Corners c;
  for (int i = 0; i < 4; ++i) c[static_cast<std::size_t>(i)] = regtrack::Point(xy[2 * i], xy[2 * i + 1]);
  return c;
}

void from_corners(const regtrack::Corners& c, double* xy) {
  for (int i = 0; i < 4; ++i) {
    xy[2 * i] = c[static_cast<std::size_t>(i)].x();
    xy[2 * i + 1] = c[static_cast<std::size_t>(i)].y();
  }
}

regtrack::RunConfig load_options(const rt_run_options* o, bool require_matrix) {
  require(o != nullptr, "options must not be NULL");
  require((o->config_path == nullptr) != (o->config_text == nullptr), "give exactly one of config_path, config_text");
  regtrack::RunConfig cfg = o->config_path ? regtrack::read_run_config(o->config_path, require_matrix)
                                           : regtrack::parse_run_config(o->config_text, "config", require_matrix);
  if (o->out_dir) cfg.out = o->out_dir;
  if (o->has_seed) cfg.seed = o->seed;
  if (o->workers > 0) cfg.workers = o->workers;
  return cfg;
}

}  // namespace

extern "C" {

const char* rt_last_error(void) { return g_last_error.c_str(); }

const char* rt_status_name(rt_status status) {
  switch (status) {
    case RT_OK: return "ok";
    case RT_ERR_INVALID_ARGUMENT: return "invalid_argument";
    case RT_ERR_DIMENSION_MISMATCH: return "dimension_mismatch";
    case RT_ERR_DEGENERATE: return "degenerate";
    case RT_ERR_SINGULAR_WARP: return "singular_warp";
    case RT_ERR_UNSUPPORTED: return "unsupported";
    case RT_ERR_PARSE: return "parse";
    case RT_ERR_IO: return "io";
    case RT_ERR_MISSING_DATASET: return "missing_dataset";
    case RT_ERR_INTERNAL: return "internal";
  }
  return "unknown";
}

rt_status rt_image_create(int width, int height, const double* data, rt_image** out) {
  return guarded([&] {
    require(out != nullptr && data != nullptr, "image data and output must not be NULL");
    require(width > 0 && height > 0, "image size must be positive");
    const auto n = static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
    *out = new rt_image{regtrack::GrayImage(width, height, std::vector<double>(data, data + n))};
  });
}

rt_status rt_image_load(const char* path, rt_image** out) {
  return guarded([&] {
    require(out != nullptr && path != nullptr, "path and output must not be NULL");
    *out = new rt_image{regtrack::read_image(path)};
  });
}

rt_status rt_image_size(const rt_image* image, int* width, int* height) {
  return guarded([&] {
    require(image && width && height, "arguments must not be NULL");
    *width = image->img.width();
    *height = image->img.height();
  });
}

void rt_image_destroy(rt_image* image) { delete image; }

rt_status rt_tracker_create(const char* spec, const rt_image* first_frame, const double corners[8],
                            rt_tracker** out) {
  return guarded([&] {
    require(spec && first_frame && corners && out, "arguments must not be NULL");
    auto t = std::make_unique<regtrack::Tracker>(regtrack::parse_tracker_spec(spec), first_frame->img,
                                                 to_corners(corners));
    *out = new rt_tracker{std::move(t)};
  });
}

rt_status rt_tracker_track(rt_tracker* tracker, const rt_image* frame, double corners_out[8], int* diverged,
                           double* seconds) {
  return guarded([&] {
    require(tracker && frame && corners_out, "arguments must not be NULL");
    const auto r = tracker->tracker->track(frame->img);
    from_corners(r.corners, corners_out);
    if (diverged) *diverged = r.status == regtrack::TrackStatus::diverged ? 1 : 0;
    if (seconds) *seconds = r.seconds;
  });
}

void rt_tracker_destroy(rt_tracker* tracker) { delete tracker; }

rt_status rt_alignment_error(const double a[8], const double b[8], double* out) {
  return guarded([&] {
    require(a && b && out, "arguments must not be NULL");
    *out = regtrack::alignment_error(to_corners(a), to_corners(b));
  });
}

rt_status rt_run_matrix(const rt_run_options* options, rt_run_result* result) {
  return guarded([&] {
    const auto cfg = load_options(options, true);
    const auto report = regtrack::run_matrix(cfg);
    if (result) {
      result->combinations = static_cast<int>(report.combinations.size());
      result->skipped = static_cast<int>(report.skipped.size());
      result->sequences = static_cast<int>(report.sequences);
      result->evaluation_frames = static_cast<int64_t>(report.evaluation_frames);
    }
  });
}

rt_status rt_emit_plot(const char* summary_csv, const char* group_by, const char* out_dir, int* files_written) {
  return guarded([&] {
    require(summary_csv && group_by && out_dir, "arguments must not be NULL");
    const auto summary = regtrack::parse_summary(regtrack::read_text_file(summary_csv));
    const auto plots = regtrack::emit_plot(summary, regtrack::parse_group_by(group_by));
    for (const auto& p : plots) regtrack::write_file_atomic(std::filesystem::path(out_dir) / p.name, p.svg);
    if (files_written) *files_written = static_cast<int>(plots.size());
  });
}

rt_status rt_synth(const rt_run_options* options, int* sequences_written) {
  return guarded([&] {
    auto cfg = load_options(options, false);
    if (cfg.synth_sequences <= 0) regtrack::fail(regtrack::ErrorCode::parse, "synth.sequences must be positive");
    cfg.datasets.clear();
    const auto seqs = regtrack::make_inputs(cfg);
    for (const auto& s : seqs) regtrack::write_sequence(cfg.out / s.name, s);
    if (sequences_written) *sequences_written = static_cast<int>(seqs.size());
  });
}

rt_status rt_project_gt(const char* groundtruth_in, const char* ssm, const char* groundtruth_out) {
  return guarded([&] {
    require(groundtruth_in && ssm && groundtruth_out, "arguments must not be NULL");
    auto gt = regtrack::read_ground_truth(groundtruth_in);
    const regtrack::WarpModel model(regtrack::parse_ssm_kind(ssm));
    gt.corners = regtrack::project_ground_truth(model, gt.corners);
    regtrack::write_file_atomic(groundtruth_out, regtrack::format_ground_truth(gt));
  });
}

}  // extern "C"
