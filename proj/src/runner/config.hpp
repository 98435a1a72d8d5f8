#pragma once

#include "am/appearance.hpp"
#include "eval/sequence.hpp"
#include "pipeline/tracker.hpp"
#include "sm/search.hpp"
#include "ssm/warp.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace regtrack {

/// Flat key=value run description. '#' starts a comment; am, sm, ssm and
/// dataset may repeat to form lists. Keys:
///   am, sm, ssm, dataset        lists
///   synth.<field>               synthetic sequences instead of (or besides) datasets
///   seed, out, workers, tp_max, tp_step, timing=on|off
///   any tracker setting accepted by set_tracker_option
struct RunConfig {
  std::vector<AmKind> ams;
  std::vector<SmKind> sms;
  std::vector<SsmKind> ssms;
  std::vector<std::filesystem::path> datasets;
  // Number of synthetic sequences; each uses `synth` with seed = seed + index.
  int synth_sequences = 0;
  SynthConfig synth;
  TrackerSpec tracker;
  std::uint64_t seed = 0;
  std::filesystem::path out = "regtrack_out";
  int workers = 1;
  double tp_max = 20.0;
  double tp_step = 0.5;
  // Off writes zero timings and no FPS rows so outputs are reproducible byte for byte.
  bool timing = true;

  /// Checks the combination lists and inputs needed by run_matrix.
  void validate() const;
};

/// Throws parse errors of the form "<source>:<line>: field '<key>': <reason>".
/// With require_matrix unset, missing am/sm/ssm lists and inputs are allowed
/// (the synth subcommand only needs synth.* settings).
RunConfig parse_run_config(const std::string& text, const std::string& source = "config", bool require_matrix = true);
RunConfig read_run_config(const std::filesystem::path& path, bool require_matrix = true);

}  // namespace regtrack
