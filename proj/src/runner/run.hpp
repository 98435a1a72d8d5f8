#pragma once

#include "eval/metrics.hpp"
#include "eval/sequence.hpp"
#include "runner/config.hpp"
#include "runner/report.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace regtrack {

struct SkippedCombination {
  std::string name;
  // Machine-readable: unsupported_combination or invalid_parameters.
  std::string reason;
  std::string detail;
};

struct RunReport {
  std::vector<std::string> combinations;
  std::vector<SkippedCombination> skipped;
  std::size_t sequences = 0;
  // Evaluation frames per combination (first frames excluded).
  std::size_t evaluation_frames = 0;
  Summary summary;
  std::vector<std::filesystem::path> files;
};

/// Datasets: a directory holding groundtruth.txt is one sequence; any other
/// directory is a root whose immediate subdirectories holding
/// groundtruth.txt are sequences, in name order.
std::vector<Sequence> load_datasets(const std::vector<std::filesystem::path>& roots);

std::vector<Sequence> make_inputs(const RunConfig& cfg);

/// Worker count after the REGTRACK_THREADS override.
int resolve_workers(int requested);

/// Runs every valid AM x SM x SSM combination over every sequence and writes
///   <out>/results/<am>_<sm>_<ssm>.csv, <out>/summary.csv,
///   <out>/plots/sr_by_{sm,am,ssm}_*.svg and <out>/run.log.
RunReport run_matrix(const RunConfig& cfg);

}  // namespace regtrack
