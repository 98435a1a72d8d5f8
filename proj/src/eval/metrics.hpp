#pragma once

#include "ssm/warp.hpp"

#include <span>
#include <string>
#include <vector>

namespace regtrack {

enum class ErrorMetric { rms, mean };

/// Alignment error between two corner sets: RMS (default) or mean of the four
/// corner-to-corner Euclidean distances.
double alignment_error(const Corners& a, const Corners& b, ErrorMetric metric = ErrorMetric::rms);

/// Per-frame errors of one tracked sequence with the first frame excluded.
/// Diverged frames hold +infinity.
struct EvalRecord {
  std::string sequence;
  std::vector<double> errors;
};

EvalRecord evaluate(const std::string& name, const std::vector<Corners>& tracked, const std::vector<Corners>& truth,
                    const std::vector<bool>& diverged, ErrorMetric metric = ErrorMetric::rms);

/// Fraction of frames with error strictly below t_p, pooled over all records.
double success_rate(std::span<const EvalRecord> records, double tp);
inline double success_rate(const EvalRecord& record, double tp) { return success_rate({&record, 1}, tp); }

/// Unweighted mean of the per-record success rates.
double sequence_mean_success_rate(std::span<const EvalRecord> records, double tp);

/// 41 thresholds 0, 0.5, ..., 20.
std::vector<double> default_thresholds();
std::vector<double> make_thresholds(double max, double step);

struct SrCurve {
  std::vector<double> thresholds;
  std::vector<double> sr;
};

SrCurve sr_curve(std::span<const EvalRecord> records, const std::vector<double>& thresholds);

}  // namespace regtrack
