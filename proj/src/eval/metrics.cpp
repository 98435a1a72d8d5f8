#include "eval/metrics.hpp"

#include "core/error.hpp"

#include <cmath>
#include <limits>

namespace regtrack {

double alignment_error(const Corners& a, const Corners& b, ErrorMetric metric) {
  double acc = 0.0;
  for (std::size_t i = 0; i < 4; ++i) {
    const double d = (a[i] - b[i]).norm();
    acc += metric == ErrorMetric::rms ? d * d : d;
  }
  return metric == ErrorMetric::rms ? std::sqrt(acc / 4.0) : acc / 4.0;
}

EvalRecord evaluate(const std::string& name, const std::vector<Corners>& tracked, const std::vector<Corners>& truth,
                    const std::vector<bool>& diverged, ErrorMetric metric) {
  if (tracked.size() != truth.size() || tracked.size() != diverged.size())
    fail(ErrorCode::dimension_mismatch, "tracked, truth and status sequences differ in length");
  EvalRecord r{name, {}};
  for (std::size_t i = 1; i < tracked.size(); ++i)
    r.errors.push_back(diverged[i] ? std::numeric_limits<double>::infinity()
                                   : alignment_error(tracked[i], truth[i], metric));
  return r;
}

double success_rate(std::span<const EvalRecord> records, double tp) {
  if (!(tp >= 0.0)) fail(ErrorCode::invalid_argument, "threshold must be non-negative");
  std::size_t total = 0, hits = 0;
  for (const auto& r : records) {
    total += r.errors.size();
    for (double e : r.errors)
      if (e < tp) ++hits;
  }
  if (total == 0) fail(ErrorCode::invalid_argument, "success rate of an empty record set");
  return static_cast<double>(hits) / static_cast<double>(total);
}

double sequence_mean_success_rate(std::span<const EvalRecord> records, double tp) {
  double acc = 0.0;
  std::size_t used = 0;
  for (const auto& r : records) {
    if (r.errors.empty()) continue;
    acc += success_rate(r, tp);
    ++used;
  }
  if (used == 0) fail(ErrorCode::invalid_argument, "success rate of an empty record set");
  return acc / static_cast<double>(used);
}

std::vector<double> make_thresholds(double max, double step) {
  if (!(max >= 0.0) || !(step > 0.0)) fail(ErrorCode::invalid_argument, "threshold grid needs max >= 0 and step > 0");
  std::vector<double> out;
  const auto n = static_cast<long>(std::floor(max / step + 1e-9));
  for (long i = 0; i <= n; ++i) out.push_back(static_cast<double>(i) * step);
  return out;
}

std::vector<double> default_thresholds() { return make_thresholds(20.0, 0.5); }

SrCurve sr_curve(std::span<const EvalRecord> records, const std::vector<double>& thresholds) {
  SrCurve c{thresholds, {}};
  for (double tp : thresholds) c.sr.push_back(success_rate(records, tp));
  return c;
}

}  // namespace regtrack
