#include "runner/run.hpp"

#include "core/error.hpp"
#include "core/parse.hpp"
#include "pipeline/tracker.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <thread>

namespace regtrack {

namespace fs = std::filesystem;

std::vector<Sequence> load_datasets(const std::vector<fs::path>& roots) {
  std::vector<Sequence> out;
  for (const auto& root : roots) {
    if (!fs::is_directory(root)) fail(ErrorCode::missing_dataset, "dataset not found: " + root.string());
    if (fs::exists(root / kGroundTruthFile)) {
      out.push_back(load_sequence(root));
      continue;
    }
    std::vector<fs::path> dirs;
    for (const auto& e : fs::directory_iterator(root))
      if (e.is_directory() && fs::exists(e.path() / kGroundTruthFile)) dirs.push_back(e.path());
    if (dirs.empty()) fail(ErrorCode::missing_dataset, "no sequences with " + std::string(kGroundTruthFile) + " under " +
                                                           root.string());
    std::sort(dirs.begin(), dirs.end());
    for (const auto& d : dirs) out.push_back(load_sequence(d));
  }
  return out;
}

std::vector<Sequence> make_inputs(const RunConfig& cfg) {
  std::vector<Sequence> seqs = load_datasets(cfg.datasets);
  for (int i = 0; i < cfg.synth_sequences; ++i) {
    SynthConfig sc = cfg.synth;
    sc.seed = cfg.seed + static_cast<std::uint64_t>(i);
    char name[32];
    std::snprintf(name, sizeof name, "synth_%03d", i);
    sc.name = name;
    seqs.push_back(synth_sequence(sc));
  }
  return seqs;
}

int resolve_workers(int requested) {
  if (const char* env = std::getenv("REGTRACK_THREADS")) {
    try {
      const int n = parse_number<int>("REGTRACK_THREADS", env);
      if (n >= 1) return n;
    } catch (const Error&) {
    }
  }
  return std::max(1, requested);
}

namespace {

struct FrameRow {
  std::size_t frame;
  double error;
  TrackStatus status;
  double seconds;
};

struct JobResult {
  std::vector<FrameRow> rows;
  EvalRecord record;
  double seconds = 0.0;
  std::string failure;
};

JobResult run_job(const TrackerSpec& spec, const Sequence& seq) {
  JobResult r;
  r.record.sequence = seq.name;
  const WarpModel model(spec.ssm);
  const auto truth = model.dof() < 8 ? project_ground_truth(model, seq.truth) : seq.truth;
  std::vector<Corners> tracked(seq.size());
  std::vector<bool> diverged(seq.size(), false);
  std::vector<double> seconds(seq.size(), 0.0);
  try {
    Tracker tracker(spec, seq.frame(0), seq.truth[0]);
    tracked[0] = tracker.last().corners;
    for (std::size_t i = 1; i < seq.size(); ++i) {
      const GrayImage img = seq.frame(i);
      const TrackerOutput out = tracker.track(img);
      tracked[i] = out.corners;
      diverged[i] = out.status == TrackStatus::diverged;
      seconds[i] = out.seconds;
    }
  } catch (const Error& e) {
    r.failure = e.what();
    for (std::size_t i = 0; i < seq.size(); ++i) {
      tracked[i] = seq.truth[0];
      diverged[i] = true;
      seconds[i] = 0.0;
    }
  }
  r.record = evaluate(seq.name, tracked, truth, diverged);
  for (std::size_t i = 1; i < seq.size(); ++i) {
    r.rows.push_back(FrameRow{i, r.record.errors[i - 1], diverged[i] ? TrackStatus::diverged : TrackStatus::ok,
                              seconds[i]});
    r.seconds += seconds[i];
  }
  return r;
}

std::string reason_code(ErrorCode c) {
  return c == ErrorCode::unsupported ? "unsupported_combination" : "invalid_parameters";
}

}  // namespace

RunReport run_matrix(const RunConfig& cfg) {
  cfg.validate();
  const std::vector<Sequence> seqs = make_inputs(cfg);
  for (const auto& s : seqs)
    if (s.size() < 2) fail(ErrorCode::invalid_argument, "sequence " + s.name + " needs at least two frames");

  RunReport report;
  report.sequences = seqs.size();
  for (const auto& s : seqs) report.evaluation_frames += s.size() - 1;

  std::vector<TrackerSpec> specs;
  std::string log;
  for (auto am : cfg.ams)
    for (auto sm : cfg.sms)
      for (auto ssm : cfg.ssms) {
        TrackerSpec spec = cfg.tracker;
        spec.am.kind = am;
        spec.sm = sm;
        spec.ssm = ssm;
        spec.search.seed = cfg.seed;
        spec.am.resolution_x = spec.resolution_x;
        spec.am.resolution_y = spec.resolution_y;
        const std::string name = spec.name();
        if (std::find(report.combinations.begin(), report.combinations.end(), name) != report.combinations.end())
          continue;
        try {
          spec.validate();
          make_appearance_model(spec.am);
        } catch (const Error& e) {
          const bool listed = std::any_of(report.skipped.begin(), report.skipped.end(),
                                          [&](const SkippedCombination& k) { return k.name == name; });
          if (!listed) {
            report.skipped.push_back(SkippedCombination{name, reason_code(e.code()), e.what()});
            log += "skip combination=" + name + " reason=" + reason_code(e.code()) + " detail=\"" + e.what() + "\"\n";
          }
          continue;
        }
        report.combinations.push_back(name);
        specs.push_back(spec);
      }

  const std::size_t jobs = specs.size() * seqs.size();
  std::vector<JobResult> results(jobs);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t j = next++; j < jobs; j = next++) results[j] = run_job(specs[j / seqs.size()], seqs[j % seqs.size()]);
  };
  const int n_workers = std::min<int>(resolve_workers(cfg.workers), static_cast<int>(std::max<std::size_t>(jobs, 1)));
  std::vector<std::thread> pool;
  for (int w = 1; w < n_workers; ++w) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  const auto thresholds = make_thresholds(cfg.tp_max, cfg.tp_step);
  for (std::size_t c = 0; c < specs.size(); ++c) {
    const auto& spec = specs[c];
    std::string csv = std::string(kResultsHeader) + "\n";
    std::vector<EvalRecord> records;
    double seconds = 0.0;
    std::size_t frames = 0;
    for (std::size_t s = 0; s < seqs.size(); ++s) {
      const JobResult& r = results[c * seqs.size() + s];
      if (!r.failure.empty())
        log += "job_failed combination=" + spec.name() + " sequence=" + seqs[s].name + " detail=\"" + r.failure + "\"\n";
      for (const auto& row : r.rows) {
        const double ms = cfg.timing ? row.seconds * 1e3 : 0.0;
        csv += seqs[s].name + "," + std::to_string(row.frame) + "," + format_real(row.error) + "," +
               to_string(row.status) + "," + format_real(ms) + "\n";
      }
      records.push_back(r.record);
      seconds += r.seconds;
      frames += r.rows.size();
    }
    const fs::path results_path = cfg.out / "results" / (spec.name() + ".csv");
    write_file_atomic(results_path, csv);
    report.files.push_back(results_path);
    for (double tp : thresholds)
      report.summary.rows.push_back(SummaryRow{to_string(spec.am.kind), to_string(spec.sm), to_string(spec.ssm), tp,
                                               success_rate(records, tp), sequence_mean_success_rate(records, tp), 0});
    if (cfg.timing)
      report.summary.fps.push_back(FpsRow{to_string(spec.am.kind), to_string(spec.sm), to_string(spec.ssm),
                                          seconds > 0.0 ? static_cast<double>(frames) / seconds : 0.0});
  }

  const fs::path summary_path = cfg.out / "summary.csv";
  write_file_atomic(summary_path, format_summary(report.summary));
  report.files.push_back(summary_path);
  if (!report.summary.rows.empty()) {
    for (auto g : {GroupBy::sm, GroupBy::am, GroupBy::ssm})
      for (const auto& plot : emit_plot(report.summary, g)) {
        const fs::path p = cfg.out / "plots" / plot.name;
        write_file_atomic(p, plot.svg);
        report.files.push_back(p);
      }
  }
  log += "done combinations=" + std::to_string(specs.size()) + " skipped=" + std::to_string(report.skipped.size()) +
         " sequences=" + std::to_string(seqs.size()) + " evaluation_frames=" + std::to_string(report.evaluation_frames) +
         "\n";
  const fs::path log_path = cfg.out / "run.log";
  write_file_atomic(log_path, log);
  report.files.push_back(log_path);
  return report;
}

}  // namespace regtrack
