// Command-line front end. Links only the C API.
#include "regtrack/regtrack.h"

#include <CLI11.hpp>

#include <cstdio>
#include <cstdlib>
#include <string>

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitMissingDataset = 2;
constexpr int kExitFailure = 3;

int report(rt_status s) {
  if (s == RT_OK) return kExitOk;
  std::fprintf(stderr, "regtrack: %s: %s\n", rt_status_name(s), rt_last_error());
  switch (s) {
    case RT_ERR_PARSE:
    case RT_ERR_INVALID_ARGUMENT: return kExitConfig;
    case RT_ERR_MISSING_DATASET: return kExitMissingDataset;
    default: return kExitFailure;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Registration-based tracking experiments"};
  app.require_subcommand(1);

  std::string config, out;
  long long seed = -1;
  int workers = 0;
  app.add_option("--config", config, "run configuration (key=value lines)");
  app.add_option("--out", out, "output directory");
  app.add_option("--seed", seed, "random seed override")->check(CLI::NonNegativeNumber);
  app.add_option("--workers", workers, "worker threads (REGTRACK_THREADS overrides)")->check(CLI::PositiveNumber);

  auto* run = app.add_subcommand("run", "run an AM x SM x SSM matrix and write results, summary and plots");
  run->fallthrough();

  auto* plot = app.add_subcommand("plot", "render SR curves from a summary CSV");
  plot->fallthrough();
  std::string summary, group_by;
  plot->add_option("--summary", summary, "summary.csv")->required();
  plot->add_option("--group-by", group_by, "sm, am or ssm (default: all three)")
      ->check(CLI::IsMember({"sm", "am", "ssm"}));

  auto* synth = app.add_subcommand("synth", "write the configured synthetic sequences to disk");
  synth->fallthrough();

  auto* project = app.add_subcommand("project-gt", "project a ground-truth file onto a lower-DOF SSM");
  project->fallthrough();
  std::string gt_in, gt_out, ssm;
  project->add_option("--input", gt_in, "ground-truth file")->required();
  project->add_option("--ssm", ssm, "target state-space model")->required();
  project->add_option("--output", gt_out, "output file (default: <out>/groundtruth.txt)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  rt_run_options opts{};
  opts.config_path = config.empty() ? nullptr : config.c_str();
  opts.out_dir = out.empty() ? nullptr : out.c_str();
  opts.has_seed = seed >= 0;
  opts.seed = seed >= 0 ? static_cast<uint64_t>(seed) : 0;
  opts.workers = workers;

  if (*run || *synth) {
    if (config.empty()) {
      std::fprintf(stderr, "regtrack: --config is required\n");
      return kExitConfig;
    }
    if (*run) {
      rt_run_result result{};
      const int code = report(rt_run_matrix(&opts, &result));
      if (code == kExitOk)
        std::printf("combinations=%d skipped=%d sequences=%d evaluation_frames=%lld\n", result.combinations,
                    result.skipped, result.sequences, static_cast<long long>(result.evaluation_frames));
      return code;
    }
    int written = 0;
    const int code = report(rt_synth(&opts, &written));
    if (code == kExitOk) std::printf("sequences=%d\n", written);
    return code;
  }

  if (*plot) {
    const std::string dir = out.empty() ? "." : out;
    int total = 0;
    for (const char* g : {"sm", "am", "ssm"}) {
      if (!group_by.empty() && group_by != g) continue;
      int written = 0;
      const int code = report(rt_emit_plot(summary.c_str(), g, dir.c_str(), &written));
      if (code != kExitOk) return code;
      total += written;
    }
    std::printf("plots=%d\n", total);
    return kExitOk;
  }

  if (gt_out.empty()) gt_out = (out.empty() ? std::string(".") : out) + "/groundtruth.txt";
  return report(rt_project_gt(gt_in.c_str(), ssm.c_str(), gt_out.c_str()));
}
