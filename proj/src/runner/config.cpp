#include "runner/config.hpp"

#include "core/error.hpp"
#include "core/parse.hpp"

#include <fstream>
#include <set>
#include <sstream>

namespace regtrack {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

// Returns false for unknown synth fields.
bool set_synth_option(SynthConfig& s, int& count, std::string_view key, std::string_view value) {
  if (key == "sequences") count = parse_number<int>(key, value);
  else if (key == "frames") s.frames = parse_number<int>(key, value);
  else if (key == "width") s.width = parse_number<int>(key, value);
  else if (key == "height") s.height = parse_number<int>(key, value);
  else if (key == "box") s.box_size = parse_number<double>(key, value);
  else if (key == "motion") s.motion_ssm = parse_ssm_kind(value);
  else if (key == "translation_sigma") s.translation_sigma = parse_number<double>(key, value);
  else if (key == "shape_sigma") s.shape_sigma = parse_number<double>(key, value);
  else if (key == "shape_rho") s.shape_rho = parse_number<double>(key, value);
  else if (key == "photometric") s.photometric = parse_photometric(value);
  else if (key == "gain") s.gain_amplitude = parse_number<double>(key, value);
  else if (key == "bias") s.bias_amplitude = parse_number<double>(key, value);
  else if (key == "period") s.photometric_period = parse_number<double>(key, value);
  else if (key == "noise") s.noise_sigma = parse_number<double>(key, value);
  else return false;
  return true;
}

}  // namespace

void RunConfig::validate() const {
  if (ams.empty() || sms.empty() || ssms.empty()) fail(ErrorCode::parse, "am, sm and ssm lists must be non-empty");
  if (datasets.empty() && synth_sequences <= 0)
    fail(ErrorCode::parse, "no input: give dataset=<dir> or synth.sequences=<n>");
  if (workers < 1) fail(ErrorCode::parse, "workers must be positive");
  if (!(tp_max >= 0.0) || !(tp_step > 0.0)) fail(ErrorCode::parse, "tp_max must be >= 0 and tp_step > 0");
}

RunConfig parse_run_config(const std::string& text, const std::string& source, bool require_matrix) {
  RunConfig cfg;
  std::istringstream in(text);
  std::string raw;
  int line_no = 0;
  std::set<std::string, std::less<>> seen;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string_view line = raw;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::string where = source + ":" + std::to_string(line_no) + ": ";
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) fail(ErrorCode::parse, where + "expected key=value");
    const auto key = trim(line.substr(0, eq));
    const auto value = trim(line.substr(eq + 1));
    const std::string field = "field '" + std::string(key) + "': ";
    if (key.empty()) fail(ErrorCode::parse, where + "empty key");
    const bool list_key = key == "am" || key == "sm" || key == "ssm" || key == "dataset";
    if (!list_key && !seen.insert(std::string(key)).second) fail(ErrorCode::parse, where + field + "repeated key");
    try {
      if (key == "am") cfg.ams.push_back(parse_am_kind(value));
      else if (key == "sm") cfg.sms.push_back(parse_sm_kind(value));
      else if (key == "ssm") cfg.ssms.push_back(parse_ssm_kind(value));
      else if (key == "dataset") {
        if (value.empty()) fail(ErrorCode::parse, "empty path");
        cfg.datasets.emplace_back(std::string(value));
      } else if (key == "seed") cfg.seed = parse_number<std::uint64_t>(key, value);
      else if (key == "out") cfg.out = std::string(value);
      else if (key == "workers") cfg.workers = parse_number<int>(key, value);
      else if (key == "tp_max") cfg.tp_max = parse_number<double>(key, value);
      else if (key == "tp_step") cfg.tp_step = parse_number<double>(key, value);
      else if (key == "timing") cfg.timing = parse_switch(key, value);
      else if (key.starts_with("synth.")) {
        if (!set_synth_option(cfg.synth, cfg.synth_sequences, key.substr(6), value))
          fail(ErrorCode::parse, "unknown synthetic-sequence setting");
      } else if (!set_tracker_option(cfg.tracker, key, value)) {
        fail(ErrorCode::parse, "unknown key");
      }
    } catch (const Error& e) {
      fail(ErrorCode::parse, where + field + e.what());
    }
  }
  try {
    if (require_matrix) cfg.validate();
  } catch (const Error& e) {
    fail(ErrorCode::parse, source + ": " + e.what());
  }
  return cfg;
}

RunConfig read_run_config(const std::filesystem::path& path, bool require_matrix) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::parse, "cannot read config " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_run_config(ss.str(), path.string(), require_matrix);
}

}  // namespace regtrack
