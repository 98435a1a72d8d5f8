#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace regtrack {

struct SummaryRow {
  std::string am, sm, ssm;
  double tp = 0.0;
  double sr = 0.0;
  double sr_seq_mean = 0.0;
  int line = 0;  // 1-based line in the parsed file, 0 when built in memory
};

struct FpsRow {
  std::string am, sm, ssm;
  double fps = 0.0;
};

/// summary.csv: header "am,sm,ssm,t_p,sr,sr_seq_mean"; SR rows per combination
/// and threshold, then FPS rows with t_p = "fps", the rate in the sr column and
/// an empty last column.
struct Summary {
  std::vector<SummaryRow> rows;
  std::vector<FpsRow> fps;
};

inline constexpr const char* kSummaryHeader = "am,sm,ssm,t_p,sr,sr_seq_mean";
inline constexpr const char* kResultsHeader = "sequence,frame,e_al,status,ms_per_frame";

std::string format_summary(const Summary& s);
Summary parse_summary(const std::string& text);

/// Rejects empty summaries, SR values outside [0,1], and SR curves that
/// decrease as t_p grows; messages name the offending row.
void validate_summary(const Summary& s);

enum class GroupBy { sm, am, ssm };

const char* to_string(GroupBy g);
GroupBy parse_group_by(std::string_view name);

struct PlotFile {
  std::string name;
  std::string svg;
};

/// One SVG per combination of the two non-grouped fields, holding one SR
/// curve per member of the grouped field.
std::vector<PlotFile> emit_plot(const Summary& s, GroupBy group_by);

/// Writes to a sibling temporary file and renames it into place.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);

std::string read_text_file(const std::filesystem::path& path);

}  // namespace regtrack
