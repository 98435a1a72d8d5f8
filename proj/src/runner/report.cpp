#include "runner/report.hpp"

#include "core/error.hpp"
#include "core/parse.hpp"

#include <algorithm>
#include <array>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

namespace regtrack {

namespace fs = std::filesystem;

namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur += ch;
    }
  }
  out.push_back(cur);
  return out;
}

std::string fixed3(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}

std::string xml_escape(std::string_view s) {
  std::string out;
  for (char ch : s) {
    switch (ch) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += ch;
    }
  }
  return out;
}

std::string combo_name(const SummaryRow& r) { return r.am + "_" + r.sm + "_" + r.ssm; }

}  // namespace

std::string format_summary(const Summary& s) {
  std::string out = std::string(kSummaryHeader) + "\n";
  for (const auto& r : s.rows)
    out += r.am + "," + r.sm + "," + r.ssm + "," + format_real(r.tp) + "," + format_real(r.sr) + "," +
           format_real(r.sr_seq_mean) + "\n";
  for (const auto& f : s.fps) out += f.am + "," + f.sm + "," + f.ssm + ",fps," + format_real(f.fps) + ",\n";
  return out;
}

Summary parse_summary(const std::string& text) {
  Summary s;
  std::istringstream in(text);
  std::string line;
  int number = 0;
  bool header = false;
  while (std::getline(in, line)) {
    ++number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::string where = "summary row " + std::to_string(number) + ": ";
    if (!header) {
      if (line != kSummaryHeader) fail(ErrorCode::parse, where + "expected header '" + kSummaryHeader + "'");
      header = true;
      continue;
    }
    const auto f = split_csv(line);
    if (f.size() != 6) fail(ErrorCode::parse, where + "expected 6 columns, got " + std::to_string(f.size()));
    try {
      if (f[3] == "fps") {
        s.fps.push_back(FpsRow{f[0], f[1], f[2], parse_number<double>("fps", f[4])});
      } else {
        SummaryRow r{f[0], f[1], f[2], parse_number<double>("t_p", f[3]), parse_number<double>("sr", f[4]),
                     parse_number<double>("sr_seq_mean", f[5]), number};
        s.rows.push_back(r);
      }
    } catch (const Error& e) {
      fail(ErrorCode::parse, where + e.what());
    }
  }
  if (!header) fail(ErrorCode::parse, "summary row 1: missing header");
  return s;
}

void validate_summary(const Summary& s) {
  if (s.rows.empty()) fail(ErrorCode::invalid_argument, "summary holds no success-rate rows");
  std::map<std::string, const SummaryRow*> last;
  for (std::size_t i = 0; i < s.rows.size(); ++i) {
    const auto& r = s.rows[i];
    const std::string row = "summary row " + std::to_string(r.line > 0 ? r.line : static_cast<int>(i) + 2);
    if (!(r.sr >= 0.0 && r.sr <= 1.0)) fail(ErrorCode::invalid_argument, row + ": sr outside [0,1]");
    const auto key = combo_name(r);
    auto it = last.find(key);
    if (it != last.end()) {
      if (!(r.tp > it->second->tp)) fail(ErrorCode::invalid_argument, row + ": t_p not increasing for " + key);
      if (r.sr < it->second->sr) fail(ErrorCode::invalid_argument, row + ": sr decreases with t_p for " + key);
      it->second = &r;
    } else {
      last.emplace(key, &r);
    }
  }
}

const char* to_string(GroupBy g) {
  switch (g) {
    case GroupBy::sm: return "sm";
    case GroupBy::am: return "am";
    case GroupBy::ssm: return "ssm";
  }
  return "?";
}

GroupBy parse_group_by(std::string_view name) {
  for (auto g : {GroupBy::sm, GroupBy::am, GroupBy::ssm})
    if (name == to_string(g)) return g;
  fail(ErrorCode::parse, "group-by must be sm, am or ssm, got '" + std::string(name) + "'");
}

std::vector<PlotFile> emit_plot(const Summary& s, GroupBy group_by) {
  validate_summary(s);
  struct Curve {
    std::string label;
    std::vector<double> tp, sr;
  };
  struct Panel {
    std::string key;
    std::vector<Curve> curves;
  };
  std::vector<Panel> panels;
  double tp_max = 20.0;
  for (const auto& r : s.rows) {
    std::string key;
    switch (group_by) {
      case GroupBy::sm: key = r.am + "_" + r.ssm; break;
      case GroupBy::am: key = r.sm + "_" + r.ssm; break;
      case GroupBy::ssm: key = r.am + "_" + r.sm; break;
    }
    auto pit = std::find_if(panels.begin(), panels.end(), [&](const Panel& p) { return p.key == key; });
    if (pit == panels.end()) pit = panels.insert(panels.end(), Panel{key, {}});
    const auto label = combo_name(r);
    auto cit = std::find_if(pit->curves.begin(), pit->curves.end(), [&](const Curve& c) { return c.label == label; });
    if (cit == pit->curves.end()) cit = pit->curves.insert(pit->curves.end(), Curve{label, {}, {}});
    cit->tp.push_back(r.tp);
    cit->sr.push_back(r.sr);
    tp_max = std::max(tp_max, r.tp);
  }

  static constexpr std::array<const char*, 10> palette = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
                                                          "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};
  constexpr double x0 = 60, y0 = 30, pw = 520, ph = 320, width = 780, height = 400;
  auto px = [&](double tp) { return x0 + pw * tp / tp_max; };
  auto py = [&](double sr) { return y0 + ph * (1.0 - sr); };

  std::vector<PlotFile> out;
  for (const auto& panel : panels) {
    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
        << "\" viewBox=\"0 0 " << width << " " << height << "\">\n";
    svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    svg << "<text x=\"" << x0 << "\" y=\"18\" font-size=\"14\" font-family=\"sans-serif\">success rate by "
        << to_string(group_by) << ": " << xml_escape(panel.key) << "</text>\n";
    svg << "<g stroke=\"black\" stroke-width=\"1\" fill=\"none\"><rect x=\"" << x0 << "\" y=\"" << y0
        << "\" width=\"" << pw << "\" height=\"" << ph << "\"/></g>\n";
    svg << "<g font-size=\"11\" font-family=\"sans-serif\">\n";
    for (int k = 0; k <= 4; ++k) {
      const double tp = tp_max * k / 4.0;
      svg << "<text x=\"" << fixed3(px(tp)) << "\" y=\"" << fixed3(y0 + ph + 16) << "\" text-anchor=\"middle\">"
          << format_real(tp) << "</text>\n";
    }
    for (int k = 0; k <= 5; ++k) {
      const double sr = k / 5.0;
      svg << "<text x=\"" << fixed3(x0 - 6) << "\" y=\"" << fixed3(py(sr) + 4) << "\" text-anchor=\"end\">"
          << format_real(sr) << "</text>\n";
    }
    svg << "<text x=\"" << fixed3(x0 + pw / 2) << "\" y=\"" << fixed3(y0 + ph + 34)
        << "\" text-anchor=\"middle\">t_p (px)</text>\n";
    svg << "<text x=\"16\" y=\"" << fixed3(y0 + ph / 2) << "\" transform=\"rotate(-90 16 " << fixed3(y0 + ph / 2)
        << ")\" text-anchor=\"middle\">SR</text>\n</g>\n";
    for (std::size_t c = 0; c < panel.curves.size(); ++c) {
      const auto& curve = panel.curves[c];
      const char* color = palette[c % palette.size()];
      svg << "<polyline class=\"curve\" data-label=\"" << xml_escape(curve.label) << "\" data-sr=\"";
      for (std::size_t i = 0; i < curve.sr.size(); ++i) svg << (i ? " " : "") << format_real(curve.sr[i]);
      svg << "\" fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
      for (std::size_t i = 0; i < curve.tp.size(); ++i)
        svg << (i ? " " : "") << fixed3(px(curve.tp[i])) << "," << fixed3(py(curve.sr[i]));
      svg << "\"/>\n";
      const double ly = y0 + 12 + 16.0 * static_cast<double>(c);
      svg << "<line x1=\"" << fixed3(x0 + pw + 12) << "\" y1=\"" << fixed3(ly) << "\" x2=\"" << fixed3(x0 + pw + 32)
          << "\" y2=\"" << fixed3(ly) << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
      svg << "<text x=\"" << fixed3(x0 + pw + 36) << "\" y=\"" << fixed3(ly + 4)
          << "\" font-size=\"11\" font-family=\"sans-serif\">" << xml_escape(curve.label) << "</text>\n";
    }
    svg << "</svg>\n";
    out.push_back(PlotFile{"sr_by_" + std::string(to_string(group_by)) + "_" + panel.key + ".svg", svg.str()});
  }
  return out;
}

void write_file_atomic(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorCode::io, "cannot write " + tmp.string());
    out << content;
    out.flush();
    if (!out) fail(ErrorCode::io, "write failed for " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) fail(ErrorCode::io, "cannot rename " + tmp.string() + " to " + path.string() + ": " + ec.message());
}

std::string read_text_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::io, "cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace regtrack
