#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <system_error>

#include "bilinear/harness.hpp"

namespace bilinear {

namespace {

constexpr std::string_view kCsvHeader = "method,rep,t,inst_regret,cum_regret";

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::ofstream open_output(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  return out;
}

void finish(std::ofstream& out, const std::filesystem::path& path) {
  out.flush();
  if (!out) throw Error("write to " + path.string() + " failed");
}

template <typename T>
T parse_field(std::string_view field, std::size_t line) {
  T v{};
  const auto res = std::from_chars(field.data(), field.data() + field.size(), v);
  if (res.ec != std::errc() || res.ptr != field.data() + field.size()) {
    throw InvalidInput("CSV line " + std::to_string(line) + ": bad field '" + std::string(field) +
                       "'");
  }
  return v;
}

std::string escape_xml(std::string_view s) {
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

// Tick spacing from {1, 2, 5} x 10^k giving at most ~6 ticks.
double nice_step(double span) {
  if (!(span > 0.0)) return 1.0;
  const double raw = span / 5.0;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  for (double m : {1.0, 2.0, 5.0, 10.0}) {
    if (m * mag >= raw) return m * mag;
  }
  return 10.0 * mag;
}

std::string tick_label(double v) {
  std::ostringstream ss;
  ss << v;
  return ss.str();
}

}  // namespace

bool logged_round(std::size_t t, std::size_t T, std::size_t stride) noexcept {
  return t <= 100 || t == T || (stride > 0 && t % stride == 0);
}

void emit_csv(const AggregateResult& result, const std::filesystem::path& path,
              std::size_t stride) {
  if (stride < 1) throw InvalidInput("emit_csv: stride must be >= 1");
  std::ofstream out = open_output(path);
  out << kCsvHeader << '\n';
  for (const MethodResult& m : result.methods) {
    const std::string name(to_string(m.method));
    for (std::size_t k = 0; k < m.traces.size(); ++k) {
      const RegretTrace& tr = m.traces[k];
      for (std::size_t t = 1; t <= tr.size(); ++t) {
        if (!logged_round(t, tr.size(), stride)) continue;
        out << name << ',' << m.reps[k] << ',' << t << ','
            << format_double(tr.instantaneous()[t - 1]) << ','
            << format_double(tr.cumulative()[t - 1]) << '\n';
      }
    }
  }
  finish(out, path);
}

std::vector<CsvRow> load_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != kCsvHeader) {
    throw InvalidInput("CSV: expected header '" + std::string(kCsvHeader) + "'");
  }
  std::vector<CsvRow> rows;
  for (std::size_t n = 2; std::getline(in, line); ++n) {
    if (line.empty()) continue;
    std::vector<std::string_view> f;
    std::string_view rest(line);
    for (std::size_t pos; (pos = rest.find(',')) != std::string_view::npos;) {
      f.push_back(rest.substr(0, pos));
      rest.remove_prefix(pos + 1);
    }
    f.push_back(rest);
    if (f.size() != 5) throw InvalidInput("CSV line " + std::to_string(n) + ": expected 5 fields");
    rows.push_back({std::string(f[0]), parse_field<std::size_t>(f[1], n),
                    parse_field<std::size_t>(f[2], n), parse_field<double>(f[3], n),
                    parse_field<double>(f[4], n)});
  }
  return rows;
}

std::vector<CurveSummary> summarize(const AggregateResult& result) {
  const std::size_t stride = std::max<std::size_t>(1, result.T / 500);
  std::vector<CurveSummary> out;
  for (const MethodResult& m : result.methods) {
    CurveSummary s{std::string(to_string(m.method)), {}, {}, {}};
    for (std::size_t t = 1; t <= m.mean.size(); ++t) {
      if (!logged_round(t, m.mean.size(), stride)) continue;
      s.t.push_back(t);
      s.mean.push_back(m.mean[t - 1]);
      s.half_width.push_back(m.half_width[t - 1]);
    }
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<CurveSummary> summarize(const std::vector<CsvRow>& rows) {
  std::vector<std::string> order;
  // method -> rep -> t -> cumulative regret
  std::map<std::string, std::map<std::size_t, std::map<std::size_t, double>>> grouped;
  for (const CsvRow& row : rows) {
    if (!grouped.contains(row.method)) order.push_back(row.method);
    grouped[row.method][row.rep][row.t] = row.cum_regret;
  }
  std::vector<CurveSummary> out;
  for (const std::string& name : order) {
    const auto& reps = grouped[name];
    std::vector<std::size_t> ts;
    for (const auto& [t, v] : reps.begin()->second) {
      const bool everywhere = std::all_of(reps.begin(), reps.end(),
                                          [&](const auto& kv) { return kv.second.contains(t); });
      if (everywhere) ts.push_back(t);
    }
    std::vector<Vector> curves;
    for (const auto& [rep, series] : reps) {
      Vector c;
      c.reserve(ts.size());
      for (std::size_t t : ts) c.push_back(series.at(t));
      curves.push_back(std::move(c));
    }
    std::vector<const Vector*> ptrs;
    for (const Vector& c : curves) ptrs.push_back(&c);
    CurveSummary s{name, ts, {}, {}};
    mean_and_band(ptrs, s.mean, s.half_width);
    out.push_back(std::move(s));
  }
  return out;
}

void emit_plot(const std::vector<CurveSummary>& curves, const std::filesystem::path& path) {
  if (curves.empty()) throw InvalidInput("emit_plot: nothing to plot");
  constexpr double W = 800, H = 500, L = 80, R = 30, Tm = 30, B = 60;
  static const char* const kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                        "#ff7f0e", "#8c564b", "#e377c2", "#7f7f7f"};
  double x_max = 1.0, y_max = 0.0;
  for (const CurveSummary& c : curves) {
    if (!c.t.empty()) x_max = std::max(x_max, static_cast<double>(c.t.back()));
    for (std::size_t i = 0; i < c.mean.size(); ++i) y_max = std::max(y_max, c.mean[i] + c.half_width[i]);
  }
  if (!(y_max > 0.0)) y_max = 1.0;
  const double x_step = nice_step(x_max), y_step = nice_step(y_max);
  x_max = std::ceil(x_max / x_step) * x_step;
  y_max = std::ceil(y_max / y_step) * y_step;
  auto px = [&](double x) { return L + x / x_max * (W - L - R); };
  auto py = [&](double y) { return H - B - y / y_max * (H - Tm - B); };

  std::ofstream out = open_output(path);
  out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
      << "\" viewBox=\"0 0 " << W << ' ' << H << "\" font-family=\"sans-serif\" font-size=\"12\">\n"
      << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  for (double x = 0; x <= x_max + 1e-9; x += x_step) {
    out << "<line x1=\"" << px(x) << "\" y1=\"" << py(0) << "\" x2=\"" << px(x) << "\" y2=\""
        << py(0) + 5 << "\" stroke=\"black\"/>\n<text x=\"" << px(x) << "\" y=\"" << py(0) + 20
        << "\" text-anchor=\"middle\">" << tick_label(x) << "</text>\n";
  }
  for (double y = 0; y <= y_max + 1e-9; y += y_step) {
    out << "<line x1=\"" << px(0) - 5 << "\" y1=\"" << py(y) << "\" x2=\"" << px(x_max)
        << "\" y2=\"" << py(y) << "\" stroke=\"#e0e0e0\"/>\n<text x=\"" << px(0) - 8 << "\" y=\""
        << py(y) + 4 << "\" text-anchor=\"end\">" << tick_label(y) << "</text>\n";
  }
  out << "<line x1=\"" << px(0) << "\" y1=\"" << py(0) << "\" x2=\"" << px(x_max) << "\" y2=\""
      << py(0) << "\" stroke=\"black\"/>\n"
      << "<line x1=\"" << px(0) << "\" y1=\"" << py(0) << "\" x2=\"" << px(0) << "\" y2=\""
      << py(y_max) << "\" stroke=\"black\"/>\n"
      << "<text x=\"" << (L + W - R) / 2 << "\" y=\"" << H - 15
      << "\" text-anchor=\"middle\">round t</text>\n"
      << "<text x=\"20\" y=\"" << (Tm + H - B) / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 20 "
      << (Tm + H - B) / 2 << ")\">cumulative regret</text>\n";

  for (std::size_t k = 0; k < curves.size(); ++k) {
    const CurveSummary& c = curves[k];
    const char* color = kColors[k % std::size(kColors)];
    out << "<polygon class=\"band\" fill=\"" << color << "\" fill-opacity=\"0.2\" stroke=\"none\" points=\"";
    for (std::size_t i = 0; i < c.t.size(); ++i) {
      out << px(static_cast<double>(c.t[i])) << ',' << py(c.mean[i] + c.half_width[i]) << ' ';
    }
    for (std::size_t i = c.t.size(); i-- > 0;) {
      out << px(static_cast<double>(c.t[i])) << ',' << py(std::max(0.0, c.mean[i] - c.half_width[i])) << ' ';
    }
    out << "\"/>\n<polyline class=\"mean\" fill=\"none\" stroke=\"" << color
        << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < c.t.size(); ++i) {
      out << px(static_cast<double>(c.t[i])) << ',' << py(c.mean[i]) << ' ';
    }
    out << "\"/>\n";
  }
  for (std::size_t k = 0; k < curves.size(); ++k) {
    const double y = Tm + 15 + 18 * static_cast<double>(k);
    const char* color = kColors[k % std::size(kColors)];
    out << "<g class=\"legend\"><line x1=\"" << L + 15 << "\" y1=\"" << y << "\" x2=\"" << L + 40
        << "\" y2=\"" << y << "\" stroke=\"" << color << "\" stroke-width=\"3\"/><text x=\""
        << L + 46 << "\" y=\"" << y + 4 << "\">" << escape_xml(curves[k].method) << "</text></g>\n";
  }
  out << "</svg>\n";
  finish(out, path);
}

void emit_plot(const AggregateResult& result, const std::filesystem::path& path) {
  emit_plot(summarize(result), path);
}

}  // namespace bilinear
