#include "fnetlab/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "fnetlab/bench.hpp"

namespace fnetlab {

namespace {

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                          "#9467bd", "#8c564b", "#17becf", "#7f7f7f"};

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

struct Frame {
  double x0 = 90, y0 = 40, width = 680, height = 380;
  double x1() const { return x0 + width; }
  double y1() const { return y0 + height; }
};

std::string svg_open(double w, double h, const std::string& scales) {
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w
     << "\" height=\"" << h << "\" viewBox=\"0 0 " << w << " " << h << "\">\n";
  os << "<!-- fnetlab-chart " << scales << " -->\n";
  os << "<rect width=\"" << w << "\" height=\"" << h << "\" fill=\"white\"/>\n";
  return os.str();
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

// Ordered distinct variants, in first-appearance order.
std::vector<std::string> variant_order(const std::vector<BenchRecord>& records) {
  std::vector<std::string> out;
  for (const auto& r : records)
    if (std::find(out.begin(), out.end(), r.variant) == out.end())
      out.push_back(r.variant);
  return out;
}

std::string legend(const std::vector<std::string>& variants, const Frame& f) {
  std::ostringstream os;
  double y = f.y0 + 8;
  for (size_t i = 0; i < variants.size(); ++i) {
    const char* color = kPalette[i % 8];
    os << "<line x1=\"" << f.x1() + 14 << "\" y1=\"" << y - 4 << "\" x2=\""
       << f.x1() + 34 << "\" y2=\"" << y - 4 << "\" stroke=\"" << color
       << "\" stroke-width=\"2\"/>\n";
    os << "<text class=\"legend\" x=\"" << f.x1() + 38 << "\" y=\"" << y
       << "\" font-size=\"12\">" << variants[i] << "</text>\n";
    y += 18;
  }
  return os.str();
}

// Shared log-x line chart body; y values must be positive for log y.
std::string render_loglog(const std::map<std::string, std::map<Index, double>>& series,
                          const std::vector<std::string>& order,
                          const std::string& title, const std::string& y_label,
                          bool y_log10) {
  Frame f;
  std::set<Index> lengths;
  double ymin = 1e300, ymax = -1e300;
  for (const auto& [name, pts] : series) {
    for (const auto& [n, v] : pts) {
      lengths.insert(n);
      ymin = std::min(ymin, v);
      ymax = std::max(ymax, v);
    }
  }
  require(!lengths.empty(), "svg chart: no data points");
  const double lx0 = std::log2(double(*lengths.begin()));
  const double lx1 = std::log2(double(*lengths.rbegin()));
  auto to_x = [&](Index n) {
    const double t = lx1 > lx0 ? (std::log2(double(n)) - lx0) / (lx1 - lx0) : 0.5;
    return f.x0 + t * f.width;
  };
  double ly0, ly1;
  if (y_log10) {
    ly0 = std::floor(std::log10(ymin));
    ly1 = std::ceil(std::log10(ymax));
    if (ly1 <= ly0) ly1 = ly0 + 1;
  } else {
    ly0 = 0;
    ly1 = std::ceil(ymax * 1.05);
    if (ly1 <= 0) ly1 = 1;
  }
  auto to_y = [&](double v) {
    const double t =
        y_log10 ? (std::log10(v) - ly0) / (ly1 - ly0) : (v - ly0) / (ly1 - ly0);
    return f.y1() - t * f.height;
  };

  std::ostringstream os;
  os << svg_open(900, 500, std::string("xscale=log2 yscale=") +
                               (y_log10 ? "log10" : "linear"));
  os << "<text x=\"" << f.x0 << "\" y=\"24\" font-size=\"15\" font-weight=\"bold\">"
     << title << "</text>\n";
  os << "<line x1=\"" << f.x0 << "\" y1=\"" << f.y1() << "\" x2=\"" << f.x1()
     << "\" y2=\"" << f.y1() << "\" stroke=\"black\"/>\n";
  os << "<line x1=\"" << f.x0 << "\" y1=\"" << f.y0 << "\" x2=\"" << f.x0
     << "\" y2=\"" << f.y1() << "\" stroke=\"black\"/>\n";
  for (Index n : lengths) {
    const double x = to_x(n);
    os << "<line x1=\"" << fmt(x) << "\" y1=\"" << f.y1() << "\" x2=\"" << fmt(x)
       << "\" y2=\"" << f.y1() + 5 << "\" stroke=\"black\"/>\n";
    os << "<text class=\"xtick\" x=\"" << fmt(x) << "\" y=\"" << f.y1() + 20
       << "\" font-size=\"11\" text-anchor=\"middle\">" << n << "</text>\n";
  }
  if (y_log10) {
    for (double d = ly0; d <= ly1 + 1e-9; d += 1.0) {
      const double y = to_y(std::pow(10.0, d));
      os << "<line x1=\"" << f.x0 - 5 << "\" y1=\"" << fmt(y) << "\" x2=\"" << f.x1()
         << "\" y2=\"" << fmt(y) << "\" stroke=\"#dddddd\"/>\n";
      os << "<text class=\"ytick\" x=\"" << f.x0 - 10 << "\" y=\"" << fmt(y + 4)
         << "\" font-size=\"11\" text-anchor=\"end\">" << fmt(std::pow(10.0, d))
         << "</text>\n";
    }
  } else {
    for (int i = 0; i <= 5; ++i) {
      const double v = ly0 + (ly1 - ly0) * i / 5.0;
      const double y = to_y(std::max(v, 1e-12));
      os << "<line x1=\"" << f.x0 - 5 << "\" y1=\"" << fmt(y) << "\" x2=\"" << f.x1()
         << "\" y2=\"" << fmt(y) << "\" stroke=\"#dddddd\"/>\n";
      os << "<text class=\"ytick\" x=\"" << f.x0 - 10 << "\" y=\"" << fmt(y + 4)
         << "\" font-size=\"11\" text-anchor=\"end\">" << fmt(v) << "</text>\n";
    }
  }
  os << "<text x=\"18\" y=\"" << f.y0 + f.height / 2
     << "\" font-size=\"12\" transform=\"rotate(-90 18 " << f.y0 + f.height / 2
     << ")\" text-anchor=\"middle\">" << y_label << "</text>\n";
  os << "<text x=\"" << f.x0 + f.width / 2 << "\" y=\"" << f.y1() + 38
     << "\" font-size=\"12\" text-anchor=\"middle\">sequence length n</text>\n";

  size_t color_i = 0;
  for (const auto& name : order) {
    auto it = series.find(name);
    if (it == series.end() || it->second.empty()) {
      ++color_i;
      continue;
    }
    const char* color = kPalette[color_i++ % 8];
    std::ostringstream pts;
    for (const auto& [n, v] : it->second)
      pts << fmt(to_x(n)) << "," << fmt(to_y(std::max(v, 1e-12))) << " ";
    os << "<polyline fill=\"none\" stroke=\"" << color
       << "\" stroke-width=\"2\" points=\"" << pts.str() << "\"/>\n";
    for (const auto& [n, v] : it->second)
      os << "<circle cx=\"" << fmt(to_x(n)) << "\" cy=\""
         << fmt(to_y(std::max(v, 1e-12))) << "\" r=\"3\" fill=\"" << color
         << "\"/>\n";
  }
  os << legend(order, f);
  os << "</svg>\n";
  return os.str();
}

}  // namespace

std::string bench_records_to_csv(const std::vector<BenchRecord>& records) {
  std::ostringstream os;
  os << "variant,n,d_h,layers,batch,phase,median_ms,steps_per_s,flops,peak_bytes,"
        "repeats,status\n";
  char buf[512];
  for (const auto& r : records) {
    std::snprintf(buf, sizeof(buf),
                  "%s,%lld,%lld,%lld,%lld,%s,%.4f,%.4f,%.0f,%.0f,%d,%s\n",
                  r.variant.c_str(), static_cast<long long>(r.n),
                  static_cast<long long>(r.d_h), static_cast<long long>(r.layers),
                  static_cast<long long>(r.batch), to_string(r.phase), r.median_ms,
                  r.steps_per_s, r.flops, r.peak_bytes, r.repeats,
                  r.status.c_str());
    os << buf;
  }
  return os.str();
}

std::vector<BenchRecord> bench_records_from_csv(const std::string& csv) {
  std::istringstream is(csv);
  std::string line;
  require(bool(std::getline(is, line)), "bench csv: empty input");
  require(line.rfind("variant,", 0) == 0, "bench csv: missing header");
  std::vector<BenchRecord> out;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto f = split(line, ',');
    require(f.size() == 12, "bench csv: bad row: " + line);
    BenchRecord r;
    r.variant = f[0];
    r.n = std::stoll(f[1]);
    r.d_h = std::stoll(f[2]);
    r.layers = std::stoll(f[3]);
    r.batch = std::stoll(f[4]);
    r.phase = bench_phase_from_string(f[5]);
    r.median_ms = std::stod(f[6]);
    r.steps_per_s = std::stod(f[7]);
    r.flops = std::stod(f[8]);
    r.peak_bytes = std::stod(f[9]);
    r.repeats = std::stoi(f[10]);
    r.status = f[11];
    out.push_back(std::move(r));
  }
  return out;
}

std::string render_time_vs_length_svg(const std::vector<BenchRecord>& records,
                                      BenchPhase phase) {
  std::map<std::string, std::map<Index, double>> series;
  for (const auto& r : records)
    if (r.phase == phase && r.ok() && r.median_ms > 0)
      series[r.variant][r.n] = r.median_ms;
  return render_loglog(series, variant_order(records),
                       std::string("median time per step, ") + to_string(phase),
                       "median ms", /*y_log10=*/true);
}

std::string render_speedup_svg(const std::vector<BenchRecord>& records,
                               BenchPhase phase, const std::string& baseline) {
  std::map<std::string, std::map<Index, double>> series;
  for (const auto& name : variant_order(records)) {
    auto s = speedup_vs_attention(records, name, phase, baseline);
    if (!s.empty()) series[name] = std::move(s);
  }
  return render_loglog(series, variant_order(records),
                       "speed-up multiplier vs " + baseline, "speed-up (x)",
                       /*y_log10=*/false);
}

std::string render_flops_bar_svg(const std::vector<BenchRecord>& records) {
  Index nmax = 0;
  for (const auto& r : records) nmax = std::max(nmax, r.n);
  std::map<std::string, double> flops;
  for (const auto& r : records)
    if (r.n == nmax && r.flops > 0) flops[r.variant] = r.flops;
  require(!flops.empty(), "svg chart: no flops data");
  Frame f;
  double vmax = 0;
  for (const auto& [k, v] : flops) vmax = std::max(vmax, v);
  std::ostringstream os;
  os << svg_open(900, 500, "xscale=categorical yscale=linear");
  os << "<text x=\"" << f.x0 << "\" y=\"24\" font-size=\"15\" font-weight=\"bold\">"
     << "analytic FLOPs at n=" << nmax << " (per timed unit)</text>\n";
  const double bw = f.width / double(flops.size());
  size_t i = 0;
  for (const auto& [name, v] : flops) {
    const double h = f.height * v / (vmax * 1.1);
    const double x = f.x0 + double(i) * bw + 8;
    os << "<rect x=\"" << fmt(x) << "\" y=\"" << fmt(f.y1() - h) << "\" width=\""
       << fmt(bw - 16) << "\" height=\"" << fmt(h) << "\" fill=\""
       << kPalette[i % 8] << "\"/>\n";
    os << "<text class=\"bar-label\" x=\"" << fmt(x + (bw - 16) / 2) << "\" y=\""
       << f.y1() + 16 << "\" font-size=\"11\" text-anchor=\"middle\">" << name
       << "</text>\n";
    os << "<text x=\"" << fmt(x + (bw - 16) / 2) << "\" y=\"" << fmt(f.y1() - h - 6)
       << "\" font-size=\"11\" text-anchor=\"middle\">" << fmt(v / 1e9)
       << " G</text>\n";
    ++i;
  }
  os << "</svg>\n";
  return os.str();
}

void emit_report(const std::vector<BenchRecord>& records,
                 const std::string& out_dir) {
  require(!records.empty(), "emit_report: no records");
  std::filesystem::path dir(out_dir);
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  auto write = [&](const std::string& name, const std::string& content) {
    std::ofstream os(dir / name, std::ios::binary | std::ios::trunc);
    require(bool(os), "emit_report: cannot write " + (dir / name).string());
    os << content;
    require(bool(os), "emit_report: write failed for " + name);
  };
  write("records.csv", bench_records_to_csv(records));

  std::map<BenchPhase, int> counts;
  for (const auto& r : records)
    if (r.ok()) ++counts[r.phase];
  require(!counts.empty(), "emit_report: no usable rows");
  BenchPhase best = records[0].phase;
  int bestc = -1;
  for (const auto& [p, c] : counts)
    if (c > bestc) {
      best = p;
      bestc = c;
    }
  write("time_vs_length.svg", render_time_vs_length_svg(records, best));
  bool has_baseline = false;
  for (const auto& r : records) has_baseline |= r.variant == "bert" && r.ok();
  if (has_baseline)
    write("speedup_vs_length.svg", render_speedup_svg(records, best, "bert"));
  write("flops_bar.svg", render_flops_bar_svg(records));
}

}  // namespace fnetlab
