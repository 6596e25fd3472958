#include "artifacts.hpp"

#include "run_config.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace bsvie::app {

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

Cell::Cell(double v) : text_(format_double(v)) {}
Cell::Cell(long long v) : text_(std::to_string(v)) {}

Cell::Cell(std::string v) {
  if (v.find_first_of(",\"\r\n") == std::string::npos) {
    text_ = std::move(v);
    return;
  }
  text_ = "\"";
  for (char c : v) {
    if (c == '"') text_ += '"';
    text_ += c;
  }
  text_ += '"';
}

std::string Table::csv() const {
  std::string out;
  for (std::size_t k = 0; k < header.size(); ++k) out += (k ? "," : "") + Cell(header[k]).text();
  out += '\n';
  for (const auto& row : rows) {
    if (row.size() != header.size()) throw std::logic_error("table: row width differs from header");
    for (std::size_t k = 0; k < row.size(); ++k) {
      if (k) out += ',';
      out += row[k].text();
    }
    out += '\n';
  }
  return out;
}

ArtifactDir::ArtifactDir(std::filesystem::path dir) : dir_(std::move(dir)) {}

void ArtifactDir::write(const std::string& name, const std::string& bytes) {
  std::filesystem::create_directories(dir_);
  std::ofstream out(dir_ / name, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + (dir_ / name).string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("short write on " + (dir_ / name).string());
  checksums_[name] = hex64(fnv1a(bytes));
}

void ArtifactDir::write_json(const std::string& name, const nlohmann::json& j) {
  write(name, j.dump(2) + "\n");
}

nlohmann::json number_or_null(double v) {
  return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr);
}

std::string loglog_svg(const std::string& title, const std::vector<double>& x,
                       const std::vector<Series>& series) {
  constexpr double W = 560, H = 380, L = 70, R = 150, Top = 40, B = 50;
  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"};

  double xmin = INFINITY, xmax = -INFINITY, ymin = INFINITY, ymax = -INFINITY;
  for (double v : x) {
    if (v > 0) xmin = std::min(xmin, v), xmax = std::max(xmax, v);
  }
  for (const auto& s : series)
    for (double v : s.y)
      if (v > 0 && std::isfinite(v)) ymin = std::min(ymin, v), ymax = std::max(ymax, v);
  if (!std::isfinite(xmin)) xmin = 1, xmax = 10;
  if (!std::isfinite(ymin)) ymin = 1e-3, ymax = 1;
  const double lx0 = std::floor(std::log10(xmin) * 4) / 4, lx1 = std::ceil(std::log10(xmax) * 4) / 4 + 1e-9;
  const double ly0 = std::floor(std::log10(ymin)), ly1 = std::ceil(std::log10(ymax)) + 1e-9;
  auto px = [&](double v) { return L + (std::log10(v) - lx0) / std::max(lx1 - lx0, 1e-9) * (W - L - R); };
  auto py = [&](double v) { return H - B - (std::log10(v) - ly0) / std::max(ly1 - ly0, 1e-9) * (H - Top - B); };

  std::string s;
  char buf[256];
  auto put = [&](const char* fmt, auto... args) {
    std::snprintf(buf, sizeof buf, fmt, args...);
    s += buf;
  };
  put("<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"%g\" height=\"%g\" font-family=\"sans-serif\" font-size=\"12\">\n", W, H);
  put("<rect width=\"%g\" height=\"%g\" fill=\"white\"/>\n", W, H);
  s += "<text x=\"" + format_double(L) + "\" y=\"24\" font-size=\"14\">" + title + "</text>\n";
  put("<rect x=\"%g\" y=\"%g\" width=\"%g\" height=\"%g\" fill=\"none\" stroke=\"black\"/>\n", L, Top,
      W - L - R, H - Top - B);
  for (double e = std::ceil(ly0); e <= ly1; e += 1) {
    const double y = py(std::pow(10.0, e));
    put("<line x1=\"%g\" y1=\"%.2f\" x2=\"%g\" y2=\"%.2f\" stroke=\"#ddd\"/>\n", L, y, W - R, y);
    put("<text x=\"%g\" y=\"%.2f\" text-anchor=\"end\">1e%d</text>\n", L - 6, y + 4, static_cast<int>(e));
  }
  for (double v : x) {
    if (!(v > 0)) continue;
    const double xx = px(v);
    put("<line x1=\"%.2f\" y1=\"%g\" x2=\"%.2f\" y2=\"%g\" stroke=\"#ddd\"/>\n", xx, Top, xx, H - B);
    put("<text x=\"%.2f\" y=\"%g\" text-anchor=\"middle\">%g</text>\n", xx, H - B + 16, v);
  }
  put("<text x=\"%g\" y=\"%g\" text-anchor=\"middle\">N</text>\n", (L + W - R) / 2, H - 12);
  put("<text x=\"16\" y=\"%g\" transform=\"rotate(-90 16 %g)\" text-anchor=\"middle\">relative L2 error</text>\n",
      (Top + H - B) / 2, (Top + H - B) / 2);
  for (std::size_t k = 0; k < series.size(); ++k) {
    const char* color = colors[k % 5];
    std::string points;
    for (std::size_t i = 0; i < x.size() && i < series[k].y.size(); ++i) {
      const double v = series[k].y[i];
      if (!(v > 0) || !std::isfinite(v) || !(x[i] > 0)) continue;
      put("<circle cx=\"%.2f\" cy=\"%.2f\" r=\"3\" fill=\"%s\"/>\n", px(x[i]), py(v), color);
      std::snprintf(buf, sizeof buf, "%.2f,%.2f ", px(x[i]), py(v));
      points += buf;
    }
    if (!points.empty()) {
      s += "<polyline fill=\"none\" stroke=\"" + std::string(color) + "\" stroke-width=\"1.5\" points=\"" +
           points + "\"/>\n";
    }
    const double ly = Top + 16 + 18 * static_cast<double>(k);
    put("<line x1=\"%g\" y1=\"%g\" x2=\"%g\" y2=\"%g\" stroke=\"%s\" stroke-width=\"2\"/>\n", W - R + 12, ly,
        W - R + 32, ly, color);
    s += "<text x=\"" + format_double(W - R + 38) + "\" y=\"" + format_double(ly + 4) + "\">" +
         series[k].label + "</text>\n";
  }
  s += "</svg>\n";
  return s;
}

}  // namespace bsvie::app
