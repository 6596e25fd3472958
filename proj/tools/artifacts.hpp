#pragma once

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace bsvie::app {

/// A CSV cell: numbers are printed with %.17g, text is quoted per RFC 4180
/// when it contains a comma, quote or line break.
class Cell {
 public:
  Cell(double v);  // NOLINT
  Cell(long long v);  // NOLINT
  Cell(int v) : Cell(static_cast<long long>(v)) {}  // NOLINT
  Cell(long v) : Cell(static_cast<long long>(v)) {}  // NOLINT
  Cell(std::string v);  // NOLINT
  Cell(const char* v) : Cell(std::string(v)) {}  // NOLINT
  static Cell empty() { return Cell(std::string()); }

  const std::string& text() const noexcept { return text_; }

 private:
  std::string text_;
};

std::string format_double(double v);

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<Cell>> rows;

  void add(std::vector<Cell> row) { rows.push_back(std::move(row)); }
  std::string csv() const;
};

/// Writes files into one output directory and remembers their checksums.
/// The directory is created on the first write.
class ArtifactDir {
 public:
  explicit ArtifactDir(std::filesystem::path dir);

  const std::filesystem::path& path() const noexcept { return dir_; }
  void write(const std::string& name, const std::string& bytes);
  void write_table(const std::string& name, const Table& table) { write(name, table.csv()); }
  void write_json(const std::string& name, const nlohmann::json& j);

  const std::map<std::string, std::string>& checksums() const noexcept { return checksums_; }

 private:
  std::filesystem::path dir_;
  std::map<std::string, std::string> checksums_;
};

/// Log-log error-vs-N line chart; series with non-positive values are drawn
/// only where positive.
struct Series {
  std::string label;
  std::vector<double> y;
};
std::string loglog_svg(const std::string& title, const std::vector<double>& x,
                       const std::vector<Series>& series);

/// JSON number, or null when not finite.
nlohmann::json number_or_null(double v);

}  // namespace bsvie::app
