#pragma once

#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace geoworld::csv {

class MissingColumn : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// "# geoworld <version> config=<digest>"
std::string provenance_line(const std::string& digest);

/// Comma separated, LF line endings, leading provenance comment and header row.
class Writer {
 public:
  Writer(const std::filesystem::path& path, const std::string& digest, const std::vector<std::string>& columns,
         bool append = false);

  void row(const std::vector<std::string>& cells);

 private:
  std::ofstream out_;
  std::size_t width_;
};

struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> comments;

  /// Index of `name`; throws MissingColumn naming it.
  std::size_t column(const std::string& name) const;
  bool has_column(const std::string& name) const;
  double number(std::size_t row, const std::string& name) const;
  const std::string& text(std::size_t row, const std::string& name) const;
  void require_columns(const std::vector<std::string>& names, const std::string& context) const;
};

Table read(const std::filesystem::path& path);

}  // namespace geoworld::csv
