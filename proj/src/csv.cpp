#include "geoworld/csv.hpp"

#include <algorithm>
#include <sstream>

#include "geoworld/keyvalue.hpp"

namespace geoworld::csv {
namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

}  // namespace

std::string provenance_line(const std::string& digest) {
  return std::string("# geoworld ") + GEOWORLD_VERSION + " config=" + digest;
}

Writer::Writer(const std::filesystem::path& path, const std::string& digest, const std::vector<std::string>& columns,
               bool append)
    : width_(columns.size()) {
  const bool fresh = !append || !std::filesystem::exists(path) || std::filesystem::file_size(path) == 0;
  out_.open(path, std::ios::binary | (append ? std::ios::app : std::ios::trunc));
  if (!out_) throw std::runtime_error("cannot write " + path.string());
  if (fresh) {
    out_ << provenance_line(digest) << '\n';
    row(columns);
  }
}

void Writer::row(const std::vector<std::string>& cells) {
  if (cells.size() != width_) throw std::invalid_argument("csv row has wrong number of cells");
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i) out_ << ',';
    out_ << cells[i];
  }
  out_ << '\n';
  out_.flush();
}

std::size_t Table::column(const std::string& name) const {
  const auto it = std::find(columns.begin(), columns.end(), name);
  if (it == columns.end()) throw MissingColumn("missing required column: " + name);
  return static_cast<std::size_t>(it - columns.begin());
}

bool Table::has_column(const std::string& name) const {
  return std::find(columns.begin(), columns.end(), name) != columns.end();
}

double Table::number(std::size_t row, const std::string& name) const {
  return parse_double(rows.at(row).at(column(name)), name);
}

const std::string& Table::text(std::size_t row, const std::string& name) const {
  return rows.at(row).at(column(name));
}

void Table::require_columns(const std::vector<std::string>& names, const std::string& context) const {
  std::string missing;
  for (const auto& n : names) {
    if (!has_column(n)) missing += (missing.empty() ? "" : ", ") + n;
  }
  if (!missing.empty()) throw MissingColumn(context + ": missing required column(s): " + missing);
}

Table read(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  Table t;
  std::string line;
  bool have_header = false;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line.front() == '#') {
      t.comments.push_back(line);
      continue;
    }
    auto cells = split_line(line);
    if (!have_header) {
      t.columns = std::move(cells);
      have_header = true;
    } else {
      if (cells.size() != t.columns.size()) {
        throw std::runtime_error(path.string() + ": row has " + std::to_string(cells.size()) + " cells, expected " +
                                 std::to_string(t.columns.size()));
      }
      t.rows.push_back(std::move(cells));
    }
  }
  return t;
}

}  // namespace geoworld::csv
