#include "fracland/util/csv.hpp"

#include <fmt/format.h>

#include "fracland/errors.hpp"

namespace fracland::util {

std::string format_number(double v) { return fmt::format("{}", v); }

CsvWriter::CsvWriter(const std::string& path, const std::vector<std::string>& columns,
                     const std::vector<std::string>& metadata)
    : out_(path, std::ios::binary), width_(columns.size()) {
  if (!out_) throw Error("cannot open '" + path + "' for writing");
  for (const auto& m : metadata) out_ << '#' << m << '\n';
  for (std::size_t i = 0; i < columns.size(); ++i) out_ << (i ? "," : "") << columns[i];
  out_ << '\n';
}

void CsvWriter::row(const std::vector<double>& values) {
  if (values.size() != width_) throw Error("csv: row width does not match header");
  for (std::size_t i = 0; i < values.size(); ++i) out_ << (i ? "," : "") << format_number(values[i]);
  out_ << '\n';
}

void CsvWriter::row(const std::vector<std::string>& cells) {
  if (cells.size() != width_) throw Error("csv: row width does not match header");
  for (std::size_t i = 0; i < cells.size(); ++i) out_ << (i ? "," : "") << cells[i];
  out_ << '\n';
}

}  // namespace fracland::util
