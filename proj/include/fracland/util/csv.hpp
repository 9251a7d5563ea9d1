#pragma once

#include <fstream>
#include <initializer_list>
#include <string>
#include <vector>

namespace fracland::util {

/// Shortest round-trip decimal form, '.' as separator.
[[nodiscard]] std::string format_number(double v);

/// Comma-separated file, LF line endings, one header row.
/// Metadata lines go first, each prefixed with '#'.
class CsvWriter {
 public:
  CsvWriter(const std::string& path, const std::vector<std::string>& columns,
            const std::vector<std::string>& metadata = {});
  void row(const std::vector<double>& values);
  void row(const std::vector<std::string>& cells);

 private:
  std::ofstream out_;
  std::size_t width_;
};

}  // namespace fracland::util
