#pragma once

#include <cstddef>
#include <iosfwd>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace voyagecast::csv {

/// Splits one CSV line. Double-quoted fields may contain commas and "" escapes.
std::vector<std::string> split_line(std::string_view line);

/// Quotes a field if it contains a comma, quote or newline.
std::string escape(std::string_view field);

/// Header-indexed CSV reader over a whole stream.
class Table {
 public:
  static Table read(std::istream& in);
  static Table read_file(const std::string& path);

  const std::vector<std::string>& header() const { return header_; }
  std::size_t rows() const { return rows_.size(); }
  const std::vector<std::string>& row(std::size_t i) const { return rows_[i]; }

  bool has_column(std::string_view name) const;
  /// Column index; throws ValidationError naming the column when absent.
  std::size_t column(std::string_view name) const;

  const std::string& at(std::size_t row, std::string_view col) const;

  std::string source;  ///< file name for diagnostics

 private:
  std::vector<std::string> header_;
  std::unordered_map<std::string, std::size_t> index_;
  std::vector<std::vector<std::string>> rows_;
};

double to_double(std::string_view text, std::string_view what);
long long to_int(std::string_view text, std::string_view what);

/// Shortest decimal that round-trips the double exactly.
std::string format_double(double v);

void write_row(std::ostream& out, const std::vector<std::string>& fields);

}  // namespace voyagecast::csv
