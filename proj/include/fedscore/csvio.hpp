#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace fedscore {

// Shortest decimal that round-trips to the same double ("0.1" stays "0.1").
std::string format_double(double v);

// RFC 4180 quoting, applied only when the cell needs it.
std::string csv_escape(const std::string& cell);

// Buffers a table and writes it with LF endings in one go.
class CsvWriter {
 public:
  explicit CsvWriter(std::vector<std::string> header);

  void row(const std::vector<std::string>& cells);

  const std::string& text() const { return buf_; }
  void save(const std::string& path) const;

 private:
  std::size_t width_;
  std::string buf_;
};

void write_text_file(const std::string& path, const std::string& content);

}  // namespace fedscore
