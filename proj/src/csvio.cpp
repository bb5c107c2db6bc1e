#include "fedscore/csvio.hpp"

#include <array>
#include <charconv>
#include <fstream>
#include <stdexcept>

namespace fedscore {

std::string format_double(double v) {
  std::array<char, 64> buf;
  auto [p, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  if (ec != std::errc{}) {
    throw std::runtime_error("format_double: conversion failed");
  }
  return std::string(buf.data(), p);
}

std::string csv_escape(const std::string& cell) {
  if (cell.find_first_of(",\"\n\r") == std::string::npos) {
    return cell;
  }
  std::string out = "\"";
  for (char c : cell) {
    if (c == '"') {
      out += '"';
    }
    out += c;
  }
  out += '"';
  return out;
}

CsvWriter::CsvWriter(std::vector<std::string> header) : width_(header.size()) {
  if (header.empty()) {
    throw std::invalid_argument("csv: empty header");
  }
  row(header);
}

void CsvWriter::row(const std::vector<std::string>& cells) {
  if (cells.size() != width_) {
    throw std::invalid_argument("csv: row width does not match header");
  }
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i > 0) {
      buf_ += ',';
    }
    buf_ += csv_escape(cells[i]);
  }
  buf_ += '\n';
}

void CsvWriter::save(const std::string& path) const { write_text_file(path, buf_); }

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw std::runtime_error("cannot open '" + path + "' for writing");
  }
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) {
    throw std::runtime_error("failed writing '" + path + "'");
  }
}

}  // namespace fedscore
