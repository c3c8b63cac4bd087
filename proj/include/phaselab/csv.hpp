#pragma once

// Minimal RFC-4180 style CSV writer: header row first, fields quoted only when needed.

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

namespace phaselab {

class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header);

  CsvWriter& operator<<(const std::string& field);
  CsvWriter& operator<<(const char* field) { return *this << std::string(field); }
  CsvWriter& operator<<(double value);
  CsvWriter& operator<<(long long value);
  CsvWriter& operator<<(int value) { return *this << static_cast<long long>(value); }
  CsvWriter& operator<<(std::size_t value) { return *this << static_cast<long long>(value); }
  /// Terminates the current row; throws if the field count does not match the header.
  void end_row();

 private:
  void put(const std::string& raw);

  std::ofstream out_;
  std::filesystem::path path_;
  std::size_t columns_;
  std::size_t filled_ = 0;
};

/// Shortest round-trippable decimal form of a double.
std::string format_double(double v);

}  // namespace phaselab
