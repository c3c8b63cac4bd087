#include "phaselab/csv.hpp"

#include "phaselab/error.hpp"

#include <charconv>

namespace phaselab {

std::string format_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

CsvWriter::CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header)
    : out_(path, std::ios::binary | std::ios::trunc), path_(path), columns_(header.size()) {
  if (!out_) throw IoError("cannot write " + path.string());
  for (const auto& h : header) *this << h;
  end_row();
}

void CsvWriter::put(const std::string& raw) {
  if (filled_ > 0) out_ << ',';
  out_ << raw;
  ++filled_;
}

CsvWriter& CsvWriter::operator<<(const std::string& field) {
  if (field.find_first_of(",\"\r\n") == std::string::npos) {
    put(field);
    return *this;
  }
  std::string quoted = "\"";
  for (char c : field) {
    if (c == '"') quoted += '"';
    quoted += c;
  }
  put(quoted + '"');
  return *this;
}

CsvWriter& CsvWriter::operator<<(double value) {
  put(format_double(value));
  return *this;
}

CsvWriter& CsvWriter::operator<<(long long value) {
  put(std::to_string(value));
  return *this;
}

void CsvWriter::end_row() {
  if (filled_ != columns_)
    throw std::logic_error(path_.string() + ": row has " + std::to_string(filled_) + " fields, header has " +
                           std::to_string(columns_));
  out_ << "\r\n";
  filled_ = 0;
  if (!out_) throw IoError("write failed: " + path_.string());
}

}  // namespace phaselab
