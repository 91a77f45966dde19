#include "csbp/io.hpp"

#include <charconv>
#include <cmath>
#include <cstdint>
#include <ostream>

#include "csbp/errors.hpp"

namespace csbp {

std::string fnv1a_hex(std::string_view data) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i, h >>= 4) out[static_cast<std::size_t>(i)] = kHex[h & 0xf];
  return out;
}

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

CsvWriter::CsvWriter(std::ostream& os, std::initializer_list<std::string_view> header)
    : os_(os), columns_(header.size()) {
  for (auto h : header) *this << h;
  end_row();
}

CsvWriter::CsvWriter(std::ostream& os, const std::vector<std::string>& header)
    : os_(os), columns_(header.size()) {
  for (const auto& h : header) *this << std::string_view(h);
  end_row();
}

void CsvWriter::sep() {
  if (col_ >= columns_) throw Error("CsvWriter: too many fields in row");
  if (col_++ > 0) os_ << ',';
}

CsvWriter& CsvWriter::operator<<(double v) {
  sep();
  os_ << format_double(v);
  return *this;
}

CsvWriter& CsvWriter::operator<<(long long v) {
  sep();
  os_ << v;
  return *this;
}

CsvWriter& CsvWriter::operator<<(std::string_view v) {
  sep();
  os_ << v;
  return *this;
}

void CsvWriter::end_row() {
  if (col_ != columns_) throw Error("CsvWriter: short row");
  os_ << '\n';
  col_ = 0;
}

}  // namespace csbp
