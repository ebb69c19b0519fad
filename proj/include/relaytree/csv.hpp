#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <initializer_list>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

namespace relaytree::csv {

/// 17 significant digits, '.' decimal separator regardless of locale.
inline std::string number(long double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17Lg", v);
  return buf;
}

inline std::string number(double v) { return number(static_cast<long double>(v)); }

class Cell {
 public:
  Cell(long double v) : text_(number(v)) {}
  Cell(double v) : text_(number(v)) {}
  Cell(bool v) : text_(v ? "1" : "0") {}
  Cell(std::string_view s) : text_(s) {}
  Cell(const char* s) : text_(s) {}
  Cell(const std::string& s) : text_(s) {}
  template <typename Int>
    requires(std::is_integral_v<Int> && !std::is_same_v<Int, bool>)
  Cell(Int v) : text_(std::to_string(v)) {}

  const std::string& text() const { return text_; }

 private:
  std::string text_;
};

/// Accumulates a header row plus data rows; every row ends with '\n'.
class Table {
 public:
  explicit Table(std::initializer_list<std::string_view> columns) {
    for (auto c : columns) columns_.emplace_back(c);
  }

  Table& row(std::initializer_list<Cell> cells) {
    std::string line;
    bool first = true;
    for (const auto& c : cells) {
      if (!first) line += ',';
      line += c.text();
      first = false;
    }
    rows_.push_back(std::move(line));
    return *this;
  }

  std::size_t width() const { return columns_.size(); }

  std::string str() const {
    std::string out;
    for (std::size_t i = 0; i < columns_.size(); ++i) out += (i ? "," : "") + columns_[i];
    out += '\n';
    for (const auto& r : rows_) out += r + '\n';
    return out;
  }

 private:
  std::vector<std::string> columns_;
  std::vector<std::string> rows_;
};

/// Flat key=value record, one pair per line.
class Record {
 public:
  Record& add(std::string_view key, const Cell& value) {
    out_ += std::string(key) + "=" + value.text() + "\n";
    return *this;
  }
  const std::string& str() const { return out_; }

 private:
  std::string out_;
};

}  // namespace relaytree::csv
