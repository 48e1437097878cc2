#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace twinreg {

/// CSV ingestion failure. `row` is the 1-based line number in the file
/// (the header is line 1); `column` is 1-based. Zero means "not applicable".
class CsvError : public std::runtime_error {
 public:
  enum class Kind { missing_file, empty_file, missing_target, non_numeric, ragged_row };

  CsvError(Kind kind, std::string message, std::size_t row = 0, std::size_t column = 0);

  Kind kind() const noexcept { return kind_; }
  std::size_t row() const noexcept { return row_; }
  std::size_t column() const noexcept { return column_; }

  static const char* kind_name(Kind k) noexcept;

 private:
  Kind kind_;
  std::size_t row_;
  std::size_t column_;
};

}  // namespace twinreg
