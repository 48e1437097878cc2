#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string_view>

#include "twinreg/data.hpp"
#include "twinreg/errors.hpp"

namespace twinreg {

CsvError::CsvError(Kind kind, std::string message, std::size_t row, std::size_t column)
    : std::runtime_error(std::move(message)), kind_(kind), row_(row), column_(column) {}

const char* CsvError::kind_name(Kind k) noexcept {
  switch (k) {
    case Kind::missing_file: return "missing_file";
    case Kind::empty_file: return "empty_file";
    case Kind::missing_target: return "missing_target";
    case Kind::non_numeric: return "non_numeric";
    case Kind::ragged_row: return "ragged_row";
  }
  return "unknown";
}

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::string_view unquote(std::string_view s) {
  if (s.size() >= 2 && s.front() == '"' && s.back() == '"') {
    s.remove_prefix(1);
    s.remove_suffix(1);
  }
  return s;
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const auto comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      out.push_back(trim(line.substr(start)));
      break;
    }
    out.push_back(trim(line.substr(start, comma - start)));
    start = comma + 1;
  }
  return out;
}

bool parse_double(std::string_view s, double& out) {
  s = unquote(s);
  if (s.empty()) return false;
  if (s.front() == '+') s.remove_prefix(1);
  const auto* end = s.data() + s.size();
  const auto [ptr, ec] = std::from_chars(s.data(), end, out);
  return ec == std::errc{} && ptr == end && std::isfinite(out);
}

}  // namespace

Dataset parse_csv(std::string_view text, const ColumnRef& target_column, std::string name) {
  // Strip a UTF-8 byte-order mark.
  if (text.size() >= 3 && text.substr(0, 3) == "\xEF\xBB\xBF") text.remove_prefix(3);

  std::vector<std::string_view> lines;
  {
    std::size_t start = 0;
    while (start <= text.size()) {
      auto nl = text.find('\n', start);
      if (nl == std::string_view::npos) nl = text.size();
      lines.push_back(text.substr(start, nl - start));
      start = nl + 1;
    }
  }
  while (!lines.empty() && trim(lines.back()).empty()) lines.pop_back();
  if (lines.empty()) throw CsvError(CsvError::Kind::empty_file, "csv: no header row");

  const auto header = split_fields(lines.front());
  const std::size_t width = header.size();

  std::size_t target = width;
  if (const auto* col_name = std::get_if<std::string>(&target_column)) {
    for (std::size_t c = 0; c < width; ++c) {
      if (unquote(header[c]) == *col_name) {
        target = c;
        break;
      }
    }
    if (target == width) {
      throw CsvError(CsvError::Kind::missing_target,
                     "csv: target column '" + *col_name + "' not found in header", 1, 0);
    }
  } else {
    const Index idx = std::get<Index>(target_column);
    const Index resolved = idx < 0 ? static_cast<Index>(width) + idx : idx;
    if (resolved < 0 || resolved >= static_cast<Index>(width)) {
      throw CsvError(CsvError::Kind::missing_target,
                     "csv: target column index " + std::to_string(idx) + " out of range", 1, 0);
    }
    target = static_cast<std::size_t>(resolved);
  }

  std::vector<std::string> names;
  for (std::size_t c = 0; c < width; ++c) {
    if (c != target) names.emplace_back(unquote(header[c]));
  }

  std::vector<double> values;
  std::vector<double> ys;
  std::size_t n = 0;
  for (std::size_t li = 1; li < lines.size(); ++li) {
    const std::size_t line_no = li + 1;
    if (trim(lines[li]).empty()) continue;
    const auto fields = split_fields(lines[li]);
    if (fields.size() != width) {
      throw CsvError(CsvError::Kind::ragged_row,
                     "csv: line " + std::to_string(line_no) + " has " +
                         std::to_string(fields.size()) + " fields, header has " +
                         std::to_string(width),
                     line_no, 0);
    }
    for (std::size_t c = 0; c < width; ++c) {
      double v = 0.0;
      if (!parse_double(fields[c], v)) {
        std::ostringstream msg;
        msg << "csv: line " << line_no << ", column " << (c + 1) << " ('"
            << unquote(header[c]) << "'): ";
        if (fields[c].empty()) {
          msg << "blank cell";
        } else {
          msg << "non-numeric value '" << fields[c] << "'";
        }
        throw CsvError(CsvError::Kind::non_numeric, msg.str(), line_no, c + 1);
      }
      if (c == target) {
        ys.push_back(v);
      } else {
        values.push_back(v);
      }
    }
    ++n;
  }

  const Index f = static_cast<Index>(width - 1);
  Matrix x(static_cast<Index>(n), f);
  for (std::size_t r = 0; r < n; ++r) {
    for (Index c = 0; c < f; ++c) {
      x(static_cast<Index>(r), c) = values[r * static_cast<std::size_t>(f) + static_cast<std::size_t>(c)];
    }
  }
  Vector y = Eigen::Map<Vector>(ys.data(), static_cast<Index>(ys.size()));
  return Dataset(std::move(x), std::move(y), std::move(name), std::move(names));
}

Dataset load_csv(const std::filesystem::path& path, const ColumnRef& target_column) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw CsvError(CsvError::Kind::missing_file, "csv: cannot open '" + path.string() + "'");
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_csv(buf.str(), target_column, path.stem().string());
}

void save_csv(const Dataset& d, const std::filesystem::path& path, const std::string& target_name) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  for (Index c = 0; c < d.feature_count(); ++c) {
    if (static_cast<std::size_t>(c) < d.feature_names.size()) {
      out << d.feature_names[static_cast<std::size_t>(c)];
    } else {
      out << "x" << (c + 1);
    }
    out << ',';
  }
  out << target_name << '\n';
  out << std::setprecision(17);
  for (Index r = 0; r < d.rows(); ++r) {
    for (Index c = 0; c < d.feature_count(); ++c) out << d.features(r, c) << ',';
    out << d.targets[r] << '\n';
  }
}

}  // namespace twinreg
