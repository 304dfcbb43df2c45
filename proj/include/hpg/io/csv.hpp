#pragma once

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <system_error>
#include <vector>

#include "hpg/optimizers.hpp"

namespace hpg::io {

// Shortest decimal string that parses back to the same double.
inline std::string format_double(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc()) return "nan";
  return std::string(buf, end);
}

template <class T>
std::string format_field(const T& v) {
  if constexpr (std::is_floating_point_v<T>) {
    return format_double(static_cast<double>(v));
  } else if constexpr (std::is_integral_v<T>) {
    return std::to_string(v);
  } else {
    return std::string(v);
  }
}

template <class T>
std::string format_field(const std::optional<T>& v) {
  return v ? format_field(*v) : std::string();
}

class CsvTable {
 public:
  explicit CsvTable(std::vector<std::string> header) : header_(std::move(header)) {}

  template <class... Fields>
  void row(const Fields&... fields) {
    std::vector<std::string> cells{format_field(fields)...};
    push(std::move(cells));
  }

  void push(std::vector<std::string> cells) {
    require(cells.size() == header_.size(), "CsvTable: row has wrong number of fields");
    rows_.push_back(std::move(cells));
  }

  std::string str() const {
    std::ostringstream os;
    write_line(os, header_);
    for (const auto& r : rows_) write_line(os, r);
    return os.str();
  }

  std::size_t size() const { return rows_.size(); }

 private:
  static void write_line(std::ostream& os, const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) os << ',';
      os << cells[i];
    }
    os << '\n';
  }

  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
};

// Writes to a temporary sibling, then renames over the target.
inline void write_file_atomic(const std::filesystem::path& path, const std::string& contents) {
  std::filesystem::create_directories(path.parent_path().empty() ? "." : path.parent_path());
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << contents;
    if (!out) throw std::runtime_error("write failed: " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

// t, h_t, grad_norm_est, grad_norm_exact, J_exact, reward_mean
inline CsvTable runlog_table(const RunLog& log) {
  CsvTable table({"t", "h_t", "grad_norm_est", "grad_norm_exact", "J_exact", "reward_mean"});
  for (const auto& r : log.records) {
    table.row(r.t, r.h, r.grad_norm_est, r.grad_norm_exact, r.j_exact, r.reward_mean);
  }
  return table;
}

}  // namespace hpg::io
