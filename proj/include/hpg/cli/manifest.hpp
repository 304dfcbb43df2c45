#pragma once

#include <boost/crc.hpp>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iterator>
#include <sstream>
#include <string>
#include <vector>

#include "hpg/io/csv.hpp"
#include "hpg/version.hpp"
#include "json.hpp"

namespace hpg::cli {

inline std::string crc32_hex(const std::string& bytes) {
  boost::crc_32_type crc;
  crc.process_bytes(bytes.data(), bytes.size());
  std::ostringstream os;
  os << std::hex << std::setw(8) << std::setfill('0') << crc.checksum();
  return os.str();
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

// Collects emitted files; each is written atomically as soon as it is produced
// so that a later failure leaves earlier outputs in place.
class ArtifactWriter {
 public:
  explicit ArtifactWriter(std::filesystem::path dir) : dir_(std::move(dir)) {}

  void write(const std::string& name, const std::string& contents) {
    io::write_file_atomic(dir_ / name, contents);
    files_.push_back({{"name", name}, {"bytes", contents.size()}, {"crc32", crc32_hex(contents)}});
  }

  void write_csv(const std::string& name, const io::CsvTable& table) { write(name, table.str()); }

  // config echo + seed + version + per-file checksums + status
  void finish(const nlohmann::json& config_echo, std::uint64_t seed, const std::string& status, bool diverged,
              const std::string& message) {
    nlohmann::json m = {{"version", kVersion}, {"seed", seed},         {"config", config_echo},
                        {"files", files_},     {"status", status},     {"diverged", diverged},
                        {"message", message}};
    io::write_file_atomic(dir_ / "manifest.json", m.dump(2) + "\n");
  }

  const std::filesystem::path& dir() const { return dir_; }

 private:
  std::filesystem::path dir_;
  nlohmann::json files_ = nlohmann::json::array();
};

}  // namespace hpg::cli
