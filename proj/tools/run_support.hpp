#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

namespace gisad::cli {

using Json = nlohmann::ordered_json;

inline constexpr const char* kToolName = "gisad";
inline constexpr const char* kToolVersion = GISAD_VERSION;

std::string sha256_file(const std::filesystem::path& path);

/// Opens a file for reading or throws InputError naming it.
std::ifstream open_input(const std::filesystem::path& path);

/// Output files are written next to their destination under a temporary
/// name and only renamed into place by commit(). Anything not committed is
/// deleted when the set is destroyed.
class OutputSet {
 public:
  OutputSet() = default;
  OutputSet(const OutputSet&) = delete;
  OutputSet& operator=(const OutputSet&) = delete;
  ~OutputSet();

  std::ofstream& open(const std::filesystem::path& final_path);
  /// Flushes and closes every stream, then checksums the temporary files.
  Json checksums();
  void commit();

 private:
  struct Entry {
    std::filesystem::path final_path;
    std::filesystem::path temp_path;
    std::ofstream stream;
  };
  std::vector<std::unique_ptr<Entry>> entries_;
  bool committed_ = false;
};

Json manifest_header(const std::string& command);
Json input_record(const std::filesystem::path& path);

/// Plain `key = value` lines; '#' starts a comment. Throws ConfigError on
/// malformed lines or repeated keys.
std::map<std::string, std::string> read_key_value_file(const std::filesystem::path& path);

}  // namespace gisad::cli
