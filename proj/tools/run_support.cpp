#include "run_support.hpp"

#include <openssl/evp.h>

#include <array>
#include <memory>

#include "gisad/errors.hpp"

namespace gisad::cli {

namespace fs = std::filesystem;

std::string sha256_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot read " + path.string());
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("sha256: digest setup failed");
  }
  std::array<char, 1 << 16> buf;
  while (in) {
    in.read(buf.data(), buf.size());
    if (in.gcount() > 0) EVP_DigestUpdate(ctx.get(), buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  std::array<unsigned char, EVP_MAX_MD_SIZE> digest;
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx.get(), digest.data(), &len);
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[digest[i] >> 4];
    out += hex[digest[i] & 15];
  }
  return out;
}

std::ifstream open_input(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open input file '" + path.string() + "'");
  return in;
}

OutputSet::~OutputSet() {
  if (committed_) return;
  for (auto& e : entries_) {
    if (e->stream.is_open()) e->stream.close();
    std::error_code ec;
    fs::remove(e->temp_path, ec);
  }
}

std::ofstream& OutputSet::open(const fs::path& final_path) {
  auto e = std::make_unique<Entry>();
  e->final_path = final_path;
  e->temp_path = final_path;
  e->temp_path += ".partial";
  e->stream.open(e->temp_path, std::ios::binary | std::ios::trunc);
  if (!e->stream) throw InputError("cannot write output file '" + final_path.string() + "'");
  entries_.push_back(std::move(e));
  return entries_.back()->stream;
}

Json OutputSet::checksums() {
  Json out = Json::object();
  for (auto& e : entries_) {
    if (e->stream.is_open()) {
      e->stream.close();
      if (!e->stream) throw InputError("failed writing '" + e->final_path.string() + "'");
    }
    out[e->final_path.string()] = sha256_file(e->temp_path);
  }
  return out;
}

void OutputSet::commit() {
  for (auto& e : entries_) {
    if (e->stream.is_open()) {
      e->stream.close();
      if (!e->stream) throw InputError("failed writing '" + e->final_path.string() + "'");
    }
  }
  for (auto& e : entries_) fs::rename(e->temp_path, e->final_path);
  committed_ = true;
}

Json manifest_header(const std::string& command) {
  Json j;
  j["tool"] = kToolName;
  j["version"] = kToolVersion;
  j["command"] = command;
  return j;
}

Json input_record(const fs::path& path) {
  Json j;
  j["path"] = path.string();
  j["sha256"] = sha256_file(path);
  return j;
}

std::map<std::string, std::string> read_key_value_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path.string() + "'");
  auto trim = [](std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return std::string();
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
  };
  std::map<std::string, std::string> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    const std::string where = path.string() + ":" + std::to_string(line_no);
    if (eq == std::string::npos) throw ConfigError(where + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError(where + ": empty key");
    if (!out.emplace(key, value).second) throw ConfigError(where + ": repeated key '" + key + "'");
  }
  return out;
}

}  // namespace gisad::cli
