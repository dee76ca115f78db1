#pragma once

// Atomic file writes, SHA-256 content hashes and the JSON run manifest.

#include <nlohmann/json.hpp>
#include <openssl/evp.h>

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <unistd.h>

namespace rydberg::io {

namespace fs = std::filesystem;

class OutputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline std::string sha256_hex(const std::string& bytes) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1)
    throw OutputError("SHA-256 computation failed");
  std::ostringstream o;
  for (unsigned int i = 0; i < len; ++i) o << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(md[i]);
  return o.str();
}

inline std::string read_file(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  if (!f) throw OutputError("cannot open " + p.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

/// Writes to a sibling temp file, then renames over `path`.
inline void write_atomic(const fs::path& path, const std::string& bytes) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  static std::atomic<unsigned> counter{0};
  const fs::path tmp = path.string() + ".tmp." + std::to_string(::getpid()) + "." + std::to_string(counter++);
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw OutputError("cannot write " + tmp.string());
    f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    f.flush();
    if (!f) {
      std::error_code ec;
      fs::remove(tmp, ec);
      throw OutputError("write failed for " + tmp.string());
    }
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw OutputError("cannot rename onto " + path.string());
  }
}

/// Files written during one run, relative to its output directory. Thread-safe.
class OutputSet {
 public:
  explicit OutputSet(fs::path root) : root_(std::move(root)) {}

  const fs::path& root() const { return root_; }

  void write(const std::string& relative, const std::string& bytes) {
    write_atomic(root_ / relative, bytes);
    std::lock_guard lock(mu_);
    entries_.push_back({relative, sha256_hex(bytes), bytes.size()});
  }

  struct Entry {
    std::string path;
    std::string sha256;
    std::size_t bytes;
  };

  std::vector<Entry> entries() const {
    std::lock_guard lock(mu_);
    auto e = entries_;
    std::sort(e.begin(), e.end(), [](const Entry& a, const Entry& b) { return a.path < b.path; });
    return e;
  }

  /// Removes everything written so far (hard-error cleanup).
  void remove_all() {
    std::lock_guard lock(mu_);
    for (const auto& e : entries_) {
      std::error_code ec;
      fs::remove(root_ / e.path, ec);
    }
    entries_.clear();
  }

 private:
  fs::path root_;
  mutable std::mutex mu_;
  std::vector<Entry> entries_;
};

inline std::string utc_timestamp(std::chrono::system_clock::time_point t = std::chrono::system_clock::now()) {
  const std::time_t tt = std::chrono::system_clock::to_time_t(t);
  std::tm tm{};
  gmtime_r(&tt, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

inline nlohmann::json files_json(const std::vector<OutputSet::Entry>& entries) {
  auto arr = nlohmann::json::array();
  for (const auto& e : entries) arr.push_back({{"path", e.path}, {"sha256", e.sha256}, {"bytes", e.bytes}});
  return arr;
}

/// Re-reads every file listed in a manifest and compares hashes. Returns the
/// mismatching or missing paths.
inline std::vector<std::string> verify_manifest(const fs::path& manifest_path) {
  const auto m = nlohmann::json::parse(read_file(manifest_path));
  const fs::path root = manifest_path.parent_path();
  std::vector<std::string> bad;
  for (const auto& f : m.at("files")) {
    const auto rel = f.at("path").get<std::string>();
    std::error_code ec;
    if (!fs::exists(root / rel, ec) || sha256_hex(read_file(root / rel)) != f.at("sha256").get<std::string>())
      bad.push_back(rel);
  }
  return bad;
}

}  // namespace rydberg::io
