#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace xalign {

// Flat key=value run configuration with section prefixes
// (e.g. `align.shared_dim=64`). '#' starts a comment. CLI flags overlay
// file values; lookups fall back to built-in defaults.
class RunConfig {
 public:
  static RunConfig load(const std::filesystem::path& path);

  void set(const std::string& key, const std::string& value) { values_[key] = value; }
  bool has(const std::string& key) const { return values_.count(key) != 0; }
  std::optional<std::string> get(const std::string& key) const;

  std::string get_string(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  size_t get_size(const std::string& key, size_t fallback) const;
  uint64_t get_u64(const std::string& key, uint64_t fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  std::vector<double> get_double_list(const std::string& key,
                                      const std::vector<double>& fallback) const;
  std::vector<size_t> get_size_list(const std::string& key,
                                    const std::vector<size_t>& fallback) const;

  const std::map<std::string, std::string>& entries() const { return values_; }

  // Canonical "key=value\n" serialization in sorted key order.
  std::string canonical() const;
  std::string hash() const;  // fnv1a64 hex of canonical()

 private:
  std::map<std::string, std::string> values_;
};

uint64_t fnv1a64(std::string_view bytes);
std::string fnv1a64_hex(std::string_view bytes);
std::string file_digest(const std::filesystem::path& path);

// Appends one run entry (command, seed, config hash, timestamp, input and
// output digests) to <out_dir>/manifest.json.
void update_manifest(const std::filesystem::path& out_dir, const std::string& command,
                     uint64_t seed, const std::string& config_hash,
                     const std::vector<std::filesystem::path>& inputs,
                     const std::vector<std::filesystem::path>& outputs);

}  // namespace xalign
