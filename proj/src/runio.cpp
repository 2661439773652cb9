#include "xalign/runio.hpp"

#include <charconv>
#include <chrono>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "xalign/checkpoint.hpp"
#include "xalign/csv.hpp"
#include "xalign/errors.hpp"

namespace xalign {

namespace {

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t");
  return s.substr(begin, end - begin + 1);
}

std::vector<std::string> split_list(const std::string& value) {
  std::vector<std::string> parts;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) parts.push_back(trim(item));
  return parts;
}

}  // namespace

RunConfig RunConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open config " + path.string());
  RunConfig config;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    const std::string trimmed = trim(line);
    if (trimmed.empty()) continue;
    const auto eq = trimmed.find('=');
    if (eq == std::string::npos)
      throw format_error(path.string() + ":" + std::to_string(line_no) +
                         ": expected key=value");
    const std::string key = trim(trimmed.substr(0, eq));
    if (key.empty())
      throw format_error(path.string() + ":" + std::to_string(line_no) + ": empty key");
    config.values_[key] = trim(trimmed.substr(eq + 1));
  }
  return config;
}

std::optional<std::string> RunConfig::get(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return std::nullopt;
  return it->second;
}

std::string RunConfig::get_string(const std::string& key, const std::string& fallback) const {
  return get(key).value_or(fallback);
}

double RunConfig::get_double(const std::string& key, double fallback) const {
  const auto v = get(key);
  if (!v) return fallback;
  return parse_double_field(*v, "config key " + key, 0);
}

size_t RunConfig::get_size(const std::string& key, size_t fallback) const {
  const auto v = get(key);
  if (!v) return fallback;
  const long long parsed = parse_int_field(*v, "config key " + key, 0);
  if (parsed < 0) throw config_error("config key " + key + " must be non-negative");
  return static_cast<size_t>(parsed);
}

uint64_t RunConfig::get_u64(const std::string& key, uint64_t fallback) const {
  const auto v = get(key);
  if (!v) return fallback;
  uint64_t out = 0;
  const auto [ptr, ec] = std::from_chars(v->data(), v->data() + v->size(), out);
  if (ec != std::errc{} || ptr != v->data() + v->size())
    throw config_error("config key " + key + ": not an unsigned integer: '" + *v + "'");
  return out;
}

bool RunConfig::get_bool(const std::string& key, bool fallback) const {
  const auto v = get(key);
  if (!v) return fallback;
  if (*v == "true" || *v == "1") return true;
  if (*v == "false" || *v == "0") return false;
  throw config_error("config key " + key + ": expected true/false");
}

std::vector<double> RunConfig::get_double_list(const std::string& key,
                                               const std::vector<double>& fallback) const {
  const auto v = get(key);
  if (!v) return fallback;
  std::vector<double> out;
  for (const auto& item : split_list(*v))
    out.push_back(parse_double_field(item, "config key " + key, 0));
  if (out.empty()) throw config_error("config key " + key + ": empty list");
  return out;
}

std::vector<size_t> RunConfig::get_size_list(const std::string& key,
                                             const std::vector<size_t>& fallback) const {
  const auto v = get(key);
  if (!v) return fallback;
  std::vector<size_t> out;
  for (const auto& item : split_list(*v)) {
    const long long parsed = parse_int_field(item, "config key " + key, 0);
    if (parsed <= 0) throw config_error("config key " + key + ": entries must be positive");
    out.push_back(static_cast<size_t>(parsed));
  }
  if (out.empty()) throw config_error("config key " + key + ": empty list");
  return out;
}

std::string RunConfig::canonical() const {
  std::string out;
  for (const auto& [k, v] : values_) {
    out += k;
    out += '=';
    out += v;
    out += '\n';
  }
  return out;
}

std::string RunConfig::hash() const { return fnv1a64_hex(canonical()); }

uint64_t fnv1a64(std::string_view bytes) {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string fnv1a64_hex(std::string_view bytes) {
  char buf[24];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(fnv1a64(bytes)));
  return buf;
}

std::string file_digest(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("cannot open " + path.string() + " for digest");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return fnv1a64_hex(buffer.str());
}

void update_manifest(const std::filesystem::path& out_dir, const std::string& command,
                     uint64_t seed, const std::string& config_hash,
                     const std::vector<std::filesystem::path>& inputs,
                     const std::vector<std::filesystem::path>& outputs) {
  using ordered_json = nlohmann::ordered_json;
  const auto manifest_path = out_dir / "manifest.json";
  ordered_json manifest;
  if (std::filesystem::exists(manifest_path)) {
    std::ifstream in(manifest_path);
    try {
      manifest = ordered_json::parse(in);
    } catch (const std::exception&) {
      manifest = ordered_json();  // rewrite a corrupt manifest
    }
  }
  if (!manifest.contains("tool_version")) {
    manifest["tool_version"] = kToolVersion;
    manifest["runs"] = ordered_json::array();
  }

  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  char stamp[32];
  std::strftime(stamp, sizeof(stamp), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));

  ordered_json run;
  run["command"] = command;
  run["seed"] = seed;
  run["config_hash"] = config_hash;
  run["timestamp_utc"] = stamp;
  ordered_json in_list = ordered_json::array();
  for (const auto& p : inputs)
    in_list.push_back({{"path", p.string()}, {"fnv1a64", file_digest(p)}});
  run["inputs"] = std::move(in_list);
  ordered_json out_list = ordered_json::array();
  for (const auto& p : outputs)
    out_list.push_back({{"path", p.string()}, {"fnv1a64", file_digest(p)}});
  run["outputs"] = std::move(out_list);
  manifest["runs"].push_back(std::move(run));

  std::ofstream out(manifest_path, std::ios::binary);
  if (!out) throw io_error("cannot open " + manifest_path.string() + " for writing");
  out << manifest.dump(2) << '\n';
}

}  // namespace xalign
