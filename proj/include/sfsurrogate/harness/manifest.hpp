#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "sfsurrogate/io/csv.hpp"
#include "sfsurrogate/io/digest.hpp"

namespace sfs::harness {

/// Ordered key=value record of a run. Artifact digests use "file.<name>" keys.
class Manifest {
 public:
  void set(std::string key, std::string value) {
    if (key.find_first_of("=\n") != std::string::npos || value.find('\n') != std::string::npos) {
      throw FormatError("manifest entry \"" + key + "\" contains a separator");
    }
    for (auto& e : entries_) {
      if (e.first == key) {
        e.second = std::move(value);
        return;
      }
    }
    entries_.emplace_back(std::move(key), std::move(value));
  }

  const std::string* find(std::string_view key) const {
    for (const auto& e : entries_) {
      if (e.first == key) return &e.second;
    }
    return nullptr;
  }

  const std::string& get(std::string_view key) const {
    if (const auto* v = find(key)) return *v;
    throw FormatError("manifest has no \"" + std::string(key) + "\" entry");
  }

  void add_file(const std::filesystem::path& dir, const std::string& name) {
    set("file." + name, io::sha256_file(dir / name));
  }

  std::vector<std::string> files() const {
    std::vector<std::string> out;
    for (const auto& [k, v] : entries_) {
      if (k.rfind("file.", 0) == 0) out.push_back(k.substr(5));
    }
    return out;
  }

  const std::vector<std::pair<std::string, std::string>>& entries() const { return entries_; }

  std::string serialize() const {
    std::string out;
    for (const auto& [k, v] : entries_) out += k + "=" + v + "\n";
    return out;
  }

  static Manifest parse(const std::string& text) {
    Manifest m;
    std::size_t start = 0;
    while (start < text.size()) {
      auto end = text.find('\n', start);
      if (end == std::string::npos) end = text.size();
      const std::string line = text.substr(start, end - start);
      start = end + 1;
      if (line.empty()) continue;
      const auto eq = line.find('=');
      if (eq == std::string::npos) throw FormatError("manifest line without '=': " + line);
      m.set(line.substr(0, eq), line.substr(eq + 1));
    }
    return m;
  }

  static Manifest load(const std::filesystem::path& path) { return parse(io::read_text(path)); }

 private:
  std::vector<std::pair<std::string, std::string>> entries_;
};

inline constexpr const char* manifest_name = "manifest.txt";

/// Names of listed artifacts whose current digest differs (or that vanished).
inline std::vector<std::string> verify_manifest(const std::filesystem::path& dir) {
  const Manifest m = Manifest::load(dir / manifest_name);
  std::vector<std::string> bad;
  for (const auto& name : m.files()) {
    const auto path = dir / name;
    if (!std::filesystem::exists(path) || io::sha256_file(path) != m.get("file." + name)) {
      bad.push_back(name);
    }
  }
  return bad;
}

}  // namespace sfs::harness
