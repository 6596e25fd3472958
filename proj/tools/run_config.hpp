#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace bsvie::app {

/// Flat `key = value` configuration with dotted keys.
///
///   # comment
///   grid.N = 64   # trailing comments end a value
///   problem.generator = "-t*y/s^2"
///
/// Values may be double-quoted (with \" and \\ escapes); quote a value that
/// contains #. Every key must be one of RunConfig::schema(); unknown keys
/// are rejected with their line.
class RunConfig {
 public:
  struct Key {
    std::string fallback;
    std::string help;
  };
  static const std::map<std::string, Key>& schema();

  RunConfig();

  static RunConfig parse(std::string_view text, std::string_view origin = "config");
  static RunConfig load(const std::string& path);

  void set(const std::string& key, const std::string& value);
  bool explicitly_set(const std::string& key) const { return set_.count(key) > 0; }

  const std::string& text(const std::string& key) const;
  double number(const std::string& key) const;
  long long integer(const std::string& key) const;
  std::uint64_t unsigned_integer(const std::string& key) const;
  bool flag(const std::string& key) const;

  const std::map<std::string, std::string>& values() const noexcept { return values_; }
  /// Sorted `key = "value"` lines of every key, defaults included.
  std::string canonical() const;
  std::uint64_t hash() const;

 private:
  std::map<std::string, std::string> values_;
  std::set<std::string> set_;
};

std::uint64_t fnv1a(std::string_view bytes);
std::string hex64(std::uint64_t h);

/// "16,32,64" or "16:4096,32:16384"; entries without a path count use
/// `default_paths`.
struct LevelSpec {
  long long steps = 0;
  long long paths = 0;
};
std::vector<LevelSpec> parse_levels(std::string_view text, long long default_paths);

}  // namespace bsvie::app
