#pragma once

#include <cstdint>
#include <filesystem>
#include <initializer_list>
#include <iosfwd>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "tubal/talg.hpp"

namespace tubal {

/// Flat `key = value` file. Values may be comma-separated lists; `#` starts
/// a comment. Every accessor throws ErrorCode::config on malformed input.
class Config {
 public:
  static Config parse(std::istream& is, const std::string& origin = "<config>");
  static Config parse_string(const std::string& text);
  static Config load(const std::filesystem::path& path);

  bool has(std::string_view key) const;
  void set(const std::string& key, std::vector<std::string> values);

  std::vector<std::string> strings(std::string_view key, std::vector<std::string> fallback = {}) const;
  std::vector<double> reals(std::string_view key, std::vector<double> fallback = {}) const;
  std::vector<Index> integers(std::string_view key, std::vector<Index> fallback = {}) const;

  std::string text(std::string_view key, const std::string& fallback) const;
  double real(std::string_view key, double fallback) const;
  Index integer(std::string_view key, Index fallback) const;
  std::uint64_t unsigned_integer(std::string_view key, std::uint64_t fallback) const;
  bool flag(std::string_view key, bool fallback) const;

  /// Throws on any key outside `allowed`.
  void require_known(std::initializer_list<std::string_view> allowed) const;

  const std::map<std::string, std::vector<std::string>, std::less<>>& entries() const { return entries_; }

 private:
  const std::vector<std::string>* find(std::string_view key) const;
  std::string scalar(std::string_view key) const;

  std::map<std::string, std::vector<std::string>, std::less<>> entries_;
  std::string origin_;
};

}  // namespace tubal
