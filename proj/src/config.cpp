#include "tubal/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

#include "tubal/error.hpp"

namespace tubal {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

template <class T>
T parse_number(const std::string& s, std::string_view key) {
  T v{};
  const char* first = s.data();
  const char* last = s.data() + s.size();
  if (!s.empty() && *first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last)
    raise(ErrorCode::config, "key '" + std::string(key) + "': cannot parse '" + s + "'");
  return v;
}

}  // namespace

Config Config::parse(std::istream& is, const std::string& origin) {
  Config c;
  c.origin_ = origin;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const std::string body = trim(line);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    const std::string where = origin + ":" + std::to_string(lineno);
    if (eq == std::string::npos) raise(ErrorCode::config, where + ": expected key = value");
    const std::string key = trim(std::string_view(body).substr(0, eq));
    if (key.empty()) raise(ErrorCode::config, where + ": empty key");
    std::vector<std::string> values;
    std::stringstream rest(body.substr(eq + 1));
    std::string item;
    while (std::getline(rest, item, ',')) values.push_back(trim(item));
    if (values.empty() || std::any_of(values.begin(), values.end(),
                                      [](const std::string& v) { return v.empty(); }))
      raise(ErrorCode::config, where + ": empty value for '" + key + "'");
    if (!c.entries_.emplace(key, std::move(values)).second)
      raise(ErrorCode::config, where + ": duplicate key '" + key + "'");
  }
  return c;
}

Config Config::parse_string(const std::string& text) {
  std::istringstream is(text);
  return parse(is);
}

Config Config::load(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) raise(ErrorCode::io, "cannot open config " + path.string());
  return parse(is, path.string());
}

bool Config::has(std::string_view key) const { return find(key) != nullptr; }

void Config::set(const std::string& key, std::vector<std::string> values) {
  entries_[key] = std::move(values);
}

const std::vector<std::string>* Config::find(std::string_view key) const {
  const auto it = entries_.find(key);
  return it == entries_.end() ? nullptr : &it->second;
}

std::string Config::scalar(std::string_view key) const {
  const auto* v = find(key);
  if (v->size() != 1) raise(ErrorCode::config, "key '" + std::string(key) + "' takes one value");
  return v->front();
}

std::vector<std::string> Config::strings(std::string_view key, std::vector<std::string> fallback) const {
  const auto* v = find(key);
  return v ? *v : fallback;
}

std::vector<double> Config::reals(std::string_view key, std::vector<double> fallback) const {
  const auto* v = find(key);
  if (!v) return fallback;
  std::vector<double> out;
  for (const auto& s : *v) out.push_back(parse_number<double>(s, key));
  return out;
}

std::vector<Index> Config::integers(std::string_view key, std::vector<Index> fallback) const {
  const auto* v = find(key);
  if (!v) return fallback;
  std::vector<Index> out;
  for (const auto& s : *v) out.push_back(parse_number<Index>(s, key));
  return out;
}

std::string Config::text(std::string_view key, const std::string& fallback) const {
  return has(key) ? scalar(key) : fallback;
}

double Config::real(std::string_view key, double fallback) const {
  return has(key) ? parse_number<double>(scalar(key), key) : fallback;
}

Index Config::integer(std::string_view key, Index fallback) const {
  return has(key) ? parse_number<Index>(scalar(key), key) : fallback;
}

std::uint64_t Config::unsigned_integer(std::string_view key, std::uint64_t fallback) const {
  return has(key) ? parse_number<std::uint64_t>(scalar(key), key) : fallback;
}

bool Config::flag(std::string_view key, bool fallback) const {
  if (!has(key)) return fallback;
  const std::string v = scalar(key);
  if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
  if (v == "0" || v == "false" || v == "no" || v == "off") return false;
  raise(ErrorCode::config, "key '" + std::string(key) + "': expected a boolean, got '" + v + "'");
}

void Config::require_known(std::initializer_list<std::string_view> allowed) const {
  for (const auto& [key, values] : entries_) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
      raise(ErrorCode::config, origin_ + ": unknown key '" + key + "'");
  }
}

}  // namespace tubal
