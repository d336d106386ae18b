#include "cnf/config.hpp"

#include "cnf/errors.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace cnf {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

bool valid_name(const std::string& s) {
  return !s.empty() && std::all_of(s.begin(), s.end(), [](char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.' || c == '-';
  });
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, ',')) out.push_back(trim(cur));
  return out;
}

}  // namespace

RunConfig RunConfig::parse(const std::string& text) {
  RunConfig cfg;
  std::istringstream in(text);
  std::string raw;
  std::size_t line = 0;
  std::string section;
  while (std::getline(in, raw)) {
    ++line;
    std::string s = trim(raw);
    if (s.empty() || s[0] == '#' || s[0] == ';') continue;
    if (s[0] == '[') {
      const auto close = s.find(']');
      if (close == std::string::npos) throw ConfigError(line, "missing ']' in section header");
      const std::string rest = trim(s.substr(close + 1));
      if (!rest.empty() && rest[0] != '#') throw ConfigError(line, "unexpected text after section header");
      section = trim(s.substr(1, close - 1));
      if (!valid_name(section)) throw ConfigError(line, "invalid section name '" + section + "'");
      if (cfg.section_lines_.count(section)) throw ConfigError(line, "section [" + section + "] appears twice");
      cfg.section_lines_[section] = line;
      cfg.sections_[section];
      continue;
    }
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw ConfigError(line, "expected 'key = value'");
    const std::string key = trim(s.substr(0, eq));
    if (!valid_name(key)) throw ConfigError(line, "invalid key '" + key + "'");
    if (section.empty()) throw ConfigError(line, "key '" + key + "' appears before any [section]");
    std::string value = trim(s.substr(eq + 1));
    if (!value.empty() && value[0] == '"') {
      const auto close = value.find('"', 1);
      if (close == std::string::npos) throw ConfigError(line, "unterminated string");
      const std::string rest = trim(value.substr(close + 1));
      if (!rest.empty() && rest[0] != '#') throw ConfigError(line, "unexpected text after string");
      value = value.substr(1, close - 1);
    } else {
      const auto hash = value.find('#');
      if (hash != std::string::npos) value = trim(value.substr(0, hash));
    }
    auto& sec = cfg.sections_[section];
    if (sec.count(key)) throw ConfigError(line, "key '" + key + "' repeated in [" + section + "]");
    sec[key] = Entry{value, line};
  }
  return cfg;
}

RunConfig RunConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(0, "cannot read config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

const RunConfig::Entry* RunConfig::find(const std::string& section, const std::string& key) const {
  const auto s = sections_.find(section);
  if (s == sections_.end()) return nullptr;
  const auto k = s->second.find(key);
  return k == s->second.end() ? nullptr : &k->second;
}

std::size_t RunConfig::line(const std::string& section, const std::string& key) const {
  const Entry* e = find(section, key);
  return e ? e->line : 0;
}

bool RunConfig::has(const std::string& section, const std::string& key) const { return find(section, key) != nullptr; }

std::string RunConfig::get_string(const std::string& section, const std::string& key, const std::string& fallback) const {
  const Entry* e = find(section, key);
  return e ? e->value : fallback;
}

double RunConfig::get_double(const std::string& section, const std::string& key, double fallback) const {
  const Entry* e = find(section, key);
  if (!e) return fallback;
  double v = 0.0;
  const auto* b = e->value.data();
  const auto* end = b + e->value.size();
  const auto r = std::from_chars(b, end, v);
  if (r.ec != std::errc() || r.ptr != end || !std::isfinite(v)) {
    throw ConfigError(e->line, "[" + section + "] " + key + ": expected a real number, got '" + e->value + "'");
  }
  return v;
}

long RunConfig::get_int(const std::string& section, const std::string& key, long fallback) const {
  const Entry* e = find(section, key);
  if (!e) return fallback;
  long v = 0;
  const auto* b = e->value.data();
  const auto* end = b + e->value.size();
  const auto r = std::from_chars(b, end, v);
  if (r.ec != std::errc() || r.ptr != end) {
    throw ConfigError(e->line, "[" + section + "] " + key + ": expected an integer, got '" + e->value + "'");
  }
  return v;
}

std::uint64_t RunConfig::get_seed(const std::string& section, const std::string& key, std::uint64_t fallback) const {
  const Entry* e = find(section, key);
  if (!e) return fallback;
  std::uint64_t v = 0;
  const auto* b = e->value.data();
  const auto* end = b + e->value.size();
  const auto r = std::from_chars(b, end, v);
  if (r.ec != std::errc() || r.ptr != end) {
    throw ConfigError(e->line, "[" + section + "] " + key + ": expected a non-negative integer");
  }
  return v;
}

bool RunConfig::get_bool(const std::string& section, const std::string& key, bool fallback) const {
  const Entry* e = find(section, key);
  if (!e) return fallback;
  if (e->value == "true" || e->value == "1" || e->value == "yes") return true;
  if (e->value == "false" || e->value == "0" || e->value == "no") return false;
  throw ConfigError(e->line, "[" + section + "] " + key + ": expected true or false");
}

std::vector<double> RunConfig::get_doubles(const std::string& section, const std::string& key,
                                           const std::vector<double>& fallback) const {
  const Entry* e = find(section, key);
  if (!e) return fallback;
  std::vector<double> out;
  for (const auto& item : split_list(e->value)) {
    double v = 0.0;
    const auto r = std::from_chars(item.data(), item.data() + item.size(), v);
    if (item.empty() || r.ec != std::errc() || r.ptr != item.data() + item.size() || !std::isfinite(v)) {
      throw ConfigError(e->line, "[" + section + "] " + key + ": expected a list of real numbers");
    }
    out.push_back(v);
  }
  return out;
}

std::vector<int> RunConfig::get_ints(const std::string& section, const std::string& key,
                                     const std::vector<int>& fallback) const {
  const Entry* e = find(section, key);
  if (!e) return fallback;
  std::vector<int> out;
  for (const auto& item : split_list(e->value)) {
    int v = 0;
    const auto r = std::from_chars(item.data(), item.data() + item.size(), v);
    if (item.empty() || r.ec != std::errc() || r.ptr != item.data() + item.size()) {
      throw ConfigError(e->line, "[" + section + "] " + key + ": expected a list of integers");
    }
    out.push_back(v);
  }
  return out;
}

void RunConfig::set(const std::string& section, const std::string& key, const std::string& value) {
  sections_[section][key] = Entry{value, 0};
}

void RunConfig::check_schema(const ConfigSchema& schema) const {
  for (const auto& [name, keys] : sections_) {
    const auto s = schema.find(name);
    if (s == schema.end()) {
      const auto l = section_lines_.find(name);
      throw ConfigError(l == section_lines_.end() ? 0 : l->second, "unknown section [" + name + "]");
    }
    for (const auto& [key, entry] : keys) {
      if (!s->second.count(key)) throw ConfigError(entry.line, "unknown key '" + key + "' in [" + name + "]");
    }
  }
}

}  // namespace cnf
