#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "bandwig/errors.hpp"

namespace bandwig {

using json = nlohmann::json;

// Shortest round-trip decimal rendering used in every CSV/JSON number we emit.
inline std::string format_g17(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return std::string(buf);
}

inline std::uint64_t fnv1a64(std::string_view data) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : data) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

inline std::string to_hex(std::uint64_t v) {
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return std::string(buf);
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open file: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline std::uint64_t fnv1a64_file(const std::filesystem::path& path) {
  return fnv1a64(read_file(path));
}

// Write via temp file + rename so readers never observe a partial file.
inline void atomic_write(const std::filesystem::path& path, std::string_view content) {
  std::filesystem::create_directories(path.parent_path());
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw NumericError("cannot open for writing: " + tmp.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw NumericError("write failed: " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

inline void write_json_atomic(const std::filesystem::path& path, const json& j) {
  atomic_write(path, j.dump(2) + "\n");
}

// Minimal CSV emitter: UTF-8, LF line endings, %.17g numbers.
class CsvWriter {
 public:
  explicit CsvWriter(std::vector<std::string> header) : ncols_(header.size()) {
    append_row(header);
  }
  void add_row(const std::vector<std::string>& cells) {
    if (cells.size() != ncols_) throw ConfigError("CsvWriter: column count mismatch");
    append_row(cells);
  }
  const std::string& content() const { return out_; }
  void write(const std::filesystem::path& path) const { atomic_write(path, out_); }

  static std::string cell(double x) { return format_g17(x); }
  static std::string cell(std::int64_t x) { return std::to_string(x); }
  static std::string cell(int x) { return std::to_string(x); }
  static std::string cell(const std::string& s) { return s; }

 private:
  void append_row(const std::vector<std::string>& cells) {
    for (std::size_t k = 0; k < cells.size(); ++k) {
      if (k) out_ += ',';
      out_ += cells[k];
    }
    out_ += '\n';
  }
  std::size_t ncols_;
  std::string out_;
};

// Flat key = value configuration file: '#' starts a comment, blank lines
// ignored, keys unique. Errors carry line numbers.
class ConfigMap {
 public:
  static ConfigMap parse(const std::string& text) {
    ConfigMap m;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      const std::size_t hash = line.find('#');
      if (hash != std::string::npos) line.erase(hash);
      const std::string trimmed = trim(line);
      if (trimmed.empty()) continue;
      const std::size_t eq = trimmed.find('=');
      if (eq == std::string::npos)
        throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
      const std::string key = trim(trimmed.substr(0, eq));
      const std::string value = trim(trimmed.substr(eq + 1));
      if (key.empty())
        throw ConfigError("config line " + std::to_string(lineno) + ": empty key");
      if (m.kv_.count(key))
        throw ConfigError("config line " + std::to_string(lineno) + ": duplicate key '" + key + "'");
      m.kv_[key] = value;
    }
    return m;
  }
  static ConfigMap parse_file(const std::filesystem::path& path) {
    return parse(read_file(path));
  }

  bool has(const std::string& key) const { return kv_.count(key) != 0; }

  std::string get_string(const std::string& key) const {
    auto it = kv_.find(key);
    if (it == kv_.end()) throw ConfigError("config: missing required key '" + key + "'");
    return it->second;
  }
  std::string get_string(const std::string& key, const std::string& dflt) const {
    auto it = kv_.find(key);
    return it == kv_.end() ? dflt : it->second;
  }
  double get_double(const std::string& key) const { return parse_double(key, get_string(key)); }
  double get_double(const std::string& key, double dflt) const {
    return has(key) ? get_double(key) : dflt;
  }
  std::int64_t get_int(const std::string& key) const { return parse_int(key, get_string(key)); }
  std::int64_t get_int(const std::string& key, std::int64_t dflt) const {
    return has(key) ? get_int(key) : dflt;
  }
  std::uint64_t get_u64(const std::string& key) const {
    const std::string s = get_string(key);
    try {
      std::size_t pos = 0;
      const std::uint64_t v = std::stoull(s, &pos);
      if (pos != s.size()) throw std::invalid_argument("trailing");
      return v;
    } catch (const std::exception&) {
      throw ConfigError("config: key '" + key + "' is not an unsigned integer: " + s);
    }
  }
  std::uint64_t get_u64(const std::string& key, std::uint64_t dflt) const {
    return has(key) ? get_u64(key) : dflt;
  }
  std::vector<std::int64_t> get_int_list(const std::string& key) const {
    std::vector<std::int64_t> out;
    for (const std::string& tok : split_list(get_string(key)))
      out.push_back(parse_int(key, tok));
    if (out.empty()) throw ConfigError("config: key '" + key + "' is an empty list");
    return out;
  }
  std::vector<double> get_double_list(const std::string& key) const {
    std::vector<double> out;
    for (const std::string& tok : split_list(get_string(key)))
      out.push_back(parse_double(key, tok));
    if (out.empty()) throw ConfigError("config: key '" + key + "' is an empty list");
    return out;
  }
  bool get_bool(const std::string& key, bool dflt) const {
    if (!has(key)) return dflt;
    const std::string s = get_string(key);
    if (s == "true" || s == "1" || s == "yes") return true;
    if (s == "false" || s == "0" || s == "no") return false;
    throw ConfigError("config: key '" + key + "' is not a boolean: " + s);
  }

  void require_known_keys(const std::set<std::string>& allowed) const {
    for (const auto& kv : kv_)
      if (!allowed.count(kv.first))
        throw ConfigError("config: unknown key '" + kv.first + "'");
  }

  const std::map<std::string, std::string>& entries() const { return kv_; }

  json to_json() const {
    json j = json::object();
    for (const auto& kv : kv_) j[kv.first] = kv.second;
    return j;
  }

 private:
  static std::string trim(const std::string& s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
  }
  static std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
      if (c == ',') {
        out.push_back(trim(cur));
        cur.clear();
      } else {
        cur += c;
      }
    }
    const std::string last = trim(cur);
    if (!last.empty() || !out.empty()) out.push_back(last);
    return out;
  }
  static double parse_double(const std::string& key, const std::string& s) {
    try {
      std::size_t pos = 0;
      const double v = std::stod(s, &pos);
      if (pos != s.size()) throw std::invalid_argument("trailing");
      return v;
    } catch (const std::exception&) {
      throw ConfigError("config: key '" + key + "' is not a number: " + s);
    }
  }
  static std::int64_t parse_int(const std::string& key, const std::string& s) {
    try {
      std::size_t pos = 0;
      const std::int64_t v = std::stoll(s, &pos);
      if (pos != s.size()) throw std::invalid_argument("trailing");
      return v;
    } catch (const std::exception&) {
      throw ConfigError("config: key '" + key + "' is not an integer: " + s);
    }
  }

  std::map<std::string, std::string> kv_;
};

} // namespace bandwig
