// SPDX-License-Identifier: Apache-2.0
#include "cachenet/kvconfig.hpp"

#include <cerrno>
#include <charconv>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "cachenet/errors.hpp"

namespace cachenet {
namespace {

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

}  // namespace

KvMap parse_kv(const std::string& text) {
  KvMap kv;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(lineno) +
                        ": expected key=value");
    const std::string key = trim(line.substr(0, eq));
    if (key.empty())
      throw ConfigError("config line " + std::to_string(lineno) +
                        ": empty key");
    if (!kv.emplace(key, trim(line.substr(eq + 1))).second)
      throw ConfigError("config line " + std::to_string(lineno) +
                        ": duplicate key '" + key + "'");
  }
  return kv;
}

std::string serialize_kv(const KvMap& kv) {
  std::string out;
  for (const auto& [key, value] : kv) {
    out += key;
    out += " = ";
    out += value;
    out += '\n';
  }
  return out;
}

KvMap load_kv_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_kv(buf.str());
}

void save_kv_file(const std::string& path, const KvMap& kv) {
  write_file_atomic(path, serialize_kv(kv));
}

std::string kv_string(const KvMap& kv, const std::string& key) {
  const auto it = kv.find(key);
  if (it == kv.end()) throw ConfigError("missing config key: " + key);
  return it->second;
}

std::int64_t kv_int(const KvMap& kv, const std::string& key) {
  const std::string s = kv_string(kv, key);
  std::int64_t v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size())
    throw ConfigError("config key '" + key + "' is not an integer: " + s);
  return v;
}

double kv_double(const KvMap& kv, const std::string& key) {
  const std::string s = kv_string(kv, key);
  errno = 0;
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (errno != 0 || end != s.c_str() + s.size() || s.empty())
    throw ConfigError("config key '" + key + "' is not a number: " + s);
  return v;
}

std::string kv_string_or(const KvMap& kv, const std::string& key,
                         const std::string& fallback) {
  const auto it = kv.find(key);
  return it == kv.end() ? fallback : it->second;
}

std::int64_t kv_int_or(const KvMap& kv, const std::string& key,
                       std::int64_t fallback) {
  return kv.count(key) ? kv_int(kv, key) : fallback;
}

double kv_double_or(const KvMap& kv, const std::string& key, double fallback) {
  return kv.count(key) ? kv_double(kv, key) : fallback;
}

void write_file_atomic(const std::string& path,
                       std::span<const std::uint8_t> bytes) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError("cannot write file: " + tmp);
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out) throw ConfigError("short write: " + tmp);
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw ConfigError("cannot move " + tmp + " into place: " + ec.message());
}

void write_file_atomic(const std::string& path, const std::string& text) {
  write_file_atomic(path,
                    std::span<const std::uint8_t>(
                        reinterpret_cast<const std::uint8_t*>(text.data()),
                        text.size()));
}

}  // namespace cachenet
