// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>

namespace cachenet {

// Flat key=value configuration text: one pair per line, '#' starts a
// comment, blank lines ignored, whitespace around keys and values trimmed.
// The map is ordered so serialization is deterministic.
using KvMap = std::map<std::string, std::string>;

KvMap parse_kv(const std::string& text);  // ConfigError on bad or duplicate lines
std::string serialize_kv(const KvMap& kv);

KvMap load_kv_file(const std::string& path);  // ConfigError if unreadable
void save_kv_file(const std::string& path, const KvMap& kv);

// Typed lookups; the _or forms fall back, the plain forms throw ConfigError
// when the key is missing or unparsable.
std::string kv_string(const KvMap& kv, const std::string& key);
std::int64_t kv_int(const KvMap& kv, const std::string& key);
double kv_double(const KvMap& kv, const std::string& key);
std::string kv_string_or(const KvMap& kv, const std::string& key,
                         const std::string& fallback);
std::int64_t kv_int_or(const KvMap& kv, const std::string& key,
                       std::int64_t fallback);
double kv_double_or(const KvMap& kv, const std::string& key, double fallback);

// Whole-file write through a temporary in the same directory plus rename, so
// readers never observe a partial file.
void write_file_atomic(const std::string& path,
                       std::span<const std::uint8_t> bytes);
void write_file_atomic(const std::string& path, const std::string& text);

}  // namespace cachenet
