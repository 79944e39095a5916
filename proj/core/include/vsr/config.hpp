#pragma once

#include <map>
#include <string>
#include <vector>

// Flat key/value config files: one "key = value" per line, '#' comments.
namespace vsr::cfg {

using KvMap = std::map<std::string, std::string>;

KvMap parse_kv_text(const std::string& text);
KvMap load_kv_file(const std::string& path);
std::string serialize_kv(const KvMap& kv);

// Typed readers; throw std::invalid_argument naming the key on bad values.
int get_int(const KvMap& kv, const std::string& key, int fallback);
double get_double(const KvMap& kv, const std::string& key, double fallback);
bool get_bool(const KvMap& kv, const std::string& key, bool fallback);
std::string get_string(const KvMap& kv, const std::string& key, const std::string& fallback);
std::vector<int> get_int_list(const KvMap& kv, const std::string& key,
                              const std::vector<int>& fallback);
std::vector<double> get_double_list(const KvMap& kv, const std::string& key,
                                    const std::vector<double>& fallback);
bool has(const KvMap& kv, const std::string& key);

}  // namespace vsr::cfg
