#include "vsr/config.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include "vsr/image.hpp"

namespace vsr::cfg {

namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

}  // namespace

KvMap parse_kv_text(const std::string& text) {
  KvMap kv;
  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("config line " + std::to_string(lineno) +
                                  ": expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty())
      throw std::invalid_argument("config line " + std::to_string(lineno) + ": empty key");
    kv[key] = value;
  }
  return kv;
}

KvMap load_kv_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open config file: " + path);
  std::stringstream ss;
  ss << is.rdbuf();
  return parse_kv_text(ss.str());
}

std::string serialize_kv(const KvMap& kv) {
  std::ostringstream os;
  for (const auto& [k, v] : kv) os << k << " = " << v << "\n";
  return os.str();
}

bool has(const KvMap& kv, const std::string& key) { return kv.count(key) > 0; }

int get_int(const KvMap& kv, const std::string& key, int fallback) {
  auto it = kv.find(key);
  if (it == kv.end()) return fallback;
  try {
    std::size_t pos = 0;
    const int v = std::stoi(it->second, &pos);
    if (pos != it->second.size()) throw std::invalid_argument("");
    return v;
  } catch (...) {
    throw std::invalid_argument("config key '" + key + "': expected integer, got '" +
                                it->second + "'");
  }
}

double get_double(const KvMap& kv, const std::string& key, double fallback) {
  auto it = kv.find(key);
  if (it == kv.end()) return fallback;
  try {
    std::size_t pos = 0;
    const double v = std::stod(it->second, &pos);
    if (pos != it->second.size()) throw std::invalid_argument("");
    return v;
  } catch (...) {
    throw std::invalid_argument("config key '" + key + "': expected number, got '" +
                                it->second + "'");
  }
}

bool get_bool(const KvMap& kv, const std::string& key, bool fallback) {
  auto it = kv.find(key);
  if (it == kv.end()) return fallback;
  const std::string& v = it->second;
  if (v == "true" || v == "1" || v == "on" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "off" || v == "no") return false;
  throw std::invalid_argument("config key '" + key + "': expected boolean, got '" + v + "'");
}

std::string get_string(const KvMap& kv, const std::string& key, const std::string& fallback) {
  auto it = kv.find(key);
  return it == kv.end() ? fallback : it->second;
}

namespace {

std::vector<std::string> split_commas(const std::string& s) {
  std::vector<std::string> parts;
  std::string cur;
  std::istringstream is(s);
  while (std::getline(is, cur, ',')) parts.push_back(trim(cur));
  return parts;
}

}  // namespace

std::vector<int> get_int_list(const KvMap& kv, const std::string& key,
                              const std::vector<int>& fallback) {
  auto it = kv.find(key);
  if (it == kv.end()) return fallback;
  std::vector<int> out;
  for (const auto& p : split_commas(it->second)) {
    try {
      out.push_back(std::stoi(p));
    } catch (...) {
      throw std::invalid_argument("config key '" + key + "': expected integer list");
    }
  }
  return out;
}

std::vector<double> get_double_list(const KvMap& kv, const std::string& key,
                                    const std::vector<double>& fallback) {
  auto it = kv.find(key);
  if (it == kv.end()) return fallback;
  std::vector<double> out;
  for (const auto& p : split_commas(it->second)) {
    try {
      out.push_back(std::stod(p));
    } catch (...) {
      throw std::invalid_argument("config key '" + key + "': expected number list");
    }
  }
  return out;
}

}  // namespace vsr::cfg
