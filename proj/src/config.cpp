#include "peal/config.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

namespace peal {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string field(const std::string& section, const std::string& key) { return section + "." + key; }

std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(trim(item));
  return out;
}

double to_double(const std::string& s, const std::string& name) {
  std::size_t pos = 0;
  double v = 0;
  try {
    v = std::stod(s, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos == 0 || pos != s.size()) throw ParameterError(name + ": expected a number, got '" + s + "'");
  return v;
}

long to_long(const std::string& s, const std::string& name) {
  std::size_t pos = 0;
  long v = 0;
  try {
    v = std::stol(s, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos == 0 || pos != s.size()) throw ParameterError(name + ": expected an integer, got '" + s + "'");
  return v;
}

}  // namespace

RunConfig RunConfig::parse(const std::string& text) {
  RunConfig c;
  std::istringstream is(text);
  std::string line;
  std::string section = "run";
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#' || t[0] == ';') continue;
    if (t.front() == '[') {
      if (t.back() != ']' || t.size() < 3)
        throw ParameterError("config line " + std::to_string(lineno) + ": malformed section header");
      section = trim(t.substr(1, t.size() - 2));
      continue;
    }
    const auto eq = t.find('=');
    if (eq == std::string::npos)
      throw ParameterError("config line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = trim(t.substr(0, eq));
    if (key.empty()) throw ParameterError("config line " + std::to_string(lineno) + ": empty key");
    c.set(section, key, trim(t.substr(eq + 1)));
  }
  return c;
}

RunConfig RunConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParameterError("config: cannot open '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

std::string RunConfig::to_string() const {
  std::string out;
  for (const auto& [name, entries] : sections_) {
    if (!out.empty()) out += "\n";
    out += "[" + name + "]\n";
    for (const auto& [k, v] : entries) out += k + " = " + v + "\n";
  }
  return out;
}

std::optional<std::string> RunConfig::raw(const std::string& section, const std::string& key) const {
  for (const auto& [name, entries] : sections_) {
    if (name != section) continue;
    for (const auto& [k, v] : entries)
      if (k == key) return v;
  }
  return std::nullopt;
}

bool RunConfig::has(const std::string& section, const std::string& key) const {
  return raw(section, key).has_value();
}

void RunConfig::set(const std::string& section, const std::string& key, std::string value) {
  auto it = std::find_if(sections_.begin(), sections_.end(), [&](const auto& s) { return s.first == section; });
  if (it == sections_.end()) {
    sections_.push_back({section, {}});
    it = std::prev(sections_.end());
  }
  for (auto& [k, v] : it->second) {
    if (k == key) {
      v = std::move(value);
      return;
    }
  }
  it->second.emplace_back(key, std::move(value));
}

std::string RunConfig::get_string(const std::string& section, const std::string& key,
                                  const std::string& fallback) const {
  return raw(section, key).value_or(fallback);
}

double RunConfig::get_double(const std::string& section, const std::string& key, double fallback) const {
  const auto v = raw(section, key);
  return v ? to_double(*v, field(section, key)) : fallback;
}

long RunConfig::get_int(const std::string& section, const std::string& key, long fallback) const {
  const auto v = raw(section, key);
  return v ? to_long(*v, field(section, key)) : fallback;
}

std::uint64_t RunConfig::get_uint(const std::string& section, const std::string& key,
                                  std::uint64_t fallback) const {
  const auto v = raw(section, key);
  if (!v) return fallback;
  std::size_t pos = 0;
  std::uint64_t out = 0;
  try {
    if (!v->empty() && (*v)[0] != '-') out = std::stoull(*v, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos == 0 || pos != v->size())
    throw ParameterError(field(section, key) + ": expected a non-negative integer, got '" + *v + "'");
  return out;
}

bool RunConfig::get_bool(const std::string& section, const std::string& key, bool fallback) const {
  const auto v = raw(section, key);
  if (!v) return fallback;
  std::string s = *v;
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
  if (s == "false" || s == "0" || s == "no" || s == "off") return false;
  throw ParameterError(field(section, key) + ": expected true/false, got '" + *v + "'");
}

std::vector<double> RunConfig::get_doubles(const std::string& section, const std::string& key,
                                           const std::vector<double>& fallback) const {
  const auto v = raw(section, key);
  if (!v) return fallback;
  if (v->empty()) throw ParameterError(field(section, key) + ": grid must not be empty");
  std::vector<double> out;
  for (const auto& item : split_list(*v)) out.push_back(to_double(item, field(section, key)));
  return out;
}

std::vector<long> RunConfig::get_ints(const std::string& section, const std::string& key,
                                      const std::vector<long>& fallback) const {
  const auto v = raw(section, key);
  if (!v) return fallback;
  if (v->empty()) throw ParameterError(field(section, key) + ": grid must not be empty");
  std::vector<long> out;
  for (const auto& item : split_list(*v)) out.push_back(to_long(item, field(section, key)));
  return out;
}

HolsteinParams RunConfig::holstein(HolsteinParams p) const {
  p.L = static_cast<int>(get_int("model", "L", p.L));
  p.t_nn = get_double("model", "t_nn", p.t_nn);
  p.g = get_double("model", "g", p.g);
  p.k = get_double("model", "k", p.k);
  p.M = get_double("model", "M", p.M);
  p.gamma = get_double("model", "gamma", p.gamma);
  p.dt = get_double("model", "dt", p.dt);
  p.filling = static_cast<int>(get_int("model", "filling", p.filling));
  try {
    p.validate();
  } catch (const ParameterError& e) {
    throw ParameterError(std::string("model.") + e.what());
  }
  return p;
}

}  // namespace peal
