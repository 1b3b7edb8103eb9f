#include "looplab/config.hpp"

#include <fstream>
#include <sstream>

#include "looplab/errors.hpp"

namespace looplab {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

RunConfig RunConfig::parse(std::istream& is) {
  RunConfig c;
  std::string line, section;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    if (t.front() == '[') {
      if (t.back() != ']' || t.size() < 3) throw ParseError("config line " + std::to_string(lineno) + ": bad section header");
      section = trim(t.substr(1, t.size() - 2));
      continue;
    }
    const auto eq = t.find('=');
    if (eq == std::string::npos) throw ParseError("config line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = trim(t.substr(0, eq));
    if (key.empty()) throw ParseError("config line " + std::to_string(lineno) + ": empty key");
    const std::string value = trim(t.substr(eq + 1));
    if (section.empty() && key == "subcommand")
      c.subcommand = value;
    else
      c.values_[section.empty() ? key : section + "." + key] = value;
  }
  return c;
}

RunConfig RunConfig::parse_text(const std::string& text) {
  std::istringstream is(text);
  return parse(is);
}

RunConfig RunConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open config file: " + path);
  return parse(in);
}

std::string RunConfig::to_text() const {
  std::ostringstream os;
  if (!subcommand.empty()) os << "subcommand = " << subcommand << "\n";
  std::map<std::string, std::vector<std::pair<std::string, std::string>>> sections;
  for (const auto& [k, v] : values_) {
    const auto dot = k.find('.');
    if (dot == std::string::npos)
      os << k << " = " << v << "\n";
    else
      sections[k.substr(0, dot)].emplace_back(k.substr(dot + 1), v);
  }
  for (const auto& [name, entries] : sections) {
    os << "[" << name << "]\n";
    for (const auto& [k, v] : entries) os << k << " = " << v << "\n";
  }
  return os.str();
}

void RunConfig::set(const std::string& key, const std::string& value) { values_[key] = value; }

std::string RunConfig::resolve(const std::string& key) const {
  if (!subcommand.empty() && values_.count(subcommand + "." + key)) return subcommand + "." + key;
  return key;
}

bool RunConfig::has(const std::string& key) const { return values_.count(resolve(key)) > 0; }

std::string RunConfig::get(const std::string& key, const std::string& fallback) const {
  auto it = values_.find(resolve(key));
  return it == values_.end() ? fallback : it->second;
}

double RunConfig::get_double(const std::string& key, double fallback) const {
  if (!has(key)) return fallback;
  const std::string v = get(key);
  try {
    size_t used = 0;
    const double x = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::logic_error&) {
    throw ParseError("config key " + key + ": not a number: " + v);
  }
}

long RunConfig::get_long(const std::string& key, long fallback) const {
  if (!has(key)) return fallback;
  const std::string v = get(key);
  try {
    size_t used = 0;
    const long x = std::stol(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::logic_error&) {
    throw ParseError("config key " + key + ": not an integer: " + v);
  }
}

std::vector<std::string> RunConfig::get_list(const std::string& key, char sep) const {
  std::vector<std::string> out;
  const std::string v = get(key);
  if (trim(v).empty()) return out;
  std::istringstream is(v);
  std::string part;
  while (std::getline(is, part, sep)) out.push_back(trim(part));
  return out;
}

std::vector<double> RunConfig::get_doubles(const std::string& key) const {
  std::vector<double> out;
  for (const auto& s : get_list(key)) {
    try {
      size_t used = 0;
      out.push_back(std::stod(s, &used));
      if (used != s.size()) throw std::invalid_argument(s);
    } catch (const std::logic_error&) {
      throw ParseError("config key " + key + ": not a number: " + s);
    }
  }
  return out;
}

std::string format_double(double x) {
  std::ostringstream os;
  os.precision(17);
  os << x;
  return os.str();
}

}  // namespace looplab
